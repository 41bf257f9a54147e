"""Agents, their action hierarchies and the post-step update U."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .grounding import Grounding, OperatorInstance
from .model import NONE_ACTION
from .state import WorldState


@dataclass(frozen=True)
class Node:
    op: OperatorInstance
    # subtask label inside the parent method; goal label for roots; None for
    # methods and for idle `none` leaves that are not part of any method
    label: str | None = None

    def as_dict(self) -> dict:
        return {"kind": self.op.kind, "name": self.op.name, "args": list(self.op.args), "label": self.label}


@dataclass
class Hierarchy:
    nodes: list[Node] = field(default_factory=list)
    progress: dict[str, set[str]] = field(default_factory=dict)  # method key -> completed labels

    def copy(self) -> "Hierarchy":
        return Hierarchy(list(self.nodes), {k: set(v) for k, v in self.progress.items()})

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hierarchy):
            return NotImplemented
        strip = lambda p: {k: v for k, v in p.items() if v}
        return self.nodes == other.nodes and strip(self.progress) == strip(other.progress)

    @property
    def tail(self) -> Node | None:
        return self.nodes[-1] if self.nodes else None

    @property
    def root(self) -> Node | None:
        return self.nodes[0] if self.nodes else None

    def keys(self) -> tuple[str, ...]:
        return tuple(n.op.key for n in self.nodes)

    def contains(self, op: OperatorInstance) -> bool:
        return any(n.op == op for n in self.nodes)

    def push(self, node: Node) -> None:
        self.nodes.append(node)
        if node.op.kind == "method":
            self.progress.setdefault(node.op.key, set())

    def pop(self) -> Node:
        node = self.nodes.pop()
        if node.op.kind == "method":
            self.progress.pop(node.op.key, None)
        return node

    def mark_done(self, label: str | None) -> None:
        """Record ``label`` as completed in the method now at the tail."""
        if label is None or not self.nodes or self.nodes[-1].op.kind != "method":
            return
        self.progress.setdefault(self.nodes[-1].op.key, set()).add(label)

    def to_json(self) -> list[dict]:
        out = []
        for n in self.nodes:
            d = n.as_dict()
            if n.op.kind == "method":
                d["progress"] = sorted(self.progress.get(n.op.key, ()))
            out.append(d)
        return out


@dataclass
class AgentRuntime:
    name: str
    policy: Any = None
    hierarchy: Hierarchy = field(default_factory=Hierarchy)
    beliefs: dict[str, "AgentRuntime"] = field(default_factory=dict)
    last_action: OperatorInstance | None = None

    def copy(self, with_beliefs: bool = True) -> "AgentRuntime":
        beliefs = {k: b.copy(False) for k, b in self.beliefs.items()} if with_beliefs else {}
        return AgentRuntime(self.name, self.policy, self.hierarchy.copy(), beliefs, self.last_action)

    def previous_primitive_action(self) -> OperatorInstance | None:
        return self.last_action


def is_idle(node: Node) -> bool:
    return node.op.kind == "action" and node.op.name == NONE_ACTION and node.label is None


def task_effects_hold(grounding: Grounding, op: OperatorInstance, state: WorldState) -> bool:
    """True only for tasks with non-empty effects that all hold."""
    task = grounding.tasks[op.key]
    return task.has_effects and state.satisfies(task.eff_pos, task.eff_neg)


def method_finished(grounding: Grounding, h: Hierarchy, node: Node) -> bool:
    method = grounding.methods[node.op.key]
    return {label for label, _ in method.subtasks} <= h.progress.get(node.op.key, set())


def update_hierarchy(h: Hierarchy, grounding: Grounding, state: WorldState,
                     executed: OperatorInstance | None = None) -> Hierarchy:
    """Leaf-to-root sweep removing completed elements; returns a new hierarchy.

    The leaf action is always removed; it counts as completed only when it is
    the action that was actually executed this step.
    """
    h = h.copy()
    while h.nodes:
        tail = h.nodes[-1]
        kind = tail.op.kind
        if kind == "action":
            h.pop()
            if tail.op == executed and not is_idle(tail):
                h.mark_done(tail.label)
            continue
        if kind == "method":
            if not method_finished(grounding, h, tail):
                break
            h.pop()
            task = h.pop()  # structural completion of the achieved task
            h.mark_done(task.label)
            continue
        if task_effects_hold(grounding, tail.op, state):
            h.pop()
            h.mark_done(tail.label)
            continue
        break
    return h


def update_agent(agent: AgentRuntime, grounding: Grounding, state: WorldState,
                 joint_action: dict[str, OperatorInstance] | None = None) -> AgentRuntime:
    """Apply U to ``agent`` and to every belief it holds (in place; returned for chaining)."""
    joint_action = joint_action or {}
    agent.hierarchy = update_hierarchy(agent.hierarchy, grounding, state, joint_action.get(agent.name))
    if agent.name in joint_action:
        agent.last_action = joint_action[agent.name]
    for belief in agent.beliefs.values():
        update_agent(belief, grounding, state, joint_action)
    return agent


def share_progress(agents, grounding: Grounding, state: WorldState) -> None:
    """Union progress of identical method instances held by several agents.

    Collaborating agents hold the same method instance and each executes only
    its own share of the subtasks; every holder sees the combined progress.
    Repeats U until nothing changes, since merged progress may finish methods.
    """
    agents = list(agents)
    while True:
        merged: dict[str, set[str]] = {}
        for a in agents:
            for key, labels in a.hierarchy.progress.items():
                merged.setdefault(key, set()).update(labels)
        changed = False
        for a in agents:
            for key in a.hierarchy.progress:
                if merged[key] != a.hierarchy.progress[key]:
                    a.hierarchy.progress[key] = set(merged[key])
                    changed = True
            if changed:
                a.hierarchy = update_hierarchy(a.hierarchy, grounding, state)
        if not changed:
            return
