"""Observation vectors and grounded-operator probabilities.

Observation layout, in order:
    [state atoms | goal block | own hierarchy block | one block per other agent]
The goal and hierarchy blocks are multi-hot over (lifted operator names +
objects); each other-agent block is one-hot over lifted action names plus
multi-hot objects of that agent's previous action.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .grounding import Grounding

DYNAMIC = "dynamic"
FULL = "full"


@dataclass(frozen=True)
class PolicyOutput:
    operator_probs: np.ndarray
    object_probs: np.ndarray


@dataclass
class EncodingLayout:
    mode: str
    atoms: list[str]
    operators: list[str]
    actions: list[str]
    objects: list[str]
    agents: list[str]
    atom_index: dict
    operator_index: dict[str, int]
    action_index: dict[str, int]
    object_index: dict[str, int]
    offsets: dict[str, int]
    width: int
    goals: list[tuple] = None  # (label, task name, args) from the problem

    @property
    def output_width(self) -> int:
        return len(self.operators) + len(self.objects)

    @property
    def state_width(self) -> int:
        return len(self.atoms)

    def describe(self) -> dict:
        return {
            "mode": self.mode,
            "hash": self.hash,
            "width": self.width,
            "output_width": self.output_width,
            "offsets": self.offsets,
            "atoms": self.atoms,
            "operators": self.operators,
            "actions": self.actions,
            "objects": self.objects,
            "agents": self.agents,
        }

    @property
    def hash(self) -> str:
        payload = json.dumps(
            [self.mode, self.atoms, self.operators, self.actions, self.objects, self.agents],
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode()).hexdigest()


def build_layout(grounding: Grounding, mode: str = DYNAMIC) -> EncodingLayout:
    if mode not in (DYNAMIC, FULL):
        raise ValueError(f"unknown layout mode {mode!r}")
    atoms = grounding.dynamic_atoms if mode == DYNAMIC else grounding.atoms
    operators = grounding.domain.lifted_operator_names
    actions = grounding.domain.lifted_action_names
    objects = list(grounding.objects)
    agents = list(grounding.agents)
    n_ops, n_obj, n_act = len(operators), len(objects), len(actions)
    offsets = {"state": 0, "goal": len(atoms)}
    offsets["hierarchy"] = offsets["goal"] + n_ops + n_obj
    offsets["others"] = offsets["hierarchy"] + n_ops + n_obj
    width = offsets["others"] + (n_act + n_obj) * max(0, len(agents) - 1)
    return EncodingLayout(
        mode=mode,
        atoms=[a.key for a in atoms],
        operators=operators,
        actions=actions,
        objects=objects,
        agents=agents,
        atom_index={a: i for i, a in enumerate(atoms)},
        operator_index={n: i for i, n in enumerate(operators)},
        action_index={n: i for i, n in enumerate(actions)},
        object_index={o: i for i, o in enumerate(objects)},
        offsets=offsets,
        width=width,
        goals=[(g.label, g.name, g.args) for g in grounding.problem.goal_tasks],
    )


def _mark(vec, base: int, layout: EncodingLayout, name: str, args, names: dict[str, int]) -> None:
    vec[base + names[name]] = 1.0
    obj_base = base + len(names)
    for a in args:
        vec[obj_base + layout.object_index[a]] = 1.0


def encode_observation(layout: EncodingLayout, state, agent, agents, completed=()) -> np.ndarray:
    """Encode what ``agent`` sees; ``agents`` maps names to runtimes (self included)."""
    vec = np.zeros(layout.width)
    for atom in state.dynamic:
        i = layout.atom_index.get(atom)
        if i is not None:
            vec[i] = 1.0
    if layout.mode == FULL:
        for atom in state.static:
            i = layout.atom_index.get(atom)
            if i is not None:
                vec[i] = 1.0
    completed = set(completed)
    for label, name, args in layout.goals or ():
        if label not in completed:
            _mark(vec, layout.offsets["goal"], layout, name, args, layout.operator_index)
    for node in agent.hierarchy.nodes:
        _mark(vec, layout.offsets["hierarchy"], layout, node.op.name, node.op.args, layout.operator_index)
    block = len(layout.actions) + len(layout.objects)
    others = [n for n in layout.agents if n != agent.name]
    for k, other in enumerate(others):
        rt = agents.get(other)
        last = rt.last_action if rt is not None else None
        if last is not None:
            _mark(vec, layout.offsets["others"] + k * block, layout, last.name, last.args, layout.action_index)
    return vec


def decode_state(layout: EncodingLayout, vec: np.ndarray) -> set[str]:
    return {layout.atoms[i] for i in np.flatnonzero(vec[: layout.state_width] > 0.5)}


def candidate_features(layout: EncodingLayout, candidates) -> tuple[np.ndarray, np.ndarray]:
    """Per candidate: lifted-name index and object count vector."""
    names = np.array([layout.operator_index[c.name] for c in candidates])
    counts = np.zeros((len(candidates), len(layout.objects)))
    for i, c in enumerate(candidates):
        for a in c.args:
            counts[i, layout.object_index[a]] += 1.0
    return names, counts


def grounded_operator_probability(output: PolicyOutput, candidates, layout: EncodingLayout) -> np.ndarray:
    """P(name) times the product of P(object) per argument, normalised over candidates."""
    names, counts = candidate_features(layout, candidates)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_op = np.log(output.operator_probs)
        log_obj = np.log(output.object_probs)
        scores = log_op[names] + np.where(counts > 0, counts * log_obj, 0.0).sum(axis=1)
    if not np.isfinite(scores).any():
        return np.full(len(candidates), 1.0 / len(candidates))
    scores = scores - scores[np.isfinite(scores)].max()
    p = np.exp(scores)
    return p / p.sum()
