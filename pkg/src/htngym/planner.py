"""Policy-guided joint planner extending every agent's hierarchy to an action.

Each planning round computes the valid operators of every agent that has not
yet reached a primitive action, enumerates the joint combinations surviving
the pairwise validity rules, scores them with the agents' policies and appends
the selected operator to each hierarchy. Agents whose candidate set is empty
backtrack by removing one tail element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .agent import AgentRuntime, Hierarchy, Node
from .grounding import GroundAction, Grounding, OperatorInstance
from .model import NONE_ACTION
from .state import WorldState


class PlannerError(Exception):
    pass


class NonTermination(PlannerError):
    pass


class AllCombinationsPruned(PlannerError):
    pass


@dataclass(frozen=True)
class Choice:
    op: OperatorInstance
    label: str | None = None
    claim: str | None = None  # goal label this choice newly claims


@dataclass
class OperatorCandidateSet:
    agent: str
    choices: list[Choice]
    scores: np.ndarray | None = None

    @property
    def operators(self) -> list[OperatorInstance]:
        return [c.op for c in self.choices]


@dataclass
class JointCombination:
    choices: dict[str, Choice]
    probability: float = 0.0

    @property
    def key(self) -> str:
        return "|".join(f"{a}={self.choices[a].op.key}" for a in sorted(self.choices))


@dataclass
class Decision:
    """One hierarchy extension, kept for policy-gradient training."""

    agent: str
    observation: np.ndarray | None
    candidates: list[OperatorInstance]
    chosen: int
    log_prob: float


@dataclass
class PlanResult:
    joint_action: dict[str, OperatorInstance]
    decisions: list[Decision] = field(default_factory=list)
    rounds: int = 0
    forced: list[str] = field(default_factory=list)


# --- pairwise validity --------------------------------------------------------


def actions_conflict(a: GroundAction, b: GroundAction) -> bool:
    """V1 and V2 for two distinct action instances."""
    if a.op == b.op:
        return False
    if set(a.agents) & set(b.agents):
        return True  # some agent would perform two different actions
    for x, y in ((a, b), (b, a)):
        if x.delete & y.pre_pos or x.add & y.pre_neg or x.add & y.delete:
            return True
    return False


def joint_conflicts(actions: list[GroundAction]) -> list[tuple[str, str]]:
    out = []
    for i, a in enumerate(actions):
        for b in actions[i + 1:]:
            if actions_conflict(a, b):
                out.append((a.op.key, b.op.key))
    return out


# --- planner ------------------------------------------------------------------


def default_round_bound(grounding: Grounding, n_agents: int) -> int:
    # a hierarchy never repeats a task instance, so its length is bounded by
    # two nodes per grounded task plus the leaf
    depth = 2 * len(grounding.tasks) + 1
    return 10 * depth * max(1, n_agents)


class _Planner:
    def __init__(self, grounding: Grounding, state: WorldState, agents: dict[str, AgentRuntime],
                 completed: set[str]):
        self.g = grounding
        self.state = state
        self.agents = agents
        self.completed = completed
        self.dead: set[tuple] = set()
        self.abandoned: set[str] = set()  # shared method keys a collaborator backed out of
        self.goal_preds: dict[str, set[str]] = {}
        for before, after in grounding.problem.goal_ordering:
            self.goal_preds.setdefault(after, set()).add(before)

    # helpers

    def h(self, name: str) -> Hierarchy:
        return self.agents[name].hierarchy

    def agents_of(self, op: OperatorInstance) -> tuple[str, ...]:
        if op.kind == "task":
            return self.g.tasks[op.key].agents
        if op.kind == "method":
            return self.g.methods[op.key].agents
        act = self.g.actions.get(op.key)
        if act is not None:
            return act.agents
        schema = self.g.domain.action_map[op.name]
        return tuple(op.args[i] for i in self.g.domain.agent_parameter_indices(schema))

    def valid_for(self, name: str, op: OperatorInstance) -> bool:
        agents = self.agents_of(op)
        return not agents or name in agents

    def responsible(self, name: str, method, sub: OperatorInstance) -> bool:
        agents = self.agents_of(sub)
        if agents:
            return name in agents
        return not method.agents or name in method.agents

    def is_dead(self, name: str, prefix: tuple[str, ...], op: OperatorInstance) -> bool:
        return (name, prefix, op.key) in self.dead

    # candidate generation

    def goal_choices(self, name: str) -> list[Choice]:
        out = []
        claimed: dict[str, list[str]] = {}
        for other, rt in self.agents.items():
            if other != name and rt.hierarchy.root is not None and rt.hierarchy.root.label is not None:
                claimed.setdefault(rt.hierarchy.root.label, []).append(other)
        for goal in self.g.problem.goal_tasks:
            if goal.label in self.completed:
                continue
            if not self.goal_preds.get(goal.label, set()) <= self.completed:
                continue
            holders = claimed.get(goal.label)
            if not holders:
                op = self.g.goal_instance(goal, name)
                if op is None or not self.valid_for(name, op) or self.is_dead(name, (), op):
                    continue
                out.append(Choice(op, goal.label, goal.label))
                continue
            # join a claimed goal only when a holder's hierarchy binds us
            for other in holders:
                oh = self.h(other)
                if any(n.op.kind == "method" and name in self.g.methods[n.op.key].agents for n in oh.nodes):
                    op = oh.root.op
                    if not self.is_dead(name, (), op):
                        out.append(Choice(op, goal.label))
                    break
        return out

    def method_choices(self, name: str, h: Hierarchy) -> list[Choice]:
        task = h.tail.op
        prefix = h.keys()
        shared: dict[str, OperatorInstance] = {}
        descended = False
        for other, rt in self.agents.items():
            if other == name:
                continue
            nodes = rt.hierarchy.nodes
            for i, n in enumerate(nodes[:-1]):
                if n.op == task and nodes[i + 1].op.kind == "method":
                    descended = True
                    if name in self.g.methods[nodes[i + 1].op.key].agents:
                        shared[nodes[i + 1].op.key] = nodes[i + 1].op
        if descended:
            # another holder already picked a method; follow it or back off
            ops = [shared[k] for k in sorted(shared)]
            return [Choice(op) for op in ops if not self.is_dead(name, prefix, op)]
        out = []
        for m in self.g.methods_for_task.get(task.key, ()):
            if not self.state.satisfies(m.pre_pos, m.pre_neg):
                continue
            if m.agents and name not in m.agents:
                continue
            if self.is_dead(name, prefix, m.op):
                continue
            out.append(Choice(m.op))
        return out

    def subtask_choices(self, name: str, h: Hierarchy) -> list[Choice]:
        node = h.tail
        method = self.g.methods[node.op.key]
        done = h.progress.setdefault(node.op.key, set())
        subs = method.subtask_map
        ready = [l for l, _ in method.subtasks if l not in done and method.predecessors[l] <= done]
        prefix = h.keys()
        out = []
        for label in ready:
            op = subs[label]
            if not self.responsible(name, method, op):
                continue
            if op.kind == "action":
                act = self.g.actions.get(op.key)
                if act is None or name not in act.agents or not self.state.applicable(act):
                    continue
            elif h.contains(op):
                continue
            if self.is_dead(name, prefix, op):
                continue
            out.append(Choice(op, label))
        if out:
            return out
        if self.blocked_by_collaborator(name, method, done, ready) and node.op.key not in self.abandoned:
            helpers = {a for l, op in method.subtasks if l not in done and not self.responsible(name, method, op)
                       for a in self.agents_of(op) or method.agents if a != name}
            # stay committed unless a collaborator is stuck waiting elsewhere or
            # needs us for a different method (either way we would wait forever)
            if not any(self.waiting_method(a) not in (None, node.op.key) or self.needs(a, name, node.op)
                       for a in helpers):
                return [Choice(self.g.none_action(name))]
        return []

    def blocked_by_collaborator(self, name: str, method, done: set[str], ready: list[str]) -> bool:
        """Our share is unfinished, none of it is ready, and others still owe subtasks."""
        mine = [l for l, op in method.subtasks if l not in done and self.responsible(name, method, op)]
        external = [l for l, op in method.subtasks if l not in done and not self.responsible(name, method, op)]
        return bool(external and mine) and not any(l in ready for l in mine)

    def needs(self, other: str, name: str, besides: OperatorInstance) -> bool:
        if other not in self.agents:
            return False
        return any(n.op.kind == "method" and n.op != besides and name in self.g.methods[n.op.key].agents
                   for n in self.h(other).nodes)

    def waiting_method(self, name: str) -> str | None:
        """Key of the method ``name`` is waiting in, if it is waiting."""
        if name not in self.agents:
            return None
        nodes = self.h(name).nodes
        if len(nodes) >= 2 and nodes[-1].label is None and nodes[-1].op.name == NONE_ACTION \
                and nodes[-2].op.kind == "method":
            return nodes[-2].op.key
        if nodes and nodes[-1].op.kind == "method":
            method = self.g.methods[nodes[-1].op.key]
            done = self.h(name).progress.get(method.op.key, set())
            ready = [l for l, _ in method.subtasks if l not in done and method.predecessors[l] <= done]
            if self.blocked_by_collaborator(name, method, done, ready):
                return method.op.key
        return None

    def candidates(self, name: str) -> list[Choice]:
        h = self.h(name)
        tail = h.tail
        if tail is None:
            return self.goal_choices(name)
        if tail.op.kind == "task":
            return self.method_choices(name, h)
        if tail.op.kind == "method":
            return self.subtask_choices(name, h)
        return [Choice(tail.op, tail.label)]

    def valid_operators(self, name: str) -> OperatorCandidateSet:
        h = self.h(name)
        while True:
            choices = self.candidates(name)
            if choices:
                return OperatorCandidateSet(name, choices)
            if not h.nodes:
                return OperatorCandidateSet(name, [Choice(self.g.none_action(name))])
            prefix = h.keys()[:-1]
            node = h.pop()
            self.dead.add((name, prefix, node.op.key))
            if node.op.kind == "method" and any(
                other != name and rt.hierarchy.contains(node.op) for other, rt in self.agents.items()
            ):
                self.abandoned.add(node.op.key)

    def waiting_on_abandoned(self, name: str) -> bool:
        nodes = self.h(name).nodes
        return (len(nodes) >= 2 and nodes[-1].label is None and nodes[-1].op.name == NONE_ACTION
                and nodes[-2].op.kind == "method" and nodes[-2].op.key in self.abandoned)


def valid_operators(agent: AgentRuntime, grounding: Grounding, state: WorldState,
                    team: dict[str, AgentRuntime] | None = None,
                    completed: set[str] | None = None) -> OperatorCandidateSet:
    """Candidate operators for ``agent``, backtracking its hierarchy when empty."""
    team = dict(team or {})
    team[agent.name] = agent
    return _Planner(grounding, state, team, set(completed or ())).valid_operators(agent.name)


def _compatible(g: Grounding, a: Choice, b: Choice) -> bool:
    if a.claim is not None and a.claim == b.claim:
        return False
    if a.op.kind == "method" and b.op.kind == "method" and a.op != b.op:
        # agents sharing one task instance must decompose it the same way
        if g.methods[a.op.key].task == g.methods[b.op.key].task:
            return False
    if a.op.kind == "action" and b.op.kind == "action":
        ga, gb = g.actions.get(a.op.key), g.actions.get(b.op.key)
        if ga is None or gb is None:
            return a.op == b.op
        return not actions_conflict(ga, gb)
    return True


def enumerate_combinations(grounding: Grounding, candidate_sets: list[OperatorCandidateSet],
                           fixed: dict[str, Choice] | None = None) -> list[JointCombination]:
    """Cartesian product of the candidate sets filtered by the pairwise rules.

    ``fixed`` holds the already chosen actions of agents that finished
    planning; they take part in every check but are not varied.
    """
    fixed = fixed or {}
    for s in candidate_sets:
        if not s.choices:
            raise AllCombinationsPruned(f"agent {s.agent} has no candidates")
    fixed_items = list(fixed.values())
    for i, a in enumerate(fixed_items):
        if not all(_compatible(grounding, a, b) for b in fixed_items[i + 1:]):
            raise AllCombinationsPruned("the fixed actions already conflict")
    out: list[JointCombination] = []
    chosen: list[Choice] = []

    def rec(i: int):
        if i == len(candidate_sets):
            out.append(JointCombination({s.agent: c for s, c in zip(candidate_sets, chosen)}))
            return
        for c in candidate_sets[i].choices:
            if all(_compatible(grounding, c, o) for o in chosen) and all(
                _compatible(grounding, c, o) for o in fixed_items
            ):
                chosen.append(c)
                rec(i + 1)
                chosen.pop()

    rec(0)
    if not out:
        raise AllCombinationsPruned("every joint combination violates a validity rule")
    return out


def score_and_select(combinations: list[JointCombination], agent_probs: dict[str, dict[Choice, float]],
                     deterministic: bool, rng: np.random.Generator | None = None) -> JointCombination:
    """Joint score is the product of per-agent probabilities, renormalised."""
    scores = np.empty(len(combinations))
    for i, combo in enumerate(combinations):
        s = 1.0
        for agent, choice in combo.choices.items():
            s *= agent_probs[agent][choice]
        scores[i] = s
    total = scores.sum()
    probs = scores / total if total > 0 else np.full(len(combinations), 1.0 / len(combinations))
    for combo, p in zip(combinations, probs):
        combo.probability = float(p)
    if deterministic:
        best = probs.max()
        tied = [c for c, p in zip(combinations, probs) if p >= best - 1e-12 * max(best, 1.0)]
        return min(tied, key=lambda c: c.key.encode())
    if rng is None:
        raise ValueError("probabilistic selection needs a random generator")
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return combinations[min(idx, len(combinations) - 1)]


def _uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def plan_step(agents: dict[str, AgentRuntime], grounding: Grounding, state: WorldState,
              completed: set[str] | None = None, policies: dict | None = None,
              deterministic: bool = False, rng: np.random.Generator | None = None,
              layout=None, max_rounds: int | None = None, record: bool = False) -> PlanResult:
    """Extend every hierarchy in ``agents`` (mutated in place) to an action leaf.

    ``policies`` maps agent name to an object with ``candidate_probabilities``;
    agents without a policy score candidates uniformly.
    """
    from .encoding import encode_observation

    completed = set(completed or ())
    planner = _Planner(grounding, state, agents, completed)
    names = sorted(agents)
    bound = max_rounds or default_round_bound(grounding, len(names))
    policies = policies or {}
    result = PlanResult({})

    def is_done(name):
        tail = agents[name].hierarchy.tail
        return tail is not None and tail.op.kind == "action"

    forced: list[str] = []
    while True:
        for n in names:
            if n not in forced and planner.waiting_on_abandoned(n):
                agents[n].hierarchy.pop()  # stop waiting for a collaborator that left
        pending = [n for n in names if not is_done(n)]
        result.rounds += 1
        if result.rounds > bound:
            raise NonTermination(f"planning exceeded {bound} rounds")
        sets = [planner.valid_operators(n) for n in pending]
        fixed = {n: Choice(agents[n].hierarchy.tail.op) for n in names if is_done(n)}
        try:
            if not pending:
                # leaves forced to `none` are only checked here
                enumerate_combinations(grounding, [], fixed)
                break
            combos = enumerate_combinations(grounding, sets, fixed)
        except AllCombinationsPruned:
            # degenerate deadlock: idle agents one at a time, last name first
            victim = next((n for n in reversed(names) if n not in forced), None)
            if victim is None:
                raise
            forced.append(victim)
            h = agents[victim].hierarchy
            if is_done(victim):
                h.pop()
            h.push(Node(grounding.none_action(victim)))
            continue
        agent_probs: dict[str, dict[Choice, float]] = {}
        observations: dict[str, np.ndarray | None] = {}
        for s in sets:
            ops = s.operators
            policy = policies.get(s.agent)
            obs = None
            if policy is None:
                probs = _uniform(len(ops))
            else:
                if getattr(policy, "uses_observation", True) and layout is not None:
                    obs = encode_observation(layout, state, agents[s.agent], agents, completed)
                probs = np.asarray(policy.candidate_probabilities(obs, ops, layout), dtype=float)
            s.scores = probs
            observations[s.agent] = obs
            agent_probs[s.agent] = dict(zip(s.choices, probs))
        combo = score_and_select(combos, agent_probs, deterministic, rng)
        for s in sets:
            choice = combo.choices[s.agent]
            if record and len(s.choices) > 1:
                idx = s.choices.index(choice)
                p = float(s.scores[idx])
                result.decisions.append(
                    Decision(s.agent, observations[s.agent], s.operators, idx, math.log(p) if p > 0 else -math.inf)
                )
            h = agents[s.agent].hierarchy
            h.push(Node(choice.op, choice.label))
            if choice.op.kind == "method":
                # joining a shared method: adopt what the other holders finished
                for other, rt in agents.items():
                    if other != s.agent:
                        h.progress[choice.op.key] |= rt.hierarchy.progress.get(choice.op.key, set())
    result.joint_action = {n: agents[n].hierarchy.tail.op for n in names}
    result.forced = forced
    return result


def decentralized_plan(focal: AgentRuntime, grounding: Grounding, state: WorldState,
                       completed: set[str] | None = None, policies: dict | None = None,
                       deterministic: bool = False, rng: np.random.Generator | None = None,
                       layout=None, max_rounds: int | None = None) -> OperatorInstance:
    """Plan for ``focal`` plus its beliefs; return only the focal agent's action.

    Belief hierarchies are extended as a side effect.
    """
    team = {focal.name: focal, **focal.beliefs}
    result = plan_step(team, grounding, state, completed, policies, deterministic, rng, layout, max_rounds)
    return result.joint_action[focal.name]


def is_none(op: OperatorInstance) -> bool:
    return op.kind == "action" and op.name == NONE_ACTION
