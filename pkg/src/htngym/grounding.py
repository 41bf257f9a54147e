"""Grounding of predicates and operators over a problem's objects.

All enumeration orders are the bytewise order of canonical strings
``name(arg1,...,argn)``; encoding indices are derived from the same order.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import NamedTuple

from .model import (
    NONE_ACTION,
    DomainModel,
    GoalTask,
    Literal,
    ProblemModel,
    TaskSchema,
    is_variable,
)


def canonical(name: str, args) -> str:
    return f"{name}({','.join(args)})"


class GroundAtom(NamedTuple):
    predicate: str
    args: tuple[str, ...]

    @property
    def key(self) -> str:
        return canonical(self.predicate, self.args)

    def __str__(self) -> str:
        return self.key


class OperatorInstance(NamedTuple):
    kind: str  # "task" | "method" | "action"
    name: str
    args: tuple[str, ...]

    @property
    def key(self) -> str:
        return canonical(self.name, self.args)

    def __str__(self) -> str:
        return self.key


@dataclass(frozen=True)
class GroundAction:
    op: OperatorInstance
    pre_pos: frozenset[GroundAtom]
    pre_neg: frozenset[GroundAtom]
    add: frozenset[GroundAtom]
    delete: frozenset[GroundAtom]
    agents: tuple[str, ...]


@dataclass(frozen=True)
class GroundTask:
    op: OperatorInstance
    eff_pos: frozenset[GroundAtom]
    eff_neg: frozenset[GroundAtom]
    declared: bool  # False when the schema has no :effect block
    agents: tuple[str, ...]

    @property
    def has_effects(self) -> bool:
        return bool(self.eff_pos or self.eff_neg)


@dataclass(frozen=True)
class GroundMethod:
    op: OperatorInstance
    task: OperatorInstance
    pre_pos: frozenset[GroundAtom]
    pre_neg: frozenset[GroundAtom]
    subtasks: tuple[tuple[str, OperatorInstance], ...]
    predecessors: dict
    agents: tuple[str, ...]

    def __hash__(self):
        return hash(self.op)

    @cached_property
    def subtask_map(self) -> dict[str, OperatorInstance]:
        return dict(self.subtasks)


@dataclass
class GroundingStats:
    grounded_predicates: int
    grounded_dynamic_predicates: int
    grounded_operators: int
    grounded_actions: int
    lifted_operators: int
    lifted_actions: int
    objects: int
    grounded_operators_pruned: int | None = None
    grounded_actions_pruned: int | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def classify_predicates(domain: DomainModel) -> tuple[frozenset[str], frozenset[str]]:
    """Split predicate names into (static, dynamic).

    A predicate is dynamic iff some action adds or deletes it; task effects are
    ignored.
    """
    dynamic = {l.predicate for a in domain.actions for l in a.add_effects + a.del_effects}
    names = {p.name for p in domain.predicates}
    return frozenset(names - dynamic), frozenset(names & dynamic)


def _ground_literal(lit: Literal, binding: dict[str, str]) -> GroundAtom:
    return GroundAtom(lit.predicate, tuple(binding[t] if is_variable(t) else t for t in lit.terms))


class Grounding:
    """Ground view of one (domain, problem) pair."""

    def __init__(self, domain: DomainModel, problem: ProblemModel):
        self.domain = domain
        self.problem = problem
        hierarchy = domain.hierarchy
        objects = {c.name: c.type for c in domain.constants}
        objects.update(problem.object_types)
        self.object_types: dict[str, str] = objects
        self.objects: list[str] = sorted(objects)
        self.static_predicates, self.dynamic_predicates = classify_predicates(domain)
        self._by_type: dict[str, list[str]] = {}
        self.agents: list[str] = sorted(o for o, t in objects.items() if hierarchy.is_agent_type(t))
        init = {GroundAtom(p, args) for p, args in problem.init}
        self.static_init = frozenset(a for a in init if a.predicate in self.static_predicates)
        self.dynamic_init = frozenset(a for a in init if a.predicate in self.dynamic_predicates)

    # -- objects and atoms -----------------------------------------------------

    def objects_of_type(self, type_name: str) -> list[str]:
        found = self._by_type.get(type_name)
        if found is None:
            h = self.domain.hierarchy
            found = [o for o in self.objects if h.is_subtype(self.object_types[o], type_name)]
            self._by_type[type_name] = found
        return found

    def _bindings(self, params):
        domains = [self.objects_of_type(p.type) for p in params]
        names = [p.name for p in params]
        for values in itertools.product(*domains):
            yield values, dict(zip(names, values))

    @cached_property
    def atoms(self) -> list[GroundAtom]:
        out = []
        for schema in self.domain.predicates:
            for values, _ in self._bindings(schema.params):
                out.append(GroundAtom(schema.name, values))
        return sorted(out, key=lambda a: a.key.encode())

    @cached_property
    def dynamic_atoms(self) -> list[GroundAtom]:
        return [a for a in self.atoms if a.predicate in self.dynamic_predicates]

    # -- operators -------------------------------------------------------------

    def _split(self, lits, binding):
        pos, neg = set(), set()
        for lit in lits:
            if lit.is_equality:
                continue
            (pos if lit.positive else neg).add(_ground_literal(lit, binding))
        return frozenset(pos), frozenset(neg)

    def _equality_ok(self, lits, binding) -> bool:
        for lit in lits:
            if lit.is_equality:
                a, b = (binding[t] if is_variable(t) else t for t in lit.terms)
                if (a == b) != lit.positive:
                    return False
        return True

    def _static_ok(self, pos, neg) -> bool:
        static = self.static_predicates
        for atom in pos:
            if atom.predicate in static and atom not in self.static_init:
                return False
        for atom in neg:
            if atom.predicate in static and atom in self.static_init:
                return False
        return True

    def _agents_of(self, schema, values) -> tuple[str, ...]:
        return tuple(values[i] for i in self.domain.agent_parameter_indices(schema))

    def raw_operators(self) -> list[OperatorInstance]:
        """Every type-consistent instantiation of every task, method and action."""
        out = []
        for kind, schemas in (("task", self.domain.tasks), ("method", self.domain.methods), ("action", self.domain.actions)):
            for schema in schemas:
                for values, _ in self._bindings(schema.params):
                    out.append(OperatorInstance(kind, schema.name, values))
        return sorted(out, key=lambda o: o.key.encode())

    def raw_operator_count(self, kind: str | None = None) -> int:
        total = 0
        for k, schemas in (("task", self.domain.tasks), ("method", self.domain.methods), ("action", self.domain.actions)):
            if kind is not None and k != kind:
                continue
            for schema in schemas:
                n = 1
                for p in schema.params:
                    n *= len(self.objects_of_type(p.type))
                total += n
        return total

    @cached_property
    def actions(self) -> dict[str, GroundAction]:
        out = {}
        for schema in self.domain.actions:
            for values, binding in self._bindings(schema.params):
                if not self._equality_ok(schema.precondition, binding):
                    continue
                pos, neg = self._split(schema.precondition, binding)
                if not self._static_ok(pos, neg):
                    continue
                op = OperatorInstance("action", schema.name, values)
                out[op.key] = GroundAction(
                    op,
                    pos,
                    neg,
                    frozenset(_ground_literal(l, binding) for l in schema.add_effects),
                    frozenset(_ground_literal(l, binding) for l in schema.del_effects),
                    self._agents_of(schema, values),
                )
        return dict(sorted(out.items(), key=lambda kv: kv[0].encode()))

    @cached_property
    def environment_actions(self) -> list[GroundAction]:
        return [a for a in self.actions.values() if not a.agents]

    @cached_property
    def tasks(self) -> dict[str, GroundTask]:
        out = {}
        for schema in self.domain.tasks:
            for values, binding in self._bindings(schema.params):
                op = OperatorInstance("task", schema.name, values)
                pos, neg = self._split(schema.effects or (), binding)
                out[op.key] = GroundTask(op, pos, neg, schema.effects is not None, self._agents_of(schema, values))
        return dict(sorted(out.items(), key=lambda kv: kv[0].encode()))

    def _instance(self, name: str, args: tuple[str, ...]) -> OperatorInstance:
        kind = "task" if name in self.domain.task_map else "action"
        return OperatorInstance(kind, name, args)

    @cached_property
    def methods(self) -> dict[str, GroundMethod]:
        out = {}
        for schema in self.domain.methods:
            preds = schema.predecessors()
            for values, binding in self._bindings(schema.params):
                if not self._equality_ok(schema.precondition, binding):
                    continue
                pos, neg = self._split(schema.precondition, binding)
                if not self._static_ok(pos, neg):
                    continue
                sub = lambda args: tuple(binding[t] if is_variable(t) else t for t in args)
                task = OperatorInstance("task", schema.task_name, sub(schema.task_args))
                subtasks = tuple((s.label, self._instance(s.name, sub(s.args))) for s in schema.subtasks)
                op = OperatorInstance("method", schema.name, values)
                out[op.key] = GroundMethod(op, task, pos, neg, subtasks, preds, self._agents_of(schema, values))
        return dict(sorted(out.items(), key=lambda kv: kv[0].encode()))

    @cached_property
    def methods_for_task(self) -> dict[str, list[GroundMethod]]:
        index: dict[str, list[GroundMethod]] = {}
        for m in self.methods.values():
            index.setdefault(m.task.key, []).append(m)
        return index

    def pruned_operators(self) -> list[OperatorInstance]:
        ops = [t.op for t in self.tasks.values()] + [m.op for m in self.methods.values()]
        ops += [a.op for a in self.actions.values()]
        return sorted(ops, key=lambda o: o.key.encode())

    def none_action(self, agent: str) -> OperatorInstance:
        return OperatorInstance("action", NONE_ACTION, (agent,))

    # -- goals -----------------------------------------------------------------

    def free_agent_positions(self, goal: GoalTask) -> tuple[int, ...]:
        schema = self.domain.task_map[goal.name]
        if len(goal.args) == len(schema.params):
            return ()
        return self.domain.agent_parameter_indices(schema)

    def goal_instance(self, goal: GoalTask, agents: tuple[str, ...] | str) -> OperatorInstance | None:
        """Ground ``goal``; omitted agent-typed parameters take ``agents``."""
        schema: TaskSchema = self.domain.task_map[goal.name]
        free = self.free_agent_positions(goal)
        if not free:
            return OperatorInstance("task", goal.name, goal.args)
        if isinstance(agents, str):
            agents = (agents,) * len(free)
        args: list[str] = []
        it = iter(goal.args)
        fill = iter(agents)
        for i, p in enumerate(schema.params):
            if i in free:
                a = next(fill)
                if not self.domain.hierarchy.is_subtype(self.object_types[a], p.type):
                    return None
                args.append(a)
            else:
                args.append(next(it))
        return OperatorInstance("task", goal.name, tuple(args))

    def goal_completed(self, goal: GoalTask, holds) -> bool:
        """Effects of ``goal`` hold for some binding of its free agent slots."""
        free = self.free_agent_positions(goal)
        choices = itertools.product(self.agents, repeat=len(free)) if free else [()]
        for combo in choices:
            op = self.goal_instance(goal, combo) if free else OperatorInstance("task", goal.name, goal.args)
            if op is None:
                continue
            task = self.tasks[op.key]
            if all(holds(a) for a in task.eff_pos) and not any(holds(a) for a in task.eff_neg):
                return True
        return False

    # -- statistics ------------------------------------------------------------

    def stats(self, prune: bool = True) -> GroundingStats:
        s = GroundingStats(
            grounded_predicates=len(self.atoms),
            grounded_dynamic_predicates=len(self.dynamic_atoms),
            grounded_operators=self.raw_operator_count(),
            grounded_actions=self.raw_operator_count("action"),
            lifted_operators=len(self.domain.lifted_operator_names),
            lifted_actions=len(self.domain.lifted_action_names),
            objects=len(self.objects),
        )
        if prune:
            s.grounded_actions_pruned = len(self.actions)
            s.grounded_operators_pruned = len(self.tasks) + len(self.methods) + len(self.actions)
        return s


def ground_atoms(domain: DomainModel, problem: ProblemModel) -> list[GroundAtom]:
    return Grounding(domain, problem).atoms


def ground_operators(domain: DomainModel, problem: ProblemModel, prune: bool = True) -> list[OperatorInstance]:
    g = Grounding(domain, problem)
    return g.pruned_operators() if prune else g.raw_operators()


def stats(domain: DomainModel, problem: ProblemModel, prune: bool = True) -> GroundingStats:
    return Grounding(domain, problem).stats(prune)
