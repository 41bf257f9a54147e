"""Immutable domain and problem models.

Spans are carried on every node for diagnostics and lint fixes but never take
part in equality, so two models parsed from differently formatted text compare
equal when they describe the same domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .sexpr import Span

OBJECT = "object"
AGENT = "agent"
NONE_ACTION = "none"
EQUALITY = "="


def is_variable(term: str) -> bool:
    return term.startswith("?")


@dataclass(frozen=True)
class TypedParam:
    name: str
    type: str = OBJECT


@dataclass(frozen=True)
class TypeHierarchy:
    """Declared types with (child, parent) edges; multiple parents allowed."""

    types: tuple[str, ...] = ()
    edges: tuple[tuple[str, str], ...] = ()

    @cached_property
    def _parents(self) -> dict[str, frozenset[str]]:
        parents: dict[str, set[str]] = {}
        for child, parent in self.edges:
            parents.setdefault(child, set()).add(parent)
        return {k: frozenset(v) for k, v in parents.items()}

    @cached_property
    def known(self) -> frozenset[str]:
        names = {OBJECT, AGENT, *self.types}
        for child, parent in self.edges:
            names.update((child, parent))
        return frozenset(names)

    def parents(self, name: str) -> frozenset[str]:
        return self._parents.get(name, frozenset())

    def ancestors(self, name: str) -> frozenset[str]:
        """All supertypes of ``name`` including itself and ``object``."""
        seen = {name, OBJECT}
        todo = [name]
        while todo:
            for p in self.parents(todo.pop()):
                if p not in seen:
                    seen.add(p)
                    todo.append(p)
        return frozenset(seen)

    def is_subtype(self, name: str, ancestor: str) -> bool:
        return ancestor in self.ancestors(name)

    def is_agent_type(self, name: str) -> bool:
        return AGENT in self.ancestors(name)

    def agent_types(self) -> frozenset[str]:
        """Declared types descending from ``agent`` (excluding ``agent`` itself)."""
        return frozenset(t for t in self.known if t != AGENT and self.is_agent_type(t))

    def with_edge(self, child: str, parent: str) -> "TypeHierarchy":
        if (child, parent) in self.edges:
            return self
        types = self.types if child in self.types else self.types + (child,)
        return TypeHierarchy(types, self.edges + ((child, parent),))


@dataclass(frozen=True)
class PredicateSchema:
    name: str
    params: tuple[TypedParam, ...]
    span: Span | None = field(default=None, compare=False, repr=False)

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class Literal:
    predicate: str
    terms: tuple[str, ...]
    positive: bool = True
    span: Span | None = field(default=None, compare=False, repr=False)

    @property
    def is_equality(self) -> bool:
        return self.predicate == EQUALITY

    def negate(self) -> "Literal":
        return Literal(self.predicate, self.terms, not self.positive, self.span)

    def __str__(self) -> str:
        body = "(" + " ".join((self.predicate,) + self.terms) + ")"
        return body if self.positive else f"(not {body})"


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[TypedParam, ...]
    precondition: tuple[Literal, ...] = ()
    add_effects: tuple[Literal, ...] = ()
    del_effects: tuple[Literal, ...] = ()
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class TaskSchema:
    name: str
    params: tuple[TypedParam, ...]
    # None: the task declares no :effect block at all (standard HDDL)
    effects: tuple[Literal, ...] | None = None
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Subtask:
    label: str
    name: str
    args: tuple[str, ...]
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class MethodSchema:
    name: str
    params: tuple[TypedParam, ...]
    task_name: str
    task_args: tuple[str, ...]
    precondition: tuple[Literal, ...] = ()
    subtasks: tuple[Subtask, ...] = ()
    ordering: tuple[tuple[str, str], ...] = ()  # sorted (before, after) pairs
    span: Span | None = field(default=None, compare=False, repr=False)

    def predecessors(self) -> dict[str, frozenset[str]]:
        pred: dict[str, set[str]] = {s.label: set() for s in self.subtasks}
        for before, after in self.ordering:
            pred[after].add(before)
        return {k: frozenset(v) for k, v in pred.items()}


@dataclass(frozen=True)
class Unsupported:
    """A construct outside the supported conjunctive subset, kept for lint."""

    what: str
    owner: str
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class DomainModel:
    name: str
    requirements: tuple[str, ...] = ()
    hierarchy: TypeHierarchy = field(default_factory=TypeHierarchy)
    constants: tuple[TypedParam, ...] = ()
    predicates: tuple[PredicateSchema, ...] = ()
    tasks: tuple[TaskSchema, ...] = ()
    methods: tuple[MethodSchema, ...] = ()
    actions: tuple[ActionSchema, ...] = ()
    unsupported: tuple[Unsupported, ...] = ()
    has_types_block: bool = field(default=False, compare=False)
    span: Span | None = field(default=None, compare=False, repr=False)

    @cached_property
    def predicate_map(self) -> dict[str, PredicateSchema]:
        return {p.name: p for p in self.predicates}

    @cached_property
    def task_map(self) -> dict[str, TaskSchema]:
        return {t.name: t for t in self.tasks}

    @cached_property
    def action_map(self) -> dict[str, ActionSchema]:
        return {a.name: a for a in self.actions}

    @cached_property
    def method_map(self) -> dict[str, MethodSchema]:
        return {m.name: m for m in self.methods}

    def agent_parameter_indices(self, schema) -> tuple[int, ...]:
        return tuple(
            i for i, p in enumerate(schema.params) if self.hierarchy.is_agent_type(p.type)
        )

    def is_environment_action(self, action: ActionSchema) -> bool:
        return not self.agent_parameter_indices(action)

    def has_none_action(self) -> bool:
        a = self.action_map.get(NONE_ACTION)
        return (
            a is not None
            and len(a.params) == 1
            and self.hierarchy.is_agent_type(a.params[0].type)
            and not a.precondition
            and not a.add_effects
            and not a.del_effects
        )

    @property
    def lifted_operator_names(self) -> list[str]:
        return sorted({*self.task_map, *self.method_map, *self.action_map})

    @property
    def lifted_action_names(self) -> list[str]:
        return sorted(self.action_map)


@dataclass(frozen=True)
class GoalTask:
    label: str
    name: str
    args: tuple[str, ...]
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ProblemModel:
    name: str
    domain_name: str
    objects: tuple[TypedParam, ...] = ()
    init: tuple[tuple[str, tuple[str, ...]], ...] = ()
    goal_tasks: tuple[GoalTask, ...] = ()
    goal_ordering: tuple[tuple[str, str], ...] = ()
    goal_formula: tuple[Literal, ...] | None = None
    span: Span | None = field(default=None, compare=False, repr=False)

    @cached_property
    def object_types(self) -> dict[str, str]:
        return {o.name: o.type for o in self.objects}
