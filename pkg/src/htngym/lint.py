"""Checks a domain against the agent-centric conventions and adapts stock HDDL."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .model import AGENT, NONE_ACTION, ActionSchema, DomainModel, Literal, ProblemModel, TypedParam, is_variable
from .sexpr import HddlError, Span, tokenize

ERROR = "error"
WARNING = "warning"

RULES = {
    "AGENT_TYPE_MISSING": ERROR,
    "NONE_ACTION_MISSING": ERROR,
    "TASK_EFFECT_MISSING": ERROR,
    "ACTION_NO_AGENT_PARAM": WARNING,
    "UNREACHABLE_METHOD": WARNING,
    "UNSUPPORTED_CONSTRUCT": ERROR,
}

NONE_ACTION_TEXT = (
    "\n  (:action none\n"
    "    :parameters (?agent - agent)\n"
    "    :precondition ()\n"
    "    :effect ())\n"
)


class UnknownAgentType(HddlError):
    pass


class HintArityMismatch(HddlError):
    pass


@dataclass(frozen=True)
class TextEdit:
    """Replace ``text[start:end]`` with ``replacement``."""

    start: int
    end: int
    replacement: str

    def apply(self, text: str) -> str:
        return text[: self.start] + self.replacement + text[self.end :]


@dataclass(frozen=True)
class LintFinding:
    rule: str
    severity: str
    message: str
    span: Span | None = None
    fix: TextEdit | None = None

    def as_dict(self) -> dict:
        d = {"rule": self.rule, "severity": self.severity, "message": self.message}
        d["line"] = self.span.line if self.span else None
        d["column"] = self.span.column if self.span else None
        d["fix"] = None if self.fix is None else {
            "start": self.fix.start, "end": self.fix.end, "replacement": self.fix.replacement
        }
        return d

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        return f"{where}{self.severity} {self.rule}: {self.message}"


def _finding(rule: str, message: str, span=None, fix=None) -> LintFinding:
    return LintFinding(rule, RULES[rule], message, span, fix)


def lint(domain: DomainModel, problem: ProblemModel | None = None) -> list[LintFinding]:
    """Findings ordered by source position, then rule id."""
    found: list[LintFinding] = []
    agent_types = domain.hierarchy.agent_types()
    if not agent_types:
        found.append(_finding("AGENT_TYPE_MISSING", "no declared type descends from 'agent'", domain.span))
    if not domain.has_none_action():
        fix = None
        if domain.span is not None:
            at = domain.span.end - 1  # just before the closing paren of (define ...)
            fix = TextEdit(at, at, NONE_ACTION_TEXT)
        found.append(_finding("NONE_ACTION_MISSING", "no parameterised 'none' action with empty effects", domain.span, fix))
    for t in domain.tasks:
        if t.effects is None:
            found.append(_finding("TASK_EFFECT_MISSING", f"task {t.name} declares no :effect", t.span))
    # without any agent type every action would be flagged; the missing type already covers that
    if agent_types:
        for a in domain.actions:
            if domain.is_environment_action(a):
                found.append(_finding(
                    "ACTION_NO_AGENT_PARAM",
                    f"action {a.name} has no agent-typed parameter (treated as an environment action)",
                    a.span,
                ))
    if problem is not None:
        referenced = {g.name for g in problem.goal_tasks}
        referenced |= {s.name for m in domain.methods for s in m.subtasks}
        for m in domain.methods:
            if m.task_name not in referenced:
                found.append(_finding(
                    "UNREACHABLE_METHOD", f"method {m.name} achieves {m.task_name}, which nothing references", m.span
                ))
    for u in domain.unsupported:
        found.append(_finding("UNSUPPORTED_CONSTRUCT", f"{u.what} in {u.owner} is outside the supported subset", u.span))
    return sorted(found, key=lambda f: (f.span.start if f.span else -1, f.rule))


def has_errors(findings) -> bool:
    return any(f.severity == ERROR for f in findings)


def parse_hint_literals(text: str) -> list[Literal]:
    """Read ``(at ?v ?l) (not (in ?p ?v))`` style literal lists."""
    out = []
    for expr in tokenize(text):
        positive = True
        if expr.head() == "not" and len(expr) == 2:
            positive, expr = False, expr[1]
        if not expr.is_list or expr.head() is None or not all(c.is_atom for c in expr):
            raise HintArityMismatch(f"malformed hint literal {expr.to_text()}", expr.span)
        out.append(Literal(expr.head(), tuple(c.text for c in expr.children[1:]), positive))
    return out


def load_effects_file(text: str) -> dict[str, list[Literal]]:
    """Parse ``task = (lit) (lit)`` lines; ``#`` starts a comment."""
    hints: dict[str, list[Literal]] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise HintArityMismatch(f"line {n}: expected 'task = (literal) ...'")
        task, body = (s.strip() for s in line.split("=", 1))
        hints.setdefault(task, []).extend(parse_hint_literals(body))
    return hints


def _check_hint(domain: DomainModel, task_name: str, lits) -> None:
    task = domain.task_map.get(task_name)
    if task is None:
        raise HintArityMismatch(f"effect hint for unknown task {task_name!r}")
    scope = {p.name for p in task.params}
    constants = {c.name for c in domain.constants}
    for lit in lits:
        schema = domain.predicate_map.get(lit.predicate)
        if schema is None or len(schema.params) != len(lit.terms):
            raise HintArityMismatch(f"hint {lit} for {task_name} does not match a declared predicate")
        for term in lit.terms:
            if (is_variable(term) and term not in scope) or (not is_variable(term) and term not in constants):
                raise HintArityMismatch(f"hint {lit} uses {term}, not a parameter of {task_name}")


def adapt(domain: DomainModel, agent_type: str, task_effect_hints: dict | None = None) -> DomainModel:
    """Make ``agent_type`` an agent, add ``none`` and attach hinted task effects.

    Tasks that already declare effects keep them; unhinted tasks stay as they
    are so lint keeps flagging them.
    """
    hierarchy = domain.hierarchy
    if agent_type == AGENT or agent_type not in hierarchy.known:
        raise UnknownAgentType(f"type {agent_type!r} is not declared")
    hints = {k: list(v) for k, v in (task_effect_hints or {}).items()}
    for name, lits in hints.items():
        _check_hint(domain, name, lits)

    if not hierarchy.is_agent_type(agent_type):
        hierarchy = hierarchy.with_edge(agent_type, AGENT)
    actions = domain.actions
    if NONE_ACTION not in domain.action_map:
        actions = actions + (ActionSchema(NONE_ACTION, (TypedParam("?agent", AGENT),)),)
    tasks = tuple(
        replace(t, effects=tuple(hints[t.name])) if t.effects is None and t.name in hints else t
        for t in domain.tasks
    )
    return replace(domain, hierarchy=hierarchy, actions=actions, tasks=tasks, has_types_block=True)
