"""Parse and print HDDL domains and problems (conjunctive STRIPS subset plus
the agent-centric extension: an ``agent`` type root, task effects and a
``none`` action)."""

from __future__ import annotations

from pathlib import Path

from .model import (
    AGENT,
    EQUALITY,
    OBJECT,
    ActionSchema,
    DomainModel,
    GoalTask,
    Literal,
    MethodSchema,
    PredicateSchema,
    ProblemModel,
    Subtask,
    TaskSchema,
    TypedParam,
    TypeHierarchy,
    Unsupported,
    is_variable,
)
from .sexpr import HddlError, SExpr, Span, read_one


class UnknownBlock(HddlError):
    pass


class ArityMismatch(HddlError):
    pass


class UnknownType(HddlError):
    pass


class DuplicateName(HddlError):
    pass


class UnknownName(HddlError):
    """A predicate, task, variable or constant that was never declared."""


class MalformedExpression(HddlError):
    pass


class UnknownObjectType(HddlError):
    pass


class UnknownGoalTask(HddlError):
    pass


class InitAtomMismatch(HddlError):
    pass


class DomainMismatch(HddlError):
    pass


UNSUPPORTED_HEADS = {"or", "forall", "exists", "imply", "when"}
DOMAIN_BLOCKS = {":requirements", ":types", ":constants", ":predicates", ":task", ":method", ":action"}
PROBLEM_BLOCKS = {":domain", ":requirements", ":objects", ":htn", ":init", ":goal"}
SUBTASK_KEYS = {":subtasks", ":tasks", ":ordered-subtasks", ":ordered-tasks"}


def _expect_list(expr: SExpr, what: str) -> SExpr:
    if not expr.is_list:
        raise MalformedExpression(f"expected a list for {what}", expr.span)
    return expr


def _expect_atom(expr: SExpr, what: str) -> str:
    if not expr.is_atom:
        raise MalformedExpression(f"expected a name for {what}", expr.span)
    return expr.text


def _keyword_pairs(items: list[SExpr], owner: str) -> dict[str, SExpr]:
    """Split ``:key value :key value`` sequences."""
    out: dict[str, SExpr] = {}
    i = 0
    while i < len(items):
        key = items[i]
        if not key.is_atom or not key.text.startswith(":"):
            raise MalformedExpression(f"expected a keyword in {owner}", key.span)
        if i + 1 >= len(items):
            raise MalformedExpression(f"keyword {key.text} in {owner} has no value", key.span)
        if key.text in out:
            raise DuplicateName(f"keyword {key.text} repeated in {owner}", key.span)
        out[key.text] = items[i + 1]
        i += 2
    return out


class _Reader:
    def __init__(self):
        self.unsupported: list[Unsupported] = []

    def typed_list(self, expr: SExpr, owner: str, hierarchy: TypeHierarchy | None) -> list[TypedParam]:
        names: list[tuple[str, Span | None]] = []
        out: list[TypedParam] = []
        items = list(_expect_list(expr, f"parameters of {owner}"))
        i = 0
        while i < len(items):
            it = items[i]
            if it.is_atom and it.text == "-":
                if i + 1 >= len(items):
                    raise MalformedExpression(f"dangling '-' in {owner}", it.span)
                tyx = items[i + 1]
                if tyx.is_list:
                    self.unsupported.append(Unsupported("either-type", owner, tyx.span))
                    ty = OBJECT
                else:
                    ty = tyx.text
                    if hierarchy is not None and ty not in hierarchy.known:
                        raise UnknownType(f"unknown type {ty!r} in {owner}", tyx.span)
                out.extend(TypedParam(n, ty) for n, _ in names)
                names = []
                i += 2
                continue
            names.append((_expect_atom(it, f"parameter of {owner}"), it.span))
            i += 1
        out.extend(TypedParam(n, OBJECT) for n, _ in names)
        seen = set()
        for p in out:
            if p.name in seen:
                raise DuplicateName(f"parameter {p.name} repeated in {owner}", expr.span)
            seen.add(p.name)
        return out

    def literals(self, expr: SExpr, owner: str, effect: bool = False) -> list[Literal]:
        """Flatten a conjunction of (possibly negated) atoms."""
        expr = _expect_list(expr, f"formula of {owner}")
        if not expr.children:
            return []
        head = expr.head()
        if head is None:
            raise MalformedExpression(f"formula in {owner} must start with a name", expr.span)
        if head == "and":
            out: list[Literal] = []
            for child in expr.children[1:]:
                out.extend(self.literals(child, owner, effect))
            return out
        if head in UNSUPPORTED_HEADS:
            self.unsupported.append(Unsupported(head, owner, expr.span))
            return []
        if head == "not":
            if len(expr) != 2 or not expr[1].is_list:
                raise MalformedExpression(f"'not' in {owner} takes one atom", expr.span)
            inner = expr[1]
            if inner.head() in UNSUPPORTED_HEADS or inner.head() in ("and", "not"):
                self.unsupported.append(Unsupported(f"not-{inner.head()}", owner, expr.span))
                return []
            lit = self._atom_literal(inner, owner)
            return [Literal(lit.predicate, lit.terms, False, expr.span)]
        return [self._atom_literal(expr, owner)]

    def _atom_literal(self, expr: SExpr, owner: str) -> Literal:
        head = expr.head()
        if head is None:
            raise MalformedExpression(f"literal in {owner} must start with a name", expr.span)
        terms = []
        for t in expr.children[1:]:
            terms.append(_expect_atom(t, f"term in {owner}"))
        return Literal(head, tuple(terms), True, expr.span)


def _check_literal(lit: Literal, domain_preds: dict, scope: set[str], constants: set[str], owner: str):
    if lit.is_equality:
        if len(lit.terms) != 2:
            raise ArityMismatch(f"'=' takes two terms in {owner}", lit.span)
    else:
        schema = domain_preds.get(lit.predicate)
        if schema is None:
            raise UnknownName(f"unknown predicate {lit.predicate!r} in {owner}", lit.span)
        if schema.arity != len(lit.terms):
            raise ArityMismatch(
                f"{lit.predicate} expects {schema.arity} arguments, got {len(lit.terms)} in {owner}",
                lit.span,
            )
    for t in lit.terms:
        if is_variable(t):
            if t not in scope:
                raise UnknownName(f"undeclared variable {t} in {owner}", lit.span)
        elif t not in constants:
            raise UnknownName(f"undeclared constant {t} in {owner}", lit.span)


def _split_effects(lits: list[Literal]) -> tuple[tuple[Literal, ...], tuple[Literal, ...]]:
    adds = tuple(l for l in lits if l.positive)
    dels = tuple(l.negate() for l in lits if not l.positive)
    return adds, dels


def _parse_types(expr: SExpr) -> TypeHierarchy:
    types: list[str] = []
    edges: list[tuple[str, str]] = []
    pending: list[str] = []
    items = expr.children[1:]
    i = 0
    while i < len(items):
        it = items[i]
        if it.is_atom and it.text == "-":
            if i + 1 >= len(items) or not items[i + 1].is_atom:
                raise MalformedExpression("malformed :types block", it.span)
            parent = items[i + 1].text
            for child in pending:
                if (child, parent) not in edges:
                    edges.append((child, parent))
            pending = []
            i += 2
            continue
        name = _expect_atom(it, "type name")
        if name not in types and name not in (OBJECT,):
            types.append(name)
        pending.append(name)
        i += 1
    for child in pending:
        if (child, OBJECT) not in edges:
            edges.append((child, OBJECT))
    # any type with no explicit parent hangs off object
    for name in types:
        if not any(c == name for c, _ in edges):
            edges.append((name, OBJECT))
    hierarchy = TypeHierarchy(tuple(types), tuple(edges))
    _check_acyclic(hierarchy, expr.span)
    return hierarchy


def _check_acyclic(h: TypeHierarchy, span):
    state: dict[str, int] = {}

    def visit(t: str, path: tuple[str, ...]):
        if state.get(t) == 2:
            return
        if state.get(t) == 1:
            raise MalformedExpression(f"type cycle through {' -> '.join(path + (t,))}", span)
        state[t] = 1
        for p in h.parents(t):
            visit(p, path + (t,))
        state[t] = 2

    for t in h.known:
        visit(t, ())


def _parse_subtask_item(item: SExpr, default_label: str, owner: str) -> Subtask:
    item = _expect_list(item, f"subtask of {owner}")
    if len(item) == 2 and item[0].is_atom and item[1].is_list:
        label = item[0].text
        call = item[1]
    else:
        label = default_label
        call = item
    name = call.head()
    if name is None:
        raise MalformedExpression(f"subtask in {owner} must start with a name", call.span)
    args = tuple(_expect_atom(a, f"subtask argument in {owner}") for a in call.children[1:])
    return Subtask(label, name, args, item.span)


def _parse_subtasks(expr: SExpr, owner: str) -> list[Subtask]:
    expr = _expect_list(expr, f"subtasks of {owner}")
    if not expr.children:
        return []
    items = expr.children[1:] if expr.head() == "and" else [expr]
    subs = [_parse_subtask_item(it, f"t{i + 1}", owner) for i, it in enumerate(items)]
    labels = [s.label for s in subs]
    for lab in labels:
        if labels.count(lab) > 1:
            raise DuplicateName(f"subtask label {lab} repeated in {owner}", expr.span)
    return subs


def _parse_ordering(expr: SExpr, labels: set[str], owner: str) -> list[tuple[str, str]]:
    expr = _expect_list(expr, f"ordering of {owner}")
    if not expr.children:
        return []
    items = expr.children[1:] if expr.head() == "and" else [expr]
    pairs = []
    for it in items:
        it = _expect_list(it, f"ordering constraint of {owner}")
        texts = [c.text if c.is_atom else None for c in it.children]
        if len(texts) == 3 and texts[1] == "<":
            a, b = texts[0], texts[2]
        elif len(texts) == 3 and texts[0] == "<":
            a, b = texts[1], texts[2]
        elif len(texts) == 3 and texts[1] == ">":
            a, b = texts[2], texts[0]
        else:
            raise MalformedExpression(f"unsupported ordering constraint in {owner}", it.span)
        for lab in (a, b):
            if lab not in labels:
                raise UnknownName(f"ordering refers to undeclared label {lab} in {owner}", it.span)
        if (a, b) not in pairs:
            pairs.append((a, b))
    _check_dag(pairs, expr.span, owner)
    return pairs


def _check_dag(pairs, span, owner):
    succ: dict[str, list[str]] = {}
    for a, b in pairs:
        succ.setdefault(a, []).append(b)
    state: dict[str, int] = {}

    def visit(n):
        if state.get(n) == 2:
            return
        if state.get(n) == 1:
            raise MalformedExpression(f"ordering constraints of {owner} contain a cycle", span)
        state[n] = 1
        for m in succ.get(n, ()):
            visit(m)
        state[n] = 2

    for n in list(succ):
        visit(n)


def _ordered_pairs(subs: list[Subtask]) -> list[tuple[str, str]]:
    return [(subs[i].label, subs[i + 1].label) for i in range(len(subs) - 1)]


def parse_domain(expr: SExpr) -> DomainModel:
    """Build a :class:`DomainModel` from a ``(define (domain ...) ...)`` form."""
    if expr.head() != "define" or len(expr) < 2 or expr[1].head() != "domain" or len(expr[1]) != 2:
        raise MalformedExpression("expected (define (domain <name>) ...)", expr.span)
    name = _expect_atom(expr[1][1], "domain name")
    reader = _Reader()
    blocks: dict[str, list[SExpr]] = {k: [] for k in DOMAIN_BLOCKS}
    for block in expr.children[2:]:
        head = block.head() if block.is_list else None
        if head not in DOMAIN_BLOCKS:
            raise UnknownBlock(f"unknown domain block {head or block.to_text()!r}", block.span)
        blocks[head].append(block)

    requirements = tuple(
        _expect_atom(r, "requirement") for b in blocks[":requirements"] for r in b.children[1:]
    )
    if len(blocks[":types"]) > 1:
        raise DuplicateName("more than one :types block", blocks[":types"][1].span)
    hierarchy = _parse_types(blocks[":types"][0]) if blocks[":types"] else TypeHierarchy()

    constants: list[TypedParam] = []
    for b in blocks[":constants"]:
        constants.extend(reader.typed_list(SExpr("list", children=b.children[1:], span=b.span), "constants", hierarchy))
    const_names = {c.name for c in constants}
    if len(const_names) != len(constants):
        raise DuplicateName("constant declared twice", blocks[":constants"][0].span)

    predicates: list[PredicateSchema] = []
    for b in blocks[":predicates"]:
        for p in b.children[1:]:
            pname = p.head()
            if pname is None:
                raise MalformedExpression("predicate declaration must start with a name", p.span)
            params = reader.typed_list(SExpr("list", children=p.children[1:], span=p.span), pname, hierarchy)
            predicates.append(PredicateSchema(pname, tuple(params), p.span))
    _unique([p.name for p in predicates], "predicate", blocks[":predicates"])
    pred_map = {p.name: p for p in predicates}

    tasks: list[TaskSchema] = []
    for b in blocks[":task"]:
        tname = _expect_atom(b[1], "task name") if len(b) > 1 else None
        if tname is None:
            raise MalformedExpression("task without a name", b.span)
        kv = _keyword_pairs(b.children[2:], tname)
        for key in kv:
            if key not in (":parameters", ":effect"):
                reader.unsupported.append(Unsupported(f"task-{key[1:]}", tname, kv[key].span))
        params = reader.typed_list(kv[":parameters"], tname, hierarchy) if ":parameters" in kv else []
        scope = {p.name for p in params}
        effects = None
        if ":effect" in kv:
            lits = reader.literals(kv[":effect"], tname, effect=True)
            for lit in lits:
                _check_literal(lit, pred_map, scope, const_names, tname)
            effects = tuple(lits)
        tasks.append(TaskSchema(tname, tuple(params), effects, b.span))
    task_map = {t.name: t for t in tasks}

    actions: list[ActionSchema] = []
    for b in blocks[":action"]:
        aname = _expect_atom(b[1], "action name") if len(b) > 1 else None
        if aname is None:
            raise MalformedExpression("action without a name", b.span)
        kv = _keyword_pairs(b.children[2:], aname)
        for key in kv:
            if key not in (":parameters", ":precondition", ":effect"):
                reader.unsupported.append(Unsupported(f"action-{key[1:]}", aname, kv[key].span))
        params = reader.typed_list(kv[":parameters"], aname, hierarchy) if ":parameters" in kv else []
        scope = {p.name for p in params}
        pre = reader.literals(kv[":precondition"], aname) if ":precondition" in kv else []
        eff = reader.literals(kv[":effect"], aname, effect=True) if ":effect" in kv else []
        for lit in pre + eff:
            _check_literal(lit, pred_map, scope, const_names, aname)
        if any(l.is_equality for l in eff):
            raise MalformedExpression(f"equality cannot be an effect in {aname}", b.span)
        adds, dels = _split_effects(eff)
        if set(adds) & set(dels):
            raise MalformedExpression(f"action {aname} adds and deletes the same literal", b.span)
        actions.append(ActionSchema(aname, tuple(params), tuple(pre), adds, dels, b.span))
    action_map = {a.name: a for a in actions}
    _unique([t.name for t in tasks] + [a.name for a in actions], "task/action", blocks[":task"] + blocks[":action"])

    methods: list[MethodSchema] = []
    for b in blocks[":method"]:
        mname = _expect_atom(b[1], "method name") if len(b) > 1 else None
        if mname is None:
            raise MalformedExpression("method without a name", b.span)
        kv = _keyword_pairs(b.children[2:], mname)
        allowed = {":parameters", ":task", ":precondition", ":ordering"} | SUBTASK_KEYS
        for key in kv:
            if key not in allowed:
                reader.unsupported.append(Unsupported(f"method-{key[1:]}", mname, kv[key].span))
        params = reader.typed_list(kv[":parameters"], mname, hierarchy) if ":parameters" in kv else []
        scope = {p.name for p in params}
        if ":task" not in kv:
            raise MalformedExpression(f"method {mname} has no :task", b.span)
        tcall = _expect_list(kv[":task"], f":task of {mname}")
        tname = tcall.head()
        targs = tuple(_expect_atom(a, f"task argument of {mname}") for a in tcall.children[1:])
        if tname not in task_map:
            raise UnknownName(f"method {mname} achieves undeclared task {tname!r}", tcall.span)
        if len(task_map[tname].params) != len(targs):
            raise ArityMismatch(f"task {tname} expects {len(task_map[tname].params)} arguments in {mname}", tcall.span)
        _check_terms(targs, scope, const_names, mname, tcall.span)
        pre = reader.literals(kv[":precondition"], mname) if ":precondition" in kv else []
        for lit in pre:
            _check_literal(lit, pred_map, scope, const_names, mname)
        sub_keys = [k for k in kv if k in SUBTASK_KEYS]
        if len(sub_keys) > 1:
            raise DuplicateName(f"method {mname} declares subtasks twice", b.span)
        subs: list[Subtask] = []
        ordering: list[tuple[str, str]] = []
        if sub_keys:
            subs = _parse_subtasks(kv[sub_keys[0]], mname)
            if sub_keys[0].startswith(":ordered"):
                ordering = _ordered_pairs(subs)
                if ":ordering" in kv and kv[":ordering"].children:
                    raise MalformedExpression(f"method {mname} mixes ordered subtasks and :ordering", b.span)
        labels = {s.label for s in subs}
        if ":ordering" in kv and not (sub_keys and sub_keys[0].startswith(":ordered")):
            ordering = _parse_ordering(kv[":ordering"], labels, mname)
        for s in subs:
            target = task_map.get(s.name) or action_map.get(s.name)
            if target is None:
                raise UnknownName(f"subtask {s.name!r} of {mname} is neither a task nor an action", s.span)
            if len(target.params) != len(s.args):
                raise ArityMismatch(f"{s.name} expects {len(target.params)} arguments in {mname}", s.span)
            _check_terms(s.args, scope, const_names, mname, s.span)
        methods.append(
            MethodSchema(mname, tuple(params), tname, targs, tuple(pre), tuple(subs), tuple(sorted(ordering)), b.span)
        )
    _unique([m.name for m in methods], "method", blocks[":method"])

    return DomainModel(
        name=name,
        requirements=requirements,
        hierarchy=hierarchy,
        constants=tuple(constants),
        predicates=tuple(predicates),
        tasks=tuple(tasks),
        methods=tuple(methods),
        actions=tuple(actions),
        unsupported=tuple(reader.unsupported),
        has_types_block=bool(blocks[":types"]),
        span=expr.span,
    )


def _check_terms(terms, scope, constants, owner, span):
    for t in terms:
        if is_variable(t):
            if t not in scope:
                raise UnknownName(f"undeclared variable {t} in {owner}", span)
        elif t not in constants:
            raise UnknownName(f"undeclared constant {t} in {owner}", span)


def _unique(names: list[str], what: str, blocks: list[SExpr]):
    seen = set()
    for n in names:
        if n in seen:
            span = blocks[0].span if blocks else None
            for b in blocks:
                if len(b) > 1 and b[1].is_atom and b[1].text == n:
                    span = b.span
            raise DuplicateName(f"{what} {n!r} declared twice", span)
        seen.add(n)


def goal_arity_ok(domain: DomainModel, schema: TaskSchema, nargs: int) -> bool:
    """Goal tasks may list every parameter or omit the agent-typed ones."""
    non_agent = len(schema.params) - len(domain.agent_parameter_indices(schema))
    return nargs == len(schema.params) or nargs == non_agent


def parse_problem(expr: SExpr, domain: DomainModel) -> ProblemModel:
    """Build a :class:`ProblemModel` checked against ``domain``."""
    if expr.head() != "define" or len(expr) < 2 or expr[1].head() != "problem" or len(expr[1]) != 2:
        raise MalformedExpression("expected (define (problem <name>) ...)", expr.span)
    name = _expect_atom(expr[1][1], "problem name")
    reader = _Reader()
    blocks: dict[str, SExpr] = {}
    for block in expr.children[2:]:
        head = block.head() if block.is_list else None
        if head not in PROBLEM_BLOCKS:
            raise UnknownBlock(f"unknown problem block {head or block.to_text()!r}", block.span)
        if head in blocks:
            raise DuplicateName(f"problem block {head} repeated", block.span)
        blocks[head] = block
    if ":domain" not in blocks or len(blocks[":domain"]) != 2:
        raise MalformedExpression("problem must name its domain", expr.span)
    dname = _expect_atom(blocks[":domain"][1], "domain name")
    if dname != domain.name:
        raise DomainMismatch(f"problem targets domain {dname!r}, not {domain.name!r}", blocks[":domain"].span)

    hierarchy = domain.hierarchy
    objects: list[TypedParam] = []
    if ":objects" in blocks:
        b = blocks[":objects"]
        try:
            objects = reader.typed_list(SExpr("list", children=b.children[1:], span=b.span), "objects", hierarchy)
        except UnknownType as exc:
            raise UnknownObjectType(exc.message, exc.span) from None
        except DuplicateName as exc:
            raise DuplicateName(exc.message, exc.span) from None
    const_types = {c.name: c.type for c in domain.constants}
    obj_types = dict(const_types)
    for o in objects:
        if o.name in const_types:
            raise DuplicateName(f"object {o.name} shadows a domain constant", blocks[":objects"].span)
        obj_types[o.name] = o.type

    init: list[tuple[str, tuple[str, ...]]] = []
    if ":init" in blocks:
        for a in blocks[":init"].children[1:]:
            pname = a.head()
            if pname is None or any(not c.is_atom for c in a.children[1:]):
                raise InitAtomMismatch("init entries must be ground atoms", a.span)
            args = tuple(c.text for c in a.children[1:])
            schema = domain.predicate_map.get(pname)
            if schema is None:
                raise InitAtomMismatch(f"unknown predicate {pname!r} in init", a.span)
            if schema.arity != len(args):
                raise InitAtomMismatch(f"{pname} expects {schema.arity} arguments in init", a.span)
            for arg, p in zip(args, schema.params):
                if arg not in obj_types:
                    raise InitAtomMismatch(f"unknown object {arg!r} in init", a.span)
                if not hierarchy.is_subtype(obj_types[arg], p.type):
                    raise InitAtomMismatch(f"{arg} is not a {p.type} in ({pname} ...)", a.span)
            if (pname, args) not in init:
                init.append((pname, args))

    goal_tasks: list[GoalTask] = []
    goal_ordering: list[tuple[str, str]] = []
    if ":htn" in blocks:
        kv = _keyword_pairs(blocks[":htn"].children[1:], ":htn")
        sub_keys = [k for k in kv if k in SUBTASK_KEYS]
        for key in kv:
            if key not in SUBTASK_KEYS | {":parameters", ":ordering"}:
                reader.unsupported.append(Unsupported(f"htn-{key[1:]}", name, kv[key].span))
        if ":parameters" in kv and kv[":parameters"].children:
            reader.unsupported.append(Unsupported("htn-parameters", name, kv[":parameters"].span))
        if sub_keys:
            subs = _parse_subtasks(kv[sub_keys[0]], ":htn")
            for s in subs:
                schema = domain.task_map.get(s.name)
                if schema is None:
                    raise UnknownGoalTask(f"goal task {s.name!r} is not a declared task", s.span)
                if not goal_arity_ok(domain, schema, len(s.args)):
                    raise ArityMismatch(f"goal task {s.name} has {len(s.args)} arguments", s.span)
                for arg in s.args:
                    if arg not in obj_types:
                        raise UnknownName(f"unknown object {arg!r} in goal task", s.span)
                goal_tasks.append(GoalTask(s.label, s.name, s.args, s.span))
            if sub_keys[0].startswith(":ordered"):
                goal_ordering = _ordered_pairs(subs)
        if ":ordering" in kv and not goal_ordering:
            goal_ordering = _parse_ordering(kv[":ordering"], {g.label for g in goal_tasks}, ":htn")

    goal_formula = None
    if ":goal" in blocks:
        g = blocks[":goal"]
        body = g[1] if len(g) > 1 else SExpr("list", children=[], span=g.span)
        lits = reader.literals(body, ":goal")
        for lit in lits:
            _check_literal(lit, domain.predicate_map, set(), set(obj_types), ":goal")
        goal_formula = tuple(lits)
    if reader.unsupported:
        u = reader.unsupported[0]
        raise MalformedExpression(f"unsupported construct {u.what} in problem", u.span)

    return ProblemModel(
        name=name,
        domain_name=dname,
        objects=tuple(objects),
        init=tuple(init),
        goal_tasks=tuple(goal_tasks),
        goal_ordering=tuple(sorted(goal_ordering)),
        goal_formula=goal_formula,
        span=expr.span,
    )


def load_domain(path: str | Path) -> DomainModel:
    return parse_domain(read_one(Path(path).read_text(encoding="utf-8")))


def load_problem(path: str | Path, domain: DomainModel) -> ProblemModel:
    return parse_problem(read_one(Path(path).read_text(encoding="utf-8")), domain)


# --- printing -----------------------------------------------------------------


def _typed(params) -> str:
    parts: list[str] = []
    i = 0
    params = list(params)
    while i < len(params):
        j = i
        while j < len(params) and params[j].type == params[i].type:
            j += 1
        parts.append(" ".join(p.name for p in params[i:j]) + f" - {params[i].type}")
        i = j
    return " ".join(parts)


def _conj(lits) -> str:
    lits = list(lits)
    if not lits:
        return "()"
    if len(lits) == 1:
        return str(lits[0])
    return "(and " + " ".join(str(l) for l in lits) + ")"


def _call(name, args) -> str:
    return "(" + " ".join((name,) + tuple(args)) + ")"


def print_domain(model: DomainModel) -> str:
    out = [f"(define (domain {model.name})"]
    if model.requirements:
        out.append("  (:requirements " + " ".join(model.requirements) + ")")
    if model.has_types_block or model.hierarchy.edges:
        out.append("  (:types")
        for child, parent in model.hierarchy.edges:
            out.append(f"    {child} - {parent}")
        out.append("  )")
    if model.constants:
        out.append(f"  (:constants {_typed(model.constants)})")
    out.append("  (:predicates")
    for p in model.predicates:
        body = f" {_typed(p.params)}" if p.params else ""
        out.append(f"    ({p.name}{body})")
    out.append("  )")
    for t in model.tasks:
        out.append(f"  (:task {t.name}")
        out.append(f"    :parameters ({_typed(t.params)})")
        if t.effects is not None:
            out.append(f"    :effect {_conj(t.effects)}")
        out[-1] += ")"
    for m in model.methods:
        out.append(f"  (:method {m.name}")
        out.append(f"    :parameters ({_typed(m.params)})")
        out.append(f"    :task {_call(m.task_name, m.task_args)}")
        out.append(f"    :precondition {_conj(m.precondition)}")
        if m.subtasks:
            subs = " ".join(f"({s.label} {_call(s.name, s.args)})" for s in m.subtasks)
            out.append(f"    :subtasks (and {subs})")
        else:
            out.append("    :subtasks ()")
        if m.ordering:
            order = " ".join(f"({a} < {b})" for a, b in m.ordering)
            out.append(f"    :ordering (and {order})")
        out[-1] += ")"
    for a in model.actions:
        out.append(f"  (:action {a.name}")
        out.append(f"    :parameters ({_typed(a.params)})")
        out.append(f"    :precondition {_conj(a.precondition)}")
        effects = list(a.add_effects) + [l.negate() for l in a.del_effects]
        out.append(f"    :effect {_conj(effects)})")
    out.append(")")
    return "\n".join(out) + "\n"


def print_problem(model: ProblemModel) -> str:
    out = [f"(define (problem {model.name})", f"  (:domain {model.domain_name})"]
    if model.objects:
        out.append("  (:objects")
        for o in model.objects:
            out.append(f"    {o.name} - {o.type}")
        out.append("  )")
    out.append("  (:htn")
    tasks = " ".join(f"({g.label} {_call(g.name, g.args)})" for g in model.goal_tasks)
    out.append(f"    :tasks (and {tasks})" if tasks else "    :tasks ()")
    order = " ".join(f"({a} < {b})" for a, b in model.goal_ordering)
    out.append(f"    :ordering (and {order}))" if order else "    :ordering ())")
    out.append("  (:init")
    for pname, args in model.init:
        out.append(f"    {_call(pname, args)}")
    out.append("  )")
    if model.goal_formula is not None:
        out.append(f"  (:goal {_conj(model.goal_formula)})")
    out.append(")")
    return "\n".join(out) + "\n"
