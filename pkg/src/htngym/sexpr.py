"""S-expression reader for HDDL text with source spans."""

from __future__ import annotations

from dataclasses import dataclass, field

KEYWORDS = frozenset(
    {"define", "domain", "problem", "and", "not", "or", "forall", "exists",
     "when", "imply", "either"}
)


@dataclass(frozen=True)
class Span:
    start: int  # character offset, inclusive
    end: int  # character offset, exclusive
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"

    def encloses(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end


class HddlError(Exception):
    """Base class for every diagnostic raised while reading HDDL."""

    def __init__(self, message: str, span: Span | None = None):
        self.message = message
        self.span = span
        where = f" at {span}" if span is not None else ""
        super().__init__(f"{message}{where}")


class UnbalancedParenthesis(HddlError):
    pass


class IllegalCharacter(HddlError):
    pass


@dataclass
class SExpr:
    kind: str  # "atom" or "list"
    text: str = ""
    children: list["SExpr"] = field(default_factory=list)
    span: Span | None = None

    @property
    def is_atom(self) -> bool:
        return self.kind == "atom"

    @property
    def is_list(self) -> bool:
        return self.kind == "list"

    def __len__(self) -> int:
        return len(self.children)

    def __getitem__(self, index):
        return self.children[index]

    def __iter__(self):
        return iter(self.children)

    def head(self) -> str | None:
        """Text of the first child when it is an atom."""
        if self.is_list and self.children and self.children[0].is_atom:
            return self.children[0].text
        return None

    def to_text(self) -> str:
        if self.is_atom:
            return self.text
        return "(" + " ".join(c.to_text() for c in self.children) + ")"

    def __repr__(self) -> str:
        return f"SExpr({self.to_text()})"


def atom(text: str) -> SExpr:
    return SExpr("atom", text)


def lst(*children: SExpr) -> SExpr:
    return SExpr("list", children=list(children))


def _normalize(text: str) -> str:
    low = text.lower()
    if text.startswith(":") or low in KEYWORDS:
        return low
    return text


def _legal(ch: str) -> bool:
    return "!" <= ch <= "~"


def tokenize(text: str) -> list[SExpr]:
    """Read every top-level expression in ``text``.

    Comments run from ``;`` to end of line. Keywords (``:``-prefixed atoms and
    the reserved words in ``KEYWORDS``) are lowercased; all other names keep
    their case.
    """
    # precompute line starts so spans carry 1-based line/column
    line_starts = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            line_starts.append(i + 1)

    def span(start: int, end: int) -> Span:
        lo, hi = 0, len(line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if line_starts[mid] <= start:
                lo = mid
            else:
                hi = mid - 1
        return Span(start, end, lo + 1, start - line_starts[lo] + 1)

    top: list[SExpr] = []
    stack: list[tuple[int, list[SExpr]]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isspace():
            i += 1
            continue
        if ch == "(":
            stack.append((i, []))
            i += 1
            continue
        if ch == ")":
            if not stack:
                raise UnbalancedParenthesis("unexpected ')'", span(i, i + 1))
            start, children = stack.pop()
            node = SExpr("list", children=children, span=span(start, i + 1))
            (stack[-1][1] if stack else top).append(node)
            i += 1
            continue
        if not _legal(ch):
            raise IllegalCharacter(f"illegal character {ch!r}", span(i, i + 1))
        j = i
        while j < n and _legal(text[j]) and text[j] not in "();":
            j += 1
        node = SExpr("atom", _normalize(text[i:j]), span=span(i, j))
        (stack[-1][1] if stack else top).append(node)
        i = j
    if stack:
        start = stack[0][0]
        raise UnbalancedParenthesis("unclosed '('", span(start, start + 1))
    return top


def read_one(text: str) -> SExpr:
    """Read a file that must hold exactly one top-level list."""
    forms = tokenize(text)
    if len(forms) != 1 or not forms[0].is_list:
        where = forms[1].span if len(forms) > 1 else None
        raise HddlError(f"expected exactly one top-level form, found {len(forms)}", where)
    return forms[0]
