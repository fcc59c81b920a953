"""EL++ knowledge bases: expression trees, axioms, a line-based text format.

One axiom per line::

    subclass(and(Male, Parent), Father)
    subclass(Parent, some(hasChild, Person))
    instance(Father, Alex)
    relation(hasChild, Alex, Bob)

``#`` starts a comment, blank lines are skipped, nominals are written
``nominal(a)``.  Names are registered in order of first appearance, and that
order fixes embedding row indices downstream.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

logger = logging.getLogger(__name__)

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_./:-]*")
KEYWORDS = frozenset({"top", "bottom", "and", "some", "nominal"})


class KBSyntaxError(ValueError):
    def __init__(self, line: int, col: int, expected: str, found: str = ""):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        msg = f"line {line}, col {col}: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)


class NameClashError(ValueError):
    def __init__(self, name: str, first: str, second: str, line: int | None = None):
        self.name = name
        self.kinds = (first, second)
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}name {name!r} used as both {first} and {second}")


# -- concept expressions -----------------------------------------------------

@dataclass(frozen=True)
class Top:
    def __str__(self) -> str:
        return "top"


@dataclass(frozen=True)
class Bottom:
    def __str__(self) -> str:
        return "bottom"


@dataclass(frozen=True)
class Nominal:
    individual: str

    def __str__(self) -> str:
        return f"nominal({self.individual})"


@dataclass(frozen=True)
class Atomic:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class And:
    left: "ConceptExpr"
    right: "ConceptExpr"

    def __str__(self) -> str:
        return f"and({self.left}, {self.right})"


@dataclass(frozen=True)
class Some:
    role: str
    filler: "ConceptExpr"

    def __str__(self) -> str:
        return f"some({self.role}, {self.filler})"


ConceptExpr = Union[Top, Bottom, Nominal, Atomic, And, Some]
BASIC = (Top, Bottom, Nominal, Atomic)


def subexpressions(expr: ConceptExpr) -> Iterator[ConceptExpr]:
    yield expr
    if isinstance(expr, And):
        yield from subexpressions(expr.left)
        yield from subexpressions(expr.right)
    elif isinstance(expr, Some):
        yield from subexpressions(expr.filler)


def expr_depth(expr: ConceptExpr) -> int:
    if isinstance(expr, And):
        return 1 + max(expr_depth(expr.left), expr_depth(expr.right))
    if isinstance(expr, Some):
        return 1 + expr_depth(expr.filler)
    return 0


# -- axioms ------------------------------------------------------------------

@dataclass(frozen=True)
class ConceptInclusion:
    sub: ConceptExpr
    sup: ConceptExpr
    line: int | None = field(default=None, compare=False, repr=False)

    def __str__(self) -> str:
        return f"subclass({self.sub}, {self.sup})"


@dataclass(frozen=True)
class ConceptAssertion:
    concept: ConceptExpr
    individual: str
    line: int | None = field(default=None, compare=False, repr=False)

    def __str__(self) -> str:
        return f"instance({self.concept}, {self.individual})"


@dataclass(frozen=True)
class RoleAssertion:
    role: str
    head: str
    tail: str
    line: int | None = field(default=None, compare=False, repr=False)

    def __str__(self) -> str:
        return f"relation({self.role}, {self.head}, {self.tail})"


Axiom = Union[ConceptInclusion, ConceptAssertion, RoleAssertion]


@dataclass(frozen=True)
class SymbolTables:
    individuals: tuple[str, ...] = ()
    concepts: tuple[str, ...] = ()
    roles: tuple[str, ...] = ()

    def kind_of(self, name: str) -> str | None:
        for kind, names in (("individual", self.individuals),
                            ("concept", self.concepts), ("role", self.roles)):
            if name in names:
                return kind
        return None


class _Registrar:
    """Collects names in first-appearance order and rejects kind clashes."""

    def __init__(self, strict: bool = True):
        self.strict = strict
        self.kinds: dict[str, str] = {}
        self.order: dict[str, list[str]] = {"individual": [], "concept": [], "role": []}
        self.clashes: list[tuple[str, str, str]] = []

    def add(self, name: str, kind: str, line: int | None = None) -> None:
        seen = self.kinds.get(name)
        if seen is None:
            self.kinds[name] = kind
            self.order[kind].append(name)
        elif seen != kind:
            if self.strict:
                raise NameClashError(name, seen, kind, line)
            self.clashes.append((name, seen, kind))

    def add_expr(self, expr: ConceptExpr, line: int | None = None) -> None:
        for sub in subexpressions(expr):
            if isinstance(sub, Atomic):
                self.add(sub.name, "concept", line)
            elif isinstance(sub, Nominal):
                self.add(sub.individual, "individual", line)
            elif isinstance(sub, Some):
                self.add(sub.role, "role", line)

    def add_axiom(self, ax: Axiom) -> None:
        if isinstance(ax, ConceptInclusion):
            self.add_expr(ax.sub, ax.line)
            self.add_expr(ax.sup, ax.line)
        elif isinstance(ax, ConceptAssertion):
            self.add_expr(ax.concept, ax.line)
            self.add(ax.individual, "individual", ax.line)
        else:
            self.add(ax.role, "role", ax.line)
            self.add(ax.head, "individual", ax.line)
            self.add(ax.tail, "individual", ax.line)

    def tables(self) -> SymbolTables:
        return SymbolTables(tuple(self.order["individual"]),
                            tuple(self.order["concept"]),
                            tuple(self.order["role"]))


@dataclass(frozen=True)
class KnowledgeBase:
    symbols: SymbolTables
    axioms: tuple[Axiom, ...]
    duplicates_dropped: int = field(default=0, compare=False)

    @property
    def tbox(self) -> tuple[ConceptInclusion, ...]:
        return tuple(a for a in self.axioms if isinstance(a, ConceptInclusion))

    @property
    def abox(self) -> tuple[Axiom, ...]:
        return tuple(a for a in self.axioms if not isinstance(a, ConceptInclusion))

    @classmethod
    def from_axioms(cls, axioms: Iterable[Axiom], strict: bool = True) -> "KnowledgeBase":
        """Build a KB, deduplicating axioms and deriving the symbol tables."""
        reg = _Registrar(strict=strict)
        kept: list[Axiom] = []
        seen: set[Axiom] = set()
        dropped = 0
        for ax in axioms:
            if ax in seen:
                dropped += 1
                continue
            seen.add(ax)
            reg.add_axiom(ax)
            kept.append(ax)
        if dropped:
            logger.warning("dropped %d duplicate axiom(s)", dropped)
        return cls(reg.tables(), tuple(kept), dropped)

    def __len__(self) -> int:
        return len(self.axioms)


# -- parsing -----------------------------------------------------------------

_TOKEN_RE = re.compile(r"\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_./:-]*)|(?P<punct>[(),]))")


class _LineParser:
    def __init__(self, text: str, lineno: int):
        self.text = text
        self.lineno = lineno
        self.pos = 0

    def _col(self) -> int:
        # skip whitespace so the column points at the offending token
        pos = self.pos
        while pos < len(self.text) and self.text[pos].isspace():
            pos += 1
        return pos + 1

    def _fail(self, expected: str):
        col = self._col()
        rest = self.text[col - 1:col + 11]
        raise KBSyntaxError(self.lineno, col, expected, rest or "end of line")

    def peek(self) -> str | None:
        m = _TOKEN_RE.match(self.text, self.pos)
        if not m:
            return None
        return m.group("name") or m.group("punct")

    def next(self, expected: str) -> str:
        m = _TOKEN_RE.match(self.text, self.pos)
        if not m:
            self._fail(expected)
        self.pos = m.end()
        return m.group("name") or m.group("punct")

    def expect(self, tok: str) -> None:
        save = self.pos
        got = self.next(repr(tok))
        if got != tok:
            self.pos = save
            self._fail(repr(tok))

    def name(self) -> str:
        save = self.pos
        tok = self.next("a name")
        if tok in "(),":
            self.pos = save
            self._fail("a name")
        if tok in KEYWORDS:
            self.pos = save
            self._fail("a name (keywords are reserved)")
        return tok

    def expr(self) -> ConceptExpr:
        save = self.pos
        tok = self.next("a concept expression")
        if tok == "top":
            return Top()
        if tok == "bottom":
            return Bottom()
        if tok == "nominal":
            self.expect("(")
            ind = self.name()
            self.expect(")")
            return Nominal(ind)
        if tok == "and":
            self.expect("(")
            left = self.expr()
            self.expect(",")
            right = self.expr()
            self.expect(")")
            return And(left, right)
        if tok == "some":
            self.expect("(")
            role = self.name()
            self.expect(",")
            filler = self.expr()
            self.expect(")")
            return Some(role, filler)
        if tok in "(),":
            self.pos = save
            self._fail("a concept expression")
        return Atomic(tok)

    def axiom(self) -> Axiom:
        save = self.pos
        head = self.next("subclass, instance or relation")
        if head == "subclass":
            self.expect("(")
            sub = self.expr()
            self.expect(",")
            sup = self.expr()
            self.expect(")")
            ax: Axiom = ConceptInclusion(sub, sup, line=self.lineno)
        elif head == "instance":
            self.expect("(")
            concept = self.expr()
            self.expect(",")
            ind = self.name()
            self.expect(")")
            ax = ConceptAssertion(concept, ind, line=self.lineno)
        elif head == "relation":
            self.expect("(")
            role = self.name()
            self.expect(",")
            h = self.name()
            self.expect(",")
            t = self.name()
            self.expect(")")
            ax = RoleAssertion(role, h, t, line=self.lineno)
        else:
            self.pos = save
            self._fail("subclass, instance or relation")
        if self.text[self.pos:].strip():
            self._fail("end of line")
        return ax


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def parse_axiom(text: str, lineno: int = 1) -> Axiom:
    return _LineParser(text, lineno).axiom()


def parse_expr(text: str) -> ConceptExpr:
    p = _LineParser(text, 1)
    e = p.expr()
    if text[p.pos:].strip():
        p._fail("end of expression")
    return e


def parse_kb(text: str) -> KnowledgeBase:
    """Parse a KB document.

    Raises KBSyntaxError with line/column, or NameClashError when one name is
    used in two of the individual/concept/role namespaces.
    """
    if text.startswith("﻿"):
        text = text[1:]
    axioms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        axioms.append(parse_axiom(line, lineno))
    return KnowledgeBase.from_axioms(axioms)


def load_kb(path) -> KnowledgeBase:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_kb(fh.read())


def serialize_kb(kb: KnowledgeBase) -> str:
    return "".join(f"{ax}\n" for ax in kb.axioms)


# -- validation --------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    kind: str  # "NameClash" | "Unresolved" | "Inconsistent" | "InvalidName"
    message: str
    line: int | None = None

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line is not None else ""
        return f"{where}{self.kind}: {self.message}"


def _names_in(ax: Axiom) -> list[tuple[str, str]]:
    out = []
    exprs = []
    if isinstance(ax, ConceptInclusion):
        exprs = [ax.sub, ax.sup]
    elif isinstance(ax, ConceptAssertion):
        exprs = [ax.concept]
        out.append((ax.individual, "individual"))
    else:
        out += [(ax.role, "role"), (ax.head, "individual"), (ax.tail, "individual")]
    for e in exprs:
        for sub in subexpressions(e):
            if isinstance(sub, Atomic):
                out.append((sub.name, "concept"))
            elif isinstance(sub, Nominal):
                out.append((sub.individual, "individual"))
            elif isinstance(sub, Some):
                out.append((sub.role, "role"))
    return out


def validate_kb(kb: KnowledgeBase) -> list[Diagnostic]:
    """Report problems with a KB without raising."""
    diags: list[Diagnostic] = []
    sym = kb.symbols
    tables = {"individual": sym.individuals, "concept": sym.concepts, "role": sym.roles}
    declared: dict[str, str] = {}
    for kind, names in tables.items():
        for name in names:
            if name in declared and declared[name] != kind:
                diags.append(Diagnostic(
                    "NameClash", f"{name!r} declared as {declared[name]} and {kind}"))
            declared.setdefault(name, kind)
            if not NAME_RE.fullmatch(name) or name in KEYWORDS:
                diags.append(Diagnostic("InvalidName", f"{name!r} is not a valid name"))
    used: dict[str, str] = {}
    for ax in kb.axioms:
        for name, kind in _names_in(ax):
            if name not in tables[kind]:
                diags.append(Diagnostic("Unresolved", f"{kind} {name!r} is not declared", ax.line))
            prior = used.setdefault(name, kind)
            if prior != kind:
                diags.append(Diagnostic(
                    "NameClash", f"{name!r} used as {prior} and {kind}", ax.line))
        if isinstance(ax, ConceptInclusion):
            if isinstance(ax.sub, Nominal) and isinstance(ax.sup, Bottom):
                diags.append(Diagnostic(
                    "Inconsistent", f"{ax}: a nominal cannot be empty", ax.line))
        elif isinstance(ax, ConceptAssertion) and isinstance(ax.concept, Bottom):
            diags.append(Diagnostic("Inconsistent", f"{ax}: nothing is an instance of bottom", ax.line))
    return diags
