"""Normalization of EL++ KBs into the four TBox normal forms plus assertions.

Complex subexpressions are replaced by fresh concept names ``__nf<k>``.  A name
introduced for a subexpression on the left of an inclusion gets ``expr ⊑ X``;
one on the right gets ``X ⊑ expr``.  Every model of the output is a model of
the input, and every model of the input extends to one of the output by
interpreting each fresh name as the extension of its subexpression.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Union

from .kb import (
    And, Atomic, Axiom, Bottom, ConceptAssertion, ConceptExpr, ConceptInclusion,
    KBSyntaxError, KnowledgeBase, Nominal, RoleAssertion, Some, SymbolTables, Top,
    _LineParser, _strip_comment, subexpressions,
)

FRESH_PREFIX = "__nf"

NormalOperand = Union[Top, Bottom, Atomic, Nominal]


class InconsistentAxiom(ValueError):
    """The KB contains an axiom no interpretation can satisfy, e.g. {a} ⊑ ⊥."""


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class NF1:
    c: NormalOperand
    d: NormalOperand

    def __str__(self) -> str:
        return f"nf1({self.c}, {self.d})"


@dataclass(frozen=True)
class NF2:
    c1: NormalOperand
    c2: NormalOperand
    e: NormalOperand

    def __str__(self) -> str:
        return f"nf2({self.c1}, {self.c2}, {self.e})"


@dataclass(frozen=True)
class NF3:
    c: NormalOperand
    role: str
    d: NormalOperand

    def __str__(self) -> str:
        return f"nf3({self.c}, {self.role}, {self.d})"


@dataclass(frozen=True)
class NF4:
    role: str
    c: NormalOperand
    d: NormalOperand

    def __str__(self) -> str:
        return f"nf4({self.role}, {self.c}, {self.d})"


@dataclass(frozen=True)
class AssertConcept:
    c: NormalOperand
    individual: str

    def __str__(self) -> str:
        return f"assert_c({self.c}, {self.individual})"


@dataclass(frozen=True)
class AssertRole:
    role: str
    head: str
    tail: str

    def __str__(self) -> str:
        return f"assert_r({self.role}, {self.head}, {self.tail})"


NormalizedAxiom = Union[NF1, NF2, NF3, NF4, AssertConcept, AssertRole]
NORMAL_SHAPES = (NF1, NF2, NF3, NF4, AssertConcept, AssertRole)
_BASIC = (Top, Bottom, Atomic, Nominal)


@dataclass(frozen=True)
class NormalizedKB:
    symbols: SymbolTables
    axioms: tuple[NormalizedAxiom, ...]
    fresh_count: int = 0
    provenance: dict[str, ConceptExpr] = field(default_factory=dict, compare=False)

    @property
    def fresh_names(self) -> frozenset[str]:
        return frozenset(self.provenance)

    @property
    def named_concepts(self) -> tuple[str, ...]:
        """Concept names excluding the synthetic ones."""
        return tuple(c for c in self.symbols.concepts if c not in self.provenance)

    def of_kind(self, kind: type) -> list:
        return [a for a in self.axioms if isinstance(a, kind)]


def is_normal(ax) -> bool:
    """True iff ``ax`` has exactly one of the six normalized shapes."""
    def op(x, allow_bottom=False):
        return isinstance(x, (Top, Atomic, Nominal)) or (allow_bottom and isinstance(x, Bottom))

    if isinstance(ax, NF1):
        return op(ax.c) and op(ax.d, True)
    if isinstance(ax, NF2):
        return op(ax.c1) and op(ax.c2) and op(ax.e, True)
    if isinstance(ax, NF3):
        return op(ax.c) and isinstance(ax.role, str) and op(ax.d)
    if isinstance(ax, NF4):
        return isinstance(ax.role, str) and op(ax.c) and op(ax.d)
    if isinstance(ax, AssertConcept):
        return op(ax.c) and isinstance(ax.individual, str)
    if isinstance(ax, AssertRole):
        return all(isinstance(x, str) for x in (ax.role, ax.head, ax.tail))
    return False


class _Normalizer:
    def __init__(self, kb: KnowledgeBase):
        self.kb = kb
        self.taken = set(kb.symbols.individuals) | set(kb.symbols.concepts) | set(kb.symbols.roles)
        self.counter = 0
        self.concepts = list(kb.symbols.concepts)
        self.out: list[NormalizedAxiom] = []
        self.seen: set[NormalizedAxiom] = set()
        self.memo: dict[tuple[ConceptExpr, str], Atomic] = {}
        self.provenance: dict[str, ConceptExpr] = {}
        self._done: set = set()

    def fresh(self, origin: ConceptExpr, polarity: str) -> Atomic:
        key = (origin, polarity)
        if key in self.memo:
            return self.memo[key]
        while True:
            name = f"{FRESH_PREFIX}{self.counter}"
            self.counter += 1
            if name not in self.taken:
                break
        self.taken.add(name)
        self.concepts.append(name)
        self.provenance[name] = origin
        self.memo[key] = Atomic(name)
        return self.memo[key]

    def emit(self, ax: NormalizedAxiom) -> None:
        if isinstance(ax, NF1) and isinstance(ax.c, Nominal) and isinstance(ax.d, Bottom):
            raise InconsistentAxiom(f"{ax.c} ⊑ bottom: a nominal cannot be empty")
        if (isinstance(ax, NF2) and isinstance(ax.e, Bottom) and ax.c1 == ax.c2
                and isinstance(ax.c1, Nominal)):
            raise InconsistentAxiom(f"{ax.c1} ⊓ {ax.c2} ⊑ bottom")
        if ax not in self.seen:
            self.seen.add(ax)
            self.out.append(ax)

    def lhs_operand(self, expr: ConceptExpr, pending: list) -> NormalOperand:
        """Operand standing for ``expr`` on a left-hand side."""
        if isinstance(expr, _BASIC):
            return expr
        x = self.fresh(expr, "sub")
        if (expr, x) not in self._done:
            self._done.add((expr, x))
            pending.append((expr, x))
        return x

    def rhs_operand(self, expr: ConceptExpr, pending: list) -> NormalOperand:
        if isinstance(expr, _BASIC):
            return expr
        x = self.fresh(expr, "sup")
        if (x, expr) not in self._done:
            self._done.add((x, expr))
            pending.append((x, expr))
        return x

    def inclusion(self, sub: ConceptExpr, sup: ConceptExpr) -> None:
        pending = [(sub, sup)]
        while pending:
            lhs, rhs = pending.pop(0)
            self._step(lhs, rhs, pending)

    def _step(self, lhs, rhs, pending) -> None:
        if isinstance(lhs, Bottom):
            return  # ⊥ ⊑ D holds vacuously
        if isinstance(lhs, Some) and isinstance(lhs.filler, Bottom):
            return  # ∃r.⊥ is empty
        if isinstance(rhs, And):
            if not isinstance(lhs, _BASIC):
                # name the left side once so both halves share it
                x = self.lhs_operand(lhs, pending)
                pending.append((x, rhs))
                return
            pending.append((lhs, rhs.left))
            pending.append((lhs, rhs.right))
            return
        if isinstance(rhs, Some) and isinstance(rhs.filler, Bottom):
            rhs = Bottom()  # ∃r.⊥ ≡ ⊥
        if isinstance(lhs, _BASIC):
            if isinstance(rhs, _BASIC):
                self.emit(NF1(lhs, rhs))
            else:  # rhs is Some
                d = self.rhs_operand(rhs.filler, pending)
                self.emit(NF3(lhs, rhs.role, d))
            return
        if isinstance(lhs, And):
            c1 = self.lhs_operand(lhs.left, pending)
            c2 = self.lhs_operand(lhs.right, pending)
            if isinstance(c1, Bottom) or isinstance(c2, Bottom):
                return
            e = rhs if isinstance(rhs, _BASIC) else self.rhs_operand(rhs, pending)
            self.emit(NF2(c1, c2, e))
            return
        # lhs is Some
        c = self.lhs_operand(lhs.filler, pending)
        if isinstance(rhs, Bottom):
            # ∃r.C ⊑ ⊥ becomes ∃r.C ⊑ Y, Y ⊑ ⊥ so NF4 never has ⊥ on the right
            y = self.fresh(lhs, "empty")
            self.emit(NF4(lhs.role, c, y))
            self.emit(NF1(y, Bottom()))
            return
        d = rhs if isinstance(rhs, _BASIC) else self.rhs_operand(rhs, pending)
        self.emit(NF4(lhs.role, c, d))

    def assertion(self, ax: ConceptAssertion) -> None:
        c = ax.concept
        if isinstance(c, Bottom):
            raise InconsistentAxiom(f"{ax}: nothing is an instance of bottom")
        if isinstance(c, (Top, Atomic, Nominal)):
            self.emit(AssertConcept(c, ax.individual))
            return
        pending: list = []
        x = self.rhs_operand(c, pending)
        self.emit(AssertConcept(x, ax.individual))
        while pending:
            lhs, rhs = pending.pop(0)
            self._step(lhs, rhs, pending)

    def run(self) -> NormalizedKB:
        for ax in self.kb.axioms:
            if isinstance(ax, ConceptInclusion):
                self.inclusion(ax.sub, ax.sup)
            elif isinstance(ax, ConceptAssertion):
                self.assertion(ax)
            else:
                self.emit(AssertRole(ax.role, ax.head, ax.tail))
        sym = SymbolTables(self.kb.symbols.individuals, tuple(self.concepts), self.kb.symbols.roles)
        return NormalizedKB(sym, tuple(self.out), len(self.provenance), dict(self.provenance))


def normalize(kb: KnowledgeBase) -> NormalizedKB:
    """Rewrite ``kb`` into normal forms NF1-NF4 plus ABox assertions.

    Raises InconsistentAxiom for axioms such as {a} ⊑ ⊥ or ⊥(a).
    """
    return _Normalizer(kb).run()


def abox_to_tbox(kb: KnowledgeBase) -> KnowledgeBase:
    """Replace assertions by inclusions over nominals: r(a,b) -> {a} ⊑ ∃r.{b}, C(a) -> {a} ⊑ C."""
    axioms: list[Axiom] = []
    for ax in kb.axioms:
        if isinstance(ax, ConceptAssertion):
            axioms.append(ConceptInclusion(Nominal(ax.individual), ax.concept, line=ax.line))
        elif isinstance(ax, RoleAssertion):
            axioms.append(ConceptInclusion(
                Nominal(ax.head), Some(ax.role, Nominal(ax.tail)), line=ax.line))
        else:
            axioms.append(ax)
    out = KnowledgeBase.from_axioms(axioms)
    # keep the original symbol order; the rewrite must not renumber rows
    return KnowledgeBase(kb.symbols, out.axioms, kb.duplicates_dropped)


def to_kb(nkb: NormalizedKB) -> KnowledgeBase:
    """Read normalized axioms back as ordinary EL++ axioms (fresh names included)."""
    axioms: list[Axiom] = []
    for ax in nkb.axioms:
        if isinstance(ax, NF1):
            axioms.append(ConceptInclusion(ax.c, ax.d))
        elif isinstance(ax, NF2):
            axioms.append(ConceptInclusion(And(ax.c1, ax.c2), ax.e))
        elif isinstance(ax, NF3):
            axioms.append(ConceptInclusion(ax.c, Some(ax.role, ax.d)))
        elif isinstance(ax, NF4):
            axioms.append(ConceptInclusion(Some(ax.role, ax.c), ax.d))
        elif isinstance(ax, AssertConcept):
            axioms.append(ConceptAssertion(ax.c, ax.individual))
        else:
            axioms.append(RoleAssertion(ax.role, ax.head, ax.tail))
    return KnowledgeBase(nkb.symbols, tuple(axioms))


# -- .nkb text format --------------------------------------------------------

def serialize_nkb(nkb: NormalizedKB) -> str:
    """Normal-form lines, preceded by comment lines carrying the symbol tables
    (row order) and the definition of every fresh name."""
    sym = nkb.symbols
    lines = [f"# {kind}: {' '.join(names)}".rstrip() for kind, names in
             (("individuals", sym.individuals), ("concepts", sym.concepts), ("roles", sym.roles))]
    lines += [f"# fresh {name} := {expr}" for name, expr in nkb.provenance.items()]
    lines += [str(ax) for ax in nkb.axioms]
    return "".join(line + "\n" for line in lines)


_FRESH_LINE = re.compile(r"#\s*fresh\s+(\S+)\s*:=\s*(.+)$")
_TABLE_LINE = re.compile(r"#\s*(individuals|concepts|roles):(.*)$")


def _operand(p: _LineParser) -> NormalOperand:
    e = p.expr()
    if not isinstance(e, _BASIC):
        p._fail("a basic operand (top, bottom, name or nominal)")
    return e


def parse_nkb(text: str) -> NormalizedKB:
    from .kb import _Registrar, parse_expr

    reg = _Registrar()
    provenance: dict[str, ConceptExpr] = {}
    axioms: list[NormalizedAxiom] = []
    tables: dict[str, tuple[str, ...]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        m = _FRESH_LINE.match(raw.strip())
        if m:
            provenance[m.group(1)] = parse_expr(m.group(2))
            continue
        m = _TABLE_LINE.match(raw.strip())
        if m:
            tables[m.group(1)] = tuple(m.group(2).split())
            continue
        line = _strip_comment(raw)
        if not line.strip():
            continue
        p = _LineParser(line, lineno)
        tag = p.next("a normal-form tag")
        p.expect("(")
        if tag == "nf1":
            c = _operand(p); p.expect(","); d = _operand(p)
            ax: NormalizedAxiom = NF1(c, d)
        elif tag == "nf2":
            c1 = _operand(p); p.expect(","); c2 = _operand(p); p.expect(","); e = _operand(p)
            ax = NF2(c1, c2, e)
        elif tag == "nf3":
            c = _operand(p); p.expect(","); r = p.name(); p.expect(","); d = _operand(p)
            ax = NF3(c, r, d)
        elif tag == "nf4":
            r = p.name(); p.expect(","); c = _operand(p); p.expect(","); d = _operand(p)
            ax = NF4(r, c, d)
        elif tag == "assert_c":
            c = _operand(p); p.expect(","); a = p.name()
            ax = AssertConcept(c, a)
        elif tag == "assert_r":
            r = p.name(); p.expect(","); a = p.name(); p.expect(","); b = p.name()
            ax = AssertRole(r, a, b)
        else:
            raise KBSyntaxError(lineno, 1, "nf1, nf2, nf3, nf4, assert_c or assert_r", tag)
        p.expect(")")
        if line[p.pos:].strip():
            p._fail("end of line")
        for x in _operands(ax):
            if isinstance(x, Atomic):
                reg.add(x.name, "concept", lineno)
            elif isinstance(x, Nominal):
                reg.add(x.individual, "individual", lineno)
        if isinstance(ax, (NF3, NF4)):
            reg.add(ax.role, "role", lineno)
        elif isinstance(ax, AssertConcept):
            reg.add(ax.individual, "individual", lineno)
        elif isinstance(ax, AssertRole):
            reg.add(ax.role, "role", lineno)
            reg.add(ax.head, "individual", lineno)
            reg.add(ax.tail, "individual", lineno)
        axioms.append(ax)
    sym = reg.tables()
    # fresh names defined but never used still belong to the concept table
    extra = tuple(n for n in provenance if n not in sym.concepts)
    sym = SymbolTables(sym.individuals, sym.concepts + extra, sym.roles)
    if len(tables) == 3:
        declared = SymbolTables(tables["individuals"], tables["concepts"], tables["roles"])
        for kind in ("individuals", "concepts", "roles"):
            missing = set(getattr(sym, kind)) - set(getattr(declared, kind))
            if missing:
                raise KBSyntaxError(1, 1, f"{kind} header listing {sorted(missing)}")
        sym = declared
    return NormalizedKB(sym, tuple(axioms), len(provenance), provenance)


def _operands(ax: NormalizedAxiom) -> tuple:
    if isinstance(ax, NF1):
        return (ax.c, ax.d)
    if isinstance(ax, NF2):
        return (ax.c1, ax.c2, ax.e)
    if isinstance(ax, (NF3, NF4)):
        return (ax.c, ax.d)
    if isinstance(ax, AssertConcept):
        return (ax.c,)
    return ()


# -- brute-force satisfiability over a small domain --------------------------

MAX_ORACLE_CONCEPTS = 4
MAX_ORACLE_ROLES = 2
MAX_ORACLE_DOMAIN = 3


class _Interp:
    """Concepts as bitmasks over the domain; roles as per-element successor masks."""

    def __init__(self, k: int):
        self.k = k
        self.full = (1 << k) - 1
        self.ind: dict[str, int] = {}
        self.con: dict[str, int] = {}
        self.role: dict[str, tuple[int, ...]] = {}

    def ext(self, e: ConceptExpr) -> int:
        if isinstance(e, Top):
            return self.full
        if isinstance(e, Bottom):
            return 0
        if isinstance(e, Atomic):
            return self.con[e.name]
        if isinstance(e, Nominal):
            return 1 << self.ind[e.individual]
        if isinstance(e, And):
            return self.ext(e.left) & self.ext(e.right)
        filler = self.ext(e.filler)
        succ = self.role[e.role]
        return sum(1 << x for x in range(self.k) if succ[x] & filler)

    def holds(self, ax: Axiom) -> bool:
        if isinstance(ax, ConceptInclusion):
            return self.ext(ax.sub) & ~self.ext(ax.sup) == 0
        if isinstance(ax, ConceptAssertion):
            return bool(self.ext(ax.concept) >> self.ind[ax.individual] & 1)
        return bool(self.role[ax.role][self.ind[ax.head]] >> self.ind[ax.tail] & 1)


def _symbols_of(ax: Axiom) -> set[str]:
    names = set()
    if isinstance(ax, ConceptInclusion):
        exprs = [ax.sub, ax.sup]
    elif isinstance(ax, ConceptAssertion):
        exprs = [ax.concept]
    else:
        return {("r", ax.role)}
    for e in exprs:
        for s in subexpressions(e):
            if isinstance(s, Atomic):
                names.add(("c", s.name))
            elif isinstance(s, Some):
                names.add(("r", s.role))
    return names


def small_model_oracle(kb: KnowledgeBase | NormalizedKB, domain_size: int) -> bool:
    """Exhaustively search interpretations over a domain of ``domain_size``
    elements; True iff one satisfies every axiom.

    For a NormalizedKB the fresh concepts are searched as well but do not count
    against the concept bound.
    """
    if isinstance(kb, NormalizedKB):
        fresh = kb.fresh_names
        kb = to_kb(kb)
    else:
        fresh = frozenset()
    sym = kb.symbols
    user_concepts = [c for c in sym.concepts if c not in fresh]
    if not 1 <= domain_size <= MAX_ORACLE_DOMAIN:
        raise TooLarge(f"domain size {domain_size} outside 1..{MAX_ORACLE_DOMAIN}")
    if len(user_concepts) > MAX_ORACLE_CONCEPTS or len(sym.roles) > MAX_ORACLE_ROLES \
            or len(sym.individuals) > domain_size:
        raise TooLarge(
            f"{len(user_concepts)} concepts, {len(sym.roles)} roles, {len(sym.individuals)} "
            f"individuals exceed oracle bounds ({MAX_ORACLE_CONCEPTS}, {MAX_ORACLE_ROLES}, "
            f"{domain_size})")

    k = domain_size
    order = [("r", r) for r in sym.roles] + [("c", c) for c in sym.concepts]
    pos = {s: i for i, s in enumerate(order)}
    # each axiom is checked as soon as the last symbol it mentions is assigned
    checks: list[list[Axiom]] = [[] for _ in range(len(order) + 1)]
    for ax in kb.axioms:
        syms = _symbols_of(ax)
        last = max((pos[s] + 1 for s in syms), default=0)
        checks[last].append(ax)

    interp = _Interp(k)
    role_values = list(itertools.product(range(1 << k), repeat=k))

    def search(i: int) -> bool:
        if not all(interp.holds(ax) for ax in checks[i]):
            return False
        if i == len(order):
            return True
        kind, name = order[i]
        values = role_values if kind == "r" else range(1 << k)
        for v in values:
            if kind == "r":
                interp.role[name] = v
            else:
                interp.con[name] = v
            if search(i + 1):
                return True
        return False

    for assignment in itertools.product(range(k), repeat=len(sym.individuals)):
        interp.ind = dict(zip(sym.individuals, assignment))
        if search(0):
            return True
    return False
