"""Scoring, ranking metrics, strict accuracy and the geometric soundness check."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import geometry as geo
from .geometry import Box
from .kb import Atomic, Bottom, ConceptInclusion, Nominal, RoleAssertion, parse_kb
from .losses import point_outside
from .model import EmbeddingModel
from .normalize import NF1, NF2, NF3, NF4, AssertConcept, AssertRole, NormalizedKB

AUC_NOTE = "auc = mean over queries of 1 - (rank-1)/(candidates-1); 1 when a query has one candidate"


class EmptyCandidates(ValueError):
    pass


def _box(model: EmbeddingModel, x) -> Box:
    return model.materialize_box(Atomic(x) if isinstance(x, str) else x)


def _boxes(model: EmbeddingModel, names: Sequence[str]) -> Box:
    lower, upper = model.box_table()
    rows = [model.row_of(Atomic(n)) for n in names]
    return Box(lower[rows], upper[rows])


def score_subsumption(model: EmbeddingModel, c, d, vol: str = "soft") -> float:
    """Fraction of C's volume inside D, clamped to [0, 1]."""
    bc, bd = _box(model, c), _box(model, d)
    r = geo.volume_ratio(geo.intersect(bc, bd), bc, model.config.volume, vol)
    return float(np.clip(r, 0.0, 1.0))


def subsumption_scores(model: EmbeddingModel, c: str, candidates: Sequence[str],
                       vol: str = "soft") -> np.ndarray:
    """score_subsumption(c, d) for every d in ``candidates`` at once."""
    bd = _boxes(model, candidates)
    bc = _box(model, c)
    bc = Box(np.broadcast_to(bc.lower, bd.lower.shape), np.broadcast_to(bc.upper, bd.upper.shape))
    r = geo.volume_ratio(geo.intersect(bc, bd), bc, model.config.volume, vol)
    return np.clip(r, 0.0, 1.0)


def score_role(model: EmbeddingModel, r: str, a: str, b: str) -> float:
    """‖T_r(p_a) - p_b‖; lower is better."""
    t = model.materialize_affine(r)
    return float(np.linalg.norm(geo.apply_point(t, model.point(a)) - model.point(b)))


def role_scores(model: EmbeddingModel, r: str, a: str, tails: Sequence[str]) -> np.ndarray:
    t = model.materialize_affine(r)
    moved = geo.apply_point(t, model.point(a))
    return np.linalg.norm(moved - model.points(list(tails)), axis=-1)


# -- ranking -----------------------------------------------------------------

@dataclass
class RankingResult:
    ranks: list[int] = field(default_factory=list)
    candidates: list[int] = field(default_factory=list)
    filtered_ranks: list[int] = field(default_factory=list)
    filtered_candidates: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.ranks)

    def _pick(self, filtered: bool):
        return (self.filtered_ranks, self.filtered_candidates) if filtered else (self.ranks, self.candidates)

    def hits_at(self, k: int, filtered: bool = False) -> float:
        ranks, _ = self._pick(filtered)
        return float(np.mean([r <= k for r in ranks])) if ranks else 0.0

    def mean_rank(self, filtered: bool = False) -> float:
        ranks, _ = self._pick(filtered)
        return float(np.mean(ranks)) if ranks else 0.0

    def auc(self, filtered: bool = False) -> float:
        ranks, counts = self._pick(filtered)
        if not ranks:
            return 0.0
        per = [1.0 if n == 1 else 1.0 - (r - 1) / (n - 1) for r, n in zip(ranks, counts)]
        return float(np.mean(per))

    def as_dict(self) -> dict[str, float]:
        out: dict[str, float] = {"queries": len(self)}
        for filtered, tag in ((False, "raw"), (True, "filtered")):
            out[f"{tag}_hits@10"] = self.hits_at(10, filtered)
            out[f"{tag}_hits@100"] = self.hits_at(100, filtered)
            out[f"{tag}_mean_rank"] = self.mean_rank(filtered)
            out[f"{tag}_auc"] = self.auc(filtered)
        return out


def rank_of(scores: np.ndarray, truth: int, descending: bool) -> int:
    """1-based rank of ``scores[truth]``; ties go to the lower index."""
    s = scores[truth]
    better = scores > s if descending else scores < s
    tied_before = np.flatnonzero(scores[:truth] == s).size
    return int(np.count_nonzero(better)) + tied_before + 1


def _as_query(q):
    if isinstance(q, (ConceptInclusion, NF1)):
        c, d = (q.sub, q.sup) if isinstance(q, ConceptInclusion) else (q.c, q.d)
        if not (isinstance(c, Atomic) and isinstance(d, Atomic)):
            raise ValueError(f"only atomic subsumptions can be ranked: {q}")
        return ("sub", c.name, d.name)
    if isinstance(q, (RoleAssertion, AssertRole)):
        return ("link", q.role, q.head, q.tail)
    if isinstance(q, tuple) and len(q) == 2:
        return ("sub", *q)
    if isinstance(q, tuple) and len(q) == 3:
        return ("link", *q)
    raise TypeError(f"cannot rank {q!r}")


def default_candidates(model: EmbeddingModel, kind: str) -> list[str]:
    if kind == "sub":
        return [c for c in model.symbols.concepts if c not in model.fresh]
    return list(model.symbols.individuals)


def rank_queries(model: EmbeddingModel, queries: Iterable, candidates: Sequence[str] | None = None,
                 filter_set: Iterable | None = None, vol: str = "soft") -> RankingResult:
    """Rank each query's answer among the candidates.

    Subsumption queries (C, D) rank candidate superclasses of C by descending
    score, excluding C itself; link queries (r, a, b) rank candidate tails by
    ascending distance.  ``filter_set`` holds known-true tuples in the same
    shape; the filtered rank drops those candidates (except the answer).
    """
    known = {(_as_query(f)[1:]) for f in filter_set} if filter_set is not None else set()
    res = RankingResult()
    for q in queries:
        kind, *parts = _as_query(q)
        cands = list(candidates) if candidates is not None else default_candidates(model, kind)
        if kind == "sub":
            c, truth = parts
            cands = [d for d in cands if d != c]
        else:
            r, a, truth = parts
        if not cands:
            raise EmptyCandidates(f"no candidates for query {q}")
        if truth not in cands:
            raise EmptyCandidates(f"answer {truth} of query {q} is not a candidate")
        if kind == "sub":
            scores = subsumption_scores(model, c, cands, vol)
            keep = [i for i, d in enumerate(cands) if d == truth or (c, d) not in known]
        else:
            scores = role_scores(model, r, a, cands)
            keep = [i for i, b in enumerate(cands) if b == truth or (r, a, b) not in known]
        ti = cands.index(truth)
        desc = kind == "sub"
        res.ranks.append(rank_of(scores, ti, desc))
        res.candidates.append(len(cands))
        res.filtered_ranks.append(rank_of(scores[keep], keep.index(ti), desc))
        res.filtered_candidates.append(len(keep))
    return res


# -- strict accuracy ---------------------------------------------------------

def accuracy_strict(model: EmbeddingModel, pairs: Iterable, tol: float = 1e-9) -> float:
    """Fraction of (C, D) pairs whose C box lies inside the D box."""
    pairs = [_as_query(p)[1:] for p in pairs]
    if not pairs:
        return 0.0
    ok = [bool(geo.contains(_box(model, d), _box(model, c), tol)) for c, d in pairs]
    return float(np.mean(ok))


# -- soundness ---------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    axiom: object
    satisfied: bool
    magnitude: float

    def line(self) -> str:
        tag = "SATISFIED" if self.satisfied else "VIOLATED"
        return f"{tag}\t{self.magnitude:.6g}\t{self.axiom}"


@dataclass
class SoundnessReport:
    verdicts: list[Verdict]
    tolerance: float

    @property
    def satisfied_fraction(self) -> float:
        if not self.verdicts:
            return 1.0
        return sum(v.satisfied for v in self.verdicts) / len(self.verdicts)

    @property
    def violations(self) -> list[Verdict]:
        return [v for v in self.verdicts if not v.satisfied]

    def lines(self) -> list[str]:
        return [v.line() for v in self.verdicts]

    def __str__(self) -> str:
        head = (f"# tolerance={self.tolerance:g} satisfied="
                f"{sum(v.satisfied for v in self.verdicts)}/{len(self.verdicts)}")
        return "\n".join([head, *self.lines()]) + "\n"


def _nonempty_extent(b: Box) -> float:
    """Smallest side, floored at 0: how far a box is from being empty."""
    return float(max(np.min(b.upper - b.lower), 0.0))


def _within(outer: Box, inner: Box, tol: float) -> tuple[bool, float]:
    return bool(geo.contains(outer, inner, tol)), float(geo.containment_violation(outer, inner))


def check_axiom(model: EmbeddingModel, ax, tol: float) -> Verdict:
    box = lambda x: model.materialize_box(x)  # noqa: E731
    if isinstance(ax, AssertConcept):
        b = box(ax.c)
        mag = float(point_outside(model.point(ax.individual), b))
        return Verdict(ax, mag <= tol, mag)
    if isinstance(ax, AssertRole):
        mag = score_role(model, ax.role, ax.head, ax.tail)
        return Verdict(ax, mag <= tol, mag)
    if isinstance(ax, NF1):
        c = box(ax.c)
        if isinstance(ax.d, Bottom):
            mag = _nonempty_extent(c)
            return Verdict(ax, bool(c.is_empty()) or mag < tol, mag)
        return Verdict(ax, *_within(box(ax.d), c, tol))
    if isinstance(ax, NF2):
        inter = geo.intersect(box(ax.c1), box(ax.c2))
        if isinstance(ax.e, Bottom):
            mag = _nonempty_extent(inter)
            return Verdict(ax, bool(inter.is_empty()) or mag < tol, mag)
        return Verdict(ax, *_within(box(ax.e), inter, tol))
    if isinstance(ax, NF3):
        moved = geo.apply(model.materialize_affine(ax.role), box(ax.c))
        return Verdict(ax, *_within(box(ax.d), moved, tol))
    if isinstance(ax, NF4):
        moved = geo.apply(geo.inverse(model.materialize_affine(ax.role)), box(ax.c))
        return Verdict(ax, *_within(box(ax.d), moved, tol))
    raise TypeError(f"not a normalized axiom: {ax!r}")


def check_soundness(model: EmbeddingModel, nkb: NormalizedKB, tol: float = 1e-6) -> SoundnessReport:
    """Read the embedding as an interpretation and check every axiom geometrically."""
    return SoundnessReport([check_axiom(model, ax, tol) for ax in nkb.axioms], tol)


def hard_intersection_empty(model: EmbeddingModel, c: str, d: str, tol: float = 0.0) -> bool:
    inter = geo.intersect(_box(model, c), _box(model, d))
    return bool(inter.is_empty()) or _nonempty_extent(inter) < tol


# -- files -------------------------------------------------------------------

def read_split(path) -> list:
    """Test-split file: ``subclass(C, D)`` or ``relation(r, a, b)`` lines."""
    kb = parse_kb(Path(path).read_text(encoding="utf-8"))
    return list(kb.axioms)


def metrics_report(metrics: dict, title: str = "") -> str:
    lines = [f"# {title}"] if title else []
    lines.append(f"# {AUC_NOTE}")
    for k, v in metrics.items():
        lines.append(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}")
    return "\n".join(lines) + "\n"


def write_metrics(path, metrics: dict, title: str = "") -> None:
    """Flat key=value report at ``path`` plus a JSON record at ``path.json``."""
    Path(path).write_text(metrics_report(metrics, title), encoding="utf-8")
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump({"note": AUC_NOTE, **metrics}, fh, indent=1, sort_keys=True)
        fh.write("\n")
