"""Per-axiom loss terms, negative sampling and the assembled training loss.

Every loss is evaluated in batches: axioms of one kind are turned into row
indices into the model's box table (see ``EmbeddingModel.box_table``) and the
geometry functions run over all rows at once.  ``vol`` selects the volume used
inside the disjoint measure: ``"soft"`` for training, ``"modified"`` for the
exact checks the soundness results are stated for.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .geometry import (AffineMap, Box, DivisionByZero, SCALE_FLOOR, SingularScale,
                       VolumeConfig, apply, disjoint_measure, intersect, inverse, log_svol, mvol)
from .kb import Atomic, Bottom, Nominal
from .model import EmbeddingModel
from .normalize import (NF1, NF2, NF3, NF4, AssertConcept, AssertRole,
                        InconsistentAxiom, NormalizedKB)

logger = logging.getLogger(__name__)


class BottomAssertion(InconsistentAxiom):
    pass


class NonFiniteLoss(FloatingPointError):
    pass


@dataclass
class LossBreakdown:
    concept_assertion: float = 0.0
    role_assertion: float = 0.0
    nf1: float = 0.0
    nf1_bottom: float = 0.0
    nf2: float = 0.0
    nf2_disjoint: float = 0.0
    nf3: float = 0.0
    nf4: float = 0.0
    neg_role: float = 0.0
    neg_subsumption: float = 0.0
    regularizer: float = 0.0
    total: float = 0.0

    PARTS = ("concept_assertion", "role_assertion", "nf1", "nf1_bottom", "nf2",
             "nf2_disjoint", "nf3", "nf4", "neg_role", "neg_subsumption", "regularizer")

    def as_dict(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    @property
    def positive(self) -> float:
        """Sum of the positive-axiom terms (no negatives, no regularizer)."""
        return sum(getattr(self, k) for k in self.PARTS[:8])

    def __str__(self) -> str:
        return " ".join(f"{k}={v:.6g}" for k, v in self.as_dict().items())


# -- geometric kernels (batched over rows) ------------------------------------

def point_outside(p, box: Box):
    """Σ_i max(0, p_i - M_i) + Σ_i max(0, m_i - p_i)."""
    return ad.sum(ad.relu(p - box.upper), axis=-1) + ad.sum(ad.relu(box.lower - p), axis=-1)


def transformed_distance(t: AffineMap, pa, pb):
    return ad.norm(t.scale * pa + t.offset - pb, axis=-1)


def disjoint_ratio(b1: Box, b2: Box, cfg: VolumeConfig, vol: str = "soft"):
    """vol(b1 ∩ b2) / (vol(b1) + vol(b2))."""
    inter = intersect(b1, b2)
    if vol == "soft":
        # exp(li - logaddexp(l1, l2)), shifted so nothing overflows
        l1, l2 = log_svol(b1, cfg), log_svol(b2, cfg)
        top = ad.maximum(l1, l2)
        lse = top + ad.log(ad.exp(l1 - top) + ad.exp(l2 - top))
        return ad.exp(log_svol(inter, cfg) - lse)
    den = mvol(b1, cfg) + mvol(b2, cfg)
    if np.any(ad.value(den) == 0):
        raise DivisionByZero("both boxes have zero modified volume")
    return mvol(inter, cfg) / den


# -- negatives ---------------------------------------------------------------

@dataclass(frozen=True)
class Negatives:
    roles: tuple[tuple[str, str, str], ...] = ()
    subsumptions: tuple[tuple[str, str], ...] = ()

    def __len__(self) -> int:
        return len(self.roles) + len(self.subsumptions)


def role_positives(axioms) -> list[tuple[str, str, str]]:
    """Role assertions, plus {a} ⊑ ∃r.{b} inclusions that encode them."""
    out = []
    for ax in axioms:
        if isinstance(ax, AssertRole):
            out.append((ax.role, ax.head, ax.tail))
        elif isinstance(ax, NF3) and isinstance(ax.c, Nominal) and isinstance(ax.d, Nominal):
            out.append((ax.role, ax.c.individual, ax.d.individual))
    return out


def subsumption_positives(axioms) -> list[tuple[str, str]]:
    return [(ax.c.name, ax.d.name) for ax in axioms
            if isinstance(ax, NF1) and isinstance(ax.c, Atomic) and isinstance(ax.d, Atomic)]


def sample_negatives(nkb: NormalizedKB, rng: np.random.Generator, ratio: int = 1,
                     axioms: Sequence | None = None, max_tries: int = 20) -> Negatives:
    """``ratio`` corrupted copies of every role assertion and of every
    subsumption between two named concepts.

    A role corruption replaces the head or the tail (chosen uniformly) by
    another individual; a subsumption corruption replaces the sub- or the
    superclass by another named concept.  Known positives are never produced.
    """
    axioms = nkb.axioms if axioms is None else axioms
    individuals = list(nkb.symbols.individuals)
    concepts = list(nkb.named_concepts)

    role_pos = role_positives(axioms)
    known_roles = set(role_positives(nkb.axioms))
    roles: list[tuple[str, str, str]] = []
    if role_pos and len(individuals) < 2:
        logger.warning("fewer than two individuals: role corruption skipped")
    elif role_pos:
        for r, a, b in role_pos:
            for _ in range(ratio):
                for _ in range(max_tries):
                    side = rng.integers(2)
                    cur = a if side == 0 else b
                    pick = individuals[rng.integers(len(individuals) - 1)]
                    if pick == cur:
                        pick = individuals[-1]
                    cand = (r, pick, b) if side == 0 else (r, a, pick)
                    if cand not in known_roles:
                        roles.append(cand)
                        break

    # pairs with a fresh side would leak fresh names into the negatives
    named = set(concepts)
    sub_pos = [(c, d) for c, d in subsumption_positives(axioms) if c in named and d in named]
    known_subs = set(subsumption_positives(nkb.axioms))
    subs: list[tuple[str, str]] = []
    if sub_pos and len(concepts) < 2:
        logger.warning("fewer than two named concepts: subsumption corruption skipped")
    elif sub_pos:
        for c, d in sub_pos:
            for _ in range(ratio):
                for _ in range(max_tries):
                    side = rng.integers(2)
                    cur = c if side == 0 else d
                    pick = concepts[rng.integers(len(concepts))]
                    if pick == cur:
                        continue
                    cand = (pick, d) if side == 0 else (c, pick)
                    if cand[0] != cand[1] and cand not in known_subs:
                        subs.append(cand)
                        break
    return Negatives(tuple(roles), tuple(subs))


# -- batching ----------------------------------------------------------------

@dataclass
class Compiled:
    """Row indices per axiom kind, ready for :func:`evaluate`."""
    ca_point: np.ndarray
    ca_box: np.ndarray
    ra: np.ndarray  # (k, 3): role, head row, tail row
    nf1: np.ndarray  # (k, 2)
    nf1_bottom: np.ndarray  # (k,)
    nf2: np.ndarray  # (k, 3)
    nf2_disjoint: np.ndarray  # (k, 2)
    nf3: np.ndarray  # (k, 3): c row, role, d row
    nf4: np.ndarray  # (k, 3): role, c row, d row
    neg_role: np.ndarray  # (k, 3)
    neg_sub: np.ndarray  # (k, 2)


def _idx(rows, width=None) -> np.ndarray:
    if width is None:
        return np.asarray(rows, dtype=np.intp).reshape(-1)
    return np.asarray(rows, dtype=np.intp).reshape(-1, width)


def compile_axioms(model: EmbeddingModel, axioms, negatives: Negatives = Negatives(),
                   skip_bottom: bool | None = None) -> Compiled:
    """Translate normalized axioms into index arrays.

    Raises BottomAssertion / InconsistentAxiom for axioms no embedding can
    satisfy.  ``C ⊑ ⊥`` is dropped (with a warning) unless the model stores
    unconstrained boxes.
    """
    if skip_bottom is None:
        skip_bottom = not model.config.unconstrained
    row = model.row_of
    ca_p, ca_b, ra, n1, n1b, n2, n2d, n3, n4 = ([] for _ in range(9))
    skipped = 0
    for ax in axioms:
        if isinstance(ax, AssertConcept):
            if isinstance(ax.c, Bottom):
                raise BottomAssertion(f"{ax}: bottom has no instances")
            ca_p.append(row(Nominal(ax.individual)))
            ca_b.append(row(ax.c))
        elif isinstance(ax, AssertRole):
            ra.append((model.role_row(ax.role), row(Nominal(ax.head)), row(Nominal(ax.tail))))
        elif isinstance(ax, NF1):
            if isinstance(ax.d, Bottom):
                if isinstance(ax.c, Nominal):
                    raise InconsistentAxiom(f"{ax}: a nominal cannot be empty")
                if skip_bottom:
                    skipped += 1
                    continue
                n1b.append(row(ax.c))
            else:
                n1.append((row(ax.c), row(ax.d)))
        elif isinstance(ax, NF2):
            if isinstance(ax.e, Bottom):
                if ax.c1 == ax.c2 and isinstance(ax.c1, Nominal):
                    raise InconsistentAxiom(f"{ax}: a nominal is not disjoint from itself")
                n2d.append((row(ax.c1), row(ax.c2)))
            else:
                n2.append((row(ax.c1), row(ax.c2), row(ax.e)))
        elif isinstance(ax, NF3):
            n3.append((row(ax.c), model.role_row(ax.role), row(ax.d)))
        elif isinstance(ax, NF4):
            n4.append((model.role_row(ax.role), row(ax.c), row(ax.d)))
        else:
            raise TypeError(f"not a normalized axiom: {ax!r}")
    if skipped:
        logger.warning("%d C ⊑ ⊥ axiom(s) ignored: constrained boxes cannot be empty", skipped)
    neg_r = [(model.role_row(r), row(Nominal(a)), row(Nominal(b))) for r, a, b in negatives.roles]
    neg_s = [(row(Atomic(c)), row(Atomic(d))) for c, d in negatives.subsumptions]
    return Compiled(_idx(ca_p), _idx(ca_b), _idx(ra, 3), _idx(n1, 2), _idx(n1b), _idx(n2, 3),
                    _idx(n2d, 2), _idx(n3, 3), _idx(n4, 3), _idx(neg_r, 3), _idx(neg_s, 2))


def _rows(lower, upper, idx) -> Box:
    return Box(ad.take(lower, idx), ad.take(upper, idx))


def _maps(scale, offset, idx) -> AffineMap:
    return AffineMap(ad.take(scale, idx), ad.take(offset, idx))


def _centre(lower, upper, idx):
    return (ad.take(lower, idx) + ad.take(upper, idx)) / 2.0


def _check_scale(t: AffineMap) -> None:
    if np.any(ad.value(t.scale) < SCALE_FLOOR):
        raise SingularScale("role scale below the inversion floor")


def term_values(model: EmbeddingModel, comp: Compiled, params=None, vol: str = "soft") -> dict:
    """Per-row loss values for every kind (arrays, or Tensors when ``params`` are tracked)."""
    cfg = model.config
    vcfg = cfg.volume
    lower, upper = model.box_table(params)
    scale, offset = model.role_table(params)
    out = {}
    if len(comp.ca_point):
        p = _centre(lower, upper, comp.ca_point)
        out["concept_assertion"] = point_outside(p, _rows(lower, upper, comp.ca_box))
    if len(comp.ra):
        t = _maps(scale, offset, comp.ra[:, 0])
        out["role_assertion"] = transformed_distance(
            t, _centre(lower, upper, comp.ra[:, 1]), _centre(lower, upper, comp.ra[:, 2]))
    if len(comp.nf1):
        out["nf1"] = disjoint_measure(_rows(lower, upper, comp.nf1[:, 0]),
                                      _rows(lower, upper, comp.nf1[:, 1]), vcfg, vol)
    if len(comp.nf1_bottom):
        b = _rows(lower, upper, comp.nf1_bottom)
        out["nf1_bottom"] = ad.relu(b.upper[:, 0] - b.lower[:, 0] + vcfg.epsilon)
    if len(comp.nf2):
        inter = intersect(_rows(lower, upper, comp.nf2[:, 0]), _rows(lower, upper, comp.nf2[:, 1]))
        out["nf2"] = disjoint_measure(inter, _rows(lower, upper, comp.nf2[:, 2]), vcfg, vol)
    if len(comp.nf2_disjoint):
        out["nf2_disjoint"] = disjoint_ratio(_rows(lower, upper, comp.nf2_disjoint[:, 0]),
                                             _rows(lower, upper, comp.nf2_disjoint[:, 1]), vcfg, vol)
    if len(comp.nf3):
        t = _maps(scale, offset, comp.nf3[:, 1])
        moved = apply(t, _rows(lower, upper, comp.nf3[:, 0]))
        out["nf3"] = disjoint_measure(moved, _rows(lower, upper, comp.nf3[:, 2]), vcfg, vol)
    if len(comp.nf4):
        t = _maps(scale, offset, comp.nf4[:, 0])
        _check_scale(t)
        moved = apply(inverse(t), _rows(lower, upper, comp.nf4[:, 1]))
        out["nf4"] = disjoint_measure(moved, _rows(lower, upper, comp.nf4[:, 2]), vcfg, vol)
    if len(comp.neg_role):
        t = _maps(scale, offset, comp.neg_role[:, 0])
        d = transformed_distance(t, _centre(lower, upper, comp.neg_role[:, 1]),
                                 _centre(lower, upper, comp.neg_role[:, 2]))
        out["neg_role"] = ad.relu(cfg.gamma - d)
    if len(comp.neg_sub):
        dm = disjoint_measure(_rows(lower, upper, comp.neg_sub[:, 0]),
                              _rows(lower, upper, comp.neg_sub[:, 1]), vcfg, vol)
        out["neg_subsumption"] = cfg.phi * (1.0 - dm)
    return out


def regularizer(model: EmbeddingModel, params=None):
    """Σ over non-empty concept boxes of Σ_i max(0, M_i - 1 + ε) + max(0, -m_i - ε)."""
    p = model.params if params is None else params
    eps = model.config.volume.epsilon
    lo = p["concept_lower"]
    up = lo + model.side(p["concept_upper_delta"])
    if ad.value(lo).shape[0] == 0:
        return 0.0
    nonempty = ~np.any(ad.value(up) < ad.value(lo), axis=-1, keepdims=True)
    per = ad.relu(up - 1.0 + eps) + ad.relu(-lo - eps)
    return ad.sum(ad.where(np.broadcast_to(nonempty, per.shape), per, 0.0))


def evaluate(model: EmbeddingModel, comp: Compiled, params=None, vol: str = "soft"):
    """(total, {kind: summed term}) for a compiled batch; total follows the
    graph when ``params`` are tracked tensors."""
    terms = term_values(model, comp, params, vol)
    sums = {k: ad.sum(v) for k, v in terms.items()}
    reg = regularizer(model, params)
    total = 0.0
    for k in LossBreakdown.PARTS[:-1]:
        if k in sums:
            total = total + sums[k]
    total = total + model.config.reg_weight * reg
    sums["regularizer"] = reg
    return total, sums


def breakdown(total, sums) -> LossBreakdown:
    vals = {k: float(ad.value(v)) for k, v in sums.items()}
    return LossBreakdown(total=float(ad.value(total)), **vals)


def total_loss(model: EmbeddingModel, nkb: NormalizedKB, negatives: Negatives = Negatives(),
               vol: str = "soft", axioms=None) -> LossBreakdown:
    comp = compile_axioms(model, nkb.axioms if axioms is None else axioms, negatives)
    return breakdown(*evaluate(model, comp, vol=vol))


# -- single-axiom entry points ----------------------------------------------

def _one(model, ax, kind, vol="soft", negatives=Negatives()):
    comp = compile_axioms(model, [ax] if ax is not None else [], negatives, skip_bottom=False)
    return float(np.sum(term_values(model, comp, vol=vol)[kind]))


def loss_concept_assertion(model, c, a: str, vol="soft") -> float:
    return _one(model, AssertConcept(c, a), "concept_assertion", vol)


def loss_role_assertion(model, r: str, a: str, b: str, vol="soft") -> float:
    return _one(model, AssertRole(r, a, b), "role_assertion", vol)


def loss_neg_role_assertion(model, r: str, a: str, b: str, vol="soft") -> float:
    return _one(model, None, "neg_role", vol, Negatives(roles=((r, a, b),)))


def loss_nf1(model, c, d, vol="soft") -> float:
    return _one(model, NF1(c, d), "nf1", vol)


def loss_nf1_bottom(model, c, vol="soft") -> float:
    return _one(model, NF1(c, Bottom()), "nf1_bottom", vol)


def loss_nf2(model, c1, c2, e, vol="soft") -> float:
    return _one(model, NF2(c1, c2, e), "nf2", vol)


def loss_nf2_disjoint(model, c1, c2, vol="soft") -> float:
    return _one(model, NF2(c1, c2, Bottom()), "nf2_disjoint", vol)


def loss_nf3(model, c, r: str, d, vol="soft") -> float:
    return _one(model, NF3(c, r, d), "nf3", vol)


def loss_nf4(model, r: str, c, d, vol="soft") -> float:
    return _one(model, NF4(r, c, d), "nf4", vol)


def loss_neg_subsumption(model, c: str, d: str, vol="soft") -> float:
    return _one(model, None, "neg_subsumption", vol, Negatives(subsumptions=((c, d),)))
