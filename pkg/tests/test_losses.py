import logging

import numpy as np
import pytest

from boxel import losses as L
from boxel.evaluation import check_axiom
from boxel.kb import Atomic, Bottom, Nominal, Top, parse_kb
from boxel.model import ModelConfig, init_model
from boxel.normalize import (NF1, NF2, NF3, NF4, AssertConcept, AssertRole, InconsistentAxiom,
                             normalize)
from boxel.synthetic import family_kb

from conftest import hand_model

A, B, C, D, E = (Atomic(x) for x in "ABCDE")


def test_concept_assertion():
    m = hand_model({"C": ([0, 0], [1, 1])}, {"p": [0.5, 0.5], "q": [1.5, 0.5]})
    assert L.loss_concept_assertion(m, C, "p") == 0.0
    assert L.loss_concept_assertion(m, C, "q") == pytest.approx(0.5)
    assert L.loss_concept_assertion(m, Top(), "p") == 0.0
    with pytest.raises(L.BottomAssertion):
        L.compile_axioms(m, [AssertConcept(Bottom(), "p")])


def test_role_assertion():
    m = hand_model(points={"a": [0, 0], "b": [1, 0], "c": [3, 4]},
                   roles={"id": ([1, 1], [0, 0]), "right": ([1, 1], [1, 0])})
    assert L.loss_role_assertion(m, "id", "a", "a") == 0.0
    assert L.loss_role_assertion(m, "right", "a", "b") == 0.0
    assert L.loss_role_assertion(m, "id", "a", "c") == pytest.approx(5.0)


def test_negative_role_hinge():
    m = hand_model(points={"a": [0, 0], "b": [0.25, 0], "c": [3, 4]}, roles={"id": ([1, 1], [0, 0])})
    assert L.loss_neg_role_assertion(m, "id", "a", "c") == 0.0
    assert L.loss_neg_role_assertion(m, "id", "a", "a") == 1.0
    assert L.loss_neg_role_assertion(m, "id", "a", "b") == pytest.approx(0.75)


def test_nf1():
    m = hand_model({"B": ([0, 0], [1, 1]), "C": ([0.25, 0.25], [0.5, 0.5]), "D": ([0, 0], [1, 1])})
    assert L.loss_nf1(m, B, D) == 0.0
    assert L.loss_nf1(m, C, D, vol="modified") == 0.0
    far = hand_model({"C": ([0, 0], [2, 2]), "D": ([3, 3], [4, 4])}, temperature=1e-3)
    assert L.loss_nf1(far, C, D) == pytest.approx(1.0, abs=1e-6)


def test_nf1_bottom():
    m = hand_model({"C": ([0, 0], [-0.1, 1]), "D": ([0, 0], [0.9, 1])}, {"a": [0, 0]})
    assert L.loss_nf1_bottom(m, C) == 0.0
    assert L.loss_nf1_bottom(m, D) == pytest.approx(1.0)
    with pytest.raises(InconsistentAxiom):
        L.loss_nf1_bottom(m, Nominal("a"))


def test_nf1_bottom_skipped_for_constrained_boxes(caplog):
    m = hand_model({"C": ([0, 0], [1, 1])}, unconstrained=False)
    with caplog.at_level(logging.WARNING):
        comp = L.compile_axioms(m, [NF1(C, Bottom())])
    assert len(comp.nf1_bottom) == 0 and "ignored" in caplog.text


def test_nf2():
    m = hand_model({"A": ([0, 0], [2, 2]), "B": ([1, 1], [3, 3]), "E": ([1, 1], [2, 2]),
                    "C": ([0.5, 0.5], [1, 1])})
    assert L.loss_nf2(m, C, C, C) == 0.0
    assert L.loss_nf2(m, A, B, E, vol="modified") == 0.0
    assert L.loss_nf2(m, A, B, C, vol="modified") > 0.0


def test_nf2_disjoint():
    m = hand_model({"A": ([0, 0], [1, 1]), "B": ([5, 5], [6, 6]), "C": ([0.5, 0.5], [1.5, 1.5])},
                   {"a": [0, 0]}, temperature=1e-3)
    assert L.loss_nf2_disjoint(m, A, B) == pytest.approx(0.0, abs=1e-12)
    assert L.loss_nf2_disjoint(m, A, A, vol="modified") == 0.5
    assert L.loss_nf2_disjoint(m, A, C) == L.loss_nf2_disjoint(m, C, A)
    assert L.loss_nf2_disjoint(m, A, C, vol="modified") == L.loss_nf2_disjoint(m, C, A, vol="modified")
    with pytest.raises(InconsistentAxiom):
        L.loss_nf2_disjoint(m, Nominal("a"), Nominal("a"))


def test_nf3():
    m = hand_model({"C": ([0.25, 0.25], [0.5, 0.5]), "D": ([0, 0], [1, 1]), "U": ([0, 0], [1, 1]),
                    "T": ([1, 2], [3, 6])}, {"a": [0.5, 0.5]},
                   roles={"id": ([1, 1], [0, 0]), "r": ([2, 4], [1, 2])})
    assert L.loss_nf3(m, C, "id", D, vol="modified") == 0.0
    assert L.loss_nf3(m, Atomic("U"), "r", Atomic("T"), vol="modified") == 0.0
    # a nominal goes through the degenerate point box: T_r(0.5, 0.5) = (2, 4)
    assert L.loss_nf3(m, Nominal("a"), "r", Atomic("T"), vol="modified") == 0.0
    assert L.loss_nf3(m, Nominal("a"), "id", Atomic("T"), vol="modified") == 1.0


def test_nf4():
    m = hand_model({"C": ([2, 2], [4, 4]), "D": ([1, 1], [2, 2]), "X": ([0.5, 0.25], [3, 1])},
                   roles={"id": ([1, 1], [0, 0]), "r": ([2, 2], [0, 0]),
                          "t": ([2.0, 0.5], [1.0, -3.0]), "tinv": ([0.5, 2.0], [-0.5, 6.0])})
    assert L.loss_nf4(m, "id", C, D) == L.loss_nf1(m, C, D)
    assert L.loss_nf4(m, "r", C, D, vol="modified") == 0.0
    # ∃t.X ⊑ D moves X by t^-1, which is the map tinv used forward
    assert L.loss_nf4(m, "t", Atomic("X"), D) == pytest.approx(L.loss_nf3(m, Atomic("X"), "tinv", D))


def test_nf4_singular_scale():
    m = hand_model({"C": ([0, 0], [1, 1])}, roles={"r": ([1e-9, 1], [0, 0])})
    with pytest.raises(L.SingularScale):
        L.loss_nf4(m, "r", C, C)


def test_negative_subsumption():
    m = hand_model({"A": ([0, 0], [1, 1]), "B": ([5, 5], [6, 6])}, temperature=1e-3)
    assert L.loss_neg_subsumption(m, "A", "B") == pytest.approx(0.0, abs=1e-12)
    assert L.loss_neg_subsumption(m, "A", "A") == pytest.approx(0.05)
    m1 = hand_model({"A": ([0, 0], [1, 1])}, phi=1.0)
    assert L.loss_neg_subsumption(m1, "A", "A") == pytest.approx(1.0)


def test_regularizer():
    inside = hand_model({"A": ([0.125, 0.125], [0.75, 0.875])})
    assert L.regularizer(inside) == 0.0
    over = hand_model({"A": ([0.5, 0.5], [1.2, 0.75])})
    assert L.regularizer(over) == pytest.approx(0.3)
    empty = hand_model({"A": ([0.5, 0.5], [0.4, 3.0])})
    assert L.regularizer(empty) == 0.0


def test_losses_nonnegative_and_dimension_permutation_invariant(rng):
    nkb = normalize(parse_kb(
        "subclass(A, B)\nsubclass(and(A, C), B)\nsubclass(A, some(r, C))\nsubclass(some(r, B), C)\n"
        "subclass(and(A, C), bottom)\ninstance(A, a)\nrelation(r, a, b)\nsubclass(C, bottom)\n"))
    m = init_model(nkb, ModelConfig(dim=4, unconstrained=True))
    for k in m.params:
        m.params[k] = m.params[k] + rng.normal(scale=0.3, size=m.params[k].shape)
    neg = L.Negatives((("r", "b", "a"),), (("A", "C"),))
    base = L.total_loss(m, nkb, neg)
    assert all(v >= 0 for v in base.as_dict().values())
    perm = rng.permutation(4)
    p = m.copy()
    for k in p.params:
        p.params[k] = p.params[k][:, perm]
    # the C ⊑ ⊥ term only looks at the first dimension
    permuted = L.total_loss(p, nkb, neg).as_dict()
    for k, v in base.as_dict().items():
        if k not in ("nf1_bottom", "total"):
            assert permuted[k] == pytest.approx(v, rel=1e-12)


def test_sample_negatives_properties():
    nkb = normalize(parse_kb("relation(r, a, b)\nrelation(r, b, c)\nrelation(r, a, c)\n"
                             "subclass(A, B)\nsubclass(B, C)\nsubclass(A, C)\nsubclass(D, C)"))
    known_r = set(L.role_positives(nkb.axioms))
    known_s = set(L.subsumption_positives(nkb.axioms))
    for seed in range(50):
        neg = L.sample_negatives(nkb, np.random.default_rng(seed))
        assert not set(neg.roles) & known_r
        assert not set(neg.subsumptions) & known_s
        assert all(c != d for c, d in neg.subsumptions)
    a = L.sample_negatives(nkb, np.random.default_rng(3), ratio=2)
    b = L.sample_negatives(nkb, np.random.default_rng(3), ratio=2)
    assert a == b and len(a.roles) <= 6


def test_sample_negatives_single_individual(caplog):
    nkb = normalize(parse_kb("relation(r, a, a)\nsubclass(A, B)"))
    with caplog.at_level(logging.WARNING):
        neg = L.sample_negatives(nkb, np.random.default_rng(0))
    assert neg.roles == () and "role corruption skipped" in caplog.text


def test_negatives_never_use_fresh_names():
    nkb = normalize(parse_kb("subclass(A, some(r, and(B, C)))\nsubclass(B, C)\nsubclass(C, D)"))
    names = set()
    for seed in range(30):
        for c, d in L.sample_negatives(nkb, np.random.default_rng(seed)).subsumptions:
            names |= {c, d}
    assert not names & nkb.fresh_names


def test_total_loss_satisfying_model_is_zero():
    nkb = normalize(parse_kb("subclass(A, B)\nsubclass(and(A, C), B)\nsubclass(A, some(r, B))\n"
                             "subclass(some(r, A), B)\ninstance(A, a)\nrelation(r, a, b)\n"))
    m = hand_model({"A": ([0.25, 0.25], [0.5, 0.5]), "B": ([0.125, 0.125], [0.875, 0.875]),
                    "C": ([0.25, 0.25], [0.75, 0.75])},
                   {"a": [0.25, 0.5], "b": [0.375, 0.625]},
                   roles={"r": ([1, 1], [0.125, 0.125])})
    bd = L.total_loss(m, nkb, vol="modified")
    assert bd.positive == 0.0 and bd.total == 0.0
    assert all(check_axiom(m, ax, 0.0).satisfied for ax in nkb.axioms)


def test_total_loss_empty_kb_is_regularizer_only():
    m = hand_model({"A": ([0.5, 0.5], [1.5, 0.75])})
    comp = L.compile_axioms(m, [])
    total, sums = L.evaluate(m, comp)
    assert total == sums["regularizer"] == pytest.approx(0.6)


def test_family_loss_at_init_regression():
    nkb = normalize(family_kb())
    bd = L.total_loss(init_model(nkb, ModelConfig(dim=2)), nkb)
    assert np.isfinite(bd.total) and bd.total > 0
    assert bd.total == pytest.approx(7.923149786684274, rel=1e-12)
    assert bd.total == pytest.approx(sum(getattr(bd, k) for k in L.LossBreakdown.PARTS))


def test_reg_weight_scales_regularizer():
    m = hand_model({"A": ([0.5, 0.5], [1.5, 0.75])}, reg_weight=2.5)
    total, _ = L.evaluate(m, L.compile_axioms(m, []))
    assert total == pytest.approx(1.5)
