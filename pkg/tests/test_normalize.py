import numpy as np
import pytest

from boxel.kb import (And, Atomic, Bottom, ConceptAssertion, ConceptInclusion, Nominal,
                      RoleAssertion, Some, Top, parse_kb, subexpressions)
from boxel.normalize import (FRESH_PREFIX, NF1, NF2, NF3, NF4, AssertConcept, AssertRole,
                             InconsistentAxiom, TooLarge, abox_to_tbox, is_normal, normalize,
                             parse_nkb, serialize_nkb, small_model_oracle)
from boxel.synthetic import family_kb

from kbgen import random_kb

A, B, C, D = (Atomic(x) for x in "ABCD")


def test_family_is_already_normal():
    nkb = normalize(family_kb())
    assert nkb.fresh_count == 0
    assert len(nkb.axioms) == 16
    assert NF2(Atomic("Male"), Atomic("Parent"), Atomic("Father")) in nkb.axioms
    assert NF2(Atomic("Female"), Atomic("Male"), Bottom()) in nkb.axioms
    assert NF4("hasChild", Atomic("Person"), Atomic("Parent")) in nkb.axioms
    assert NF3(Atomic("Parent"), "hasChild", Atomic("Person")) in nkb.axioms


def test_existential_of_conjunction():
    nkb = normalize(parse_kb("subclass(C, some(r, and(A, B)))"))
    (x,) = nkb.fresh_names
    assert x.startswith(FRESH_PREFIX)
    X = Atomic(x)
    assert set(nkb.axioms) == {NF3(C, "r", X), NF1(X, A), NF1(X, B)}
    assert nkb.provenance[x] == And(A, B)


def test_bottom_on_left_is_dropped():
    kb = parse_kb("subclass(bottom, D)\nsubclass(A, B)")
    assert len(normalize(kb).axioms) == len(kb.axioms) - 1


def test_complex_both_sides_goes_through_fresh_name():
    nkb = normalize(parse_kb("subclass(some(r, A), and(B, some(s, C)))"))
    assert all(is_normal(ax) for ax in nkb.axioms)
    assert any(isinstance(ax, NF4) for ax in nkb.axioms)
    assert NF3(A, "s", C) not in nkb.axioms


def test_complex_filler_on_left():
    nkb = normalize(parse_kb("subclass(some(r, and(A, B)), D)"))
    (x,) = nkb.fresh_names
    assert set(nkb.axioms) == {NF2(A, B, Atomic(x)), NF4("r", Atomic(x), D)}


def test_complex_concept_assertion():
    nkb = normalize(parse_kb("instance(and(A, some(r, B)), a)"))
    assert any(isinstance(ax, AssertConcept) and ax.c.name in nkb.fresh_names for ax in nkb.axioms)
    assert all(is_normal(ax) for ax in nkb.axioms)


def test_existential_bottom_on_right_becomes_bottom():
    nkb = normalize(parse_kb("subclass(A, some(r, bottom))"))
    assert nkb.axioms == (NF1(A, Bottom()),)


def test_existential_left_bottom_right():
    nkb = normalize(parse_kb("subclass(some(r, A), bottom)"))
    (y,) = nkb.fresh_names
    assert set(nkb.axioms) == {NF4("r", A, Atomic(y)), NF1(Atomic(y), Bottom())}


def test_inconsistent_nominal_surfaces():
    with pytest.raises(InconsistentAxiom):
        normalize(parse_kb("subclass(nominal(a), bottom)"))
    with pytest.raises(InconsistentAxiom):
        normalize(parse_kb("subclass(nominal(a), and(A, bottom))"))


def test_idempotent_on_normal_kb():
    kb = parse_kb("subclass(A, B)\nsubclass(and(A, B), C)\nsubclass(A, some(r, B))\n"
                  "subclass(some(r, A), B)\ninstance(A, a)\nrelation(r, a, b)\n")
    once = normalize(kb)
    assert once.fresh_count == 0
    twice = normalize(parse_kb(serialize_nkb(once).replace("nf1(", "subclass(")
                               .replace("assert_c(", "instance(").replace("assert_r(", "relation(")
                               .replace("nf2(A, B, C)", "subclass(and(A, B), C)")
                               .replace("nf3(A, r, B)", "subclass(A, some(r, B))")
                               .replace("nf4(r, A, B)", "subclass(some(r, A), B)")))
    assert set(twice.axioms) == set(once.axioms) and twice.fresh_count == 0


def test_nkb_text_round_trip():
    nkb = normalize(parse_kb("subclass(C, some(r, and(A, some(s, nominal(a)))))\ninstance(A, b)"))
    text = serialize_nkb(nkb)
    assert "# fresh __nf0 := " in text and text.startswith("# individuals: a b\n")
    back = parse_nkb(text)
    assert back.axioms == nkb.axioms and back.symbols == nkb.symbols


def test_abox_to_tbox():
    kb = parse_kb("relation(r, a, b)\ninstance(C, a)\nsubclass(C, D)")
    out = abox_to_tbox(kb)
    assert out.abox == ()
    assert out.tbox == (ConceptInclusion(Nominal("a"), Some("r", Nominal("b"))),
                        ConceptInclusion(Nominal("a"), C), ConceptInclusion(C, D))
    assert len(out.tbox) == len(kb.tbox) + len(kb.abox)
    plain = parse_kb("subclass(C, D)")
    assert abox_to_tbox(plain) == plain


def test_oracle_examples():
    assert not small_model_oracle(parse_kb("subclass(A, B)\nsubclass(B, bottom)\ninstance(A, a)"), 2)
    assert small_model_oracle(parse_kb("subclass(A, B)"), 1)
    assert not small_model_oracle(parse_kb("subclass(top, some(r, bottom))"), 3)
    # a role edge into A forces A to be non-empty
    kb = parse_kb("subclass(top, some(r, A))\nsubclass(A, bottom)")
    assert not small_model_oracle(kb, 2)


def test_oracle_bounds():
    with pytest.raises(TooLarge):
        small_model_oracle(parse_kb("subclass(A, and(B, and(C, and(D, E))))"), 2)
    with pytest.raises(TooLarge):
        small_model_oracle(parse_kb("instance(A, a)\ninstance(A, b)"), 1)
    with pytest.raises(TooLarge):
        small_model_oracle(parse_kb("subclass(A, B)"), 4)


def test_fuzz_shapes_and_linearity():
    rng = np.random.default_rng(7)
    for _ in range(200):
        kb = random_kb(rng, int(rng.integers(1, 6)), depth=4)
        try:
            nkb = normalize(kb)
        except InconsistentAxiom:
            continue
        assert all(is_normal(ax) for ax in nkb.axioms)
        size = sum(len(list(subexpressions(e))) for ax in kb.axioms
                   for e in ((ax.sub, ax.sup) if isinstance(ax, ConceptInclusion)
                             else (ax.concept,) if isinstance(ax, ConceptAssertion) else ()))
        assert nkb.fresh_count <= size
        assert not set(nkb.fresh_names) & set(kb.symbols.concepts)


def test_oracle_agreement_sample():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 30:
        kb = random_kb(rng, int(rng.integers(1, 4)), depth=2, concepts=("A", "B"),
                       roles=("r",), individuals=("a",))
        try:
            nkb = normalize(kb)
        except InconsistentAxiom:
            assert not small_model_oracle(kb, 2)
            continue
        assert small_model_oracle(kb, 2) == small_model_oracle(nkb, 2)
        checked += 1
