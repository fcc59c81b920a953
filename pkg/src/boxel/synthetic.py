"""Small knowledge bases for demos and regression tests."""
from __future__ import annotations

import numpy as np

from .kb import (And, Atomic, Bottom, ConceptAssertion, ConceptInclusion, KnowledgeBase,
                 RoleAssertion, Some, parse_kb)

FAMILY_KB = """\
# family domain: 12 terminological axioms, 4 concept assertions
subclass(Male, Person)
subclass(Female, Person)
subclass(Father, Male)
subclass(Mother, Female)
subclass(Father, Parent)
subclass(Mother, Parent)
subclass(and(Female, Male), bottom)
subclass(and(Female, Parent), Mother)
subclass(and(Male, Parent), Father)
subclass(some(hasChild, Person), Parent)
subclass(Parent, Person)
subclass(Parent, some(hasChild, Person))
instance(Father, Alex)
instance(Father, Bob)
instance(Mother, Marie)
instance(Mother, Alice)
"""

FAMILY_SUBSUMPTIONS = (("Male", "Person"), ("Female", "Person"), ("Father", "Male"),
                       ("Mother", "Female"), ("Father", "Parent"), ("Mother", "Parent"))


def family_kb() -> KnowledgeBase:
    return parse_kb(FAMILY_KB)


def _level_sizes(n: int, levels: int) -> list[int]:
    # each level roughly twice as wide as the one above
    w = np.array([2.0 ** k for k in range(levels)])
    sizes = np.maximum(1, np.round(n * w / w.sum())).astype(int)
    sizes[-1] += n - sizes.sum()
    return sizes.tolist()


def hierarchy(n_concepts: int = 50, levels: int = 4, seed: int = 0):
    """Random tree of named concepts: (names, parent of each non-root name)."""
    rng = np.random.default_rng(seed)
    sizes = _level_sizes(n_concepts, levels)
    names, parent, prev = [], {}, []
    for depth, size in enumerate(sizes):
        cur = [f"C{depth}_{i}" for i in range(size)]
        if prev:
            for c in cur:
                parent[c] = prev[rng.integers(len(prev))]
        names += cur
        prev = cur
    return names, parent


def transitive_pairs(names, parent) -> list[tuple[str, str]]:
    out = []
    for c in names:
        p = parent.get(c)
        while p is not None:
            out.append((c, p))
            p = parent.get(p)
    return out


def hierarchy_split(n_concepts: int = 50, levels: int = 4, seed: int = 0,
                    test_fraction: float = 0.1):
    """(training KB, held-out (C, D) pairs) over the transitive closure.

    Direct parent links are always kept for training so every held-out pair
    stays derivable from the training axioms.
    """
    rng = np.random.default_rng(seed)
    names, parent = hierarchy(n_concepts, levels, seed)
    pairs = transitive_pairs(names, parent)
    indirect = [i for i, (c, d) in enumerate(pairs) if parent[c] != d]
    n_test = int(round(test_fraction * len(pairs)))
    test_idx = set(rng.choice(indirect, size=min(n_test, len(indirect)), replace=False).tolist())
    train = [ConceptInclusion(Atomic(c), Atomic(d)) for i, (c, d) in enumerate(pairs) if i not in test_idx]
    test = [pairs[i] for i in sorted(test_idx)]
    return KnowledgeBase.from_axioms(train), test


def link_split(n_cells: int = 6, per_cell: int = 3, n_other: int = 4, seed: int = 0,
               test_fraction: float = 0.2):
    """Link-prediction KB whose role maps a large Domain onto a Range half its size.

    Heads live in cells of Domain, tails in matching cells of Range, and every
    cell is tied to its image by an existential axiom.  Returns the training
    KB and the held-out (role, head, tail) triples.
    """
    rng = np.random.default_rng(seed)
    r = "mapsTo"
    ax = [ConceptInclusion(Atomic("Domain"), Some(r, Atomic("Range")))]
    for x, y in (("Domain", "Range"), ("Domain", "Other"), ("Range", "Other")):
        ax.append(ConceptInclusion(And(Atomic(x), Atomic(y)), Bottom()))
    triples = []
    for i in range(n_cells):
        d, g = Atomic(f"Dom{i}"), Atomic(f"Ran{i}")
        ax += [ConceptInclusion(d, Atomic("Domain")), ConceptInclusion(g, Atomic("Range")),
               ConceptInclusion(d, Some(r, g))]
        for j in range(per_cell):
            h, t = f"h{i}_{j}", f"t{i}_{j}"
            ax += [ConceptAssertion(d, h), ConceptAssertion(g, t)]
            triples.append((r, h, t))
    for k in range(n_other):
        ax.append(ConceptAssertion(Atomic("Other"), f"o{k}"))
    n_test = int(round(test_fraction * len(triples)))
    test_idx = set(rng.choice(len(triples), size=n_test, replace=False).tolist())
    ax += [RoleAssertion(*t) for i, t in enumerate(triples) if i not in test_idx]
    test = [triples[i] for i in sorted(test_idx)]
    return KnowledgeBase.from_axioms(ax), test


__all__ = ["FAMILY_KB", "FAMILY_SUBSUMPTIONS", "family_kb", "hierarchy", "hierarchy_split",
           "link_split", "transitive_pairs"]
