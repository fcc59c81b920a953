import sys

import numpy as np
import pytest

from boxel.geometry import VolumeConfig
from boxel.kb import SymbolTables
from boxel.model import EmbeddingModel, ModelConfig


def hand_model(concepts=None, points=None, roles=None, dim=2, eps=0.1, temperature=1.0,
               unconstrained=True, relation_mode="affine", **cfg):
    """Model with given boxes {name: (lo, hi)}, points {name: p} and maps
    {name: (scale, offset)}.  Use dyadic numbers where exactness matters:
    the upper corner is stored as lower + side."""
    concepts, points, roles = concepts or {}, points or {}, roles or {}
    sym = SymbolTables(tuple(points), tuple(concepts), tuple(roles))
    f = lambda rows: np.array(rows, dtype=float).reshape(len(rows), dim)  # noqa: E731
    lo = f([c[0] for c in concepts.values()])
    hi = f([c[1] for c in concepts.values()])
    params = {
        "concept_lower": lo,
        "concept_upper_delta": hi - lo,
        "entity_point": f(list(points.values())),
        "role_scale_raw": np.log(f([r[0] for r in roles.values()])),
        "role_offset": f([r[1] for r in roles.values()]),
    }
    mc = ModelConfig(dim=dim, volume=VolumeConfig(eps, temperature), unconstrained=unconstrained,
                     relation_mode=relation_mode, **cfg)
    return EmbeddingModel(sym, mc, params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
