"""Embedding parameters: boxes for concepts, points for individuals, diagonal
affine maps for roles.

Concept boxes are stored as a lower corner plus a side parameter.  By default
the side is ``softplus(delta)`` so boxes can never invert; with
``unconstrained=True`` the side is ``delta`` itself and boxes may become empty,
which the ``C ⊑ ⊥`` loss relies on.  Role scales are ``exp(raw)``.
"""
from __future__ import annotations

import dataclasses
import io
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .geometry import AffineMap, Box, VolumeConfig
from .kb import Atomic, Bottom, Nominal, SymbolTables, Top
from .normalize import NormalizedKB

MAGIC = b"BOXEL1\n"
PARAM_ORDER = ("concept_lower", "concept_upper_delta", "entity_point",
               "role_scale_raw", "role_offset")


class UnknownName(KeyError):
    pass


class FormatVersionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 50
    seed: int = 0
    relation_mode: str = "affine"  # or "translation"
    entity_mode: str = "point"  # or "box"
    volume: VolumeConfig = field(default_factory=VolumeConfig)
    gamma: float = 1.0
    phi: float = 0.05
    reg_weight: float = 1.0
    unconstrained: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.relation_mode not in ("affine", "translation"):
            raise ValueError(f"relation_mode must be affine or translation, not {self.relation_mode!r}")
        if self.entity_mode not in ("point", "box"):
            raise ValueError(f"entity_mode must be point or box, not {self.entity_mode!r}")
        if not 0 < self.phi <= 1:
            raise ValueError("phi must lie in (0, 1]")
        if self.reg_weight < 0:
            raise ValueError("reg_weight must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a non-negative 64-bit integer")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["epsilon"] = self.volume.epsilon
        d["temperature"] = self.volume.temperature
        del d["volume"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        vol = VolumeConfig(d.pop("epsilon", 0.1), d.pop("temperature", 1.0))
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(volume=vol, **{k: v for k, v in d.items() if k in names})


def _inv_softplus(y: np.ndarray) -> np.ndarray:
    return np.log(np.expm1(y))


class EmbeddingModel:
    """Parameter store plus name lookup.

    ``params`` maps the names in ``PARAM_ORDER`` to float64 arrays.  Row order
    follows the symbol tables; in ``box`` entity mode the individuals are
    appended to the concept rows and the point table is empty.
    """

    def __init__(self, symbols: SymbolTables, cfg: ModelConfig, params: dict,
                 fresh: frozenset = frozenset()):
        self.symbols = symbols
        self.config = cfg
        self.params = params
        self.fresh = frozenset(fresh)
        if cfg.entity_mode == "box":
            self.box_names = symbols.concepts + symbols.individuals
            self.point_names: tuple[str, ...] = ()
        else:
            self.box_names = symbols.concepts
            self.point_names = symbols.individuals
        self.box_index = {c: i for i, c in enumerate(self.box_names)}
        self.point_index = {a: i for i, a in enumerate(self.point_names)}
        self.role_index = {r: i for i, r in enumerate(symbols.roles)}

    @property
    def dim(self) -> int:
        return self.config.dim

    @property
    def frozen(self) -> frozenset[str]:
        """Parameters the optimizer must not touch."""
        return frozenset({"role_scale_raw"}) if self.config.relation_mode == "translation" else frozenset()

    def parameter_count(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(self.symbols, self.config,
                              {k: v.copy() for k, v in self.params.items()}, self.fresh)

    # -- differentiable tables ------------------------------------------

    def side(self, delta):
        if self.config.unconstrained:
            return delta
        return ad.softplus(delta, 1.0)

    def box_table(self, params=None):
        """(lower, upper) for every box row, then every point row, then ⊤."""
        p = self.params if params is None else params
        n = self.dim
        lo = p["concept_lower"]
        up = lo + self.side(p["concept_upper_delta"])
        pts = p["entity_point"]
        lower = ad.concat([lo, pts, np.zeros((1, n))], axis=0)
        upper = ad.concat([up, pts, np.ones((1, n))], axis=0)
        return lower, upper

    def role_table(self, params=None):
        p = self.params if params is None else params
        if self.config.relation_mode == "translation":
            scale = np.ones_like(ad.value(p["role_scale_raw"]))
        else:
            scale = ad.exp(p["role_scale_raw"])
        return scale, p["role_offset"]

    def row_of(self, operand) -> int:
        """Row in :meth:`box_table` for a normal operand or a bare name."""
        if isinstance(operand, str):
            if operand in self.box_index:
                return self.box_index[operand]
            if operand in self.point_index:
                return len(self.box_names) + self.point_index[operand]
            raise UnknownName(operand)
        if isinstance(operand, Top):
            return len(self.box_names) + len(self.point_names)
        if isinstance(operand, Atomic):
            if operand.name not in self.box_index or operand.name in self.symbols.individuals:
                raise UnknownName(operand.name)
            return self.box_index[operand.name]
        if isinstance(operand, Nominal):
            a = operand.individual
            if a in self.point_index:
                return len(self.box_names) + self.point_index[a]
            if a in self.box_index and a in self.symbols.individuals:
                return self.box_index[a]
            raise UnknownName(a)
        if isinstance(operand, Bottom):
            raise ValueError("bottom has no box")
        raise TypeError(f"not an operand: {operand!r}")

    def role_row(self, role: str) -> int:
        try:
            return self.role_index[role]
        except KeyError:
            raise UnknownName(role) from None

    # -- plain lookups ----------------------------------------------------

    def materialize_box(self, operand) -> Box:
        """Box of a concept, nominal or ⊤ (the unit box)."""
        row = self.row_of(operand)
        lower, upper = self.box_table()
        return Box(np.array(lower[row]), np.array(upper[row]))

    def materialize_affine(self, role: str) -> AffineMap:
        i = self.role_row(role)
        scale, offset = self.role_table()
        return AffineMap(np.array(scale[i]), np.array(offset[i]))

    def point(self, individual: str) -> np.ndarray:
        """Point of an individual; the box centre in ``box`` entity mode."""
        if individual in self.point_index:
            return self.params["entity_point"][self.point_index[individual]].copy()
        if individual in self.symbols.individuals:
            b = self.materialize_box(Nominal(individual))
            return (b.lower + b.upper) / 2
        raise UnknownName(individual)

    def points(self, individuals) -> np.ndarray:
        if self.config.entity_mode == "point":
            idx = [self.point_index[a] for a in individuals]
            return self.params["entity_point"][idx]
        return np.stack([self.point(a) for a in individuals]) if individuals else np.zeros((0, self.dim))


def init_model(nkb: NormalizedKB, cfg: ModelConfig) -> EmbeddingModel:
    """Random initial embedding, fully determined by ``cfg.seed``."""
    sym = nkb.symbols
    if not (sym.concepts or sym.individuals or sym.roles):
        raise ValueError("cannot embed a KB without symbols")
    n = cfg.dim
    n_box = len(sym.concepts) + (len(sym.individuals) if cfg.entity_mode == "box" else 0)
    n_pts = len(sym.individuals) if cfg.entity_mode == "point" else 0
    n_roles = len(sym.roles)
    rng = np.random.default_rng(cfg.seed)
    lower = rng.uniform(0.0, 1.0, (n_box, n))
    sides = rng.uniform(0.1, 0.5, (n_box, n))
    points = rng.uniform(0.0, 1.0, (n_pts, n))
    offsets = rng.uniform(-0.1, 0.1, (n_roles, n))
    params = {
        "concept_lower": lower,
        "concept_upper_delta": sides if cfg.unconstrained else _inv_softplus(sides),
        "entity_point": points,
        "role_scale_raw": np.zeros((n_roles, n)),
        "role_offset": offsets,
    }
    return EmbeddingModel(sym, cfg, params, nkb.fresh_names)


# -- checkpoints -------------------------------------------------------------

def _manifest(model: EmbeddingModel) -> dict:
    return {
        "boxes": {name: i for i, name in enumerate(model.box_names)},
        "points": {name: i for i, name in enumerate(model.point_names)},
        "roles": {name: i for i, name in enumerate(model.symbols.roles)},
    }


def checkpoint_bytes(model: EmbeddingModel) -> bytes:
    sym = model.symbols
    header = {
        "format": 1,
        "dim": model.dim,
        "counts": {k: list(model.params[k].shape) for k in PARAM_ORDER},
        "config": model.config.to_dict(),
        "symbols": {"individuals": list(sym.individuals), "concepts": list(sym.concepts),
                    "roles": list(sym.roles)},
        "fresh": sorted(model.fresh),
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", len(hbytes)))
    buf.write(hbytes)
    for k in PARAM_ORDER:
        buf.write(np.ascontiguousarray(model.params[k], dtype="<f8").tobytes())
    return buf.getvalue()


def save_checkpoint(model: EmbeddingModel, path) -> None:
    """Write the binary checkpoint and a ``<path>.manifest.json`` sidecar."""
    path = Path(path)
    path.write_bytes(checkpoint_bytes(model))
    with open(str(path) + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(_manifest(model), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> EmbeddingModel:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise FormatVersionMismatch(f"{os.fspath(path)}: not a BOXEL1 checkpoint")
    off = len(MAGIC)
    try:
        (hlen,) = struct.unpack_from("<I", data, off)
        header = json.loads(data[off + 4: off + 4 + hlen].decode("utf-8"))
    except (struct.error, ValueError) as exc:
        raise FormatVersionMismatch(f"{os.fspath(path)}: corrupt header") from exc
    if header.get("format") != 1:
        raise FormatVersionMismatch(f"unsupported checkpoint format {header.get('format')!r}")
    off += 4 + hlen
    params = {}
    for k in PARAM_ORDER:
        shape = tuple(header["counts"][k])
        size = int(np.prod(shape)) * 8
        if off + size > len(data):
            raise FormatVersionMismatch(f"{os.fspath(path)}: truncated parameter block {k}")
        params[k] = np.frombuffer(data, dtype="<f8", count=int(np.prod(shape)), offset=off).reshape(shape).astype(np.float64)
        off += size
    s = header["symbols"]
    sym = SymbolTables(tuple(s["individuals"]), tuple(s["concepts"]), tuple(s["roles"]))
    cfg = ModelConfig.from_dict(header["config"])
    return EmbeddingModel(sym, cfg, params, frozenset(header["fresh"]))
