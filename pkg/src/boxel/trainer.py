"""Adam training loop over the assembled loss."""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

import numpy as np

from . import autodiff as ad
from .losses import (LossBreakdown, Negatives, NonFiniteLoss, breakdown, compile_axioms,
                     evaluate, sample_negatives)
from .model import EmbeddingModel, ModelConfig, init_model, save_checkpoint
from .normalize import NormalizedKB

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 0  # axioms per step, 0 = full batch
    learning_rate: float = 5e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0
    log_every: int = 1
    early_stop_loss: float = 0.0
    neg_ratio: int = 1
    resample_negatives: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("adam betas must lie in (0, 1)")
        if self.epochs < 0 or self.batch_size < 0 or self.neg_ratio < 0:
            raise ValueError("epochs, batch_size and neg_ratio must be non-negative")


@dataclass
class TrainReport:
    history: list[LossBreakdown] = field(default_factory=list)
    wall_time: float = 0.0
    final_epoch: int = 0
    stop_reason: str = "epochs"


class Adam:
    """Adam with bias correction over a dict of arrays, updated in place."""

    def __init__(self, lr=5e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def direction(self, grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Advance the moment estimates and return the (negative) update per key."""
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        out = {}
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            out[k] = (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)
        return out

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for k, d in self.direction(grads).items():
            params[k] -= self.lr * d


def loss_and_grad(model: EmbeddingModel, comp, vol: str = "soft"):
    """(LossBreakdown, gradients of the total w.r.t. every trainable parameter)."""
    tracked = {k: ad.Tensor(v, requires_grad=k not in model.frozen)
               for k, v in model.params.items()}
    total, sums = evaluate(model, comp, tracked, vol)
    if isinstance(total, ad.Tensor):
        total.backward()
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data))
             for k, t in tracked.items() if k not in model.frozen}
    return breakdown(total, sums), grads


def _check_finite(bd: LossBreakdown) -> None:
    if math.isfinite(bd.total):
        return
    bad = [k for k, v in bd.as_dict().items() if k != "total" and not math.isfinite(v)]
    raise NonFiniteLoss(f"non-finite loss in {', '.join(bad) or 'total'}")


def _add(a: LossBreakdown, b: LossBreakdown) -> LossBreakdown:
    return LossBreakdown(**{k: getattr(a, k) + getattr(b, k) for k in a.as_dict()})


def train(nkb: NormalizedKB, model_cfg: ModelConfig, train_cfg: TrainConfig = TrainConfig(),
          model: EmbeddingModel | None = None, log: IO[str] | None = None,
          checkpoint_path=None) -> tuple[EmbeddingModel, TrainReport]:
    """Minimize the total loss with Adam; deterministic given both seeds.

    Negatives are redrawn every epoch unless ``resample_negatives`` is off.
    ``log`` receives one JSON record per logged epoch.
    """
    model = init_model(nkb, model_cfg) if model is None else model
    report = TrainReport()
    if train_cfg.epochs == 0:
        report.stop_reason = "zero_epochs"
        return model, report

    rng = np.random.default_rng(train_cfg.seed)
    opt = Adam(train_cfg.learning_rate, train_cfg.adam_beta1, train_cfg.adam_beta2,
               train_cfg.adam_eps)
    axioms = list(nkb.axioms)
    fixed_neg = None
    if not train_cfg.resample_negatives:
        fixed_neg = sample_negatives(nkb, rng, train_cfg.neg_ratio)
    full_comp = None
    start = time.perf_counter()

    for epoch in range(1, train_cfg.epochs + 1):
        t0 = time.perf_counter()
        if train_cfg.batch_size and train_cfg.batch_size < len(axioms):
            order = rng.permutation(len(axioms))
            batches = [[axioms[i] for i in order[s:s + train_cfg.batch_size]]
                       for s in range(0, len(axioms), train_cfg.batch_size)]
        else:
            batches = [axioms]
        epoch_bd = None
        for bi, batch in enumerate(batches):
            if fixed_neg is not None:
                neg = fixed_neg if len(batches) == 1 else _share(fixed_neg, bi, len(batches))
            elif train_cfg.neg_ratio:
                neg = sample_negatives(nkb, rng, train_cfg.neg_ratio, axioms=batch)
            else:
                neg = Negatives()
            if len(batches) == 1 and fixed_neg is not None:
                if full_comp is None:
                    full_comp = compile_axioms(model, batch, neg)
                comp = full_comp
            else:
                comp = compile_axioms(model, batch, neg)
            bd, grads = loss_and_grad(model, comp)
            _check_finite(bd)
            opt.step(model.params, grads)
            epoch_bd = bd if epoch_bd is None else _add(epoch_bd, bd)
        for k, v in model.params.items():
            if not np.all(np.isfinite(v)):
                raise NonFiniteLoss(f"parameter block {k} became non-finite at epoch {epoch}")
        report.history.append(epoch_bd)
        report.final_epoch = epoch
        if log is not None and train_cfg.log_every and epoch % train_cfg.log_every == 0:
            rec = {"epoch": epoch, **epoch_bd.as_dict(),
                   "wall_ms": round((time.perf_counter() - t0) * 1000, 3)}
            log.write(json.dumps(rec) + "\n")
        if checkpoint_path and train_cfg.checkpoint_every and epoch % train_cfg.checkpoint_every == 0:
            save_checkpoint(model, checkpoint_path)
        if epoch_bd.total < train_cfg.early_stop_loss:
            report.stop_reason = "early_stop"
            break
    report.wall_time = time.perf_counter() - start
    return model, report


def _share(neg: Negatives, i: int, n: int) -> Negatives:
    # fixed negatives are dealt round-robin over the minibatches of an epoch
    return Negatives(neg.roles[i::n], neg.subsumptions[i::n])


# -- config files ------------------------------------------------------------

MODEL_KEYS = {"dim", "seed", "relation_mode", "entity_mode", "epsilon", "temperature",
              "gamma", "phi", "reg_weight", "unconstrained"}
TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}


def configs_from_dict(d: dict) -> tuple[ModelConfig, TrainConfig]:
    unknown = set(d) - MODEL_KEYS - TRAIN_KEYS
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    mcfg = ModelConfig.from_dict({k: v for k, v in d.items() if k in MODEL_KEYS})
    tcfg = TrainConfig(**{k: v for k, v in d.items() if k in TRAIN_KEYS})
    return mcfg, tcfg


def load_config(path) -> dict:
    """Read a flat ``key = value`` TOML file."""
    with open(path, "rb") as fh:
        d = tomllib.load(fh)
    nested = [k for k, v in d.items() if isinstance(v, dict)]
    if nested:
        raise ValueError(f"config must be flat; found table(s) {nested}")
    return d


def dump_config(mcfg: ModelConfig, tcfg: TrainConfig) -> str:
    d = {**mcfg.to_dict(), **dataclasses.asdict(tcfg)}
    lines = []
    for k in sorted(d):
        v = d[k]
        if isinstance(v, bool):
            s = "true" if v else "false"
        elif isinstance(v, str):
            s = json.dumps(v)
        else:
            s = repr(v)
        lines.append(f"{k} = {s}")
    return "\n".join(lines) + "\n"


def write_config(path, mcfg: ModelConfig, tcfg: TrainConfig) -> None:
    Path(path).write_text(dump_config(mcfg, tcfg), encoding="utf-8")
