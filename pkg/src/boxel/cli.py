"""Command-line entry point: ``boxel <command> ...``.

Exit codes: 0 success, 1 invalid input (unreadable file, syntax error, bad
flag value, failed check), 2 runtime failure.
Settings precedence for ``train``: flags, then the config file, then
``BOXEL_SEED`` (seed only), then built-in defaults.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .kb import (Atomic, ConceptInclusion, KBSyntaxError, KnowledgeBase, NameClashError,
                 RoleAssertion, load_kb, validate_kb)
from .model import FormatVersionMismatch, ModelConfig, load_checkpoint, save_checkpoint
from .normalize import InconsistentAxiom, abox_to_tbox, normalize, serialize_nkb
from .trainer import TrainConfig, configs_from_dict, load_config, train
from .viz import NotTwoDimensional, render_svg


class UsageError(Exception):
    """Bad input: reported and mapped to exit code 1."""


# (flag, type, help); the config key is the flag with underscores, defaults come from the config classes
_MODEL_DEFAULTS = ModelConfig().to_dict()
_TRAIN_DEFAULTS = dataclasses.asdict(TrainConfig())
_TRAIN_FLAGS = [
    ("dim", int, "embedding dimension"),
    ("seed", int, "random seed for initialization, negatives and shuffling"),
    ("relation-mode", str, "role maps: affine or translation"),
    ("entity-mode", str, "individuals as points, or as boxes via nominal inclusions"),
    ("epsilon", float, "side inflation of the modified volume"),
    ("temperature", float, "softplus temperature of the soft volume"),
    ("gamma", float, "margin of the negative role loss"),
    ("phi", float, "weight of the negative subsumption loss"),
    ("reg-weight", float, "weight of the unit-box regularizer"),
    ("epochs", int, "number of epochs"),
    ("batch-size", int, "axioms per step, 0 for full batch"),
    ("learning-rate", float, "Adam step size"),
    ("adam-beta1", float, "Adam first-moment decay"),
    ("adam-beta2", float, "Adam second-moment decay"),
    ("adam-eps", float, "Adam denominator guard"),
    ("checkpoint-every", int, "write the checkpoint every k epochs, 0 for only at the end"),
    ("log-every", int, "write a log record every k epochs"),
    ("early-stop-loss", float, "stop once the total loss drops below this"),
    ("neg-ratio", int, "negatives per positive"),
]


def _default(key: str):
    return _MODEL_DEFAULTS.get(key, _TRAIN_DEFAULTS.get(key))


def _read_kb(path) -> KnowledgeBase:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{path}: no such file")
    try:
        kb = load_kb(p)
    except KBSyntaxError as exc:
        raise UsageError(f"{path}: {exc}") from None
    except NameClashError as exc:
        raise UsageError(f"{path}: {exc}") from None
    diags = validate_kb(kb)
    if diags:
        raise UsageError("\n".join(f"{path}:{d.line or '?'}: {d.kind}: {d.message}" for d in diags))
    return kb


def _read_ckpt(path):
    if not Path(path).is_file():
        raise UsageError(f"{path}: no such file")
    try:
        return load_checkpoint(path)
    except FormatVersionMismatch as exc:
        raise UsageError(str(exc)) from None


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# -- commands ----------------------------------------------------------------

def cmd_normalize(args) -> int:
    nkb = normalize(_read_kb(args.kb))
    _write(args.output, serialize_nkb(nkb))
    return 0


def _train_settings(args) -> tuple[ModelConfig, TrainConfig]:
    d: dict = {}
    if args.config:
        if not Path(args.config).is_file():
            raise UsageError(f"{args.config}: no such file")
        try:
            d.update(load_config(args.config))
        except ValueError as exc:
            raise UsageError(f"{args.config}: {exc}") from None
    if "seed" not in d and args.seed is None and os.environ.get("BOXEL_SEED"):
        d["seed"] = int(os.environ["BOXEL_SEED"])
    for flag, _, _ in _TRAIN_FLAGS:
        key = flag.replace("-", "_")
        v = getattr(args, key)
        if v is not None:
            d[key] = v
    if args.unconstrained:
        d["unconstrained"] = True
    if args.fixed_negatives:
        d["resample_negatives"] = False
    try:
        return configs_from_dict(d)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid settings: {exc}") from None


def cmd_train(args) -> int:
    kb = _read_kb(args.kb)
    mcfg, tcfg = _train_settings(args)
    if mcfg.entity_mode == "box":
        kb = abox_to_tbox(kb)
    try:
        nkb = normalize(kb)
    except InconsistentAxiom as exc:
        raise UsageError(f"{args.kb}: {exc}") from None
    log_path = args.log or f"{args.output}.log.jsonl"
    with open(log_path, "w", encoding="utf-8") as fh:
        model, report = train(nkb, mcfg, tcfg, log=fh, checkpoint_path=args.output)
    save_checkpoint(model, args.output)
    final = report.history[-1] if report.history else None
    print(f"epochs={report.final_epoch} stop={report.stop_reason} wall_s={report.wall_time:.2f}")
    if final is not None:
        print(final)
    return 0


def _known(path, kind: str) -> list:
    if not path:
        return []
    kb = _read_kb(path)
    if kind == "sub":
        return [(a.sub.name, a.sup.name) for a in kb.tbox
                if isinstance(a.sub, Atomic) and isinstance(a.sup, Atomic)]
    return [(a.role, a.head, a.tail) for a in kb.abox if isinstance(a, RoleAssertion)]


def _evaluate(args, kind: str) -> int:
    model = _read_ckpt(args.checkpoint)
    if not Path(args.test).is_file():
        raise UsageError(f"{args.test}: no such file")
    try:
        queries = ev.read_split(args.test)
    except KBSyntaxError as exc:
        raise UsageError(f"{args.test}: {exc}") from None
    want = ConceptInclusion if kind == "sub" else RoleAssertion
    bad = [q for q in queries if not isinstance(q, want)]
    if bad:
        raise UsageError(f"{args.test}:{bad[0].line}: unexpected axiom {bad[0]}")
    filt = _known(args.train, kind) + [ev._as_query(q)[1:] for q in queries]
    res = ev.rank_queries(model, queries, filter_set=filt,
                          vol=getattr(args, "volume", "soft"))
    metrics = res.as_dict()
    if kind == "sub":
        metrics["strict_accuracy"] = ev.accuracy_strict(model, queries)
    title = "subsumption ranking" if kind == "sub" else "link prediction"
    if args.output:
        ev.write_metrics(args.output, metrics, title)
    sys.stdout.write(ev.metrics_report(metrics, title))
    return 0


def cmd_eval_subsumption(args) -> int:
    return _evaluate(args, "sub")


def cmd_eval_links(args) -> int:
    return _evaluate(args, "link")


def cmd_check(args) -> int:
    model = _read_ckpt(args.checkpoint)
    kb = _read_kb(args.kb)
    if model.config.entity_mode == "box":
        kb = abox_to_tbox(kb)
    nkb = normalize(kb)
    if nkb.symbols != model.symbols:
        print(f"error: {args.kb} does not match the symbols of {args.checkpoint}", file=sys.stderr)
        return 2
    report = ev.check_soundness(model, nkb, args.tol)
    _write(args.output, str(report))
    if args.output:
        print(f"satisfied {report.satisfied_fraction:.4f} at tolerance {args.tol:g}")
    return 0 if not report.violations else 1


def cmd_viz(args) -> int:
    model = _read_ckpt(args.checkpoint)
    try:
        svg = render_svg(model, size=args.size)
    except NotTwoDimensional as exc:
        raise UsageError(str(exc)) from None
    _write(args.output, svg)
    return 0


def parse_ratios(text: str) -> tuple[float, float, float]:
    try:
        r = tuple(float(x) for x in text.replace("/", ",").split(","))
    except ValueError:
        raise UsageError(f"ratios must be three numbers, got {text!r}") from None
    if len(r) != 3 or any(x < 0 for x in r) or abs(sum(r) - 1.0) > 1e-9:
        raise UsageError(f"ratios must be three non-negative numbers summing to 1, got {text!r}")
    return r


def split_axioms(axioms: list, ratios, seed: int) -> tuple[list, list, list]:
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(axioms))
    n_train = int(round(ratios[0] * len(axioms)))
    n_valid = int(round(ratios[1] * len(axioms)))
    pick = [axioms[i] for i in order]
    return pick[:n_train], pick[n_train:n_train + n_valid], pick[n_train + n_valid:]


def cmd_split(args) -> int:
    ratios = parse_ratios(args.ratios)
    kb = _read_kb(args.kb)
    if args.links:
        chosen = [a for a in kb.axioms if isinstance(a, RoleAssertion)]
    else:
        chosen = [a for a in kb.axioms if isinstance(a, ConceptInclusion)
                  and isinstance(a.sub, Atomic) and isinstance(a.sup, Atomic)]
    taken = set(chosen)
    rest = [a for a in kb.axioms if a not in taken] if args.keep_rest else []
    parts = split_axioms(chosen, ratios, args.seed)
    prefix = args.output or str(Path(args.kb).with_suffix(""))
    for name, part in zip(("train", "valid", "test"), parts):
        body = (rest if name == "train" else []) + part
        Path(f"{prefix}.{name}").write_text("".join(f"{a}\n" for a in body), encoding="utf-8")
        print(f"{prefix}.{name}: {len(body)} axioms")
    return 0


# -- parser ------------------------------------------------------------------

class _Help(argparse.HelpFormatter):
    def _get_help_string(self, action):
        h = action.help or ""
        if "(default" in h or not action.option_strings or action.default is argparse.SUPPRESS:
            return h
        if action.required:
            return h + " (required)"
        if action.default is None:
            return h + " (default: none)"
        return h + " (default: %(default)s)"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="boxel", description="Box embeddings for EL++ knowledge bases.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def cmd(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_, formatter_class=_Help)
        sp.set_defaults(func=fn)
        return sp

    sp = cmd("normalize", cmd_normalize, "rewrite a KB into normal forms")
    sp.add_argument("kb", help="KB file")
    sp.add_argument("-o", "--output", help="output file (default: stdout)")

    sp = cmd("train", cmd_train, "train an embedding and write a checkpoint")
    sp.add_argument("kb", help="KB file")
    sp.add_argument("-c", "--config", help="flat TOML config file; flags override its values")
    sp.add_argument("-o", "--output", required=True, help="checkpoint path")
    sp.add_argument("--log", help="training log (default: <output>.log.jsonl)")
    for flag, typ, help_ in _TRAIN_FLAGS:
        sp.add_argument(f"--{flag}", type=typ, default=None,
                        help=f"{help_} (default: {_default(flag.replace('-', '_'))})")
    sp.add_argument("--unconstrained", action="store_true",
                    help="let boxes invert so C ⊑ ⊥ can be learned (default: off)")
    sp.add_argument("--fixed-negatives", action="store_true",
                    help="draw negatives once instead of every epoch (default: off)")

    for name, fn, what in (("eval-subsumption", cmd_eval_subsumption, "rank held-out subsumptions"),
                           ("eval-links", cmd_eval_links, "rank held-out role assertions")):
        sp = cmd(name, fn, what)
        sp.add_argument("checkpoint", help="checkpoint file")
        sp.add_argument("test", help="test split file")
        sp.add_argument("--train", help="KB of known-true axioms for filtered metrics")
        sp.add_argument("-o", "--output", help="metrics report path; a JSON record goes to <output>.json")
        if name == "eval-subsumption":
            sp.add_argument("--volume", choices=("soft", "modified"), default="soft",
                            help="volume used in the subsumption score")

    sp = cmd("check", cmd_check, "check every normalized axiom against the embedding")
    sp.add_argument("checkpoint", help="checkpoint file")
    sp.add_argument("kb", help="KB the checkpoint was trained on")
    sp.add_argument("--tol", type=float, default=1e-6, help="per-face tolerance")
    sp.add_argument("-o", "--output", help="report file (default: stdout)")

    sp = cmd("viz", cmd_viz, "draw a 2-dimensional embedding as SVG")
    sp.add_argument("checkpoint", help="checkpoint file")
    sp.add_argument("-o", "--output", help="SVG file (default: stdout)")
    sp.add_argument("--size", type=int, default=480, help="image side in pixels")

    sp = cmd("split", cmd_split, "split subsumptions (or role assertions) into train/valid/test")
    sp.add_argument("kb", help="KB file")
    sp.add_argument("--ratios", default="0.7,0.2,0.1", help="train,valid,test fractions")
    sp.add_argument("--seed", type=int, default=0, help="shuffle seed")
    sp.add_argument("--links", action="store_true", help="split role assertions instead (default: off)")
    sp.add_argument("--keep-rest", action=argparse.BooleanOptionalAction, default=True,
                    help="copy the axioms that are not split into the train file")
    sp.add_argument("-o", "--output", help="output prefix (default: the KB path without suffix)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures: non-finite loss, singular maps, ...
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
