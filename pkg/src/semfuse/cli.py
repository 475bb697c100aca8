"""Command-line entry point: ``semfuse <command> [options]``.

Tables go to stdout as TSV. Runs write JSON logs under
``$SEMFUSE_RUN_DIR`` (default ``./runs``) in a subdirectory named after the
command and a hash of the effective config, so reruns land in the same place.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import fields
from pathlib import Path

from .config import RunConfig, field_types
from .data import load_dataset
from .errors import ConfigError, SemfuseError
from .heads import tune_threshold
from .model import SemBertModel, load_vocabs
from .tokenizer import tokenize
from .train import ablate, format_table, predict, prepare, sweep_m, sweep_noise, train

RUN_DIR_ENV = "SEMFUSE_RUN_DIR"

log = logging.getLogger("semfuse")


def run_root() -> Path:
    return Path(os.environ.get(RUN_DIR_ENV, "runs"))


def run_dir_for(command: str, cfg: RunConfig, name: str | None = None) -> Path:
    if name:
        return run_root() / name
    digest = hashlib.sha1(cfg.to_json().encode("utf-8")).hexdigest()[:10]
    return run_root() / f"{command}-{cfg.fusion_mode}-{cfg.task_kind}-s{cfg.seed}-{digest}"


def _optional(typ):
    def parse(text: str):
        return None if text.lower() == "none" else typ(text)

    parse.__name__ = typ.__name__
    return parse


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with RunConfig keys")
    p.add_argument("--seed", type=int, help="random seed (overrides the config file)")
    group = p.add_argument_group("config overrides")
    types = field_types()
    for f in fields(RunConfig):
        if f.name == "seed":
            continue
        flag = "--" + f.name.replace("_", "-")
        typ = types[f.name]
        if typ is bool:
            group.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        elif "None" in str(f.type):
            group.add_argument(flag, dest=f.name, type=_optional(typ), default=argparse.SUPPRESS)
        else:
            group.add_argument(flag, dest=f.name, type=typ, default=None)


def build_config(args: argparse.Namespace) -> RunConfig:
    raw = {}
    if args.config is not None:
        raw = RunConfig.from_file(args.config).to_dict()
    ns = vars(args)
    for f in fields(RunConfig):
        if f.name not in ns:
            continue
        value = ns[f.name]
        if value is None and "None" not in str(f.type):
            continue
        raw[f.name] = value
    return RunConfig.from_dict(raw)


def _load(path, cfg: RunConfig):
    _, labels = load_vocabs(cfg)
    num_classes = cfg.num_classes if cfg.task_kind == "classification" else None
    return load_dataset(path, cfg.task_kind, labels, num_classes)


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def write_threshold(path, tau: float) -> None:
    # JSON has no infinities; write them as strings
    value = tau if math.isfinite(tau) else ("inf" if tau > 0 else "-inf")
    _write_json(Path(path), {"tau": value})


def read_threshold(path) -> float:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return float(raw["tau"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"{path}: expected an object with a numeric \"tau\"") from None


# commands ----------------------------------------------------------------


def cmd_tokenize(args, cfg: RunConfig, out) -> int:
    vocab, _ = load_vocabs(cfg)
    sent = tokenize(args.text, vocab, cfg.lowercase)
    out.write("word\tpieces\tstart\tlength\n")
    for i, word in enumerate(sent.words):
        start, length = sent.spans[i]
        out.write(f"{word}\t{' '.join(sent.word_pieces(vocab, i))}\t{start}\t{length}\n")
    out.write(f"#subwords\t{' '.join(vocab.token(t) for t in sent.subwords)}\n")
    return 0


def cmd_validate(args, cfg: RunConfig, out) -> int:
    examples = _load(args.data, cfg)
    out.write(f"path\texamples\n{args.data}\t{len(examples)}\n")
    return 0


def cmd_train(args, cfg: RunConfig, out) -> int:
    run_dir = run_dir_for("train", cfg, args.run_name)
    dev = _load(args.dev, cfg) if args.dev else []
    result = train(cfg, _load(args.train, cfg), dev, run_dir)
    out.write(format_table(result.log))
    log.info("run directory: %s", run_dir)
    return 0


def _model_and_feats(args, cfg: RunConfig):
    model = SemBertModel.load(args.checkpoint)
    # data is read with the checkpoint's own schema
    feats = prepare(_load(args.data, model.cfg), model.cfg)
    return model, feats


def cmd_eval(args, cfg: RunConfig, out) -> int:
    model, feats = _model_and_feats(args, cfg)
    tau = read_threshold(args.threshold) if args.threshold else 0.0
    result = predict(model, feats, tau)
    out.write(format_table([{"n": len(feats), **result.metrics}]))
    if args.predictions:
        path = Path(args.predictions)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for row in result.predictions:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    return 0


def cmd_tune(args, cfg: RunConfig, out) -> int:
    model, feats = _model_and_feats(args, cfg)
    if model.cfg.task_kind != "span":
        raise ConfigError("tune-threshold needs a span checkpoint")
    rows = predict(model, feats, -math.inf).predictions
    best = tune_threshold(
        [r["score"] for r in rows], [r["null_score"] for r in rows], [r["pred"] for r in rows], [f.gold_texts for f in feats]
    )
    tuned = predict(model, feats, best.tau)
    write_threshold(args.out, best.tau)
    out.write(format_table([{"tau": best.tau, **tuned.metrics}]))
    return 0


def _sweep(kind):
    def run(args, cfg: RunConfig, out) -> int:
        run_dir = run_dir_for(kind, cfg, args.run_name)
        train_set = _load(args.train, cfg)
        dev_set = _load(args.dev, cfg) if args.dev else []
        if kind == "sweep-m":
            rows = sweep_m(cfg, train_set, dev_set, args.m_values, run_dir)
        elif kind == "sweep-noise":
            rows = sweep_noise(cfg, train_set, dev_set, args.p_values, run_dir)
        else:
            rows = ablate(cfg, train_set, dev_set, run_dir)
        _write_json(run_dir / "table.json", rows)
        out.write(format_table(rows))
        return 0

    return run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semfuse", description="Semantics-aware fusion over a small transformer encoder.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        _add_config_flags(p)
        p.set_defaults(func=fn)
        return p

    p = add("tokenize", cmd_tokenize, "show the wordpiece split of a sentence")
    p.add_argument("text")
    p = add("validate-data", cmd_validate, "check a JSONL dataset and report every bad line")
    p.add_argument("data", type=Path)

    for name, fn, help_text in (
        ("train", cmd_train, "train one model"),
        ("sweep-m", _sweep("sweep-m"), "retrain for several frame counts m"),
        ("sweep-noise", _sweep("sweep-noise"), "retrain with corrupted role labels"),
        ("ablate", _sweep("ablate"), "baseline, subword label concat and full fusion"),
    ):
        p = add(name, fn, help_text)
        p.add_argument("--train", type=Path, required=True)
        p.add_argument("--dev", type=Path)
        p.add_argument("--run-name", help="subdirectory under the run root (default: derived from the config)")
        if name == "sweep-m":
            p.add_argument("--m-values", type=int, nargs="+", default=[1, 2, 3, 4, 5])
        if name == "sweep-noise":
            p.add_argument("--p-values", type=float, nargs="+", default=[0.0, 0.2, 0.4])

    p = add("eval", cmd_eval, "score a checkpoint on a dataset")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--threshold", type=Path, help="JSON file written by tune-threshold")
    p.add_argument("--predictions", type=Path, help="write per-example predictions as JSONL")

    p = add("tune-threshold", cmd_tune, "pick the null-answer threshold on dev data")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
        return args.func(args, cfg, out)
    except SemfuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
