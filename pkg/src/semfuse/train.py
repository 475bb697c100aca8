"""Training loop, evaluation and the experiment harnesses built on them."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import RunConfig
from .data import TaskExample
from .errors import DegenerateInputError, DivergenceError, PreconditionError
from .heads import decode_span
from .metrics import metric, squad_em_f1
from .model import Features, SemBertModel, featurize, load_vocabs
from .numcore import Adam, make_rng, no_grad, warmup_linear
from .srl import LabelVocab, SrlAnnotation, inject_noise

log = logging.getLogger(__name__)

EVAL_BATCH = 32


@dataclass
class EvalResult:
    metrics: dict[str, float]
    predictions: list[dict] = field(default_factory=list)

    @property
    def primary(self) -> float:
        return self.metrics["primary"]


@dataclass
class TrainResult:
    model: SemBertModel
    log: list[dict]
    best_dev: float
    best_epoch: int
    checkpoint: Path | None = None

    def log_json(self) -> str:
        return json.dumps(self.log, sort_keys=True)


def _batches(items: Sequence, size: int):
    for i in range(0, len(items), size):
        yield items[i : i + size]


def predict(model: SemBertModel, feats: list[Features], tau: float = 0.0) -> EvalResult:
    """Run the model without gradients and score it against the features' targets."""
    cfg = model.cfg
    outputs = []
    with no_grad():
        for chunk in _batches(feats, EVAL_BATCH):
            outputs += model.forward(chunk)
    if cfg.task_kind == "classification":
        preds = [int(np.argmax(o.data)) for o in outputs]
        golds = [f.target for f in feats]
        value = metric(preds, golds, cfg.metric)
        rows = [{"id": f.id, "pred": p, "gold": g} for f, p, g in zip(feats, preds, golds)]
        return EvalResult({"primary": value, cfg.metric: value}, rows)
    if cfg.task_kind == "regression":
        preds = [float(o.data[0]) for o in outputs]
        golds = [f.target for f in feats]
        try:
            value = metric(preds, golds, "pearson")
        except DegenerateInputError:
            value = 0.0
        rows = [{"id": f.id, "pred": p, "gold": g} for f, p, g in zip(feats, preds, golds)]
        return EvalResult({"primary": value, "pearson": value}, rows)

    rows, ems, f1s = [], [], []
    for f, (start, end) in zip(feats, outputs):
        pred = decode_span(start.data, end.data, tau, cfg.max_span_len, f.passage)
        text = " ".join(f.passage_words[pred.best_start - f.passage_offset : pred.best_end - f.passage_offset + 1])
        em, f1 = squad_em_f1(None if pred.is_null else text, f.gold_texts)
        ems.append(em)
        f1s.append(f1)
        rows.append({"id": f.id, "pred": text, "score": pred.score, "null_score": pred.null_score})
    f1 = float(np.mean(f1s)) if f1s else 0.0
    return EvalResult({"primary": f1, "f1": f1, "em": float(np.mean(ems)) if ems else 0.0}, rows)


def prepare(examples: Sequence[TaskExample], cfg: RunConfig, vocab=None, labels=None) -> list[Features]:
    if vocab is None or labels is None:
        vocab, labels = load_vocabs(cfg)
    return [featurize(ex, cfg, vocab, labels) for ex in examples]


def _fmt(x: float) -> float:
    return float(x)


def train(
    cfg: RunConfig,
    train_set: Sequence[TaskExample],
    dev_set: Sequence[TaskExample] = (),
    run_dir: str | Path | None = None,
) -> TrainResult:
    """Fit a fresh model; deterministic for a given config (seed included).

    Uses Adam with linear warm-up then linear decay to zero over the planned
    number of steps. Stops early once the train metric reaches
    ``cfg.stop_at_train_metric``. With ``run_dir`` set, writes ``log.json``,
    ``config.json`` and the best-dev ``checkpoint.json`` there.
    """
    if not train_set:
        raise PreconditionError("training set is empty")
    vocab, labels = load_vocabs(cfg)
    train_feats = prepare(train_set, cfg, vocab, labels)
    dev_feats = prepare(dev_set, cfg, vocab, labels)
    model = SemBertModel(cfg, len(vocab), len(labels), labels.outside_id)
    params = model.parameters()
    opt = Adam(params, lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    order_rng = make_rng(cfg.seed + 1)
    steps_per_epoch = math.ceil(len(train_feats) / cfg.batch_size)
    total_steps = steps_per_epoch * cfg.epochs
    run_dir = Path(run_dir) if run_dir is not None else None
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "config.json").write_text(cfg.to_json(), encoding="utf-8")

    history: list[dict] = []
    best, best_epoch, step = -math.inf, 0, 0
    for epoch in range(1, cfg.epochs + 1):
        order = order_rng.permutation(len(train_feats))
        losses = []
        for idx in _batches(order, cfg.batch_size):
            opt.zero_grad()
            loss = model.loss([train_feats[i] for i in idx])
            value = loss.item()
            if not math.isfinite(value):
                raise DivergenceError(f"loss became {value} at epoch {epoch}, step {step} (lr={opt.lr})")
            loss.backward()
            opt.step(cfg.learning_rate * warmup_linear(step, total_steps, cfg.warmup_fraction))
            losses.append(value)
            step += 1
        train_eval = predict(model, train_feats)
        entry = {"epoch": epoch, "train_loss": _fmt(np.mean(losses)), "train_metric": _fmt(train_eval.primary)}
        if dev_feats:
            dev_eval = predict(model, dev_feats)
            entry["dev_metric"] = _fmt(dev_eval.primary)
            score = dev_eval.primary
        else:
            score = train_eval.primary
        history.append(entry)
        log.info("epoch %d %s", epoch, entry)
        if score > best:
            best, best_epoch = score, epoch
            if run_dir is not None:
                model.save(run_dir / "checkpoint.json")
        if cfg.stop_at_train_metric is not None and train_eval.primary >= cfg.stop_at_train_metric:
            break
    result = TrainResult(model, history, best, best_epoch)
    if run_dir is not None:
        (run_dir / "log.json").write_text(json.dumps(history, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        result.checkpoint = run_dir / "checkpoint.json"
    return result


def evaluate(model: SemBertModel, examples: Sequence[TaskExample], tau: float = 0.0) -> EvalResult:
    return predict(model, prepare(examples, model.cfg), tau)


# ---------------------------------------------------------------------------
# harnesses
# ---------------------------------------------------------------------------


def _dev_row(result: TrainResult) -> dict:
    last = result.log[-1]
    return {
        "best_dev": result.best_dev,
        "best_epoch": result.best_epoch,
        "final_train": last["train_metric"],
        "epochs_run": len(result.log),
    }


def sweep_m(cfg: RunConfig, train_set, dev_set, m_values: Sequence[int] = (1, 2, 3, 4, 5), run_dir=None) -> list[dict]:
    """Train once per maximum frame count ``m`` with everything else fixed."""
    rows = []
    for m in m_values:
        if m < 1:
            raise ValueError(f"m must be >= 1, got {m}")
        sub = Path(run_dir) / f"m{m}" if run_dir is not None else None
        result = train(cfg.replace(m=m), train_set, dev_set, sub)
        rows.append({"m": m, "W2_shape": list(result.model.embedder.W.shape), **_dev_row(result)})
    return rows


def noisy_copy(examples: Sequence[TaskExample], p: float, rng, labels: LabelVocab) -> list[TaskExample]:
    out = []
    for ex in examples:
        srl_b = inject_noise(ex.srl_b, p, rng, labels) if ex.srl_b is not None else None
        out.append(
            TaskExample(ex.id, ex.words_a, inject_noise(ex.srl_a, p, rng, labels), ex.target, ex.words_b, srl_b)
        )
    return out


def sweep_noise(cfg: RunConfig, train_set, dev_set, p_values: Sequence[float] = (0.0, 0.2, 0.4), run_dir=None) -> list[dict]:
    """Corrupt a fraction ``p`` of train and dev labels, retrain, report."""
    _, labels = load_vocabs(cfg)
    rows = []
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"noise fraction {p} outside [0, 1]")
        rng = make_rng(cfg.seed + 7919)
        noisy_train = noisy_copy(train_set, p, rng, labels)
        noisy_dev = noisy_copy(dev_set, p, rng, labels)
        sub = Path(run_dir) / f"p{p:g}" if run_dir is not None else None
        result = train(cfg, noisy_train, noisy_dev, sub)
        rows.append({"p": p, **_dev_row(result)})
    return rows


ABLATION_ROWS = (("baseline", "baseline"), ("subword_srl_concat", "subword_ablation"), ("sembert", "sembert"))


def ablate(cfg: RunConfig, train_set, dev_set, run_dir=None) -> list[dict]:
    """Baseline, subword-level label concatenation and full fusion under one budget."""
    rows = []
    for name, mode in ABLATION_ROWS:
        sub = Path(run_dir) / name if run_dir is not None else None
        result = train(cfg.replace(fusion_mode=mode), train_set, dev_set, sub)
        rows.append({"model": name, "fusion_mode": mode, **_dev_row(result)})
    return rows


def format_table(rows: list[dict]) -> str:
    """TSV with a header line; floats printed with 4 decimals."""
    if not rows:
        return ""
    keys = list(rows[0])

    def cell(v):
        if isinstance(v, float):
            return f"{v:.4f}"
        if isinstance(v, list):
            return "x".join(str(x) for x in v)
        return str(v)

    lines = ["\t".join(keys)] + ["\t".join(cell(r[k]) for k in keys) for r in rows]
    return "\n".join(lines) + "\n"


def noisy_annotation_fraction(original: SrlAnnotation, noisy: SrlAnnotation) -> float:
    total = changed = 0
    for a, b in zip(original.frames, noisy.frames):
        total += len(a.labels)
        changed += sum(x != y for x, y in zip(a.labels, b.labels))
    return changed / total if total else 0.0
