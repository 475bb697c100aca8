"""Full model graph: encoder -> (alignment, semantic embedding) -> fusion -> head."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .config import RunConfig
from .data import TaskExample
from .embedder import EmbedderParams, embed_frames, embed_frames_batch, init_embedder
from .encoder import EncoderConfig, EncoderParams, encode, init_encoder
from .errors import SemfuseError
from .fusion import FusionParams, fuse, fuse_subword_ablation, init_fusion, subwords_to_words
from .heads import HeadParams, classify, init_head, span_logits
from .numcore import Tensor, cross_entropy, make_rng, mse_loss
from .srl import LabelVocab, select_frames
from .tokenizer import EncodedInput, Vocab, encode_pair, tokenize

CHECKPOINT_FORMAT = "semfuse-checkpoint"
CHECKPOINT_VERSION = 1


def load_vocabs(cfg: RunConfig) -> tuple[Vocab, LabelVocab]:
    fixtures = resources.files("semfuse") / "fixtures"
    vocab = Vocab.from_file(cfg.vocab_path or fixtures / "vocab.txt")
    labels = LabelVocab.from_file(cfg.label_vocab_path or fixtures / "labels.txt")
    return vocab, labels


@dataclass
class Features:
    """One example prepared for the model.

    ``groups`` covers the word-level sequence [CLS] words_a [SEP] (words_b
    [SEP]); each special token is its own one-piece group labeled O.
    """

    id: str
    encoded: EncodedInput
    groups: list[tuple[int, int]]
    frames: np.ndarray  # [m, len(groups)]
    target: object
    passage: np.ndarray | None = None  # bool over groups: may start/end an answer
    passage_offset: int = 0
    passage_words: list[str] | None = None
    gold_texts: list[str] | None = None


def featurize(ex: TaskExample, cfg: RunConfig, vocab: Vocab, labels: LabelVocab) -> Features:
    sent_a = tokenize(ex.words_a, vocab, cfg.lowercase)
    sent_b = tokenize(ex.words_b, vocab, cfg.lowercase) if ex.words_b is not None else None
    enc = encode_pair(sent_a, sent_b, cfg.max_len, vocab)
    o = labels.outside_id
    n_a = len(enc.spans_a)
    frames_a = np.array([f.labels[:n_a] for f in select_frames(ex.srl_a, cfg.m, len(ex.words_a), labels)])
    groups = [(0, 1)] + enc.spans_a + [(enc.sep_positions[0], 1)]
    cols = [np.full((cfg.m, 1), o), frames_a, np.full((cfg.m, 1), o)]
    passage = None
    offset = 0
    n_b = 0
    if sent_b is not None:
        n_b = len(enc.spans_b)
        frames_b = np.array([f.labels[:n_b] for f in select_frames(ex.srl_b, cfg.m, len(ex.words_b), labels)])
        offset = len(groups)
        groups += enc.spans_b + [(enc.sep_positions[1], 1)]
        cols += [frames_b, np.full((cfg.m, 1), o)]
    frames = np.concatenate(cols, axis=1).astype(np.int64)

    target = ex.target
    gold = None
    if cfg.task_kind == "span":
        passage = np.zeros(len(groups), dtype=bool)
        passage[offset : offset + n_b] = True
        kept = [(s, e) for s, e in ex.target if e < n_b]
        target = (offset + kept[0][0], offset + kept[0][1]) if kept else (0, 0)
        gold = ex.answer_texts()
    return Features(ex.id, enc, groups, frames, target, passage, offset, ex.words_b, gold)


class SemBertModel:
    """Parameters and forward pass for one fusion mode and task head."""

    def __init__(self, cfg: RunConfig, vocab_size: int, n_labels: int, outside_id: int):
        self.cfg = cfg
        self.outside_id = outside_id
        rng = make_rng(cfg.seed)
        self.encoder_cfg = EncoderConfig(
            vocab_size, cfg.d_enc, cfg.n_layers, cfg.n_heads, cfg.d_ff, cfg.max_positions
        )
        self.encoder: EncoderParams = init_encoder(rng, self.encoder_cfg)
        self.embedder: EmbedderParams = init_embedder(rng, n_labels, cfg.m, cfg.d_srl, cfg.gru_hidden, cfg.d)
        self.fusion: FusionParams = init_fusion(rng, cfg.d_enc, cfg.word_width, cfg.kernel_size)
        outputs = {"classification": cfg.num_classes, "regression": 1, "span": 2}[cfg.task_kind]
        self.head: HeadParams = init_head(rng, self.rep_width, outputs)

    @property
    def rep_width(self) -> int:
        cfg = self.cfg
        if cfg.fusion_mode == "sembert":
            return cfg.word_width + cfg.d
        if cfg.fusion_mode == "baseline":
            return cfg.word_width
        return cfg.d_enc + cfg.m * cfg.d_srl

    def parameters(self) -> list[Tensor]:
        """Tensors that take part in the graph for the configured fusion mode."""
        mode = self.cfg.fusion_mode
        params = self.encoder.tensors()
        if mode == "sembert":
            params += self.embedder.tensors() + self.fusion.tensors()
        elif mode == "baseline":
            params += self.fusion.tensors()
        else:
            params.append(self.embedder.label_table)
        return params + self.head.tensors()

    def all_tensors(self) -> list[Tensor]:
        return self.encoder.tensors() + self.embedder.tensors() + self.fusion.tensors() + self.head.tensors()

    # forward ---------------------------------------------------------------
    def encode_batch(self, batch: list[Features]) -> list[Tensor]:
        lengths = [f.encoded.length for f in batch]
        width = max(lengths)
        ids = np.array([f.encoded.ids[:width] for f in batch])
        segs = np.array([f.encoded.segment_ids[:width] for f in batch])
        mask = np.array([f.encoded.attention_mask[:width] for f in batch])
        out = encode(ids, segs, mask, self.encoder, self.encoder_cfg)
        return [out[b, :n] for b, n in enumerate(lengths)]

    def representation(self, feats: Features, enc: Tensor) -> Tensor:
        """Word-level (or, for the subword ablation, subword-level) rows fed to the head."""
        mode = self.cfg.fusion_mode
        if mode == "subword_ablation":
            return fuse_subword_ablation(enc, feats.frames, feats.groups, self.embedder.label_table, self.outside_id)
        e_w = subwords_to_words(enc, feats.groups, self.fusion)
        if mode == "baseline":
            return fuse(e_w, None)
        return fuse(e_w, embed_frames(feats.frames, self.embedder))

    def head_output(self, feats: Features, rep: Tensor):
        if self.cfg.task_kind != "span":
            return classify(rep, self.head)
        if self.cfg.fusion_mode == "subword_ablation":
            # word-level logits read off each group's first subword
            rep = rep[np.array([s for s, _ in feats.groups])]
        return span_logits(rep, self.head)

    def forward(self, batch: list[Features]) -> list:
        encs = self.encode_batch(batch)
        if self.cfg.fusion_mode == "sembert":
            e_ts = embed_frames_batch([f.frames for f in batch], self.embedder)
            reps = [fuse(subwords_to_words(e, f.groups, self.fusion), e_t) for f, e, e_t in zip(batch, encs, e_ts)]
        else:
            reps = [self.representation(f, e) for f, e in zip(batch, encs)]
        return [self.head_output(f, r) for f, r in zip(batch, reps)]

    def example_loss(self, feats: Features, out) -> Tensor:
        kind = self.cfg.task_kind
        if kind == "classification":
            return cross_entropy(out, [feats.target])
        if kind == "regression":
            return mse_loss(out, [feats.target])
        keep = feats.passage.copy()
        keep[0] = True
        start, end = out
        s, e = feats.target
        return (cross_entropy(start, [s], keep) + cross_entropy(end, [e], keep)) * 0.5

    def loss(self, batch: list[Features]) -> Tensor:
        outs = self.forward(batch)
        total = None
        for f, out in zip(batch, outs):
            term = self.example_loss(f, out)
            total = term if total is None else total + term
        return total * (1.0 / len(batch))

    # persistence -------------------------------------------------------------
    def state(self) -> dict[str, Tensor]:
        return {t.name: t for t in self.all_tensors()}

    def save(self, path) -> None:
        payload = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": self.cfg.to_dict(),
            "vocab_size": self.encoder_cfg.vocab_size,
            "n_labels": self.embedder.label_table.shape[0],
            "outside_id": self.outside_id,
            "params": {name: {"shape": list(t.shape), "values": t.values} for name, t in self.state().items()},
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SemBertModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != CHECKPOINT_FORMAT or payload.get("version") != CHECKPOINT_VERSION:
            raise SemfuseError(f"{path}: not a {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION} file")
        cfg = RunConfig.from_dict(payload["config"])
        model = cls(cfg, payload["vocab_size"], payload["n_labels"], payload["outside_id"])
        state = model.state()
        for name, entry in payload["params"].items():
            t = state[name]
            values = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
            if values.shape != t.shape:
                raise SemfuseError(f"{path}: parameter {name} has shape {values.shape}, expected {t.shape}")
            t.data[...] = values
        return model
