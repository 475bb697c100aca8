"""Run configuration: flat JSON keys named exactly as the dataclass fields."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .fusion import FUSION_MODES

TASK_KINDS = ("classification", "regression", "span")
MAX_EPOCHS = 1000

# Fine-tuning presets for pre-trained encoders; the default learning rate
# below is for encoders trained from random initialization.
LEARNING_RATE_GRID = (8e-6, 1e-5, 2e-5, 3e-5)
BATCH_SIZE_GRID = (16, 24, 32)


@dataclass
class RunConfig:
    task_kind: str = "classification"
    num_classes: int = 3
    metric: str = "accuracy"
    fusion_mode: str = "sembert"
    m: int = 3
    d_srl: int = 10
    gru_hidden: int = 10
    d: int = 10
    kernel_size: int = 3
    d_w: int | None = None
    d_enc: int = 48
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 96
    max_positions: int = 128
    learning_rate: float = 1e-3
    warmup_fraction: float = 0.1
    weight_decay: float = 0.01
    batch_size: int = 8
    epochs: int = 30
    stop_at_train_metric: float | None = None
    max_len: int = 128
    max_span_len: int = 30
    lowercase: bool = True
    seed: int = 0
    vocab_path: str | None = None
    label_vocab_path: str | None = None

    def __post_init__(self):
        self.validate()

    @property
    def word_width(self) -> int:
        return self.d_enc if self.d_w is None else self.d_w

    def validate(self) -> None:
        problems = []
        if self.task_kind not in TASK_KINDS:
            problems.append(f"task_kind must be one of {TASK_KINDS}")
        if self.fusion_mode not in FUSION_MODES:
            problems.append(f"fusion_mode must be one of {FUSION_MODES}")
        if not self.learning_rate > 0:
            problems.append("learning_rate must be positive")
        if not 1 <= self.epochs <= MAX_EPOCHS:
            problems.append(f"epochs must lie in [1, {MAX_EPOCHS}]")
        if self.m < 1:
            problems.append("m must be >= 1")
        if self.kernel_size < 1:
            problems.append("kernel_size must be >= 1")
        if self.d_enc % self.n_heads:
            problems.append("d_enc must be divisible by n_heads")
        if self.max_len > self.max_positions:
            problems.append(f"max_len {self.max_len} exceeds max_positions {self.max_positions}")
        if self.max_len < 4:
            problems.append("max_len must be at least 4")
        if not 0.0 <= self.warmup_fraction < 1.0:
            problems.append("warmup_fraction must lie in [0, 1)")
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if self.task_kind == "classification" and self.num_classes < 2:
            problems.append("classification needs num_classes >= 2")
        if problems:
            raise ConfigError("; ".join(problems))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        """Canonical form: every field, sorted keys, two-space indent."""
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        types = field_types()
        for key, value in raw.items():
            want = types[key]
            if value is None and "None" in str(cls.__dataclass_fields__[key].type):
                continue
            ok = isinstance(value, want) and not (want is not bool and isinstance(value, bool))
            if want is float and isinstance(value, int) and not isinstance(value, bool):
                ok = True
            if not ok:
                raise ConfigError(f"config key {key!r} expects {want.__name__}, got {value!r}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(raw)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def field_types() -> dict[str, type]:
    """Scalar type each field is parsed as on the command line."""
    out = {}
    for f in fields(RunConfig):
        text = str(f.type)
        for name, typ in (("bool", bool), ("int", int), ("float", float), ("str", str)):
            if text.startswith(name):
                out[f.name] = typ
                break
    return out
