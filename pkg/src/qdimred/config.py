"""Experiment configuration: typed TOML sections with validation.

Grammar is documented in ``docs/config.md``.  Every section is flat; values
are strings, integers, floats, booleans or flat lists of integers.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, get_args, get_origin

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .data import BUILTINS, SCALERS

EXPERIMENT_KINDS = ("table1", "table3", "table4", "fig7", "single-model")
MODEL_KINDS = ("linear", "qae", "bloch_qae", "poly", "pqae", "vqc")
ENCODINGS = ("raw", "pca", "pqae")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentSection:
    kind: str = "single-model"
    dataset: str = "iris"
    variant: str = ""  # fig7 column, e.g. "iris2" / "iris3"


@dataclass
class ModelSection:
    kind: str = "qae"
    scaler: str = "zscore_l2"
    latent: int = 3
    n: int = 2
    m: int = 1
    selection: list[int] = field(default_factory=list)
    extraction: str = "first_column"
    poly_width: int = 3
    post_width: int = 0
    n_q: int = 4
    n_d: int = 4
    batch_size: int = 32
    center: bool = True
    encoder_widths: list[int] = field(default_factory=list)  # PQAE hidden layers
    decoder_widths: list[int] = field(default_factory=list)
    reps: int = 2
    ansatz_reps: int = 3
    entanglement: str = "full"
    encoding: str = "raw"
    digits: list[int] = field(default_factory=lambda: [0, 1])


@dataclass
class TrainingSection:
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    epochs: int = 3000
    optimizer: str = ""  # empty: RMSprop for QAE-family, ADAM otherwise
    lr: float = 1e-3
    batch_size: int = 16
    pqae_epochs: int = 100
    pqae_lr: float = 1e-2
    vqc_epochs: int = 100
    vqc_lr: float = 0.05
    vqc_batch_size: int = 0


@dataclass
class SplitSection:
    fraction: float = 0.3
    seed: int = 0
    stratified: bool = True


@dataclass
class OutputSection:
    dir: str = "runs"


@dataclass
class ExperimentConfig:
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    model: ModelSection = field(default_factory=ModelSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    split: SplitSection = field(default_factory=SplitSection)
    output: OutputSection = field(default_factory=OutputSection)

    def validate(self) -> "ExperimentConfig":
        e, m, t, s = self.experiment, self.model, self.training, self.split
        _choice("experiment.kind", e.kind, EXPERIMENT_KINDS)
        _choice("experiment.dataset", e.dataset, BUILTINS)
        _choice("model.kind", m.kind, MODEL_KINDS)
        _choice("model.scaler", m.scaler, SCALERS)
        _choice("model.extraction", m.extraction, ("first_column", "row_average"))
        _choice("model.entanglement", m.entanglement, ("full", "linear"))
        _choice("model.encoding", m.encoding, ENCODINGS)
        if t.optimizer:
            _choice("training.optimizer", t.optimizer, ("adam", "rmsprop"))
        if not t.seeds:
            raise ConfigError("training.seeds must not be empty")
        for name in ("latent", "n", "m", "n_q", "n_d", "batch_size", "reps"):
            if getattr(m, name) < 1:
                raise ConfigError(f"model.{name} must be >= 1")
        if m.ansatz_reps < 0:
            raise ConfigError("model.ansatz_reps must be >= 0")
        if m.n < 2:
            raise ConfigError("model.n must be >= 2")
        if m.selection and (len(set(m.selection)) != len(m.selection)
                            or min(m.selection) < 0 or max(m.selection) >= m.n**2 - 1):
            raise ConfigError(f"model.selection must hold distinct indices in [0, {m.n**2 - 1})")
        uses_pqae = m.kind == "pqae" or e.kind == "table1" or m.encoding == "pqae"
        if uses_pqae:
            if m.n_d > m.batch_size:
                raise ConfigError(f"n_d={m.n_d} > M={m.batch_size}: KPCA cannot keep more components than batch samples")
            if m.n_q > m.n_d:
                raise ConfigError(f"n_q={m.n_q} > n_d={m.n_d}: PQAE requires n_q <= n_d")
        if any(w < 1 for w in m.encoder_widths + m.decoder_widths):
            raise ConfigError("model.encoder_widths and model.decoder_widths must be >= 1")
        if m.poly_width not in (2, 3):
            raise ConfigError("model.poly_width must be 2 or 3")
        if len(m.digits) != 2 or m.digits[0] == m.digits[1]:
            raise ConfigError("model.digits must name two distinct digits")
        if not 0 < s.fraction < 1:
            raise ConfigError("split.fraction must lie in (0, 1)")
        for name in ("epochs", "pqae_epochs", "vqc_epochs"):
            if getattr(t, name) < 1:
                raise ConfigError(f"training.{name} must be >= 1")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **sections) -> "ExperimentConfig":
        """Copy with per-section overrides, e.g. ``replace(model={"kind": "poly"})``."""
        d = self.to_dict()
        for sec, vals in sections.items():
            d[sec].update(vals)
        return config_from_dict(d)


def _choice(name, value, allowed):
    if value not in allowed:
        raise ConfigError(f"{name}={value!r} is not one of {', '.join(allowed)}")


def _coerce(section: str, f: dataclasses.Field, value: Any):
    name = f"{section}.{f.name}"
    typ = f.type if not isinstance(f.type, str) else eval(f.type)
    if get_origin(typ) is list:
        (inner,) = get_args(typ)
        if not isinstance(value, list) or not all(isinstance(v, inner) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{name} must be a list of {inner.__name__}")
        return list(value)
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer")
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{name} must be a string")
    return value


def config_from_dict(d: dict) -> ExperimentConfig:
    sections = {}
    for top in fields(ExperimentConfig):
        cls = top.default_factory().__class__
        raw = d.get(top.name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"[{top.name}] must be a table")
        known = {f.name: f for f in fields(cls)}
        unknown = set(raw) - set(known)
        if unknown:
            raise ConfigError(f"unknown key(s) in [{top.name}]: {', '.join(sorted(unknown))}")
        sections[top.name] = cls(**{k: _coerce(top.name, known[k], v) for k, v in raw.items()})
    unknown = set(d) - {f.name for f in fields(ExperimentConfig)}
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    return ExperimentConfig(**sections).validate()


def load_config(path) -> ExperimentConfig:
    """Load a TOML config, or the ``config`` echoed inside a JSON report."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if path.suffix == ".json":
        import json

        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return config_from_dict(doc.get("config", doc))
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(doc)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return '"' + str(v).replace("\\", "\\\\").replace('"', '\\"') + '"'


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for sec, vals in cfg.to_dict().items():
        lines.append(f"[{sec}]")
        lines += [f"{k} = {_toml_value(v)}" for k, v in vals.items()]
        lines.append("")
    return "\n".join(lines)
