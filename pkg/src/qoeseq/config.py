"""Pipeline configuration: JSON file + command-line overrides."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Any

from .errors import ConfigInvalid, FileMissing

SEED_ENV = "QOESEQ_SEED"
BUNDLED_SPEC = "bundled"


@dataclass
class PipelineConfig:
    # data source: one of data_csv, train_csv + test_csv, synth_spec; default bundled synthetic
    data_csv: str | None = None
    train_csv: str | None = None
    test_csv: str | None = None
    synth_spec: str | None = None
    states: int = 5
    codebook_size: int = 32
    bins: int = 3
    alpha: float = 1.0
    seed: int = 0
    test_fraction: float = 0.2
    reps: int = 100
    warmup: int = 10
    max_iters: int = 300
    tol: float = 1e-6
    out: str = "runs/latest"

    def validate(self) -> "PipelineConfig":
        def need(cond: bool, msg: str):
            if not cond:
                raise ConfigInvalid(msg)

        for f in fields(self):
            v = getattr(self, f.name)
            if f.type in ("int",):
                need(isinstance(v, int) and not isinstance(v, bool), f"{f.name} must be an integer")
            if f.type in ("float",):
                need(isinstance(v, (int, float)) and not isinstance(v, bool), f"{f.name} must be a number")
        need(self.states >= 1, "states must be >= 1")
        need(self.codebook_size >= 1, "codebook_size must be >= 1")
        need(self.bins >= 1, "bins must be >= 1")
        need(self.alpha >= 0, "alpha must be >= 0")
        need(0 <= self.seed < 2 ** 64, "seed must be an unsigned 64-bit integer")
        need(0 < self.test_fraction < 1, "test_fraction must lie in (0, 1)")
        need(self.reps >= 1, "reps must be >= 1")
        need(self.warmup >= 0, "warmup must be >= 0")
        need(self.max_iters >= 1, "max_iters must be >= 1")
        need(self.tol >= 0, "tol must be >= 0")
        sources = [self.data_csv is not None, self.train_csv is not None or self.test_csv is not None,
                   self.synth_spec is not None]
        need(sum(sources) <= 1, "give only one of data_csv, train_csv/test_csv, synth_spec")
        need((self.train_csv is None) == (self.test_csv is None), "train_csv and test_csv go together")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


_PATH_KEYS = ("data_csv", "train_csv", "test_csv", "synth_spec")


def load_config_file(path: str | Path) -> dict:
    """Read a config (or a run manifest, whose ``config`` block is used).

    Relative data paths are resolved against the file's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise FileMissing(str(path))
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigInvalid(f"{path}: expected a JSON object")
    if "config" in doc and "artifacts" in doc:
        doc = doc["config"]
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {unknown}")
    for key in _PATH_KEYS:
        v = doc.get(key)
        if isinstance(v, str) and v != BUNDLED_SPEC and not Path(v).is_absolute():
            doc[key] = str((path.parent / v).resolve())
    return doc


def build_config(file_values: dict | None, overrides: dict[str, Any]) -> PipelineConfig:
    """Merge sources; precedence is flags > config file > $QOESEQ_SEED > defaults."""
    values: dict[str, Any] = {}
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            values["seed"] = int(env_seed)
        except ValueError:
            raise ConfigInvalid(f"{SEED_ENV}={env_seed!r} is not an integer") from None
    values.update(file_values or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    for key in _PATH_KEYS:
        v = values.get(key)
        if isinstance(v, str) and v != BUNDLED_SPEC:
            values[key] = str(Path(v).resolve())
    try:
        cfg = PipelineConfig(**values)
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from None
    return cfg.validate()


def bundled_spec_text() -> str:
    return resources.files("qoeseq").joinpath("data/synthetic_default.json").read_text(encoding="utf-8")
