"""Telemetry ingestion: CSV parsing, standardization, QoE discretization,
session-level splitting and synthetic dataset generation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from ._sampling import CategoricalTable
from .errors import (
    DimensionMismatch,
    DuplicateTimestep,
    EmptyDataset,
    GapInTimesteps,
    InvalidSpec,
    InvalidStateCount,
    MissingColumn,
    NonNumericCell,
    QoEOutOfRange,
    QoeSeqError,
    ScoreOutOfRange,
    TooFewSessions,
)

QOE_MIN = 1.0
QOE_MAX = 100.0
DEFAULT_NUM_STATES = 5


class MissingLabels(QoeSeqError):
    pass


@dataclass(frozen=True)
class FeatureRecord:
    session_id: str
    t: int
    features: tuple[float, ...]
    qoe_score: float | None = None


@dataclass
class SessionSeries:
    """One session: a (T, D) feature array and an optional length-T QoE array.

    Missing QoE cells are stored as NaN.
    """

    session_id: str
    features: np.ndarray
    qoe: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise DimensionMismatch(f"session {self.session_id!r}: features must be a non-empty (T, D) array")
        if not np.all(np.isfinite(self.features)):
            raise NonNumericCell(-1, "features", f"non-finite value in session {self.session_id!r}")
        if self.qoe is not None:
            self.qoe = np.asarray(self.qoe, dtype=np.float64)
            if self.qoe.shape != (len(self),):
                raise DimensionMismatch(f"session {self.session_id!r}: qoe length != T")
            present = self.qoe[~np.isnan(self.qoe)]
            if np.any((present < QOE_MIN) | (present > QOE_MAX)):
                raise QoEOutOfRange(-1, float(present[(present < QOE_MIN) | (present > QOE_MAX)][0]))

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def labeled(self) -> bool:
        return self.qoe is not None and not np.any(np.isnan(self.qoe))

    @property
    def records(self) -> list[FeatureRecord]:
        out = []
        for t, row in enumerate(self.features):
            q = None
            if self.qoe is not None and not math.isnan(self.qoe[t]):
                q = float(self.qoe[t])
            out.append(FeatureRecord(self.session_id, t, tuple(float(v) for v in row), q))
        return out

    def states(self, num_states: int) -> np.ndarray:
        if not self.labeled:
            raise MissingLabels(f"session {self.session_id!r} has no complete QoE labels")
        return discretize_qoe_array(self.qoe, num_states)


@dataclass
class Dataset:
    sessions: list[SessionSeries]
    feature_names: list[str]
    num_states: int = DEFAULT_NUM_STATES

    def __post_init__(self):
        _check_state_count(self.num_states)
        d = len(self.feature_names)
        for s in self.sessions:
            if s.dim != d:
                raise DimensionMismatch(
                    f"session {s.session_id!r} has D={s.dim}, expected {d}")

    @property
    def dim(self) -> int:
        return len(self.feature_names)

    @property
    def num_records(self) -> int:
        return sum(len(s) for s in self.sessions)

    def stacked_features(self) -> np.ndarray:
        if not self.sessions:
            return np.empty((0, self.dim))
        return np.concatenate([s.features for s in self.sessions])

    def iter_records(self) -> Iterator[FeatureRecord]:
        for s in self.sessions:
            yield from s.records

    def subset(self, sessions: Sequence[SessionSeries]) -> "Dataset":
        return Dataset(list(sessions), list(self.feature_names), self.num_states)


@dataclass(frozen=True)
class ColumnSchema:
    """Maps CSV columns onto the dataset layout.

    ``features=None`` takes every column other than the session, time and
    QoE columns, in header order.
    """

    session: str = "session_id"
    t: str = "t"
    features: tuple[str, ...] | None = None
    qoe: str | None = "qoe"


# ---------------------------------------------------------------------------
# CSV


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise NonNumericCell(row, col, cell) from None
    if not math.isfinite(v):
        raise NonNumericCell(row, col, cell)
    return v


def load_csv(path: str | Path, schema: ColumnSchema | None = None,
             num_states: int = DEFAULT_NUM_STATES) -> Dataset:
    """Parse a telemetry CSV into a :class:`Dataset`.

    Rows may appear in any order; they are grouped by session (first
    appearance order) and sorted by ``t``. Row numbers in errors are file
    line numbers, header = 1.
    """
    schema = schema or ColumnSchema()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumn(f"{path}: no header row") from None
        index = {name: i for i, name in enumerate(header)}
        for col in (schema.session, schema.t):
            if col not in index:
                raise MissingColumn(col)
        qoe_col = schema.qoe if schema.qoe in index else None
        if schema.features is None:
            reserved = {schema.session, schema.t, schema.qoe}
            feature_cols = [h for h in header if h not in reserved]
        else:
            feature_cols = list(schema.features)
            for col in feature_cols:
                if col not in index:
                    raise MissingColumn(col)
        if not feature_cols:
            raise MissingColumn("no feature columns")

        grouped: dict[str, dict[int, tuple[list[float], float]]] = {}
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            line = reader.line_num
            if len(row) != len(header):
                raise NonNumericCell(line, "<row>", f"expected {len(header)} cells, got {len(row)}")
            sid = row[index[schema.session]].strip()
            t_cell = row[index[schema.t]].strip()
            try:
                t = int(t_cell)
            except ValueError:
                raise NonNumericCell(line, schema.t, t_cell) from None
            feats = [_parse_float(row[index[c]], line, c) for c in feature_cols]
            q = math.nan
            if qoe_col is not None and row[index[qoe_col]].strip():
                q = _parse_float(row[index[qoe_col]], line, qoe_col)
                if not QOE_MIN <= q <= QOE_MAX:
                    raise QoEOutOfRange(line, q)
            steps = grouped.setdefault(sid, {})
            if t in steps:
                raise DuplicateTimestep(sid, t)
            steps[t] = (feats, q)

    sessions = []
    for sid, steps in grouped.items():
        ts = sorted(steps)
        for expected, t in enumerate(ts):
            if t != expected:
                raise GapInTimesteps(sid, expected)
        feats = np.array([steps[t][0] for t in ts], dtype=np.float64)
        qoe = None
        if qoe_col is not None:
            qoe = np.array([steps[t][1] for t in ts], dtype=np.float64)
        sessions.append(SessionSeries(sid, feats, qoe))
    return Dataset(sessions, feature_cols, num_states)


def write_csv(data: Dataset, path: str | Path) -> None:
    """Write ``data`` in the canonical schema (session_id, t, features..., qoe)."""
    has_qoe = any(s.qoe is not None for s in data.sessions)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["session_id", "t", *data.feature_names] + (["qoe"] if has_qoe else []))
        for s in data.sessions:
            for t in range(len(s)):
                row = [s.session_id, t, *(repr(float(v)) for v in s.features[t])]
                if has_qoe:
                    q = math.nan if s.qoe is None else s.qoe[t]
                    row.append("" if math.isnan(q) else repr(float(q)))
                w.writerow(row)


# ---------------------------------------------------------------------------
# standardization


@dataclass(frozen=True)
class StandardizationParams:
    means: tuple[float, ...]
    std_devs: tuple[float, ...]

    def __post_init__(self):
        if len(self.means) != len(self.std_devs):
            raise DimensionMismatch("means and std_devs differ in length")
        if any(s < 0 or not math.isfinite(s) for s in self.std_devs):
            raise InvalidSpec("std_devs must be finite and non-negative")

    @property
    def dim(self) -> int:
        return len(self.means)

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected D={self.dim}, got {x.shape[-1]}")
        scale = np.asarray(self.std_devs)
        scale = np.where(scale == 0.0, 1.0, scale)
        return (x - np.asarray(self.means)) / scale

    def to_dict(self) -> dict:
        return {"means": list(self.means), "std_devs": list(self.std_devs)}

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationParams":
        return cls(tuple(float(v) for v in d["means"]), tuple(float(v) for v in d["std_devs"]))


def fit_standardizer(train: Dataset) -> StandardizationParams:
    x = train.stacked_features()
    if x.shape[0] == 0:
        raise EmptyDataset("cannot fit a standardizer on zero records")
    return StandardizationParams(tuple(float(v) for v in x.mean(axis=0)),
                                 tuple(float(v) for v in x.std(axis=0)))


def apply_standardizer(data: Dataset, params: StandardizationParams) -> Dataset:
    if data.dim != params.dim:
        raise DimensionMismatch(f"dataset D={data.dim}, standardizer D={params.dim}")
    sessions = [SessionSeries(s.session_id, params.transform(s.features),
                              None if s.qoe is None else s.qoe.copy())
                for s in data.sessions]
    return data.subset(sessions)


# ---------------------------------------------------------------------------
# QoE discretization


def _check_state_count(num_states: int) -> None:
    if not isinstance(num_states, (int, np.integer)) or num_states < 1:
        raise InvalidStateCount(f"num_states must be a positive integer, got {num_states!r}")


def discretize_qoe(score: float, num_states: int) -> int:
    """Equal-width bin index of a 1..100 rating among ``num_states`` bins."""
    _check_state_count(num_states)
    if not (QOE_MIN <= score <= QOE_MAX):
        raise ScoreOutOfRange(f"score {score} outside [1, 100]")
    width = (QOE_MAX - QOE_MIN) / num_states
    return min(int(math.floor((score - QOE_MIN) / width)), num_states - 1)


def discretize_qoe_array(scores: np.ndarray, num_states: int) -> np.ndarray:
    _check_state_count(num_states)
    scores = np.asarray(scores, dtype=np.float64)
    if np.any(~((scores >= QOE_MIN) & (scores <= QOE_MAX))):
        raise ScoreOutOfRange("score outside [1, 100]")
    width = (QOE_MAX - QOE_MIN) / num_states
    return np.minimum(np.floor((scores - QOE_MIN) / width).astype(np.int64), num_states - 1)


def state_midpoint(state: int, num_states: int) -> float:
    """Rating at the centre of a state's bin; discretizes back to ``state``."""
    width = (QOE_MAX - QOE_MIN) / num_states
    return QOE_MIN + (state + 0.5) * width


# ---------------------------------------------------------------------------
# splitting


def split_sessions(data: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Assign whole sessions to train or test; order within each side is preserved."""
    n = len(data.sessions)
    if n < 2:
        raise TooFewSessions(f"need at least 2 sessions, got {n}")
    if not 0.0 < test_fraction < 1.0:
        raise InvalidSpec(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_test = int(math.floor(test_fraction * n + 0.5))
    n_test = min(max(n_test, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = set(int(i) for i in perm[:n_test])
    train = [s for i, s in enumerate(data.sessions) if i not in test_idx]
    test = [s for i, s in enumerate(data.sessions) if i in test_idx]
    return data.subset(train), data.subset(test)


# ---------------------------------------------------------------------------
# synthetic generation


@dataclass
class GeneratorSpec:
    """State-conditional Gaussian telemetry driven by a Markov chain.

    ``mixing`` is an optional (D, D) matrix applied to every sampled vector,
    which lets clusters be rotated off the feature axes while the per-state
    covariances stay diagonal in the latent frame.
    """

    means: list[list[float]]
    variances: list[list[float]]
    transition: list[list[float]]
    num_sessions: int
    session_length: int
    initial: list[float] | None = None
    mixing: list[list[float]] | None = None
    feature_names: list[str] | None = None

    @property
    def num_states(self) -> int:
        return len(self.means)

    @property
    def dim(self) -> int:
        return len(self.means[0]) if self.means else 0

    def validate(self) -> None:
        s, d = self.num_states, self.dim
        if s < 1 or d < 1:
            raise InvalidSpec("need at least one state and one feature")
        mu = np.asarray(self.means, dtype=np.float64)
        var = np.asarray(self.variances, dtype=np.float64)
        a = np.asarray(self.transition, dtype=np.float64)
        if mu.shape != (s, d) or var.shape != (s, d):
            raise InvalidSpec("means and variances must both be (S, D)")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(var))):
            raise InvalidSpec("means and variances must be finite")
        if np.any(var <= 0):
            raise InvalidSpec("variances must be positive")
        _check_stochastic(a, (s, s), "transition")
        if self.initial is not None:
            _check_stochastic(np.asarray(self.initial, dtype=np.float64)[None, :], (1, s), "initial")
        if self.mixing is not None:
            m = np.asarray(self.mixing, dtype=np.float64)
            if m.shape != (d, d) or not np.all(np.isfinite(m)):
                raise InvalidSpec("mixing must be a finite (D, D) matrix")
        if self.num_sessions < 1 or self.session_length < 1:
            raise InvalidSpec("num_sessions and session_length must be >= 1")
        if self.feature_names is not None and len(self.feature_names) != d:
            raise InvalidSpec("feature_names must have D entries")

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidSpec(f"unknown generator keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None


def _check_stochastic(m: np.ndarray, shape: tuple[int, int], name: str, atol: float = 1e-9) -> None:
    if m.shape != shape:
        raise InvalidSpec(f"{name} must have shape {shape}, got {m.shape}")
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise InvalidSpec(f"{name} entries must be finite and non-negative")
    if np.any(np.abs(m.sum(axis=1) - 1.0) > atol):
        raise InvalidSpec(f"{name} rows must sum to 1")


def synthesize_dataset(spec: GeneratorSpec, seed: int) -> Dataset:
    """Sample sessions from ``spec``; QoE is the midpoint of each state's bin,
    so discretizing it recovers the hidden path exactly."""
    spec.validate()
    s, d = spec.num_states, spec.dim
    rng = np.random.default_rng(seed)
    mu = np.asarray(spec.means, dtype=np.float64)
    sd = np.sqrt(np.asarray(spec.variances, dtype=np.float64))
    a = np.asarray(spec.transition, dtype=np.float64)
    pi = np.full(s, 1.0 / s) if spec.initial is None else np.asarray(spec.initial, dtype=np.float64)
    init_table = CategoricalTable(pi)
    trans_table = CategoricalTable(a)
    mix = None if spec.mixing is None else np.asarray(spec.mixing, dtype=np.float64)
    mids = np.array([state_midpoint(k, s) for k in range(s)])
    names = spec.feature_names or [f"f{i}" for i in range(d)]
    width = len(str(spec.num_sessions - 1))

    sessions = []
    for n in range(spec.num_sessions):
        u = rng.random(spec.session_length)
        path = np.empty(spec.session_length, dtype=np.int64)
        path[0] = init_table.draw(0, u[0])
        for t in range(1, spec.session_length):
            path[t] = trans_table.draw(path[t - 1], u[t])
        x = mu[path] + sd[path] * rng.standard_normal((spec.session_length, d))
        if mix is not None:
            x = x @ mix.T
        sessions.append(SessionSeries(f"s{n:0{width}d}", x, mids[path]))
    return Dataset(sessions, list(names), s)
