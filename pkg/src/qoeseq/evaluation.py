"""Classification metrics, latency measurement and model comparison reports."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import EmptyMatrix, IndexOutOfRange, InvalidRepetitions, LengthMismatch
from .hmm import posterior_entropy
from .ingest import Dataset

DEFAULT_WARMUP = 10
DEFAULT_REPS = 100

# Accuracy / per-sequence latency figures reported in the literature for the
# same comparison; carried into reports as cited constants, never measured.
LITERATURE_ROWS = [
    {"model": "vq-hmm (reported)", "accuracy": 0.77, "median_latency_s": 0.0015},
    {"model": "binned-hmm (reported)", "accuracy": 0.29, "median_latency_s": 0.0011},
    {"model": "classifier-feature-engineering (reported)", "accuracy": 0.64, "median_latency_s": 0.0021},
    {"model": "classifier-discretized (reported)", "accuracy": 0.67, "median_latency_s": 0.0017},
    {"model": "lstm (reported)", "accuracy": None, "median_latency_s": 0.023},
]


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true states, columns predicted states."""

    counts: np.ndarray

    @property
    def num_states(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)


def confusion(true, predicted, S: int) -> ConfusionMatrix:
    y = np.asarray(true, dtype=np.int64).reshape(-1)
    p = np.asarray(predicted, dtype=np.int64).reshape(-1)
    if y.shape != p.shape:
        raise LengthMismatch(f"{y.size} true labels vs {p.size} predictions")
    if y.size == 0:
        raise LengthMismatch("no timesteps to evaluate")
    if min(y.min(), p.min()) < 0 or max(y.max(), p.max()) >= S:
        raise IndexOutOfRange(f"state index outside [0, {S - 1}]")
    counts = np.bincount(y * S + p, minlength=S * S).reshape(S, S)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    per_class: list[ClassScores]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    support: list[int]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class": [{"state": i, "precision": c.precision, "recall": c.recall,
                           "f1": c.f1, "support": n}
                          for i, (c, n) in enumerate(zip(self.per_class, self.support))],
        }


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy plus per-class and macro precision/recall/F1.

    Macro averages run over classes with nonzero support only.
    """
    c = np.asarray(cm.counts, dtype=np.int64)
    total = int(c.sum())
    if total == 0:
        raise EmptyMatrix("confusion matrix has no counts")
    diag = np.diag(c)
    rows, cols = c.sum(axis=1), c.sum(axis=0)
    per_class = []
    for s in range(c.shape[0]):
        p = diag[s] / cols[s] if cols[s] else 0.0
        r = diag[s] / rows[s] if rows[s] else 0.0
        per_class.append(ClassScores(float(p), float(r), f1_score(float(p), float(r))))
    present = [s for s in range(c.shape[0]) if rows[s] > 0]
    return MetricsReport(
        accuracy=float(diag.sum() / total),
        per_class=per_class,
        macro_precision=float(np.mean([per_class[s].precision for s in present])),
        macro_recall=float(np.mean([per_class[s].recall for s in present])),
        macro_f1=float(np.mean([per_class[s].f1 for s in present])),
        support=[int(v) for v in rows],
    )


# ---------------------------------------------------------------------------
# latency


@dataclass(frozen=True)
class LatencyReport:
    median: float
    p95: float
    min: float
    max: float
    repetitions: int
    sequence_length: int
    warmup: int
    samples: tuple[float, ...] = field(repr=False, default=())

    def to_dict(self) -> dict:
        return {"median_s": self.median, "p95_s": self.p95, "min_s": self.min, "max_s": self.max,
                "repetitions": self.repetitions, "sequence_length": self.sequence_length,
                "warmup": self.warmup}


def latency_stats(samples: Sequence[float], sequence_length: int = 0, warmup: int = 0) -> LatencyReport:
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise InvalidRepetitions("no samples")
    return LatencyReport(
        median=float(np.median(x)),
        p95=float(np.percentile(x, 95)),
        min=float(x.min()),
        max=float(x.max()),
        repetitions=int(x.size),
        sequence_length=sequence_length,
        warmup=warmup,
        samples=tuple(float(v) for v in x),
    )


def measure_latency(decode_fn: Callable, tokens, repetitions: int = DEFAULT_REPS,
                    warmup: int = DEFAULT_WARMUP,
                    clock: Callable[[], float] = time.perf_counter) -> LatencyReport:
    """Time ``decode_fn(tokens)`` serially: ``warmup`` untimed calls, then
    ``repetitions`` timed ones. ``clock`` returns seconds."""
    if not isinstance(repetitions, (int, np.integer)) or repetitions < 1:
        raise InvalidRepetitions(f"repetitions must be >= 1, got {repetitions!r}")
    if not isinstance(warmup, (int, np.integer)) or warmup < 0:
        raise InvalidRepetitions(f"warmup must be >= 0, got {warmup!r}")
    for _ in range(warmup):
        decode_fn(tokens)
    samples = []
    for _ in range(repetitions):
        start = clock()
        decode_fn(tokens)
        samples.append(clock() - start)
    return latency_stats(samples, len(tokens), warmup)


# ---------------------------------------------------------------------------
# model comparison


class Predictor(Protocol):
    name: str

    def predict(self, features: np.ndarray) -> np.ndarray: ...

    def posteriors(self, features: np.ndarray) -> np.ndarray: ...


@dataclass
class ModelResult:
    name: str
    report: MetricsReport
    confusion: ConfusionMatrix
    latency: LatencyReport | None


@dataclass
class Comparison:
    results: list[ModelResult]
    traces: dict[str, dict[str, dict[str, np.ndarray]]]

    def table_rows(self, include_literature: bool = True) -> list[dict]:
        rows = []
        for r in self.results:
            rows.append({
                "model": r.name,
                "accuracy": r.report.accuracy,
                "macro_f1": r.report.macro_f1,
                "median_latency_s": r.latency.median if r.latency else None,
                "p95_latency_s": r.latency.p95 if r.latency else None,
                "source": "measured",
            })
        if include_literature:
            for lit in LITERATURE_ROWS:
                rows.append({"model": lit["model"], "accuracy": lit["accuracy"], "macro_f1": None,
                             "median_latency_s": lit["median_latency_s"], "p95_latency_s": None,
                             "source": "paper"})
        return rows


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


TABLE_COLUMNS = ["model", "accuracy", "macro_f1", "median_latency_s", "p95_latency_s", "source"]
TRACE_COLUMNS = ["t", "true_state", "predicted_state", "posterior_entropy"]


def write_table(rows: Sequence[dict], path: str | Path, columns: Sequence[str] = TABLE_COLUMNS) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])


def read_table(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_trace(trace: dict[str, np.ndarray], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for t in range(len(trace["true_state"])):
            w.writerow([t, int(trace["true_state"][t]), int(trace["predicted_state"][t]),
                        repr(float(trace["posterior_entropy"][t]))])


def read_trace(path: str | Path) -> dict[str, np.ndarray]:
    rows = read_table(path)
    return {
        "t": np.array([int(r["t"]) for r in rows], dtype=np.int64),
        "true_state": np.array([int(r["true_state"]) for r in rows], dtype=np.int64),
        "predicted_state": np.array([int(r["predicted_state"]) for r in rows], dtype=np.int64),
        "posterior_entropy": np.array([float(r["posterior_entropy"]) for r in rows]),
    }


def compare_models(test: Dataset, predictors: Sequence[Predictor], repetitions: int = DEFAULT_REPS,
                   warmup: int = DEFAULT_WARMUP, measure: bool = True,
                   clock: Callable[[], float] = time.perf_counter) -> Comparison:
    """Evaluate fitted predictors on the labeled ``test`` split.

    Accuracy pools every test timestep across sessions. Latency is measured
    per sequence on the longest test session (first one on ties).
    """
    S = test.num_states
    results, traces = [], {}
    truth = {s.session_id: s.states(S) for s in test.sessions}
    bench_session = max(test.sessions, key=len) if test.sessions else None
    for pred in predictors:
        cm = ConfusionMatrix(np.zeros((S, S), dtype=np.int64))
        per_session = {}
        for sess in test.sessions:
            y = truth[sess.session_id]
            yhat = np.asarray(pred.predict(sess.features), dtype=np.int64)
            ent = posterior_entropy(pred.posteriors(sess.features))
            cm = cm + confusion(y, yhat, S)
            per_session[sess.session_id] = {"true_state": y, "predicted_state": yhat,
                                            "posterior_entropy": ent}
        lat = None
        if measure and bench_session is not None:
            lat = measure_latency(pred.predict, bench_session.features, repetitions, warmup, clock)
        results.append(ModelResult(pred.name, metrics(cm), cm, lat))
        traces[pred.name] = per_session
    return Comparison(results, traces)


def write_comparison(comp: Comparison, out_dir: str | Path) -> dict[str, Path]:
    """Write ``comparison.csv``, ``metrics.csv`` and ``traces/<model>/<session>.csv``.

    ``metrics.csv`` carries only deterministic quantities; latency lives in
    ``comparison.csv``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    table = out / "comparison.csv"
    write_table(comp.table_rows(), table)
    written["comparison"] = table

    metric_rows = []
    for r in comp.results:
        metric_rows.append({"model": r.name, "state": "all", "accuracy": r.report.accuracy,
                            "precision": r.report.macro_precision, "recall": r.report.macro_recall,
                            "f1": r.report.macro_f1, "support": r.confusion.total})
        for s, (c, n) in enumerate(zip(r.report.per_class, r.report.support)):
            metric_rows.append({"model": r.name, "state": s, "accuracy": None, "precision": c.precision,
                                "recall": c.recall, "f1": c.f1, "support": n})
    mpath = out / "metrics.csv"
    write_table(metric_rows, mpath, ["model", "state", "accuracy", "precision", "recall", "f1", "support"])
    written["metrics"] = mpath

    for model, sessions in comp.traces.items():
        d = out / "traces" / _safe(model)
        d.mkdir(parents=True, exist_ok=True)
        for sid, trace in sessions.items():
            p = d / f"{_safe(sid)}.csv"
            write_trace(trace, p)
            written[f"trace:{model}:{sid}"] = p
    return written


def replay_accuracy(trace_dir: str | Path) -> float:
    """Pooled accuracy recomputed from one model's trace files."""
    hits = total = 0
    for p in sorted(Path(trace_dir).glob("*.csv")):
        tr = read_trace(p)
        hits += int((tr["true_state"] == tr["predicted_state"]).sum())
        total += tr["true_state"].size
    if total == 0:
        raise EmptyMatrix(f"no traces under {trace_dir}")
    return hits / total


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)

