"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also collected into the terminal summary.
"""

import json
import math
import time
import warnings

import numpy as np
import pytest

from oracles import path_table
from qoeseq import serialization as ser
from qoeseq.cli import main
from qoeseq.evaluation import ConfusionMatrix, compare_models, f1_score, measure_latency, metrics
from qoeseq.hmm import (
    HmmParams,
    fit_supervised,
    forward_loglik,
    posterior_marginals,
    sample_sequence,
    viterbi_decode,
)
from qoeseq.ingest import GeneratorSpec, split_sessions, synthesize_dataset
from qoeseq.pipeline import fit_pipeline
from qoeseq.vq import kmeans_fit


def _instance_family(n=240, seed=20240601):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        S, V, T = int(rng.integers(2, 5)), int(rng.integers(2, 7)), int(rng.integers(1, 9))
        model = HmmParams(rng.dirichlet(np.ones(S)), rng.dirichlet(np.ones(S), S), rng.dirichlet(np.ones(V), S))
        yield model, rng.integers(V, size=T)


@pytest.fixture(scope="module")
def family():
    instances = list(_instance_family())
    return [(m, tok, *path_table(m.pi, m.A, m.B, tok)) for m, tok in instances]


def test_1_viterbi_matches_enumeration(family, criterion):
    start = time.perf_counter()
    worst, mismatched, unique = 0.0, 0, 0
    for model, tokens, paths, lp in family:
        dec = viterbi_decode(model, tokens)
        best = lp.max()
        worst = max(worst, abs(dec.log_prob - best))
        maximizers = np.flatnonzero(lp >= best - 1e-9)
        if maximizers.size == 1:
            unique += 1
            mismatched += paths[maximizers[0]].tolist() != dec.states.tolist()
    elapsed = time.perf_counter() - start
    ok = len(family) >= 200 and worst <= 1e-9 and mismatched == 0 and elapsed < 10
    criterion(1, ok, f"{len(family)} models, max |log_prob error| {worst:.2e}, "
                     f"{mismatched}/{unique} unique-maximizer paths differ, {elapsed:.2f}s")


def test_2_forward_matches_enumeration(family, criterion):
    worst, dominance = 0.0, 0
    for model, tokens, _, lp in family:
        ll = forward_loglik(model, tokens)
        total = math.fsum(np.exp(lp))
        worst = max(worst, abs(math.exp(ll) - total) / total)
        dominance += ll < viterbi_decode(model, tokens).log_prob
    criterion(2, worst <= 1e-9 and dominance == 0,
              f"max relative error {worst:.2e}, {dominance} instances with forward < viterbi")


def test_3_parameter_recovery(criterion):
    # skewed initial distribution: 500 first states pin pi to ~0.01
    true = HmmParams(
        [0.96, 0.02, 0.02],
        [[0.8, 0.1, 0.1], [0.15, 0.7, 0.15], [0.1, 0.2, 0.7]],
        [[0.3, 0.2, 0.15, 0.1, 0.1, 0.05, 0.05, 0.05],
         [0.05, 0.05, 0.1, 0.3, 0.3, 0.1, 0.05, 0.05],
         [0.05, 0.05, 0.05, 0.05, 0.1, 0.2, 0.2, 0.3]],
    )
    start = time.perf_counter()
    seqs = [sample_sequence(true, 100, seed=i) for i in range(500)]
    fitted = fit_supervised(seqs, 3, 8, alpha=1.0)
    elapsed = time.perf_counter() - start
    err = max(np.abs(fitted.pi - true.pi).max(), np.abs(fitted.A - true.A).max(),
              np.abs(fitted.B - true.B).max())
    criterion(3, err <= 0.02 and elapsed < 5, f"max entry error {err:.4f}, {elapsed:.2f}s")


def test_4_posterior_rows_normalized(family, criterion):
    worst = 0.0
    for model, tokens, _, _ in family:
        rows = posterior_marginals(model, tokens).sum(axis=1)
        worst = max(worst, float(np.abs(rows - 1).max()))
    criterion(4, worst <= 1e-12, f"max |row sum - 1| {worst:.2e}")


# accuracies observed once for the rotated workload below, frozen as regressions
FROZEN_ACCURACY = {
    "vq-hmm": 0.8883333333333333,
    "binned-hmm": 0.659,
    "vq-token-classifier": 0.7293333333333333,
    "gaussian-nb": 0.7703333333333333,
}


def rotated_workload(seed=0):
    """Three states on a line, stretched along one axis, then rotated 45 degrees
    so no axis-aligned grid separates them."""
    c = math.cos(math.pi / 4)
    spec = GeneratorSpec(
        means=[[-2.0, 0.0], [0.0, 0.0], [2.0, 0.0]],
        variances=[[1.0, 9.0]] * 3,
        transition=[[0.9 if i == j else 0.05 for j in range(3)] for i in range(3)],
        num_sessions=60,
        session_length=200,
        mixing=[[c, -c], [c, c]],
    )
    return split_sessions(synthesize_dataset(spec, seed), 0.25, seed)


def test_5_vq_beats_binning_and_memoryless(criterion):
    train, test = rotated_workload()
    fitted = fit_pipeline(train, codebook_size=16, bins=3, alpha=1.0, seed=0)
    acc = {r.name: r.report.accuracy for r in compare_models(test, fitted.predictors(), measure=False).results}
    gap_bin = acc["vq-hmm"] - acc["binned-hmm"]
    gap_tc = acc["vq-hmm"] - acc["vq-token-classifier"]
    frozen = all(abs(acc[k] - v) <= 1e-12 for k, v in FROZEN_ACCURACY.items())
    criterion(5, gap_bin >= 0.10 and gap_tc >= 0.05 and frozen,
              f"vq-hmm {acc['vq-hmm']:.3f}, binned-hmm {acc['binned-hmm']:.3f} (gap {100 * gap_bin:.1f} pts), "
              f"token classifier {acc['vq-token-classifier']:.3f} (gap {100 * gap_tc:.1f} pts), "
              f"matches frozen values: {frozen}")


def test_6_metric_arithmetic(criterion):
    f1 = f1_score(0.41, 0.64)
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(500):
        S = int(rng.integers(2, 7))
        counts = rng.integers(0, 50, size=(S, S))
        if counts.sum() == 0:
            continue
        report = metrics(ConfusionMatrix(counts))
        for s, cls in enumerate(report.per_class):
            tp = counts[s, s]
            fp, fn = counts[:, s].sum() - tp, counts[s].sum() - tp
            exact = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
            worst = max(worst, abs(cls.f1 - exact))
    criterion(6, round(f1, 2) == 0.50 and worst <= 1e-12,
              f"F1(0.41, 0.64) = {f1:.4f} -> {round(f1, 2):.2f}, max harmonic-mean deviation {worst:.2e}")


def test_7_latency(criterion):
    rng = np.random.default_rng(7)
    model = HmmParams(rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5), 5), rng.dirichlet(np.ones(32), 5))
    tokens = sample_sequence(model, 300, seed=7).tokens
    report = measure_latency(lambda obs: viterbi_decode(model, obs), tokens, repetitions=100, warmup=10)
    ok = report.median < 1.5e-3
    detail = f"median {1e3 * report.median:.3f} ms, p95 {1e3 * report.p95:.3f} ms (S=5, V=32, T=300)"
    if not ok:
        warnings.warn(f"decode latency above 1.5 ms: {detail}")
    criterion(7, ok, detail, soft=True)


def test_8_determinism_and_round_trip(tmp_path, criterion):
    runs = [tmp_path / "a", tmp_path / "b"]
    for out in runs:
        assert main(["pipeline", "--out", str(out), "--seed", "11", "--reps", "3", "--warmup", "1"]) == 0
    manifests = [json.loads((r / "manifest.json").read_text()) for r in runs]
    volatile = set(manifests[0]["nondeterministic"])
    differing = [k for k in manifests[0]["artifacts"]
                 if k not in volatile and manifests[0]["artifacts"][k] != manifests[1]["artifacts"].get(k)]

    model = runs[0] / "models" / "vq_hmm.json"
    for name in ("s1.csv", "s2.csv"):
        main(["generate", "--model", str(model), "--length", "200", "--seed", "7", "--output", str(tmp_path / name)])
    samples_equal = (tmp_path / "s1.csv").read_bytes() == (tmp_path / "s2.csv").read_bytes()

    reloaded = 0
    for path in sorted((runs[0] / "models").glob("*.json")):
        obj = ser.load(path)  # constructors re-check every invariant
        reloaded += ser.dumps(obj) == path.read_text()
    n_models = len(list((runs[0] / "models").glob("*.json")))
    ok = not differing and samples_equal and reloaded == n_models
    criterion(8, ok, f"{len(manifests[0]['artifacts']) - len(volatile)} deterministic artifacts, "
                     f"{len(differing)} differ; samples identical: {samples_equal}; "
                     f"{reloaded}/{n_models} artifacts reload byte-exact")


def test_9_kmeans_descent(criterion):
    corpus = []
    train, _ = rotated_workload()
    corpus.append((train.stacked_features(), 16))
    rng = np.random.default_rng(9)
    for k in (1, 4, 32):
        corpus.append((rng.normal(size=(800, 6)), k))
    corpus.append((np.round(rng.normal(size=(400, 2)) * 2), 10))
    increases = 0
    for i, (pts, k) in enumerate(corpus):
        h = kmeans_fit(pts, k, seed=i).inertia_history
        increases += sum(b > a for a, b in zip(h, h[1:]))
    pts = rng.integers(0, 4, size=(300, 2)).astype(float)
    distinct = np.unique(pts, axis=0).shape[0]
    zero = kmeans_fit(pts, distinct, seed=0).inertia
    criterion(9, increases == 0 and zero == 0.0,
              f"{len(corpus)} codebooks, {increases} inertia increases; K={distinct} distinct points "
              f"gives inertia {zero}")
