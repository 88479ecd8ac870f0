"""Brute-force reference computations, written without any code from the
package under test. Most are plain loops; ``path_table`` vectorizes the same
exhaustive enumeration so larger instance families stay fast."""

from __future__ import annotations

import itertools
import math


def enumerate_paths(pi, A, B, tokens):
    """Yield (path, joint probability) for every state path."""
    S = len(pi)
    for path in itertools.product(range(S), repeat=len(tokens)):
        p = pi[path[0]] * B[path[0]][tokens[0]]
        for t in range(1, len(tokens)):
            p *= A[path[t - 1]][path[t]] * B[path[t]][tokens[t]]
        yield path, p


def best_paths(pi, A, B, tokens):
    """(max log joint, list of maximizing paths) scored in log space."""
    best, arg = -math.inf, []
    S = len(pi)
    for path in itertools.product(range(S), repeat=len(tokens)):
        terms = [pi[path[0]], B[path[0]][tokens[0]]]
        for t in range(1, len(tokens)):
            terms += [A[path[t - 1]][path[t]], B[path[t]][tokens[t]]]
        lp = sum(math.log(x) if x > 0 else -math.inf for x in terms)
        if lp > best:
            best, arg = lp, [path]
        elif lp == best:
            arg.append(path)
    return best, arg


def total_probability(pi, A, B, tokens):
    return math.fsum(p for _, p in enumerate_paths(pi, A, B, tokens))


def posterior_by_enumeration(pi, A, B, tokens):
    S, T = len(pi), len(tokens)
    rows = [[0.0] * S for _ in range(T)]
    for path, p in enumerate_paths(pi, A, B, tokens):
        for t, s in enumerate(path):
            rows[t][s] += p
    z = total_probability(pi, A, B, tokens)
    return [[v / z for v in row] for row in rows]


def tally(sequences, S, V, alpha):
    """Count-and-normalize HMM estimates with plain loops."""
    init = [0] * S
    trans = [[0] * S for _ in range(S)]
    emit = [[0] * V for _ in range(S)]
    for states, tokens in sequences:
        init[states[0]] += 1
        for a, b in zip(states, states[1:]):
            trans[a][b] += 1
        for s, v in zip(states, tokens):
            emit[s][v] += 1

    def norm(row):
        tot = sum(row) + alpha * len(row)
        if tot == 0:
            return [1.0 / len(row)] * len(row)
        return [(c + alpha) / tot for c in row]

    return norm(init), [norm(r) for r in trans], [norm(r) for r in emit]


def nearest(centroids, x):
    best, arg = math.inf, -1
    for i, c in enumerate(centroids):
        d = sum((a - b) ** 2 for a, b in zip(x, c))
        if d < best:
            best, arg = d, i
    return arg, best


def best_two_partition(points):
    """Minimum within-cluster squared distance over all 2-partitions."""
    n = len(points)
    best = (math.inf, None)
    for mask in range(1, 2 ** n - 1):
        groups = [[p for i, p in enumerate(points) if (mask >> i) & 1 == g] for g in (0, 1)]
        cost, cents = 0.0, []
        for g in groups:
            c = [sum(col) / len(g) for col in zip(*g)]
            cents.append(c)
            cost += sum(sum((a - b) ** 2 for a, b in zip(p, c)) for p in g)
        if cost < best[0]:
            best = (cost, cents)
    return best


def running_stats(values):
    """Welford one-pass mean and population standard deviation."""
    n, mean, m2 = 0, 0.0, 0.0
    for x in values:
        n += 1
        d = x - mean
        mean += d / n
        m2 += d * (x - mean)
    return mean, math.sqrt(m2 / n)


def bin_digit(edges, x):
    d = 0
    for e in edges:
        if x >= e:
            d += 1
    return d


def path_table(pi, A, B, tokens):
    """Every state path with its log joint, vectorized over paths.

    Returns (paths (N, T) int array, log joint (N,) array)."""
    import numpy as np

    pi, A, B = (np.asarray(x, dtype=np.float64) for x in (pi, A, B))
    tokens = np.asarray(tokens)
    paths = np.array(list(itertools.product(range(len(pi)), repeat=len(tokens))), dtype=np.int64)
    with np.errstate(divide="ignore"):
        lp = np.log(pi[paths[:, 0]]) + np.log(B[paths[:, 0], tokens[0]])
        for t in range(1, len(tokens)):
            lp = lp + np.log(A[paths[:, t - 1], paths[:, t]]) + np.log(B[paths[:, t], tokens[t]])
    return paths, lp
