"""Vector quantization of telemetry vectors into discrete tokens.

Two discretizers share one interface (``encode`` / ``encode_many``):

* :class:`Codebook` - K centroids fitted by k-means (k-means++ seeding,
  Lloyd iterations); a vector maps to its nearest centroid.
* :class:`BinningScheme` - per-feature equal-width scalar bins composed into
  a single mixed-radix token; the degraded baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInput,
    InvalidSpec,
    NonFiniteInput,
    TooFewDistinctPoints,
)
from .ingest import StandardizationParams

DEFAULT_K = 32
DEFAULT_BINS = 3
DEFAULT_MAX_ITERS = 300
DEFAULT_TOL = 1e-6

# rows per block when materializing (N, K, D) difference tensors
_CHUNK = 4096


def _as_points(points, dim: int | None = None) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise DimensionMismatch("points must be a 2-D array of D-vectors")
    if dim is not None and x.shape[1] != dim:
        raise DimensionMismatch(f"expected D={dim}, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("points contain NaN or infinity")
    return x


def squared_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(N, K) squared Euclidean distances.

    Computed from explicit differences rather than the ``|x|^2 - 2x.c + |c|^2``
    expansion so that exact ties stay exact.
    """
    out = np.empty((x.shape[0], centroids.shape[0]))
    for lo in range(0, x.shape[0], _CHUNK):
        diff = x[lo:lo + _CHUNK, None, :] - centroids[None, :, :]
        out[lo:lo + _CHUNK] = np.einsum("nkd,nkd->nk", diff, diff)
    return out


@dataclass
class Codebook:
    centroids: np.ndarray
    inertia: float
    seed: int | None = None
    standardizer: StandardizationParams | None = None
    # inertia after each assignment step, in order; empty for loaded codebooks
    inertia_history: list[float] = field(default_factory=list)
    n_iter: int = 0

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 1:
            raise InvalidSpec("centroids must be a non-empty (K, D) array")
        if not np.all(np.isfinite(self.centroids)):
            raise NonFiniteInput("centroids must be finite")
        if self.standardizer is not None and self.standardizer.dim != self.D:
            raise DimensionMismatch("standardizer D differs from centroid D")

    @property
    def K(self) -> int:
        return self.centroids.shape[0]

    @property
    def D(self) -> int:
        return self.centroids.shape[1]

    @property
    def alphabet_size(self) -> int:
        return self.K

    def encode(self, x) -> int:
        """Index of the nearest centroid; ties go to the lowest index."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise DimensionMismatch("encode takes a single D-vector")
        return int(self.encode_many(x[None, :])[0])

    def encode_many(self, points) -> np.ndarray:
        x = _as_points(points, self.D)
        return squared_distances(x, self.centroids).argmin(axis=1)

    def quantization_error(self, points) -> float:
        """Mean squared distance from each point to its nearest centroid."""
        x = _as_points(points, self.D)
        if x.shape[0] == 0:
            raise EmptyInput("no points")
        return float(squared_distances(x, self.centroids).min(axis=1).mean())


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        cum = np.cumsum(d2)
        # points already chosen (or duplicates of them) have zero mass
        i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        i = min(i, int(np.flatnonzero(d2 > 0)[-1]))
        chosen.append(i)
        d2 = np.minimum(d2, ((x - x[i]) ** 2).sum(axis=1))
    return x[chosen].copy()


def _repair(x: np.ndarray, centroids: np.ndarray, labels: np.ndarray, dist: np.ndarray,
            broken: list[int]) -> None:
    # each broken centroid jumps to the point currently farthest from its own
    # centroid; that point's distance drops to zero so the next one moves on
    dist = dist.copy()
    for j in broken:
        far = int(dist.argmax())
        centroids[j] = x[far]
        dist[far] = 0.0
        labels[far] = j


def kmeans_fit(points, K: int, seed: int = 0, max_iters: int = DEFAULT_MAX_ITERS,
               tol: float = DEFAULT_TOL) -> Codebook:
    """Fit a K-centroid codebook.

    Lloyd iterations stop once the largest centroid shift is <= ``tol`` or
    after ``max_iters`` updates. Clusters left empty (or collapsed onto another
    centroid) are reseeded at the worst-served point so K stays fixed.
    """
    x = _as_points(points)
    if K < 1:
        raise InvalidSpec("K must be >= 1")
    if max_iters < 1 or tol < 0:
        raise InvalidSpec("max_iters must be >= 1 and tol >= 0")
    if x.shape[0] == 0:
        raise TooFewDistinctPoints("no points")
    n_distinct = np.unique(x, axis=0).shape[0]
    if n_distinct < K:
        raise TooFewDistinctPoints(f"{n_distinct} distinct points < K={K}")

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp(x, K, rng)
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        dist_all = squared_distances(x, centroids)
        labels = dist_all.argmin(axis=1)
        dist = dist_all[np.arange(x.shape[0]), labels]
        history.append(float(dist.sum()))

        counts = np.bincount(labels, minlength=K)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, x)
        new = centroids.copy()
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled, None]
        broken = [j for j in range(K) if not filled[j]]
        seen = set()
        for j in np.flatnonzero(filled):
            key = new[j].tobytes()
            if key in seen:
                broken.append(int(j))
            seen.add(key)
        if broken:
            _repair(x, new, labels, dist, sorted(broken))

        shift = float(np.sqrt(((new - centroids) ** 2).sum(axis=1)).max())
        centroids = new
        if shift <= tol:
            break

    final = squared_distances(x, centroids).min(axis=1)
    inertia = float(final.sum())
    history.append(inertia)
    return Codebook(centroids, inertia, seed=seed, inertia_history=history, n_iter=n_iter)


# ---------------------------------------------------------------------------
# scalar binning baseline


@dataclass
class BinningScheme:
    """Equal-width bins per feature, composed with feature 0 most significant."""

    edges: list[np.ndarray]
    bins: int
    standardizer: StandardizationParams | None = None

    def __post_init__(self):
        if self.bins < 1:
            raise InvalidSpec("bins must be >= 1")
        self.edges = [np.asarray(e, dtype=np.float64).reshape(-1) for e in self.edges]
        for e in self.edges:
            if e.size > self.bins - 1 or np.any(np.diff(e) <= 0) or not np.all(np.isfinite(e)):
                raise InvalidSpec("edges must be finite, strictly increasing, at most B-1 per feature")

    @property
    def D(self) -> int:
        return len(self.edges)

    @property
    def alphabet_size(self) -> int:
        return self.bins ** self.D

    def digits(self, points) -> np.ndarray:
        x = _as_points(points, self.D)
        return np.stack([np.searchsorted(e, x[:, d], side="right") for d, e in enumerate(self.edges)],
                        axis=1).astype(np.int64)

    def encode_many(self, points) -> np.ndarray:
        dig = self.digits(points)
        radix = self.bins ** np.arange(self.D - 1, -1, -1, dtype=np.int64)
        return dig @ radix

    def encode(self, x) -> int:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise DimensionMismatch("encode takes a single D-vector")
        return int(self.encode_many(x[None, :])[0])


def binning_fit(points, bins_per_feature: int = DEFAULT_BINS) -> BinningScheme:
    x = _as_points(points)
    if x.shape[0] == 0:
        raise EmptyInput("no points")
    if bins_per_feature < 1:
        raise InvalidSpec("bins_per_feature must be >= 1")
    lo, hi = x.min(axis=0), x.max(axis=0)
    edges = []
    for d in range(x.shape[1]):
        if lo[d] == hi[d]:
            edges.append(np.empty(0))
            continue
        step = (hi[d] - lo[d]) / bins_per_feature
        edges.append(lo[d] + step * np.arange(1, bins_per_feature))
    return BinningScheme(edges, bins_per_feature)
