"""Memoryless per-timestep classifiers used as comparison points for the HMM.

``TokenClassifier`` is the HMM with its transition structure removed: a MAP
rule over discrete tokens. ``GaussianNB`` works on the continuous features.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyInput, InvalidModel, NegativeAlpha, TokenOutOfRange
from .ingest import Dataset, SessionSeries
from .hmm import DEFAULT_ALPHA, LabeledSequence, count_statistics, smooth_rows

VARIANCE_FLOOR = 1e-9
# prior mass given to a class with no training rows before renormalization
EMPTY_CLASS_PRIOR = 1e-12


@dataclass
class TokenClassifier:
    priors: np.ndarray
    likelihoods: np.ndarray
    alpha: float | None = None

    def __post_init__(self):
        self.priors = np.asarray(self.priors, dtype=np.float64)
        self.likelihoods = np.asarray(self.likelihoods, dtype=np.float64)
        s = self.priors.shape[0]
        if self.likelihoods.ndim != 2 or self.likelihoods.shape[0] != s:
            raise InvalidModel("likelihoods must be (S, V)")
        for name, m in (("priors", self.priors), ("likelihoods", self.likelihoods)):
            if np.any(m < 0) or np.any(np.abs(m.sum(axis=-1) - 1.0) > 1e-9):
                raise InvalidModel(f"{name} rows must be probability distributions")

    @property
    def num_states(self) -> int:
        return self.priors.shape[0]

    @property
    def alphabet_size(self) -> int:
        return self.likelihoods.shape[1]

    def joint(self, tokens) -> np.ndarray:
        obs = np.asarray(tokens, dtype=np.int64).reshape(-1)
        if obs.size and (obs.min() < 0 or obs.max() >= self.alphabet_size):
            raise TokenOutOfRange(f"tokens must lie in [0, {self.alphabet_size - 1}]")
        return self.priors[None, :] * self.likelihoods[:, obs].T

    def posteriors(self, tokens) -> np.ndarray:
        j = self.joint(tokens)
        tot = j.sum(axis=1, keepdims=True)
        return np.divide(j, tot, out=np.full_like(j, 1.0 / self.num_states), where=tot > 0)

    def to_dict(self) -> dict:
        return {"S": self.num_states, "V": self.alphabet_size, "priors": self.priors.tolist(),
                "likelihoods": self.likelihoods.tolist(), "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d: dict) -> "TokenClassifier":
        return cls(d["priors"], d["likelihoods"], d.get("alpha"))


def token_classifier_fit(sequences: Sequence[LabeledSequence], S: int, V: int,
                         alpha: float = DEFAULT_ALPHA) -> TokenClassifier:
    if alpha < 0:
        raise NegativeAlpha(f"alpha must be >= 0, got {alpha}")
    _, _, emit = count_statistics(sequences, S, V)
    priors = smooth_rows(emit.sum(axis=1), alpha)[0]
    return TokenClassifier(priors, smooth_rows(emit, alpha), alpha=float(alpha))


def token_classify(model: TokenClassifier, tokens) -> np.ndarray:
    """Per-step argmax of prior * likelihood; lowest index wins ties."""
    return model.joint(tokens).argmax(axis=1)


@dataclass
class GaussianNB:
    priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        self.priors = np.asarray(self.priors, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.variances = np.asarray(self.variances, dtype=np.float64)
        if self.means.shape != self.variances.shape or self.means.shape[0] != self.priors.shape[0]:
            raise InvalidModel("means/variances must be (S, D) matching priors")
        if np.any(self.variances <= 0):
            raise InvalidModel("variances must be positive")
        if abs(self.priors.sum() - 1.0) > 1e-9 or np.any(self.priors <= 0):
            raise InvalidModel("priors must be positive and sum to 1")

    @property
    def num_states(self) -> int:
        return self.priors.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_joint(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.dim:
            raise DimensionMismatch(f"expected D={self.dim}, got {x.shape[1]}")
        diff = x[:, None, :] - self.means[None, :, :]
        ll = -0.5 * (np.log(2 * np.pi * self.variances)[None] + diff ** 2 / self.variances[None])
        return np.log(self.priors)[None, :] + ll.sum(axis=2)

    def posteriors(self, features) -> np.ndarray:
        lj = self.log_joint(features)
        lj = lj - lj.max(axis=1, keepdims=True)
        p = np.exp(lj)
        return p / p.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {"S": self.num_states, "D": self.dim, "priors": self.priors.tolist(),
                "means": self.means.tolist(), "variances": self.variances.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianNB":
        return cls(d["priors"], d["means"], d["variances"])


def gnb_fit(train: Dataset) -> GaussianNB:
    """Fit on every labeled record of ``train``."""
    S = train.num_states
    return gnb_fit_arrays([s.features for s in train.sessions],
                          [s.states(S) for s in train.sessions], S)


def gnb_fit_arrays(features: Sequence[np.ndarray], states: Sequence[np.ndarray], S: int) -> GaussianNB:
    """Per-class, per-feature Gaussian MLE.

    Takes parallel lists of (T, D) feature arrays and length-T state arrays.
    A class with no rows gets a negligible prior and a unit Gaussian at zero.
    """
    if not features:
        raise EmptyInput("no sessions")
    x = np.concatenate([np.asarray(f, dtype=np.float64) for f in features])
    y = np.concatenate([np.asarray(s, dtype=np.int64).reshape(-1) for s in states])
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch("features and states differ in length")
    if x.shape[0] == 0:
        raise EmptyInput("no rows")
    if y.min() < 0 or y.max() >= S:
        raise DimensionMismatch(f"state index outside [0, {S - 1}]")
    d = x.shape[1]
    counts = np.bincount(y, minlength=S).astype(np.float64)
    means = np.zeros((S, d))
    variances = np.ones((S, d))
    for s in range(S):
        rows = x[y == s]
        if rows.shape[0]:
            means[s] = rows.mean(axis=0)
            variances[s] = np.maximum(rows.var(axis=0), VARIANCE_FLOOR)
    priors = np.where(counts > 0, counts / counts.sum(), EMPTY_CLASS_PRIOR)
    return GaussianNB(priors / priors.sum(), means, variances)


def gnb_classify(model: GaussianNB, session: SessionSeries | np.ndarray) -> np.ndarray:
    features = session.features if isinstance(session, SessionSeries) else session
    return model.log_joint(features).argmax(axis=1)
