"""First-order discrete HMM: supervised estimation, Viterbi decoding,
forward likelihood, posterior marginals and ancestral sampling.

All argmax operations resolve ties toward the lowest state index, so every
decoder here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from numba import njit

from ._sampling import CategoricalTable
from .errors import (
    EmptyInput,
    EmptySequence,
    IndexOutOfRange,
    InvalidModel,
    NegativeAlpha,
    TokenOutOfRange,
    ZeroProbabilitySequence,
)

DEFAULT_ALPHA = 1.0
STOCHASTIC_ATOL = 1e-9


@dataclass(frozen=True)
class LabeledSequence:
    tokens: np.ndarray
    states: np.ndarray

    def __init__(self, tokens, states):
        tokens = np.asarray(tokens, dtype=np.int64).reshape(-1)
        states = np.asarray(states, dtype=np.int64).reshape(-1)
        if tokens.shape != states.shape:
            raise IndexOutOfRange("tokens and states differ in length")
        if tokens.size == 0:
            raise EmptySequence("labeled sequence must have T >= 1")
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return self.tokens.size


@dataclass(frozen=True)
class DecodedSequence:
    states: np.ndarray
    log_prob: float
    # False when every path has probability zero; states is then all zeros
    feasible: bool = True


def _check_distribution(m: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(m)) or np.any(m < 0) or np.any(m > 1):
        raise InvalidModel(f"{name}: entries must lie in [0, 1]")
    if np.any(np.abs(m.sum(axis=-1) - 1.0) > STOCHASTIC_ATOL):
        raise InvalidModel(f"{name}: rows must sum to 1 within {STOCHASTIC_ATOL}")


class HmmParams:
    """Initial distribution ``pi`` (S), transitions ``A`` (S, S) and
    emissions ``B`` (S, V). ``A[i, j] = P(next=j | current=i)``."""

    def __init__(self, pi, A, B, alpha: float | None = None, codebook_ref: str | None = None):
        self.codebook_ref = codebook_ref
        self.pi = np.array(pi, dtype=np.float64)
        self.A = np.array(A, dtype=np.float64)
        self.B = np.array(B, dtype=np.float64)
        self.alpha = alpha
        s = self.pi.shape[0] if self.pi.ndim == 1 else -1
        if s < 1 or self.A.shape != (s, s) or self.B.ndim != 2 or self.B.shape[0] != s or self.B.shape[1] < 1:
            raise InvalidModel(f"inconsistent shapes pi={self.pi.shape} A={self.A.shape} B={self.B.shape}")
        _check_distribution(self.pi, "pi")
        _check_distribution(self.A, "A")
        _check_distribution(self.B, "B")
        for arr in (self.pi, self.A, self.B):
            arr.setflags(write=False)

    @property
    def num_states(self) -> int:
        return self.pi.shape[0]

    @property
    def alphabet_size(self) -> int:
        return self.B.shape[1]

    def __repr__(self) -> str:
        return f"HmmParams(S={self.num_states}, V={self.alphabet_size}, alpha={self.alpha})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, HmmParams):
            return NotImplemented
        return (np.array_equal(self.pi, other.pi) and np.array_equal(self.A, other.A)
                and np.array_equal(self.B, other.B) and self.alpha == other.alpha)

    @cached_property
    def _log_pi(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.pi)

    @cached_property
    def _log_A(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.A)

    @cached_property
    def _log_B_by_token(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.ascontiguousarray(np.log(self.B).T)

    @cached_property
    def _B_by_token(self) -> np.ndarray:
        return np.ascontiguousarray(self.B.T)

    def check_tokens(self, tokens) -> np.ndarray:
        obs = np.asarray(tokens, dtype=np.int64).reshape(-1)
        if obs.size == 0:
            raise EmptySequence("token sequence is empty")
        if obs.min() < 0 or obs.max() >= self.alphabet_size:
            raise TokenOutOfRange(f"tokens must lie in [0, {self.alphabet_size - 1}]")
        return obs

    def to_dict(self) -> dict:
        return {"S": self.num_states, "V": self.alphabet_size, "pi": self.pi.tolist(),
                "A": self.A.tolist(), "B": self.B.tolist(), "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d: dict) -> "HmmParams":
        try:
            model = cls(d["pi"], d["A"], d["B"], d.get("alpha"))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidModel):
                raise
            raise InvalidModel(f"malformed model document: {exc}") from None
        if d.get("S", model.num_states) != model.num_states or d.get("V", model.alphabet_size) != model.alphabet_size:
            raise InvalidModel("declared S/V disagree with array shapes")
        return model


# ---------------------------------------------------------------------------
# estimation


def count_statistics(sequences: Sequence[LabeledSequence], S: int, V: int):
    """Raw tallies: initial-state counts (S), transitions (S, S), emissions (S, V)."""
    if not sequences:
        raise EmptyInput("no sequences")
    if S < 1 or V < 1:
        raise IndexOutOfRange("S and V must be >= 1")
    init = np.zeros(S, dtype=np.int64)
    trans = np.zeros((S, S), dtype=np.int64)
    emit = np.zeros((S, V), dtype=np.int64)
    for seq in sequences:
        st, tok = seq.states, seq.tokens
        if st.min() < 0 or st.max() >= S:
            raise IndexOutOfRange(f"state index outside [0, {S - 1}]")
        if tok.min() < 0 or tok.max() >= V:
            raise IndexOutOfRange(f"token index outside [0, {V - 1}]")
        init[st[0]] += 1
        np.add.at(trans, (st[:-1], st[1:]), 1)
        np.add.at(emit, (st, tok), 1)
    return init, trans, emit


def smooth_rows(counts: np.ndarray, alpha: float) -> np.ndarray:
    """Add-alpha row normalization; rows with no mass become uniform."""
    counts = np.atleast_2d(np.asarray(counts, dtype=np.float64)) + alpha
    totals = counts.sum(axis=1, keepdims=True)
    n = counts.shape[1]
    out = np.full_like(counts, 1.0 / n)
    nz = totals[:, 0] > 0
    out[nz] = counts[nz] / totals[nz]
    return out


def fit_supervised(sequences: Sequence[LabeledSequence], S: int, V: int,
                   alpha: float = DEFAULT_ALPHA) -> HmmParams:
    """Maximum-likelihood (add-alpha smoothed) parameters from labeled sequences."""
    if alpha < 0:
        raise NegativeAlpha(f"alpha must be >= 0, got {alpha}")
    init, trans, emit = count_statistics(sequences, S, V)
    return HmmParams(smooth_rows(init, alpha)[0], smooth_rows(trans, alpha),
                     smooth_rows(emit, alpha), alpha=float(alpha))


# ---------------------------------------------------------------------------
# inference


@njit(cache=True)
def _viterbi_kernel(log_pi, log_a, log_em):
    # log_em[t, s] = log B[s, token_t]; strict ">" keeps the lowest index on ties
    T, S = log_em.shape
    back = np.zeros((T, S), dtype=np.int64)
    delta = log_pi + log_em[0]
    nxt = np.empty(S)
    for t in range(1, T):
        for j in range(S):
            best = delta[0] + log_a[0, j]
            arg = 0
            for i in range(1, S):
                v = delta[i] + log_a[i, j]
                if v > best:
                    best = v
                    arg = i
            back[t, j] = arg
            nxt[j] = best + log_em[t, j]
        delta[:] = nxt
    path = np.empty(T, dtype=np.int64)
    last = 0
    for j in range(1, S):
        if delta[j] > delta[last]:
            last = j
    path[T - 1] = last
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, delta[last]


def viterbi_decode(model: HmmParams, tokens) -> DecodedSequence:
    """Most probable state path and its log joint probability."""
    obs = model.check_tokens(tokens)
    path, log_prob = _viterbi_kernel(model._log_pi, model._log_A, model._log_B_by_token[obs])
    log_prob = float(log_prob)
    return DecodedSequence(path, log_prob, feasible=log_prob != -np.inf)


def _scaled_forward(model: HmmParams, obs: np.ndarray):
    b = model._B_by_token
    T = obs.size
    alphas = np.empty((T, model.num_states))
    scale = np.empty(T)
    a = model.pi * b[obs[0]]
    for t in range(T):
        if t:
            a = (a @ model.A) * b[obs[t]]
        c = a.sum()
        scale[t] = c
        if c == 0.0:
            return alphas, scale, t
        a = a / c
        alphas[t] = a
    return alphas, scale, None


@njit(cache=True)
def _forward_kernel(log_pi, log_a, log_em):
    # log-sum-exp recursion mirroring _viterbi_kernel term for term, so every
    # cell satisfies forward >= viterbi exactly in floating point
    T, S = log_em.shape
    cur = log_pi + log_em[0]
    nxt = np.empty(S)
    terms = np.empty(S)
    for t in range(1, T):
        for j in range(S):
            m = -np.inf
            for i in range(S):
                terms[i] = cur[i] + log_a[i, j]
                if terms[i] > m:
                    m = terms[i]
            if m == -np.inf:
                nxt[j] = -np.inf
                continue
            acc = 0.0
            for i in range(S):
                acc += np.exp(terms[i] - m)
            nxt[j] = (m + np.log(acc)) + log_em[t, j]
        cur[:] = nxt
    m = cur.max()
    if m == -np.inf:
        return m
    acc = 0.0
    for j in range(S):
        acc += np.exp(cur[j] - m)
    return m + np.log(acc)


def forward_loglik(model: HmmParams, tokens) -> float:
    """log P(tokens); ``-inf`` exactly when the sequence is impossible."""
    obs = model.check_tokens(tokens)
    return float(_forward_kernel(model._log_pi, model._log_A, model._log_B_by_token[obs]))


def posterior_marginals(model: HmmParams, tokens) -> np.ndarray:
    """(T, S) matrix of P(state_t = s | tokens) via scaled forward-backward."""
    obs = model.check_tokens(tokens)
    alphas, scale, dead = _scaled_forward(model, obs)
    if dead is not None:
        raise ZeroProbabilitySequence(f"sequence has probability 0 (dies at t={dead})")
    b = model._B_by_token
    T = obs.size
    gamma = np.empty_like(alphas)
    beta = np.ones(model.num_states)
    gamma[-1] = alphas[-1]
    for t in range(T - 2, -1, -1):
        beta = model.A @ (b[obs[t + 1]] * beta) / scale[t + 1]
        gamma[t] = alphas[t] * beta
    return gamma / gamma.sum(axis=1, keepdims=True)


def posterior_entropy(marginals: np.ndarray) -> np.ndarray:
    """Per-step Shannon entropy (nats) of a (T, S) posterior matrix."""
    p = np.asarray(marginals, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    return terms.sum(axis=1)


# ---------------------------------------------------------------------------
# generation


def sample_sequence(model: HmmParams, length: int, seed: int) -> LabeledSequence:
    """Ancestral sample: state_0 ~ pi, state_t+1 ~ A[state_t], token_t ~ B[state_t]."""
    if not isinstance(model, HmmParams):
        raise InvalidModel("sample_sequence needs an HmmParams instance")
    if length < 1:
        raise EmptySequence("length must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.random((length, 2))
    init_t, trans_t, emit_t = _tables(model)
    states = np.empty(length, dtype=np.int64)
    tokens = np.empty(length, dtype=np.int64)
    states[0] = init_t.draw(0, u[0, 0])
    for t in range(length):
        if t:
            states[t] = trans_t.draw(states[t - 1], u[t, 0])
        tokens[t] = emit_t.draw(states[t], u[t, 1])
    return LabeledSequence(tokens, states)


def _tables(model: HmmParams):
    cached = model.__dict__.get("_sampling_tables")
    if cached is None:
        cached = (CategoricalTable(model.pi), CategoricalTable(model.A), CategoricalTable(model.B))
        model.__dict__["_sampling_tables"] = cached
    return cached
