"""End-to-end wiring: standardize, discretize, fit, and wrap models as predictors
operating directly on raw (T, D) feature arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baselines import GaussianNB, TokenClassifier, gnb_fit, token_classifier_fit, token_classify
from .hmm import HmmParams, LabeledSequence, fit_supervised, posterior_marginals, viterbi_decode
from .ingest import Dataset, StandardizationParams, apply_standardizer, fit_standardizer
from .vq import BinningScheme, Codebook, binning_fit, kmeans_fit


def labeled_sequences(data: Dataset, discretizer: Codebook | BinningScheme) -> list[LabeledSequence]:
    """Tokenize every session with ``discretizer``; features are standardized first
    when the discretizer carries a standardizer."""
    out = []
    for s in data.sessions:
        out.append(LabeledSequence(encode_features(discretizer, s.features), s.states(data.num_states)))
    return out


def encode_features(discretizer: Codebook | BinningScheme, features: np.ndarray) -> np.ndarray:
    x = features
    if discretizer.standardizer is not None:
        x = discretizer.standardizer.transform(x)
    return discretizer.encode_many(x)


@dataclass
class HmmPredictor:
    name: str
    discretizer: Codebook | BinningScheme
    model: HmmParams

    def predict(self, features: np.ndarray) -> np.ndarray:
        return viterbi_decode(self.model, encode_features(self.discretizer, features)).states

    def posteriors(self, features: np.ndarray) -> np.ndarray:
        return posterior_marginals(self.model, encode_features(self.discretizer, features))


@dataclass
class TokenClassifierPredictor:
    name: str
    discretizer: Codebook | BinningScheme
    model: TokenClassifier

    def predict(self, features: np.ndarray) -> np.ndarray:
        return token_classify(self.model, encode_features(self.discretizer, features))

    def posteriors(self, features: np.ndarray) -> np.ndarray:
        return self.model.posteriors(encode_features(self.discretizer, features))


@dataclass
class GnbPredictor:
    name: str
    standardizer: StandardizationParams
    model: GaussianNB

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.model.log_joint(self.standardizer.transform(features)).argmax(axis=1)

    def posteriors(self, features: np.ndarray) -> np.ndarray:
        return self.model.posteriors(self.standardizer.transform(features))


@dataclass
class FittedPipeline:
    standardizer: StandardizationParams
    codebook: Codebook
    binning: BinningScheme
    vq_hmm: HmmParams
    binned_hmm: HmmParams
    token_classifier: TokenClassifier
    gnb: GaussianNB

    def predictors(self) -> list:
        return [
            HmmPredictor("vq-hmm", self.codebook, self.vq_hmm),
            HmmPredictor("binned-hmm", self.binning, self.binned_hmm),
            TokenClassifierPredictor("vq-token-classifier", self.codebook, self.token_classifier),
            GnbPredictor("gaussian-nb", self.standardizer, self.gnb),
        ]


def fit_pipeline(train: Dataset, codebook_size: int = 32, bins: int = 3, alpha: float = 1.0,
                 seed: int = 0, max_iters: int = 300, tol: float = 1e-6) -> FittedPipeline:
    """Fit the VQ-HMM and every baseline on ``train``.

    One standardizer, fitted on ``train`` only, feeds all models.
    """
    std = fit_standardizer(train)
    z = std.transform(train.stacked_features())
    codebook = kmeans_fit(z, codebook_size, seed=seed, max_iters=max_iters, tol=tol)
    codebook.standardizer = std
    binning = binning_fit(z, bins)
    binning.standardizer = std
    S = train.num_states
    vq_seqs = labeled_sequences(train, codebook)
    bin_seqs = labeled_sequences(train, binning)
    return FittedPipeline(
        standardizer=std,
        codebook=codebook,
        binning=binning,
        vq_hmm=fit_supervised(vq_seqs, S, codebook.K, alpha),
        binned_hmm=fit_supervised(bin_seqs, S, binning.alphabet_size, alpha),
        token_classifier=token_classifier_fit(vq_seqs, S, codebook.K, alpha),
        gnb=gnb_fit(apply_standardizer(train, std)),
    )

