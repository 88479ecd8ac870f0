"""Vector-quantized hidden Markov models for sequential QoE prediction."""

__version__ = "0.1.0"

from .baselines import GaussianNB, TokenClassifier, gnb_classify, gnb_fit, token_classifier_fit, token_classify
from .evaluation import (
    ConfusionMatrix,
    LatencyReport,
    MetricsReport,
    compare_models,
    confusion,
    measure_latency,
    metrics,
)
from .hmm import (
    DecodedSequence,
    HmmParams,
    LabeledSequence,
    fit_supervised,
    forward_loglik,
    posterior_marginals,
    sample_sequence,
    viterbi_decode,
)
from .ingest import (
    ColumnSchema,
    Dataset,
    FeatureRecord,
    GeneratorSpec,
    SessionSeries,
    StandardizationParams,
    apply_standardizer,
    discretize_qoe,
    fit_standardizer,
    load_csv,
    split_sessions,
    synthesize_dataset,
)
from .pipeline import FittedPipeline, fit_pipeline
from .vq import BinningScheme, Codebook, binning_fit, kmeans_fit

__all__ = [name for name in dir() if not name.startswith("_")]
