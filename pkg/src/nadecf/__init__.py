"""Recommender toolkit for implicit watch-count feedback.

Watch logs become per-item relative ratings, ratings become binary
likes with confidences, and two models learn to rank unwatched items:
an autoregressive neural model over like vectors and a weighted
alternating-least-squares factorization. Evaluation uses weighted mean
percentile ranking over per-user holdouts.
"""

from .errors import ModelFormatError, ParseError, ValidationError
from .evaluate import (
    RankResult,
    imf_scorer,
    mpr,
    nade_scorer,
    percentile_ranks,
    write_report,
    write_summary,
)
from .imf import ImfModel, imf_objective, imf_predict, imf_train
from .interactions import (
    FORMAT_COUNTS,
    FORMAT_EVENTS,
    InteractionTable,
    RelativeRatingTable,
    SplitPair,
    UserFeedback,
    all_feedback,
    build_feedback,
    holdout_split,
    ingest,
    read_counts,
    read_ratings,
    read_ratings_against,
    relative_ratings,
    user_feedback,
    write_counts,
    write_ratings,
    write_split,
)
from .kernels import BACKEND, PROB_EPS
from .model import (
    ACTIVATIONS,
    LossGrad,
    NadeGrads,
    NadeModel,
    Ordering,
    TrainConfig,
    conditional,
    full_nll,
    hidden_prefix,
    init_model,
    ordered_loss_grad,
    predict_all,
    sample_ordering,
    train,
)
from .serialize import load_model, save_model
from .synth import planted_affinity, synth_counts

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS",
    "BACKEND",
    "FORMAT_COUNTS",
    "FORMAT_EVENTS",
    "ImfModel",
    "InteractionTable",
    "LossGrad",
    "ModelFormatError",
    "NadeGrads",
    "NadeModel",
    "Ordering",
    "PROB_EPS",
    "ParseError",
    "RankResult",
    "RelativeRatingTable",
    "SplitPair",
    "TrainConfig",
    "UserFeedback",
    "ValidationError",
    "all_feedback",
    "build_feedback",
    "conditional",
    "full_nll",
    "hidden_prefix",
    "holdout_split",
    "imf_objective",
    "imf_predict",
    "imf_scorer",
    "imf_train",
    "ingest",
    "init_model",
    "load_model",
    "mpr",
    "nade_scorer",
    "ordered_loss_grad",
    "percentile_ranks",
    "planted_affinity",
    "predict_all",
    "read_counts",
    "read_ratings",
    "read_ratings_against",
    "relative_ratings",
    "sample_ordering",
    "save_model",
    "synth_counts",
    "train",
    "user_feedback",
    "write_counts",
    "write_ratings",
    "write_report",
    "write_split",
    "write_summary",
]
