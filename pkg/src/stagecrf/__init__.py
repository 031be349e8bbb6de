"""Monotone sequence labeling for staged time-lapse processes.

Two learned heads score each frame (stage probabilities) and each pair of
consecutive frames (did the stage change); a linear-chain CRF with a hard
no-going-back transition mask ties them into one sequence model with exact
inference, likelihood training, and Viterbi decoding.
"""

from .crf import (
    CrfInference,
    PotentialTable,
    log_partition,
    marginals,
    monotone_mask,
    nll,
    nll_gradient,
    sequence_score,
    viterbi,
)
from .data import PRESETS, StageSequence, SynthConfig, generate, load_jsonl, save_jsonl, split
from .dp import BACKEND
from .errors import DataError, ForbiddenTransitionError, NoAllowedPathError, NumericError
from .metrics import EvalReport, aggregate_seeds, evaluate, format_report, format_table
from .potentials import (
    SMOOTH_KERNEL,
    TwoStreamModel,
    assemble_pairwise,
    init_model,
    load_checkpoint,
    predict_labels,
    save_checkpoint,
    smooth_unary,
    transition_probs,
    unary_potentials,
)
from .train import TrainConfig, TrainState, fit, image_loss, sample_batch, total_loss, transition_loss

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CrfInference",
    "DataError",
    "EvalReport",
    "ForbiddenTransitionError",
    "NoAllowedPathError",
    "NumericError",
    "PRESETS",
    "PotentialTable",
    "SMOOTH_KERNEL",
    "StageSequence",
    "SynthConfig",
    "TrainConfig",
    "TrainState",
    "TwoStreamModel",
    "aggregate_seeds",
    "assemble_pairwise",
    "evaluate",
    "fit",
    "format_report",
    "format_table",
    "generate",
    "image_loss",
    "init_model",
    "load_checkpoint",
    "load_jsonl",
    "log_partition",
    "marginals",
    "monotone_mask",
    "nll",
    "nll_gradient",
    "predict_labels",
    "sample_batch",
    "save_checkpoint",
    "save_jsonl",
    "sequence_score",
    "smooth_unary",
    "split",
    "total_loss",
    "transition_probs",
    "unary_potentials",
    "viterbi",
    "__version__",
]
