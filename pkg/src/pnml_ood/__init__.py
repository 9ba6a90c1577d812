"""Single-layer pNML regret as an out-of-distribution score for embeddings."""

from .datasets import load_iris_2class
from .erm import LinearModel, fit, genie_refit_oracle, one_hot_targets, predict, recursive_update, softmax
from .errors import DegenerateTraining, FormatError, InvalidInput, NumericalFailure, PnmlError
from .linalg_core import EigenBasis, EmbeddingMatrix, PnmlStats, build_stats, decompose, project_orth
from .metrics import DetectionReport, auroc, detection_accuracy, evaluate, tnr_at_tpr
from .pipeline import ScoredBatch, baseline_score, l2_normalize, prepare, regret_map, score_batch, spectrum_report
from .pnml_core import RegretScore, genie_prob, pnml_posterior, regret, response_curve, x_top_g

__version__ = "0.1.0"
