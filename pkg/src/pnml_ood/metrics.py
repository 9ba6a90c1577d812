"""Threshold-free OOD detection metrics.

In-distribution samples are the positive class. By default a larger score
means "more OOD" (the regret convention): a sample is called positive (IND)
when its score is ``<= threshold``. Pass ``higher_is_ood=False`` for scorers
such as the max softmax probability; that is the same as negating every
score.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidInput

__all__ = ["DetectionReport", "auroc", "tnr_at_tpr", "detection_accuracy", "evaluate"]


def _scores(ind, ood, higher_is_ood):
    ind = np.asarray(ind, dtype=np.float64).ravel()
    ood = np.asarray(ood, dtype=np.float64).ravel()
    if ind.size == 0 or ood.size == 0:
        raise InvalidInput("both IND and OOD score lists must be non-empty")
    if not (np.all(np.isfinite(ind)) and np.all(np.isfinite(ood))):
        raise InvalidInput("scores must be finite")
    if not higher_is_ood:
        ind, ood = -ind, -ood
    return ind, ood


def auroc(ind, ood, higher_is_ood: bool = True) -> float:
    """Probability that a random OOD score exceeds a random IND score (ties 1/2)."""
    ind, ood = _scores(ind, ood, higher_is_ood)
    n_ind, n_ood = ind.size, ood.size
    ranks = rankdata(np.concatenate([ind, ood]))
    u = ranks[n_ind:].sum() - n_ood * (n_ood + 1) / 2.0
    return float(u / (n_ind * n_ood))


def tnr_at_tpr(ind, ood, tpr_target: float = 0.95, higher_is_ood: bool = True) -> tuple[float, float]:
    """TNR at the smallest threshold whose IND true-positive rate reaches the target.

    Returns ``(tnr, threshold)``. The threshold is reported in the original
    score units even when ``higher_is_ood`` is False.
    """
    if not (0.0 < tpr_target <= 1.0):
        raise InvalidInput(f"tpr_target must lie in (0, 1], got {tpr_target!r}")
    ind, ood = _scores(ind, ood, higher_is_ood)
    s = np.sort(ind)
    tpr = np.arange(1, s.size + 1) / s.size
    k = int(np.argmax(tpr >= tpr_target))
    tau = s[k]
    tnr = float(np.count_nonzero(ood > tau) / ood.size)
    return tnr, float(tau if higher_is_ood else -tau)


def detection_accuracy(ind, ood, higher_is_ood: bool = True) -> float:
    """Best accuracy over all thresholds, constant classifiers included."""
    ind, ood = _scores(ind, ood, higher_is_ood)
    levels = np.unique(np.concatenate([ind, ood]))
    ind_s, ood_s = np.sort(ind), np.sort(ood)
    # threshold just above each level, plus -inf (everything called OOD)
    ind_pos = np.searchsorted(ind_s, levels, side="right")
    ood_neg = ood.size - np.searchsorted(ood_s, levels, side="right")
    correct = np.concatenate([[ood.size], ind_pos + ood_neg])
    return float(correct.max() / (ind.size + ood.size))


@dataclass(frozen=True)
class DetectionReport:
    auroc: float
    tnr_at_tpr95: float
    detection_accuracy: float
    n_ind: int
    n_ood: int
    threshold_at_tpr95: float

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(ind, ood, higher_is_ood: bool = True, tpr_target: float = 0.95) -> DetectionReport:
    """All three metrics for one scorer."""
    tnr, tau = tnr_at_tpr(ind, ood, tpr_target, higher_is_ood)
    return DetectionReport(
        auroc=auroc(ind, ood, higher_is_ood),
        tnr_at_tpr95=tnr,
        detection_accuracy=detection_accuracy(ind, ood, higher_is_ood),
        n_ind=int(np.size(ind)),
        n_ood=int(np.size(ood)),
        threshold_at_tpr95=tau,
    )
