"""Dice loss, the effective soft Dice loss, and its gradient.

With ground truth ``S`` (binary, or soft ``T + gamma * D``) and prediction
``P``::

    loss = -sum(S * P) / (0.5 * sum(P) + 0.5 * sum(S))

No smoothing epsilon is used.  When both ``S`` and ``P`` are empty the loss
is defined as -1 (perfect agreement).

Reductions run sequentially in ascending flat-index order by default, which
makes every value bit-reproducible.  ``summation="pairwise"`` switches to
numpy's pairwise reduction (faster, more accurate, but a different rounding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .volcore import MASK8, REAL64, Volume3D, check_same_dims


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class LossValue:
    value: float
    numerator: float
    denominator: float

    def __float__(self):
        return self.value


def seqsum(x: np.ndarray) -> float:
    """Left-to-right float64 sum."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size == 0:
        return 0.0
    return float(np.cumsum(x)[-1])


def _reduce(x: np.ndarray, summation: str) -> float:
    if summation == "sequential":
        return seqsum(x)
    if summation == "pairwise":
        return float(np.sum(x, dtype=np.float64))
    raise ValueError(f"unknown summation mode {summation!r}")


def confusion_counts(truth: Volume3D, pred: Volume3D) -> ConfusionCounts:
    check_same_dims(truth, pred)
    if truth.dtype != MASK8 or pred.dtype != MASK8:
        raise TypeError("confusion counts need two MASK8 volumes")
    t = truth.data.astype(bool)
    p = pred.data.astype(bool)
    tp = int(np.count_nonzero(t & p))
    fp = int(np.count_nonzero(~t & p))
    fn = int(np.count_nonzero(t & ~p))
    return ConfusionCounts(tp, fp, fn, t.size - tp - fp - fn)


def dice_loss_from_counts(counts: ConfusionCounts) -> float:
    """``-TP / (TP + 0.5 FP + 0.5 FN)``, -1 when all three are zero."""
    den = counts.tp + 0.5 * counts.fp + 0.5 * counts.fn
    if den == 0:
        return -1.0
    return -counts.tp / den


def _loss_from_arrays(s: np.ndarray, p: np.ndarray, summation: str) -> LossValue:
    num = _reduce(s * p, summation)
    den = 0.5 * _reduce(p, summation) + 0.5 * _reduce(s, summation)
    if den == 0.0:
        return LossValue(-1.0, num, den)
    return LossValue(-num / den, num, den)


def _values(vol: Volume3D) -> np.ndarray:
    return vol.data.astype(np.float64) if vol.dtype == MASK8 else vol.data


def dice_loss(truth: Volume3D, pred: Volume3D, summation: str = "sequential") -> LossValue:
    """Dice loss of probabilities ``pred`` against a binary or soft ``truth``."""
    check_same_dims(truth, pred)
    s = _values(truth)
    p = _values(pred)
    if not np.all((p >= 0.0) & (p <= 1.0)):
        raise ValueError("pred values must lie in [0, 1]")
    if not np.all((s >= 0.0) & (s <= 1.0)):
        raise ValueError("truth values must lie in [0, 1]")
    return _loss_from_arrays(s, p, summation)


def soft_target(truth: Volume3D, dilated: Volume3D, gamma: float) -> Volume3D:
    """``T + gamma * D`` as a REAL64 volume."""
    check_same_dims(truth, dilated)
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must satisfy 0 <= gamma < 1, got {gamma}")
    t = truth.data.astype(bool)
    d = dilated.data.astype(bool)
    if np.any(t & d):
        raise ValueError("T and D must be disjoint")
    values = t.astype(np.float64) + gamma * d.astype(np.float64)
    return Volume3D(truth.dims, REAL64, values)


def soft_dice_loss(
    truth: Volume3D,
    dilated: Volume3D,
    gamma: float,
    pred: Volume3D,
    summation: str = "sequential",
) -> LossValue:
    """Effective soft Dice loss: Dice loss against ``T + gamma * D``."""
    return dice_loss(soft_target(truth, dilated, gamma), pred, summation)


def dice_loss_gradient(truth_soft: Volume3D, pred: Volume3D) -> Volume3D:
    """Per-voxel derivative of :func:`dice_loss` with respect to ``pred``.

    With ``N = sum(S * P)`` and ``Dn = 0.5 sum(P) + 0.5 sum(S)``::

        dL/dP_j = -(S_j * Dn - 0.5 * N) / Dn**2
    """
    check_same_dims(truth_soft, pred)
    grad = loss_gradient_array(_values(truth_soft), _values(pred))
    return Volume3D(pred.dims, REAL64, grad)


def loss_and_gradient_array(s: np.ndarray, p: np.ndarray) -> tuple[float, np.ndarray]:
    """Loss value and gradient for flat float64 arrays."""
    lv = _loss_from_arrays(s, p, "sequential")
    if lv.denominator == 0.0:
        raise ValueError("gradient undefined for empty truth and prediction")
    dn = lv.denominator
    return lv.value, -(s * dn - 0.5 * lv.numerator) / (dn * dn)


def loss_gradient_array(s: np.ndarray, p: np.ndarray) -> np.ndarray:
    return loss_and_gradient_array(s, p)[1]


__all__ = [
    "ConfusionCounts",
    "LossValue",
    "confusion_counts",
    "dice_loss",
    "dice_loss_from_counts",
    "dice_loss_gradient",
    "loss_and_gradient_array",
    "loss_gradient_array",
    "seqsum",
    "soft_dice_loss",
    "soft_target",
]
