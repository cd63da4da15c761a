"""Overlap metrics for binary segmentations: Dice, precision and recall.

All values are on the [0, 1] scale.  Empty denominators resolve to 1 so an
all-negative case that is predicted all-negative scores perfectly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .dicelosses import confusion_counts
from .volcore import Volume3D


@dataclass(frozen=True)
class MetricsRow:
    dice: float
    precision: float
    recall: float
    case_id: str = ""

    def __post_init__(self):
        for name in ("dice", "precision", "recall"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def scaled(self) -> tuple[str, str, str]:
        """Metrics x100 at one decimal, the way results tables print them."""
        return tuple(f"{100.0 * v:.1f}" for v in (self.dice, self.precision, self.recall))


def dice_coefficient(a: Volume3D, b: Volume3D) -> float:
    c = confusion_counts(a, b)
    den = 2 * c.tp + c.fp + c.fn
    if den == 0:
        return 1.0
    return 2 * c.tp / den


def precision_recall(truth: Volume3D, pred: Volume3D) -> tuple[float, float]:
    c = confusion_counts(truth, pred)
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 1.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 1.0
    return precision, recall


def case_metrics(truth: Volume3D, pred: Volume3D, case_id: str = "") -> MetricsRow:
    precision, recall = precision_recall(truth, pred)
    return MetricsRow(dice_coefficient(truth, pred), precision, recall, case_id)


def aggregate_metrics(rows: Sequence[MetricsRow]) -> MetricsRow:
    """Unweighted mean over cases."""
    rows = list(rows)
    if not rows:
        raise ValueError("cannot aggregate an empty list of metrics")
    n = len(rows)
    # sorted so the mean does not depend on row order
    mean = lambda xs: sum(sorted(xs)) / n
    return MetricsRow(
        mean(r.dice for r in rows),
        mean(r.precision for r in rows),
        mean(r.recall for r in rows),
        "mean",
    )
