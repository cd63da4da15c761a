"""Turn probability maps into final lesion masks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .morph3d import FACE6, Connectivity, connected_components
from .segmetrics import dice_coefficient
from .volcore import MASK8, Volume3D

#: Components need strictly more than 18 voxels to count as lesions.
DEFAULT_MIN_COMPONENT = 19

DEFAULT_GRID: tuple[float, ...] = tuple(k / 20 for k in range(1, 20))


@dataclass(frozen=True)
class PostprocSpec:
    threshold: float | None = 0.5
    min_component_size: int = DEFAULT_MIN_COMPONENT
    conn: Connectivity = field(default=FACE6)

    def __post_init__(self):
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.min_component_size < 1:
            raise ValueError("min_component_size must be >= 1")
        object.__setattr__(self, "conn", Connectivity.parse(self.conn))


def binarize(prob: Volume3D, threshold: float) -> Volume3D:
    """1 where ``prob >= threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return Volume3D(prob.dims, MASK8, prob.data >= threshold)


def filter_small_components(mask: Volume3D, min_size: int, conn=FACE6) -> Volume3D:
    """Drop every connected component with fewer than ``min_size`` voxels."""
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    if min_size == 1:
        return mask
    cc = connected_components(mask, conn)
    keep = cc.sizes >= min_size
    keep[0] = False
    return Volume3D(mask.dims, MASK8, keep[cc.labels])


def postprocess(prob: Volume3D, spec: PostprocSpec) -> Volume3D:
    if spec.threshold is None:
        raise ValueError("PostprocSpec has no threshold; calibrate one first")
    return filter_small_components(binarize(prob, spec.threshold), spec.min_component_size, spec.conn)


def threshold_scores(
    cases: Sequence[tuple[Volume3D, Volume3D]], grid: Sequence[float] = DEFAULT_GRID
) -> list[float]:
    """Mean Dice over ``cases`` for each threshold in ``grid``."""
    cases = list(cases)
    if not cases:
        raise ValueError("no cases to calibrate on")
    if len(grid) == 0:
        raise ValueError("empty threshold grid")
    scores = []
    for t in grid:
        total = 0.0
        for truth, prob in cases:
            total += dice_coefficient(truth, binarize(prob, t))
        scores.append(total / len(cases))
    return scores


def optimal_threshold(
    cases: Sequence[tuple[Volume3D, Volume3D]], grid: Sequence[float] = DEFAULT_GRID
) -> float:
    """Grid threshold with the best mean Dice; the smallest wins ties."""
    grid = list(grid)
    scores = threshold_scores(cases, grid)
    best = max(scores)
    return min(t for t, s in zip(grid, scores) if s == best)
