"""Soft-labelled ground truth: expert mask plus a gated dilation shell.

The expert mask ``T`` keeps label 1.  Voxels reached by dilating ``T`` whose
FLAIR intensity clears a gate get the soft label ``gamma``; together they
form the dilated region ``D``.  The region grows shell by shell (one
dilation step at a time) until the labelled volume reaches a global budget
of ``target_percent`` percent of ``|T|``.  Only gated voxels consume budget,
and the last shell is trimmed to hit the budget exactly, taking the
brightest voxels first and breaking ties by flat index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dicelosses import soft_target
from .morph3d import FACE6, Connectivity, dilate
from .volcore import MASK8, Volume3D, check_same_dims

DEFAULT_GAMMA = 0.3
DEFAULT_TARGET_PERCENT = 120
DEFAULT_FLAIR_PERCENTILE = 10.0


@dataclass(frozen=True)
class SoftMaskSpec:
    target_percent: int = DEFAULT_TARGET_PERCENT
    gamma: float = DEFAULT_GAMMA
    flair_percentile: float = DEFAULT_FLAIR_PERCENTILE
    conn: Connectivity = field(default=FACE6)

    def __post_init__(self):
        if isinstance(self.target_percent, bool) or int(self.target_percent) != self.target_percent:
            raise ValueError(f"target_percent must be an integer, got {self.target_percent!r}")
        object.__setattr__(self, "target_percent", int(self.target_percent))
        if self.target_percent < 100:
            raise ValueError(f"target_percent must be >= 100, got {self.target_percent}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must satisfy 0 <= gamma < 1, got {self.gamma}")
        if not 0.0 <= self.flair_percentile <= 100.0:
            raise ValueError(f"flair_percentile must lie in [0, 100], got {self.flair_percentile}")
        object.__setattr__(self, "conn", Connectivity.parse(self.conn))


@dataclass(frozen=True, eq=False)
class SoftMask:
    """``T + gamma * D`` together with its parts.

    ``volume`` holds the REAL64 values (1 on ``truth``, ``gamma`` on
    ``dilated``, 0 elsewhere).
    """

    volume: Volume3D
    truth: Volume3D
    dilated: Volume3D
    spec: SoftMaskSpec
    threshold: float

    @property
    def gamma(self) -> float:
        return self.spec.gamma

    @property
    def target(self) -> int:
        return target_size(self.truth.count(), self.spec.target_percent)


def target_size(n: int, target_percent: int) -> int:
    return n * int(target_percent) // 100


def flair_gate_threshold(flair: Volume3D, truth: Volume3D, percentile: float) -> float:
    """Nearest-rank percentile of FLAIR over the lesion voxels."""
    check_same_dims(flair, truth)
    if not 0.0 <= percentile <= 100.0:
        raise ValueError(f"percentile must lie in [0, 100], got {percentile}")
    values = np.sort(flair.data[truth.data.astype(bool)].astype(np.float64))
    n = values.size
    if n == 0:
        raise ValueError("no lesion voxels to calibrate threshold")
    rank = min(max(math.ceil(percentile / 100.0 * n), 1), n)
    return float(values[rank - 1])


def build_soft_mask(truth: Volume3D, flair: Volume3D, spec: SoftMaskSpec | None = None) -> SoftMask:
    spec = spec or SoftMaskSpec()
    check_same_dims(truth, flair)
    if truth.dtype != MASK8:
        raise TypeError("truth must be a MASK8 volume")
    t = truth.data.astype(bool)
    n = int(np.count_nonzero(t))
    if n == 0:
        raise ValueError("truth mask is empty")

    gate = flair_gate_threshold(flair, truth, spec.flair_percentile)
    intensity = flair.data.astype(np.float64)
    budget = target_size(n, spec.target_percent) - n
    selected = np.zeros(t.size, dtype=bool)

    reached = truth
    while budget > 0:
        grown = dilate(reached, spec.conn, 1)
        shell = grown.data.astype(bool) & ~reached.data.astype(bool)
        if not shell.any():
            break
        reached = grown
        eligible = np.flatnonzero(shell & (intensity >= gate))
        if eligible.size <= budget:
            selected[eligible] = True
            budget -= eligible.size
            continue
        # brightest first, then lowest flat index (eligible is already ascending)
        order = np.lexsort((eligible, -intensity[eligible]))
        selected[eligible[order[:budget]]] = True
        budget = 0

    dilated = Volume3D(truth.dims, MASK8, selected)
    volume = soft_target(truth, dilated, spec.gamma)
    return SoftMask(volume, truth, dilated, spec, gate)
