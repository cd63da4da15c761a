"""Binary 3D morphology on the voxel lattice.

Voxels outside the volume count as background for both dilation and
erosion, so nothing wraps across the field-of-view edge.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .volcore import MASK8, Volume3D


class Connectivity(enum.Enum):
    FACE6 = 6
    FULL26 = 26

    @classmethod
    def parse(cls, value) -> "Connectivity":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            key = value.strip().upper()
            if key in cls.__members__:
                return cls[key]
            value = int(key)
        return cls(int(value))

    @property
    def structure(self) -> np.ndarray:
        """3x3x3 structuring element (center included)."""
        return ndimage.generate_binary_structure(3, 1 if self is Connectivity.FACE6 else 3)

    @property
    def offsets(self) -> list[tuple[int, int, int]]:
        """Neighbor offsets as (dz, dy, dx), center excluded."""
        s = self.structure
        return [
            (dz - 1, dy - 1, dx - 1)
            for dz, dy, dx in zip(*np.nonzero(s))
            if (dz, dy, dx) != (1, 1, 1)
        ]


FACE6 = Connectivity.FACE6
FULL26 = Connectivity.FULL26


def _require_mask(mask: Volume3D) -> None:
    if mask.dtype != MASK8:
        raise TypeError("morphology expects a MASK8 volume")


def _require_iterations(iterations: int) -> None:
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")


def dilate(mask: Volume3D, conn: Connectivity = FACE6, iterations: int = 1) -> Volume3D:
    """Grow ``mask`` by ``iterations`` neighborhood steps."""
    _require_mask(mask)
    _require_iterations(iterations)
    conn = Connectivity.parse(conn)
    out = ndimage.binary_dilation(
        mask.grid.astype(bool), structure=conn.structure, iterations=iterations, border_value=0
    )
    return Volume3D.from_grid(out)


def erode(mask: Volume3D, conn: Connectivity = FACE6, iterations: int = 1) -> Volume3D:
    """Keep voxels whose whole neighborhood is foreground, ``iterations`` times."""
    _require_mask(mask)
    _require_iterations(iterations)
    conn = Connectivity.parse(conn)
    out = ndimage.binary_erosion(
        mask.grid.astype(bool), structure=conn.structure, iterations=iterations, border_value=0
    )
    return Volume3D.from_grid(out)


@dataclass(frozen=True, eq=False)
class ComponentLabeling:
    """Component ids per voxel (flat, x-fastest) and the size of each id.

    ``sizes[k]`` is the voxel count of component ``k``; ``sizes[0]`` counts
    the background so that ids index the array directly.
    """

    labels: np.ndarray
    sizes: np.ndarray

    @property
    def count(self) -> int:
        return len(self.sizes) - 1


def connected_components(mask: Volume3D, conn: Connectivity = FACE6) -> ComponentLabeling:
    """Label connected foreground components.

    Ids are assigned 1..K in order of each component's lowest flat index.
    """
    _require_mask(mask)
    conn = Connectivity.parse(conn)
    raw, k = ndimage.label(mask.grid, structure=conn.structure)
    flat = raw.reshape(-1)
    if k == 0:
        return ComponentLabeling(np.zeros(flat.size, dtype=np.int64), np.array([flat.size], dtype=np.int64))

    # renumber by first encounter; does not rely on ndimage's id order
    ids, first = np.unique(flat, return_index=True)
    fg = ids > 0
    ids, first = ids[fg], first[fg]
    order = np.argsort(first, kind="stable")
    remap = np.zeros(k + 1, dtype=np.int64)
    remap[ids[order]] = np.arange(1, len(ids) + 1)
    labels = remap[flat]
    sizes = np.bincount(labels, minlength=len(ids) + 1).astype(np.int64)
    labels.setflags(write=False)
    sizes.setflags(write=False)
    return ComponentLabeling(labels, sizes)
