"""Deterministic synthetic lesion cases.

Each case holds a FLAIR-like intensity volume with bright spherical lesions,
the lesion mask of a generous rater (rater 1) and a stricter rater 2 whose
mask is rater 1's eroded by a voxel.  Lesion brightness is a Gaussian bump
around each center with width ``r / 2``, so a lesion is brightest at its
core and its boundary voxels sit barely above the background.

Randomness comes from splitmix64 and Box-Muller only, so a case is a pure
function of ``(seed, params)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .morph3d import FACE6, connected_components, erode
from .volcore import MASK8, REAL64, Dims3, Volume3D, load, save

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO_M53 = 2.0**-53


def splitmix64_next(state: int) -> tuple[int, int]:
    """Return ``(value, new_state)``."""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31), state


def _splitmix64_block(state: int, n: int) -> np.ndarray:
    """The next ``n`` outputs after ``state``, vectorized."""
    with np.errstate(over="ignore"):
        k = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(state) + k * np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


class Rng64:
    """splitmix64 stream with helpers for doubles."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        value, self.state = splitmix64_next(self.state)
        return value

    def next_double(self) -> float:
        """Uniform on [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * _TWO_M53

    def u64_block(self, n: int) -> np.ndarray:
        out = _splitmix64_block(self.state, n)
        self.state = (self.state + n * GOLDEN_GAMMA) & MASK64
        return out

    def double_block(self, n: int) -> np.ndarray:
        return (self.u64_block(n) >> np.uint64(11)).astype(np.float64) * _TWO_M53

    def gaussian_block(self, n: int) -> np.ndarray:
        """``n`` standard normals; pairs come from consecutive uniform pairs."""
        pairs = (n + 1) // 2
        u = self.double_block(2 * pairs).reshape(pairs, 2)
        z1, z2 = _box_muller(1.0 - u[:, 0], u[:, 1])
        return np.column_stack((z1, z2)).reshape(-1)[:n]


def _box_muller(u1, u2):
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    return radius * np.cos(angle), radius * np.sin(angle)


def gaussian_pair(u1: float, u2: float) -> tuple[float, float]:
    """Box-Muller transform of ``u1`` in (0, 1] and ``u2`` in [0, 1)."""
    if not 0.0 < u1 <= 1.0:
        raise ValueError(f"u1 must lie in (0, 1], got {u1}")
    radius = math.sqrt(-2.0 * math.log(u1))
    angle = 2.0 * math.pi * u2
    return radius * math.cos(angle), radius * math.sin(angle)


@dataclass(frozen=True)
class SynthParams:
    dims: Dims3 = field(default_factory=lambda: Dims3(32, 32, 32))
    lesion_count: int = 3
    radius_range: tuple[float, float] = (2.0, 5.0)
    base_intensity: float = 100.0
    contrast: float = 80.0
    noise_sigma: float = 5.0
    rater2_erosion: int = 1

    def __post_init__(self):
        dims = self.dims if isinstance(self.dims, Dims3) else Dims3(*self.dims)
        object.__setattr__(self, "dims", dims)
        r_min, r_max = (float(r) for r in self.radius_range)
        object.__setattr__(self, "radius_range", (r_min, r_max))
        if self.lesion_count < 1:
            raise ValueError("lesion_count must be >= 1")
        if not 0.0 < r_min <= r_max:
            raise ValueError(f"invalid radius_range {self.radius_range}")
        if not r_max < min(dims.nx, dims.ny, dims.nz) / 2:
            raise ValueError(f"r_max={r_max} must be below half the smallest dimension")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.rater2_erosion < 0:
            raise ValueError("rater2_erosion must be >= 0")


@dataclass(frozen=True, eq=False)
class SynthCase:
    intensity: Volume3D
    truth_r1: Volume3D
    truth_r2: Volume3D
    seed: int

    def __eq__(self, other):
        if not isinstance(other, SynthCase):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.intensity == other.intensity
            and self.truth_r1 == other.truth_r1
            and self.truth_r2 == other.truth_r2
        )

    __hash__ = None


def _strict_rater(truth: Volume3D, iterations: int) -> Volume3D:
    """Erode, then restore any lesion the erosion would wipe out."""
    if iterations == 0:
        return truth
    eroded = erode(truth, FACE6, iterations).data.astype(bool)
    cc = connected_components(truth, FACE6)
    survived = np.zeros(cc.count + 1, dtype=bool)
    survived[cc.labels[eroded]] = True
    lost = ~survived[cc.labels] & (cc.labels > 0)
    return Volume3D(truth.dims, MASK8, eroded | lost)


def generate_case(seed: int, params: SynthParams | None = None) -> SynthCase:
    p = params or SynthParams()
    dims = p.dims
    rng = Rng64(seed)

    r_min, r_max = p.radius_range
    margin = int(math.floor(r_max))
    centers = []
    for _ in range(p.lesion_count):
        c = tuple(margin + int(rng.next_double() * (n - 2 * margin)) for n in dims)
        centers.append(c)  # (x, y, z)
    radii = [r_min + rng.next_double() * (r_max - r_min) for _ in range(p.lesion_count)]

    z, y, x = np.meshgrid(
        np.arange(dims.nz, dtype=np.float64),
        np.arange(dims.ny, dtype=np.float64),
        np.arange(dims.nx, dtype=np.float64),
        indexing="ij",
    )
    inside = np.zeros(dims.shape, dtype=bool)
    bump = np.zeros(dims.shape, dtype=np.float64)
    # overlapping lesions: the brightest bump wins
    for (cx, cy, cz), r in zip(centers, radii):
        dist = np.sqrt((x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2)
        inside |= dist <= r
        sigma = r / 2.0
        bump = np.maximum(bump, np.exp(-(dist**2) / (2.0 * sigma * sigma)))

    noise = rng.gaussian_block(dims.size).reshape(dims.shape)
    intensity = p.base_intensity + p.contrast * bump + p.noise_sigma * noise

    truth_r1 = Volume3D.from_grid(inside)
    truth_r2 = _strict_rater(truth_r1, p.rater2_erosion)
    return SynthCase(Volume3D.from_grid(intensity, REAL64), truth_r1, truth_r2, int(seed))


# -- dataset directories -------------------------------------------------------

MANIFEST = "manifest.csv"
MANIFEST_HEADER = ("case_id", "seed", "lesion_voxels_r1", "lesion_voxels_r2")


def case_id_for(seed: int) -> str:
    return f"case{seed}"


def write_dataset(out_dir, seeds, params: SynthParams | None = None) -> list[str]:
    """Write one case per seed plus ``manifest.csv``; return the case ids."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for seed in seeds:
        case = generate_case(seed, params)
        cid = case_id_for(seed)
        save(case.intensity, out_dir / f"{cid}_flair.svol")
        save(case.truth_r1, out_dir / f"{cid}_r1.svol")
        save(case.truth_r2, out_dir / f"{cid}_r2.svol")
        rows.append((cid, seed, case.truth_r1.count(), case.truth_r2.count()))
    with open(out_dir / MANIFEST, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        writer.writerows(rows)
    return [r[0] for r in rows]


@dataclass(frozen=True, eq=False)
class DatasetCase:
    case_id: str
    seed: int
    intensity: Volume3D
    truth_r1: Volume3D
    truth_r2: Volume3D


def read_dataset(data_dir, seeds=None) -> list[DatasetCase]:
    """Load the cases listed in ``manifest.csv``, optionally only ``seeds``."""
    data_dir = Path(data_dir)
    with open(data_dir / MANIFEST, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != MANIFEST_HEADER:
            raise ValueError(f"{data_dir / MANIFEST}: unexpected header {header}")
        entries = [(row[0], int(row[1])) for row in reader if row]
    if seeds is not None:
        wanted = set(int(s) for s in seeds)
        missing = wanted - {seed for _, seed in entries}
        if missing:
            raise FileNotFoundError(f"seeds {sorted(missing)} not in {data_dir / MANIFEST}")
        entries = [e for e in entries if e[1] in wanted]
    cases = []
    for cid, seed in entries:
        cases.append(
            DatasetCase(
                cid,
                seed,
                load(data_dir / f"{cid}_flair.svol"),
                load(data_dir / f"{cid}_r1.svol"),
                load(data_dir / f"{cid}_r2.svol"),
            )
        )
    return cases
