"""Dense 3D voxel volumes and the SVOL file format.

Volumes are stored as a flat payload in x-fastest order, so the voxel at
``(x, y, z)`` lives at ``x + nx * (y + ny * z)``.  The same data viewed as a
C-ordered numpy array has shape ``(nz, ny, nx)``; :attr:`Volume3D.grid`
returns that view.
"""

from __future__ import annotations

import io
import sys
from dataclasses import dataclass
from typing import BinaryIO, Union

import numpy as np

MASK8 = "u8"
REAL64 = "f64"

_MAGIC = b"SVOL 1"
_PAYLOAD_DTYPES = {
    "u8": np.dtype("u1"),
    "f64": np.dtype("<f8"),
    "f32": np.dtype("<f4"),
}


class SvolError(ValueError):
    """Raised when an SVOL stream cannot be parsed."""


@dataclass(frozen=True)
class Dims3:
    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
            object.__setattr__(self, name, int(value))
        if self.nx * self.ny * self.nz > sys.maxsize:
            raise OverflowError("voxel count does not fit in the address space")

    @property
    def size(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def shape(self) -> tuple[int, int, int]:
        """numpy shape of the (z, y, x) grid view."""
        return (self.nz, self.ny, self.nx)

    def __iter__(self):
        return iter((self.nx, self.ny, self.nz))


def linear_index(x: int, y: int, z: int, dims: Dims3) -> int:
    """Flat index of voxel ``(x, y, z)``."""
    if not (0 <= x < dims.nx and 0 <= y < dims.ny and 0 <= z < dims.nz):
        raise IndexError(f"voxel ({x}, {y}, {z}) outside dims {tuple(dims)}")
    return x + dims.nx * (y + dims.ny * z)


def unravel_index(index: int, dims: Dims3) -> tuple[int, int, int]:
    """Inverse of :func:`linear_index`."""
    if not 0 <= index < dims.size:
        raise IndexError(f"flat index {index} outside [0, {dims.size})")
    x = index % dims.nx
    y = (index // dims.nx) % dims.ny
    z = index // (dims.nx * dims.ny)
    return x, y, z


@dataclass(frozen=True, eq=False)
class Volume3D:
    """Immutable 3D volume with a flat x-fastest payload.

    ``dtype`` is ``"u8"`` for binary masks (values 0/1 only) or ``"f64"`` for
    real-valued volumes.  Use :meth:`mask`, :meth:`real` or :meth:`from_grid`
    rather than the raw constructor when starting from arbitrary arrays.
    """

    dims: Dims3
    dtype: str
    data: np.ndarray

    def __post_init__(self):
        if self.dtype not in (MASK8, REAL64):
            raise ValueError(f"unknown volume dtype {self.dtype!r}")
        raw = np.asarray(self.data).reshape(-1)
        if raw.size != self.dims.size:
            raise ValueError(
                f"payload has {raw.size} values, dims {tuple(self.dims)} need {self.dims.size}"
            )
        if self.dtype == MASK8:
            if raw.dtype != bool and not np.all((raw == 0) | (raw == 1)):
                raise ValueError("MASK8 payload may only contain 0 or 1")
            data = np.ascontiguousarray(raw, dtype=np.uint8)
        else:
            data = np.ascontiguousarray(raw, dtype=np.float64)
        if data is self.data or np.shares_memory(data, self.data):
            data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_grid(cls, grid, dtype: str | None = None) -> "Volume3D":
        """Build from a ``(nz, ny, nx)`` array.  Booleans become masks."""
        grid = np.asarray(grid)
        if grid.ndim != 3:
            raise ValueError(f"expected a 3D (z, y, x) array, got shape {grid.shape}")
        if dtype is None:
            dtype = MASK8 if grid.dtype == bool else REAL64
        nz, ny, nx = grid.shape
        return cls(Dims3(nx, ny, nz), dtype, grid.reshape(-1))

    @classmethod
    def mask(cls, data, dims: Dims3 | tuple | None = None) -> "Volume3D":
        data = np.asarray(data)
        if dims is None:
            return cls.from_grid(data.astype(bool))
        dims = dims if isinstance(dims, Dims3) else Dims3(*dims)
        return cls(dims, MASK8, data.reshape(-1).astype(bool))

    @classmethod
    def real(cls, data, dims: Dims3 | tuple | None = None) -> "Volume3D":
        data = np.asarray(data, dtype=np.float64)
        if dims is None:
            return cls.from_grid(data, REAL64)
        dims = dims if isinstance(dims, Dims3) else Dims3(*dims)
        return cls(dims, REAL64, data)

    @classmethod
    def zeros(cls, dims: Dims3, dtype: str = MASK8) -> "Volume3D":
        return cls(dims, dtype, np.zeros(dims.size))

    @property
    def grid(self) -> np.ndarray:
        """Read-only ``(nz, ny, nx)`` view of the payload."""
        return self.data.reshape(self.dims.shape)

    @property
    def is_mask(self) -> bool:
        return self.dtype == MASK8

    def as_bool(self) -> np.ndarray:
        return self.data.astype(bool)

    def as_real(self) -> "Volume3D":
        if self.dtype == REAL64:
            return self
        return Volume3D(self.dims, REAL64, self.data.astype(np.float64))

    def count(self) -> int:
        """Number of nonzero voxels."""
        return int(np.count_nonzero(self.data))

    def __getitem__(self, xyz) -> float | int:
        x, y, z = xyz
        return self.data[linear_index(x, y, z, self.dims)].item()

    def __eq__(self, other):
        if not isinstance(other, Volume3D):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.dtype == other.dtype
            and self.data.tobytes() == other.data.tobytes()
        )

    __hash__ = None

    def __repr__(self):
        return f"{type(self).__name__}(dims={tuple(self.dims)}, dtype={self.dtype!r})"


class ProbabilityMap(Volume3D):
    """REAL64 volume whose values all lie in [0, 1]."""

    def __post_init__(self):
        if self.dtype != REAL64:
            raise ValueError("a probability map must be REAL64")
        super().__post_init__()
        data = self.data
        if not np.all((data >= 0.0) & (data <= 1.0)):
            raise ValueError("probability map values must lie in [0, 1]")

    @classmethod
    def from_volume(cls, vol: Volume3D) -> "ProbabilityMap":
        if isinstance(vol, ProbabilityMap):
            return vol
        return cls(vol.dims, REAL64, vol.data.astype(np.float64))


def check_same_dims(*vols: Volume3D) -> Dims3:
    dims = vols[0].dims
    for v in vols[1:]:
        if v.dims != dims:
            raise ValueError(f"dims mismatch: {tuple(dims)} vs {tuple(v.dims)}")
    return dims


# -- SVOL ------------------------------------------------------------------


def _read_line(buf: bytes, pos: int, lineno: int) -> tuple[str, int]:
    end = buf.find(b"\n", pos)
    if end < 0:
        raise SvolError(f"header line {lineno}: missing newline (truncated header)")
    try:
        text = buf[pos:end].decode("ascii")
    except UnicodeDecodeError:
        raise SvolError(f"header line {lineno}: not ASCII") from None
    return text, end + 1


def read_svol(stream: Union[bytes, bytearray, BinaryIO]) -> Volume3D:
    """Parse an SVOL byte string or binary file object."""
    buf = bytes(stream) if isinstance(stream, (bytes, bytearray, memoryview)) else stream.read()

    line, pos = _read_line(buf, 0, 1)
    if line.encode("ascii") != _MAGIC:
        raise SvolError(f"header line 1: bad magic {line!r}")

    line, pos = _read_line(buf, pos, 2)
    parts = line.split(" ")
    if len(parts) != 4 or parts[0] != "dim":
        raise SvolError(f"header line 2: expected 'dim <nx> <ny> <nz>', got {line!r}")
    try:
        nx, ny, nz = (int(p) for p in parts[1:])
        if not all(p.isdigit() for p in parts[1:]):
            raise ValueError
        dims = Dims3(nx, ny, nz)
    except (ValueError, OverflowError):
        raise SvolError(f"header line 2: invalid dimensions {line!r}") from None

    line, pos = _read_line(buf, pos, 3)
    parts = line.split(" ")
    if len(parts) != 2 or parts[0] != "dtype":
        raise SvolError(f"header line 3: expected 'dtype <token>', got {line!r}")
    token = parts[1]
    if token not in _PAYLOAD_DTYPES:
        raise SvolError(f"header line 3: unknown dtype token {token!r}")

    line, pos = _read_line(buf, pos, 4)
    if line != "end":
        raise SvolError(f"header line 4: expected 'end', got {line!r}")

    item = _PAYLOAD_DTYPES[token]
    need = dims.size * item.itemsize
    have = len(buf) - pos
    if have < need:
        raise SvolError(f"truncated payload at byte offset {len(buf)}: need {need} bytes, have {have}")
    if have > need:
        raise SvolError(f"trailing data at byte offset {pos + need}: {have - need} extra bytes")

    payload = np.frombuffer(buf, dtype=item, count=dims.size, offset=pos)
    if token == "u8":
        bad = np.flatnonzero(payload > 1)
        if bad.size:
            raise SvolError(
                f"invalid mask value {int(payload[bad[0]])} at byte offset {pos + int(bad[0])}"
            )
        return Volume3D(dims, MASK8, payload)
    return Volume3D(dims, REAL64, payload.astype(np.float64))


def write_svol(vol: Volume3D, stream: BinaryIO | None = None) -> bytes:
    """Encode ``vol`` as canonical SVOL.  Also writes to ``stream`` if given."""
    d = vol.dims
    header = f"SVOL 1\ndim {d.nx} {d.ny} {d.nz}\ndtype {vol.dtype}\nend\n".encode("ascii")
    if vol.dtype == MASK8:
        payload = vol.data.astype("u1").tobytes()
    else:
        payload = vol.data.astype("<f8").tobytes()
    out = header + payload
    if stream is not None:
        stream.write(out)
    return out


def load(path) -> Volume3D:
    with open(path, "rb") as fh:
        return read_svol(fh)


def save(vol: Volume3D, path) -> None:
    with open(path, "wb") as fh:
        write_svol(vol, fh)


def roundtrip(vol: Volume3D) -> Volume3D:
    return read_svol(io.BytesIO(write_svol(vol)))
