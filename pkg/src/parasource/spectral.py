"""Uniform grids on n-dimensional boxes and a quadrature-scaled DFT pair.

The forward transform approximates

    f^(xi) = (2 pi)^(-n/2) * integral exp(-i xi.x) f(x) dx

by the rectangle rule on the grid, so that

    F[m] = (prod_k dx_k) (2 pi)^(-n/2) sum_x exp(-i xi_m . x) f(x).

The sum is evaluated with the FFT; the offset of the box origin enters as a
phase factor.  The last sample of every axis is treated as periodically
identified with the first (the grids include both end points).

Two units are supported for the frequency variable that the PDE symbol and
the filters see:

* ``angular`` -- xi = 2 pi m / (N dx), the continuum Fourier convention;
* ``cycles``  -- xi = m / (N dx), i.e. cycles per unit length.

The transform itself is unit independent; only the frequency values handed
to symbols, filters and Sobolev weights change.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "FrequencyUnit",
    "Grid",
    "FreqGrid",
    "Field",
    "SpectralField",
    "NonRealSpectrumError",
    "freq_grid",
    "dft_forward",
    "dft_inverse",
]

# relative imaginary residue above which an inverse transform is not accepted as real
IMAG_RESIDUE_RTOL = 1e-6


class FrequencyUnit(str, enum.Enum):
    ANGULAR = "angular"
    CYCLES = "cycles"


class NonRealSpectrumError(ValueError):
    """Inverse transform left an imaginary part too large to discard."""


@dataclass(frozen=True)
class Grid:
    """Uniform lattice over the box prod_k [a_k, b_k], end points included.

    ``extent`` holds one ``(a_k, b_k)`` pair per axis and ``points`` the
    per-axis sample counts N_k (>= 3).
    """

    extent: tuple[tuple[float, float], ...]
    points: tuple[int, ...]
    freq_unit: FrequencyUnit = FrequencyUnit.ANGULAR

    def __post_init__(self):
        extent = tuple((float(a), float(b)) for a, b in self.extent)
        points = tuple(int(n) for n in self.points)
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "freq_unit", FrequencyUnit(self.freq_unit))
        if not 1 <= len(points) <= 3:
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {len(points)}")
        if len(extent) != len(points):
            raise ValueError("extent and points must have one entry per axis")
        for k, ((a, b), n) in enumerate(zip(extent, points)):
            if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
                raise ValueError(f"axis {k}: need finite a < b, got [{a}, {b}]")
            if n < 3:
                raise ValueError(f"axis {k}: need at least 3 points, got {n}")

    @classmethod
    def cube(cls, a: float, b: float, n_points: int, dim: int = 1,
             freq_unit: FrequencyUnit | str = FrequencyUnit.ANGULAR) -> "Grid":
        return cls(((a, b),) * dim, (n_points,) * dim, FrequencyUnit(freq_unit))

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return math.prod(self.points)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / (n - 1) for (a, b), n in zip(self.extent, self.points))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def volume(self) -> float:
        return math.prod(b - a for a, b in self.extent)

    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(a, b, n) for (a, b), n in zip(self.extent, self.points))

    def mesh(self, sparse: bool = True) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes(), indexing="ij", sparse=sparse))

    def with_unit(self, unit: FrequencyUnit | str) -> "Grid":
        return Grid(self.extent, self.points, FrequencyUnit(unit))

    def same_lattice(self, other: "Grid") -> bool:
        """True when both grids sample the same points (frequency unit ignored)."""
        return self.extent == other.extent and self.points == other.points


@dataclass(frozen=True)
class FreqGrid:
    """Per-axis frequencies in standard DFT order (zero first, then positive, then negative)."""

    freqs: tuple[np.ndarray, ...]
    unit: FrequencyUnit
    # angular lattice spacing 2 pi / (N dx) per axis; the Parseval measure
    angular_step: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.freqs)

    def components(self) -> tuple[np.ndarray, ...]:
        """Sparse broadcastable per-axis frequency arrays."""
        return tuple(np.meshgrid(*self.freqs, indexing="ij", sparse=True))

    def norm2(self) -> np.ndarray:
        """||xi||^2 on the full lattice."""
        comps = self.components()
        out = comps[0] ** 2
        for c in comps[1:]:
            out = out + c ** 2
        return np.broadcast_to(out, tuple(len(f) for f in self.freqs))

    def dot(self, vec: Sequence[float]) -> np.ndarray:
        """vec . xi on the full lattice."""
        if len(vec) != self.dim:
            raise ValueError(f"vector length {len(vec)} != frequency dimension {self.dim}")
        comps = self.components()
        out = float(vec[0]) * comps[0]
        for v, c in zip(vec[1:], comps[1:]):
            out = out + float(v) * c
        return np.broadcast_to(out, tuple(len(f) for f in self.freqs))

    @property
    def measure(self) -> float:
        """Volume of one dual-lattice cell in angular units."""
        return math.prod(self.angular_step)


def freq_grid(grid: Grid) -> FreqGrid:
    """Dual frequency lattice of ``grid`` in the grid's frequency unit."""
    freqs = []
    steps = []
    for n, dx in zip(grid.points, grid.spacing):
        ang = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
        if grid.freq_unit is FrequencyUnit.CYCLES:
            freqs.append(np.fft.fftfreq(n, d=dx))
        else:
            freqs.append(ang)
        steps.append(2.0 * np.pi / (n * dx))
    return FreqGrid(tuple(freqs), grid.freq_unit, tuple(steps))


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples on a grid, stored with shape ``grid.shape``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.size:
            raise ValueError(f"field has {v.size} values, grid has {self.grid.size} points")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other: "Field") -> "Field":
        _check_same(self.grid, other.grid)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same(self.grid, other.grid)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Complex coefficients on the dual lattice of ``grid`` (DFT ordering)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.size != self.grid.size:
            raise ValueError(f"spectrum has {v.size} values, grid has {self.grid.size} points")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("spectral values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def multiply(self, gain: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, self.values * gain)


def _check_same(g1: Grid, g2: Grid) -> None:
    if not g1.same_lattice(g2):
        raise ValueError("fields live on different grids")


def _origin_phase(grid: Grid) -> np.ndarray:
    """exp(-i xi_ang . a) for the box origin a, broadcast over the lattice."""
    phase = None
    for k, ((a, _), n, dx) in enumerate(zip(grid.extent, grid.points, grid.spacing)):
        ang = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
        shape = [1] * grid.dim
        shape[k] = n
        ph = np.exp(-1j * ang * a).reshape(shape)
        phase = ph if phase is None else phase * ph
    return phase


def _scale(grid: Grid) -> float:
    return grid.cell_volume * (2.0 * np.pi) ** (-grid.dim / 2.0)


def dft_forward(f: Field) -> SpectralField:
    """Quadrature approximation of the n-dimensional Fourier transform."""
    if not np.all(np.isfinite(f.values)):
        raise ValueError("cannot transform non-finite values")
    spec = np.fft.fftn(f.values) * _origin_phase(f.grid)
    spec *= _scale(f.grid)
    return SpectralField(f.grid, spec)


def dft_inverse(F: SpectralField, *, return_residue: bool = False):
    """Inverse of :func:`dft_forward`, keeping the real part.

    The L2 norm of the discarded imaginary part is checked against the real
    part; above ``IMAG_RESIDUE_RTOL`` a :class:`NonRealSpectrumError` is
    raised.  With ``return_residue=True`` the relative residue is returned
    alongside the field.
    """
    raw = np.fft.ifftn(F.values * np.conj(_origin_phase(F.grid)))
    raw /= _scale(F.grid)
    real = raw.real
    re_norm = float(np.linalg.norm(real))
    im_norm = float(np.linalg.norm(raw.imag))
    if im_norm > IMAG_RESIDUE_RTOL * re_norm:
        raise NonRealSpectrumError(
            f"imaginary residue {im_norm:.3e} exceeds {IMAG_RESIDUE_RTOL:g} x real norm {re_norm:.3e}"
        )
    out = Field(F.grid, real)
    if return_residue:
        return out, (im_norm / re_norm if re_norm > 0 else 0.0)
    return out
