"""Fourier symbol of the complete parabolic operator and the exact inverse multiplier.

For u_t = a2 Lap u - beta.grad u - nu u + f with u(., 0) = 0 every Fourier
mode obeys u^' = -z u^ + f^ with

    z(xi) = a2 ||xi||^2 + i beta.xi + nu,

so u^(xi, t) = (1 - exp(-z t)) / z * f^(xi) and the source is recovered from
final-time data by the multiplier Lambda = z / (1 - exp(-z t0)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .spectral import Field, FreqGrid, SpectralField, dft_forward, dft_inverse, freq_grid

__all__ = [
    "ModelParams",
    "SMALL_ARG",
    "symbol_z",
    "propagator",
    "lambda_multiplier",
    "forward_solve",
    "forward_map",
    "estimate_unregularized",
    "hermitian_symmetrize",
]

# |z t| below this switches to the series branch
SMALL_ARG = 1e-6

FreqLike = Union[FreqGrid, np.ndarray, Sequence[float]]


@dataclass(frozen=True)
class ModelParams:
    alpha2: float
    beta: tuple[float, ...]
    nu: float

    def __post_init__(self):
        beta = tuple(float(b) for b in np.atleast_1d(self.beta))
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha2", float(self.alpha2))
        object.__setattr__(self, "nu", float(self.nu))
        if not (math.isfinite(self.alpha2) and self.alpha2 > 0):
            raise ValueError(f"alpha2 must be > 0, got {self.alpha2}")
        if not (math.isfinite(self.nu) and self.nu >= 0):
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        if not beta or not all(math.isfinite(b) for b in beta):
            raise ValueError("beta must be a non-empty finite vector")

    @property
    def dim(self) -> int:
        return len(self.beta)

    @property
    def beta_inf(self) -> float:
        return max(abs(b) for b in self.beta)


def _check_time(t: float) -> float:
    t = float(t)
    if not (math.isfinite(t) and t > 0):
        raise ValueError(f"time must be > 0, got {t}")
    return t


def _norm2_and_dot(xi: FreqLike, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(xi, FreqGrid):
        if xi.dim != params.dim:
            raise ValueError(f"beta has length {params.dim}, frequencies are {xi.dim}-D")
        return xi.norm2(), xi.dot(params.beta)
    arr = np.asarray(xi, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] != params.dim:
        raise ValueError(f"xi has trailing length {arr.shape[-1]}, beta has {params.dim}")
    return np.sum(arr ** 2, axis=-1), arr @ np.asarray(params.beta)


def symbol_z(xi: FreqLike, params: ModelParams):
    """z(xi) = a2 ||xi||^2 + i beta.xi + nu.

    ``xi`` is a single vector, an array whose last axis is the dimension, or
    a :class:`FreqGrid`.
    """
    n2, bx = _norm2_and_dot(xi, params)
    z = params.alpha2 * n2 + params.nu + 1j * bx
    return z[()] if np.ndim(z) == 0 else z


def _phi(w: np.ndarray) -> np.ndarray:
    """(1 - exp(-w)) / w with the removable singularity at 0 filled in."""
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) < SMALL_ARG
    out = np.empty_like(w)
    big = ~small
    out[big] = -np.expm1(-w[big]) / w[big]
    ws = w[small]
    out[small] = 1.0 - ws / 2.0 + ws * ws / 6.0
    return out


def _propagator_from_z(z, t: float):
    return t * _phi(np.asarray(z) * t)


def propagator(xi: FreqLike, t: float, params: ModelParams):
    """(1 - exp(-z t)) / z; tends to t as z -> 0."""
    t = _check_time(t)
    out = _propagator_from_z(symbol_z(xi, params), t)
    return out[()] if np.ndim(out) == 0 else out


def lambda_multiplier(xi: FreqLike, t0: float, params: ModelParams):
    """Lambda(xi) = z / (1 - exp(-z t0)); tends to 1/t0 as z -> 0."""
    t0 = _check_time(t0)
    out = 1.0 / _propagator_from_z(symbol_z(xi, params), t0)
    return out[()] if np.ndim(out) == 0 else out


def hermitian_symmetrize(gain: np.ndarray) -> np.ndarray:
    """Project a multiplier onto g(-xi) = conj(g(xi)).

    The symbols here already have that symmetry except on the unpaired
    Nyquist planes of even-length axes, where it keeps real input real.
    """
    if all(n % 2 for n in gain.shape):
        return gain
    axes = tuple(range(gain.ndim))
    mirrored = np.conj(np.roll(np.flip(gain, axis=axes), 1, axis=axes))
    return 0.5 * (gain + mirrored)


def forward_solve(f_hat: SpectralField, t: float, params: ModelParams) -> SpectralField:
    """u^(., t) for the source spectrum ``f_hat`` and zero initial data."""
    gain = propagator(freq_grid(f_hat.grid), t, params)
    return f_hat.multiply(hermitian_symmetrize(np.asarray(gain)))


def forward_map(f: Field, t: float, params: ModelParams) -> Field:
    """Physical-space solution u(., t) for the sampled source ``f``."""
    return dft_inverse(forward_solve(dft_forward(f), t, params))


def estimate_unregularized(y_delta: Field, t0: float, params: ModelParams) -> Field:
    """Exact inversion f = F^-1[Lambda F[y_delta]]; unstable under noise."""
    lam = lambda_multiplier(freq_grid(y_delta.grid), t0, params)
    spec = dft_forward(y_delta).multiply(hermitian_symmetrize(np.asarray(lam)))
    return dft_inverse(spec)
