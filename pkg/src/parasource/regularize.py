"""Spectral filter regularization of the source inversion.

Three filter families damp the unbounded multiplier Lambda:

    R1 = Lambda / (1 + mu^2 ||xi||^2)
    R2 = Lambda / (1 + mu^2 ||xi||^4)
    R3 = Lambda * exp(-mu^2 ||xi||^2 / 4)

with mu picked a priori from the noise ratio, mu^2 = (delta/delta_M)^(2/(p+2)).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, hermitian_symmetrize, lambda_multiplier
from .spectral import Field, FreqGrid, dft_forward, dft_inverse, freq_grid

__all__ = [
    "RegularizerKind",
    "RegConfig",
    "MU_FLOOR",
    "filter_ratio",
    "filter_gain",
    "choose_mu",
    "estimate_source",
]

# mu used when the noise level is exactly zero
MU_FLOOR = 1e-12


class RegularizerKind(enum.IntEnum):
    R1 = 1
    R2 = 2
    R3 = 3

    @classmethod
    def parse(cls, value) -> "RegularizerKind":
        if isinstance(value, cls):
            return value
        text = str(value).strip().upper().lstrip("R")
        try:
            return cls(int(text))
        except ValueError:
            raise ValueError(f"unknown regularizer kind {value!r}; expected 1, 2 or 3") from None


def _check_mu(mu: float) -> float:
    mu = float(mu)
    if not 0.0 < mu < 1.0:
        raise ValueError(f"mu must lie in (0, 1), got {mu}")
    return mu


def _check_p(p: float) -> float:
    p = float(p)
    if not (math.isfinite(p) and p > 0):
        raise ValueError(f"smoothness exponent p must be finite and > 0, got {p}")
    return p


@dataclass(frozen=True)
class RegConfig:
    kind: RegularizerKind
    p: float
    mu: float

    def __post_init__(self):
        object.__setattr__(self, "kind", RegularizerKind.parse(self.kind))
        object.__setattr__(self, "p", _check_p(self.p))
        object.__setattr__(self, "mu", _check_mu(self.mu))


def filter_ratio(kind: RegularizerKind, mu: float, norm2) -> np.ndarray:
    """R_kind / Lambda as a function of ||xi||^2.

    Evaluated directly rather than as a quotient so that it stays exact
    where Lambda is singular-looking (z -> 0) or huge.
    """
    kind = RegularizerKind.parse(kind)
    m2 = float(mu) ** 2
    n2 = np.asarray(norm2, dtype=float)
    if kind is RegularizerKind.R1:
        return 1.0 / (1.0 + m2 * n2)
    if kind is RegularizerKind.R2:
        return 1.0 / (1.0 + m2 * n2 * n2)
    return np.exp(-0.25 * m2 * n2)


def filter_gain(kind: RegularizerKind, mu: float, xi, t0: float, params: ModelParams):
    """Regularized multiplier R^kind_mu(xi)."""
    mu = _check_mu(mu)
    if isinstance(xi, FreqGrid):
        n2 = xi.norm2()
    else:
        arr = np.atleast_1d(np.asarray(xi, dtype=float))
        n2 = np.sum(arr ** 2, axis=-1)
    out = lambda_multiplier(xi, t0, params) * filter_ratio(kind, mu, n2)
    return out[()] if np.ndim(out) == 0 else out


def choose_mu(delta: float, delta_max: float, p: float) -> float:
    """A-priori rule mu = (delta / delta_max)^(1/(p+2))."""
    delta = float(delta)
    delta_max = float(delta_max)
    p = _check_p(p)
    if not delta > 0:
        raise ValueError(f"noise level must be > 0, got {delta}")
    if not delta < delta_max:
        raise ValueError(f"noise level {delta} must be below delta_max {delta_max}")
    return (delta / delta_max) ** (1.0 / (p + 2.0))


def estimate_source(y_delta: Field, cfg: RegConfig, t0: float, params: ModelParams) -> Field:
    """Regularized source estimate F^-1[R^kind_mu F[y_delta]]."""
    fg = freq_grid(y_delta.grid)
    gain = lambda_multiplier(fg, t0, params) * filter_ratio(cfg.kind, cfg.mu, fg.norm2())
    spec = dft_forward(y_delta).multiply(hermitian_symmetrize(np.asarray(gain)))
    return dft_inverse(spec)
