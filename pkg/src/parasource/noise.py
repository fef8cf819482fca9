"""Synthetic measurements, Simpson-rule L2 norms and noise levels."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from .spectral import Field, Grid

__all__ = [
    "NoiseSpec",
    "parse_seed",
    "case_rng",
    "add_noise",
    "simpson_weights",
    "l2_norm_simpson",
    "noise_level",
    "delta_max",
]


def parse_seed(text) -> int:
    """Seed from an int or a decimal / 0x-hex string; must fit in 64 bits."""
    if isinstance(text, (int, np.integer)):
        value = int(text)
    else:
        s = str(text).strip().lower()
        value = int(s, 16) if s.startswith("0x") else int(s, 10)
    if not 0 <= value < 2 ** 64:
        raise ValueError(f"seed must be in [0, 2^64), got {value}")
    return value


@dataclass(frozen=True)
class NoiseSpec:
    epsilon: float
    seed: int = 0
    case_index: int = 0

    def __post_init__(self):
        eps = float(self.epsilon)
        if not (math.isfinite(eps) and eps >= 0):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "seed", parse_seed(self.seed))
        if int(self.case_index) < 0:
            raise ValueError("case_index must be >= 0")
        object.__setattr__(self, "case_index", int(self.case_index))


def case_rng(seed: int, case_index: int = 0) -> np.random.Generator:
    """Independent stream for a (seed, case index) pair."""
    ss = np.random.SeedSequence(entropy=parse_seed(seed), spawn_key=(int(case_index),))
    return np.random.Generator(np.random.PCG64(ss))


def add_noise(y: Field, spec: NoiseSpec) -> Field:
    """y + eta with eta i.i.d. N(0, epsilon^2), reproducible from the spec."""
    if spec.epsilon == 0.0:
        return y
    eta = case_rng(spec.seed, spec.case_index).standard_normal(y.grid.shape)
    return Field(y.grid, y.values + spec.epsilon * eta)


@lru_cache(maxsize=64)
def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights for n equispaced samples.

    Even n: Simpson on the first n-1 points and a trapezoid on the last interval.
    """
    if n < 3:
        raise ValueError(f"Simpson's rule needs at least 3 points, got {n}")
    m = n if n % 2 else n - 1
    w = np.zeros(n)
    w[:m:2] = 2.0
    w[1:m:2] = 4.0
    w[0] = w[m - 1] = 1.0
    w *= h / 3.0
    if m < n:
        w[m - 1] += h / 2.0
        w[m] += h / 2.0
    w.setflags(write=False)
    return w


def _integrate(values: np.ndarray, grid: Grid) -> float:
    out = values
    for n, h in reversed(list(zip(grid.points, grid.spacing))):
        out = out @ simpson_weights(n, h)
    return float(out)


def l2_norm_simpson(f: Field) -> float:
    """(integral |f|^2)^(1/2) over the grid box by tensorized composite Simpson."""
    # Simpson weights are positive, so the quadrature of |f|^2 is >= 0 up to roundoff
    return math.sqrt(max(_integrate(f.values ** 2, f.grid), 0.0))


def noise_level(y: Field, y_delta: Field) -> float:
    """delta = ||y - y_delta|| in the Simpson L2 norm."""
    if not y.grid.same_lattice(y_delta.grid):
        raise ValueError("y and y_delta are sampled on different grids")
    return l2_norm_simpson(y - y_delta)


def delta_max(deltas: Iterable[float]) -> float:
    """delta_M = 1 + max(deltas)."""
    vals = [float(d) for d in deltas]
    if not vals:
        raise ValueError("delta_max needs at least one noise level")
    if any(not (math.isfinite(d) and d >= 0) for d in vals):
        raise ValueError("noise levels must be finite and >= 0")
    return 1.0 + max(vals)
