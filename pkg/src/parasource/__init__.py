"""Spectral estimation of the source term of a complete parabolic equation from noisy final-time data."""

__version__ = "0.1.0"

from .spectral import Field, FreqGrid, FrequencyUnit, Grid, SpectralField, dft_forward, dft_inverse, freq_grid
from .model import ModelParams, estimate_unregularized, forward_map, forward_solve, lambda_multiplier
from .regularize import RegConfig, RegularizerKind, choose_mu, estimate_source, filter_gain
from .noise import NoiseSpec, add_noise, delta_max, l2_norm_simpson, noise_level

__all__ = [
    "Field", "FreqGrid", "FrequencyUnit", "Grid", "SpectralField", "dft_forward", "dft_inverse", "freq_grid",
    "ModelParams", "estimate_unregularized", "forward_map", "forward_solve", "lambda_multiplier",
    "RegConfig", "RegularizerKind", "choose_mu", "estimate_source", "filter_gain",
    "NoiseSpec", "add_noise", "delta_max", "l2_norm_simpson", "noise_level",
]
