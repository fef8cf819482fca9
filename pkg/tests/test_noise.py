import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from parasource.noise import (
    NoiseSpec, add_noise, case_rng, delta_max, l2_norm_simpson, noise_level, parse_seed, simpson_weights,
)
from parasource.spectral import Field, Grid


def _field(a, b, n, fn):
    g = Grid.cube(a, b, n)
    return Field(g, fn(g.axes()[0]))


def test_zero_epsilon_is_identity():
    y = _field(0, 1, 11, np.sin)
    assert add_noise(y, NoiseSpec(0.0, 3)) is y


def test_sample_deviation_band():
    y = _field(-10, 10, 1001, np.cos)
    yd = add_noise(y, NoiseSpec(0.1, 12345))
    assert 0.09 <= np.std(yd.values - y.values) <= 0.11


def test_determinism_and_seed_dependence():
    y = _field(-1, 1, 101, np.cos)
    a = add_noise(y, NoiseSpec(0.1, 5)).values
    b = add_noise(y, NoiseSpec(0.1, 5)).values
    c = add_noise(y, NoiseSpec(0.1, 6)).values
    d = add_noise(y, NoiseSpec(0.1, 5, case_index=1)).values
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


def test_case_streams_independent_of_schedule():
    first = [case_rng(9, i).standard_normal(3) for i in range(4)]
    again = [case_rng(9, i).standard_normal(3) for i in reversed(range(4))][::-1]
    for u, v in zip(first, again):
        assert u.tobytes() == v.tobytes()


@pytest.mark.parametrize("text,value", [("17", 17), ("0x1f", 31), (" 0XFF ", 255), (2 ** 64 - 1, 2 ** 64 - 1)])
def test_parse_seed(text, value):
    assert parse_seed(text) == value


@pytest.mark.parametrize("bad", ["-1", str(2 ** 64), "abc", "1.5"])
def test_parse_seed_rejects(bad):
    with pytest.raises(ValueError):
        parse_seed(bad)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(-0.1)
    with pytest.raises(ValueError):
        NoiseSpec(float("nan"))
    with pytest.raises(ValueError):
        NoiseSpec(0.1, case_index=-1)


def test_simpson_constant():
    assert l2_norm_simpson(_field(0, 1, 101, lambda x: np.ones_like(x))) == pytest.approx(1.0, abs=1e-12)


def test_simpson_linear():
    assert l2_norm_simpson(_field(0, 1, 101, lambda x: x)) == pytest.approx(math.sqrt(1 / 3), abs=1e-12)


def test_simpson_sine():
    assert l2_norm_simpson(_field(0, math.pi, 1001, np.sin)) == pytest.approx(math.sqrt(math.pi / 2), abs=1e-10)


def test_simpson_needs_three_points():
    with pytest.raises(ValueError):
        simpson_weights(2, 0.1)


@given(n=st.integers(3, 60), seed=st.integers(0, 10 ** 6))
def test_weights_match_scipy(n, seed):
    x = np.linspace(0.0, 2.0, n)
    y = np.random.default_rng(seed).standard_normal(n)
    ours = simpson_weights(n, x[1] - x[0]) @ y
    if n % 2:
        ref = integrate.simpson(y, x=x)
    else:
        ref = integrate.simpson(y[:-1], x=x[:-1]) + 0.5 * (x[1] - x[0]) * (y[-2] + y[-1])
    assert ours == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_tensor_simpson_2d_matches_dblquad():
    g = Grid(((0.0, 1.0), (-1.0, 2.0)), (41, 61))
    x, y = g.mesh()
    f = Field(g, np.broadcast_to(np.exp(x) * np.cos(y), g.shape))
    ref, _ = integrate.dblquad(lambda yy, xx: (np.exp(xx) * np.cos(yy)) ** 2, 0, 1, -1, 2)
    assert l2_norm_simpson(f) == pytest.approx(math.sqrt(ref), rel=1e-7)


def test_tensor_simpson_3d_separable():
    g = Grid(((0.0, 1.0), (0.0, 2.0), (0.0, 3.0)), (11, 13, 15))
    x, y, z = g.mesh()
    f = Field(g, np.broadcast_to(x * y * z, g.shape))
    assert l2_norm_simpson(f) == pytest.approx(math.sqrt((1 / 3) * (8 / 3) * 9), rel=1e-12)


def test_noise_level_examples():
    g = Grid(((0.0, 2.0), (0.0, 3.0)), (9, 7))
    y = Field(g, np.random.default_rng(0).standard_normal(g.shape))
    assert noise_level(y, y) == 0.0
    shifted = Field(g, y.values - 0.5)
    assert noise_level(y, shifted) == pytest.approx(0.5 * math.sqrt(6.0), rel=1e-12)


def test_noise_level_grid_mismatch():
    a = _field(0, 1, 11, np.sin)
    b = _field(0, 1, 13, np.sin)
    with pytest.raises(ValueError):
        noise_level(a, b)


def test_noise_level_expectation():
    y = _field(-10, 10, 1001, np.sin)
    deltas = [noise_level(y, add_noise(y, NoiseSpec(1e-2, s))) for s in range(10)]
    target = 1e-2 * math.sqrt(20)
    assert abs(np.mean(deltas) - target) <= 0.1 * target
    assert abs(0.0447 - target) < 1e-4


def test_delta_max_rule():
    assert delta_max([0.1, 0.02]) == pytest.approx(1.1)
    assert delta_max([0.0]) == 1.0
    with pytest.raises(ValueError):
        delta_max([])
    with pytest.raises(ValueError):
        delta_max([-0.1])
