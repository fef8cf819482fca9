"""Error analysis: Sobolev norms, bound constants, an RK4 oracle and lemma checks."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .model import ModelParams, hermitian_symmetrize, lambda_multiplier, symbol_z
from .noise import l2_norm_simpson
from .regularize import RegularizerKind, choose_mu, filter_ratio
from .spectral import Field, Grid, SpectralField, dft_forward, dft_inverse, freq_grid

__all__ = [
    "BoundConstants",
    "sobolev_norm",
    "relative_error",
    "bound_constant",
    "bound_constants",
    "theoretical_bound",
    "rk4_oracle_solve",
    "LemmaResult",
    "LemmaReport",
    "verify_lemma_suite",
]


def sobolev_norm(f: Field, p: float) -> float:
    """Discrete H^p norm (sum |f^|^2 (1 + ||xi||^2)^p dxi)^(1/2).

    ``xi`` is taken in the grid's frequency unit; the cell measure dxi is
    the angular one, so that p = 0 reproduces the rectangle-rule L2 norm.
    """
    p = float(p)
    if not p >= 0:
        raise ValueError(f"p must be >= 0, got {p}")
    fg = freq_grid(f.grid)
    power = np.abs(dft_forward(f).values) ** 2
    if p:
        power = power * (1.0 + fg.norm2()) ** p
    return math.sqrt(float(power.sum()) * fg.measure)


def relative_error(f_true: Field, f_est: Field) -> float:
    """||f_true - f_est|| / ||f_true|| in the Simpson L2 norm."""
    if not f_true.grid.same_lattice(f_est.grid):
        raise ValueError("fields are sampled on different grids")
    ref = l2_norm_simpson(f_true)
    if ref == 0.0:
        raise ValueError("relative error undefined for a zero reference field")
    return l2_norm_simpson(f_true - f_est) / ref


def bound_constant(kind, params: ModelParams, t0: float, n: int | None = None) -> float:
    """M_kind such that |R^kind_mu(xi)| < M_kind / mu^2 for 0 < mu < 1."""
    kind = RegularizerKind.parse(kind)
    if params.nu <= 0:
        raise ValueError("bound constants need nu > 0 (they contain 1/nu); not available for nu = 0")
    t0 = float(t0)
    if not t0 > 0:
        raise ValueError(f"t0 must be > 0, got {t0}")
    n = params.dim if n is None else int(n)
    a2, nu = params.alpha2, params.nu
    sb = math.sqrt(n) * params.beta_inf
    if kind is RegularizerKind.R1:
        return max(2 * nu + 2 * a2 + sb, 2 / t0 + sb / (nu * t0))
    if kind is RegularizerKind.R2:
        return max(2 * nu + 2 * a2 + 2 * sb, 2 / t0 + 2 * sb / (nu * t0))
    root = math.sqrt(a2 * nu)
    return max((a2 + nu) * (8 + 4 * sb / root), 8 / t0 + 4 * sb / (t0 * root))


@dataclass(frozen=True)
class BoundConstants:
    m1: float
    m2: float
    m3: float
    c: float
    k1: float
    k2: float
    k3: float

    def m(self, kind) -> float:
        return getattr(self, f"m{int(RegularizerKind.parse(kind))}")

    def k(self, kind) -> float:
        return getattr(self, f"k{int(RegularizerKind.parse(kind))}")


def bound_constants(params: ModelParams, t0: float, c: float, delta_max: float) -> BoundConstants:
    ms = [bound_constant(k, params, t0) for k in RegularizerKind]
    ks = [c + delta_max * m for m in ms]
    return BoundConstants(*ms, c, *ks)


def theoretical_bound(c: float, delta: float, delta_max: float, m: float, p: float) -> float:
    """(c + delta_M m) max{r^(2/(p+2)), r^(p/(p+2))} with r = delta/delta_M."""
    choose_mu(delta, delta_max, p)  # same admissibility as the parameter rule
    r = delta / delta_max
    return (c + delta_max * m) * max(r ** (2 / (p + 2)), r ** (p / (p + 2)))


def rk4_oracle_solve(f: Field, t0: float, params: ModelParams, steps: int = 2000) -> Field:
    """Integrate u^' = -z u^ + f^ from u^(0) = 0 to t0 with classical RK4, mode by mode."""
    if steps < 100:
        raise ValueError(f"need at least 100 steps, got {steps}")
    t0 = float(t0)
    if not t0 > 0:
        raise ValueError(f"t0 must be > 0, got {t0}")
    z = np.asarray(symbol_z(freq_grid(f.grid), params))
    src = dft_forward(f).values
    u = np.zeros_like(src)
    h = t0 / steps

    def rhs(v):
        return src - z * v

    for _ in range(steps):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * h * k1)
        k3 = rhs(u + 0.5 * h * k2)
        k4 = rhs(u + h * k3)
        u = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return dft_inverse(SpectralField(f.grid, hermitian_symmetrize(u)))


# ---------------------------------------------------------------- lemma suite


@dataclass
class LemmaResult:
    name: str
    statement: str
    worst_ratio: float | None
    strict: bool
    n_points: int
    passed: bool | None
    note: str = ""


@dataclass
class LemmaReport:
    results: list[LemmaResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed is not False for r in self.results)

    def failures(self) -> list[LemmaResult]:
        return [r for r in self.results if r.passed is False]

    def __getitem__(self, name: str) -> LemmaResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "results": [asdict(r) for r in self.results]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = []
        for r in self.results:
            if r.passed is None:
                status = "SKIP"
                ratio = "-"
            else:
                status = "PASS" if r.passed else "FAIL"
                ratio = f"{r.worst_ratio:.6g}"
            line = f"{status:4s}  {r.name:<20s} worst ratio {ratio:>12s}  n={r.n_points:<9d} {r.statement}"
            if r.note:
                line += f"  [{r.note}]"
            lines.append(line)
        lines.append("ALL PASS" if self.passed else f"{len(self.failures())} FAILURE(S)")
        return "\n".join(lines)


# slack for non-strict inequalities and the absolute tolerance on the convergence factor
ROUNDOFF = 1e-12


def _result(name, statement, lhs, rhs, strict, note="", abs_slack=0.0):
    lhs = np.asarray(lhs, dtype=float).ravel()
    rhs = np.asarray(rhs, dtype=float).ravel()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = lhs / rhs
    worst = float(np.max(ratio))
    if strict:
        ok = bool(np.all(lhs < rhs + abs_slack))
    else:
        ok = bool(np.all(lhs <= rhs * (1 + ROUNDOFF) + abs_slack))
    return LemmaResult(name, statement, worst, strict, int(lhs.size), ok, note)


def _loguniform(rng, lo, hi, n):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), n))


def verify_lemma_suite(
    params: ModelParams,
    t0: float,
    grid: Grid,
    p_list: Sequence[float] = (0.6, 1, 2, 3, 4),
    mu_list: Sequence[float] = (0.9, 0.5, 0.1, 0.01),
    samples: int = 100_000,
    seed: int = 0,
) -> LemmaReport:
    """Evaluate the auxiliary inequalities on random samples and on the grid frequencies.

    A violated inequality shows up as ``passed=False`` in the report; nothing
    is raised.
    """
    rng = np.random.default_rng(seed)
    n = samples
    fg = freq_grid(grid)
    n2 = np.asarray(fg.norm2())
    rho_grid = np.sqrt(n2).ravel()
    mus = _loguniform(rng, 1e-3, 1 - 1e-9, n)
    report = LemmaReport()
    add = report.results.append

    # |1/(1 - e^-w)| <= 1/(1 - e^-Re w), random w plus w = z t0 on the grid
    w = _loguniform(rng, 1e-3, 50.0, n) + 1j * rng.uniform(-50.0, 50.0, n)
    zt = (np.asarray(symbol_z(fg, params)) * t0).ravel()
    zt = zt[zt.real > 0]
    w = np.concatenate([w, zt])
    add(_result("inv_expm1_modulus", "|1/(1-e^-w)| <= 1/(1-e^-Re w)",
                1 / np.abs(-np.expm1(-w)), 1 / -np.expm1(-w.real), strict=False))

    x = np.concatenate([_loguniform(rng, 1e-8, 100.0, n), [1.0]])
    fx = np.where(x < 1, x, 1.0) / -np.expm1(-x)
    add(_result("x_over_expm1", "x/(1-e^-x) on (0,1), 1/(1-e^-x) on [1,inf) < 2", fx, np.full_like(fx, 2.0), strict=True))

    x = _loguniform(rng, 1e-4, 1e4, n) * rng.choice([-1.0, 1.0], n)
    x2 = x * x
    lhs = x2 / -np.expm1(-x2) * np.exp(-0.25 * mus ** 2 * x2)
    add(_result("gauss_damped_symbol", "x^2/((1-e^-x^2) e^(mu^2 x^2/4)) < 4/mu^2", lhs, 4 / mus ** 2, strict=True))

    x = _loguniform(rng, 1e-4, 1e3, n)
    add(_result("expm1_ratio", "(1-e^-x^2)/x^2 < 1", -np.expm1(-x * x) / (x * x), np.ones(n), strict=True))

    a = _loguniform(rng, 1e-3, 1e3, n)
    b = _loguniform(rng, 1e-3, 1e3, n)
    x = _loguniform(rng, 1e-3, 1e3, n)
    add(_result("rational_peak", "x/(a x^2 + b) <= 1/(2 sqrt(ab))", x / (a * x * x + b), 1 / (2 * np.sqrt(a * b)), strict=False))

    # rho samples: random plus the grid's ||xi|| values, paired with random mu
    rho = np.concatenate([_loguniform(rng, 1e-4, 1e4, n), rho_grid])
    mu_r = np.concatenate([mus, rng.choice(mus, rho_grid.size)])
    a2s = np.concatenate([_loguniform(rng, 1e-5, 1e2, n), np.full(rho_grid.size, params.alpha2)])
    nus = np.concatenate([_loguniform(rng, 1e-3, 1e2, n),
                          np.full(rho_grid.size, params.nu if params.nu > 0 else 1.0)])
    m2 = mu_r ** 2
    add(_result("r1_rho", "|rho|/(1+rho^2 mu^2) < 1/(2 mu^2)", rho / (1 + rho ** 2 * m2), 1 / (2 * m2), strict=True))
    add(_result("r1_symbol", "(a2 rho^2+nu)/(1+rho^2 mu^2) < (nu+a2)/mu^2",
                (a2s * rho ** 2 + nus) / (1 + rho ** 2 * m2), (nus + a2s) / m2, strict=True))
    rho4 = rho ** 4
    add(_result("r2_rho", "rho/(1+rho^4 mu^2) < 1/mu^2", rho / (1 + rho4 * m2), 1 / m2, strict=True))
    add(_result("r2_symbol", "(a2 rho^2+nu)/(1+rho^4 mu^2) < (nu+a2)/mu^2",
                (a2s * rho ** 2 + nus) / (1 + rho4 * m2), (nus + a2s) / m2, strict=True))

    lam_abs = np.abs(np.asarray(lambda_multiplier(fg, t0, params)))
    npts = n2.size * len(mu_list)
    for kind in RegularizerKind:
        name = f"gain_bound_r{int(kind)}"
        stmt = f"|R{int(kind)}_mu(xi)| < M{int(kind)}/mu^2 on the grid"
        if params.nu <= 0:
            add(LemmaResult(name, stmt, None, True, 0, None, "skipped: nu = 0"))
            continue
        m = bound_constant(kind, params, t0)
        worst = 0.0
        ok = True
        for mu in mu_list:
            g = lam_abs * filter_ratio(kind, mu, n2)
            bound = m / mu ** 2
            worst = max(worst, float(g.max() / bound))
            ok &= bool(np.all(g < bound))
        add(LemmaResult(name, stmt, worst, True, npts, ok))

    npts = n2.size * len(mu_list) * len(p_list)
    for kind in RegularizerKind:
        worst = 0.0
        ok = True
        for p in p_list:
            damp = (1.0 + n2) ** (-p / 2.0)
            for mu in mu_list:
                # 1 - R/Lambda, exact per kind
                omega = damp * np.abs(1.0 - filter_ratio(kind, mu, n2))
                bound = max(mu ** p, mu ** 2)
                worst = max(worst, float(omega.max() / bound))
                ok &= bool(np.all(omega <= bound + ROUNDOFF))
        add(LemmaResult(f"convergence_r{int(kind)}",
                        f"(1+|xi|^2)^(-p/2)|1-R{int(kind)}/Lambda| <= max(mu^p, mu^2) on the grid",
                        worst, False, npts, ok))
    return report
