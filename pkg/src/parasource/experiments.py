"""Example sources, the end-to-end estimation pipeline, tables and field export.

A case samples a source on its grid, solves the forward problem exactly in
frequency space, perturbs the final-time data with Gaussian noise, measures
the noise level with Simpson's rule and estimates the source with the
unregularized inverse and each filter family.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .analysis import relative_error, sobolev_norm, theoretical_bound, bound_constant
from .model import ModelParams, estimate_unregularized, forward_map
from .noise import NoiseSpec, add_noise, delta_max as delta_max_rule, l2_norm_simpson, noise_level
from .regularize import MU_FLOOR, RegConfig, RegularizerKind, choose_mu, estimate_source
from .spectral import Field, FrequencyUnit, Grid

__all__ = [
    "EXAMPLE_IDS",
    "TABLE_EPSILONS",
    "ExampleDefaults",
    "EXAMPLES",
    "Piece",
    "SourceSpec",
    "CaseConfig",
    "CaseReport",
    "CaseError",
    "TableRow",
    "TableResult",
    "source_value",
    "sample_source",
    "example_config",
    "run_case",
    "run_table",
    "run_figures",
    "export_fields",
    "default_workers",
]

EXAMPLE_IDS = ("ex1", "ex2", "ex3", "ex4", "ex5", "ex6")
TABLE_EPSILONS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
ALL_KINDS = tuple(RegularizerKind)

# discrete H^p norms above this are treated as "source not in H^p"
SOBOLEV_CAP = 1e6

# ------------------------------------------------------------------ sources


def _ex1(x):
    x = x[0]
    inside = (x >= -10) & (x <= 10)
    val = np.select([x < -5, x < 0, x < 5], [-1.0, 1.0, -1.0], 1.0)
    return np.where(inside, val, 0.0)


def _ex2(x):
    x = x[0]
    val = (-(x ** 3) / 4 + 1.5 * x) * np.exp(-(x ** 2) / 4)
    return np.where((x >= -10) & (x <= 10), val, 0.0)


def _ex3(x):
    x = x[0]
    return np.select([(x >= -1) & (x < 0), (x >= 0) & (x <= 1)], [x + 1, 1 - x], 0.0)


def _ex4(x):
    x, y = x
    inside = (np.abs(x) <= 40) & (np.abs(y) <= 40)
    return np.where(inside, np.cos(x / 20) * np.cos(y / 20), 0.0)


def _ex5(x):
    x, y = x
    left = (x >= -10) & (x <= 0)
    right = (x >= 0) & (x <= 10)
    # the four triangular faces, first matching branch wins
    conds = [
        left & (y >= 0) & (y <= 10 + x),
        left & (y >= -10 - x) & (y <= 0),
        right & (y >= 0) & (y <= 10 - x),
        right & (y >= -10 + x) & (y <= 0),
    ]
    vals = [10 + x - y, 10 + x + y, 10 - x - y, 10 - x + y]
    x, y = np.broadcast_arrays(x, y)
    return np.select([np.broadcast_to(c, x.shape) for c in conds],
                     [np.broadcast_to(v, x.shape) for v in vals], 0.0)


def _ex6(x):
    x, y, z = x
    lim = 2 * np.pi
    inside = (np.abs(x) <= lim) & (np.abs(y) <= lim) & (np.abs(z) <= lim)
    return np.where(inside, np.sin((x + y + z) / 20), 0.0)


_CATALOG: dict[str, tuple[int, Callable]] = {
    "ex1": (1, _ex1),
    "ex2": (1, _ex2),
    "ex3": (1, _ex3),
    "ex4": (2, _ex4),
    "ex5": (2, _ex5),
    "ex6": (3, _ex6),
}


@dataclass(frozen=True)
class Piece:
    """Affine piece c0 + c . x on the box lower <= x < upper (<= upper when closed)."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    coef: tuple[float, ...]
    closed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        object.__setattr__(self, "coef", tuple(float(v) for v in self.coef))
        n = len(self.lower)
        if len(self.upper) != n:
            raise ValueError("piece lower/upper must have the same length")
        if len(self.coef) not in (1, n + 1):
            raise ValueError(f"piece coef needs 1 or {n + 1} entries, got {len(self.coef)}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def mask(self, x):
        m = True
        for k, xk in enumerate(x):
            hi = xk <= self.upper[k] if self.closed else xk < self.upper[k]
            m = m & (xk >= self.lower[k]) & hi
        return m

    def value(self, x):
        out = self.coef[0]
        for c, xk in zip(self.coef[1:], x):
            out = out + c * xk
        return out


def normalize_source_id(value) -> str:
    s = str(value).strip().lower()
    if s.isdigit():
        s = f"ex{s}"
    if s not in EXAMPLE_IDS and s != "custom":
        raise ValueError(f"unknown source id {value!r}; expected one of 1-6 or ex1-ex6")
    return s


@dataclass(frozen=True, eq=False)
class SourceSpec:
    """A catalog source (``ex1`` .. ``ex6``) or a custom one.

    Custom sources are either sampled values on the case grid or a list of
    affine pieces (zero outside all pieces; the first matching piece wins).
    """

    id: str
    values: np.ndarray | None = field(default=None, repr=False)
    pieces: tuple[Piece, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "id", normalize_source_id(self.id))
        if self.id == "custom":
            if (self.values is None) == (self.pieces is None):
                raise ValueError("a custom source needs exactly one of values or pieces")
            if self.pieces is not None:
                pieces = tuple(self.pieces)
                if not pieces or len({p.dim for p in pieces}) != 1:
                    raise ValueError("custom pieces must be non-empty and share one dimension")
                object.__setattr__(self, "pieces", pieces)
            else:
                object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def dim(self) -> int:
        if self.id in _CATALOG:
            return _CATALOG[self.id][0]
        if self.pieces is not None:
            return self.pieces[0].dim
        return self.values.ndim

    def evaluate(self, x: Sequence[np.ndarray]) -> np.ndarray:
        if self.id in _CATALOG:
            return _CATALOG[self.id][1](tuple(x))
        if self.pieces is None:
            raise ValueError("sampled custom sources cannot be evaluated off their grid")
        x = np.broadcast_arrays(*x)
        out = np.zeros(x[0].shape)
        done = np.zeros(x[0].shape, dtype=bool)
        for piece in self.pieces:
            m = piece.mask(x) & ~done
            out = np.where(m, piece.value(x), out)
            done |= m
        return out


def source_value(spec: SourceSpec, point: Sequence[float]) -> float:
    """Value of the source at a single point."""
    pt = np.atleast_1d(np.asarray(point, dtype=float))
    if pt.size != spec.dim:
        raise ValueError(f"point has {pt.size} coordinates, source is {spec.dim}-D")
    return float(spec.evaluate(tuple(np.asarray(v) for v in pt)))


def sample_source(spec: SourceSpec, grid: Grid) -> Field:
    if spec.dim != grid.dim:
        raise ValueError(f"source is {spec.dim}-D but grid is {grid.dim}-D")
    if spec.id == "custom" and spec.values is not None:
        if spec.values.shape != grid.shape:
            raise ValueError(f"sampled source has shape {spec.values.shape}, grid is {grid.shape}")
        return Field(grid, spec.values)
    vals = spec.evaluate(grid.mesh(sparse=True))
    return Field(grid, np.broadcast_to(vals, grid.shape))


# ----------------------------------------------------------- example setups


@dataclass(frozen=True)
class ExampleDefaults:
    params: ModelParams
    t0: float
    box: tuple[float, float]
    points: int
    p: float
    epsilons: tuple[float, ...]

    @property
    def dim(self) -> int:
        return self.params.dim


EXAMPLES: dict[str, ExampleDefaults] = {
    "ex1": ExampleDefaults(ModelParams(2e-5, (1e-5,), 1.0), 5.0, (-10.0, 10.0), 1001, 1.0,
                           (0.2, 0.15, 0.1, 0.05)),
    "ex2": ExampleDefaults(ModelParams(1.0, (0.0,), 0.0), 0.1, (-10.0, 10.0), 1001, 2.0,
                           (0.01, 0.007, 0.003, 0.001)),
    "ex3": ExampleDefaults(ModelParams(2.0, (0.0,), 1.0), 0.2, (-2.0, 2.0), 1001, 4.0,
                           (0.004, 0.003, 0.002, 0.0001)),
    "ex4": ExampleDefaults(ModelParams(0.2, (0.0, 0.0), 0.99), 1.0, (-40.0, 40.0), 1001, 1.0,
                           (0.025,)),
    "ex5": ExampleDefaults(ModelParams(1.0, (0.0, 0.0), 1.0), 0.4, (-10.0, 10.0), 1001, 0.6,
                           (0.05,)),
    "ex6": ExampleDefaults(ModelParams(0.4, (1.0, -0.5, -0.5), 0.997), 3.0,
                           (-2 * math.pi, 2 * math.pi), 129, 3.0, (0.035,)),
}

DEFAULT_UNIT = FrequencyUnit.CYCLES


@dataclass(frozen=True, eq=False)
class CaseConfig:
    source: SourceSpec
    params: ModelParams
    t0: float
    grid: Grid
    p: float
    epsilon: float
    seed: int = 0
    kinds: tuple[RegularizerKind, ...] = ALL_KINDS
    case_index: int = 0

    def __post_init__(self):
        kinds = tuple(dict.fromkeys(RegularizerKind.parse(k) for k in self.kinds))
        if not kinds:
            raise ValueError("at least one regularizer kind is required")
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        NoiseSpec(self.epsilon, self.seed, self.case_index)  # validates
        if self.source.dim != self.grid.dim:
            raise ValueError(f"source is {self.source.dim}-D but grid is {self.grid.dim}-D")
        if self.params.dim != self.grid.dim:
            raise ValueError(f"beta has {self.params.dim} components but grid is {self.grid.dim}-D")
        if not (math.isfinite(self.t0) and self.t0 > 0):
            raise ValueError(f"t0 must be > 0, got {self.t0}")
        if not (math.isfinite(self.p) and self.p > 0):
            raise ValueError(f"p must be finite and > 0, got {self.p}")

    @property
    def noise(self) -> NoiseSpec:
        return NoiseSpec(self.epsilon, self.seed, self.case_index)

    def replace(self, **changes) -> "CaseConfig":
        return dataclasses.replace(self, **changes)


def example_config(example, *, epsilon: float | None = None, seed: int = 0, p: float | None = None,
                   t0: float | None = None, kinds: Iterable = ALL_KINDS, points: int | None = None,
                   freq_unit: FrequencyUnit | str = DEFAULT_UNIT) -> CaseConfig:
    """Case configuration for a catalog example, with optional overrides."""
    eid = normalize_source_id(example)
    if eid == "custom":
        raise ValueError("example_config needs a catalog example id")
    d = EXAMPLES[eid]
    a, b = d.box
    grid = Grid.cube(a, b, points or d.points, d.dim, freq_unit)
    return CaseConfig(
        source=SourceSpec(eid),
        params=d.params,
        t0=d.t0 if t0 is None else t0,
        grid=grid,
        p=d.p if p is None else p,
        epsilon=d.epsilons[0] if epsilon is None else epsilon,
        seed=seed,
        kinds=tuple(kinds),
    )


# ------------------------------------------------------------------- runner


class CaseError(RuntimeError):
    """Failure inside a pipeline stage; the message starts with the stage label."""


@dataclass
class CaseReport:
    source: str
    epsilon: float
    seed: int
    case_index: int
    p: float
    t0: float
    freq_unit: str
    delta: float
    delta_max: float
    mu: float
    errors: dict[str, float]
    abs_errors: dict[str, float]
    unregularized_error: float
    bounds: dict[str, float | None]
    bound_note: str
    sobolev_c: float
    wall_time: float
    fields: dict[str, Field] = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "fields"}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def bound_holds(self) -> dict[str, bool | None]:
        return {k: (None if b is None else self.abs_errors[k] <= b) for k, b in self.bounds.items()}


def _stage(label: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except CaseError:
        raise
    except Exception as exc:
        raise CaseError(f"{label}: {exc}") from exc


@dataclass
class _Measured:
    cfg: CaseConfig
    f: Field
    y: Field
    y_delta: Field
    delta: float


def _truth(cfg: CaseConfig) -> tuple[Field, Field]:
    f = _stage("sample source", sample_source, cfg.source, cfg.grid)
    y = _stage("forward solve", forward_map, f, cfg.t0, cfg.params)
    return f, y


def _measure(cfg: CaseConfig, truth: tuple[Field, Field] | None = None) -> _Measured:
    f, y = truth if truth is not None else _truth(cfg)
    y_delta = _stage("add noise", add_noise, y, cfg.noise)
    delta = _stage("noise level", noise_level, y, y_delta)
    return _Measured(cfg, f, y, y_delta, delta)


def _kind_key(kind: RegularizerKind) -> str:
    return f"r{int(kind)}"


def _finish(m: _Measured, dmax: float, keep_fields: bool, t_start: float,
            sobolev_cache: dict | None = None) -> CaseReport:
    cfg = m.cfg
    if m.delta > 0:
        mu = _stage("parameter choice", choose_mu, m.delta, dmax, cfg.p)
    else:
        mu = MU_FLOOR
    ref = l2_norm_simpson(m.f)
    if ref == 0:
        raise CaseError("relative error: source is identically zero on the grid")
    errors, abs_errors, fields = {}, {}, {}
    for kind in cfg.kinds:
        est = _stage(f"estimate {_kind_key(kind)}", estimate_source, m.y_delta,
                     RegConfig(kind, cfg.p, mu), cfg.t0, cfg.params)
        err = l2_norm_simpson(m.f - est)
        errors[_kind_key(kind)] = err / ref
        abs_errors[_kind_key(kind)] = err
        if keep_fields:
            fields[_kind_key(kind)] = est
    unreg = _stage("estimate unregularized", estimate_unregularized, m.y_delta, cfg.t0, cfg.params)
    unreg_err = relative_error(m.f, unreg)

    key = (id(cfg.source), cfg.grid, cfg.p)
    if sobolev_cache is not None and key in sobolev_cache:
        c = sobolev_cache[key]
    else:
        c = _stage("sobolev norm", sobolev_norm, m.f, cfg.p)
        if sobolev_cache is not None:
            sobolev_cache[key] = c

    bounds: dict[str, float | None] = {_kind_key(k): None for k in cfg.kinds}
    if cfg.params.nu <= 0:
        note = "bound skipped: nu = 0"
    elif m.delta <= 0:
        note = "bound skipped: noise level is zero"
    elif not c <= SOBOLEV_CAP:
        note = f"bound skipped: discrete H^p norm {c:.3g} exceeds {SOBOLEV_CAP:g}"
    else:
        note = ""
        for kind in cfg.kinds:
            mk = bound_constant(kind, cfg.params, cfg.t0)
            bounds[_kind_key(kind)] = theoretical_bound(c, m.delta, dmax, mk, cfg.p)

    if keep_fields:
        fields.update(source=m.f, data=m.y, noisy_data=m.y_delta, unregularized=unreg)
    return CaseReport(
        source=cfg.source.id,
        epsilon=cfg.epsilon,
        seed=cfg.seed,
        case_index=cfg.case_index,
        p=cfg.p,
        t0=cfg.t0,
        freq_unit=cfg.grid.freq_unit.value,
        delta=m.delta,
        delta_max=dmax,
        mu=mu,
        errors=errors,
        abs_errors=abs_errors,
        unregularized_error=unreg_err,
        bounds=bounds,
        bound_note=note,
        sobolev_c=c,
        wall_time=time.perf_counter() - t_start,
        fields=fields,
    )


def run_case(cfg: CaseConfig, *, delta_max: float | None = None, keep_fields: bool = False) -> CaseReport:
    """Run one (source, noise realization) case end to end.

    ``delta_max`` defaults to 1 + delta of this run.
    """
    t_start = time.perf_counter()
    m = _measure(cfg)
    dmax = delta_max_rule([m.delta]) if delta_max is None else float(delta_max)
    return _finish(m, dmax, keep_fields, t_start)


# -------------------------------------------------------------------- tables


def default_workers() -> int:
    raw = os.environ.get("PARASOURCE_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"PARASOURCE_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


@dataclass
class TableRow:
    epsilon: float
    errors: dict[str, float]
    unregularized_error: float
    delta: float
    mu: float
    n_seeds: int


@dataclass
class TableResult:
    source: str
    kinds: tuple[RegularizerKind, ...]
    rows: list[TableRow]
    reports: list[list[CaseReport]]  # [epsilon index][seed index]

    def error_matrix(self) -> np.ndarray:
        return np.array([[r.errors[_kind_key(k)] for k in self.kinds] for r in self.rows])

    def header(self) -> list[str]:
        return (["epsilon"] + [f"err_{_kind_key(k)}" for k in self.kinds]
                + ["err_unregularized", "delta", "mu", "n_seeds"])

    def write_csv(self, path) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(self.header())
                for r in self.rows:
                    w.writerow([_fmt(r.epsilon)] + [_fmt(r.errors[_kind_key(k)]) for k in self.kinds]
                               + [_fmt(r.unregularized_error), _fmt(r.delta), _fmt(r.mu), r.n_seeds])
        except OSError as exc:
            raise OSError(f"cannot write table {path}: {exc}") from exc
        return path

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "kinds": [_kind_key(k) for k in self.kinds],
            "rows": [dataclasses.asdict(r) for r in self.rows],
            "reports": [[rep.to_dict() for rep in reps] for reps in self.reports],
        }


def _fmt(x: float) -> str:
    return f"{x:.9e}"


def run_table(base: CaseConfig | str | int, epsilons: Sequence[float] = TABLE_EPSILONS,
              seeds: Sequence[int] = tuple(range(10)), *, delta_max_policy: str = "set",
              workers: int | None = None, keep_fields: bool = False) -> TableResult:
    """Median relative errors over seeds for each noise level.

    ``delta_max_policy="set"`` uses 1 + the largest noise level of a seed's
    epsilon set for all its rows; ``"case"`` uses 1 + each case's own level.
    The epsilon at position i runs as case index i of each seed's stream.
    """
    if not epsilons or not seeds:
        raise ValueError("run_table needs at least one epsilon and one seed")
    if delta_max_policy not in ("set", "case"):
        raise ValueError(f"delta_max_policy must be 'set' or 'case', got {delta_max_policy!r}")
    if not isinstance(base, CaseConfig):
        base = example_config(base)
    workers = default_workers() if workers is None else max(1, int(workers))
    t_start = time.perf_counter()
    truth = _truth(base)
    cfgs = [[base.replace(epsilon=float(e), seed=int(s), case_index=i) for s in seeds]
            for i, e in enumerate(epsilons)]
    flat = [c for row in cfgs for c in row]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        measured = list(pool.map(lambda c: _measure(c, truth), flat))
    by_key = {(m.cfg.case_index, m.cfg.seed): m for m in measured}

    dmax_of: dict[tuple[int, int], float] = {}
    for s in seeds:
        seed_deltas = [by_key[(i, int(s))].delta for i in range(len(epsilons))]
        for i in range(len(epsilons)):
            if delta_max_policy == "set":
                dmax_of[(i, int(s))] = delta_max_rule(seed_deltas)
            else:
                dmax_of[(i, int(s))] = delta_max_rule([seed_deltas[i]])

    cache: dict = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        reports_flat = list(pool.map(
            lambda m: _finish(m, dmax_of[(m.cfg.case_index, m.cfg.seed)], keep_fields, t_start, cache),
            measured))
    reports = [reports_flat[i * len(seeds):(i + 1) * len(seeds)] for i in range(len(epsilons))]

    rows = []
    for e, reps in zip(epsilons, reports):
        rows.append(TableRow(
            epsilon=float(e),
            errors={_kind_key(k): float(np.median([r.errors[_kind_key(k)] for r in reps])) for k in base.kinds},
            unregularized_error=float(np.median([r.unregularized_error for r in reps])),
            delta=float(np.median([r.delta for r in reps])),
            mu=float(np.median([r.mu for r in reps])),
            n_seeds=len(reps),
        ))
    return TableResult(base.source.id, base.kinds, rows, reports)


# ------------------------------------------------------------------- export


def _slice_index(axis: np.ndarray) -> int:
    return int(np.argmin(np.abs(axis)))


def export_fields(fields: Mapping[str, Field], out_dir, fmt: str = "%.9e") -> list[Path]:
    """Write each field as CSV data grid(s) with a header row naming the axes.

    1-D: columns x,f.  2-D: x,y,f with N1*N2 rows.  3-D: three slices through
    the sample nearest to 0 on x, y and z (files ``<name>_x0.csv`` etc.).
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    written = []
    names = ("x", "y", "z")
    for name, fld in fields.items():
        g = fld.grid
        axes = g.axes()
        if g.dim in (1, 2):
            jobs = [(f"{name}.csv", names[: g.dim], axes, fld.values)]
        else:
            jobs = []
            for k in range(3):
                idx = [slice(None)] * 3
                idx[k] = _slice_index(axes[k])
                keep = [j for j in range(3) if j != k]
                jobs.append((f"{name}_{names[k]}0.csv", tuple(names[j] for j in keep),
                             tuple(axes[j] for j in keep), fld.values[tuple(idx)]))
        for fname, cols, ax, vals in jobs:
            mesh = np.meshgrid(*ax, indexing="ij")
            data = np.column_stack([m.ravel() for m in mesh] + [np.asarray(vals).ravel()])
            path = out_dir / fname
            try:
                np.savetxt(path, data, delimiter=",", fmt=fmt, header=",".join(cols + ("f",)), comments="")
            except OSError as exc:
                raise OSError(f"cannot write field {path}: {exc}") from exc
            written.append(path)
    return written


def run_figures(base: CaseConfig | str | int, out_dir, epsilons: Sequence[float] | None = None,
                seed: int = 0, workers: int | None = None) -> list[Path]:
    """Data grids behind the figures: true source, unregularized and regularized estimates."""
    if not isinstance(base, CaseConfig):
        base = example_config(base, seed=seed)
    eps = tuple(epsilons) if epsilons else EXAMPLES[base.source.id].epsilons if base.source.id in EXAMPLES else (base.epsilon,)
    table = run_table(base, eps, (seed,), workers=workers, keep_fields=True)
    written = []
    prefix = base.source.id
    first = table.reports[0][0]
    written += export_fields({f"{prefix}_source": first.fields["source"]}, out_dir)
    for e, reps in zip(eps, table.reports):
        rep = reps[0]
        tag = f"{prefix}_eps{e:g}"
        out = {f"{tag}_unregularized": rep.fields["unregularized"]}
        for k in base.kinds:
            out[f"{tag}_{_kind_key(k)}"] = rep.fields[_kind_key(k)]
        written += export_fields(out, out_dir)
        rep.fields.clear()
    return written
