"""Command-line entry point: forward, estimate, table, figures and verify.

Exit status is 0 on success, 1 on any usage or validation error and 2 when
``verify`` finds a violated numerical property.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import relative_error, rk4_oracle_solve, verify_lemma_suite
from .experiments import (
    EXAMPLES,
    TABLE_EPSILONS,
    CaseConfig,
    CaseError,
    Piece,
    SourceSpec,
    example_config,
    export_fields,
    normalize_source_id,
    run_case,
    run_figures,
    run_table,
    sample_source,
)
from .model import ModelParams, estimate_unregularized, forward_map
from .noise import parse_seed
from .regularize import RegularizerKind
from .spectral import Field, FrequencyUnit, Grid

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CHECK_FAILED = 2

SUBCOMMANDS = ("forward", "estimate", "table", "figures", "verify")

REQUIRED_KEYS = ("alpha2", "beta", "nu", "t0", "grid", "source")
OPTIONAL_KEYS = {"p": 1.0, "epsilon": 0.0, "seed": 0, "kinds": [1, 2, 3]}

# examples whose grids the verify subcommand sweeps
VERIFY_EXAMPLES = ("ex1", "ex3", "ex4", "ex6")


class UsageError(Exception):
    """Bad command line or config; mapped to exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ------------------------------------------------------------- custom config


def _number(obj, key: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float, str)):
        raise UsageError(f"config key '{key}': expected a number, got {obj!r}")
    try:
        v = float(obj)
    except ValueError:
        raise UsageError(f"config key '{key}': malformed number {obj!r}") from None
    if not math.isfinite(v):
        raise UsageError(f"config key '{key}': must be finite, got {obj!r}")
    return v


def _grid_from(obj, dim: int, unit) -> Grid:
    if not isinstance(obj, dict):
        raise UsageError("config key 'grid': expected an object with 'box' or 'extent' and 'points'")
    extra = set(obj) - {"box", "extent", "points", "freq_unit"}
    if extra:
        raise UsageError(f"config key 'grid': unknown key(s) {sorted(extra)}")
    if "points" not in obj or ("box" in obj) == ("extent" in obj):
        raise UsageError("config key 'grid': needs 'points' and exactly one of 'box' or 'extent'")
    if "box" in obj:
        box = obj["box"]
        if not isinstance(box, list) or len(box) != 2:
            raise UsageError("config key 'grid.box': expected [a, b]")
        extent = [tuple(_number(v, "grid.box") for v in box)] * dim
    else:
        ext = obj["extent"]
        if not isinstance(ext, list) or not all(isinstance(e, list) and len(e) == 2 for e in ext):
            raise UsageError("config key 'grid.extent': expected a list of [a, b] pairs")
        extent = [tuple(_number(v, "grid.extent") for v in e) for e in ext]
    pts = obj["points"]
    points = [pts] * len(extent) if not isinstance(pts, list) else pts
    points = [_number(n, "grid.points") for n in points]
    if any(n != int(n) for n in points):
        raise UsageError("config key 'grid.points': expected integers")
    if unit is None:
        unit = obj.get("freq_unit", FrequencyUnit.CYCLES.value)
    try:
        return Grid(tuple(extent), tuple(int(n) for n in points), FrequencyUnit(unit))
    except ValueError as exc:
        raise UsageError(f"config key 'grid': {exc}") from None


def _source_from(obj) -> SourceSpec:
    try:
        if isinstance(obj, (str, int)) and not isinstance(obj, bool):
            return SourceSpec(normalize_source_id(obj))
        if not isinstance(obj, dict) or len(obj) != 1:
            raise UsageError("config key 'source': expected an example id or one of "
                             "{'example': ...}, {'values': ...}, {'pieces': ...}")
        (kind, body), = obj.items()
        if kind == "example":
            return SourceSpec(normalize_source_id(body))
        if kind == "values":
            vals = np.asarray(body, dtype=float)
            return SourceSpec("custom", values=vals)
        if kind == "pieces":
            if not isinstance(body, list):
                raise UsageError("config key 'source.pieces': expected a list")
            pieces = []
            for item in body:
                if not isinstance(item, dict) or not {"lower", "upper", "coef"} <= set(item) \
                        or set(item) - {"lower", "upper", "coef", "closed"}:
                    raise UsageError("config key 'source.pieces': each piece needs lower, upper, "
                                     "coef and optionally closed")
                pieces.append(Piece(item["lower"], item["upper"], item["coef"], bool(item.get("closed", False))))
            return SourceSpec("custom", pieces=tuple(pieces))
        raise UsageError(f"config key 'source': unknown form {kind!r}")
    except (TypeError, ValueError) as exc:
        raise UsageError(f"config key 'source': {exc}") from None


def load_custom_config(path, freq_unit=None) -> CaseConfig:
    """Validated case configuration from a JSON file.

    Required keys: alpha2, beta, nu, t0, grid, source.  Optional: p, epsilon,
    seed, kinds.  Any other key is rejected.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"--config: {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError(f"--config: {path} must hold a JSON object")
    missing = [k for k in REQUIRED_KEYS if k not in raw]
    if missing:
        raise UsageError(f"config is missing key(s): {', '.join(missing)}")
    extra = sorted(set(raw) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
    if extra:
        raise UsageError(f"config has unknown key(s): {', '.join(extra)}")
    cfg = {**OPTIONAL_KEYS, **raw}

    beta = cfg["beta"] if isinstance(cfg["beta"], list) else [cfg["beta"]]
    beta = [_number(b, "beta") for b in beta]
    try:
        params = ModelParams(_number(cfg["alpha2"], "alpha2"), tuple(beta), _number(cfg["nu"], "nu"))
    except ValueError as exc:
        key = "alpha2" if "alpha2" in str(exc) else "nu" if "nu" in str(exc) else "beta"
        raise UsageError(f"config key '{key}': {exc}") from None
    source = _source_from(cfg["source"])
    if isinstance(cfg["grid"], dict) and "box" in cfg["grid"] and source.dim != len(beta):
        raise UsageError(f"config keys 'beta' and 'source' disagree: beta has {len(beta)} "
                         f"component(s), source is {source.dim}-D")
    # a scalar box is replicated over the source's dimension
    grid = _grid_from(cfg["grid"], source.dim, freq_unit)
    if grid.dim != len(beta):
        raise UsageError(f"config key 'beta': has {len(beta)} components but the grid is {grid.dim}-D")
    if source.dim != grid.dim:
        raise UsageError(f"config key 'source': source is {source.dim}-D but the grid is {grid.dim}-D")
    if source.id == "custom" and source.values is not None and source.values.shape != grid.shape:
        raise UsageError(f"config key 'source': values have shape {source.values.shape}, "
                         f"grid is {grid.shape}")
    kinds = cfg["kinds"] if isinstance(cfg["kinds"], list) else [cfg["kinds"]]
    try:
        kinds = tuple(RegularizerKind.parse(k) for k in kinds)
    except ValueError as exc:
        raise UsageError(f"config key 'kinds': {exc}") from None
    try:
        seed = parse_seed(cfg["seed"])
    except ValueError as exc:
        raise UsageError(f"config key 'seed': {exc}") from None
    fields = {}
    for key in ("t0", "p", "epsilon"):
        fields[key] = _number(cfg[key], key)
    try:
        return CaseConfig(source=source, params=params, grid=grid, seed=seed, kinds=kinds, **fields)
    except ValueError as exc:
        msg = str(exc)
        key = next((k for k in ("t0", "epsilon", "p") if msg.startswith(k)), "config")
        raise UsageError(f"config key '{key}': {msg}") from None


# --------------------------------------------------------------------- args


def _float_arg(flag: str):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"malformed number {text!r}") from None
        if not math.isfinite(v):
            raise argparse.ArgumentTypeError(f"must be finite, got {text!r}")
        return v
    conv.__name__ = flag
    return conv


def _float_list(text):
    out = []
    for part in text.split(","):
        try:
            out.append(float(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"malformed number {part!r}") from None
    return out


def _seed_arg(text):
    try:
        return parse_seed(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _pos_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed integer {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _kind_arg(text):
    try:
        return RegularizerKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="parasource", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def common(p, *, case=True):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--example", help="catalog example, 1-6 or ex1-ex6")
        src.add_argument("--config", type=Path, help="custom case as a JSON file")
        p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
        p.add_argument("--freq-unit", choices=[u.value for u in FrequencyUnit],
                       help="frequency unit of the grid (default: cycles for experiments)")
        if case:
            p.add_argument("--epsilon", type=_float_arg("--epsilon"), help="noise standard deviation")
            p.add_argument("--seed", type=_seed_arg, default=None, help="noise seed (decimal or 0x-hex)")
            p.add_argument("--p", type=_float_arg("--p"), help="smoothness exponent")
            p.add_argument("--t0", type=_float_arg("--t0"), help="measurement time")
            p.add_argument("--kind", type=_kind_arg, action="append", help="regularizer 1, 2 or 3 (repeatable)")
            p.add_argument("--points", type=_pos_int, help="samples per axis")

    common(sub.add_parser("forward", help="solve the forward problem and write u(., t0)"))
    common(sub.add_parser("estimate", help="estimate the source from noisy data"))
    for name, helptext in (("table", "median error table over seeds"),
                           ("figures", "data grids behind the figures")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--seeds", type=_pos_int, help="number of seeds (counting up from --seed)")
        p.add_argument("--epsilons", type=_float_list, help="comma-separated noise levels")
        p.add_argument("--workers", type=_pos_int, help="worker threads (default: PARASOURCE_THREADS or 1)")
        if name == "table":
            p.add_argument("--delta-max-policy", choices=("set", "case"), default="set")

    p = sub.add_parser("verify", help="lemma suite, round-trip and oracle checks")
    p.add_argument("--example", action="append", help="restrict the lemma sweep (repeatable)")
    p.add_argument("--samples", type=_pos_int, default=100_000, help="random samples per lemma")
    p.add_argument("--seed", type=_seed_arg, default=0)
    p.add_argument("--out", type=Path, default=None, help="also write verify.json here")
    p.add_argument("--freq-unit", choices=[u.value for u in FrequencyUnit], default=FrequencyUnit.CYCLES.value)
    return parser


@dataclass
class CliConfig:
    command: str
    case: CaseConfig | None
    out: Path | None
    args: argparse.Namespace


def _case_from_args(args) -> CaseConfig:
    if args.config is not None:
        cfg = load_custom_config(args.config, args.freq_unit)
        changes = {}
        if args.epsilon is not None:
            changes["epsilon"] = args.epsilon
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.p is not None:
            changes["p"] = args.p
        if args.t0 is not None:
            changes["t0"] = args.t0
        if args.kind:
            changes["kinds"] = tuple(args.kind)
        if args.points is not None:
            raise UsageError("--points cannot be combined with --config; set grid.points instead")
        try:
            return cfg.replace(**changes)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    example = args.example or "ex1"
    try:
        kw = dict(epsilon=args.epsilon, seed=args.seed or 0, p=args.p, t0=args.t0, points=args.points)
        if args.kind:
            kw["kinds"] = tuple(args.kind)
        if args.freq_unit:
            kw["freq_unit"] = args.freq_unit
        return example_config(example, **kw)
    except ValueError as exc:
        raise UsageError(f"--example {example}: {exc}") from None


def parse_cli(argv: Sequence[str] | None) -> CliConfig:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return CliConfig("verify", None, args.out, args)
    return CliConfig(args.command, _case_from_args(args), args.out, args)


# ----------------------------------------------------------------- commands


def _tag(cfg: CaseConfig) -> str:
    return cfg.source.id


def _cmd_forward(cli: CliConfig) -> int:
    cfg = cli.case
    f = sample_source(cfg.source, cfg.grid)
    y = forward_map(f, cfg.t0, cfg.params)
    paths = export_fields({f"{_tag(cfg)}_source": f, f"{_tag(cfg)}_forward": y}, cli.out)
    for path in paths:
        print(path)
    return EXIT_OK


def _cmd_estimate(cli: CliConfig) -> int:
    cfg = cli.case
    report = run_case(cfg, keep_fields=True)
    tag = f"{_tag(cfg)}_eps{cfg.epsilon:g}_seed{cfg.seed}"
    fields = {f"{tag}_{name}": fld for name, fld in report.fields.items()}
    paths = export_fields(fields, cli.out)
    json_path = cli.out / f"{tag}_report.json"
    try:
        json_path.write_text(report.to_json() + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report {json_path}: {exc}") from exc
    for path in paths + [json_path]:
        print(path)
    errs = ", ".join(f"{k}={v:.4g}" for k, v in report.errors.items())
    print(f"delta={report.delta:.4g} mu={report.mu:.4g} errors: {errs} "
          f"unregularized={report.unregularized_error:.4g}")
    return EXIT_OK


def _seeds(args) -> list[int]:
    n = args.seeds or (10 if args.command == "table" else 1)
    start = args.seed or 0
    if start + n > 2 ** 64:
        raise UsageError("--seed plus --seeds runs past 2^64")
    return list(range(start, start + n))


def _table_name(cfg: CaseConfig) -> str:
    sid = cfg.source.id
    return f"table{sid[2:]}" if sid.startswith("ex") else "table_custom"


def _cmd_table(cli: CliConfig) -> int:
    cfg, args = cli.case, cli.args
    eps = args.epsilons or list(TABLE_EPSILONS)
    table = run_table(cfg, eps, _seeds(args), delta_max_policy=args.delta_max_policy, workers=args.workers)
    name = _table_name(cfg)
    csv_path = table.write_csv(cli.out / f"{name}.csv")
    json_path = cli.out / f"{name}.json"
    try:
        json_path.write_text(json.dumps(table.to_dict(), indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report {json_path}: {exc}") from exc
    print(csv_path)
    print(json_path)
    print(",".join(table.header()[:-3]))
    for row in table.rows:
        print(f"{row.epsilon:g}," + ",".join(f"{row.errors[f'r{int(k)}']:.4g}" for k in table.kinds)
              + f",{row.unregularized_error:.4g}")
    return EXIT_OK


def _cmd_figures(cli: CliConfig) -> int:
    cfg, args = cli.case, cli.args
    seeds = _seeds(args)
    if len(seeds) != 1:
        raise UsageError("--seeds: figures use a single realization")
    eps = args.epsilons
    if eps is None and cfg.source.id not in EXAMPLES:
        eps = [cfg.epsilon]
    for path in run_figures(cfg.replace(seed=seeds[0]), cli.out, eps, seed=seeds[0], workers=args.workers):
        print(path)
    return EXIT_OK


def run_verification(examples: Sequence[str] = VERIFY_EXAMPLES, samples: int = 100_000, seed: int = 0,
                     freq_unit=FrequencyUnit.CYCLES) -> dict:
    """Lemma sweep over example grids, the noiseless round trip and the RK4 oracle check."""
    out: dict = {"lemmas": {}, "round_trip": None, "oracle": {}, "passed": True}
    for ex in examples:
        cfg = example_config(ex, freq_unit=freq_unit)
        rep = verify_lemma_suite(cfg.params, cfg.t0, cfg.grid, samples=samples, seed=seed)
        out["lemmas"][cfg.source.id] = rep
        out["passed"] &= rep.passed

    cfg = example_config("ex2", epsilon=0.0, freq_unit=freq_unit)
    f = sample_source(cfg.source, cfg.grid)
    err = relative_error(f, estimate_unregularized(forward_map(f, cfg.t0, cfg.params), cfg.t0, cfg.params))
    out["round_trip"] = {"example": "ex2", "relative_error": err, "tolerance": 1e-9, "passed": err <= 1e-9}
    out["passed"] &= err <= 1e-9

    rng = np.random.default_rng(seed)
    grid = Grid.cube(-10.0, 10.0, 257, 1, freq_unit)
    x = grid.axes()[0]
    k = np.arange(1, 9)
    coeffs = rng.standard_normal((2, k.size))
    arg = np.pi * np.outer(x, k) / 10.0
    f = Field(grid, np.cos(arg) @ coeffs[0] + np.sin(arg) @ coeffs[1])
    for eid, d in EXAMPLES.items():
        params = ModelParams(d.params.alpha2, (d.params.beta[0],), d.params.nu)
        exact = forward_map(f, d.t0, params)
        oracle = rk4_oracle_solve(f, d.t0, params, steps=2000)
        disc = relative_error(exact, oracle)
        out["oracle"][eid] = {"discrepancy": disc, "tolerance": 1e-6, "passed": disc <= 1e-6}
        out["passed"] &= disc <= 1e-6
    return out


def _verification_json(res: dict) -> dict:
    return {
        "passed": bool(res["passed"]),
        "lemmas": {k: v.to_dict() for k, v in res["lemmas"].items()},
        "round_trip": res["round_trip"],
        "oracle": res["oracle"],
    }


def _cmd_verify(cli: CliConfig) -> int:
    args = cli.args
    examples = [normalize_source_id(e) for e in args.example] if args.example else list(VERIFY_EXAMPLES)
    t_start = time.perf_counter()
    res = run_verification(examples, args.samples, args.seed, args.freq_unit)
    for ex, rep in res["lemmas"].items():
        print(f"== lemma suite on the {ex} grid")
        print(rep.to_text())
    rt = res["round_trip"]
    print(f"round trip ({rt['example']}, noiseless): relative error {rt['relative_error']:.3e} "
          f"[{'PASS' if rt['passed'] else 'FAIL'}]")
    for eid, o in res["oracle"].items():
        print(f"rk4 oracle ({eid} parameters): discrepancy {o['discrepancy']:.3e} "
              f"[{'PASS' if o['passed'] else 'FAIL'}]")
    if cli.out is not None:
        cli.out.mkdir(parents=True, exist_ok=True)
        path = cli.out / "verify.json"
        path.write_text(json.dumps(_verification_json(res), indent=2) + "\n")
        print(path)
    print(f"verification {'passed' if res['passed'] else 'FAILED'} in {time.perf_counter() - t_start:.1f} s")
    return EXIT_OK if res["passed"] else EXIT_CHECK_FAILED


COMMANDS = {
    "forward": _cmd_forward,
    "estimate": _cmd_estimate,
    "table": _cmd_table,
    "figures": _cmd_figures,
    "verify": _cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cli = parse_cli(argv)
        return COMMANDS[cli.command](cli)
    except UsageError as exc:
        print(f"parasource: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, CaseError, OSError) as exc:
        print(f"parasource: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
