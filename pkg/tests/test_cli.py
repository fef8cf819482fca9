import json

import pytest

from parasource.cli import EXIT_CHECK_FAILED, UsageError, load_custom_config, main
from parasource.experiments import example_config, run_case


def _write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


MINIMAL = {"alpha2": 2.0, "beta": [0.0], "nu": 1.0, "t0": 0.2,
           "grid": {"box": [-2, 2], "points": 201}, "source": "ex3"}


def test_minimal_config_fills_defaults(tmp_path):
    cfg = load_custom_config(_write(tmp_path, MINIMAL))
    assert cfg.p == 1.0 and cfg.epsilon == 0.0 and cfg.seed == 0 and len(cfg.kinds) == 3
    assert cfg.grid.shape == (201,)


@pytest.mark.parametrize("mutate,key", [
    (lambda d: d.pop("nu"), "nu"),
    (lambda d: d.update(extra=1), "extra"),
    (lambda d: d.update(beta=[0.0, 1.0]), "beta"),
    (lambda d: d.update(alpha2="abc"), "alpha2"),
    (lambda d: d.update(source="ex4"), "source"),
    (lambda d: d.update(t0=-1), "t0"),
    (lambda d: d.update(seed="0xzz"), "seed"),
])
def test_config_errors_name_the_key(tmp_path, mutate, key):
    d = json.loads(json.dumps(MINIMAL))
    mutate(d)
    with pytest.raises(UsageError, match=key):
        load_custom_config(_write(tmp_path, d))


def test_config_missing_file(tmp_path):
    with pytest.raises(UsageError, match="--config"):
        load_custom_config(tmp_path / "nope.json")


def test_example6_as_custom_config_matches(tmp_path):
    import math
    d = {"alpha2": 0.4, "beta": [1, -0.5, -0.5], "nu": 0.997, "t0": 3,
         "grid": {"box": [-2 * math.pi, 2 * math.pi], "points": 17}, "p": 3, "epsilon": 0.035, "seed": 0,
         "source": {"example": "ex6"}}
    a = run_case(load_custom_config(_write(tmp_path, d))).to_dict()
    b = run_case(example_config(6, points=17)).to_dict()
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b


def test_pieces_source(tmp_path):
    d = dict(MINIMAL, source={"pieces": [{"lower": [-1], "upper": [0], "coef": [1, 1]},
                                         {"lower": [0], "upper": [1], "coef": [1, -1], "closed": True}]})
    cfg = load_custom_config(_write(tmp_path, d))
    assert cfg.source.id == "custom" and cfg.source.dim == 1


def test_estimate_writes_fields_and_report(tmp_path, capsys):
    rc = main(["estimate", "--example", "3", "--epsilon", "0.002", "--kind", "2", "--seed", "7",
               "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "ex3_eps0.002_seed7_report.json").read_text())
    assert set(report["errors"]) == {"r2"}
    assert (tmp_path / "ex3_eps0.002_seed7_r2.csv").exists()


def test_table_command(tmp_path):
    rc = main(["table", "--example", "1", "--seeds", "2", "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "table1.csv").read_text().splitlines()
    assert lines[0].startswith("epsilon,err_r1,err_r2,err_r3") and len(lines) == 6


def test_forward_and_figures(tmp_path):
    assert main(["forward", "--example", "ex2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "ex2_forward.csv").exists()
    assert main(["figures", "--example", "3", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "ex3_source.csv").exists()


def test_custom_config_through_cli(tmp_path):
    path = _write(tmp_path, dict(MINIMAL, epsilon=1e-3))
    assert main(["estimate", "--config", str(path), "--out", str(tmp_path / "o")]) == 0


@pytest.mark.parametrize("argv,flag", [
    (["estimate", "--bogus"], "--bogus"),
    (["estimate", "--epsilon", "abc"], "--epsilon"),
    (["estimate", "--seed", "-3"], "--seed"),
    (["estimate", "--kind", "9"], "--kind"),
    (["table", "--seeds", "0"], "--seeds"),
    (["estimate", "--example", "12"], "--example"),
    (["estimate", "--t0", "0"], "t0"),
    (["frobnicate"], "frobnicate"),
])
def test_usage_errors_exit_1(argv, flag, capsys, tmp_path):
    assert main(argv + ["--out", str(tmp_path)] if argv[0] != "frobnicate" else argv) == 1
    assert flag in capsys.readouterr().err


def test_verify_exit_status_reflects_suite(tmp_path, capsys):
    rc = main(["verify", "--example", "3", "--samples", "2000", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    data = json.loads((tmp_path / "verify.json").read_text())
    assert data["round_trip"]["passed"] and all(o["passed"] for o in data["oracle"].values())
    # the second filter's convergence-factor inequality fails on this grid
    assert "FAIL  convergence_r2" in out
    assert rc == EXIT_CHECK_FAILED
