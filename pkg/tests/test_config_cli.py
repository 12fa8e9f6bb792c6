"""Config parsing, validation, and end-to-end CLI runs.

CLI tests go through main() with real argv lists and temporary output
directories, so the argument wiring, exit-code mapping, and file
outputs are all exercised the way a shell user would hit them.
"""

import math
import os
from fractions import Fraction

import pytest

from radonlab import cli
from radonlab.config import DEFAULTS, load_config, parse_p, parse_p_list
from radonlab.errors import (
    ContractionError,
    CoverageError,
    FitError,
    KernelClassError,
    UsageError,
)


# -- exponent parsing --------------------------------------------------------


def test_parse_p():
    assert parse_p("inf") == math.inf
    assert parse_p("Infinity") == math.inf
    assert parse_p("2") == Fraction(2)
    assert parse_p("4/3") == Fraction(4, 3)
    assert parse_p("1.5") == 1.5
    assert parse_p("2e0") == 2.0
    with pytest.raises(UsageError):
        parse_p("two")
    with pytest.raises(UsageError):
        parse_p("1/0")


def test_parse_p_list():
    assert parse_p_list("2, 4/3,8/7") == [Fraction(2), Fraction(4, 3), Fraction(8, 7)]
    with pytest.raises(UsageError):
        parse_p_list("")
    with pytest.raises(UsageError):
        parse_p_list("2, 1")
    with pytest.raises(UsageError):
        parse_p_list("0.5")


# -- config loading ----------------------------------------------------------


def test_defaults_validate():
    cfg = load_config()
    assert cfg.scenario == "translation"
    assert cfg.n == 2  # filled from the scenario dimension
    assert cfg.P == 24 and cfg.grid_P == 24
    assert cfg.p_list == [Fraction(2)]


def test_refine_scales_grid():
    cfg = load_config(None, {"run": {"refine": "2"}})
    assert cfg.grid_P == 48
    assert cfg.P == 24


def test_file_and_overrides(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text("[run]\nscenario = heisenberg\n[grid]\nP = 32\n", encoding="utf-8")
    cfg = load_config(str(path), {"run": {"seed": 7}})
    assert cfg.scenario == "heisenberg"
    assert cfg.n == 3
    assert cfg.P == 32
    assert cfg.seed == 7
    # None overrides are ignored
    cfg = load_config(str(path), {"run": {"seed": None}})
    assert cfg.seed == 0


def test_unknown_section_and_key(tmp_path):
    bad_section = tmp_path / "a.ini"
    bad_section.write_text("[rum]\nseed = 1\n", encoding="utf-8")
    with pytest.raises(UsageError):
        load_config(str(bad_section))
    bad_key = tmp_path / "b.ini"
    bad_key.write_text("[run]\nsped = 1\n", encoding="utf-8")
    with pytest.raises(UsageError):
        load_config(str(bad_key))
    with pytest.raises(UsageError):
        load_config(str(tmp_path / "missing.ini"))


@pytest.mark.parametrize(
    "section,key,value",
    [
        ("run", "scenario", "euclid"),
        ("run", "seed", "-1"),
        ("grid", "P", "4"),
        ("grid", "L", "-2.0"),
        ("family", "mu0", "3"),
        ("family", "grouping", "both"),
        ("family", "t_nodes", "1"),
        ("family", "p", "1"),
        ("kernel", "manifest", "/no/such/file"),
    ],
)
def test_validation_rejects(section, key, value):
    with pytest.raises(UsageError):
        load_config(None, {section: {key: value}})


def test_out_env_fallback(monkeypatch):
    monkeypatch.setenv("RADONLAB_OUT", "/tmp/radon-env")
    assert load_config().out == "/tmp/radon-env"
    assert load_config(None, {"run": {"out": "explicit"}}).out == "explicit"
    monkeypatch.delenv("RADONLAB_OUT")
    assert load_config().out == "runs"


def test_defaults_cover_every_section():
    cfg = load_config()
    for section in DEFAULTS:
        assert section in ("run", "grid", "family", "kernel", "probes", "tolerances")
    assert set(cfg.tol) == set(DEFAULTS["tolerances"])


# -- CLI runs ----------------------------------------------------------------


def write_config(tmp_path, text):
    path = tmp_path / "exp.ini"
    path.write_text(text, encoding="utf-8")
    return str(path)


SMALL = """[run]
scenario = translation
[grid]
P = 16
[family]
J = 2
M = 1
t_nodes = 8
m_max = 2
[probes]
samples = 10000
count = 2
trials = 2
"""


def test_cmd_report(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "r"
    assert cli.main(["report", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "report.csv").read_text().strip().split("\n")
    assert lines[0] == "name,status,measured,threshold"
    assert len(lines) == 7
    assert all(",pass," in line for line in lines[1:])
    assert (out / "report.log").exists()
    echoed = capsys.readouterr().out
    assert "bootstrap" in echoed


def test_cmd_report_unknown_check(tmp_path):
    cfg = write_config(tmp_path, "[run]\nchecks = ball, nosuch\n")
    assert cli.main(["report", "--config", cfg, "--out", str(tmp_path / "r")]) == 2


def test_cmd_ball(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "b"
    assert cli.main(["ball", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "ball.csv").exists()
    text = (out / "doubling.csv").read_text()
    assert text.startswith("delta,ratio,predicted,relative_error,samples,seed")


def test_cmd_kernel(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "k"
    assert cli.main(["kernel", "--config", cfg, "--out", str(out)]) == 0
    from radonlab.kernels import parse_kernel_manifest

    head = parse_kernel_manifest((out / "kernel_manifest.txt").read_text())
    assert head["mu0"] == 1 and head["J"] == 2
    # chain class: no product-estimate rows
    assert (out / "kernel_checks.csv").read_text().strip() == "order,worst_constant"


def test_cmd_kernel_delta0_product(tmp_path):
    cfg = write_config(
        tmp_path,
        SMALL + "[kernel]\nprofile = delta0\n",
    )
    # delta0 needs mu0 = nu
    assert cli.main(["kernel", "--config", cfg, "--out", str(tmp_path / "k")]) == 2
    cfg2 = write_config(tmp_path, SMALL.replace("[probes]", "mu0 = 2\n[probes]") + "[kernel]\nprofile = delta0\n")
    out = tmp_path / "k2"
    assert cli.main(["kernel", "--config", cfg2, "--out", str(out)]) == 0
    rows = (out / "kernel_checks.csv").read_text().strip().split("\n")
    assert len(rows) == 4  # orders 0, 1, 2


def test_cmd_apply_deterministic(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    out1, out2 = tmp_path / "a1", tmp_path / "a2"
    assert cli.main(["apply", "--config", cfg, "--out", str(out1), "--op", "D"]) == 0
    assert cli.main(["apply", "--config", cfg, "--out", str(out2), "--op", "D"]) == 0
    b1 = (out1 / "apply_output.csv").read_bytes()
    b2 = (out2 / "apply_output.csv").read_bytes()
    assert b1 == b2
    assert (out1 / "apply_output.bin").exists()


def test_cmd_apply_roundtrip_input(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    out1 = tmp_path / "a1"
    assert cli.main(["apply", "--config", cfg, "--out", str(out1), "--op", "S", "--index", "1,0"]) == 0
    out2 = tmp_path / "a2"
    rc = cli.main(
        [
            "apply",
            "--config",
            cfg,
            "--out",
            str(out2),
            "--op",
            "B",
            "--input",
            str(out1 / "apply_output.csv"),
        ]
    )
    assert rc == 0
    assert (out2 / "apply_output.csv").exists()


def test_cmd_apply_usage_errors(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "a"
    assert cli.main(["apply", "--config", cfg, "--out", str(out), "--op", "Q"]) == 2
    assert cli.main(["apply", "--config", cfg, "--out", str(out), "--index", "1,2,3"]) == 2


def test_cmd_norms_smoke(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "n"
    assert cli.main(["norms", "--config", cfg, "--out", str(out)]) == 0
    for name in ("decay_fits.csv", "rm_series.csv", "norms.csv", "report.csv"):
        assert (out / name).exists()
    rm = (out / "rm_series.csv").read_text().strip().split("\n")
    assert rm[0] == "M,norm,iters,residual,boundary"
    assert len(rm) == 2  # M = 1 only in this config


def test_cmd_maximal_translation(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "m"
    assert cli.main(["maximal", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "maximal_ratios.csv").read_text().strip().split("\n")
    assert lines[0] == "probe,ratio,min_value"
    assert len(lines) == 3


def test_scenario_validation_through_main(tmp_path):
    bad = write_config(tmp_path, "[run]\nscenario = xst\n")
    # the ball command has no xst family
    assert cli.main(["ball", "--config", bad, "--out", str(tmp_path / "o")]) == 2
    trans3 = write_config(tmp_path, "[run]\nscenario = translation\n[grid]\nn = 1\n[family]\nnu = 2\n")
    assert cli.main(["kernel", "--config", trans3, "--out", str(tmp_path / "o")]) == 2


def test_exit_code_mapping(monkeypatch):
    def boom(exc):
        def fn(cfg):
            raise exc

        return fn

    cases = [
        (UsageError("u"), 2),
        (KernelClassError("k", index=(0, 0), group=1), 3),
        (CoverageError("c", point=(0.0,), where="test"), 4),
        (ContractionError("n", measured=1.5), 5),
        (FitError("f"), 5),
    ]
    for exc, code in cases:
        monkeypatch.setattr(cli, "cmd_ball", boom(exc))
        assert cli.main(["ball"]) == code


def test_parser_requires_command(capsys):
    with pytest.raises(SystemExit):
        cli.main([])
    capsys.readouterr()
