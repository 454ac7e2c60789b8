"""CLI contract: config validation, exit codes, output formats, determinism."""

import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from robustfolio import cli
from robustfolio.errors import ConfigError


def base_config(**extra) -> dict:
    cfg = {
        "model": {"kind": "binomial", "a": 0.25},
        "utility": {"kind": "log_shifted", "w0": 1.0},
        "wasserstein_p": "inf",
        "action_space": [-0.95, 0.95],
    }
    cfg.update(extra)
    return cfg


def write_config(tmp_path: Path, cfg: dict, name: str = "cfg.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def test_validate_config_accepts_full_config():
    cfg = base_config(delta=0.1,
                      payoff={"kind": "call", "strike": 0.0},
                      output={"path": "out.csv", "format": "csv"},
                      solver={"grid_points": 256, "refinements": 1})
    assert cli.validate_config(cfg) is cfg


@pytest.mark.parametrize("broken", [
    {"unknown_key": 1.0},
    {"delta": -0.1},
    {"model": {"kind": "binomial"}},                      # missing a
    {"model": {"kind": "trinomial", "a": 0.25}},
    {"utility": {"kind": "exponential"}},                 # missing gamma
    {"wasserstein_p": 1.0},                               # needs p > 1
    {"sweep": {"parameter": "zeta", "grid": [0.1, 0.4, 0.1]}},
    {"sweep": {"parameter": "a", "grid": [0.1, 0.4]}},    # grid needs 3 entries
    {"output": {"format": "xml"}},
    {"fixture": {"name": "unknown_family"}},
])
def test_validate_config_rejects(broken):
    cfg = base_config()
    cfg.update(broken)
    with pytest.raises(ConfigError, match="config rejected"):
        cli.validate_config(cfg)


def test_shipped_schema_document_matches_module():
    doc = json.loads(Path("docs/config_schema.json").read_text(encoding="utf-8"))
    assert doc == cli.CONFIG_SCHEMA


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------

def test_solve_exits_zero_and_writes_csv(tmp_path):
    out = tmp_path / "solve.csv"
    rc = cli.main(["solve", "--config", write_config(tmp_path, base_config()),
                   "--out", str(out)])
    assert rc == 0
    header, rows, prov = cli.read_result_csv(out.read_text(encoding="utf-8"))
    assert header == ["pi_star", "V0", "foc_residual", "boundary"]
    assert len(rows) == 1
    assert rows[0][0] == pytest.approx(0.5, abs=1e-8)
    assert rows[0][3] == 0.0
    assert {"config_sha256", "command", "package_version"} <= set(prov)
    assert prov["command"] == "solve"


def test_invalid_config_exits_two_without_output(tmp_path, capsys):
    cfg = base_config(unknown_key=1.0)
    out = tmp_path / "never.csv"
    rc = cli.main(["solve", "--config", write_config(tmp_path, cfg),
                   "--out", str(out)])
    assert rc == 2
    assert not out.exists()
    assert "error:" in capsys.readouterr().err


def test_missing_config_exits_two(capsys):
    assert cli.main(["solve"]) == 2
    assert "needs --config" in capsys.readouterr().err


def test_unparseable_json_exits_two(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    assert cli.main(["solve", "--config", str(path)]) == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_arbitrage_model_exits_three(tmp_path, capsys):
    cfg = base_config(model={"kind": "explicit", "points": [0.5, 1.5],
                             "weights": [0.5, 0.5]})
    out = tmp_path / "never.csv"
    rc = cli.main(["solve", "--config", write_config(tmp_path, cfg),
                   "--out", str(out)])
    assert rc == 3
    assert not out.exists()
    assert "error:" in capsys.readouterr().err


def test_degenerate_sensitivity_exits_three(tmp_path, capsys):
    # untruncated quadrature stand-in for a normal law with exponential tails
    # and a finite transport order: the sensitivity regime is degenerate
    cfg = {
        "model": {"kind": "normal", "mu": 0.1, "sigma": 0.2},
        "utility": {"kind": "exponential", "gamma": 1.0},
        "wasserstein_p": 2.0,
        "action_space": [-1000.0, 1000.0],
    }
    rc = cli.main(["sensitivity", "--config", write_config(tmp_path, cfg)])
    assert rc == 3
    assert "error:" in capsys.readouterr().err


def test_boundary_optimum_exits_three(tmp_path, capsys):
    cfg = base_config(action_space=[0.05, 0.2])  # optimum pinned at 0.2
    rc = cli.main(["sensitivity", "--config", write_config(tmp_path, cfg)])
    assert rc == 3
    capsys.readouterr()


def test_unwritable_output_exits_four(tmp_path, capsys):
    rc = cli.main(["solve", "--config", write_config(tmp_path, base_config()),
                   "--out", str(tmp_path / "no_such_dir" / "out.csv")])
    assert rc == 4
    assert "cannot write" in capsys.readouterr().err


def test_rootless_bracket_exits_four(tmp_path, capsys):
    cfg = base_config(payoff={"kind": "call", "strike": 0.0},
                      solver={"root_bracket": [5.0, 6.0]})
    rc = cli.main(["davis", "--config", write_config(tmp_path, cfg)])
    assert rc == 4
    capsys.readouterr()


# ---------------------------------------------------------------------------
# output contract
# ---------------------------------------------------------------------------

def test_csv_format_contract(tmp_path):
    out = tmp_path / "robust.csv"
    cfg = base_config(payoff={"kind": "power", "k": 3})
    rc = cli.main(["robust", "--config", write_config(tmp_path, cfg),
                   "--delta-grid", "0:0.2:0.05", "--out", str(out)])
    assert rc == 0
    raw = out.read_bytes()
    assert b"\r" not in raw
    text = raw.decode("utf-8")
    assert text.endswith("\n")
    lines = text.split("\n")[:-1]
    data_lines = [ln for ln in lines if not ln.startswith("# ")]
    footer = [ln for ln in lines if ln.startswith("# ")]
    assert data_lines[0] == ("delta,V_delta,pi_delta,transport_cost,"
                             "martingale_residual,davis_price_delta")
    assert len(data_lines) == 1 + 5  # header + one row per radius
    assert footer and all("=" in ln for ln in footer)
    # reals carry 17 significant digits: the parsed row reproduces the float
    header, rows, prov = cli.read_result_csv(text)
    assert [r[0] for r in rows] == pytest.approx([0.0, 0.05, 0.1, 0.15, 0.2])
    assert prov["method"] == "inf_exact"
    for row in rows:
        assert row[3] <= row[0] + 1e-12  # transport cost within budget
    values = [row[1] for row in rows]
    assert all(lo <= hi + 1e-12 for hi, lo in zip(values[:-1], values[1:]))


def test_csv_round_trip_is_bit_exact():
    table = cli.ResultTable(
        columns=["x", "y"],
        rows=[[1.0 / 3.0, 1e-17], [-2.5e300, 0.1]],
        provenance={"note": "round-trip"},
    )
    header, rows, prov = cli.read_result_csv(cli.render(table, "csv"))
    assert header == ["x", "y"]
    assert rows[0][0] == 1.0 / 3.0 and rows[0][1] == 1e-17
    assert rows[1][0] == -2.5e300 and rows[1][1] == 0.1
    assert prov == {"note": "round-trip"}


def test_json_format_contract(tmp_path):
    out = tmp_path / "solve.json"
    rc = cli.main(["solve", "--config", write_config(tmp_path, base_config()),
                   "--out", str(out), "--format", "json"])
    assert rc == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert set(doc) == {"column_order", "columns", "provenance"}
    assert doc["column_order"] == ["pi_star", "V0", "foc_residual", "boundary"]
    assert doc["columns"]["pi_star"][0] == pytest.approx(0.5, abs=1e-8)


def test_json_replaces_non_finite_with_null(tmp_path):
    # sweep without a payoff leaves the davis columns undefined
    cfg = base_config(sweep={"parameter": "a", "grid": [0.2, 0.3, 0.1]})
    out = tmp_path / "sweep.json"
    rc = cli.main(["sweep", "--config", write_config(tmp_path, cfg),
                   "--out", str(out), "--format", "json"])
    assert rc == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert all(v is None for v in doc["columns"]["davis_price"])


def test_stdout_when_no_output_path(tmp_path, capsys):
    rc = cli.main(["solve", "--config", write_config(tmp_path, base_config())])
    assert rc == 0
    captured = capsys.readouterr()
    assert captured.out.startswith("pi_star,V0,")


def test_output_path_from_config_section(tmp_path):
    out = tmp_path / "from_config.csv"
    cfg = base_config(output={"path": str(out), "format": "csv"})
    rc = cli.main(["solve", "--config", write_config(tmp_path, cfg)])
    assert rc == 0
    assert out.exists()


def test_identical_configs_are_byte_identical(tmp_path):
    cfg = base_config(sweep={"parameter": "a", "grid": [0.05, 0.45, 0.05]})
    path = write_config(tmp_path, cfg)
    out1, out2 = tmp_path / "run1.csv", tmp_path / "run2.csv"
    assert cli.main(["sweep", "--config", path, "--out", str(out1)]) == 0
    assert cli.main(["sweep", "--config", path, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_provenance_hash_depends_on_command(tmp_path):
    cfg = base_config(delta=0.1)
    path = write_config(tmp_path, cfg)
    o1, o2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["solve", "--config", path, "--out", str(o1)]) == 0
    assert cli.main(["robust", "--config", path, "--out", str(o2)]) == 0
    _, _, p1 = cli.read_result_csv(o1.read_text(encoding="utf-8"))
    _, _, p2 = cli.read_result_csv(o2.read_text(encoding="utf-8"))
    assert p1["config_sha256"] != p2["config_sha256"]


# ---------------------------------------------------------------------------
# commands end to end
# ---------------------------------------------------------------------------

def test_sweep_rows_track_closed_form(tmp_path):
    out = tmp_path / "sweep.csv"
    rc = cli.main(["sweep", "--config", write_config(tmp_path, base_config()),
                   "--sweep", "a=0.05:0.45:0.05", "--out", str(out)])
    assert rc == 0
    header, rows, _ = cli.read_result_csv(out.read_text(encoding="utf-8"))
    assert header[:2] == ["a", "sharpe"]
    assert len(rows) == 9
    for row in rows:
        a = row[0]
        sharpe = (1.0 - 2.0 * a) / (2.0 * math.sqrt(a * (1.0 - a)))
        v_prime = row[header.index("V_prime0")]
        assert row[1] == pytest.approx(sharpe, abs=1e-10)
        assert v_prime == pytest.approx(-(1.0 - 2.0 * a), abs=1e-10)


def test_davis_command_cross_check(tmp_path):
    cfg = base_config(payoff={"kind": "call", "strike": 0.0})
    out = tmp_path / "davis.csv"
    rc = cli.main(["davis", "--config", write_config(tmp_path, cfg),
                   "--out", str(out)])
    assert rc == 0
    header, rows, _ = cli.read_result_csv(out.read_text(encoding="utf-8"))
    assert header == ["davis_price", "davis_price_root", "davis_prime0"]
    price, root, prime = rows[0]
    assert price == pytest.approx(0.5, abs=1e-10)
    assert root == pytest.approx(price, abs=1e-5)
    assert prime == pytest.approx(0.0, abs=1e-10)


def test_robust_without_delta_exits_two(tmp_path, capsys):
    rc = cli.main(["robust", "--config", write_config(tmp_path, base_config())])
    assert rc == 2
    assert "delta" in capsys.readouterr().err


@pytest.mark.parametrize("argv_extra", [
    ["--delta-grid", "0:0.2"],          # not start:stop:step
    ["--delta-grid", "0:0.2:0"],        # zero step
    ["--delta-grid", "0:0.2:x"],
    ["--delta", "-0.5"],
    ["--sweep", "zeta=0:1:0.5"],
])
def test_bad_grid_arguments_exit_two(tmp_path, argv_extra, capsys):
    rc = cli.main(["robust", "--config", write_config(tmp_path, base_config())]
                  + argv_extra)
    assert rc == 2
    capsys.readouterr()


def test_figures_presets_shapes(tmp_path):
    expected = {
        "fig1": (30, ["mu", "sharpe", "V_prime0", "magnitude"]),
        "fig3-left": (9, ["a", "sharpe", "pi_prime0_q1", "pi_prime0_q2",
                          "pi_prime0_q3"]),
        "fig4": (5, ["kappa", "V_prime0", "V_prime0_limit", "pi_prime0",
                     "pi_prime0_limit", "pi_prime0_variant"]),
    }
    for preset, (n_rows, columns) in expected.items():
        out = tmp_path / f"{preset}.csv"
        rc = cli.main(["figures", preset, "--out", str(out)])
        assert rc == 0
        header, rows, prov = cli.read_result_csv(out.read_text(encoding="utf-8"))
        assert header == columns
        assert len(rows) == n_rows
        assert prov["preset"] == preset


def test_figures_without_preset_exits_two(capsys):
    assert cli.main(["figures"]) == 2
    assert "preset" in capsys.readouterr().err


def test_figures_unknown_preset_exits_two(capsys):
    assert cli.main(["figures", "fig9"]) == 2
    capsys.readouterr()


def test_oracle_check_errors_are_small(tmp_path):
    cfg = {"fixture": {"name": "binomial_log", "params": {"a": 0.25, "q": 2.0}}}
    out = tmp_path / "oracle.csv"
    rc = cli.main(["oracle-check", "--config", write_config(tmp_path, cfg),
                   "--out", str(out)])
    assert rc == 0
    header, rows, prov = cli.read_result_csv(out.read_text(encoding="utf-8"))
    assert prov["fixture"] == "binomial_log"
    err_cols = [j for j, name in enumerate(header) if name.endswith("_err")]
    assert err_cols
    for j in err_cols:
        assert rows[0][j] <= 1e-8


def test_oracle_check_needs_fixture_section(tmp_path, capsys):
    rc = cli.main(["oracle-check", "--config", write_config(tmp_path, {})])
    assert rc == 2
    capsys.readouterr()


def test_console_script_entry_point(tmp_path):
    cfg_path = write_config(tmp_path, base_config())
    proc = subprocess.run([sys.executable, "-c",
                           "import sys; from robustfolio.cli import main; "
                           "sys.exit(main(sys.argv[1:]))",
                           "solve", "--config", cfg_path],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("pi_star,")
