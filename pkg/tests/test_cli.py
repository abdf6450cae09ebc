import csv
import io
import json
import math

import pytest

from d2dregion import cli
from d2dregion.heavy_load import coefficients, optimize_scheme
from d2dregion.model import Deployment, OperationalPoint, Scheme
from d2dregion.montecarlo import McEstimate


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_rate_csv_preamble_and_header(capsys):
    code, out, _ = run(capsys, "rate", "--p", "0.5", "--q", "0.5")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# d2dregion ")
    assert lines[1].startswith("# config: ")
    cfg = json.loads(lines[1][len("# config: "):])
    assert cfg["command"] == "rate" and cfg["theta_db"] == -6.0
    assert lines[2].split(",") == cli.COLUMNS["rate"]
    (row,) = table(out)
    assert float(row["gain"]) > 1


def test_rate_without_d2d_has_unit_gain(capsys):
    for dep in ("overlay", "underlay"):
        code, out, _ = run(capsys, "rate", "--p", "0", "--deployment", dep, "--format", "json")
        row = json.loads(out)["rows"][0]
        assert code == 0 and row["gain"] == pytest.approx(1.0, rel=1e-12)


def test_threshold_converted_from_db_once(capsys):
    _, out, _ = run(capsys, "region", "--theta-db", "10", "--scheme", "1", "--deployment", "overlay",
                    "--format", "json")
    row = json.loads(out)["rows"][0]
    ref = coefficients(OperationalPoint.from_ratios(10, 10, 0.4, 10.0, 4.0))
    assert row["c1"] == pytest.approx(ref.c1, rel=1e-14)


def test_absolute_inputs(capsys):
    _, a, _ = run(capsys, "region", "--absolute", "--lambda-a", "4", "--cue-per-cell", "40",
                  "--due-per-cell", "40", "--rmax", "0.1", "--format", "json")
    _, b, _ = run(capsys, "region", "--lambda-a", "4", "--rmax", "0.4", "--format", "json")
    ra, rb = json.loads(a)["rows"], json.loads(b)["rows"]
    for x, y in zip(ra, rb):
        assert x["c2"] == pytest.approx(y["c2"], rel=1e-12) and x["in_region"] == y["in_region"]


def test_optimize_matches_library(capsys):
    code, out, _ = run(capsys, "optimize", "--rmax", "1e-3", "--scheme", "1", "--format", "json")
    rows = json.loads(out)["rows"]
    assert code == 0 and [r["deployment"] for r in rows] == ["overlay", "underlay"]
    c = coefficients(OperationalPoint.from_ratios(10, 10, 1e-3, -6.0, 4.0))
    for r in rows:
        ref = optimize_scheme(c, Scheme.S1, Deployment(r["deployment"]))
        assert r["gain"] == ref.gain
    assert rows[0]["gain"] == pytest.approx(6.66, abs=0.01)
    assert rows[1]["gain"] == pytest.approx(12.83, abs=0.01)


def test_optimize_all_schemes(capsys):
    _, out, _ = run(capsys, "optimize")
    rows = table(out)
    assert len(rows) == 2 * len(Scheme)


def test_region_bounds_only_for_underlay_3d(capsys):
    _, out, _ = run(capsys, "region", "--format", "json")
    for r in json.loads(out)["rows"]:
        has = r["scheme"] == "3-d" and r["deployment"] == "underlay"
        assert (r["inner_3d_bound"] is not None) == has


def test_boundary_and_notes(capsys):
    code, out, _ = run(capsys, "boundary", "--scheme", "1", "--deployment", "overlay", "--resolution", "12")
    assert code == 0 and len(table(out)) > 0
    code, out, _ = run(capsys, "boundary", "--scheme", "3-d", "--deployment", "underlay", "--resolution", "6")
    assert "# note: entire window inside" in out and table(out) == []


def test_levelset(capsys):
    code, out, _ = run(capsys, "levelset", "--scheme", "3-p", "--deployment", "overlay", "--gain", "1.5",
                       "--resolution", "8", "--format", "json")
    assert code == 0 and json.loads(out)["rows"]
    code, _, err = run(capsys, "levelset", "--scheme", "3-p", "--deployment", "overlay", "--gain", "0.5")
    assert code == 2 and json.loads(err)["error"] == "invalid input"


def test_mc_validate_small(capsys):
    code, out, _ = run(capsys, "mc-validate", "--scheme", "1", "--deployment", "overlay", "--rmax", "0.8",
                       "--realizations", "30", "--mean-ap-count", "10", "--format", "json")
    (row,) = json.loads(out)["rows"]
    assert code == 0 and row["realizations"] == 30
    assert row["gain_mc"] > 0 and row["mc_stderr"] >= 0


def test_sweeps_analytic_only(capsys):
    code, out, _ = run(capsys, "sweep-rmax", "--no-mc", "--grid", "0.1", "0.8", "--format", "json")
    rows = json.loads(out)["rows"]
    assert code == 0 and len(rows) == 2 * (4 + 5)
    assert all(r["gain_mc"] is None and r["gain_analytic"] >= 1 for r in rows)
    assert all((r["r_th_normalized"] is None) == (r["scheme"] != "3-d") for r in rows)
    code, out, _ = run(capsys, "sweep-density", "--no-mc", "--grid", "1", "5", "--deployment", "overlay")
    assert code == 0 and len(table(out)) == 8


def test_sweep_seeds_differ_per_point(capsys, monkeypatch):
    seen = []
    real = cli.estimate_gains

    def spy(cfg, designs):
        seen.append(cfg.seed)
        return real(cfg, designs)

    monkeypatch.setattr(cli, "estimate_gains", spy)
    run(capsys, "sweep-rmax", "--grid", "0.4", "0.8", "--scheme", "1", "--deployment", "overlay",
        "--realizations", "5", "--mean-ap-count", "5", "--seed", "7")
    assert seen == [7, 8]


def test_json_round_trip(capsys, tmp_path):
    _, first, _ = run(capsys, "optimize", "--rmax", "0.8", "--theta-db", "3", "--format", "json")
    path = tmp_path / "run.json"
    path.write_text(first)
    _, second, _ = run(capsys, "--config", str(path), "--format", "json")
    assert second == first


def test_flat_config_and_override(capsys, tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"command": "region", "rmax": 0.8, "format": "json"}))
    _, out, _ = run(capsys, "--config", str(path), "region", "--alpha", "3")
    cfg = json.loads(out)["config"]
    assert cfg["rmax"] == 0.8 and cfg["alpha"] == 3.0


def test_output_file(capsys, tmp_path):
    dest = tmp_path / "out.csv"
    code, out, _ = run(capsys, "region", "-o", str(dest))
    assert code == 0 and out == "" and dest.read_text().startswith("# d2dregion")


@pytest.mark.parametrize("argv", [
    ["rate", "--p", "1.5"],
    ["rate", "--p", "0.5", "--alpha", "1.5"],
    ["optimize", "--cue-per-cell", "-1"],
    ["boundary", "--scheme", "1", "--deployment", "overlay", "--resolution", "1"],
    ["mc-validate", "--realizations", "0"],
])
def test_invalid_input_exit_code(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == ""
    assert json.loads(err)["error"] == "invalid input"


def test_bad_config_file(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    code, _, err = run(capsys, "--config", str(path))
    assert code == 2 and "cannot read config" in json.loads(err)["message"]


def test_numerical_failure_exit_code(capsys, monkeypatch):
    monkeypatch.setattr(cli, "estimate_gains", lambda cfg, designs: [McEstimate(math.nan, 0.0, 1)] * len(designs))
    code, out, err = run(capsys, "mc-validate", "--scheme", "1", "--deployment", "overlay", "--realizations", "2")
    assert code == 3 and out == ""
    assert json.loads(err)["error"] == "numerical failure"


def test_help_lists_columns(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    out = capsys.readouterr().out
    assert "CSV columns by command" in out and "sweep-rmax" in out
