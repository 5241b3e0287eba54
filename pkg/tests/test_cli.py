import json
import re
from pathlib import Path

import pytest

from quadblockade.cli import main
from quadblockade.output import CSV_COLUMNS, dumps, load_results, read_csv, results_document


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _value(out, key):
    m = re.search(rf"^{re.escape(key)}\s+(\S+)", out, re.M)
    return float(m.group(1))


def test_point_coherent_limit(capsys):
    code, out, _ = _run(capsys, "point", "--g0", "0", "--delta-c", "0", "--gamma-c", "0.1",
                        "--omega-drive", "0.01")
    assert code == 0
    assert _value(out, "g2_numeric") == pytest.approx(1.0, abs=1e-4)
    assert _value(out, "<a'a>") == pytest.approx(0.04, abs=1e-6)
    for key in ("g2_analytic", "P1", "P2", "truncation"):
        assert re.search(rf"^{re.escape(key)}\b", out, re.M)


def test_point_strong_coupling_spr0(capsys):
    code, out, _ = _run(capsys, "point", "--g0", "0.8", "--drive", "spr:0", "--gamma-c", "0.1",
                        "--omega-drive", "0.01", "--gamma-m", "0.001")
    assert code == 0
    assert _value(out, "g2_numeric") < 1
    d0 = re.search(r"^\s+D0 .*delta_c=(\S+)", out, re.M)
    assert float(d0.group(1)) == pytest.approx(-0.52470, abs=1e-5)
    assert "delta_c=-0.524695" in out.splitlines()[0]


def test_point_unstable_coupling(capsys):
    code, _, err = _run(capsys, "point", "--g0", "-0.3", "--n-photon-max", "4")
    assert code == 1
    assert "s=1" in err


@pytest.mark.parametrize("argv", [["point", "--g0", "abc"], ["point", "--gamma-c", "-1"],
                                  ["point", "--drive", "xyz"], ["frobnicate"],
                                  ["point", "--set", "params.nope=1"],
                                  ["sweep", "--g0", "0.1"]])
def test_parameter_errors_exit_one(capsys, argv):
    assert _run(capsys, *argv)[0] == 1


def test_degenerate_point_exits_two(capsys):
    code, _, err = _run(capsys, "point", "--gamma-c", "0", "--omega-drive", "0")
    assert code == 2
    assert "DegenerateSteadyStateError" in err


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"params.g0": 0.3, "params.gamma_c": 0.2, "params.delta_c": 0.0}))
    out_dir = tmp_path / "out"
    code, out, _ = _run(capsys, "point", "--config", str(cfg), "--gamma-c", "0.5",
                        "--set", "params.g0=0.0", "--out", str(out_dir))
    assert code == 0
    echoed = json.loads((out_dir / "config.json").read_text())
    assert echoed["command"] == "point"
    # file < flags < --set
    assert echoed["params.g0"] == 0.0
    assert echoed["params.gamma_c"] == 0.5
    assert echoed["params.delta_c"] == 0.0
    assert "g0=0 " in out


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("[1, 2]")
    assert _run(capsys, "point", "--config", str(cfg))[0] == 1
    assert _run(capsys, "point", "--config", str(tmp_path / "missing.json"))[0] == 1


def test_sweep_outputs(tmp_path, capsys):
    out_dir = tmp_path / "res"
    code, out, _ = _run(capsys, "sweep", "--g0", "0.8", "--axis", "delta_c=-0.6,-0.52,-0.2",
                        "--out", str(out_dir), "--name", "scan")
    assert code == 0
    for ext in ("csv", "json", "svg"):
        assert (out_dir / f"scan.{ext}").exists()
    header = (out_dir / "scan.csv").read_text().splitlines()[0].split(",")
    assert tuple(header) == CSV_COLUMNS
    assert [c for c in header if not c.startswith("param.")] == [
        "g2_numeric", "g2_analytic", "p1", "p2", "n_phonon_used", "status"]
    rows = read_csv(out_dir / "scan.csv")
    assert [float(r["param.delta_c"]) for r in rows] == [-0.6, -0.52, -0.2]
    assert all(r["status"] == "ok" for r in rows)
    assert (out_dir / "scan.svg").read_text().lstrip().startswith("<svg")
    # re-reading and re-emitting the JSON is byte-identical
    text = (out_dir / "scan.json").read_text()
    name, results = load_results(out_dir / "scan.json")
    assert dumps(results_document(results, name)) == text


def test_sweep_formats_and_2d(tmp_path, capsys):
    out_dir = tmp_path / "m"
    code, _, _ = _run(capsys, "sweep", "--axis", "g0=0.1:0.8:2", "--axis2", "gamma_c=0.1,0.3",
                      "--drive", "spr:0", "--solvers", "analytic", "--formats", "csv,svg",
                      "--out", str(out_dir), "--name", "map")
    assert code == 0
    assert sorted(p.name for p in out_dir.iterdir()) == ["config.json", "map.csv", "map.svg"]
    rows = read_csv(out_dir / "map.csv")
    assert len(rows) == 4 and rows[0]["g2_numeric"] == ""
    assert _run(capsys, "sweep", "--axis", "g0=0.1", "--formats", "pdf",
                "--out", str(out_dir))[0] == 1


def test_sweep_failures_exit_two(tmp_path, capsys):
    code, _, err = _run(capsys, "sweep", "--axis", "g0=-0.3,0.1", "--solvers", "analytic",
                        "--out", str(tmp_path))
    assert code == 2
    assert "skipped" in err


def test_reproduce_small_fig2(tmp_path, capsys):
    out_dir = tmp_path / "fig"
    code, _, _ = _run(capsys, "reproduce", "fig2", "--step", "1.5", "--out", str(out_dir))
    assert code == 0
    rows = read_csv(out_dir / "fig2.csv")
    assert len(rows) == 3 * 6
    assert {r["param.g0"] for r in rows} == {"0.05", "0.3", "0.8"}
    svg = (out_dir / "fig2.svg").read_text()
    assert "stroke-dasharray" in svg
    echoed = json.loads((out_dir / "config.json").read_text())
    assert echoed["reproduce.figure"] == "fig2" and len(echoed["reproduce.specs"]) == 3


def test_validate_quick(capsys):
    code, out, _ = _run(capsys, "validate", "--quick")
    assert code == 0
    assert "7/7 oracles passed" in out
    assert "PASS gamma_c = 0 reports degenerate steady state" in out
    assert "FAIL" not in out
