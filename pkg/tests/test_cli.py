import csv
import json
import math

import pytest

from dipolar_gates import cli


def _table(manifest):
    with open(manifest["files"][0]["path"]) as fh:
        return list(csv.DictReader(fh))


def test_parse_sweep():
    (var, vals), = cli.parse_sweep("epsilon:0.01:0.15:8")
    assert var == "epsilon" and len(vals) == 8
    assert vals[2] == 0.05
    (_, logs), = cli.parse_sweep("E_b:1:100:3:log")
    assert logs == pytest.approx([1, 10, 100])
    axes = cli.parse_sweep("a:0:1:2; b:0:1:3")
    assert [a for a, _ in axes] == ["a", "b"]
    assert cli.parse_sweep("x:2:5:1") == [("x", [2.0])]


@pytest.mark.parametrize("text", ["x:0:1", "x:0:1:0", "x:0:1:3:cubic", "x:0:1:3:log"])
def test_parse_sweep_errors(text):
    with pytest.raises(cli.ConfigError):
        cli.parse_sweep(text)


def test_fmt():
    assert cli.fmt(2.5e-5) == "2.5e-05"
    assert cli.fmt(-1e-4) == "-1e-04"
    assert float(cli.fmt(2.5e-5)) == 2.5e-5
    assert cli.fmt(0.1) == "0.1"
    assert cli.fmt(0.0) == "0.0"
    assert cli.fmt(True) == "true" and cli.fmt(None) == "" and cli.fmt(7) == "7"
    assert cli.fmt(math.inf) == "inf"


def test_stark_small_sweep(tmp_path):
    code, man = cli.run("stark_spectrum", {"sweep": "E_b:0:1:3", "max_label": "1"}, tmp_path / "s")
    rows = _table(man)
    assert code == 0 and len(rows) == 3 * 3
    assert {(r["label_N"], r["label_absM"]) for r in rows} == {("0", "0"), ("1", "0"), ("1", "1")}
    assert all(r["status"] == "ok" for r in rows)


def test_two_molecule_single_point(tmp_path):
    code, man = cli.run("two_molecule_trap", {}, tmp_path / "t")
    assert code == 0
    assert [f["path"].rsplit("_", 1)[-1] for f in man["files"]] == ["trap.csv", "geometry.csv", "spectrum.csv"]
    rows = _table(man)
    assert len(rows) == 6
    assert float(rows[0]["spacing"]) == pytest.approx(float(rows[0]["spacing_expected"]), rel=1e-6)


def test_marker_local_modes_files(tmp_path):
    code, man = cli.run("marker_local_modes", {"b_over_a": "0.8"}, tmp_path / "m")
    rows = _table(man)
    assert code == 0
    assert [r["axis"] for r in rows] == ["x", "y", "z"]
    assert all(r["n_local"] == "3" for r in rows)
    names = [f["path"].rsplit("_", 1)[-1] for f in man["files"]]
    assert names == ["modes.csv", "spectrum.csv", "modes.csv", "geometry.csv"]
    for f in man["files"]:
        with open(f["path"]) as fh:
            assert fh.readline().strip() == f["schema"]


def test_chain_and_tweezer(tmp_path):
    code, man = cli.run("chain_spectrum", {}, tmp_path / "c")
    rows = _table(man)
    assert code == 0 and [r["branch"] for r in rows] == ["acoustic_x", "optical_y", "optical_z"]
    code, man = cli.run("tweezer_window", {}, tmp_path / "w")
    (row,) = _table(man)
    assert code == 0 and row["empty"] == "false"
    assert float(row["omega_min"]) < float(row["omega_max"])


def test_gate_map_small(tmp_path):
    code, man = cli.run("gate_map", {"sweep": "epsilon:0.05:0.1:2", "b_over_a": "0.6"}, tmp_path / "g")
    rows = _table(man)
    assert code == 0 and len(rows) == 2
    assert float(rows[0]["ratio"]) == pytest.approx(116.9, abs=0.1)
    assert rows[0]["rwa_ok"] in ("true", "false")


def test_rerun_and_workers_are_byte_identical(tmp_path):
    raw = {"sweep": "omega0_over_nu:1.2:3.0:9;epsilon:0.05:0.1:2"}
    blobs = []
    for tag, workers in (("a", 1), ("b", 1), ("c", 2)):
        _, man = cli.run("pmi_two_molecule", raw, tmp_path / tag, workers=workers)
        blobs.append(open(man["files"][0]["path"], "rb").read())
    assert blobs[0] == blobs[1] == blobs[2]


def test_manifest_reruns_job(tmp_path):
    argv = ["--scenario", "pmi_two_molecule", "--set", "sweep=omega0_over_nu:1.5:2.5:5",
            "--set", "epsilon=0.07", "--out", str(tmp_path / "a")]
    assert cli.main(argv) == 0
    man = json.loads((tmp_path / "a_manifest.json").read_text())
    assert man["parameters"]["omega_perp"] is None
    assert man["parameters"]["epsilon"] == 0.07
    assert man["rows"] == man["rows_ok"] == 5
    assert cli.main(["--config", str(tmp_path / "a_manifest.json"), "--out", str(tmp_path / "b")]) == 0
    first = (tmp_path / "a_pmi_two_molecule.csv").read_bytes()
    assert (tmp_path / "b_pmi_two_molecule.csv").read_bytes() == first


def test_key_value_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("scenario = tweezer_window\nsafety = 5\n")
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "k")]) == 0
    man = json.loads((tmp_path / "k_manifest.json").read_text())
    assert man["parameters"]["safety"] == 5.0


def test_resonant_rows_are_reported(tmp_path, capsys):
    # omega0 / nu = sqrt(5) sits on the breathing mode
    code, man = cli.run("pmi_two_molecule", {"sweep": "omega0_over_nu:2.23606797749979:3.0:11"}, tmp_path / "r")
    rows = _table(man)
    assert code == 0 and man["rows_ok"] == 10
    assert rows[0]["status"] == "ResonanceError" and rows[0]["error"]
    argv = ["--scenario", "pmi_two_molecule", "--set", "sweep=omega0_over_nu:2.23606797749979:3.0:2",
            "--out", str(tmp_path / "q")]
    assert cli.main(argv) == 3
    assert "90%" in capsys.readouterr().err


@pytest.mark.parametrize("argv, code", [
    (["--scenario", "nope"], 1),
    (["--scenario", "chain_spectrum", "--set", "colour=blue"], 1),
    (["--scenario", "chain_spectrum", "--set", "epsilon=abc"], 1),
    (["--scenario", "chain_spectrum", "--set", "sweep=E_b:0:1:2"], 1),
    (["--scenario", "chain_spectrum", "--set", "nonsense"], 1),
    ([], 1),
    (["--scenario", "chain_spectrum", "--set", "omega_perp=0.05"], 2),
])
def test_errors_are_single_line(tmp_path, capsys, argv, code):
    assert cli.main(argv + ["--out", str(tmp_path / "e")]) == code
    err = capsys.readouterr().err
    assert err.startswith("error: ") and err.count("\n") == 1


def test_workers_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.WORKERS_ENV, "0")
    assert cli.main(["--scenario", "tweezer_window", "--out", str(tmp_path / "w")]) == 1
    monkeypatch.setenv(cli.WORKERS_ENV, "two")
    assert cli.main(["--scenario", "tweezer_window", "--out", str(tmp_path / "w")]) == 1
    monkeypatch.setenv(cli.WORKERS_ENV, "2")
    assert cli.main(["--scenario", "tweezer_window", "--out", str(tmp_path / "w")]) == 0
