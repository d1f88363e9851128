import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qfiw.analysis import ScalingSeries, save_series
from qfiw.cli import build_parser, main, parse_wavenumber
from qfiw.ingest import correlations_from_eigensystem, save_correlations

from conftest import FIXTURES, chain_setup

SUBCOMMANDS = ["ed", "cft", "qfi", "fit", "ingest"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help(sub, capsys):
    with pytest.raises(SystemExit) as exc:
        main([sub, "--help"])
    assert exc.value.code == 0
    assert sub in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qfiw", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and all(s in res.stdout for s in SUBCOMMANDS)


@pytest.mark.parametrize("text,value", [
    ("pi", math.pi), ("pi/2", math.pi / 2), ("2pi/3", 2 * math.pi / 3), ("2*pi/3", 2 * math.pi / 3),
    ("0.5", 0.5), ("PI", math.pi),
])
def test_parse_wavenumber(text, value):
    assert parse_wavenumber(text) == pytest.approx(value, rel=1e-15)


def test_ed_routes_agree(capsys):
    code, out, _ = run(capsys, "ed", "--n", "8", "--beta", "8", "--q", "pi")
    assert code == 0
    reports = {r["route"]: r for r in json.loads(out)["reports"]}
    assert abs(reports["direct"]["f_q"] - reports["spectral"]["f_q"]) < 1e-9


def test_ed_singlet(capsys):
    code, out, _ = run(capsys, "ed", "--n", "2", "--beta", "1000", "--q", "pi", "--boundary", "open")
    assert code == 0
    direct = json.loads(out)["reports"][0]
    assert direct["f_q"] == pytest.approx(2.0, abs=1e-9) and direct["depth_qfi"] == 2


def test_ed_odd_ring_exit_2(capsys):
    code, _, err = run(capsys, "ed", "--n", "3", "--boundary", "periodic", "--q", "pi")
    assert code == 2 and "even" in err


def test_ed_writes_files_and_manifest(tmp_path, capsys):
    out = tmp_path / "run"
    assert run(capsys, "ed", "--n", "6", "--beta", "1", "--out", str(out), "--j-mev", "33.5")[0] == 0
    report = json.loads((out / "report.json").read_text())
    assert report["reports"][0]["extras"]["temperature_kelvin"] == pytest.approx(33.5 / 0.08617333, rel=1e-6)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "ed" and manifest["parameters"]["n"] == 6
    assert "timestamp" in manifest and "timestamp" not in (out / "report.json").read_text()
    code, qout, _ = run(capsys, "qfi", str(out / "spectrum.csv"))
    assert code == 0
    grid_f = json.loads(qout)["f_q"]
    assert abs(grid_f - report["reports"][0]["f_q"]) < 2e-3


def test_outputs_are_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "ed", "--n", "4", "--beta", "2", "--out", str(tmp_path / name))
        run(capsys, "cft", "--temp", "0.05", "--temp", "0.1", "--out", str(tmp_path / f"{name}.csv"))
    for f in ("report.json", "spectrum.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cft_curve(tmp_path, capsys):
    out = tmp_path / "cft.csv"
    assert run(capsys, "cft", "--temp", "0.01", "--out", str(out))[0] == 0
    header, row = out.read_text().splitlines()
    assert header == "T,S_pi,epsilon,f_q,depth,t_q"
    assert int(row.split(",")[4]) >= 6
    assert (tmp_path / "cft.csv.manifest.json").exists()


def test_cft_domain_error(capsys):
    code, _, err = run(capsys, "cft", "--t0", "0.5", "--temp", "1.0")
    assert code == 2 and "t0" in err


def test_qfi_zero_grid(tmp_path, capsys):
    p = tmp_path / "z.csv"
    p.write_text("# q=3.141592653589793 beta=4\nomega,value\n" + "".join(f"{w / 10},0\n" for w in range(-10, 11)))
    code, out, _ = run(capsys, "qfi", str(p))
    rep = json.loads(out)
    assert code == 0 and rep["f_q"] == 0.0 and rep["depth_qfi"] == 1


def test_qfi_missing_beta(tmp_path, capsys):
    p = tmp_path / "z.csv"
    p.write_text("# q=3.14\nomega,value\n0,1\n1,1\n")
    assert run(capsys, "qfi", str(p))[0] == 2


def test_missing_file_exit_2(tmp_path, capsys):
    assert run(capsys, "qfi", str(tmp_path / "nope.csv"))[0] == 2


def test_fit_self_and_exclusion(tmp_path, capsys):
    betas = np.array([4.0, 8.0, 16.0, 32.0, 64.0])
    save_series(ScalingSeries(betas, 0.075 * np.log(4.5 * betas) ** 1.5), tmp_path / "s.csv")
    code, out, _ = run(capsys, "fit", str(tmp_path / "s.csv"), "--target-temp", "0.01")
    payload = json.loads(out)
    assert code == 0
    assert payload["fit"]["d_fit"] == pytest.approx(0.075, abs=1e-9)
    assert payload["fit"]["t0_fit"] == pytest.approx(4.5, abs=1e-9)
    assert payload["predictions"][0]["extrapolated"]
    code, out, _ = run(capsys, "fit", str(tmp_path / "s.csv"), "--exclude-lowest")
    fit = json.loads(out)["fit"]
    assert fit["n_points"] == 4 and fit["excluded_points"] == [64.0]


def test_fit_cft_series(tmp_path, capsys):
    from qfiw.cft import qfi_cft

    betas = np.geomspace(4, 100, 10)
    save_series(ScalingSeries(betas, [qfi_cft(1 / b) for b in betas]), tmp_path / "c.csv")
    code, out, _ = run(capsys, "fit", str(tmp_path / "c.csv"))
    assert code == 0 and json.loads(out)["fit"]["r_squared"] > 0.99


def test_ingest_pipeline(tmp_path, capsys):
    es, ens, _ = chain_setup(4, 2.0)
    save_correlations(correlations_from_eigensystem(es, ens, 0, 0.1, 40.0), tmp_path / "g.csv")
    out = tmp_path / "spec"
    code, _, _ = run(capsys, "ingest", str(tmp_path / "g.csv"), "--all-q", "--normalize", "--out", str(out))
    assert code == 0
    summary = json.loads((out / "ingest.json").read_text())
    assert summary["scale_factor"] == pytest.approx(1.0, abs=1e-6)
    assert len(summary["spectra"]) == 4
    manifest = json.loads((out / "manifest.json").read_text())
    assert list(manifest["inputs"].values())[0] and len(list(manifest["inputs"].values())[0]) == 64
    code, qout, _ = run(capsys, "qfi", str(out / "spectrum_002.csv"))
    assert code == 0 and json.loads(qout)["q"] == pytest.approx(math.pi)


def test_ingest_needs_q(tmp_path, capsys):
    code, _, err = run(capsys, "ingest", str(FIXTURES / "minimal_gxt.csv"), "--out", str(tmp_path))
    assert code == 2 and "--q" in err


def test_thread_cap_env(monkeypatch, capsys):
    monkeypatch.setenv("QFIW_THREADS", "1")
    assert run(capsys, "ed", "--n", "4", "--beta", "1")[0] == 0


def test_parser_lists_all_subcommands():
    text = build_parser().format_help()
    assert all(s in text for s in SUBCOMMANDS)
