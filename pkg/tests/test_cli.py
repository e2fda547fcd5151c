from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from fdefamily.cli import main

POWER = """\
[problem]
beta = {beta}
g = power-law
g_coefficient = {c}
g_exponent = {d}
T = {T}
convention = raw-argument
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def run(tmp_path, cmd, cfg, *extra):
    out = tmp_path / "out"
    code = main([cmd, "--config", str(cfg), "--out", str(out), "--quiet", *extra])
    dirs = sorted(out.iterdir()) if out.exists() else []
    return code, (dirs[-1] if dirs else None)


def manifest(run_dir):
    return json.loads((run_dir / "manifest.json").read_text())


def power_cfg(tmp_path, *, beta=0.5, c=1.0, d=0.5, T=0.5, extra=""):
    return write(tmp_path, POWER.format(beta=beta, c=c, d=d, T=T) + extra)


# {{{ check


def test_check_decay_budget_infeasible(tmp_path):
    cfg = power_cfg(tmp_path, c=8, d=0.75, extra="\n[hypothesis]\nY1 = 1\nY2 = 1\nT = 0.5\n")
    code, out = run(tmp_path, "check", cfg)
    assert code == 2
    report = json.loads((out / "report.json").read_text())
    assert report["pass"] is False
    failed = [c["tag"] for c in report["conditions"] if not c["pass"]]
    assert "decay_budget" in failed
    m = manifest(out)
    assert m["exit_code"] == 2
    assert m["verdicts"]["binding"] == "decay_budget"


def test_check_feasible_certificate(tmp_path):
    extra = """
[hypothesis]
c1 = 8
c2 = 8
delta1 = 0.75
delta2 = 0.7
c_lip = 0.01
Y1 = 1
Y2 = 2e4
T = 0.9995
"""
    cfg = power_cfg(tmp_path, c=8, d=0.75, extra=extra)
    code, out = run(tmp_path, "check", cfg)
    assert code == 0
    assert (out / "certificate.txt").read_text().startswith("beta=")
    assert manifest(out)["verdicts"]["pass"] is True


def test_check_search_power_law(tmp_path):
    cfg = power_cfg(tmp_path, c=8, d=0.75, extra="\n[hypothesis]\ngrid = 12\n")
    code, out = run(tmp_path, "check", cfg)
    assert code == 2
    assert manifest(out)["verdicts"]["binding"] == "contraction"
    assert json.loads((out / "report.json").read_text())["mode"] == "search"


def test_check_missing_g(tmp_path):
    cfg = write(tmp_path, "[problem]\nbeta = 0.5\nT = 0.5\n")
    code, out = run(tmp_path, "check", cfg)
    assert code == 1
    assert out is None


def test_bad_config_reports_line(tmp_path, capsys):
    cfg = power_cfg(tmp_path, extra="\n[mesh]\nn = many\n")
    code, _ = run(tmp_path, "solve", cfg)
    assert code == 1
    assert "run.ini:" in capsys.readouterr().err


# }}}


# {{{ solve


def test_solve_oracle_value(tmp_path):
    cfg = power_cfg(tmp_path, extra="\n[mesh]\nn = 1024\n")
    code, out = run(tmp_path, "solve", cfg)
    assert code == 0
    lines = (out / "y.csv").read_text().splitlines()
    assert lines[0] == "t,value"
    t, y = map(float, lines[-1].split(","))
    assert t == 1.0
    assert y == pytest.approx(1.1107207345, abs=1e-3)
    m = manifest(out)
    assert m["outputs"] == ["y.csv", "x.csv", "trace.csv", "solution.svg"]
    assert m["verdicts"]["converged"] is True
    assert m["out_dir_source"] == "flag"
    ET.parse(out / "solution.svg")


def test_solve_zero_init(tmp_path):
    cfg = power_cfg(tmp_path, extra="\n[solver]\ninit = zero\n")
    code, out = run(tmp_path, "solve", cfg)
    assert code == 0
    data = np.loadtxt(out / "y.csv", delimiter=",", skiprows=1)
    assert np.all(data[:, 1] == 0.0)


def test_solve_non_convergence(tmp_path):
    cfg = power_cfg(tmp_path, extra="\n[solver]\ntol = 1e-16\nmax_iter = 3\n")
    code, out = run(tmp_path, "solve", cfg)
    assert code == 3
    assert manifest(out)["verdicts"]["converged"] is False


def test_solve_requires_convention(tmp_path):
    text = POWER.format(beta=0.5, c=1, d=0.5, T=0.5).replace("convention = raw-argument\n", "")
    code, _ = run(tmp_path, "solve", write(tmp_path, text))
    assert code == 1


def test_solve_replay_is_byte_identical(tmp_path):
    cfg = power_cfg(tmp_path, extra="\n[mesh]\nn = 64\n")
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    assert main(["solve", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    a, b = sorted(out.iterdir())
    assert a != b
    for name in ("y.csv", "x.csv", "trace.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_solve_env_out_dir(tmp_path, monkeypatch):
    cfg = power_cfg(tmp_path, extra="\n[mesh]\nn = 16\n")
    monkeypatch.setenv("FDEFAMILY_OUT", str(tmp_path / "envout"))
    assert main(["solve", "--config", str(cfg), "--quiet", "--seed", "4"]) == 0
    (run_dir,) = (tmp_path / "envout").iterdir()
    assert run_dir.name.startswith("solve-") and run_dir.name.endswith("-seed4")
    m = manifest(run_dir)
    assert m["out_dir_source"] == "env:FDEFAMILY_OUT"
    assert m["seed"] == 4
    assert "g_coefficient" in m["config_snapshot"]


# }}}


# {{{ family


def test_family_three_members(tmp_path):
    cfg = power_cfg(tmp_path, extra="\n[mesh]\nn = 256\n[family]\nT_list = 0.3, 0.5, 0.7\n")
    code, out = run(tmp_path, "family", cfg, "--jobs", "2")
    assert code == 0
    m = manifest(out)
    assert [mem["T"] for mem in m["members"]] == [0.3, 0.5, 0.7]
    assert len(m["pairwise_distances"]) == 3
    assert m["verdicts"]["witness"] is True
    for mem in m["members"]:
        data = np.loadtxt(out / mem["file"], delimiter=",", skiprows=1)
        assert np.all(data[data[:, 0] <= mem["T"], 1:] == 0.0)
    ET.parse(out / "family.svg")


def test_family_singleton(tmp_path):
    cfg = power_cfg(tmp_path, extra="\n[mesh]\nn = 32\n[family]\nT_list = 0.5\n")
    code, out = run(tmp_path, "family", cfg)
    assert code == 0
    assert manifest(out)["pairwise_distances"] == []


def test_family_duplicate_T(tmp_path):
    cfg = power_cfg(tmp_path, extra="\n[family]\nT_list = 0.5, 0.5\n")
    code, out = run(tmp_path, "family", cfg)
    assert code == 1 and out is None


# }}}


# {{{ oracle


def test_oracle_ladder(tmp_path):
    cfg = power_cfg(tmp_path)
    code, out = run(tmp_path, "oracle", cfg)
    assert code == 0
    report = json.loads((out / "oracle.json").read_text())
    assert report["ladder"] == [128, 256, 512]
    assert report["strictly_decreasing"] is True
    errors = report["sup_errors"]
    assert all(b < a for a, b in zip(errors, errors[1:]))
    assert (out / "oracle.csv").read_text().startswith("n,sup_error,order\n")


def test_oracle_classical_limit(tmp_path):
    cfg = power_cfg(tmp_path, beta=0.0, extra="\n[mesh]\nladder = 512\n[solver]\ntol = 1e-13\n")
    code, out = run(tmp_path, "oracle", cfg)
    assert code == 0
    assert json.loads((out / "oracle.json").read_text())["sup_errors"][0] <= 1e-10


def test_oracle_rejects_table(tmp_path):
    (tmp_path / "g.csv").write_text("u,g\n0,0\n1,1\n")
    text = "[problem]\nbeta = 0.5\ng = table\ng_table = g.csv\nT = 0.5\n"
    code, _ = run(tmp_path, "oracle", write(tmp_path, text))
    assert code == 1


# }}}


def test_usage_errors(tmp_path):
    assert main([]) == 1
    assert main(["solve"]) == 1
    assert main(["solve", "--config", str(tmp_path / "missing.ini"), "--quiet"]) == 1
    cfg = power_cfg(tmp_path)
    assert main(["solve", "--config", str(cfg), "--jobs", "0"]) == 1


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "fdefamily", "--version"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("fdefamily ")


def test_run_directories_never_overwritten(tmp_path):
    cfg = power_cfg(tmp_path, extra="\n[mesh]\nn = 8\n")
    out = tmp_path / "out"
    for _ in range(3):
        assert main(["solve", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    names = [p.name for p in out.iterdir()]
    assert len(set(names)) == 3
    assert all(Path(out, n, "manifest.json").exists() for n in names)
