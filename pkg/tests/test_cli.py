import json
import subprocess
import sys

import pytest

from qwtree import __version__
from qwtree.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_coin(capsys):
    code, out, _ = run(["coin", "--coin", "co+:pi/2"], capsys)
    assert code == 0 and "eigenphases" in out and "degenerate no" in out


def test_moments_c_pi(capsys):
    code, out, err = run(["moments", "--coin", "pi", "--n", "12"], capsys)
    assert code == 0 and "memory estimate" in err
    rows = [ln.split(",") for ln in out.splitlines() if not ln.startswith("#")][1:]
    vals = {int(n): float(re) for n, re, _ in rows}
    assert vals[6] == vals[12] == 1.0
    assert all(v == 0 for n, v in vals.items() if n not in (0, 6, 12))
    assert f"# qwtree {__version__}" in out and "alpha=0.0" in out


def test_density_identity(capsys, tmp_path):
    f = tmp_path / "d.csv"
    code, _, _ = run(["density", "--coin", "id", "--grid", "8", "--out", str(f)], capsys)
    assert code == 0
    rows = [ln for ln in f.read_text().splitlines() if not ln.startswith("#")][1:]
    assert len(rows) == 8 and all(float(r.split(",")[1]) == 1.0 for r in rows)


def test_density_pi_routes_to_atom_table(capsys):
    code, out, err = run(["density", "--coin", "pi"], capsys)
    assert code == 10 and "notice" in err
    assert len([ln for ln in out.splitlines() if not ln.startswith("#")]) == 7


def test_density_atoms_exit_code(capsys, tmp_path):
    f = tmp_path / "d.json"
    code, _, _ = run(["density", "--coin", "co-:0.2", "--grid", "64", "--out", str(f)], capsys)
    assert code == 10
    d = json.loads(f.read_text())
    assert d["header"]["tool"] == f"qwtree {__version__}" and len(d["atoms"]) == 2


def test_atoms(capsys):
    code, out, _ = run(["atoms", "--coin", "co+:0.3"], capsys)
    assert code == 0 and out.count(",no") == 6


def test_orbit(capsys):
    code, out, _ = run(["orbit", "--coin", "pi", "--start", "ab:c"], capsys)
    assert code == 0 and "# period: 6" in out
    code, _, _ = run(["orbit", "--coin", "co+:1"], capsys)
    assert code == 2
    code, _, _ = run(["orbit", "--coin", "pi", "--start", "zz"], capsys)
    assert code == 2


def test_branch(capsys, tmp_path):
    f = tmp_path / "b.json"
    code, _, _ = run(["branch", "--coin", "co+:pi/2", "--ray", "0.7", "--rmax", "0.6",
                      "--steps", "16", "--out", str(f)], capsys)
    assert code == 0 and len(json.loads(f.read_text())["points"]) == 17
    code, _, _ = run(["branch", "--coin", "co+:pi/2", "--rmax", "1.5"], capsys)
    assert code == 2


def test_special(capsys):
    code, out, _ = run(["special", "--coin", "sigma", "--kind", "a", "--theta", "0.4",
                        "--delta", "0.3"], capsys)
    assert code == 0 and "essential_ok: True" in out


def test_verify_fast(capsys, tmp_path):
    f = tmp_path / "v.json"
    code, out, _ = run(["verify", "--suite", "fast", "--seed", "1", "--out", str(f)], capsys)
    assert code == 0 and "seed = 1" in out and " 0 fail" in out
    assert json.loads(f.read_text())["seed"] == 1


def test_usage_errors(capsys):
    assert run(["coin", "--coin", "bogus"], capsys)[0] == 2
    assert run(["frobnicate"], capsys)[0] == 2
    assert run(["moments", "--coin", "pi", "--out", "x.txt"], capsys)[0] == 2
    assert run(["--threads", "0", "coin", "--coin", "pi"], capsys)[0] == 2
    assert run(["atoms", "--coin", "co+:1", "--out", "x.parquet"], capsys)[0] == 2


def test_memory_exit_code(capsys, monkeypatch):
    monkeypatch.setenv("QWTREE_MEM_BUDGET", "100000")
    code, _, err = run(["moments", "--coin", "pi", "--n", "30"], capsys)
    assert code == 3 and "largest feasible N" in err


def test_branch_break_writes_diagnostics(capsys, tmp_path, monkeypatch):
    from qwtree import cli
    from qwtree.implicit import BranchError

    def boom(*a, **k):
        raise BranchError("forced", {"theta": 0.1})

    monkeypatch.setattr(cli, "continue_branch", boom)
    diag = tmp_path / "diag.json"
    code, _, err = run(["branch", "--coin", "co+:1", "--diagnostics", str(diag)], capsys)
    assert code == 4 and json.loads(diag.read_text())["diagnostics"] == {"theta": 0.1}


def test_outputs_are_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for f in (a, b):
        assert main(["density", "--coin", "co+:pi/2", "--grid", "32", "--out", str(f)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "qwtree.cli", "--version"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and __version__ in out.stdout
