import json
import subprocess
import sys
from pathlib import Path

import pytest

from kinkbench.analysis import SWEEP_HEADER, poincare_constants
from kinkbench.cli import main
from kinkbench.energy import ProblemParams, default_grid
from kinkbench.store import artifact_tree, load_record

from cases import setup

DONUT = '{"kind": "donut", "chi": 0.2}'
DG = '{"kind": "double_gaussian", "a": 1.2, "chi": 0.05}'


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out.strip(), err


def _load(path, name):
    return json.loads((path / name).read_text())


def test_profile_donut(tmp_path, capsys):
    code, out, _ = run(capsys, "profile", "--profile", DONUT, "--out", str(tmp_path))
    assert code == 0
    d = Path(out)
    lm = _load(d, "landmarks.json")
    assert lm["zeta"] == pytest.approx(1.41421, abs=1e-5)
    assert lm["xi"] == pytest.approx(2.17, abs=5e-3)
    assert lm["case"] == "B"
    assert (d / "profile.csv").read_text().startswith("x,mu,f\n")
    assert {a["path"] for a in load_record(d)["artifacts"]} == {
        "profile.csv", "landmarks.json", "thresholds.json"}


def test_profile_gaussian_and_double_gaussian(tmp_path, capsys):
    _, out, _ = run(capsys, "profile", "--profile", '{"kind": "gaussian", "chi": 0.5}',
                    "--out", str(tmp_path))
    assert _load(Path(out), "landmarks.json")["xi"] == pytest.approx(0.83255, abs=1e-5)
    _, out, _ = run(capsys, "profile", "--profile", DG, "--out", str(tmp_path))
    assert _load(Path(out), "thresholds.json")["alpha_double_star"] == pytest.approx(2.61, abs=5e-3)


def test_malformed_config_writes_nothing(tmp_path, capsys):
    code, _, err = run(capsys, "minimize", "--profile", '{"kind": "donut", "chi": 0.9}',
                       "--epsilon", "0.05", "--out", str(tmp_path))
    assert code == 1 and "config.profile" in err
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"profile": json.loads(DONUT), "epsilon": 0.05, "colour": 1}))
    code, _, err = run(capsys, "minimize", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 1 and "config.colour" in err
    code, _, err = run(capsys, "minimize", "--profile", DONUT, "--out", str(tmp_path))
    assert code == 1 and "config.epsilon" in err
    assert not any(tmp_path.glob("*/record.json"))


def test_effective_config_merges_flags(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"profile": json.loads(DONUT), "epsilon": 0.05, "alpha": 1.0,
                               "solver": {"max_iters": 50}}))
    code, out, _ = run(capsys, "minimize", "--config", str(cfg), "--alpha", "2",
                       "--print-effective-config")
    eff = json.loads(out)
    assert code == 0
    assert eff["alpha"] == 2.0 and eff["epsilon"] == 0.05
    assert eff["solver"] == {"grad_tol": None, "max_iters": 50, "seeds": None}


def test_minimize_donut_three_zeros(tmp_path, capsys):
    code, out, _ = run(capsys, "minimize", "--profile", DONUT, "--epsilon", "0.02",
                       "--alpha", "1", "--out", str(tmp_path))
    assert code == 0
    d = Path(out)
    ver = _load(d, "verification.json")
    assert ver["ok"] and len(ver["zeros"]) == 3
    for name, chk in ver["checks"].items():
        assert set(chk) == {"ok", "margin"}
    res = _load(d, "result.json")
    assert set(res["energy"]) == {"gradient_term", "mu_term", "quartic_term", "forcing_term",
                                  "total", "renormalized"}
    assert (d / "field.csv").read_text().startswith("x,u\n")


def test_minimize_vanishes_above_eps0(tmp_path, capsys):
    prof, lm = setup("dg")
    # pin the domain: with mu slightly negative far out, eps0 grows with it
    eps, X = 4.0, 8.0
    c = poincare_constants(prof, default_grid(prof, lm, ProblemParams(eps, 0.0), x_max=X))
    assert eps > c.eps0
    code, out, _ = run(capsys, "minimize", "--profile", DG, "--epsilon", str(eps),
                       "--alpha", "0", "--x-max", str(X), "--out", str(tmp_path))
    assert code == 0
    rows = (Path(out) / "field.csv").read_text().splitlines()[1:]
    assert max(abs(float(r.split(",")[1])) for r in rows) < 1e-6


def test_store_reuse_and_force(tmp_path, capsys):
    args = ["profile", "--profile", DG, "--out", str(tmp_path)]
    _, first, _ = run(capsys, *args)
    rec = Path(first) / "record.json"
    stamp = rec.stat().st_mtime_ns
    _, second, _ = run(capsys, *args)
    assert first == second and rec.stat().st_mtime_ns == stamp
    _, third, _ = run(capsys, *args, "--force")
    assert third == first and rec.stat().st_mtime_ns != stamp


def test_env_store_root(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("KINKBENCH_STORE", str(tmp_path / "env"))
    _, out, _ = run(capsys, "profile", "--profile", DG)
    assert out.startswith(str(tmp_path / "env"))


def test_profile_spelling_does_not_change_hash(tmp_path, capsys):
    _, a, _ = run(capsys, "profile", "--profile", '{"kind": "donut", "chi": 0.2}', "--out", str(tmp_path))
    _, b, _ = run(capsys, "profile", "--profile", '{"chi": 0.20, "kind": "donut"}', "--out", str(tmp_path))
    assert a == b


def test_sweep_failing_row_exit_2(tmp_path, capsys):
    code, out, _ = run(capsys, "sweep", "--profile", DG, "--epsilon", "0.00001,0.08",
                       "--alpha", "1", "--plot", "--out", str(tmp_path))
    assert code == 2
    d = Path(out)
    lines = (d / "sweep.csv").read_text().splitlines()
    assert lines[0] == ",".join(SWEEP_HEADER)
    bad = [ln for ln in lines[1:] if "grid too fine" in ln]
    assert len(bad) == 1
    assert (d / "fields" / "eps=0.08_alpha=1.0.csv").exists()
    assert (d / "runs" / "eps=0.08_alpha=1.0.json").exists()


def test_classify_and_verify_stored_run(tmp_path, capsys):
    _, src, _ = run(capsys, "minimize", "--profile", DONUT, "--epsilon", "0.04", "--alpha", "1",
                    "--out", str(tmp_path))
    code, out, _ = run(capsys, "classify", "--profile", DONUT, "--source", src, "--out", str(tmp_path))
    assert code == 0
    kinks = _load(Path(out), "kinks.json")["kinks"]
    assert [k["type"] for k in kinks] == ["shadow", "giant", "shadow"]
    code, out, _ = run(capsys, "verify", "--profile", DONUT, "--source", src, "--out", str(tmp_path))
    assert code == 0 and _load(Path(out), "verification.json")["ok"]


def test_classify_bad_source(tmp_path, capsys):
    code, _, err = run(capsys, "classify", "--profile", DONUT, "--source", str(tmp_path),
                       "--out", str(tmp_path))
    assert code == 1 and "config.source" in err


def test_threshold_command(tmp_path, capsys):
    code, out, _ = run(capsys, "threshold", "--profile", DG, "--epsilon", "0.08",
                       "--criterion", "odd_zero_count_change", "--bracket", "1.5,2.5",
                       "--config", _width_cfg(tmp_path), "--out", str(tmp_path))
    assert code == 0
    est = _load(Path(out), "threshold.json")
    assert est["alpha_lo"] < est["estimate"] < est["alpha_hi"]
    assert est["closed_form"] == pytest.approx(2.0102908511764814)


def _width_cfg(tmp_path):
    p = tmp_path / "w.json"
    p.write_text(json.dumps({"threshold": {"width": 0.05}}))
    return str(p)


def test_bit_identical_reruns(tmp_path, capsys):
    args = ["sweep", "--profile", DONUT, "--epsilon", "0.08", "--alpha", "0,1", "--plot"]
    _, a, _ = run(capsys, *args, "--out", str(tmp_path / "a"))
    _, b, _ = run(capsys, *args, "--out", str(tmp_path / "b"))
    assert artifact_tree(a) == artifact_tree(b)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "kinkbench.cli", "profile", "--profile", DG,
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / proc.stdout.strip().split("/")[-1] / "record.json").exists()
