import json
import subprocess
import sys

import pytest

from hypvoronoi import __version__
from hypvoronoi.cli import main, parse_config, UsageError
from hypvoronoi.parallel import WORKERS_ENV, default_workers, trial_map


def _square(t, k):
    return t * t + k


def run(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_trial_map_order_and_workers():
    want = [t * t + 3 for t in range(23)]
    assert trial_map(_square, 23, (3,), workers=1) == want
    assert trial_map(_square, 23, (3,), workers=3) == want
    assert trial_map(_square, 0, (3,), workers=2) == []


def test_default_workers_env(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert default_workers() == 3


def test_theta_csv(capsys):
    code, out, _ = run(["theta", "--lambda", "1", "--p", "0.3", "--n", "0", "--trials", "50", "--seed", "7"], capsys)
    assert code == 0
    lines = out.split("\n")
    assert lines[0] == "lambda,p,n,trials,seed,theta_hat,std_err,ci_lo,ci_hi,version"
    row = lines[1].split(",")
    assert row[1] == "0.29999999999999999"
    assert row[3:5] == ["50", "7"] and row[-1] == __version__
    assert "\r" not in out


def test_reruns_are_byte_identical(tmp_path):
    outs = []
    for i, w in enumerate(["1", "2", "1"]):
        path = tmp_path / f"o{i}.csv"
        assert main(["theta", "--p-grid", "0.3,0.6", "--n-grid", "1,2", "--trials", "40",
                     "--seed", "3", "--workers", w, "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_usage_errors(capsys, tmp_path):
    code, _, err = run(["theta", "--p", "1.5", "--n", "1", "--seed", "1"], capsys)
    assert code == 2 and "p" in err
    code, _, err = run(["theta", "--p", "0.5", "--n", "1"], capsys)
    assert code == 2 and "seed" in err
    code, _, err = run(["theta", "--p", "0.5", "--n", "1", "--seed", "1", "--trials", "0"], capsys)
    assert code == 2 and "trials" in err
    code, _, _ = run(["nonsense"], capsys)
    assert code == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"p": 0.3,\n  "n" 1}')
    code, _, err = run(["theta", "--config", str(bad), "--seed", "1"], capsys)
    assert code == 2 and "line 2" in err and "column" in err
    bad.write_text('{"p": 0.3, "n": 1, "colour": "red"}')
    code, _, err = run(["theta", "--config", str(bad), "--seed", "1"], capsys)
    assert code == 2 and "colour" in err


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"lambda": 2.0, "p": 0.3, "n": 1, "trials": 10, "seed": 4}))
    c = parse_config(["theta", "--config", str(cfg), "--trials", "20"])
    assert c.lam == 2.0 and c.trials == 20 and c.seed == 4
    with pytest.raises(UsageError):
        parse_config(["theta", "--p", "0.5", "--n", "1", "--seed", "1", "--event", "two-arm"])


def test_osss_verify(capsys, tmp_path):
    case = tmp_path / "dictator2.json"
    case.write_text(json.dumps({
        "alphabets": [[0, 1], [0, 1]],
        "probabilities": [[[1, 2], [1, 2]], [[1, 2], [1, 2]]],
        "table": [0, 0, 1, 1],
        "tree": {"query": 0, "children": [{"leaf": True}, {"leaf": True}]}}))
    code, out, _ = run(["osss-verify", "--case", str(case)], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["variance"] == "1/4" and rep["rhs"] == "1/2" and rep["holds"]
    code, out, _ = run(["osss-verify", "--sweep", "2"], capsys)
    assert code == 0 and json.loads(out)["functions"] == 16
    code, _, _ = run(["osss-verify"], capsys)
    assert code == 2


def test_audit_failure_exit_code(capsys, monkeypatch):
    import hypvoronoi.cli as cli

    monkeypatch.setattr(cli, "fkg_audit", lambda *a, **k: {"gap": -1.0, "std_error": 0.1, "passed": False})
    code, out, _ = run(["fkg-audit", "--p", "0.5", "--trials", "10", "--seed", "0"], capsys)
    assert code == 1 and json.loads(out)["passed"] is False


@pytest.mark.parametrize("cmd", [
    ["pc", "--n", "2", "--trials", "100", "--seed", "1", "--p-tolerance", "0.05"],
    ["decay", "--p", "0.1", "--n-grid", "1:4:1", "--trials", "200", "--seed", "1"],
    ["fkg-audit", "--p", "0.5", "--event-b", "one-arm:1@0.3,0.5", "--trials", "50", "--seed", "1"],
    ["lemma4-audit", "--p", "0.5", "--n", "1", "--epsilon", "0.5", "--trials", "10", "--seed", "1"],
    ["sharpness", "--n", "2", "--p-grid", "0.2:0.8:0.2", "--trials", "50", "--seed", "1"],
    ["meanfield", "--n", "2", "--pc", "0.2", "--p-grid", "0.5,0.9", "--trials", "50", "--seed", "1"],
])
def test_json_commands_embed_provenance(cmd, capsys):
    code, out, _ = run(cmd, capsys)
    doc = json.loads(out)
    assert code in (0, 1)
    assert doc["seed"] == 1 and doc["version"] == __version__ and "trials" in doc


@pytest.mark.parametrize("cmd", [["reveal", "--k", "1"], ["influence"]])
def test_sector_maps(cmd, capsys):
    code, out, _ = run(cmd + ["--p", "0.5", "--n", "1", "--epsilon", "0.5", "--trials", "5", "--seed", "2"], capsys)
    assert code == 0
    assert out.startswith("k,l,rep_radius,rep_angle,estimate,std_err,")


def test_plot_data(capsys):
    code, out, _ = run(["decay", "--p", "0.1", "--n-grid", "1,2", "--trials", "20", "--seed", "1",
                        "--plot-data"], capsys)
    assert code == 0 and out.startswith("x,y,y_err\n")
    code, out, _ = run(["sectors", "--epsilon", "0.5", "--radius", "2"], capsys)
    assert out.split("\n")[:3] == ["k,N_k,sector_area,epsilon,version",
                                   f"0,1,3.4122762652849024,0.5,{__version__}",
                                   f"1,5,2.788622223297307,0.5,{__version__}"]


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "hypvoronoi", "theta", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "one-arm probability" in out.stdout
