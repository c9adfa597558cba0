import json
import re
import subprocess
import sys

import pytest

from bolab.cli import build_parser, main
from bolab.config import fields_for
from bolab.state import BirkhoffState, state_from_csv, state_to_csv

# small runs of every subcommand; the stochastic ones span several 8192-row blocks
RUNS = {
    "flow": ["--n", "6", "--t", "1.3", "--profile", "1,3,6"],
    "sample": ["--N", "3", "--samples", "20000"],
    "tailmass": ["--N", "128", "--amps-rule", "power_log"],
    "renorm": ["--grid", "8,16,32", "--n", "1,2", "--samples", "20000", "--dump-trajectories"],
    "invariance": ["--N", "8", "--samples", "20000", "--t", "0.3,-2.5"],
    "weakconv": ["--samples", "20000", "--grid", "1,2,4,8", "--N-ref", "64"],
    "gibbs": ["--N", "8", "--samples", "20000"],
}
STOCHASTIC = {"sample", "renorm", "invariance", "weakconv", "gibbs"}


def run_to(tmp_path, sub, fmt, workers, extra=()):
    out = tmp_path / f"{sub}-{fmt}-{workers}.out"
    code = main([sub, "--seed", "21", "--workers", str(workers), "--format", fmt, "--out", str(out),
                 *RUNS[sub], *extra])
    return code, out


def payload(path):
    text = path.read_text()
    return re.sub(r'"runtime_ms": \d+', '"runtime_ms": 0', text)


@pytest.mark.parametrize("sub", list(RUNS))
@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_outputs_identical_across_worker_counts(tmp_path, sub, fmt):
    results = []
    for workers in (1, 2, 8):
        code, out = run_to(tmp_path, sub, fmt, workers)
        assert code == 0
        extras = sorted(p.name.split(".out", 1)[1] for p in tmp_path.glob(out.name + ".*"))
        assert ".manifest.json" in extras
        files = [payload(out)] + [payload(out.with_name(out.name + e)) for e in extras if e != ".manifest.json"]
        results.append(files)
        man = json.loads(out.with_name(out.name + ".manifest.json").read_text())
        if sub in STOCHASTIC:
            assert len({a["worker"] for a in man["substreams"]}) == min(workers, 3)
    assert results[0] == results[1] == results[2]


def test_manifest_contents(tmp_path):
    code, out = run_to(tmp_path, "invariance", "json", 2)
    man = json.loads((tmp_path / (out.name + ".manifest.json")).read_text())
    assert man["version"] == "0.1.0"
    assert man["workers"] == 2
    assert man["config_echo"]["seed"] == 21
    assert {a["worker"] for a in man["substreams"]} == {0, 1}
    assert man["outputs"] == [str(out)]
    body = json.loads(out.read_text())
    assert set(body) == {"config_echo", "per_functional", "seed", "runtime_ms"}
    assert set(body["per_functional"][0]) >= {"id", "mean_before", "mean_after", "std_error", "z", "verdict"}


def test_csv_headers_and_precision(tmp_path):
    code, out = run_to(tmp_path, "sample", "csv", 1)
    lines = out.read_text().splitlines()
    assert lines[0] == "sample,re_1,im_1,re_2,im_2,re_3,im_3"
    assert len(lines) == 20001
    code, out = run_to(tmp_path, "renorm", "csv", 1)
    assert out.read_text().splitlines()[0] == "series,N,N_next,empirical_var,predicted_var,ratio,std_error"
    traj = (tmp_path / (out.name + ".trajectories.csv")).read_text().splitlines()
    assert traj[0] == "sample,mode,N_8,N_16,N_32"
    assert len(traj) == 1 + 2 * 20000


def test_flow_from_state_file(tmp_path):
    z = BirkhoffState([0.5, -0.25j, 0.1 + 0.1j])
    src = tmp_path / "z.csv"
    src.write_text(state_to_csv(z))
    out = tmp_path / "evolved.csv"
    assert main(["flow", "--state", str(src), "--n", "3", "--t", "0", "--out", str(out)]) == 0
    assert state_from_csv(out.read_text()) == z


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("subcommand = tailmass\nN = 16\nsigma = 0.4\nformat = json\n")
    out = tmp_path / "a.json"
    assert main(["tailmass", str(cfg), "--N", "32", "--out", str(out)]) == 0
    body = json.loads(out.read_text())
    assert body["N"] == 32 and body["sigma"] == 0.4
    assert body["classification"] == "converges"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["N"] == 16


def test_negative_control_exits_2(tmp_path, capsys):
    code, _ = run_to(tmp_path, "invariance", "csv", 1, ["--negative-control", "--samples", "100000"])
    assert code == 2


def test_usage_and_config_errors_exit_1(tmp_path, capsys):
    assert main(["renorm", "--seed", "1", "--alpha-p", "2"]) == 1
    assert "converges" in capsys.readouterr().err
    assert main(["sample", "--N", "3"]) == 1
    assert "missing-seed" in capsys.readouterr().err
    assert main(["flow", "--seed", "1", "--out", str(tmp_path / "missing" / "x.csv")]) == 1
    assert "missing" in capsys.readouterr().err
    assert main(["flow", "--state", str(tmp_path / "nope.csv")]) == 1
    assert main(["run", str(tmp_path / "nope.cfg")]) == 1
    with pytest.raises(SystemExit) as info:
        main(["flow", "--no-such-flag"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["teleport"])
    assert info.value.code == 1


def test_degenerate_gibbs_exits_2(capsys):
    assert main(["gibbs", "--seed", "1", "--samples", "10000", "--cutoff-a", "0.001"]) == 2
    assert "effective sample size" in capsys.readouterr().err


def test_help_lists_every_schema_field():
    parser = build_parser()
    sub_parsers = parser._subparsers._group_actions[0].choices
    for sub in RUNS:
        text = sub_parsers[sub].format_help()
        for f in fields_for(sub):
            assert f.flag_for(sub) in text


def test_stdout_mode_and_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "bolab", "tailmass", "--N", "4"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "N,log_product,product"
    assert '"version"' in res.stderr
