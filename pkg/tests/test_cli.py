import json
import subprocess
import sys

import pytest

from htngym.cli import main, parse_config, split_config, UsageError

T1 = ["transport/domain.hddl", "transport/p01-1agent.hddl"]
FIG = ["transport/domain.hddl", "transport/p00-single.hddl"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_usage_errors_exit_2(capsys):
    assert run(capsys)[0] == 2
    assert run(capsys, "bogus")[0] == 2
    code, _, err = run(capsys, "stats", "no/such.hddl", "x.hddl")
    assert code == 2 and json.loads(err)["error"] == "UsageError"


def test_lint_exit_codes(capsys):
    code, out, _ = run(capsys, "lint", "ipc/transport-domain.hddl")
    assert code == 1 and "TASK_EFFECT_MISSING" in out
    assert run(capsys, "lint", "transport/domain.hddl")[0] == 0
    code, out, _ = run(capsys, "lint", "ipc/transport-domain.hddl", "--format", "json")
    assert len(json.loads(out)) == 6


def test_adapt_writes_clean_domain(capsys, tmp_path):
    dest = tmp_path / "adapted.hddl"
    code, _, _ = run(capsys, "adapt", "ipc/transport-domain.hddl", "--agent-type", "vehicle",
                     "--effects-file", "ipc/transport-effects.txt", "-o", str(dest))
    assert code == 0
    assert run(capsys, "lint", str(dest))[0] == 0


def test_stats_keys(capsys):
    code, out, _ = run(capsys, "stats", *T1)
    doc = json.loads(out)
    assert code == 0
    assert doc["objects"] == 8 and doc["grounded_operators"] == 184
    assert doc["lifted_operators"] == 14 and doc["lifted_actions"] == 4
    code, out, _ = run(capsys, "stats", *T1, "--layout", "json")
    assert json.loads(out)["hash"]


def test_run_manifest_reproducible(capsys):
    a = run(capsys, "run", *FIG, "--episodes", "5", "--no-timing")[1]
    b = run(capsys, "run", *FIG, "--episodes", "5", "--no-timing")[1]
    assert a == b
    doc = json.loads(a)
    assert doc["manifest"]["inputs"] == FIG and doc["success_rate"] == 1.0
    csv_text = run(capsys, "run", *FIG, "--episodes", "5", "--report", "csv")[1]
    assert csv_text.startswith("# manifest {")


def test_plan_then_render(capsys, tmp_path):
    trace = tmp_path / "t.jsonl"
    assert run(capsys, "plan", *FIG, "--trace", str(trace), "--seed", "1")[0] == 0
    lines = trace.read_text().splitlines()
    assert lines and all(json.loads(l)["joint_action"] for l in lines)
    code, out, _ = run(capsys, "render", str(trace))
    assert code == 0 and out.startswith("step ")
    code, out, _ = run(capsys, "plan", *FIG, "--render", "ascii", "--decentralized", "--deterministic")
    assert code == 0 and "truck-0" in out


def test_render_malformed_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{nope\n")
    assert run(capsys, "render", str(bad))[0] == 2


def test_train_then_eval(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("horizon = 40\nepochs = 1\nminibatch = 16\nhidden = 8  # small\n")
    ckpt, log = tmp_path / "p.json", tmp_path / "log.csv"
    code, _, err = run(capsys, "train", *FIG, "--out", str(ckpt), "--log", str(log),
                       "--iterations", "2", "--config", str(cfg))
    assert code == 0 and "iteration 1" in err
    assert log.read_text().startswith("# manifest ")
    code, out, _ = run(capsys, "eval", *FIG, "--policy", str(ckpt), "--episodes", "2", "--no-timing")
    doc = json.loads(out)
    assert code == 0 and doc["summary"]["episodes"] == 2
    # a checkpoint for one layout is refused on another
    assert run(capsys, "eval", *T1, "--policy", str(ckpt), "--episodes", "1")[0] == 1


def test_config_parsing():
    cfg = parse_config("max_steps = 20\nstrict = true\n# comment\nlearning_rate = 1e-3\n")
    env, ppo, _ = split_config(cfg)
    assert env.max_steps == 20 and env.strict is True and ppo.learning_rate == 1e-3
    with pytest.raises(UsageError):
        split_config({"nonsense": 1})
    with pytest.raises(UsageError):
        parse_config("just words\n")


def test_console_script_entry():
    out = subprocess.run([sys.executable, "-m", "htngym.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip()
