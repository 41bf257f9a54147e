import json

import pytest

from htngym.env import EnvConfig, HDDLEnv
from htngym.evaluation import (
    EvalRow,
    MalformedTrace,
    discounted,
    evaluate_policy,
    mean_or_na,
    measure_difficulty,
    render_trace,
    rows_from_csv,
    rows_to_csv,
    summarize,
)
from htngym.policy import LayoutMismatch, MlpPolicy
from htngym.encoding import build_layout
from htngym.grounding import Grounding
from htngym.rollout import run_episode
from oracles import bundled


def test_difficulty_is_reproducible_without_timing():
    d, p = bundled("transport", "p00-single")
    a = measure_difficulty(d, p, episodes=10, seed=4).as_dict(timing=False)
    b = measure_difficulty(d, p, episodes=10, seed=4).as_dict(timing=False)
    assert a == b
    assert "plan_time" not in a
    assert a["success_rate"] == 1.0 and a["mean_steps"] >= 4


def test_no_success_gives_na_mean_steps():
    d, p = bundled("transport", "p01-1agent")
    r = measure_difficulty(d, p, episodes=5, config=EnvConfig(max_steps=1))
    assert r.success_rate == 0.0
    assert r.mean_steps is None
    assert mean_or_na(r.mean_steps) == "NA"


def test_summary_na_for_short_runs():
    s = summarize([EvalRow(0, -3.0, True, 0.1, 4)])
    assert s["plan_steps"] == {"mean": 4.0, "std": None}
    assert summarize([])["success"]["mean"] is None


def test_discounted_reward():
    assert discounted([1.0, 1.0, 1.0], 0.5) == pytest.approx(1.75)


def test_rows_csv_round_trip():
    rows = [EvalRow(0, -3.25, True, 0.012345678, 4), EvalRow(1, -100.0, False, 1e-7, 100)]
    assert rows_from_csv(rows_to_csv(rows)) == rows


def test_evaluate_is_deterministic_and_checks_layout(tmp_path):
    d, p = bundled("transport", "p01-1agent")
    rows, summary = evaluate_policy(d, p, None, episodes=3)
    assert len({r.plan_steps for r in rows}) == 1
    assert summary["episodes"] == 3
    other = build_layout(Grounding(*bundled("transport", "p02-2agent")))
    with pytest.raises(LayoutMismatch):
        evaluate_policy(d, p, MlpPolicy.create(other, hidden=4), episodes=1)
    path = tmp_path / "pol.json"
    MlpPolicy.create(other, hidden=4).save(path)
    with pytest.raises(LayoutMismatch):
        evaluate_policy(d, p, path, episodes=1)


def test_render_two_agents():
    d, p = bundled("transport", "p02-2agent")
    env = HDDLEnv(d, p)
    run_episode(env, seed=0)
    text = render_trace(json.dumps(r) for r in env.trace)
    blocks = text.split("step ")[1:]
    assert len(blocks) == len(env.trace)
    for block, rec in zip(blocks, env.trace):
        assert block.startswith(f"{rec['step']}\n")
        assert "\n  truck-0: " in block and "\n  truck-1: " in block


def test_render_from_file(tmp_path):
    d, p = bundled("transport", "p00-single")
    env = HDDLEnv(d, p)
    run_episode(env, seed=0)
    path = tmp_path / "t.jsonl"
    env.write_trace(path)
    assert render_trace(path) == render_trace(str(path)) == render_trace(env.trace)


def test_render_empty_trace():
    assert render_trace("") == ""
    assert render_trace([]) == ""


def test_malformed_trace():
    with pytest.raises(MalformedTrace):
        render_trace("{not json\n")
    with pytest.raises(MalformedTrace):
        render_trace('{"step": 0}\n')
    bad = {"step": 0, "joint_action": {"a": "none(a)"}, "hierarchies": {"a": [{"oops": 1}]}}
    with pytest.raises(MalformedTrace):
        render_trace(json.dumps(bad))
