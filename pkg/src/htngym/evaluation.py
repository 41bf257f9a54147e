"""Difficulty and deployment metrics, plus the trace renderer."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .env import EnvConfig, HDDLEnv
from .policy import LayoutMismatch, MlpPolicy, RandomPolicy
from .rollout import run_episode


class MalformedTrace(ValueError):
    pass


@dataclass
class DifficultyReport:
    domain: str
    problem: str
    agents: int
    plan_time: float | None  # mean planning seconds per episode
    mean_steps: float | None  # over successful episodes; None means NA
    success_rate: float | None
    episodes: int
    seed: int
    policy: dict
    notes: list[str] = field(default_factory=list)

    def as_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("plan_time")
        return d


def _policy_map(env: HDDLEnv, policy) -> dict:
    if policy is None:
        policy = RandomPolicy(env.layout)
    return {a: policy for a in env.agents}


def measure_difficulty(domain, problem, policy=None, episodes: int = 100, seed: int = 0,
                       config: EnvConfig | None = None, notes=()) -> DifficultyReport:
    """Seeded probabilistic rollouts; episode i uses seed + i."""
    env = HDDLEnv(domain, problem, config=config)
    env.reset(policies=_policy_map(env, policy))
    results = [run_episode(env, seed=seed + i) for i in range(episodes)]
    wins = [r for r in results if r.success]
    descriptor = next(iter(env.policies.values())).descriptor() if env.agents else {}
    return DifficultyReport(
        domain=domain.name,
        problem=problem.name,
        agents=len(env.agents),
        plan_time=statistics.fmean(r.plan_time for r in results) if results else None,
        mean_steps=statistics.fmean(r.steps for r in wins) if wins else None,
        success_rate=len(wins) / len(results) if results else None,
        episodes=episodes,
        seed=seed,
        policy=descriptor,
        notes=list(notes),
    )


@dataclass
class EvalRow:
    episode: int
    discounted_reward: float
    success: bool
    plan_time: float
    plan_steps: int

    FIELDS = ("episode", "discounted_reward", "success", "plan_time", "plan_steps")


def discounted(rewards, gamma: float) -> float:
    total = 0.0
    for t, r in enumerate(rewards):
        total += gamma ** t * r
    return total


def summarize(rows: list[EvalRow]) -> dict:
    """Mean and sample standard deviation per metric; None (NA) when undefined."""
    out = {}
    for name in ("discounted_reward", "success", "plan_time", "plan_steps"):
        xs = [float(getattr(r, name)) for r in rows]
        mean = statistics.fmean(xs) if xs else None
        std = statistics.stdev(xs) if len(xs) > 1 else None
        out[name] = {"mean": mean, "std": std}
    out["episodes"] = len(rows)
    return out


def evaluate_policy(domain, problem, checkpoint, episodes: int = 100, seed: int = 0,
                    gamma: float = 0.99, config: EnvConfig | None = None):
    """Deterministic-mode evaluation of a checkpoint (path or MlpPolicy)."""
    env = HDDLEnv(domain, problem, config=config)
    if isinstance(checkpoint, MlpPolicy):
        policy = checkpoint
        if policy.layout_hash and policy.layout_hash != env.layout.hash:
            raise LayoutMismatch("checkpoint was trained on a different layout")
    elif checkpoint is None:
        policy = RandomPolicy(env.layout)
    else:
        policy = MlpPolicy.load(checkpoint, env.layout)
    env.reset(policies=_policy_map(env, policy))
    rows = []
    for i in range(episodes):
        r = run_episode(env, seed=seed + i, deterministic=True)
        rows.append(EvalRow(i, discounted(r.rewards, gamma), r.success, r.plan_time, r.steps))
    return rows, summarize(rows)


def rows_to_csv(rows: list[EvalRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EvalRow.FIELDS)
    for r in rows:
        w.writerow([r.episode, repr(r.discounted_reward), int(r.success), repr(r.plan_time), r.plan_steps])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[EvalRow]:
    reader = csv.DictReader(io.StringIO(text))
    return [EvalRow(int(d["episode"]), float(d["discounted_reward"]), bool(int(d["success"])),
                    float(d["plan_time"]), int(d["plan_steps"])) for d in reader]


# --- trace rendering ----------------------------------------------------------


def _node_text(node: dict) -> str:
    text = f"{node['name']}({', '.join(node['args'])})"
    if node.get("label"):
        text += f" [{node['label']}]"
    if node.get("progress"):
        text += " done: " + ", ".join(node["progress"])
    return text


def _is_file(text: str) -> bool:
    try:
        return Path(text).is_file()
    except OSError:
        return False


def _load_records(trace) -> list[dict]:
    if isinstance(trace, Path) or (isinstance(trace, str) and "\n" not in trace and _is_file(trace)):
        lines = Path(trace).read_text(encoding="utf-8").splitlines()
    elif isinstance(trace, str):
        lines = trace.splitlines()
    else:
        lines = list(trace)
    records = []
    for n, line in enumerate(lines, 1):
        if isinstance(line, dict):
            records.append(line)
            continue
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedTrace(f"line {n}: {exc.msg}") from None
        if not isinstance(rec, dict) or "step" not in rec or "joint_action" not in rec:
            raise MalformedTrace(f"line {n}: not a step record")
        records.append(rec)
    return records


def render_trace(trace) -> str:
    """ASCII hierarchy trees per step and agent (indentation = depth)."""
    out = []
    for rec in _load_records(trace):
        out.append(f"step {rec['step']}")
        hierarchies = rec.get("hierarchies") or {}
        for agent in sorted(set(rec["joint_action"]) | set(hierarchies)):
            out.append(f"  {agent}: {rec['joint_action'].get(agent, '-')}")
            for depth, node in enumerate(hierarchies.get(agent, ())):
                try:
                    out.append("    " + "  " * depth + _node_text(node))
                except (KeyError, TypeError):
                    raise MalformedTrace(f"step {rec['step']}: bad hierarchy node for {agent}") from None
        if rec.get("env_actions"):
            out.append("  environment: " + ", ".join(rec["env_actions"]))
        if rec.get("completed"):
            out.append("  completed: " + ", ".join(rec["completed"]))
    return "\n".join(out) + ("\n" if out else "")


def mean_or_na(x) -> str:
    return "NA" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.3f}"
