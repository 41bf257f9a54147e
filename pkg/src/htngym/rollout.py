"""Episode loop: plan, step the environment, let U sweep the hierarchies."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .env import HDDLEnv
from .planner import Decision, plan_step


@dataclass
class EpisodeResult:
    seed: int | None
    steps: int
    success: bool
    rewards: list[float] = field(default_factory=list)
    plan_time: float = 0.0
    trace: list[dict] = field(default_factory=list)


def plan_joint(env: HDDLEnv, layout=None, deterministic: bool = False, record: bool = False):
    """Joint action for the current state; returns (joint action, decisions)."""
    g = env.grounding
    layout = layout or env.layout
    if not env.config.decentralized:
        res = plan_step(env.runtimes, g, env.state, env.completed, env.policies, deterministic,
                        env.rng, layout, record=record)
        return res.joint_action, res.decisions
    # every focal agent draws from an identically seeded generator, so agents
    # whose beliefs match the truth reach the same joint decision
    step_seed = int(env.rng.integers(2**63))
    joint, decisions = {}, []
    for name in env.agents:
        focal = env.runtimes[name]
        team = {name: focal, **focal.beliefs}
        res = plan_step(team, g, env.state, env.completed, env.policies, deterministic,
                        np.random.default_rng(step_seed), layout, record=record)
        joint[name] = res.joint_action[name]
        decisions.extend(d for d in res.decisions if d.agent == name)
    return joint, decisions


def run_episode(env: HDDLEnv, seed: int | None = None, deterministic: bool = False, layout=None,
                on_step=None) -> EpisodeResult:
    """Reset with ``seed`` and play until done.

    ``on_step(joint, decisions, result)`` is called after every environment step.
    """
    env.reset(seed=seed)
    out = EpisodeResult(seed, 0, env.all_goals_completed)
    record = on_step is not None
    while not env.done:
        t0 = time.perf_counter()
        joint, decisions = plan_joint(env, layout, deterministic, record)
        out.plan_time += time.perf_counter() - t0
        planned = {a: env.runtimes[a].hierarchy.to_json() for a in env.agents}
        result = env.step(joint)
        env.trace[-1]["hierarchies"] = planned
        out.rewards.append(result.reward)
        if on_step is not None:
            on_step(joint, decisions, result)
    out.steps = env.state.step
    out.success = env.all_goals_completed
    out.trace = list(env.trace)
    return out


__all__ = ["EpisodeResult", "plan_joint", "run_episode", "Decision"]
