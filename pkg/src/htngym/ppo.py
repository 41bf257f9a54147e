"""PPO-clip training for the MLP policy.

Every hierarchy extension the planner makes is a decision. A decision's
log-probability is the product-rule score of the chosen grounded operator
normalised over its candidate set; decisions are summed per environment step
and agent, so one sample is one (agent, step) pair.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .encoding import candidate_features, encode_observation
from .planner import Decision
from .policy import MlpPolicy
from .rollout import plan_joint


class NonFiniteLoss(FloatingPointError):
    pass


@dataclass
class PpoConfig:
    learning_rate: float = 3e-4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 4
    minibatch: int = 64
    horizon: int = 2048
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    seed: int = 0
    normalize_advantages: bool = True

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.gae_lambda <= 1.0):
            raise ValueError("gamma and gae_lambda must lie in [0, 1]")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")
        if self.epochs < 1 or self.minibatch < 1 or self.horizon < 1:
            raise ValueError("epochs, minibatch and horizon must be positive")


@dataclass
class StepRecord:
    observation: np.ndarray  # before planning; feeds the value head
    decisions: list[Decision]
    log_prob: float
    reward: float
    value: float
    done: bool


@dataclass
class EpisodeStats:
    steps: int
    success: bool
    discounted_return: float
    plan_time: float


@dataclass
class Trajectory:
    agent: str
    steps: list[StepRecord] = field(default_factory=list)
    last_value: float = 0.0  # bootstrap for a trajectory cut mid-episode
    episodes: list[EpisodeStats] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)


def _value(policy, obs) -> float:
    if isinstance(policy, MlpPolicy):
        return policy.evaluate(obs)[1]
    return 0.0


def collect_rollouts(env, policies: dict | None = None, horizon: int = 2048, seed: int = 0,
                     gamma: float = 0.99) -> dict[str, Trajectory]:
    """Play ``horizon`` environment steps in probabilistic planning mode.

    Episodes restart with seeds ``seed``, ``seed + 1``, ...; the last one may be
    cut off, in which case its value is bootstrapped.
    """
    episode = 0
    env.reset(policies, seed=seed)
    layout = env.layout
    trajs = {a: Trajectory(a) for a in env.agents}
    if env.done:
        return trajs
    ep_steps, ep_return, ep_time = 0, 0.0, 0.0

    def observe():
        return {a: encode_observation(layout, env.state, env.runtimes[a], env.runtimes, env.completed)
                for a in env.agents}

    for _ in range(horizon):
        obs = observe()
        t0 = time.perf_counter()
        joint, decisions = plan_joint(env, layout, deterministic=False, record=True)
        ep_time += time.perf_counter() - t0
        result = env.step(joint)
        ep_return += gamma ** ep_steps * result.reward
        ep_steps += 1
        for a in env.agents:
            mine = [d for d in decisions if d.agent == a]
            trajs[a].steps.append(StepRecord(
                obs[a], mine, float(sum(d.log_prob for d in mine)), result.reward,
                _value(env.policies[a], obs[a]), result.done,
            ))
        if result.done:
            stats = EpisodeStats(ep_steps, env.all_goals_completed, ep_return, ep_time)
            for t in trajs.values():
                t.episodes.append(stats)
            episode += 1
            env.reset(seed=seed + episode)
            ep_steps, ep_return, ep_time = 0, 0.0, 0.0
            if env.done:
                break
    if trajs and not next(iter(trajs.values())).steps[-1].done:
        obs = observe()
        for a, t in trajs.items():
            t.last_value = _value(env.policies[a], obs[a])
    return trajs


def gae(rewards, values, dones, last_value: float, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalised advantage estimates and value targets."""
    n = len(rewards)
    adv = np.zeros(n)
    running = 0.0
    for t in reversed(range(n)):
        if dones[t]:
            next_value, running = 0.0, 0.0
        else:
            next_value = values[t + 1] if t + 1 < n else last_value
        delta = rewards[t] + gamma * next_value - values[t]
        running = delta + gamma * lam * running
        adv[t] = running
    return adv, adv + np.asarray(values, dtype=float)


# --- batches ------------------------------------------------------------------


@dataclass
class DecisionData:
    sample: int  # index of the owning sample
    observation: np.ndarray
    names: np.ndarray
    counts: np.ndarray
    chosen: int


@dataclass
class Batch:
    observations: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    decisions: list[DecisionData]

    def __len__(self) -> int:
        return len(self.old_log_probs)

    def subset(self, idx) -> "Batch":
        idx = np.asarray(idx)
        remap = {int(i): k for k, i in enumerate(idx)}
        decisions = [DecisionData(remap[d.sample], d.observation, d.names, d.counts, d.chosen)
                     for d in self.decisions if d.sample in remap]
        return Batch(self.observations[idx], self.old_log_probs[idx], self.advantages[idx],
                     self.returns[idx], decisions)


def build_batch(trajectories, layout, config: PpoConfig) -> Batch:
    obs, logp, adv, ret, decisions = [], [], [], [], []
    for traj in trajectories:
        if not traj.steps:
            continue
        a, r = gae([s.reward for s in traj.steps], [s.value for s in traj.steps],
                   [s.done for s in traj.steps], traj.last_value, config.gamma, config.gae_lambda)
        for step, ai, ri in zip(traj.steps, a, r):
            k = len(obs)
            obs.append(step.observation)
            logp.append(step.log_prob)
            adv.append(ai)
            ret.append(ri)
            for d in step.decisions:
                names, counts = candidate_features(layout, d.candidates)
                decisions.append(DecisionData(k, d.observation, names, counts, d.chosen))
    if not obs:
        raise ValueError("no samples to build a batch from")
    adv = np.asarray(adv)
    if config.normalize_advantages and len(adv) > 1 and adv.std() > 1e-8:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return Batch(np.asarray(obs), np.asarray(logp, dtype=float), adv, np.asarray(ret), decisions)


# --- loss and gradients ---------------------------------------------------------


def _log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max()
    return z - (m + math.log(np.exp(z - m).sum()))


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def decision_terms(zo: np.ndarray, zb: np.ndarray, d: DecisionData):
    """Log-probability of the chosen candidate and the candidate-set entropy.

    Also returns a closure mapping coefficients (on log-prob, on entropy) to
    gradients with respect to the operator and object logits.
    """
    lo, lb = _log_softmax(zo), _log_softmax(zb)
    s = lo[d.names] + d.counts @ lb
    logp_all = _log_softmax(s)
    p = np.exp(logp_all)
    entropy = float(-(p * logp_all).sum())
    arity = d.counts.sum(axis=1)

    def grads(a: float, b: float):
        g_s = -b * p * (logp_all + entropy)
        g_s = g_s - a * p
        g_s[d.chosen] += a
        d_zo = np.zeros_like(zo)
        np.add.at(d_zo, d.names, g_s)
        d_zo -= g_s.sum() * np.exp(lo)
        d_zb = g_s @ d.counts - (g_s @ arity) * np.exp(lb)
        return d_zo, d_zb

    return float(logp_all[d.chosen]), entropy, grads


@dataclass
class LossParts:
    total: float
    policy: float
    value: float
    entropy: float
    clip_fraction: float


def loss_and_grads(policy: MlpPolicy, batch: Batch, config: PpoConfig, need_grads: bool = True):
    """PPO-clip loss on ``batch``; returns (LossParts, grads or None)."""
    n, nd = len(batch), len(batch.decisions)
    x = np.vstack([batch.observations] + [d.observation[None, :] for d in batch.decisions])
    cache = policy.forward(x)
    zo, zb, v = cache["zo"][n:], cache["zb"][n:], cache["v"][:n]

    new_logp = np.zeros(n)
    entropy = 0.0
    closures = []
    for k, d in enumerate(batch.decisions):
        lp, h, g = decision_terms(zo[k], zb[k], d)
        new_logp[d.sample] += lp
        entropy += h
        closures.append(g)
    entropy /= n

    ratio = np.exp(new_logp - batch.old_log_probs)
    adv = batch.advantages
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1 - config.clip_eps, 1 + config.clip_eps) * adv
    policy_loss = -float(np.minimum(unclipped, clipped).mean())
    value_loss = float(((v - batch.returns) ** 2).mean())
    total = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy
    parts = LossParts(total, policy_loss, value_loss, entropy,
                      float((np.abs(ratio - 1) > config.clip_eps).mean()))
    if not np.isfinite(total):
        raise NonFiniteLoss(f"loss is {total}")
    if not need_grads:
        return parts, None

    # d total / d (summed log-prob) per sample; zero where the clipped branch is active
    active = unclipped <= clipped
    d_logp = np.where(active, -adv * ratio / n, 0.0)
    d_zo = np.zeros((n + nd, policy.n_operators))
    d_zb = np.zeros((n + nd, policy.n_objects))
    for k, (d, g) in enumerate(zip(batch.decisions, closures)):
        d_zo[n + k], d_zb[n + k] = g(d_logp[d.sample], -config.entropy_coef / n)
    d_v = np.zeros(n + nd)
    d_v[:n] = config.value_coef * 2.0 * (v - batch.returns) / n
    return parts, policy.backward(cache, d_zo, d_zb, d_v)


def surrogate_loss(policy: MlpPolicy, batch: Batch, config: PpoConfig) -> float:
    """Clipped policy loss alone (the negated surrogate objective)."""
    return loss_and_grads(policy, batch, config, need_grads=False)[0].policy


class Adam:
    def __init__(self, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for k, g in grads.items():
            m = self.m.setdefault(k, np.zeros_like(g))
            v = self.v.setdefault(k, np.zeros_like(g))
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            params[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def ppo_update(policy: MlpPolicy, batch: Batch, config: PpoConfig,
               optimizer: Adam | None = None, rng: np.random.Generator | None = None):
    """Several epochs of minibatch Adam steps; updates ``policy`` in place.

    Returns the policy and per-epoch mean loss components.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    optimizer = optimizer or Adam(config.learning_rate)
    rng = rng or np.random.default_rng(config.seed)
    stats = {"loss": [], "policy": [], "value": [], "entropy": [], "clip_fraction": []}
    for _ in range(config.epochs):
        order = rng.permutation(len(batch))
        parts = []
        for start in range(0, len(batch), config.minibatch):
            mb = batch.subset(order[start:start + config.minibatch])
            p, grads = loss_and_grads(policy, mb, config)
            optimizer.step(policy.params, grads)
            parts.append(p)
        stats["loss"].append(float(np.mean([p.total for p in parts])))
        stats["policy"].append(float(np.mean([p.policy for p in parts])))
        stats["value"].append(float(np.mean([p.value for p in parts])))
        stats["entropy"].append(float(np.mean([p.entropy for p in parts])))
        stats["clip_fraction"].append(float(np.mean([p.clip_fraction for p in parts])))
    return policy, stats


@dataclass
class TrainRow:
    iteration: int
    episode: int
    loss: float
    discounted_reward: float
    success_rate: float
    plan_time: float
    plan_steps: float

    CSV_HEADER = ("episode", "loss", "cumulative_discounted_reward", "success_rate", "plan_time", "plan_steps")

    def csv_values(self) -> list:
        return [self.episode, self.loss, self.discounted_reward, self.success_rate, self.plan_time, self.plan_steps]


def train(env, policy: MlpPolicy, config: PpoConfig, iterations: int, on_row=None) -> list[TrainRow]:
    """Alternate rollout collection and PPO updates; one shared policy for all agents."""
    optimizer = Adam(config.learning_rate)
    rng = np.random.default_rng(config.seed)
    policies = {a: policy for a in env.agents}
    rows: list[TrainRow] = []
    episodes = 0
    seed = config.seed
    for it in range(iterations):
        trajs = collect_rollouts(env, policies, config.horizon, seed, config.gamma)
        eps = next(iter(trajs.values())).episodes if trajs else []
        seed += len(eps) + 1
        episodes += len(eps)
        batch = build_batch(trajs.values(), env.layout, config)
        _, stats = ppo_update(policy, batch, config, optimizer, rng)
        mean = lambda xs: float(np.mean(xs)) if xs else float("nan")
        row = TrainRow(
            it, episodes, stats["loss"][-1],
            mean([e.discounted_return for e in eps]),
            mean([float(e.success) for e in eps]),
            mean([e.plan_time for e in eps]),
            mean([e.steps for e in eps if e.success]),
        )
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return rows
