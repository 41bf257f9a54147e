import numpy as np
import pytest

from htngym.env import HDDLEnv
from htngym.policy import MlpPolicy
from htngym.ppo import (
    Adam,
    NonFiniteLoss,
    PpoConfig,
    build_batch,
    collect_rollouts,
    decision_terms,
    gae,
    loss_and_grads,
    ppo_update,
    surrogate_loss,
)
from oracles import DATA, bundled


def naive_gae(rewards, values, dones, last, gamma, lam):
    n = len(rewards)
    out = []
    for t in range(n):
        total, factor = 0.0, 1.0
        for k in range(t, n):
            nxt = 0.0 if dones[k] else (values[k + 1] if k + 1 < n else last)
            total += factor * (rewards[k] + gamma * nxt - values[k])
            if dones[k]:
                break
            factor *= gamma * lam
        out.append(total)
    return np.array(out)


def test_gae_matches_direct_sum():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(1, 12))
        r, v = rng.normal(size=n), rng.normal(size=n)
        d = rng.random(n) < 0.2
        last = float(rng.normal())
        adv, ret = gae(r, v, d, last, 0.97, 0.9)
        assert adv == pytest.approx(naive_gae(r, v, d, last, 0.97, 0.9), abs=1e-12)
        assert ret == pytest.approx(adv + v)


def make_batch(seed=1, horizon=40, hidden=16, scale=1.0):
    d, p = bundled("transport", "p01-1agent")
    env = HDDLEnv(d, p)
    pol = MlpPolicy.create(env.layout, hidden=hidden, seed=seed)
    trajs = collect_rollouts(env, {a: pol for a in env.agents}, horizon=horizon, seed=0)
    batch = build_batch(trajs.values(), env.layout, PpoConfig())
    # move off-policy a little so the ratio is not identically one
    batch.old_log_probs = batch.old_log_probs + np.random.default_rng(0).normal(0, 0.1, len(batch))
    batch.returns = batch.returns * scale
    return env, pol, batch, trajs


def fd_check(pol, batch, cfg, h=1e-4, per_param=10, seed=3):
    _, grads = loss_and_grads(pol, batch, cfg)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in pol.PARAM_ORDER:
        P = pol.params[k]
        for _ in range(per_param):
            i = tuple(int(rng.integers(s)) for s in P.shape)
            old = P[i]
            P[i] = old + h
            lp = loss_and_grads(pol, batch, cfg, False)[0].total
            P[i] = old - h
            lm = loss_and_grads(pol, batch, cfg, False)[0].total
            P[i] = old
            num = (lp - lm) / (2 * h)
            worst = max(worst, abs(num - grads[k][i]) / max(abs(num) + abs(grads[k][i]), 1e-6))
    return worst


def test_finite_difference_gradients():
    # returns scaled down so the value loss does not swamp the difference quotient
    _, pol, batch, _ = make_batch(scale=0.01)
    assert fd_check(pol, batch, PpoConfig()) < 1e-4


def test_finite_difference_entropy_term():
    _, pol, batch, _ = make_batch(scale=0.01)
    assert fd_check(pol, batch, PpoConfig(entropy_coef=1.0, value_coef=0.0)) < 1e-4


def test_decision_terms_logp_matches_direct_product():
    from htngym.ppo import DecisionData

    rng = np.random.default_rng(0)
    zo, zb = rng.normal(size=5), rng.normal(size=4)
    names = np.array([0, 2, 2])
    counts = np.array([[1, 0, 0, 0], [0, 1, 1, 0], [0, 0, 0, 2]], dtype=float)
    lp, ent, _ = decision_terms(zo, zb, DecisionData(0, None, names, counts, 1))
    po, pb = np.exp(zo) / np.exp(zo).sum(), np.exp(zb) / np.exp(zb).sum()
    raw = np.array([po[n] * np.prod(pb ** c) for n, c in zip(names, counts)])
    p = raw / raw.sum()
    assert lp == pytest.approx(np.log(p[1]))
    assert ent == pytest.approx(-(p * np.log(p)).sum())


def test_update_decreases_surrogate():
    _, pol, batch, _ = make_batch()
    cfg = PpoConfig(learning_rate=1e-4, epochs=1, minibatch=len(batch))
    before = surrogate_loss(pol, batch, cfg)
    ppo_update(pol, batch, cfg)
    assert surrogate_loss(pol, batch, cfg) < before


def test_zero_advantage_leaves_heads():
    _, pol, batch, _ = make_batch()
    batch.advantages = np.zeros(len(batch))
    cfg = PpoConfig(entropy_coef=0.0)
    heads = {k: pol.params[k].copy() for k in ("Wo", "bo", "Wb", "bb")}
    ppo_update(pol, batch, cfg)
    for k, v in heads.items():
        assert np.max(np.abs(pol.params[k] - v)) < 1e-6


def test_unclipped_single_epoch_is_vanilla_policy_gradient():
    _, pol, batch, _ = make_batch()
    batch.old_log_probs = np.zeros(len(batch))
    cfg = PpoConfig(clip_eps=1e12, epochs=1, minibatch=len(batch), entropy_coef=0.0, value_coef=0.0)
    # on-policy: old log-probs equal the current ones, so the ratio is one
    x = np.vstack([d.observation for d in batch.decisions])
    f = pol.forward(x)
    for k, d in enumerate(batch.decisions):
        batch.old_log_probs[d.sample] += decision_terms(f["zo"][k], f["zb"][k], d)[0]
    _, grads = loss_and_grads(pol, batch, cfg)

    def vanilla(params):
        saved = pol.params
        pol.params = params
        f = pol.forward(x)
        pol.params = saved
        logp = np.zeros(len(batch))
        for k, d in enumerate(batch.decisions):
            logp[d.sample] += decision_terms(f["zo"][k], f["zb"][k], d)[0]
        return -float((batch.advantages * logp).mean())

    rng = np.random.default_rng(0)
    h = 1e-5
    for key in ("Wo", "Wb", "W1"):
        for _ in range(5):
            i = tuple(int(rng.integers(s)) for s in pol.params[key].shape)
            plus = {k: v.copy() for k, v in pol.params.items()}
            minus = {k: v.copy() for k, v in pol.params.items()}
            plus[key][i] += h
            minus[key][i] -= h
            num = (vanilla(plus) - vanilla(minus)) / (2 * h)
            assert abs(num - grads[key][i]) <= 1e-4 * max(abs(num) + abs(grads[key][i]), 1e-6)
    # and one Adam step moves along exactly that gradient
    expected = {k: v.copy() for k, v in pol.params.items()}
    Adam(cfg.learning_rate).step(expected, grads)
    ppo_update(pol, batch, cfg)
    for k in pol.params:
        assert np.allclose(pol.params[k], expected[k], atol=1e-12)


def test_non_finite_loss():
    _, pol, batch, _ = make_batch()
    batch.returns[0] = np.nan
    with pytest.raises(NonFiniteLoss):
        loss_and_grads(pol, batch, PpoConfig())


def test_config_validation():
    for bad in (dict(gamma=1.5), dict(clip_eps=0), dict(epochs=0)):
        with pytest.raises(ValueError):
            PpoConfig(**bad)


def test_horizon_five():
    d, p = bundled("transport", "p01-1agent")
    env = HDDLEnv(d, p)
    trajs = collect_rollouts(env, None, horizon=5, seed=0)
    steps = trajs["truck-0"].steps
    assert len(steps) == 5
    assert all(s.reward == env.config.step_penalty for s in steps)
    assert all(s.decisions and s.log_prob <= 0 for s in steps[:1])


def test_rollouts_reproducible():
    a = make_batch(horizon=30)[3]["truck-0"]
    b = make_batch(horizon=30)[3]["truck-0"]
    assert [s.reward for s in a.steps] == [s.reward for s in b.steps]
    assert [s.log_prob for s in a.steps] == [s.log_prob for s in b.steps]
    assert all(np.array_equal(x.observation, y.observation) for x, y in zip(a.steps, b.steps))


def test_goals_done_at_reset_gives_empty_trajectory():
    from htngym.parser import parse_problem
    from htngym.sexpr import read_one

    d, _ = bundled("transport", "p00-single")
    text = (DATA / "transport" / "p00-single.hddl").read_text()
    p = parse_problem(read_one(text.replace("(at package-0 city-loc-1)", "(at package-0 city-loc-2)")), d)
    env = HDDLEnv(d, p)
    assert env.done
    trajs = collect_rollouts(env, None, horizon=5)
    assert len(trajs["truck-0"]) == 0


def test_training_is_reproducible():
    from htngym.ppo import train

    def run():
        d, p = bundled("transport", "p00-single")
        env = HDDLEnv(d, p)
        pol = MlpPolicy.create(env.layout, hidden=8, seed=0)
        rows = train(env, pol, PpoConfig(horizon=30, epochs=2, minibatch=16), iterations=2)
        return rows, pol

    (ra, pa), (rb, pb) = run(), run()
    assert [r.loss for r in ra] == [r.loss for r in rb]
    assert all(np.array_equal(pa.params[k], pb.params[k]) for k in pa.params)
