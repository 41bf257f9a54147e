import numpy as np
import pytest

from htngym.encoding import build_layout
from htngym.grounding import Grounding
from htngym.policy import LayoutMismatch, MlpPolicy, RandomPolicy, ScriptedPolicy
from oracles import act, bundled


def layout(name="p01-1agent"):
    return build_layout(Grounding(*bundled("transport", name)))


def test_random_policy_heads_uniform():
    lay = layout()
    out, v = RandomPolicy(lay).evaluate(np.ones(lay.width))
    assert np.allclose(out.operator_probs, 1 / len(lay.operators))
    assert np.allclose(out.object_probs, 1 / len(lay.objects))
    assert v == 0.0


def test_random_policy_without_layout_is_uniform_over_candidates():
    cands = [act("none", "truck-0"), act("drive", "truck-0", "a", "b")]
    assert RandomPolicy().candidate_probabilities(None, cands, None) == pytest.approx([0.5, 0.5])


def test_zero_mlp_is_uniform_with_zero_value():
    lay = layout()
    pol = MlpPolicy.create(lay, hidden=8, zero=True)
    out, v = pol.evaluate(np.random.default_rng(0).random(lay.width))
    assert np.allclose(out.operator_probs, 1 / len(lay.operators))
    assert np.allclose(out.object_probs, 1 / len(lay.objects))
    assert v == 0.0


def test_wrong_width_rejected():
    pol = MlpPolicy.create(layout(), hidden=8)
    with pytest.raises(LayoutMismatch):
        pol.evaluate(np.zeros(3))


def test_distributions_valid_for_any_weights():
    lay = layout()
    pol = MlpPolicy.create(lay, hidden=8, seed=3)
    rng = np.random.default_rng(1)
    for k in pol.params:
        pol.params[k] = pol.params[k] + rng.normal(0, 5, pol.params[k].shape)
    out, _ = pol.evaluate(rng.random(lay.width))
    for p in (out.operator_probs, out.object_probs):
        assert np.all(p >= 0) and p.sum() == pytest.approx(1.0)


def test_checkpoint_round_trip(tmp_path):
    lay = layout()
    pol = MlpPolicy.create(lay, hidden=8, seed=2)
    path = tmp_path / "pol.json"
    pol.save(path)
    back = MlpPolicy.load(path, lay)
    x = np.random.default_rng(0).random(lay.width)
    a, va = pol.evaluate(x)
    b, vb = back.evaluate(x)
    assert np.array_equal(a.operator_probs, b.operator_probs) and va == vb


def test_checkpoint_refuses_other_layout(tmp_path):
    pol = MlpPolicy.create(layout(), hidden=8)
    path = tmp_path / "pol.json"
    pol.save(path)
    with pytest.raises(LayoutMismatch):
        MlpPolicy.load(path, layout("p02-2agent"))


def test_checkpoint_refuses_unknown_format(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"version": 99, "kind": "mlp"}')
    with pytest.raises(LayoutMismatch):
        MlpPolicy.load(path)


def test_seeded_init_is_reproducible():
    lay = layout()
    a, b = MlpPolicy.create(lay, hidden=8, seed=5), MlpPolicy.create(lay, hidden=8, seed=5)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_scripted_policy_prefers_in_order():
    cands = [act("drive", "t", "a", "b"), act("none", "t"), act("pick-up", "t", "a", "p", "c0", "c1")]
    p = ScriptedPolicy(["pick-up", "none"]).candidate_probabilities(None, cands, None)
    assert p.argmax() == 2 and p[1] > p[0]
    assert p.sum() == pytest.approx(1.0)
