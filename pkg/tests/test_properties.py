"""Property-based checks on small pure pieces."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from htngym.encoding import PolicyOutput, build_layout, grounded_operator_probability
from htngym.grounding import Grounding
from htngym.planner import Choice, JointCombination, score_and_select
from htngym.ppo import gae
from htngym.sexpr import SExpr, tokenize
from oracles import act, bundled

names = st.from_regex(r"[a-z?][a-z0-9_-]{0,6}", fullmatch=True)
trees = st.recursive(
    names.map(lambda t: SExpr("atom", t)),
    lambda kids: st.lists(kids, max_size=4).map(lambda cs: SExpr("list", children=cs)),
    max_leaves=20,
)


def strip(e: SExpr):
    return e.text if e.is_atom else [strip(c) for c in e.children]


@given(st.lists(trees, min_size=1, max_size=3), st.sampled_from([" ", "\n", "  ; note\n"]))
def test_tokenize_inverts_printing(forms, sep):
    text = sep.join(f.to_text() for f in forms)
    assert [strip(f) for f in tokenize(text)] == [strip(f) for f in forms]


@given(st.lists(st.floats(0, 1e3, allow_nan=False), min_size=1, max_size=8), st.booleans(), st.integers(0, 2**32 - 1))
def test_joint_scores_normalise(weights, deterministic, seed):
    combos = [JointCombination({"a": Choice(act("none", f"x{i}"), None, None)}) for i in range(len(weights))]
    probs = {"a": {c.choices["a"]: w for c, w in zip(combos, weights)}}
    pick = score_and_select(combos, probs, deterministic, np.random.default_rng(seed))
    total = sum(c.probability for c in combos)
    assert total == pytest.approx(1.0)
    assert all(c.probability >= 0 for c in combos)
    if sum(weights) > 0:
        assert pick.probability > 0


@given(st.integers(1, 10), st.floats(0, 1), st.floats(0, 1), st.integers(0, 1000))
def test_gae_is_linear_in_rewards(n, gamma, lam, seed):
    rng = np.random.default_rng(seed)
    r1, r2, v = rng.normal(size=n), rng.normal(size=n), rng.normal(size=n)
    d = rng.random(n) < 0.3
    a1, _ = gae(r1, v, d, 0.0, gamma, lam)
    a2, _ = gae(r2, v, d, 0.0, gamma, lam)
    a12, _ = gae(r1 + r2, v, d, 0.0, gamma, lam)
    zero, _ = gae(np.zeros(n), v, d, 0.0, gamma, lam)
    assert a12 == pytest.approx(a1 + a2 - zero, abs=1e-9)


LAYOUT = build_layout(Grounding(*bundled("transport", "p01-1agent")))
CANDS = [
    act("none", "truck-0"),
    act("drive", "truck-0", "city-loc-0", "city-loc-1"),
    act("drive", "truck-0", "city-loc-1", "city-loc-2"),
    act("pick-up", "truck-0", "city-loc-0", "package-0", "capacity-0", "capacity-1"),
]


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(1, len(CANDS)))
def test_grounded_probabilities_form_a_distribution(seed, k):
    rng = np.random.default_rng(seed)
    out = PolicyOutput(rng.dirichlet(np.ones(len(LAYOUT.operators))), rng.dirichlet(np.ones(len(LAYOUT.objects))))
    p = grounded_operator_probability(out, CANDS[:k], LAYOUT)
    assert p.shape == (k,)
    assert np.all(p >= 0) and p.sum() == pytest.approx(1.0)
