"""Policies: the evaluation interface plus random, scripted and MLP policies."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoding import EncodingLayout, PolicyOutput, grounded_operator_probability

CHECKPOINT_VERSION = 1


class LayoutMismatch(ValueError):
    pass


class PolicyInterface:
    """Maps an observation to operator/object distributions and a value."""

    name = "policy"
    layout_hash: str | None = None
    uses_observation = True

    def evaluate(self, observation: np.ndarray) -> tuple[PolicyOutput, float]:
        raise NotImplementedError

    def candidate_probabilities(self, observation, candidates, layout: EncodingLayout) -> np.ndarray:
        output, _ = self.evaluate(observation)
        return grounded_operator_probability(output, candidates, layout)

    def descriptor(self) -> dict:
        return {"name": self.name, "layout_hash": self.layout_hash}


class RandomPolicy(PolicyInterface):
    """Uniform head outputs; grounded scores then follow the product rule.

    Without a layout the policy falls back to uniform over candidates.
    """

    name = "random"
    uses_observation = False

    def __init__(self, layout: EncodingLayout | None = None):
        self.layout = layout
        self.layout_hash = layout.hash if layout is not None else None

    def evaluate(self, observation):
        if self.layout is None:
            raise LayoutMismatch("random policy built without a layout cannot produce head outputs")
        n_op, n_obj = len(self.layout.operators), len(self.layout.objects)
        return PolicyOutput(np.full(n_op, 1.0 / n_op), np.full(n_obj, 1.0 / n_obj)), 0.0

    def candidate_probabilities(self, observation, candidates, layout):
        layout = layout or self.layout
        if layout is None:
            return np.full(len(candidates), 1.0 / len(candidates))
        # uniform heads: each argument contributes a factor 1/|objects|
        arity = np.array([len(c.args) for c in candidates], dtype=float)
        scores = -arity * np.log(len(layout.objects))
        p = np.exp(scores - scores.max())
        return p / p.sum()


class ScriptedPolicy(PolicyInterface):
    """Puts all mass on the first candidate matching a preference rule.

    ``prefer`` is a list of operator keys or lifted names tried in order; any
    candidate not mentioned keeps a tiny weight so the planner can still
    backtrack to it.
    """

    name = "scripted"
    uses_observation = False

    def __init__(self, prefer, floor: float = 1e-9):
        self.prefer = list(prefer)
        self.floor = floor

    def evaluate(self, observation):
        raise NotImplementedError("scripted policies score candidates directly")

    def candidate_probabilities(self, observation, candidates, layout):
        w = np.full(len(candidates), self.floor)
        for rank, want in enumerate(self.prefer):
            for i, c in enumerate(candidates):
                if c.key == want or c.name == want:
                    w[i] = max(w[i], float(len(self.prefer) - rank))
        return w / w.sum()


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class MlpPolicy(PolicyInterface):
    """Two tanh hidden layers feeding operator, object and value heads."""

    params: dict[str, np.ndarray]
    n_operators: int
    n_objects: int
    layout_hash: str = ""
    name: str = field(default="mlp")

    PARAM_ORDER = ("W1", "b1", "W2", "b2", "Wo", "bo", "Wb", "bb", "Wv", "bv")

    @classmethod
    def create(cls, layout: EncodingLayout, hidden: int = 128, seed: int = 0, zero: bool = False) -> "MlpPolicy":
        rng = np.random.default_rng(seed)
        n_in, n_op, n_obj = layout.width, len(layout.operators), len(layout.objects)

        def orth(rows, cols, gain):
            if zero:
                return np.zeros((rows, cols))
            a = rng.standard_normal((max(rows, cols), min(rows, cols)))
            q, r = np.linalg.qr(a)
            q = q * np.sign(np.diag(r))
            return gain * (q if rows >= cols else q.T)[:rows, :cols]

        params = {
            "W1": orth(n_in, hidden, np.sqrt(2)), "b1": np.zeros(hidden),
            "W2": orth(hidden, hidden, np.sqrt(2)), "b2": np.zeros(hidden),
            "Wo": orth(hidden, n_op, 0.01), "bo": np.zeros(n_op),
            "Wb": orth(hidden, n_obj, 0.01), "bb": np.zeros(n_obj),
            "Wv": orth(hidden, 1, 1.0), "bv": np.zeros(1),
        }
        return cls(params, n_op, n_obj, layout.hash)

    @property
    def input_width(self) -> int:
        return self.params["W1"].shape[0]

    def forward(self, x: np.ndarray) -> dict[str, np.ndarray]:
        """Batched forward pass; returns intermediate activations for backprop."""
        p = self.params
        h1 = np.tanh(x @ p["W1"] + p["b1"])
        h2 = np.tanh(h1 @ p["W2"] + p["b2"])
        zo = h2 @ p["Wo"] + p["bo"]
        zb = h2 @ p["Wb"] + p["bb"]
        v = (h2 @ p["Wv"] + p["bv"])[..., 0]
        return {"x": x, "h1": h1, "h2": h2, "zo": zo, "zb": zb, "v": v}

    def evaluate(self, observation):
        x = np.asarray(observation, dtype=float)
        if x.shape[-1] != self.input_width:
            raise LayoutMismatch(f"observation width {x.shape[-1]} != policy input {self.input_width}")
        f = self.forward(x)
        return PolicyOutput(_softmax(f["zo"]), _softmax(f["zb"])), float(f["v"])

    def backward(self, cache: dict, d_zo: np.ndarray, d_zb: np.ndarray, d_v: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss given its gradients w.r.t. head outputs."""
        p = self.params
        d_h2 = d_zo @ p["Wo"].T + d_zb @ p["Wb"].T + d_v[:, None] @ p["Wv"].T
        g = {
            "Wo": cache["h2"].T @ d_zo, "bo": d_zo.sum(0),
            "Wb": cache["h2"].T @ d_zb, "bb": d_zb.sum(0),
            "Wv": cache["h2"].T @ d_v[:, None], "bv": np.array([d_v.sum()]),
        }
        d_a2 = d_h2 * (1 - cache["h2"] ** 2)
        g["W2"] = cache["h1"].T @ d_a2
        g["b2"] = d_a2.sum(0)
        d_a1 = (d_a2 @ p["W2"].T) * (1 - cache["h1"] ** 2)
        g["W1"] = cache["x"].T @ d_a1
        g["b1"] = d_a1.sum(0)
        return g

    def copy(self) -> "MlpPolicy":
        return MlpPolicy({k: v.copy() for k, v in self.params.items()}, self.n_operators,
                         self.n_objects, self.layout_hash, self.name)

    # checkpoints

    def save(self, path: str | Path) -> None:
        doc = {
            "version": CHECKPOINT_VERSION,
            "kind": "mlp",
            "layout_hash": self.layout_hash,
            "n_operators": self.n_operators,
            "n_objects": self.n_objects,
            "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in self.params.items()},
        }
        Path(path).write_text(json.dumps(doc), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, layout: EncodingLayout | None = None) -> "MlpPolicy":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("version") != CHECKPOINT_VERSION or doc.get("kind") != "mlp":
            raise LayoutMismatch(f"unsupported checkpoint format in {path}")
        if layout is not None and doc["layout_hash"] != layout.hash:
            raise LayoutMismatch("checkpoint was trained on a different layout")
        params = {k: np.asarray(v["data"], dtype=float).reshape(v["shape"]) for k, v in doc["params"].items()}
        return cls(params, doc["n_operators"], doc["n_objects"], doc["layout_hash"])
