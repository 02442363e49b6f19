"""Behavior cloning over discretized controls.

Controls are snapped per axis onto the five-level grid {-1, -0.5, 0, 0.5, 1}
(ties toward zero) and the pair is encoded as a single class index
``5 * i1 + i2``, turning imitation into 25-way classification.  The policy
network is a plain dense stack 6 -> 32 -> 64 -> 64 -> 25 with ReLU hidden
activations and a softmax head, trained with mean categorical cross-entropy
and an RMSProp-style per-parameter adaptive update.  The network, its
backprop and the optimizer are implemented directly in numpy: the model is
small enough that a framework would only blur the gradient tests.

Inputs are normalized by the fixed per-component scales recorded in the
serialized model, so a saved policy is self-contained.

A regression trainer over the raw two-channel control (squared-error
objective) is provided for comparison alongside the primary classifier.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainParams
from .world import STATE_SCALES

CONTROL_GRID = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
N_CLASSES = 25
LAYER_SIZES = (6, 32, 64, 64, 25)

POLICY_FORMAT = "bc-policy"
POLICY_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss leaves the finite range."""


def snap_level(v: float) -> int:
    """Index of the nearest grid level, ties toward zero."""
    s = 2.0 * v
    lo = math.floor(s)
    hi = math.ceil(s)
    if lo == hi:
        k = int(lo)
    else:
        dlo, dhi = s - lo, hi - s
        if dlo < dhi:
            k = int(lo)
        elif dhi < dlo:
            k = int(hi)
        else:
            k = int(lo) if abs(lo) < abs(hi) else int(hi)
    return min(max(k + 2, 0), 4)


def encode_control(u: np.ndarray) -> int:
    u = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(u)):
        raise ValueError("encode_control requires finite input")
    return 5 * snap_level(float(u[0])) + snap_level(float(u[1]))


def decode_control(c: int) -> np.ndarray:
    if not 0 <= c < N_CLASSES:
        raise ValueError(f"class index {c} out of range")
    return np.array([CONTROL_GRID[c // 5], CONTROL_GRID[c % 5]])


def encode_controls(us: np.ndarray) -> np.ndarray:
    return np.array([encode_control(u) for u in np.asarray(us)], dtype=np.int64)


@dataclass(frozen=True)
class DemonstrationSet:
    """Flattened (state, control class) supervision from successful trials.

    Labels always derive from the *applied* control: under shared control the
    filtered command is the supervisor, not the raw operator input.
    """

    states: np.ndarray            # (N, 6)
    labels: np.ndarray            # (N,) int
    source: str = "pilot"         # human | pilot-kind | policy id
    paradigm: str = "shared"      # user-only | shared
    trajectory_ids: tuple = ()

    def __post_init__(self):
        if len(self.states) != len(self.labels):
            raise ValueError("states and labels must share one length")

    def __len__(self) -> int:
        return len(self.states)


def demonstrations_from_trajectories(trajectories, source: str = "pilot",
                                     paradigm: str = "shared") -> DemonstrationSet:
    """Build supervision from Success trajectories only."""
    from .world import TrialStatus  # local import to avoid a cycle
    states, labels, ids = [], [], []
    for traj in trajectories:
        if traj.outcome is not TrialStatus.SUCCESS:
            continue
        states.append(traj.states)
        labels.append(encode_controls(traj.applied))
        ids.append(traj.trial_id)
    if not states:
        raise ValueError("no successful trajectories to learn from")
    return DemonstrationSet(states=np.concatenate(states),
                            labels=np.concatenate(labels),
                            source=source, paradigm=paradigm,
                            trajectory_ids=tuple(ids))


@dataclass
class PolicyNet:
    """Dense 6-32-64-64-25 classifier with softmax output."""

    weights: list                    # [W1, b1, W2, b2, W3, b3, W4, b4]
    state_scales: np.ndarray = field(default_factory=lambda: STATE_SCALES.copy())
    meta: dict = field(default_factory=dict)

    def normalize(self, states: np.ndarray) -> np.ndarray:
        return np.atleast_2d(states) / self.state_scales

    def logits(self, states: np.ndarray) -> np.ndarray:
        h = self.normalize(states)
        w1, b1, w2, b2, w3, b3, w4, b4 = self.weights
        h = np.maximum(h @ w1 + b1, 0.0)
        h = np.maximum(h @ w2 + b2, 0.0)
        h = np.maximum(h @ w3 + b3, 0.0)
        return h @ w4 + b4

    def probabilities(self, states: np.ndarray) -> np.ndarray:
        return _softmax(self.logits(states))

    def to_dict(self) -> dict:
        return {
            "format": POLICY_FORMAT,
            "version": POLICY_VERSION,
            "layers": list(LAYER_SIZES),
            "activation": "relu",
            "output": "softmax",
            "weights": [w.tolist() for w in self.weights],
            "state_scales": self.state_scales.tolist(),
            "control_grid": CONTROL_GRID.tolist(),
            "meta": self.meta,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyNet":
        if data.get("format") != POLICY_FORMAT:
            raise ValueError(f"not a policy document: {data.get('format')!r}")
        if data.get("version") != POLICY_VERSION:
            raise ValueError(f"unsupported policy version {data.get('version')!r}")
        weights = [np.asarray(w, dtype=np.float64) for w in data["weights"]]
        return cls(weights=weights,
                   state_scales=np.asarray(data["state_scales"]),
                   meta=data.get("meta", {}))

    @classmethod
    def load(cls, path: str | Path) -> "PolicyNet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def init_policy(seed: int = 0) -> PolicyNet:
    rng = np.random.default_rng(seed)
    weights = []
    for n_in, n_out in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]):
        weights.append(rng.normal(0.0, math.sqrt(2.0 / n_in), (n_in, n_out)))
        weights.append(np.zeros(n_out))
    return PolicyNet(weights=weights, meta={"seed": seed})


def loss_and_grad(net: PolicyNet, states: np.ndarray,
                  labels: np.ndarray) -> tuple[float, list]:
    """Mean cross-entropy over the batch and its exact gradients."""
    states = np.atleast_2d(states)
    labels = np.asarray(labels, dtype=np.int64)
    if len(states) == 0:
        raise ValueError("batch must be non-empty")
    w1, b1, w2, b2, w3, b3, w4, b4 = net.weights
    x0 = net.normalize(states)
    z1 = x0 @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ w2 + b2
    a2 = np.maximum(z2, 0.0)
    z3 = a2 @ w3 + b3
    a3 = np.maximum(z3, 0.0)
    logits = a3 @ w4 + b4
    probs = _softmax(logits)
    n = len(states)
    eps = 1e-12
    loss = float(-np.mean(np.log(probs[np.arange(n), labels] + eps)))

    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    gw4 = a3.T @ dlogits
    gb4 = dlogits.sum(axis=0)
    da3 = dlogits @ w4.T
    dz3 = da3 * (z3 > 0)
    gw3 = a2.T @ dz3
    gb3 = dz3.sum(axis=0)
    da2 = dz3 @ w3.T
    dz2 = da2 * (z2 > 0)
    gw2 = a1.T @ dz2
    gb2 = dz2.sum(axis=0)
    da1 = dz2 @ w2.T
    dz1 = da1 * (z1 > 0)
    gw1 = x0.T @ dz1
    gb1 = dz1.sum(axis=0)
    return loss, [gw1, gb1, gw2, gb2, gw3, gb3, gw4, gb4]


def train_bc(data: DemonstrationSet, hyper: TrainParams | None = None,
             log_every: int = 0) -> PolicyNet:
    """Minibatch RMSProp training of the 25-way classifier.

    Deterministic for a fixed (dataset, hyper, seed): initialization and the
    per-epoch shuffle come from one seeded generator.  A non-finite loss
    aborts with the offending epoch/batch in the error.
    """
    hyper = hyper or TrainParams()
    hyper.validate()
    if len(data) == 0:
        raise ValueError("cannot train on an empty demonstration set")
    net = init_policy(hyper.seed)
    rng = np.random.default_rng(hyper.seed + 1)
    cache = [np.zeros_like(w) for w in net.weights]
    eps = 1e-8
    n = len(data)
    loss = math.nan
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            loss, grads = loss_and_grad(net, data.states[idx], data.labels[idx])
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {start // hyper.batch_size}")
            for i, g in enumerate(grads):
                cache[i] = hyper.decay * cache[i] + (1.0 - hyper.decay) * g * g
                net.weights[i] -= hyper.learning_rate * g / (np.sqrt(cache[i]) + eps)
        if log_every and (epoch + 1) % log_every == 0:
            acc = top1_accuracy(net, data)
            print(f"epoch {epoch + 1}: loss {loss:.4f} top-1 {acc:.3f}")
    net.meta.update({
        "epochs": hyper.epochs,
        "seed": hyper.seed,
        "final_loss": loss,
        "final_accuracy": top1_accuracy(net, data),
        "n_samples": n,
        "paradigm": data.paradigm,
        "source": data.source,
    })
    return net


def top1_accuracy(net: PolicyNet, data: DemonstrationSet) -> float:
    pred = np.argmax(net.logits(data.states), axis=1)
    return float(np.mean(pred == data.labels))


def policy_act(net: PolicyNet, state: np.ndarray) -> np.ndarray:
    """Greedy decode: argmax class (ties toward the lower index)."""
    logits = net.logits(state)[0]
    return decode_control(int(np.argmax(logits)))


# --- squared-error alternative over the raw control channels ---------------


@dataclass
class RegressionPolicy:
    """Same hidden stack with a linear two-channel head (squared error)."""

    weights: list
    state_scales: np.ndarray = field(default_factory=lambda: STATE_SCALES.copy())
    meta: dict = field(default_factory=dict)

    def act(self, state: np.ndarray) -> np.ndarray:
        h = np.atleast_2d(state) / self.state_scales
        w1, b1, w2, b2, w3, b3, w4, b4 = self.weights
        h = np.maximum(h @ w1 + b1, 0.0)
        h = np.maximum(h @ w2 + b2, 0.0)
        h = np.maximum(h @ w3 + b3, 0.0)
        return np.clip((h @ w4 + b4)[0], -1.0, 1.0)


def train_regression(states: np.ndarray, controls: np.ndarray,
                     hyper: TrainParams | None = None) -> RegressionPolicy:
    """Fit the mean-squared-error objective on raw controls."""
    hyper = hyper or TrainParams()
    rng = np.random.default_rng(hyper.seed)
    sizes = (6, 32, 64, 64, 2)
    weights = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, math.sqrt(2.0 / n_in), (n_in, n_out)))
        weights.append(np.zeros(n_out))
    net = RegressionPolicy(weights=weights)
    cache = [np.zeros_like(w) for w in weights]
    eps = 1e-8
    x_all = np.atleast_2d(states) / net.state_scales
    y_all = np.asarray(controls, dtype=np.float64)
    n = len(x_all)
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            x0, y = x_all[idx], y_all[idx]
            w1, b1, w2, b2, w3, b3, w4, b4 = net.weights
            z1 = x0 @ w1 + b1; a1 = np.maximum(z1, 0.0)
            z2 = a1 @ w2 + b2; a2 = np.maximum(z2, 0.0)
            z3 = a2 @ w3 + b3; a3 = np.maximum(z3, 0.0)
            out = a3 @ w4 + b4
            diff = out - y
            if not np.all(np.isfinite(diff)):
                raise TrainingDivergedError(f"non-finite output at epoch {epoch}")
            dout = 2.0 * diff / len(x0)
            gw4 = a3.T @ dout; gb4 = dout.sum(axis=0)
            da3 = dout @ w4.T; dz3 = da3 * (z3 > 0)
            gw3 = a2.T @ dz3; gb3 = dz3.sum(axis=0)
            da2 = dz3 @ w3.T; dz2 = da2 * (z2 > 0)
            gw2 = a1.T @ dz2; gb2 = dz2.sum(axis=0)
            da1 = dz2 @ w2.T; dz1 = da1 * (z1 > 0)
            gw1 = x0.T @ dz1; gb1 = dz1.sum(axis=0)
            grads = [gw1, gb1, gw2, gb2, gw3, gb3, gw4, gb4]
            for i, g in enumerate(grads):
                cache[i] = hyper.decay * cache[i] + (1.0 - hyper.decay) * g * g
                net.weights[i] -= hyper.learning_rate * g / (np.sqrt(cache[i]) + eps)
    net.meta.update({"objective": "squared-error", "epochs": hyper.epochs,
                     "seed": hyper.seed})
    return net
