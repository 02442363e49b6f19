"""Linear-operator dynamics model over a fixed 25-element basis.

The lifted feature vector is, in order,

    [1, x1..x6, u1, u2, u1*x1..u1*x6, u2*x1..u2*x6,
     u1*cos(x3), u1*sin(x3), u2*cos(x3), u2*sin(x3)]

and the model is the 25x25 operator K minimizing the regularized one-step
residual over a set of observed transitions (the control is held constant
across each transition when lifting the successor).  State components are
recovered from indices 1..6 of the propagated feature vector.

The operator is discrete-time at the dt of the training data; callers that
need a vector field use (predict_next(x, u) - x) / dt.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels, world
from .config import PhysicsParams
from .world import STATE_SCALES

FEATURE_DIM = 25
STATE_INDICES = tuple(range(1, 7))

MODEL_FORMAT = "koopman-model"
MODEL_VERSION = 1


def basis(state: np.ndarray, control: np.ndarray) -> np.ndarray:
    """Lift a (state, control) pair into the 25-element feature vector."""
    x = np.asarray(state, dtype=np.float64)
    u = np.asarray(control, dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise world.StateValidityError("basis requires finite inputs")
    phi = np.empty(FEATURE_DIM)
    _kernels.phi_fill(phi, x, u)
    return phi


def basis_batch(states: np.ndarray, controls: np.ndarray) -> np.ndarray:
    """Vectorized lift: (N,6), (N,2) -> (N,25)."""
    x = np.asarray(states, dtype=np.float64)
    u = np.asarray(controls, dtype=np.float64)
    n = x.shape[0]
    phi = np.empty((n, FEATURE_DIM))
    phi[:, 0] = 1.0
    phi[:, 1:7] = x
    phi[:, 7] = u[:, 0]
    phi[:, 8] = u[:, 1]
    phi[:, 9:15] = u[:, [0]] * x
    phi[:, 15:21] = u[:, [1]] * x
    c3 = np.cos(x[:, 2])
    s3 = np.sin(x[:, 2])
    phi[:, 21] = u[:, 0] * c3
    phi[:, 22] = u[:, 0] * s3
    phi[:, 23] = u[:, 1] * c3
    phi[:, 24] = u[:, 1] * s3
    return phi


@dataclass(frozen=True)
class TransitionDataset:
    """Observed one-step transitions sharing a single dt.

    ``sources`` tags each row with (trajectory id, step index) so datasets
    built from logs stay traceable.
    """

    states: np.ndarray          # (N, 6)
    controls: np.ndarray        # (N, 2)
    next_states: np.ndarray     # (N, 6)
    dt: float
    sources: tuple = ()

    def __post_init__(self):
        for name in ("states", "controls", "next_states"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise world.StateValidityError(f"{name} contains non-finite entries")
        if len(self.states) != len(self.controls) or \
                len(self.states) != len(self.next_states):
            raise ValueError("transition arrays must share one length")

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class KoopmanModel:
    """Fitted 25x25 operator plus the bookkeeping to use it."""

    k: np.ndarray                       # (25, 25)
    dt_model: float
    fit_residual: float                 # Frobenius residual / dataset size
    rank_deficient: bool = False
    state_indices: tuple = STATE_INDICES

    def __post_init__(self):
        if self.k.shape != (FEATURE_DIM, FEATURE_DIM):
            raise ValueError("operator must be 25x25")
        if not np.all(np.isfinite(self.k)):
            raise ValueError("operator entries must be finite")

    @property
    def k_states(self) -> np.ndarray:
        """The six operator rows that recover the state components."""
        return np.ascontiguousarray(self.k[list(self.state_indices), :])

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "k": self.k.tolist(),
            "state_indices": list(self.state_indices),
            "dt": self.dt_model,
            "fit_residual": self.fit_residual,
            "rank_deficient": self.rank_deficient,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, data: dict) -> "KoopmanModel":
        if data.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a model document: {data.get('format')!r}")
        if data.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {data.get('version')!r}")
        return cls(
            k=np.asarray(data["k"], dtype=np.float64),
            dt_model=float(data["dt"]),
            fit_residual=float(data["fit_residual"]),
            rank_deficient=bool(data.get("rank_deficient", False)),
            state_indices=tuple(data["state_indices"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "KoopmanModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit(data: TransitionDataset, ridge: float = 1e-6) -> KoopmanModel:
    """Least-squares fit of the lifted one-step operator.

    Minimizes sum ||phi(x', u) - K phi(x, u)||^2 + ridge ||K||_F^2 over the
    dataset.  With ridge = 0 a rank-deficient problem falls back to the
    pseudo-inverse solution and the result is flagged.  The reported residual
    is the training Frobenius residual scaled by the dataset size, so it is
    comparable across dataset sizes.
    """
    if len(data) == 0:
        raise ValueError("cannot fit an empty dataset")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    px = basis_batch(data.states, data.controls)
    py = basis_batch(data.next_states, data.controls)

    rank_deficient = False
    if ridge > 0:
        gram = px.T @ px + ridge * np.eye(FEATURE_DIM)
        kt = np.linalg.solve(gram, px.T @ py)
    else:
        kt, _, rank, _ = np.linalg.lstsq(px, py, rcond=None)
        rank_deficient = rank < FEATURE_DIM
    k = kt.T
    residual = float(np.linalg.norm(px @ kt - py)) / len(data)
    return KoopmanModel(k=k, dt_model=data.dt, fit_residual=residual,
                        rank_deficient=rank_deficient)


def predict_next(model: KoopmanModel, state: np.ndarray,
                 control: np.ndarray) -> np.ndarray:
    """State components of K phi(state, control)."""
    return model.k_states @ basis(state, control)


def linearize(model: KoopmanModel, state: np.ndarray,
              control: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact Jacobians (A, B) of predict_next at (state, control).

    The basis is polynomial/trigonometric, so the chain rule gives closed
    forms; A is d(next)/d(state) (6x6) and B is d(next)/d(control) (6x2).
    """
    x = np.asarray(state, dtype=np.float64)
    u = np.asarray(control, dtype=np.float64)
    a = np.empty((6, 6))
    b = np.empty((6, 2))
    _kernels.model_jac(model.k_states, x, u, a, b)
    return a, b


def sample_transitions(n: int, seed: int, params: PhysicsParams | None = None,
                       env: world.Environment | None = None) -> TransitionDataset:
    """Draw in-envelope random transitions from the simulator.

    States are sampled across the flight envelope (clear of the ground so no
    contact nonlinearity enters), throttle over [0, 1] and rotation over
    [-1, 1].  This is the canonical recipe for model-fitting data when no
    flight logs are available.
    """
    params = params or PhysicsParams()
    env = env or world.make_environment(world.EnvId.OPEN, params, 0)
    rng = np.random.default_rng(seed)
    lo = np.array([2.0, 3.0, -0.6, -4.0, -4.0, -1.5])
    hi = np.array([38.0, 25.0, 0.6, 4.0, 4.0, 1.5])
    states = rng.uniform(lo, hi, size=(n, 6))
    controls = np.column_stack([rng.uniform(0.0, 1.0, n),
                                rng.uniform(-1.0, 1.0, n)])
    nxt = np.empty_like(states)
    phys = world.phys_array(params, env.ground_y)
    for i in range(n):
        nxt[i] = _kernels.phys_step(states[i], controls[i], phys)
    return TransitionDataset(states=states, controls=controls,
                             next_states=nxt, dt=params.dt)


def prediction_rmse(model: KoopmanModel, data: TransitionDataset) -> float:
    """One-step prediction RMSE in normalized state units."""
    phi = basis_batch(data.states, data.controls)
    pred = phi @ model.k_states.T
    err = (pred - data.next_states) / STATE_SCALES
    return float(np.sqrt(np.mean(err ** 2)))
