"""Learning the dynamics: lift, fit, predict, differentiate.

Fits the 25-element lifted-operator model on simulator transitions, shows
the one-step prediction quality on held-out data and the closed-form
jacobians against finite differences.
"""

import numpy as np

from sasclab import koopman
from sasclab.config import LabConfig

cfg = LabConfig()

print("=== dataset and fit ===")
data = koopman.sample_transitions(10000, seed=42, params=cfg.physics)
train = koopman.TransitionDataset(data.states[:8000], data.controls[:8000],
                                  data.next_states[:8000], data.dt)
test = koopman.TransitionDataset(data.states[8000:], data.controls[8000:],
                                 data.next_states[8000:], data.dt)
model = koopman.fit(train, ridge=1e-6)
print(f"fit on {len(train)} transitions: size-scaled residual {model.fit_residual:.2e}")
print(f"held-out one-step RMSE (normalized units): {koopman.prediction_rmse(model, test):.2e}")
print("residual vs dataset size:")
for n in (100, 1000, 10000):
    sub = koopman.sample_transitions(n, seed=7, params=cfg.physics)
    print(f"  n={n:6d}: {koopman.fit(sub).fit_residual:.3e}")

print("\n=== the lifted basis ===")
x = np.array([5.0, 6.0, 0.2, 1.0, -0.5, 0.1])
u = np.array([0.7, -0.3])
phi = koopman.basis(x, u)
print(f"phi(x, u) has {len(phi)} components; constant term {phi[0]}, "
      f"controls at [7:9] = {phi[7:9]}, trig tail = {np.round(phi[21:], 3)}")

print("\n=== prediction and jacobians ===")
from sasclab import world  # noqa: E402

env = world.make_environment("open", cfg.physics, 0, cfg.layout)
pred = koopman.predict_next(model, x, u)
truth = world.step(x, u, env, cfg.physics, 0.0)
print(f"one-step prediction vs simulator at a fresh state: "
      f"max |error| = {np.abs(pred - truth).max():.2e}")

a, b = koopman.linearize(model, x, u)
h = 1e-5
fd = np.empty((6, 6))
for j in range(6):
    e = np.zeros(6)
    e[j] = h
    fd[:, j] = (koopman.predict_next(model, x + e, u) -
                koopman.predict_next(model, x - e, u)) / (2 * h)
print(f"analytic A vs central differences: max |diff| = {np.abs(a - fd).max():.2e}")
print(f"B (control sensitivity):\n{np.round(b, 4)}")
print("row 4 (vertical velocity) responds to u1; row 5 (spin) to u2, as built.")
