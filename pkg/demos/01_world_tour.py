"""Tour of the worlds: geometry, physics sanity, and trial outcomes.

Renders the three environments to demos/out/environments.png and walks a
few scripted maneuvers through the physics to show how outcomes are
classified.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from sasclab import world
from sasclab.config import LabConfig

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

cfg = LabConfig()
params = cfg.physics

print("=== the three worlds ===")
fig, axes = plt.subplots(1, 3, figsize=(16, 4.5), sharey=True)
for ax, env_id in zip(axes, ("open", "dynamic", "narrow")):
    env = world.make_environment(env_id, params, seed=3, layout=cfg.layout)
    x0, x1, y0, y1 = env.bounds
    ax.fill_between([x0, x1], y0, env.ground_y, color="0.4")
    for r in env.static_rects:
        ax.fill([r.x0, r.x1, r.x1, r.x0], [r.y0, r.y0, r.y1, r.y1], "0.5")
    for d in env.dynamic_obstacles:
        for t in range(0, 40, 8):
            cx, cy = d.center(float(t))
            ax.add_patch(plt.Circle((cx, cy), d.radius, fill=False,
                                    color="tab:red", alpha=0.5))
    ax.axvline(env.goal_x, color="tab:green", lw=2, ls="--", label="goal line")
    ax.plot(*env.spawn_state[:2], "^", color="tab:blue", ms=10, label="spawn")
    ax.set_xlim(x0, x1), ax.set_ylim(y0, 25)
    ax.set_title(env_id)
axes[0].legend(loc="upper left")
fig.suptitle("environments (dynamic obstacle drawn at several times)")
fig.savefig(OUT / "environments.png", dpi=110, bbox_inches="tight")
print(f"wrote {OUT / 'environments.png'}")

print("\n=== physics sanity ===")
env = world.make_environment("open", params, 0, cfg.layout)
x = env.spawn_state.copy()
x1 = world.step(x, np.zeros(2), env, params, 0.0)
print(f"free fall for one step: dv_y = {x1[4]:+.4f} (gravity*dt = {-params.gravity * params.dt:+.4f})")

x_hover = world.step(x, np.array([0.5, 0.0]), env, params, 0.0)
print(f"half throttle (thrust_max = 2 m g): dv_y = {x_hover[4]:+.1e}  -> hover")

x_tilt = np.array([*x[:2], 0.3, 0, 0, 0])
x2 = world.step(x_tilt, np.array([1.0, 0.0]), env, params, 0.0)
print(f"tilted 0.3 rad at full throttle: dv_x = {x2[3]:+.4f} (thrust leans with the body)")

print("\n=== outcomes ===")
cases = {
    "gentle touchdown": np.array([10, 1.001, 0.0, 0.0, -0.4, 0.0]),
    "hard impact": np.array([10, 1.05, 0.0, 0.0, -4.0, 0.0]),
    "tilted contact": np.array([10, 1.0, 0.6, 0.0, 0.0, 0.0]),
    "goal crossing": np.array([cfg.layout.goal_x + 0.2, 8, 0, 1, 0, 0.0]),
}
for name, state in cases.items():
    state = world.step(state, np.zeros(2), env, params, 0.0)
    status, reason = world.classify_outcome(state, env, params, 1.0)
    print(f"  {name:18s} -> {status.value}" +
          (f" ({reason.value})" if reason else ""))

print("\nsub-threshold ground contact is survivable: the craft settles and the trial continues.")
