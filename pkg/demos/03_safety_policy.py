"""The safety-only policy: quiescent until something matters.

Probes the action synthesizer on characteristic states and shows the
accept/reject/replace allocator combining it with an operator command.
"""

import numpy as np

from sasclab import koopman, world
from sasclab.allocation import allocate, is_unsafe
from sasclab.config import LabConfig
from sasclab.safety import SacContext, predicted_cost, running_cost

cfg = LabConfig()
params = cfg.physics
env = world.make_environment("open", params, 0, cfg.layout)
model = koopman.fit(koopman.sample_transitions(8000, seed=42, params=params))
ctx = SacContext(model, env, cfg.cost, params)

print("=== the objective ===")
print(f"l(tilt 0.1)         = {running_cost(np.array([0, 0, 0.1, 0, 0, 0.0]), None, cfg.cost):.2f}")
print(f"l(spin 0.5)         = {running_cost(np.array([0, 0, 0, 0, 0, 0.5]), None, cfg.cost):.2f}")
near = np.array([20.0, 3.0, 0, 0, 0, 0.0])
far = np.array([20.0, 15.0, 0, 0, 0, 0.0])
print(f"barrier, 2 m clear  = {running_cost(near, (20.0, 0.0), cfg.cost):.2f}")
print(f"barrier, 14 m clear = {running_cost(far, (20.0, 0.0), cfg.cost):.4f}")

print("\n=== single-action synthesis ===")
probes = {
    "stabilized hover": [20, 15, 0, 0, 0, 0],
    "slow spin": [20, 15, 0, 0, 0, 0.4],
    "fast spin": [20, 15, 0, 0, 0, 1.2],
    "dive at altitude": [20, 15, 0, 0, -2.5, 0],
    "dive near ground": [20, 3.5, 0, 0, -2.0, 0],
    "drifting sideways": [20, 10, 0, 3.0, 0, 0],
}
for name, s in probes.items():
    res = ctx.action(np.array(s, dtype=float), 0.0)
    print(f"  {name:18s} -> u = ({res.u[0]:+.2f}, {res.u[1]:+.2f})"
          f"   predicted cost {res.j_nominal:8.2f} -> {res.j_action:8.2f}")
print("the hover stays (0, 0): acting must beat drifting by more than the")
print("control-effort penalty plus the action threshold.")

print("\n=== allocation ===")
x = np.array([20.0, 3.0, 0.0, 0.0, -1.5, 0.0])   # descending, near ground
u_sa = ctx.action(x, 0.0).u
flag, dist = is_unsafe(x, env, 0.0, cfg.safety, params)
print(f"clearance {dist:.2f} m vs d_safe {cfg.safety.d_safe}: unsafe = {flag}")
for u_h in ([0.9, 0.1], [-0.4, 0.0], [0.0, 0.0]):
    d = allocate(np.array(u_h), u_sa, flag, distance=dist)
    print(f"  operator {np.array(u_h)} vs autonomy {np.round(u_sa, 2)} "
          f"-> {d.mode.value:7s} applied {np.round(d.applied, 2)}")

x_safe = np.array([20.0, 15.0, 0.0, 0.0, 0.0, 0.0])
u_sa = ctx.action(x_safe, 0.0).u
for u_h in ([0.9, 0.1], [-1.0, -1.0]):
    d = allocate(np.array(u_h), u_sa, False)
    print(f"  safe hover, operator {np.array(u_h)} vs quiet autonomy "
          f"-> {d.mode.value:7s} (dot {d.inner_product:+.2f})")

print("\n=== the improvement guarantee ===")
x = np.array([20.0, 12.0, 0.3, 1.0, -1.5, 0.8])
res = ctx.action(x, 0.0)
sched = np.zeros((ctx.n_nodes, 2))
sched[0] = res.u
j_check = predicted_cost(model, x, sched, env, 0.0, cfg.cost, params)
print(f"nominal drift cost {res.j_nominal:.2f}; action held one step then "
      f"drift: {j_check:.2f} (kernel agrees: {res.j_action:.2f})")
