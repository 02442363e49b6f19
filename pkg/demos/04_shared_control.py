"""User-only vs shared control with the surrogate novice.

Runs 25 seeded novice trials per environment and paradigm, prints the
aggregate table, and overlays trajectories from the narrow passage where
the contrast is starkest (demos/out/shared_vs_user.png).
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from sasclab import koopman, pilots, sessions, world
from sasclab.config import LabConfig
from sasclab.world import TrialStatus

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

cfg = LabConfig()
model = koopman.fit(koopman.sample_transitions(8000, seed=42, params=cfg.physics))
spec = pilots.novice_spec(cfg.gains, cfg.novice)

N = 25
trials = {}
for env_id in ("open", "dynamic", "narrow"):
    for paradigm in ("user-only", "shared"):
        runs = []
        for i in range(N):
            seeds = sessions.TrialSeeds(env=i, pilot=1000 + i)
            runs.append(sessions.run_trial(env_id, paradigm, spec, seeds, cfg,
                                           model=model if paradigm == "shared" else None))
        trials[(env_id, paradigm)] = runs
        wins = sum(t.outcome is TrialStatus.SUCCESS for t in runs)
        print(f"{env_id:8s} {paradigm:10s} {wins:2d}/{N} successes")

print()
rows = sessions.compute_metrics([t for runs in trials.values() for t in runs])
print(sessions.format_metrics_table(rows))

print("\nintervention profile of one shared narrow-passage trial:")
tr = trials[("narrow", "shared")][0]
frac = lambda m: float(np.mean(tr.mode == m))
print(f"  accept {frac(0):.0%}, reject {frac(1):.0%}, replace {frac(2):.0%} "
      f"over {len(tr)} steps -> {tr.outcome.value}")

# overlay plot
env = world.make_environment("narrow", cfg.physics, 0, cfg.layout)
fig, axes = plt.subplots(1, 2, figsize=(14, 5), sharey=True)
for ax, paradigm, color in ((axes[0], "user-only", "tab:orange"),
                            (axes[1], "shared", "tab:blue")):
    for r in env.static_rects:
        ax.fill([r.x0, r.x1, r.x1, r.x0], [r.y0, r.y0, r.y1, r.y1], "0.6")
    ax.fill_between(list(env.bounds[:2]), env.bounds[2], env.ground_y, color="0.4")
    ax.axvline(env.goal_x, color="tab:green", ls="--")
    for tr in trials[("narrow", paradigm)][:15]:
        ok = tr.outcome is TrialStatus.SUCCESS
        ax.plot(tr.states[:, 0], tr.states[:, 1], color=color,
                alpha=0.8 if ok else 0.35, lw=1.2 if ok else 0.8)
        if not ok:
            ax.plot(*tr.final_state[:2], "x", color="tab:red", ms=6)
    wins = sum(t.outcome is TrialStatus.SUCCESS for t in trials[("narrow", paradigm)])
    ax.set_title(f"narrow passage, {paradigm}: {wins}/{N} successes")
    ax.set_xlim(env.bounds[0], env.bounds[1])
    ax.set_ylim(0, 22)
fig.savefig(OUT / "shared_vs_user.png", dpi=110, bbox_inches="tight")
print(f"\nwrote {OUT / 'shared_vs_user.png'}")
