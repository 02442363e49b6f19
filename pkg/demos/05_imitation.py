"""Imitation: cloning shared-control demonstrations, with and without the
safety filter at rollout time.

Collects successful shared-control novice demonstrations in the narrow
passage, trains the discretized-control classifier, and contrasts bare
policy rollouts against policy-under-filter rollouts
(demos/out/imitation.png).
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from sasclab import imitation, koopman, pilots, sessions, world
from sasclab.config import LabConfig, TrainParams
from sasclab.world import TrialStatus

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

cfg = LabConfig()
model = koopman.fit(koopman.sample_transitions(8000, seed=42,
                                               params=cfg.physics))
spec = pilots.novice_spec(cfg.gains, cfg.novice)

print("=== demonstrations (shared control) ===")
wins = []
i = 0
while len(wins) < 30 and i < 100:
    tr = sessions.run_trial("narrow", "shared", spec,
                            sessions.TrialSeeds(i, 1000 + i), cfg, model=model)
    if tr.outcome is TrialStatus.SUCCESS:
        wins.append(tr)
    i += 1
demos = imitation.demonstrations_from_trajectories(wins, source="novice",
                                                   paradigm="shared")
print(f"{len(wins)} successful trials -> {len(demos)} (state, class) pairs")
counts = np.bincount(demos.labels, minlength=25)
print(f"label histogram over the 25 classes (top: class {counts.argmax()}, "
      f"{counts.max()} samples)")

print("\n=== training the classifier ===")
net = imitation.train_bc(demos, TrainParams(epochs=50, seed=1))
print(f"final loss {net.meta['final_loss']:.3f}, "
      f"top-1 training accuracy {net.meta['final_accuracy']:.2f}")

print("\n=== rollouts ===")
rollouts = {}
for paradigm in ("il", "il-shared"):
    runs = []
    for s in range(10):
        runs.append(sessions.run_trial(
            "narrow", paradigm, net, sessions.TrialSeeds(9000 + s, 0), cfg,
            model=model if paradigm == "il-shared" else None))
    rollouts[paradigm] = runs
    outcomes = {}
    for tr in runs:
        outcomes[tr.outcome.value] = outcomes.get(tr.outcome.value, 0) + 1
    print(f"  {paradigm:10s}: {outcomes}")
print("the bare clone inherits the demonstrations' states but not their"
      "\nsafety net; under the filter the same network flies clean.")

env = world.make_environment("narrow", cfg.physics, 0, cfg.layout)
fig, axes = plt.subplots(1, 2, figsize=(14, 5), sharey=True)
for ax, paradigm, color in ((axes[0], "il", "tab:purple"),
                            (axes[1], "il-shared", "tab:pink")):
    for r in env.static_rects:
        ax.fill([r.x0, r.x1, r.x1, r.x0], [r.y0, r.y0, r.y1, r.y1], "0.6")
    ax.fill_between(list(env.bounds[:2]), env.bounds[2], env.ground_y, color="0.4")
    ax.axvline(env.goal_x, color="tab:green", ls="--")
    for tr in wins[:12]:
        ax.plot(tr.states[:, 0], tr.states[:, 1], color="tab:blue", alpha=0.25,
                lw=0.8)
    for tr in rollouts[paradigm]:
        ok = tr.outcome is TrialStatus.SUCCESS
        ax.plot(tr.states[:, 0], tr.states[:, 1], color=color, lw=1.4,
                alpha=0.9 if ok else 0.5)
        if tr.outcome is TrialStatus.CRASH:
            ax.plot(*tr.final_state[:2], "x", color="tab:red", ms=7)
    ax.set_title(f"{paradigm} rollouts (demos in blue)")
    ax.set_xlim(env.bounds[0], env.bounds[1])
    ax.set_ylim(0, 22)
fig.savefig(OUT / "imitation.png", dpi=110, bbox_inches="tight")
print(f"\nwrote {OUT / 'imitation.png'}")
