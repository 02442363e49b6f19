"""Command-line entry points.

    sasclab simulate      headless trials with a scripted pilot
    sasclab serve         WebSocket service + cockpit assets
    sasclab train-model   fit the lifted-operator model from logs
    sasclab train-policy  behavior cloning from logged demonstrations
    sasclab eval          learned-policy rollouts (bare or under the filter)
    sasclab metrics       aggregate tables from logs
    sasclab replay        re-simulate a log and verify it bit-exactly

Every parameter is settable by flag or through a YAML config file
(--config), with dotted --set overrides, and every stochastic path takes
--seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import imitation, koopman, pilots, sessions, world
from .config import LabConfig, load_config
from .world import TrialStatus


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None,
                   help="YAML config file")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="SECTION.KEY=VALUE",
                   help="override a single config key (repeatable)")
    p.add_argument("--seed", type=int, default=0)


def _config(args) -> LabConfig:
    return load_config(args.config, args.overrides)


def _pilot_spec(name: str, config: LabConfig, replay_traj=None):
    if name == "expert":
        return pilots.expert_spec(config.gains)
    if name == "novice":
        return pilots.novice_spec(config.gains, config.novice)
    if name == "adversarial":
        return pilots.adversarial_spec(config.gains)
    if name == "replay":
        if replay_traj is None:
            raise SystemExit("replay pilot needs --replay-log")
        return pilots.replay_spec(replay_traj.u_source, replay_traj.dt)
    raise SystemExit(f"unknown pilot {name!r}")


def cmd_simulate(args) -> int:
    config = _config(args)
    model = None
    if args.paradigm in ("shared", "il-shared"):
        if not args.model:
            raise SystemExit(
                f"paradigm {args.paradigm!r} requires --model (fit one with "
                f"'sasclab train-model')")
        model = koopman.KoopmanModel.load(args.model)
    replay_traj = None
    if args.replay_log:
        replay_traj = sessions.iter_trajectories(args.replay_log)[0]
    spec = _pilot_spec(args.pilot, config, replay_traj)
    counts: dict = {}
    for i in range(args.trials):
        seeds = sessions.TrialSeeds(env=args.seed + i,
                                    pilot=args.seed + 1000 + i)
        traj = sessions.run_trial(args.env, args.paradigm, spec, seeds,
                                  config, model=model)
        counts[traj.outcome.value] = counts.get(traj.outcome.value, 0) + 1
        if args.out:
            sessions.append_trajectory(args.out, traj)
        if not args.quiet:
            reason = f" ({traj.crash_reason.value})" if traj.crash_reason else ""
            print(f"trial {i}: {traj.outcome.value}{reason} "
                  f"in {traj.trial_time:.1f} s")
    print(json.dumps({"trials": args.trials, "outcomes": counts}))
    return 0


def cmd_serve(args) -> int:
    from . import server

    config = _config(args)
    model = koopman.KoopmanModel.load(args.model) if args.model else None
    if args.paradigm == "shared" and model is None:
        raise SystemExit("serving the shared paradigm requires --model")
    server.serve(config, args.host, args.port, model=model,
                 log_path=args.out, frontend_dir=args.frontend)
    return 0


def cmd_train_model(args) -> int:
    config = _config(args)
    if args.logs:
        trajs = sessions.iter_trajectories(args.logs)
        data = sessions.transitions_from_trajectories(trajs)
    else:
        data = koopman.sample_transitions(args.samples, seed=args.seed,
                                          params=config.physics)
    if args.holdout > 0:
        n_test = int(len(data) * args.holdout)
        test = koopman.TransitionDataset(
            data.states[-n_test:], data.controls[-n_test:],
            data.next_states[-n_test:], data.dt)
        data = koopman.TransitionDataset(
            data.states[:-n_test], data.controls[:-n_test],
            data.next_states[:-n_test], data.dt)
    else:
        test = None
    model = koopman.fit(data, ridge=args.ridge)
    model.save(args.out)
    report = {"samples": len(data), "fit_residual": model.fit_residual,
              "rank_deficient": model.rank_deficient}
    if test is not None:
        report["holdout_rmse"] = koopman.prediction_rmse(model, test)
    print(json.dumps(report))
    return 0


def cmd_train_policy(args) -> int:
    config = _config(args)
    trajs = sessions.iter_trajectories(args.logs)
    trajs = sessions.filter_trajectories(
        trajs, env_id=args.env, paradigm=args.paradigm, outcome="success")
    if not trajs:
        raise SystemExit("no matching successful trajectories in the logs")
    demos = imitation.demonstrations_from_trajectories(
        trajs, source=trajs[0].source, paradigm=args.paradigm)
    hyper = config.train
    import dataclasses
    hyper = dataclasses.replace(hyper, epochs=args.epochs,
                                learning_rate=args.lr,
                                batch_size=args.batch, seed=args.seed)
    net = imitation.train_bc(demos, hyper, log_every=args.log_every)
    net.save(args.out)
    print(json.dumps({"trajectories": len(trajs), "samples": len(demos),
                      "top1": net.meta["final_accuracy"],
                      "loss": net.meta["final_loss"]}))
    return 0


def cmd_eval(args) -> int:
    config = _config(args)
    net = imitation.PolicyNet.load(args.policy)
    model = koopman.KoopmanModel.load(args.model) if args.model else None
    if args.paradigm == "il-shared" and model is None:
        raise SystemExit("il-shared evaluation requires --model")
    counts: dict = {}
    for i in range(args.trials):
        seeds = sessions.TrialSeeds(env=args.seed + i, pilot=0)
        traj = sessions.run_trial(args.env, args.paradigm, net, seeds, config,
                                  model=model, source_label="policy")
        counts[traj.outcome.value] = counts.get(traj.outcome.value, 0) + 1
        if args.out:
            sessions.append_trajectory(args.out, traj)
    print(json.dumps({"trials": args.trials, "outcomes": counts}))
    return 0


def cmd_metrics(args) -> int:
    trajs = sessions.iter_trajectories(args.logs)
    rows = sessions.compute_metrics(trajs)
    print(sessions.format_metrics_table(rows))
    if args.json:
        Path(args.json).write_text(json.dumps([r.to_dict() for r in rows]))
    return 0


def cmd_replay(args) -> int:
    config = _config(args)
    trajs = sessions.iter_trajectories(args.logs)
    if args.trial:
        trajs = [t for t in trajs if t.trial_id == args.trial]
        if not trajs:
            raise SystemExit(f"trial {args.trial!r} not found")
    failures = 0
    for traj in trajs:
        try:
            sessions.replay_trajectory(traj, config,
                                       strict_hash=not args.no_hash_check)
            print(f"{traj.trial_id}: replay exact "
                  f"({len(traj)} steps, {traj.outcome.value})")
        except sessions.ReplayMismatchError as exc:
            failures += 1
            print(f"{traj.trial_id}: MISMATCH - {exc}")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sasclab",
        description="Deterministic shared-control laboratory for a planar lander")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run headless trials with a pilot")
    _add_common(p)
    p.add_argument("--env", default="open",
                   choices=[e.value for e in world.EnvId])
    p.add_argument("--paradigm", default="user-only",
                   choices=["user-only", "shared"])
    p.add_argument("--pilot", default="expert",
                   choices=["expert", "novice", "adversarial", "replay"])
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--model", type=Path, default=None,
                   help="fitted model JSON (required for shared)")
    p.add_argument("--replay-log", type=Path, default=None,
                   help="trajectory log driving the replay pilot")
    p.add_argument("--out", type=Path, default=None,
                   help="append trajectories to this JSONL log")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="run the WebSocket service")
    _add_common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--paradigm", default="shared",
                   choices=["user-only", "shared"])
    p.add_argument("--model", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--frontend", type=Path, default=None,
                   help="directory of cockpit assets to serve")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("train-model", help="fit the dynamics model")
    _add_common(p)
    p.add_argument("--logs", nargs="*", default=[],
                   help="trajectory logs; omit to sample the simulator")
    p.add_argument("--samples", type=int, default=10000,
                   help="synthetic transitions when no logs are given")
    p.add_argument("--ridge", type=float, default=1e-6)
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_train_model)

    p = sub.add_parser("train-policy", help="behavior cloning from logs")
    _add_common(p)
    p.add_argument("--logs", nargs="+", required=True)
    p.add_argument("--env", default=None,
                   choices=[e.value for e in world.EnvId])
    p.add_argument("--paradigm", default="shared")
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--log-every", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_train_policy)

    p = sub.add_parser("eval", help="roll out a learned policy")
    _add_common(p)
    p.add_argument("--policy", type=Path, required=True)
    p.add_argument("--env", default="narrow",
                   choices=[e.value for e in world.EnvId])
    p.add_argument("--paradigm", default="il-shared",
                   choices=["il", "il-shared"])
    p.add_argument("--model", type=Path, default=None)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("metrics", help="tables from trajectory logs")
    _add_common(p)
    p.add_argument("--logs", nargs="+", required=True)
    p.add_argument("--json", type=Path, default=None,
                   help="also write machine-readable rows here")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("replay", help="re-simulate and verify a log")
    _add_common(p)
    p.add_argument("--logs", nargs="+", required=True)
    p.add_argument("--trial", default=None, help="restrict to one trial id")
    p.add_argument("--no-hash-check", action="store_true",
                   help="skip the config-hash comparison")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
