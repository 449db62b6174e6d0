"""Command-line entry point: train, evaluate, compare, beam-pattern.

Exit status is 0 on success, 1 for invalid input (configuration, action
space, checkpoint shape) and 2 for runtime failures (non-finite loss, I/O).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import tempfile
from pathlib import Path

from .antenna import pattern_rows
from .config import ConfigError, RunConfig, load_config
from .metrics import cdf_csv, comparison_csv, curve_csv
from .policies import GREEDY, RANDOM, STATIC, DelayStats, ddqn_bu, evaluate, random_bu, static_be
from .rl import TrainingAborted, checkpoint_json, load_checkpoint, train
from .sim import RandomAccessEnv, SimConfig

log = logging.getLogger("beamra")

SCHEMES = {"static": STATIC, "random": RANDOM, "ddqn": GREEDY}


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _resolve(args) -> RunConfig:
    overrides = {"seed": args.seed}
    if getattr(args, "episodes", None) is not None:
        key = "episodes" if args.command == "train" else "eval_episodes"
        overrides[key] = args.episodes
    return load_config(args.config, overrides)


def _load_net(path: str, cfg: RunConfig, sim: SimConfig):
    if path is None:
        raise ConfigError("the ddqn scheme needs --checkpoint")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read checkpoint: {exc}") from None
    sizes = (sim.n_sectors, *cfg.hidden, sim.n_actions)
    try:
        return load_checkpoint(text, expect_sizes=sizes)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"checkpoint {path}: {exc}") from None


def _policy(scheme: str, cfg: RunConfig, sim: SimConfig, checkpoint: str | None):
    kind = SCHEMES[scheme]
    if kind == STATIC:
        return static_be(sim.n_beams)
    if kind == RANDOM:
        return random_bu(sim.actions, cfg.seed, cfg.random_per_episode)
    return ddqn_bu(_load_net(checkpoint, cfg, sim), sim.actions)


def cmd_train(cfg: RunConfig, out: Path) -> None:
    sim = cfg.sim_config()
    env = RandomAccessEnv(sim, cfg.seed, "train")
    net, tlog = train(env, cfg.ddqn_config(), cfg.seed, progress_every=max(1, cfg.episodes // 20))
    write_atomic(out / "config.json", cfg.to_json())
    write_atomic(out / "checkpoint.json", checkpoint_json(net, cfg.seed, cfg.hash()))
    write_atomic(out / "training_log.csv", tlog.to_csv())
    write_atomic(out / "loss_curve.csv", curve_csv(tlog.column("loss_mean")))
    write_atomic(out / "action_value_curve.csv", curve_csv(tlog.column("avg_action_value")))


def _stats(scheme: str, cfg: RunConfig, sim: SimConfig, checkpoint, jobs: int) -> DelayStats:
    policy = _policy(scheme, cfg, sim, checkpoint)
    rho = None if cfg.rates is not None else cfg.rho
    return evaluate(policy, sim, cfg.eval_episodes, cfg.seed, jobs,
                    lambda_total=float(sum(sim.rates)), rho=rho)


def cmd_evaluate(cfg: RunConfig, out: Path, scheme: str, checkpoint: str | None, jobs: int) -> DelayStats:
    sim = cfg.sim_config()
    stats = _stats(scheme, cfg, sim, checkpoint, jobs)
    write_atomic(out / "config.json", cfg.to_json())
    write_atomic(out / f"delay_stats_{scheme}.json", stats.to_json())
    write_atomic(out / f"cdf_{scheme}.csv", cdf_csv(stats.cdf()))
    return stats


def cmd_compare(cfg: RunConfig, out: Path, checkpoint: str | None, jobs: int) -> dict:
    sim = cfg.sim_config()
    if checkpoint is None:
        raise ConfigError("compare needs --checkpoint for the ddqn scheme")
    row = {"lambda": float(sum(sim.rates)), "rho": None if cfg.rates is not None else cfg.rho}
    write_atomic(out / "config.json", cfg.to_json())
    for scheme in SCHEMES:
        stats = _stats(scheme, cfg, sim, checkpoint, jobs)
        row[stats.scheme] = stats.mean_delay
        write_atomic(out / f"delay_stats_{scheme}.json", stats.to_json())
        write_atomic(out / f"cdf_{scheme}.csv", cdf_csv(stats.cdf()))
    write_atomic(out / "comparison.csv", comparison_csv([row]))
    return row


def beam_pattern_csv(cfg: RunConfig, action_id: int | None, points: int) -> str:
    sim = cfg.sim_config()
    n = len(sim.actions)
    if action_id is not None and not 0 <= action_id < n:
        raise ConfigError(f"action id {action_id} out of range: the action space has {n} actions (0..{n - 1})")
    ids = None if action_id is None else [action_id]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["action_id", "beam_id", "theta_rad", "amplitude", "gain_db"])
    for k, i, t, a, g in pattern_rows(sim.actions, sim.array, points, ids):
        w.writerow([k, i, repr(t), repr(a), repr(g)])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beamra", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="JSON configuration file (defaults apply when omitted)")
        sp.add_argument("--seed", type=int, help="64-bit run seed (overrides the config)")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for evaluation")

    sp = sub.add_parser("train", help="train the DDQN beam controller")
    common(sp)
    sp.add_argument("--episodes", type=int, help="training episode budget")

    sp = sub.add_parser("evaluate", help="evaluate one scheme")
    common(sp)
    sp.add_argument("--scheme", choices=sorted(SCHEMES), required=True)
    sp.add_argument("--checkpoint", help="network checkpoint (ddqn scheme)")
    sp.add_argument("--episodes", type=int, help="evaluation episodes")

    sp = sub.add_parser("compare", help="evaluate all three schemes and write the delay table")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--episodes", type=int, help="evaluation episodes per scheme")

    sp = sub.add_parser("beam-pattern", help="export beam gain patterns as CSV")
    common(sp, out_required=False)
    sp.add_argument("--action-id", type=int, help="single action to export (default: all)")
    sp.add_argument("--points", type=int, default=4096, help="angular grid size")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        out = Path(args.out) if args.out else None
        if args.command == "train":
            cmd_train(cfg, out)
        elif args.command == "evaluate":
            stats = cmd_evaluate(cfg, out, args.scheme, args.checkpoint, args.jobs)
            print(f"{stats.scheme}: mean delay {stats.mean_delay:.4f} slots "
                  f"({stats.truncated_episodes} truncated episodes)")
        elif args.command == "compare":
            row = cmd_compare(cfg, out, args.checkpoint, args.jobs)
            print(", ".join(f"{k}={v}" for k, v in row.items()))
        else:
            if args.points < 2:
                raise ConfigError("--points must be at least 2")
            text = beam_pattern_csv(cfg, args.action_id, args.points)
            if out is None:
                sys.stdout.write(text)
            else:
                write_atomic(out / "config.json", cfg.to_json())
                write_atomic(out / "beam_pattern.csv", text)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TrainingAborted, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
