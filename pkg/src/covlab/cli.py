"""``covlab`` command line.

Exit codes: 0 success, 2 some sweep points failed, 1 bad config or input.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .covering import covering_inequality_grid
from .expcli.config import ConfigError, load_config
from .expcli.runner import (emit_csv, emit_region_csv, emit_region_summary, emit_summary,
                            run_experiment, run_region)


def _out_dir(args, cfg) -> Path:
    out = Path(args.out) if args.out else cfg.base_dir / cfg.values["output"]["path"]
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    if cfg.kind == "region":
        return cmd_region(args, cfg)
    run = run_experiment(cfg, threads=args.threads)
    out = _out_dir(args, cfg)
    (out / f"{cfg.scenario_id}.csv").write_text(emit_csv(run))
    summary = emit_summary(run)
    (out / f"{cfg.scenario_id}_summary.txt").write_text(summary)
    (out / f"{cfg.scenario_id}_manifest.json").write_text(run.manifest.to_json())
    sys.stdout.write(summary)
    return 2 if run.partial else 0


def cmd_region(args, cfg=None) -> int:
    cfg = cfg or _load(args)
    if cfg.kind != "region":
        raise ConfigError([(0, f"scenario kind is {cfg.kind!r}, expected 'region'")])
    frontiers, manifest = run_region(cfg, threads=args.threads)
    out = _out_dir(args, cfg)
    (out / f"{cfg.scenario_id}_frontier.csv").write_text(emit_region_csv(frontiers))
    (out / f"{cfg.scenario_id}_manifest.json").write_text(manifest.to_json())
    summary = emit_region_summary(cfg, frontiers)
    (out / f"{cfg.scenario_id}_summary.txt").write_text(summary)
    sys.stdout.write(summary)
    return 0


def cmd_check(args) -> int:
    checks, failures = covering_inequality_grid(args.steps, args.n_max)
    print(f"{checks} checks, {failures} failures")
    return 0 if failures == 0 else 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="experiment config file")
        sp.add_argument("--out", help="output directory (default: [output] path)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads")
        sp.add_argument("--seed", type=int, help="override the config seed")

    common(sub.add_parser("run", help="run a covering sweep (or a region config)"))
    common(sub.add_parser("region", help="sweep the rate region"))
    ci = sub.add_parser("check-inequality", help="check (1-xy)^n <= 1-x+exp(-yn) on a grid")
    ci.add_argument("--steps", type=int, default=100)
    ci.add_argument("--n-max", type=int, default=100)
    sub.add_parser("version", help="print the version")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "version":
            print(__version__)
            return 0
        if args.command == "check-inequality":
            return cmd_check(args)
        if args.threads < 1:
            raise ConfigError([(0, "--threads must be >= 1")])
        return cmd_run(args) if args.command == "run" else cmd_region(args)
    except ConfigError as e:
        print(f"config error:\n{e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
