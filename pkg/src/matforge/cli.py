"""Command-line entry point.

    matforge <subcommand> --config <path> [--seed N] [--out DIR] [--dump-stats]

Subcommands: stats, predict, smooth, bake, rerender, validate, pipeline.
Exit codes: 0 success, 2 config error, 3 stage failure (stage named on
stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, MatforgeError
from .pipeline import (StageError, load_atlas, run_pipeline, stage_bake,
                       stage_predict, stage_rerender, stage_smooth, stage_stats,
                       stage_validate)
from .scene import load_scene_config

_COMMANDS = ("stats", "predict", "smooth", "bake", "rerender", "validate",
             "pipeline")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="matforge",
                                description="Multi-view SVBRDF atlas estimation")
    p.add_argument("command", choices=_COMMANDS)
    p.add_argument("--config", required=True, help="scene config JSON")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--out", default="matforge_out", help="artifact directory")
    p.add_argument("--dump-stats", action="store_true",
                   help="write per-view statistics planes during `pipeline`")
    return p


def _run(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "pipeline":
        report = run_pipeline(args.config, out, seed=args.seed,
                              dump_stats=args.dump_stats)
        print(json.dumps(report.to_dict(), indent=2))
        return 0

    scene = load_scene_config(args.config)
    stage = args.command
    try:
        if stage == "stats":
            stage_stats(scene, out, dump=True)
        elif stage == "predict":
            _packed, datas = stage_stats(scene, out, dump=args.dump_stats)
            stage_predict(scene, datas, out, seed=args.seed)
        elif stage == "smooth":
            stage_smooth(scene, out)
        elif stage == "bake":
            stage_bake(scene, out)
        elif stage == "rerender":
            stage_rerender(scene, load_atlas(out), out)
        elif stage == "validate":
            renders = stage_rerender(scene, load_atlas(out), out)
            values = stage_validate(scene, renders)
            print(json.dumps({"psnr_db": values}, indent=2))
    except MatforgeError:
        raise
    except Exception as e:
        raise StageError(stage, e) from e
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except StageError as e:
        print(f"error in stage '{e.stage}': {e.cause}", file=sys.stderr)
        return 3
    except MatforgeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
