"""Command line entry points: `seals run` and `seals serve`."""

import argparse
import json
import sys

from .config import load_scenario
from .scenarios import RUNNERS


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="seals",
        description="Cross-medium robot dynamics simulator (headless).")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario file")
    run_p.add_argument("scenario", help="path to a scenario YAML file")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--verbose", action="store_true")

    serve_p = sub.add_parser("serve", help="serve the env stepping protocol")
    serve_p.add_argument("--scenario", required=True)
    serve_p.add_argument("--port", type=int, default=7777)

    args = parser.parse_args(argv)

    if args.command == "run":
        cfg = load_scenario(args.scenario)
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.logging.verbose = args.verbose or cfg.logging.verbose
        runner = RUNNERS.get(cfg.task.type)
        if runner is None:
            print(f"scenario task type {cfg.task.type!r} is not runnable",
                  file=sys.stderr)
            return 2
        result = runner(cfg, out_dir=args.out)
        report = result[1]
        print(json.dumps(report, indent=2, default=float))
        return 0 if report.get("ok") else 1

    if args.command == "serve":
        from .envserver import serve
        cfg = load_scenario(args.scenario)
        print(f"serving scenario {cfg.name!r}: TCP :{args.port}, "
              f"WebSocket :{args.port + 1}")
        serve(cfg, args.port)
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
