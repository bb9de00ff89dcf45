import argparse
import logging
import sys

from pydantic import ValidationError

from lapkit import LapkitError, emit_report, exit_code, load_config, run_config
from shared.config import config

logging.basicConfig(level=config.LOG_LEVEL)
logger = logging.getLogger(__name__)

# subcommand -> pipeline stages
COMMANDS = {
    "check": ("hypotheses",),
    "mourre": ("mourre",),
    "sweep": ("eigen", "sweep"),
    "eigs": ("eigen",),
    "hs-demo": ("hs",),
    "run": ("hypotheses", "commutators", "mourre", "eigen", "sweep", "hs"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=f"{config.APP_TITLE}: Mourre estimates and LAP sweeps at the threshold.")
    parser.add_argument("command", choices=list(COMMANDS), help="Pipeline stage(s) to run")
    parser.add_argument("--config", required=True, help="Path to a JSON run config")
    parser.add_argument("--out", default=None, help="Output directory (default: the config's output_dir)")
    parser.add_argument("--seed", type=lambda s: int(s, 0), default=None, help="Override the config seed")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads for sweeps and Gram matrices")
    parser.add_argument("--emit-gnuplot", action="store_true", help="Also write plot.gp next to the CSVs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ValidationError as e:
        for error in e.errors():
            location = ".".join(str(part) for part in error["loc"]) or "<root>"
            print(f"[ERROR] {args.config}: {location}: {error['msg']}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        print(f"[ERROR] {args.config}: {e}", file=sys.stderr)
        return 1

    stages = list(COMMANDS[args.command])
    if args.command == "sweep" and not (cfg.sweep and cfg.sweep.include_eigenvalues):
        stages.remove("eigen")
    try:
        report = run_config(cfg, seed=args.seed, workers=args.threads, stages=stages)
        emit_report(report, args.out, gnuplot=args.emit_gnuplot)
    except (LapkitError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1

    code = exit_code(report)
    print(f"{args.command} completed with exit code {code}.")
    return code


if __name__ == "__main__":
    sys.exit(main())
