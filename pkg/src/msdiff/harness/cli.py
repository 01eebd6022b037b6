"""Command line entry point.

    msdiff <experiment> --config <path> [--out <dir>] [--workers N] [--seed S]

Exit status: 0 when every threshold passes, 1 on a threshold failure,
2 on a configuration or validation error.
"""

from __future__ import annotations

import argparse
import sys

from ..model import AssumptionError
from .config import EXPERIMENTS, ConfigError, ExperimentConfig
from .emit import emit
from .runner import run

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="msdiff", description="Multiscale diffusion experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="INI experiment configuration")
    p.add_argument("--out", help="output directory (overrides [output] directory)")
    p.add_argument("--workers", type=int, help="worker processes for replicates")
    p.add_argument("--seed", type=int, help="base seed (overrides [simulation] base_seed)")
    return p


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    try:
        cfg = ExperimentConfig.load(args.config)
        cfg = cfg.with_overrides(experiment=args.experiment, out_dir=args.out,
                                 workers=args.workers, base_seed=args.seed)
        report = run(cfg)
        emit(report, cfg.out_dir, cfg.formats)
    except (ConfigError, AssumptionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for d in report.decisions:
        print(d.line())
    for f in report.flags:
        print(f"NOTE {f}")
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
