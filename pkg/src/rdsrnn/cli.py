"""Command-line experiment runner.

Usage::

    rdsrnn <experiment> --out <dir> [--config <file.json>] [--seed N] [--threads N]

Every experiment has built-in defaults, so ``--config`` is optional; a config
file (schema ``rdsrnn-experiment/1``) overrides them and ``--seed`` overrides
the config. Re-running with the same inputs reproduces the output files
byte for byte.
"""

import argparse
import sys

from .backend import NUMBA_ENABLED
from .errors import ConfigurationError, DivergenceError
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdsrnn",
        description="Random dynamical system / recurrent network experiments",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="experiment config JSON", default=None)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="numba thread cap (results do not depend on it)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and NUMBA_ENABLED:
        import numba

        numba.set_num_threads(max(1, args.threads))
    try:
        if args.config is not None:
            config = ExperimentConfig.from_file(args.config)
            if config.experiment != args.experiment:
                raise ConfigurationError(
                    f"config is for {config.experiment!r}, not {args.experiment!r}"
                )
        else:
            config = ExperimentConfig(experiment=args.experiment)
        if args.seed is not None:
            config = ExperimentConfig(config.experiment, args.seed, config.params)
        summary = run_experiment(config, args.out)
    except (ConfigurationError, DivergenceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for name in summary.get("files", []):
        print(f"wrote {args.out}/{name}")
    print(f"wrote {args.out}/summary.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
