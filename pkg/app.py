#!/usr/bin/env python3
"""
Two-Phase Harmonic Map Flow

Runs minimizing-movement flows of O(n)-valued maps with a minimal-pair
interface (fixed or moving), the sphere-valued toy flow, and the randomized
matrix-algebra checks. Every run writes a trace CSV, field snapshots and a
JSON summary; the exit status says whether all checked invariants held.

    app.py run configs/fixed_1d.json
    app.py sweep configs/fixed_1d.json --param N --values 8,16,32
    app.py verify --n 4 --trials 1000 --seed 7
"""

import argparse
import sys
from pathlib import Path

# Add src to Python path
sys.path.insert(0, str(Path(__file__).parent))

from src.config.settings import RunConfig, VerifyConfig
from src.core.errors import ConfigError, FlowError, LifespanError
from src.services.experiment.runner import ExperimentRunner
from src.utils.helpers import parse_values, setup_logging

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Two-phase harmonic map flow experiments")
    parser.add_argument("--verbose", action="store_true", help="Debug logging on stderr")
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", help="Run one configuration")
    run.add_argument("config", type=str, help="Path to the JSON configuration")
    run.add_argument("--output", type=str, help="Output root (overrides the config and FLOW_OUTPUT_ROOT)")

    sweep = sub.add_parser("sweep", help="Run a configuration for several values of one parameter")
    sweep.add_argument("config", type=str, help="Path to the JSON configuration")
    sweep.add_argument("--param", type=str, required=True, choices=["N", "seed", "lambda"],
                       help="Parameter to sweep")
    sweep.add_argument("--values", type=str, required=True, help="Comma separated values, e.g. 8,16,32")
    sweep.add_argument("--output", type=str, help="Output root")

    verify = sub.add_parser("verify", help="Randomized checks of the matrix algebra")
    verify.add_argument("--n", type=int, nargs="+", default=[4], help="Matrix sizes")
    verify.add_argument("--trials", type=int, default=1000, help="Random trials per check")
    verify.add_argument("--seed", type=int, default=0, help="Master seed")
    verify.add_argument("--output", type=str, help="Output root")
    return parser


def load_config(args) -> RunConfig:
    if args.command == "verify":
        config = RunConfig.from_env()
        config.mode = "verify"
        config.seed = args.seed
        config.verify = VerifyConfig(n=args.n[0], trials=args.trials, sizes=list(args.n))
    else:
        config = RunConfig.from_json(args.config).apply_env_overrides()
    if args.output:
        config.output.root = args.output
    return config.validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    setup_logging(args.verbose)

    try:
        config = load_config(args)
        runner = ExperimentRunner(config)
        if args.command == "sweep":
            values = parse_values(args.values)
            report = runner.sweep(args.param, values)
            passed = report["passed"]
        else:
            passed = runner.run().passed
    except (ConfigError, LifespanError) as e:
        print(f"❌ Configuration error: {e}")
        for key, value in e.details.items():
            print(f"   {key}: {value}")
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("\n\n⚠️  Run interrupted by user")
        print("   Partial results may be available in the output directory")
        return EXIT_INVARIANT
    except FlowError as e:
        print(f"\n❌ Error during run: {e}")
        for key, value in e.details.items():
            print(f"   {key}: {value}")
        return EXIT_INVARIANT

    print()
    if passed:
        print("🏁 All checked invariants passed")
        return EXIT_OK
    print("❌ Some invariants failed; see the summary for details")
    return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
