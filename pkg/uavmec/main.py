"""
Command-line entry point: trace generation, training, evaluation and sweeps.

    python -m uavmec gen-traces --rows 10 --cols 10 --vehicles 100 --horizon 50 --seed 0 --out traces.csv
    python -m uavmec train --config experiment.json --algo magcdrl --out runs/magcdrl
    python -m uavmec evaluate --checkpoint runs/magcdrl/policy.magc --config experiment.json --out runs/eval
    python -m uavmec sweep --config experiment.json --vary num_uavs --values 2,4,6 --out runs/sweep

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from uavmec.config import settings
from uavmec.core.exceptions import ConfigError, SimulationError
from uavmec.schemas.experiment import load_experiment_config
from uavmec.services import harness
from uavmec.services.sweep_tasks import sweep
from uavmec.services.trace_io import save_network, write_traces
from uavmec.services.traffic import build_grid_network, generate_grid_traces
from uavmec.utils.enums import Algorithm

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _values(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavmec", description="UAV-assisted vehicular MEC simulator")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-traces", help="Generate grid vehicle traces")
    gen.add_argument("--rows", type=int, required=True)
    gen.add_argument("--cols", type=int, required=True)
    gen.add_argument("--vehicles", type=int, required=True)
    gen.add_argument("--horizon", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, required=True, help="Trace CSV")
    gen.add_argument("--network", type=Path, help="Also write the lane network JSON here")

    train = commands.add_parser("train", help="Train one algorithm and write metrics.csv")
    train.add_argument("--config", type=Path, required=True)
    train.add_argument("--algo", choices=[a.value for a in Algorithm])
    train.add_argument("--episodes", type=int)
    train.add_argument("--seed", type=int)
    train.add_argument("--out", type=Path, required=True)

    evaluate = commands.add_parser("evaluate", help="Greedy episodes of a stored policy")
    evaluate.add_argument("--checkpoint", type=Path, required=True)
    evaluate.add_argument("--config", type=Path, required=True)
    evaluate.add_argument("--out", type=Path, required=True)

    sweep_cmd = commands.add_parser("sweep", help="Repeat training over values of one config field")
    sweep_cmd.add_argument("--config", type=Path, required=True)
    sweep_cmd.add_argument("--vary", required=True, help="Dotted field path, e.g. num_uavs or radio.bandwidth_bs")
    sweep_cmd.add_argument("--values", type=_values, required=True)
    sweep_cmd.add_argument("--repetitions", type=int, default=1)
    sweep_cmd.add_argument("--out", type=Path, required=True)
    return parser


def run(args: argparse.Namespace) -> None:
    if args.command == "gen-traces":
        frames = generate_grid_traces(args.rows, args.cols, args.vehicles, args.horizon, args.seed)
        write_traces(frames, args.out)
        if args.network is not None:
            save_network(build_grid_network(args.rows, args.cols), args.network)
        return

    if args.command == "train":
        overrides = {"algorithm": args.algo, "episodes": args.episodes, "seed": args.seed}
        cfg = load_experiment_config(args.config, overrides)
        harness.run_experiment(cfg, out_dir=args.out)
    elif args.command == "evaluate":
        cfg = load_experiment_config(args.config)
        harness.evaluate(cfg, args.checkpoint, out_dir=args.out)
    elif args.command == "sweep":
        cfg = load_experiment_config(args.config)
        sweep(cfg, args.vary, args.values, repetitions=args.repetitions, out_dir=args.out)


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=settings.LOG_LEVEL,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except ConfigError as e:
        logger.error(f"❌ Configuration error: {e.message}")
        return EXIT_CONFIG
    except SimulationError as e:
        logger.error(f"❌ {args.command} failed [{e.error_code}]: {e.message}")
        return EXIT_RUNTIME
    except (ValueError, ArithmeticError, OSError) as e:
        logger.exception(f"❌ {args.command} failed: {str(e)}")
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
