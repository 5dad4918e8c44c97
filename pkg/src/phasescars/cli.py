"""Command-line front end.

Usage:
    phasescars cat-scars --set dimension=60 --set iterations=3 --out results/cat
    phasescars oscillator-scars --config runs/double_well.conf --threads 4

Every subcommand accepts ``--config`` (``key = value`` run file), repeated
``--set key=value`` overrides, ``--out``, ``--seed`` and ``--threads``.
Exit status is 0 on success, 1 for invalid input and 2 when a numerical
self-check fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from pydantic import ValidationError

from phasescars.config import get_settings, load_run_config
from phasescars.errors import NumericalCheckError
from phasescars.models import RunConfig, Subcommand
from phasescars.pipeline.cat_scars import CatScarsPipeline
from phasescars.pipeline.form_factor import FormFactorPipeline
from phasescars.pipeline.midpoint_surface import MidpointSurfacePipeline
from phasescars.pipeline.oscillator_scars import OscillatorScarsPipeline
from phasescars.pipeline.phase_portrait import PeriodicPointsPipeline, PoincarePipeline
from phasescars.services.export import ArtifactStore

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2

DESCRIPTIONS = {
    Subcommand.CAT_SCARS: "Diagonal Wigner propagator of the quantized cat map with periodic-point markers",
    Subcommand.OSCILLATOR_SCARS: "Quantum and Liouville diagonal propagators of the driven quartic oscillator",
    Subcommand.FORM_FACTOR: "Spectral form factor, trace identity and diagonal approximation",
    Subcommand.MIDPOINT_SURFACE: "Chord-midpoint surface of a closed orbit as an OBJ mesh",
    Subcommand.POINCARE: "Stroboscopic section cloud of the driven oscillator",
    Subcommand.PERIODIC_POINTS: "Periodic points with stability data and semiclassical weights",
}


def cmd_cat_scars(config: RunConfig) -> dict:
    return CatScarsPipeline(ArtifactStore(config.output_dir)).run(config)


def cmd_oscillator_scars(config: RunConfig) -> dict:
    return OscillatorScarsPipeline(ArtifactStore(config.output_dir), threads=config.threads).run(config)


def cmd_form_factor(config: RunConfig) -> dict:
    return FormFactorPipeline(ArtifactStore(config.output_dir)).run(config)


def cmd_midpoint_surface(config: RunConfig) -> dict:
    return MidpointSurfacePipeline(ArtifactStore(config.output_dir)).run(config)


def cmd_poincare(config: RunConfig) -> dict:
    return PoincarePipeline(ArtifactStore(config.output_dir)).run(config)


def cmd_periodic_points(config: RunConfig) -> dict:
    return PeriodicPointsPipeline(ArtifactStore(config.output_dir)).run(config)


COMMANDS: dict[Subcommand, Callable[[RunConfig], dict]] = {
    Subcommand.CAT_SCARS: cmd_cat_scars,
    Subcommand.OSCILLATOR_SCARS: cmd_oscillator_scars,
    Subcommand.FORM_FACTOR: cmd_form_factor,
    Subcommand.MIDPOINT_SURFACE: cmd_midpoint_surface,
    Subcommand.POINCARE: cmd_poincare,
    Subcommand.PERIODIC_POINTS: cmd_periodic_points,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phasescars", description="Time-domain scar experiments")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for subcommand in Subcommand:
        sub = subparsers.add_parser(subcommand.value, help=DESCRIPTIONS[subcommand])
        sub.add_argument("--config", type=Path, help="Run file of key = value lines")
        sub.add_argument("--out", dest="output_dir", help="Output directory")
        sub.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Override one run parameter (repeatable)",
        )
        sub.add_argument("--seed", type=int, help="Random seed")
        sub.add_argument("--threads", type=int, help="Worker threads for independent subtasks")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which is the numerical-failure status here
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    settings = get_settings()
    logging.basicConfig(level=settings.log_level, format="%(levelname)s | %(message)s")

    try:
        config = load_run_config(
            args.subcommand,
            config_path=args.config,
            overrides=args.overrides,
            settings=settings,
            extra={"output_dir": args.output_dir, "seed": args.seed, "threads": args.threads},
        )
        summary = COMMANDS[config.subcommand](config)
    except NumericalCheckError:
        logger.exception("Numerical self-check failed")
        return EXIT_NUMERICAL
    except (ValidationError, ValueError, OverflowError, OSError):
        logger.exception("Invalid run configuration")
        return EXIT_INVALID

    scalars = {k: v for k, v in summary.items() if not isinstance(v, (dict, list))}
    logger.info("Finished %s: %s", config.subcommand, scalars)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
