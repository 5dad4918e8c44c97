"""Run a phasescars subcommand from a source checkout.

Usage:
    uv run python scripts/run_experiments.py cat-scars --set iterations=3 --out results/cat
    uv run python scripts/run_experiments.py oscillator-scars --config runs/double_well.conf --threads 4

Same arguments as the installed ``phasescars`` command.
"""

from __future__ import annotations

import sys
from pathlib import Path

# Add src to path for direct execution
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from phasescars.cli import main  # noqa: E402

if __name__ == "__main__":
    raise SystemExit(main())
