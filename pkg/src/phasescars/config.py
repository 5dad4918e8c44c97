"""Application configuration via environment variables and run files."""

from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

from pydantic_settings import BaseSettings

from phasescars.models import RunConfig, Subcommand


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Output
    output_dir: str = "results"

    # Execution
    threads: int = 1
    seed: int = 20070101

    # Self-check tolerances
    identity_tolerance: float = 1e-8
    unitarity_tolerance: float = 1e-10

    # General
    log_level: str = "INFO"

    model_config = {
        "env_prefix": "SCARS_",
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "extra": "ignore",
    }


def get_settings() -> Settings:
    """Create and return application settings."""
    return Settings()


def parse_assignment(line: str) -> tuple[str, str]:
    """Split a ``key=value`` assignment, rejecting anything else."""
    key, sep, value = line.partition("=")
    key = key.strip().replace("-", "_")
    if not sep or not key:
        raise ValueError(f"Expected key=value, got {line!r}")
    return key, value.strip()


def parse_config_text(text: str) -> dict[str, str]:
    """Parse a plain-text run file of ``key=value`` lines.

    Blank lines and lines starting with ``#`` are skipped. A key given twice
    keeps its last value.
    """
    values: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, value = parse_assignment(line)
        values[key] = value
    return values


def parse_config_file(path: Path | str) -> dict[str, str]:
    """Read and parse a run file."""
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def load_run_config(
    subcommand: Subcommand | str,
    *,
    config_path: Path | str | None = None,
    overrides: Iterable[str] = (),
    settings: Settings | None = None,
    extra: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Merge settings, run file, ``--set`` overrides and flags into a RunConfig.

    Later sources win: environment settings, then the run file, then each
    ``--set`` override in order, then explicit flag values in ``extra``.
    Unknown keys fail validation.
    """
    settings = settings or get_settings()
    merged: dict[str, Any] = {
        "seed": settings.seed,
        "threads": settings.threads,
        "output_dir": settings.output_dir,
        "identity_tolerance": settings.identity_tolerance,
        "unitarity_tolerance": settings.unitarity_tolerance,
    }
    if config_path is not None:
        merged.update(parse_config_file(config_path))
    for item in overrides:
        key, value = parse_assignment(item)
        merged[key] = value
    if extra:
        merged.update({key: value for key, value in extra.items() if value is not None})
    merged["subcommand"] = Subcommand(subcommand)
    return RunConfig.model_validate(merged)
