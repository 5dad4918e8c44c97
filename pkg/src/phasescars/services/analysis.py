"""Form factors, trace identities and periodic-orbit weights."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from phasescars.errors import NumericalCheckError
from phasescars.models import DiagonalApproximationRow, PeriodicPointRecord, WeightKind

logger = logging.getLogger(__name__)

TRACE_FLOOR = 1.0
MARGINAL_DETERMINANT = 1e-9


@dataclass(frozen=True)
class SpectralSeries:
    """Eigenphases of a unitary, with its dimension and symmetry class."""

    eigenphases: np.ndarray
    dimension: int
    beta: int = 2

    def __post_init__(self) -> None:
        if self.beta not in (1, 2):
            raise ValueError(f"Symmetry class beta must be 1 or 2, got {self.beta}")
        if len(self.eigenphases) != self.dimension:
            raise ValueError("Number of eigenphases must equal the dimension")


def spectral_series_from_matrix(matrix: np.ndarray, *, beta: int = 2) -> SpectralSeries:
    try:
        eigenvalues = scipy.linalg.eigvals(matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalCheckError("eigenvalue convergence", math.inf, 0.0) from exc
    phases = np.sort(np.mod(np.angle(eigenvalues), 2 * math.pi))
    return SpectralSeries(eigenphases=phases, dimension=matrix.shape[0], beta=beta)


def form_factor(series: SpectralSeries, n: int) -> float:
    """K(n) = |sum_k exp(i n theta_k)|^2 / D."""
    if n < 0:
        raise ValueError(f"Form factor step must be non-negative, got {n}")
    total = np.sum(np.exp(1j * n * series.eigenphases))
    return float(abs(total) ** 2 / series.dimension)


def form_factor_curve(series: SpectralSeries, n_values: Iterable[int], *, window: int = 1) -> np.ndarray:
    """K(n) for each n, optionally averaged over a centered boxcar of ``window`` steps."""
    if window < 1 or window % 2 == 0:
        raise ValueError("Smoothing window must be a positive odd number of steps")
    half = window // 2
    values = []
    for n in n_values:
        neighbours = [form_factor(series, m) for m in range(max(n - half, 0), n + half + 1)]
        values.append(math.fsum(neighbours) / len(neighbours))
    return np.array(values)


def identity_check(trace_sum: float, series: SpectralSeries, n: int, *, floor: float = TRACE_FLOOR) -> float:
    """Relative residual of sum(P) = D K(n)."""
    target = series.dimension * form_factor(series, n)
    return abs(trace_sum - target) / max(abs(trace_sum), floor)


def diagonal_approximation_report(
    series: SpectralSeries,
    classical: Mapping[int, float],
    *,
    beta: int | None = None,
    window: int = 1,
) -> list[DiagonalApproximationRow]:
    """Rows n, tau = n/D, K(n) and (2/beta) tau P_cl(n); the n = 0 row carries zeros.

    K(n) is boxcar-averaged over ``window`` steps as in ``form_factor_curve``.
    """
    beta = beta or series.beta
    rows = []
    for n in sorted(classical):
        tau = n / series.dimension
        if n == 0:
            rows.append(DiagonalApproximationRow(n=0, tau=0.0, form_factor=0.0, classical_prediction=0.0, ratio=None))
            continue
        measured = float(form_factor_curve(series, [n], window=window)[0])
        prediction = (2 / beta) * tau * classical[n]
        ratio = measured / prediction if prediction else None
        rows.append(
            DiagonalApproximationRow(n=n, tau=tau, form_factor=measured, classical_prediction=prediction, ratio=ratio)
        )
    return rows


def orbit_weight(
    record: PeriodicPointRecord | None = None,
    kind: WeightKind = WeightKind.MAP,
    *,
    stability_denominator: float | None = None,
    primitive_period: float | None = None,
    hbar: float | None = None,
    energy_width: float | None = None,
) -> float:
    """Semiclassical weight of one periodic point.

    ``map``: N^2 / |det(M - I)| with N the primitive period in map steps.
    ``scar``: (T_p / 2 pi hbar) / |det(M - I)| with T_p the primitive period time.
    ``tube``: energy_width T_p^2 / (2 pi hbar |det(M - I)|).

    A record supplies the stability denominator and period itself; for
    linear torus maps pass ``stability_denominator`` and ``primitive_period``.
    """
    if record is not None:
        denominator = record.stability_denominator
        if primitive_period is None:
            primitive_period = record.primitive_period if kind == WeightKind.MAP else record.primitive_time
    elif stability_denominator is not None:
        denominator = float(stability_denominator)
    else:
        raise ValueError("Need a periodic point record or a stability denominator")
    if denominator < MARGINAL_DETERMINANT:
        raise ValueError("Marginal orbit: |det(M - I)| vanishes and the weight diverges")
    if primitive_period is None or primitive_period <= 0:
        raise ValueError("Primitive period must be positive")

    if kind == WeightKind.MAP:
        return primitive_period**2 / denominator
    if hbar is None or hbar <= 0:
        raise ValueError(f"Weight kind {kind} needs a positive hbar")
    if kind == WeightKind.SCAR:
        return (primitive_period / (2 * math.pi * hbar)) / denominator
    if energy_width is None or energy_width <= 0:
        raise ValueError("Tube weights need a positive energy width")
    return energy_width * primitive_period**2 / (2 * math.pi * hbar * denominator)
