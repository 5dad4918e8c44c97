"""Floquet propagators of driven oscillators and their phase-space portraits.

The continuum problem is sampled on a periodic position grid, which turns
it into a finite-dimensional one; the doubled-grid Weyl calculus of the
torus then applies unchanged. Fields are reported on the central half of
the doubled grid, where the box images do not reach.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft

from phasescars.errors import NumericalCheckError
from phasescars.models import DrivenOscillator, HarmonicParams, PhaseWindow, PositionGrid, TransportReport
from phasescars.services import continuum_classical
from phasescars.services.analysis import SpectralSeries, spectral_series_from_matrix
from phasescars.services.torus_quantum import checked_autocorrelation, doubled_grid_symbol, symbol_of_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FloquetOperator:
    """One-period propagator K(t0 + T, t0) in the position basis."""

    params: DrivenOscillator
    grid: PositionGrid
    matrix: np.ndarray
    steps: int
    t0: float
    step_change: float | None = None

    @property
    def period(self) -> float:
        return self.params.period

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def power(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError(f"Power must be non-negative, got {n}")
        return np.linalg.matrix_power(self.matrix, n)


@dataclass(frozen=True)
class WeylPropagatorField:
    """Doubled-grid Weyl symbol of K^n with its physical coordinates."""

    grid: PositionGrid
    periods: int
    time: float
    values: np.ndarray
    operator_trace: complex
    frobenius_norm_sq: float

    def positions(self) -> np.ndarray:
        return -self.grid.box_length / 2 + np.arange(2 * self.grid.n_points) * self.grid.dq / 2

    def momenta(self) -> np.ndarray:
        n = self.grid.n_points
        return np.fft.fftfreq(2 * n, d=1.0 / (2 * n)) * self.grid.dp / 2


@dataclass(frozen=True)
class ContinuumDiagonalField:
    """Diagonal of the Weyl superoperator on the central N x N block, axes (q, p).

    Values are scaled so that their sum times ``cell_area`` is |tr K^n|^2.
    """

    q_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray
    cell_area: float
    time: float
    expected_trace: float
    imaginary_residual: float

    def trace(self) -> float:
        return math.fsum(self.values.ravel()) * self.cell_area

    @property
    def window(self) -> PhaseWindow:
        return PhaseWindow(
            q_min=float(self.q_axis[0]),
            q_max=float(self.q_axis[-1]),
            p_min=float(self.p_axis[0]),
            p_max=float(self.p_axis[-1]),
        )


@dataclass(frozen=True)
class CoherentReturnField:
    """Return probability of coherent states after n periods, on the central block."""

    q_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray
    time: float
    sigma: float


# --- Grid helpers ---


def central_indices(n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Doubled-grid rows for q in [-L/4, L/4) and columns for p in [-p_N / 2, p_N / 2)."""
    half = n_points // 2
    size = 2 * n_points
    rows = np.arange(half, half + n_points)
    cols = np.arange(-half, half) % size
    return rows, cols


def central_axes(grid: PositionGrid) -> tuple[np.ndarray, np.ndarray]:
    n = grid.n_points
    q_axis = -grid.box_length / 4 + np.arange(n) * grid.dq / 2
    p_axis = (np.arange(n) - n // 2) * grid.dp / 2
    return q_axis, p_axis


# --- Propagation ---


def split_operator_propagate(
    params: DrivenOscillator,
    grid: PositionGrid,
    psi: np.ndarray,
    t0: float,
    duration: float,
    steps: int,
    *,
    order: int = 4,
    workers: int | None = None,
) -> np.ndarray:
    """Composed Strang steps V/2 - T - V/2, potential at each substep's midpoint time.

    ``order`` 4 composes three Strang substeps with the triple-jump weights
    used by the classical integrator. ``psi`` holds one state per column;
    all columns advance together.
    """
    if steps < 1:
        raise ValueError("Need at least one split-operator step")
    weights = continuum_classical.composition_weights(order)
    dt = duration / steps
    hbar = grid.hbar
    q = grid.positions
    state = np.array(psi, dtype=complex, copy=True)
    column = (slice(None),) + (None,) * (state.ndim - 1)
    kinetic = {
        w: np.exp(-1j * grid.momenta**2 / (2 * params.mass) * w * dt / hbar)[column] for w in set(weights)
    }
    for step in range(steps):
        t = t0 + step * dt
        for w in weights:
            sub = w * dt
            half_kick = np.exp(-0.5j * params.potential(q, t + 0.5 * sub) * sub / hbar)[column]
            state *= half_kick
            state = scipy.fft.ifft(
                kinetic[w] * scipy.fft.fft(state, axis=0, workers=workers), axis=0, workers=workers
            )
            state *= half_kick
            t += sub
    return state


def build_floquet(
    params: DrivenOscillator,
    grid: PositionGrid,
    *,
    steps: int = 2048,
    t0: float = 0.0,
    tolerance: float = 1e-8,
    order: int = 4,
    workers: int | None = None,
) -> FloquetOperator:
    """One-period propagator by stepping every position-basis column through the period."""
    matrix = split_operator_propagate(
        params, grid, np.eye(grid.n_points, dtype=complex), t0, params.period, steps, order=order, workers=workers
    )
    residual = float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(grid.n_points))))
    if residual > tolerance:
        raise NumericalCheckError("Floquet unitarity", residual, tolerance)
    logger.info(
        "Floquet operator N=%d, %d steps of order %d, unitarity residual %.2e", grid.n_points, steps, order, residual
    )
    return FloquetOperator(params=params, grid=grid, matrix=matrix, steps=steps, t0=t0)


def floquet_convergence(
    params: DrivenOscillator, grid: PositionGrid, *, steps: int, t0: float = 0.0, order: int = 4
) -> float:
    """Largest entry change of K when the step count doubles."""
    coarse = build_floquet(params, grid, steps=steps, t0=t0, tolerance=math.inf, order=order)
    fine = build_floquet(params, grid, steps=2 * steps, t0=t0, tolerance=math.inf, order=order)
    return float(np.max(np.abs(coarse.matrix - fine.matrix)))


def converged_floquet(
    params: DrivenOscillator,
    grid: PositionGrid,
    *,
    steps: int = 2048,
    max_steps: int = 32768,
    tolerance: float = 1e-6,
    t0: float = 0.0,
    unitarity_tolerance: float = 1e-8,
    order: int = 4,
    workers: int | None = None,
) -> FloquetOperator:
    """Double the step count until K changes by at most ``tolerance`` in max norm.

    The finer operator of the last accepted pair is returned with the
    measured change in ``step_change``.
    """
    coarse = build_floquet(
        params, grid, steps=steps, t0=t0, tolerance=unitarity_tolerance, order=order, workers=workers
    )
    while True:
        fine = build_floquet(
            params, grid, steps=2 * coarse.steps, t0=t0, tolerance=unitarity_tolerance, order=order, workers=workers
        )
        change = float(np.max(np.abs(fine.matrix - coarse.matrix)))
        logger.info("Floquet step doubling %d -> %d changes K by %.2e", coarse.steps, fine.steps, change)
        if change <= tolerance:
            return replace(fine, step_change=change)
        if fine.steps >= max_steps:
            raise NumericalCheckError(f"Floquet dt convergence at {fine.steps} steps", change, tolerance)
        coarse = fine


def mehler_kernel(params: HarmonicParams, grid: PositionGrid, time: float) -> np.ndarray:
    """Analytic harmonic propagator K(q_j, q_k; t) dq sampled on the grid, undriven.

    At caustic times (Omega t a multiple of pi) the kernel is the identity
    or the parity, times the Maslov phase. Away from them the sampled kernel
    is a faithful propagator only where its chirp is resolved; on a grid
    with m Omega dq^2 = 2 pi hbar / N at quarter turns it is an exact
    centered DFT.
    """
    if params.drive != 0:
        raise ValueError("The Mehler kernel covers the undriven oscillator only")
    hbar = grid.hbar
    m_omega = params.mass * params.harmonic_frequency
    angle = params.harmonic_frequency * time
    q = grid.positions
    n = grid.n_points
    turns = round(angle / math.pi)
    if abs(angle - turns * math.pi) < 1e-12:
        kernel = np.eye(n, dtype=complex)
        if turns % 2:
            kernel = kernel[(n - np.arange(n)) % n]
        return np.exp(-0.5j * math.pi * turns) * kernel
    sine, cosine = math.sin(angle), math.cos(angle)
    maslov = np.exp(-0.25j * math.pi * math.copysign(1.0, sine) - 0.5j * math.pi * math.floor(angle / math.pi))
    amplitude = math.sqrt(m_omega / (2 * math.pi * hbar * abs(sine))) * grid.dq
    qj, qk = q[:, None], q[None, :]
    phase = m_omega / (2 * hbar * sine) * ((qj**2 + qk**2) * cosine - 2 * qj * qk)
    return amplitude * maslov * np.exp(1j * phase)


def quasienergy_spectrum(operator: FloquetOperator, *, beta: int = 2) -> SpectralSeries:
    """Eigenphases theta in [0, 2 pi) with K v = exp(i theta) v."""
    return spectral_series_from_matrix(operator.matrix, beta=beta)


# --- Weyl symbols and diagonal fields ---


def weyl_propagator(operator: FloquetOperator, periods: int = 1) -> WeylPropagatorField:
    symbol = symbol_of_matrix(operator.power(periods), step=periods)
    return WeylPropagatorField(
        grid=operator.grid,
        periods=periods,
        time=periods * operator.period,
        values=symbol.values,
        operator_trace=symbol.operator_trace,
        frobenius_norm_sq=symbol.frobenius_norm_sq,
    )


def continuum_diagonal_field(propagator: WeylPropagatorField, *, tolerance: float = 1e-8) -> ContinuumDiagonalField:
    """Central block of the diagonal field, checked against |tr K^n|^2."""
    grid = propagator.grid
    n = grid.n_points
    raw, imaginary_residual = checked_autocorrelation(propagator.values, tolerance)
    rows, cols = central_indices(n)
    block = raw[np.ix_(rows, cols)]
    cell_area = grid.cell_area
    q_axis, p_axis = central_axes(grid)
    expected = abs(propagator.operator_trace) ** 2
    field = ContinuumDiagonalField(
        q_axis=q_axis,
        p_axis=p_axis,
        values=block / (n**2 * cell_area),
        cell_area=cell_area,
        time=propagator.time,
        expected_trace=expected,
        imaginary_residual=imaginary_residual,
    )
    residual = abs(field.trace() - expected) / max(expected, 1.0)
    if residual > tolerance:
        raise NumericalCheckError("continuum diagonal field trace", residual, tolerance)
    return field


# --- States and transport ---


def coherent_state(grid: PositionGrid, q0: float, p0: float, sigma: float) -> np.ndarray:
    """Normalized Gaussian of position width ``sigma`` centered at (q0, p0)."""
    if sigma <= 0:
        raise ValueError("Coherent-state width must be positive")
    q = grid.positions
    psi = np.exp(-((q - q0) ** 2) / (2 * sigma**2) + 1j * p0 * q / grid.hbar)
    return psi / np.linalg.norm(psi)


def coherent_return_field(operator: FloquetOperator, periods: int = 1, *, sigma: float) -> CoherentReturnField:
    """|<b|K^n|b>|^2 for coherent states |b> of position width ``sigma`` on the central block.

    Per row q0 the momentum dependence is a DFT over the diagonals of
    g K^n g, with g the sampled Gaussian envelope: p0 = l dp / 2 gives
    the phase exp(i pi l (k - j) / N).
    """
    if sigma <= 0:
        raise ValueError("Coherent-state width must be positive")
    grid = operator.grid
    n = grid.n_points
    size = 2 * n
    matrix = operator.power(periods)
    q = grid.positions
    q_axis, p_axis = central_axes(grid)
    _, cols = central_indices(n)
    rows, columns = np.indices((n, n))
    offsets = ((columns - rows) % size).ravel()
    values = np.empty((n, n))
    for row, q0 in enumerate(q_axis):
        envelope = np.exp(-((q - q0) ** 2) / (2 * sigma**2))
        envelope /= np.linalg.norm(envelope)
        weighted = (envelope[:, None] * matrix * envelope[None, :]).ravel()
        diagonals = np.bincount(offsets, weights=weighted.real, minlength=size) + 1j * np.bincount(
            offsets, weights=weighted.imag, minlength=size
        )
        amplitudes = scipy.fft.ifft(diagonals) * size
        values[row] = np.abs(amplitudes[cols]) ** 2
    logger.info("Coherent return field at n=%d, sigma=%.3g, peak %.3g", periods, sigma, values.max())
    return CoherentReturnField(
        q_axis=q_axis, p_axis=p_axis, values=values, time=periods * operator.period, sigma=sigma
    )


def wigner_function(grid: PositionGrid, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Wigner function of a pure state on the central block, normalized to unit integral."""
    density = np.outer(psi, psi.conj())
    rows, cols = central_indices(grid.n_points)
    symbol = doubled_grid_symbol(density)
    values = (2 / (math.pi * grid.hbar)) * symbol[np.ix_(rows, cols)].real
    q_axis, p_axis = central_axes(grid)
    return q_axis, p_axis, values


def coherent_wigner(q, p, q0: float, p0: float, sigma: float, hbar: float):
    return np.exp(-((q - q0) ** 2) / sigma**2 - sigma**2 * (p - p0) ** 2 / hbar**2) / (math.pi * hbar)


def coherent_state_transport_check(
    params: DrivenOscillator,
    grid: PositionGrid,
    *,
    q0: float,
    p0: float,
    sigma: float,
    time: float,
    t0: float = 0.0,
    steps_per_period: int = 512,
    order: int = 4,
) -> TransportReport:
    """L1 distance between the evolved Wigner function and the transported classical one."""
    if time < 0:
        raise ValueError("Evolution time must be non-negative")
    psi = coherent_state(grid, q0, p0, sigma)
    if time > 0:
        steps = max(1, round(time / params.period * steps_per_period))
        psi = split_operator_propagate(params, grid, psi, t0, time, steps, order=order)
    q_axis, p_axis, quantum = wigner_function(grid, psi)
    qq, pp = np.meshgrid(q_axis, p_axis, indexing="ij")
    q_back, p_back = continuum_classical.flow(
        params, qq, pp, t0 + time, t0, dt=params.period / steps_per_period, order=order
    )
    classical = coherent_wigner(q_back, p_back, q0, p0, sigma, grid.hbar)
    cell = grid.cell_area
    return TransportReport(
        time=time,
        l1_error=float(np.sum(np.abs(quantum - classical)) * cell),
        quantum_norm=float(np.sum(quantum) * cell),
        classical_norm=float(np.sum(classical) * cell),
    )


# --- Field comparisons ---


def quadratic_limit_discrepancy(first: np.ndarray, second: np.ndarray) -> float:
    """L1 distance after scaling each field to unit L1 norm."""
    a = np.abs(first).sum()
    b = np.abs(second).sum()
    if a == 0 or b == 0:
        raise ValueError("Cannot normalize an identically zero field")
    return float(np.abs(first / a - second / b).sum())


def jaccard_top_decile(first: np.ndarray, second: np.ndarray) -> float:
    """Overlap of the cells in each field's top 10%."""
    top_a = first >= np.quantile(first, 0.9)
    top_b = second >= np.quantile(second, 0.9)
    union = np.logical_or(top_a, top_b).sum()
    return float(np.logical_and(top_a, top_b).sum() / union) if union else 1.0


def peak_contrast(q_axis: np.ndarray, p_axis: np.ndarray, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Field value at the nearest grid node to each point over the median |value|."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    median = float(np.median(np.abs(values)))
    iq = np.abs(q_axis[None, :] - points[:, :1]).argmin(axis=1)
    ip = np.abs(p_axis[None, :] - points[:, 1:]).argmin(axis=1)
    sampled = values[iq, ip]
    return sampled / median if median else np.full(len(points), np.inf)
