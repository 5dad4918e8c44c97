"""Quantized cat maps and the doubled-grid Weyl calculus on the torus.

Operators on the D-dimensional torus Hilbert space are represented on the
2D x 2D grid of phase-point operators R(x, y) centered at (x, y) / 2D.
The same machinery serves any D x D matrix, including the sampled
propagators of the continuum systems.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from phasescars.errors import NumericalCheckError
from phasescars.models import MidpointImageWeight, PeakMatchEntry, PeakMatchReport, TorusMap
from phasescars.services.torus_classical import HALF_SHIFTS, MidpointCatalog, PeriodicPointSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuantizedMap:
    """Unitary propagator of a linear torus map at dimension D."""

    torus_map: TorusMap
    dimension: int
    unitary: np.ndarray

    @property
    def effective_hbar(self) -> float:
        return 1.0 / (2 * math.pi * self.dimension)

    def power(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError(f"Power must be non-negative, got {n}")
        return np.linalg.matrix_power(self.unitary, n)

    def trace_power(self, n: int) -> complex:
        return complex(np.trace(self.power(n)))


@dataclass(frozen=True)
class DiscreteWeylSymbol:
    """Values of tr(A R(x, y)) / 2 on the 2D x 2D doubled grid, axes (x, y)."""

    dimension: int
    step: int
    values: np.ndarray
    operator_trace: complex
    frobenius_norm_sq: float


@dataclass(frozen=True)
class DiagonalWignerField:
    """Real field G(x, y) = N tr(A R A^dagger R) on the doubled grid."""

    dimension: int
    step: int
    values: np.ndarray
    expected_trace: float
    imaginary_residual: float

    @property
    def cell_weight(self) -> float:
        return 1.0 / (2 * self.dimension) ** 2

    @property
    def size(self) -> int:
        return 2 * self.dimension

    def trace(self) -> float:
        return math.fsum(self.values.ravel()) * self.cell_weight


# --- Quantization ---


def quantize_cat(torus_map: TorusMap, dimension: int, *, tolerance: float = 1e-10) -> QuantizedMap:
    """Position-basis kernel U[k, j] = (iD)^(-1/2) exp(i pi (a j^2 - 2 j k + d k^2) / (b D)).

    The kernel maps (q, p) to (a q + b p, c q + d p). Raises ValueError when
    ab or cd is odd, when D is not positive or when gcd(b, D) != 1, and
    NumericalCheckError when the kernel is not unitary within ``tolerance``.
    """
    if dimension <= 0:
        raise ValueError(f"Dimension must be positive, got {dimension}")
    if not torus_map.is_quantizable:
        raise ValueError("Torus map needs ab and cd even to be quantized")
    a, b, d = torus_map.a, torus_map.b, torus_map.d
    if b == 0 or math.gcd(b, dimension) != 1:
        raise ValueError(f"Upper-right entry b={b} must be coprime to the dimension {dimension}")

    k, j = np.meshgrid(np.arange(dimension), np.arange(dimension), indexing="ij")
    # Integer phase numerators, reduced mod 2|b|D before scaling.
    modulus = 2 * abs(b) * dimension
    numerators = (a * j * j - 2 * j * k + d * k * k) % modulus
    unitary = np.exp(1j * math.pi * numerators / (b * dimension)) / np.sqrt(1j * dimension)

    residual = float(np.max(np.abs(unitary.conj().T @ unitary - np.eye(dimension))))
    if residual > tolerance:
        raise NumericalCheckError("cat map unitarity", residual, tolerance)
    logger.info(
        "Quantized map (%d,%d;%d,%d) at D=%d, unitarity residual %.2e", a, b, torus_map.c, d, dimension, residual
    )
    return QuantizedMap(torus_map=torus_map, dimension=dimension, unitary=unitary)


# --- Phase-point operators ---


def phase_point_operator(dimension: int, x: int, y: int) -> np.ndarray:
    """Reflection operator R(x, y) centered at (x, y) / 2D; Hermitian with R^2 = I."""
    k = np.arange(dimension)
    rows = (x - k) % dimension
    numerators = (x * y - 2 * y * k) % (2 * dimension)
    operator = np.zeros((dimension, dimension), dtype=complex)
    operator[rows, k] = np.exp(1j * math.pi * numerators / dimension)
    return operator


def doubled_grid_symbol(matrix: np.ndarray) -> np.ndarray:
    """Half-traces tr(A R(x, y)) / 2 for every point of the doubled grid.

    Only entries A[(x + s) / 2, (x - s) / 2] with s of the parity of x
    contribute; an FFT over s evaluates all momenta y at once.
    """
    matrix = np.asarray(matrix)
    n = matrix.shape[0]
    if matrix.shape != (n, n) or n % 2:
        raise ValueError(f"Expected an even-dimensional square matrix, got shape {matrix.shape}")
    size = 2 * n
    x = np.arange(size)[:, None]
    s = np.arange(size)[None, :]
    chords = np.where((x + s) % 2 == 0, matrix[((x + s) // 2) % n, ((x - s) // 2) % n], 0)
    return 0.5 * scipy.fft.fft(chords, axis=1)


def doubled_grid_autocorrelation(symbol: np.ndarray) -> np.ndarray:
    """Sum over s of conj(S(r - s)) S(r + s) at every doubled-grid point r."""
    size = symbol.shape[0]
    convolution = scipy.fft.ifft2(scipy.fft.fft2(symbol.conj()) * scipy.fft.fft2(symbol))
    doubled = (2 * np.arange(size)) % size
    return convolution[np.ix_(doubled, doubled)]


def diagonal_wigner_field_direct(symbol: np.ndarray) -> np.ndarray:
    """Same sum as the autocorrelation, evaluated point by point."""
    size = symbol.shape[0]
    offsets = np.arange(size)
    field = np.empty((size, size), dtype=complex)
    for x0 in range(size):
        for y0 in range(size):
            behind = symbol[np.ix_((x0 - offsets) % size, (y0 - offsets) % size)]
            ahead = symbol[np.ix_((x0 + offsets) % size, (y0 + offsets) % size)]
            field[x0, y0] = np.sum(behind.conj() * ahead)
    return field


# --- Symbols and fields ---


def discrete_weyl_symbol(qmap: QuantizedMap, n: int) -> DiscreteWeylSymbol:
    """Weyl symbol of U^n on the doubled grid."""
    if n < 0:
        raise ValueError(f"Step must be non-negative, got {n}")
    return symbol_of_matrix(qmap.power(n), step=n)


def symbol_of_matrix(matrix: np.ndarray, *, step: int = 1) -> DiscreteWeylSymbol:
    values = doubled_grid_symbol(matrix)
    return DiscreteWeylSymbol(
        dimension=matrix.shape[0],
        step=step,
        values=values,
        operator_trace=complex(np.trace(matrix)),
        frobenius_norm_sq=float(np.sum(np.abs(matrix) ** 2)),
    )


def checked_autocorrelation(values: np.ndarray, tolerance: float) -> tuple[np.ndarray, float]:
    """Real part of the autocorrelation; fails if the imaginary part is not negligible."""
    raw = doubled_grid_autocorrelation(values)
    scale = max(float(np.max(np.abs(raw))), 1.0)
    imaginary_residual = float(np.max(np.abs(raw.imag))) / scale
    if imaginary_residual > tolerance:
        raise NumericalCheckError("diagonal field reality", imaginary_residual, tolerance)
    return raw.real, imaginary_residual


def diagonal_wigner_field(symbol: DiscreteWeylSymbol, *, tolerance: float = 1e-8) -> DiagonalWignerField:
    """Diagonal of the Weyl superoperator of U^n, checked against |tr U^n|^2."""
    values, imaginary_residual = checked_autocorrelation(symbol.values, tolerance)
    expected = abs(symbol.operator_trace) ** 2
    field = DiagonalWignerField(
        dimension=symbol.dimension,
        step=symbol.step,
        values=values,
        expected_trace=expected,
        imaginary_residual=imaginary_residual,
    )
    residual = abs(field.trace() - expected) / max(expected, 1.0)
    if residual > tolerance:
        raise NumericalCheckError("diagonal field trace", residual, tolerance)
    logger.info(
        "Diagonal field n=%d: trace %.6g (|tr U^n|^2 = %.6g), range [%.4g, %.4g]",
        symbol.step,
        field.trace(),
        expected,
        float(values.min()),
        float(values.max()),
    )
    return field


def trace_field(field: DiagonalWignerField) -> float:
    return field.trace()


# --- Peak matching ---


def local_extrema(values: np.ndarray, *, relative_floor: float = 0.1) -> np.ndarray:
    """Periodic local maxima of |values| above ``relative_floor`` times the peak."""
    magnitude = np.abs(values)
    peak = float(magnitude.max()) if magnitude.size else 0.0
    if peak == 0.0:
        return np.empty((0, 2), dtype=int)
    neighbours = np.max(
        [np.roll(magnitude, (dx, dy), axis=(0, 1)) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if dx or dy],
        axis=0,
    )
    mask = (magnitude >= neighbours) & (magnitude >= relative_floor * peak)
    return np.argwhere(mask)


def _periodic_distances(grid_points: np.ndarray, extrema: np.ndarray, size: int) -> np.ndarray:
    if len(extrema) == 0:
        return np.full(len(grid_points), np.inf)
    delta = np.abs(grid_points[:, None, :] - extrema[None, :, :]) % size
    delta = np.minimum(delta, size - delta)
    return np.sqrt(np.sum(delta**2, axis=2)).min(axis=1)


def midpoint_image_weights(
    field: DiagonalWignerField, catalog: MidpointCatalog, *, relative_floor: float = 0.1
) -> list[MidpointImageWeight]:
    """Field value at each catalogued midpoint, aggregated per half-shift image."""
    if len(catalog) == 0:
        return []
    size = field.size
    cells = np.rint(catalog.coordinates() * size).astype(int) % size
    sampled = field.values[cells[:, 0], cells[:, 1]]
    floor = relative_floor * float(np.max(np.abs(field.values)))
    shifts = catalog.shifts()
    weights = []
    for shift in HALF_SHIFTS:
        selected = np.all(shifts == shift, axis=1)
        values = sampled[selected]
        weights.append(
            MidpointImageWeight(
                shift_q=shift[0],
                shift_p=shift[1],
                count=int(selected.sum()),
                mean_value=float(values.mean()) if values.size else 0.0,
                hits=int(np.sum(np.abs(values) >= floor)),
            )
        )
    return weights


def peak_match(
    field: DiagonalWignerField,
    point_set: PeriodicPointSet,
    catalog: MidpointCatalog | None = None,
    *,
    tolerance: float = 1.0,
    relative_floor: float = 0.1,
) -> PeakMatchReport:
    """Nearest field extremum to each periodic point, in doubled-grid pixels."""
    size = field.size
    extrema = local_extrema(field.values, relative_floor=relative_floor)
    coordinates = np.array([point.as_floats() for point in point_set.points], dtype=float).reshape(-1, 2)
    distances = _periodic_distances(coordinates * size, extrema, size)
    entries = [
        PeakMatchEntry(label="fixed", q=float(q), p=float(p), distance=float(dist), hit=bool(dist <= tolerance))
        for (q, p), dist in zip(coordinates, distances, strict=True)
    ]
    hits = sum(entry.hit for entry in entries)
    image_weights = midpoint_image_weights(field, catalog, relative_floor=relative_floor) if catalog else []
    hit_rate = hits / len(entries) if entries else 0.0
    logger.info("Peak match: %d of %d periodic points within %.1f pixels", hits, len(entries), tolerance)
    return PeakMatchReport(entries=entries, image_weights=image_weights, tolerance=tolerance, hit_rate=hit_rate)
