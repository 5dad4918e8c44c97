"""Exact classical dynamics of linear automorphisms of the unit torus.

Periodic points of a hyperbolic map T are the rational solutions of
(T^n - I) r = k for integer k; they are enumerated exactly from a Hermite
normal form of T^n - I, so no floating-point search is involved.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from phasescars.errors import NumericalCheckError
from phasescars.models import MonteCarloEstimate, PointKind, TorusMap

logger = logging.getLogger(__name__)

INTEGER_LIMIT = 2**62

IntMatrix = tuple[tuple[int, int], tuple[int, int]]

HALF_SHIFTS: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True, order=True)
class TorusPoint:
    """Rational point (q_num / denom, p_num / denom) of the unit torus."""

    q_num: int
    p_num: int
    denom: int

    def __post_init__(self) -> None:
        if self.denom <= 0:
            raise ValueError(f"Denominator must be positive, got {self.denom}")
        if not (0 <= self.q_num < self.denom and 0 <= self.p_num < self.denom):
            raise ValueError("Torus point numerators must lie in [0, denom)")

    @classmethod
    def wrap(cls, q_num: int, p_num: int, denom: int) -> TorusPoint:
        return cls(q_num % denom, p_num % denom, denom)

    @property
    def q(self) -> Fraction:
        return Fraction(self.q_num, self.denom)

    @property
    def p(self) -> Fraction:
        return Fraction(self.p_num, self.denom)

    @property
    def key(self) -> tuple[Fraction, Fraction]:
        """Denominator-independent identity of the point."""
        return self.q, self.p

    def as_floats(self) -> tuple[float, float]:
        return self.q_num / self.denom, self.p_num / self.denom


@dataclass(frozen=True)
class PeriodicPointSet:
    """All points with T^n r = r, grouped into primitive cycles."""

    period: int
    points: tuple[TorusPoint, ...]
    cycles: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.points)

    def primitive_periods(self) -> list[int]:
        periods = [0] * len(self.points)
        for cycle in self.cycles:
            for index in cycle:
                periods[index] = len(cycle)
        return periods


@dataclass(frozen=True)
class StabilityRecord:
    """Shared stability data of every period-n point of a linear map."""

    period: int
    matrix_power: IntMatrix
    weight_denominator: int

    @property
    def trace(self) -> int:
        return self.matrix_power[0][0] + self.matrix_power[1][1]


@dataclass(frozen=True)
class MidpointEntry:
    first: int
    second: int
    midpoint: TorusPoint
    shift: tuple[int, int]


@dataclass(frozen=True)
class MidpointCatalog:
    """Midpoints of ordered pairs of distinct periodic points, all four images."""

    period: int
    entries: tuple[MidpointEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def unique_coordinates(self) -> Counter[tuple[Fraction, Fraction]]:
        return Counter(entry.midpoint.key for entry in self.entries)

    def coordinates(self) -> np.ndarray:
        return np.array([entry.midpoint.as_floats() for entry in self.entries], dtype=float).reshape(-1, 2)

    def shifts(self) -> np.ndarray:
        return np.array([entry.shift for entry in self.entries], dtype=int).reshape(-1, 2)


# --- Integer linear algebra ---


def _check_magnitude(matrix: IntMatrix) -> IntMatrix:
    if any(abs(v) >= INTEGER_LIMIT for row in matrix for v in row):
        raise OverflowError("Matrix power entries exceed the 64-bit range; lower the iteration count")
    return matrix


def _multiply(left: IntMatrix, right: IntMatrix) -> IntMatrix:
    (a, b), (c, d) = left
    (e, f), (g, h) = right
    return _check_magnitude(((a * e + b * g, a * f + b * h), (c * e + d * g, c * f + d * h)))


def matrix_power(torus_map: TorusMap, n: int) -> IntMatrix:
    """Exact integer T^n for n >= 0; negative n uses the inverse map."""
    base = torus_map.matrix
    if n < 0:
        (a, b), (c, d) = base
        base = ((d, -b), (-c, a))
        n = -n
    result: IntMatrix = ((1, 0), (0, 1))
    while n:
        if n & 1:
            result = _multiply(result, base)
        n >>= 1
        if n:
            base = _multiply(base, base)
    return result


def _determinant(matrix: IntMatrix) -> int:
    return matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0]


def _shifted(matrix: IntMatrix) -> IntMatrix:
    return ((matrix[0][0] - 1, matrix[0][1]), (matrix[1][0], matrix[1][1] - 1))


def extended_gcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, x, y) with a*x + b*y = g = gcd(a, b) >= 0."""
    old_r, r = a, b
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r:
        quotient = old_r // r
        old_r, r = r, old_r - quotient * r
        old_x, x = x, old_x - quotient * x
        old_y, y = y, old_y - quotient * y
    if old_r < 0:
        return -old_r, -old_x, -old_y
    return old_r, old_x, old_y


def hermite_coset_representatives(matrix: IntMatrix) -> list[tuple[int, int]]:
    """One integer vector from each coset of Z^2 / M Z^2 for nonsingular M.

    Column operations bring M to lower-triangular form [[g, 0], [h, det/g]]
    with g the gcd of the first row; the box [0, g) x [0, |det/g|) then
    contains exactly one representative per coset.
    """
    (m11, m12), _ = matrix
    det = _determinant(matrix)
    if det == 0:
        raise ValueError("Matrix is singular")
    g, _, _ = extended_gcd(m11, m12)
    lower = abs(det) // g
    return [(k1, k2) for k1 in range(g) for k2 in range(lower)]


# --- Periodic points ---


def _require_hyperbolic(torus_map: TorusMap) -> None:
    if not torus_map.is_hyperbolic:
        raise ValueError(f"Torus map with trace {torus_map.trace} is not hyperbolic (need |a + d| > 2)")


def _require_positive(n: int) -> None:
    if n < 1:
        raise ValueError(f"Period must be at least 1, got {n}")


def iterate(torus_map: TorusMap, point: TorusPoint, n: int) -> TorusPoint:
    """Exact T^n applied to a rational torus point."""
    (a, b), (c, d) = matrix_power(torus_map, n)
    return TorusPoint.wrap(a * point.q_num + b * point.p_num, c * point.q_num + d * point.p_num, point.denom)


def fixed_point_count(torus_map: TorusMap, n: int) -> int:
    """Number of period-n points, |det(T^n - I)|."""
    _require_positive(n)
    _require_hyperbolic(torus_map)
    return abs(_determinant(_shifted(matrix_power(torus_map, n))))


def stability_record(torus_map: TorusMap, n: int) -> StabilityRecord:
    return StabilityRecord(
        period=n, matrix_power=matrix_power(torus_map, n), weight_denominator=fixed_point_count(torus_map, n)
    )


def enumerate_periodic_points(torus_map: TorusMap, n: int) -> PeriodicPointSet:
    """Every solution of T^n r = r mod 1, with its primitive-cycle grouping."""
    count = fixed_point_count(torus_map, n)
    shifted = _shifted(matrix_power(torus_map, n))
    det = _determinant(shifted)
    sign = 1 if det > 0 else -1
    (m11, m12), (m21, m22) = shifted
    adjugate = ((m22, -m12), (-m21, m11))

    points: set[TorusPoint] = set()
    for k1, k2 in hermite_coset_representatives(shifted):
        q_num = sign * (adjugate[0][0] * k1 + adjugate[0][1] * k2)
        p_num = sign * (adjugate[1][0] * k1 + adjugate[1][1] * k2)
        points.add(TorusPoint.wrap(q_num, p_num, count))

    if len(points) != count:
        raise NumericalCheckError("periodic point count", float(abs(len(points) - count)), 0.0)
    for point in points:
        if (m11 * point.q_num + m12 * point.p_num) % count or (m21 * point.q_num + m22 * point.p_num) % count:
            raise NumericalCheckError("periodic point equation", 1.0, 0.0)

    ordered = tuple(sorted(points))
    cycles = _group_cycles(torus_map, ordered, n)
    logger.info("Found %d period-%d points in %d cycles", count, n, len(cycles))
    return PeriodicPointSet(period=n, points=ordered, cycles=cycles)


def _group_cycles(torus_map: TorusMap, points: tuple[TorusPoint, ...], n: int) -> tuple[tuple[int, ...], ...]:
    index = {point: i for i, point in enumerate(points)}
    visited = [False] * len(points)
    cycles = []
    for start in range(len(points)):
        if visited[start]:
            continue
        cycle = [start]
        visited[start] = True
        current = iterate(torus_map, points[start], 1)
        while current != points[start]:
            j = index[current]
            visited[j] = True
            cycle.append(j)
            current = iterate(torus_map, current, 1)
        if n % len(cycle):
            raise NumericalCheckError("primitive period", float(len(cycle)), 0.0)
        cycles.append(tuple(cycle))
    return tuple(cycles)


def brute_force_periodic_points(torus_map: TorusMap, n: int) -> list[TorusPoint]:
    """Scan every point of the 1/|det| lattice; only for small counts."""
    count = fixed_point_count(torus_map, n)
    (a, b), (c, d) = matrix_power(torus_map, n)
    found = []
    for q_num, p_num in itertools.product(range(count), repeat=2):
        if (a * q_num + b * p_num - q_num) % count == 0 and (c * q_num + d * p_num - p_num) % count == 0:
            found.append(TorusPoint(q_num, p_num, count))
    return found


# --- Midpoints ---


def build_midpoint_catalog(point_set: PeriodicPointSet) -> MidpointCatalog:
    """Midpoints of all ordered pairs i != j, each in its four half-shifted images."""
    points = point_set.points
    entries = []
    if points:
        denom = points[0].denom
        doubled = 2 * denom
        for (i, first), (j, second) in itertools.permutations(enumerate(points), 2):
            for shift in HALF_SHIFTS:
                midpoint = TorusPoint.wrap(
                    first.q_num + second.q_num + shift[0] * denom,
                    first.p_num + second.p_num + shift[1] * denom,
                    doubled,
                )
                entries.append(MidpointEntry(first=i, second=j, midpoint=midpoint, shift=shift))
    logger.info("Built %d midpoint entries for period %d", len(entries), point_set.period)
    return MidpointCatalog(period=point_set.period, entries=tuple(entries))


def orbit_midpoint(torus_map: TorusMap, point_set: PeriodicPointSet, cycle: int, m: int, n: int) -> TorusPoint:
    """Midpoint of the m-th and n-th iterates of a cycle's first point."""
    start = point_set.points[point_set.cycles[cycle][0]]
    first = iterate(torus_map, start, m)
    second = iterate(torus_map, start, n)
    return TorusPoint.wrap(first.q_num + second.q_num, first.p_num + second.p_num, 2 * start.denom)


# --- Classical sums ---


def pair_contribution_total(torus_map: TorusMap, n: int) -> float:
    """Sum over ordered pairs of period-n points of 1 / |det(T^n - I)|."""
    count = fixed_point_count(torus_map, n)
    return float(Fraction(count * count, count))


def classical_return_probability_map(torus_map: TorusMap, n: int) -> float:
    """Sum of 1 / |det(T^n - I)| over the period-n points; exactly 1."""
    record = stability_record(torus_map, n)
    point_count = fixed_point_count(torus_map, n)
    return float(point_count * Fraction(1, record.weight_denominator))


def monte_carlo_return_probability(
    torus_map: TorusMap,
    n: int,
    *,
    epsilon: float = 1e-3,
    samples: int = 200_000,
    seed: int = 0,
) -> MonteCarloEstimate:
    """Fraction of uniform points returning within an epsilon box, over epsilon^2."""
    _require_positive(n)
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    points = rng.random((samples, 2))
    matrix = np.array(matrix_power(torus_map, n), dtype=float)
    images = (points @ matrix.T) % 1.0
    displacement = (images - points + 0.5) % 1.0 - 0.5
    returned = np.max(np.abs(displacement), axis=1) < epsilon / 2
    fraction = float(np.mean(returned))
    area = epsilon**2
    stderr = math.sqrt(fraction * (1 - fraction) / samples) / area
    return MonteCarloEstimate(value=fraction / area, stderr=stderr, samples=samples)


# --- Export rows ---

POINT_TABLE_HEADER = ("period", "kind", "p_num", "q_num", "denom", "shift_p", "shift_q", "primitive_period")


def periodic_point_rows(point_set: PeriodicPointSet, catalog: MidpointCatalog | None = None) -> list[tuple]:
    """Exact table rows: periodic points first, then catalogued midpoints.

    A midpoint row carries the longer primitive period of its two endpoints.
    """
    periods = point_set.primitive_periods()
    rows: list[tuple] = [
        (point_set.period, PointKind.FIXED.value, point.p_num, point.q_num, point.denom, 0, 0, period)
        for point, period in zip(point_set.points, periods, strict=True)
    ]
    if catalog is not None:
        for entry in catalog.entries:
            midpoint = entry.midpoint
            rows.append(
                (
                    catalog.period,
                    PointKind.MIDPOINT.value,
                    midpoint.p_num,
                    midpoint.q_num,
                    midpoint.denom,
                    entry.shift[1],
                    entry.shift[0],
                    max(periods[entry.first], periods[entry.second]),
                )
            )
    return rows
