"""Classical dynamics of periodically driven one-dimensional oscillators.

Trajectories are advanced with a symplectic drift-kick-drift splitting in
extended phase space, so the stroboscopic map and its tangent map stay
area-preserving to rounding. All flows accept arrays of initial conditions.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from phasescars.errors import NumericalCheckError
from phasescars.models import (
    DrivenOscillator,
    EnergyWindow,
    MonteCarloEstimate,
    OrbitKind,
    PeriodicPointRecord,
    PhasePoint,
    PhaseWindow,
)

logger = logging.getLogger(__name__)

_CBRT2 = 2.0 ** (1.0 / 3.0)
# Triple-jump weights raising the second-order splitting to fourth order.
YOSHIDA_WEIGHTS = (1 / (2 - _CBRT2), -_CBRT2 / (2 - _CBRT2), 1 / (2 - _CBRT2))

MARGINAL_WIDTH = 1e-6


def composition_weights(order: int) -> tuple[float, ...]:
    if order == 2:
        return (1.0,)
    if order == 4:
        return YOSHIDA_WEIGHTS
    raise ValueError(f"Integrator order must be 2 or 4, got {order}")


def potential_and_force(params: DrivenOscillator, q, t):
    """V(q, t) and -dV/dq, vectorized over q."""
    return params.potential(q, t), params.force(q, t)


# --- Integration ---


def _substeps(t0: float, t1: float, dt: float) -> tuple[int, float]:
    if dt <= 0:
        raise ValueError(f"Time step must be positive, got {dt}")
    span = t1 - t0
    count = math.ceil(abs(span) / dt - 1e-9)
    if count == 0:
        return 0, 0.0
    return count, span / count


def flow(
    params: DrivenOscillator,
    q,
    p,
    t0: float,
    t1: float,
    *,
    dt: float,
    order: int = 4,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance arrays of states from t0 to t1 (either direction)."""
    weights = composition_weights(order)
    q = np.array(q, dtype=float, copy=True)
    p = np.array(p, dtype=float, copy=True)
    count, h = _substeps(t0, t1, dt)
    inverse_mass = 1.0 / params.mass
    t = t0
    for step in range(count):
        t = t0 + step * h
        for w in weights:
            sub = w * h
            q += 0.5 * sub * inverse_mass * p
            p += sub * params.force(q, t + 0.5 * sub)
            q += 0.5 * sub * inverse_mass * p
            t += sub
    return q, p


def tangent_flow(
    params: DrivenOscillator,
    q,
    p,
    t0: float,
    t1: float,
    *,
    dt: float,
    order: int = 4,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flow plus the Jacobian d(q, p)/d(q0, p0), shape (..., 2, 2).

    The tangent map is propagated through the same splitting, so its
    determinant is one to rounding.
    """
    weights = composition_weights(order)
    q = np.array(q, dtype=float, copy=True)
    p = np.array(p, dtype=float, copy=True)
    jacobian = np.zeros((*q.shape, 2, 2))
    jacobian[..., 0, 0] = 1.0
    jacobian[..., 1, 1] = 1.0
    count, h = _substeps(t0, t1, dt)
    inverse_mass = 1.0 / params.mass
    for step in range(count):
        t = t0 + step * h
        for w in weights:
            sub = w * h
            drift = 0.5 * sub * inverse_mass
            q += drift * p
            jacobian[..., 0, :] += drift * jacobian[..., 1, :]
            mid = t + 0.5 * sub
            p += sub * params.force(q, mid)
            jacobian[..., 1, :] += np.asarray(sub * params.force_gradient(q, mid))[..., None] * jacobian[..., 0, :]
            q += drift * p
            jacobian[..., 0, :] += drift * jacobian[..., 1, :]
            t += sub
    return q, p, jacobian


def integrate(params: DrivenOscillator, state: PhasePoint, t_end: float, *, dt: float, order: int = 4) -> PhasePoint:
    """Single trajectory from ``state`` to time ``t_end``."""
    q, p = flow(params, state.q, state.p, state.t, t_end, dt=dt, order=order)
    if not (np.isfinite(q) and np.isfinite(p)):
        raise NumericalCheckError("trajectory finiteness", float("inf"), 0.0)
    return PhasePoint(q=float(q), p=float(p), t=t_end)


def tangent_integrate(
    params: DrivenOscillator, state: PhasePoint, t_end: float, *, dt: float, order: int = 4
) -> tuple[PhasePoint, np.ndarray]:
    q, p, jacobian = tangent_flow(params, state.q, state.p, state.t, t_end, dt=dt, order=order)
    if not (np.isfinite(q) and np.isfinite(p) and np.all(np.isfinite(jacobian))):
        raise NumericalCheckError("trajectory finiteness", float("inf"), 0.0)
    return PhasePoint(q=float(q), p=float(p), t=t_end), jacobian


def energy_drift(params: DrivenOscillator, state: PhasePoint, duration: float, *, dt: float, order: int = 4) -> float:
    """Relative change of energy over ``duration``; only meaningful without drive."""
    final = integrate(params, state, state.t + duration, dt=dt, order=order)
    start = params.energy(state.q, state.p, state.t)
    end = params.energy(final.q, final.p, final.t)
    return abs(end - start) / max(abs(start), 1.0)


# --- Stroboscopic section ---


@dataclass(frozen=True)
class SectionCloud:
    """Stroboscopic samples (seed, period) of the seeds that stayed bounded."""

    q: np.ndarray
    p: np.ndarray
    kept: np.ndarray
    dropped: int

    def points(self) -> np.ndarray:
        return np.column_stack([self.q.ravel(), self.p.ravel()])


def stroboscopic_section(
    params: DrivenOscillator,
    seeds: np.ndarray,
    n_periods: int,
    *,
    t0: float = 0.0,
    steps_per_period: int = 256,
    order: int = 4,
    bound: float = 1e6,
) -> SectionCloud:
    """Sample every seed at t0 + k T for k = 0..n_periods; diverging seeds are dropped."""
    seeds = np.asarray(seeds, dtype=float).reshape(-1, 2)
    period = params.period
    dt = period / steps_per_period
    q_hist = np.empty((len(seeds), n_periods + 1))
    p_hist = np.empty_like(q_hist)
    q, p = seeds[:, 0].copy(), seeds[:, 1].copy()
    q_hist[:, 0], p_hist[:, 0] = q, p
    alive = np.ones(len(seeds), dtype=bool)
    for k in range(n_periods):
        start = t0 + k * period
        with np.errstate(over="ignore", invalid="ignore"):
            q, p = flow(params, q, p, start, start + period, dt=dt, order=order)
        alive &= np.isfinite(q) & np.isfinite(p) & (np.abs(q) < bound) & (np.abs(p) < bound)
        q = np.where(alive, q, 0.0)
        p = np.where(alive, p, 0.0)
        q_hist[:, k + 1], p_hist[:, k + 1] = q, p
    dropped = int((~alive).sum())
    if dropped:
        logger.warning("Dropped %d of %d section seeds that left the bounded region", dropped, len(seeds))
    return SectionCloud(q=q_hist[alive], p=p_hist[alive], kept=np.flatnonzero(alive), dropped=dropped)


def section_density_maxima(cloud: SectionCloud, window: PhaseWindow, *, bins: int = 32, count: int = 10) -> np.ndarray:
    """Centers of the most populated histogram cells of a section cloud."""
    points = cloud.points()
    hist, q_edges, p_edges = np.histogram2d(
        points[:, 0], points[:, 1], bins=bins, range=[[window.q_min, window.q_max], [window.p_min, window.p_max]]
    )
    order = np.argsort(hist.ravel(), kind="stable")[::-1][:count]
    iq, ip = np.unravel_index(order, hist.shape)
    q_centers = 0.5 * (q_edges[:-1] + q_edges[1:])
    p_centers = 0.5 * (p_edges[:-1] + p_edges[1:])
    return np.column_stack([q_centers[iq], p_centers[ip]])


# --- Periodic orbits ---


def seed_guesses(window: PhaseWindow, shape: tuple[int, int]) -> np.ndarray:
    q_axis, p_axis = window.axes(shape)
    qq, pp = np.meshgrid(q_axis, p_axis, indexing="ij")
    return np.column_stack([qq.ravel(), pp.ravel()])


def uniform_seeds(window: PhaseWindow, count: int, *, seed: int = 0) -> np.ndarray:
    """Reproducible uniform draws from a phase window, shape (count, 2)."""
    rng = np.random.default_rng(seed)
    return np.column_stack(
        [rng.uniform(window.q_min, window.q_max, count), rng.uniform(window.p_min, window.p_max, count)]
    )


def classify_orbit(monodromy: np.ndarray, *, width: float = MARGINAL_WIDTH) -> OrbitKind:
    trace = abs(float(np.trace(monodromy)))
    if abs(trace - 2.0) <= width:
        return OrbitKind.MARGINAL
    return OrbitKind.ELLIPTIC if trace < 2.0 else OrbitKind.HYPERBOLIC


def _newton_steps(jacobian: np.ndarray, residual: np.ndarray) -> np.ndarray:
    """Solve (M - I) dx = -F per guess, with a Tikhonov fallback when singular."""
    shifted = jacobian - np.eye(2)
    singular = np.abs(np.linalg.det(shifted)) < 1e-14
    steps = np.zeros_like(residual)
    if np.any(~singular):
        steps[~singular] = np.linalg.solve(shifted[~singular], -residual[~singular][..., None])[..., 0]
    if np.any(singular):
        transposed = np.swapaxes(shifted[singular], -1, -2)
        normal = transposed @ shifted[singular] + 1e-8 * np.eye(2)
        steps[singular] = np.linalg.solve(normal, -(transposed @ residual[singular][..., None]))[..., 0]
    return steps


def _primitive_period(
    params: DrivenOscillator, state: np.ndarray, periods: int, t0: float, dt: float, order: int, tolerance: float
) -> int:
    scale = max(1.0, float(np.hypot(state[0], state[1])))
    for divisor in range(1, periods):
        if periods % divisor:
            continue
        q, p = flow(params, state[0], state[1], t0, t0 + divisor * params.period, dt=dt, order=order)
        if math.hypot(float(q) - state[0], float(p) - state[1]) < tolerance * scale:
            return divisor
    return periods


def find_periodic_points(
    params: DrivenOscillator,
    guesses: np.ndarray,
    *,
    periods: int = 1,
    t0: float = 0.0,
    steps_per_period: int = 2048,
    order: int = 4,
    max_iter: int = 30,
    tolerance: float = 1e-10,
    dedup_radius: float = 1e-6,
    primitive_tolerance: float = 1e-6,
) -> list[PeriodicPointRecord]:
    """Newton search for solutions of Phi_{kT}(x) = x from many guesses at once.

    Each step solves (M - I) dx = -(Phi(x) - x) and backtracks by halving
    until the residual drops below 0.7 of its previous value, taking the
    full step as a last resort. Converged points are deduplicated within
    ``dedup_radius``; guesses that never converge are logged and skipped.
    The primitive period is the smallest divisor d of ``periods`` whose
    d-period map returns the point within ``primitive_tolerance``.
    """
    if periods < 1:
        raise ValueError(f"Period count must be at least 1, got {periods}")
    x = np.asarray(guesses, dtype=float).reshape(-1, 2).copy()
    duration = periods * params.period
    dt = params.period / steps_per_period
    t1 = t0 + duration

    def residual_of(states: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            q, p = flow(params, states[:, 0], states[:, 1], t0, t1, dt=dt, order=order)
        return np.column_stack([q, p]) - states

    converged = np.zeros(len(x), dtype=bool)
    failed = np.zeros(len(x), dtype=bool)
    for _ in range(max_iter):
        active = ~(converged | failed)
        if not active.any():
            break
        with np.errstate(over="ignore", invalid="ignore"):
            q, p, jacobian = tangent_flow(params, x[active, 0], x[active, 1], t0, t1, dt=dt, order=order)
        residual = np.column_stack([q, p]) - x[active]
        norms = np.linalg.norm(residual, axis=1)
        bad = ~np.isfinite(norms) | ~np.all(np.isfinite(jacobian), axis=(1, 2))
        idx = np.flatnonzero(active)
        failed[idx[bad]] = True
        done = ~bad & (norms < tolerance)
        converged[idx[done]] = True
        work = ~bad & ~done
        if not work.any():
            continue
        idx, residual, norms, jacobian = idx[work], residual[work], norms[work], jacobian[work]
        steps = _newton_steps(jacobian, residual)

        accepted = np.zeros(len(idx), dtype=bool)
        scale = 1.0
        for _ in range(8):
            pending = ~accepted
            trial = x[idx[pending]] + scale * steps[pending]
            trial_norms = np.linalg.norm(residual_of(trial), axis=1)
            better = np.isfinite(trial_norms) & (trial_norms < 0.7 * norms[pending])
            rows = np.flatnonzero(pending)[better]
            x[idx[rows]] = trial[better]
            accepted[rows] = True
            if accepted.all():
                break
            scale *= 0.5
        rest = ~accepted
        x[idx[rest]] += steps[rest]

    lost = int((~converged).sum())
    if lost:
        logger.warning("Newton search: %d of %d guesses did not converge", lost, len(x))

    records: list[PeriodicPointRecord] = []
    for state in x[converged][np.lexsort((x[converged][:, 1], x[converged][:, 0]))]:
        if any(math.hypot(state[0] - r.q, state[1] - r.p) < dedup_radius for r in records):
            continue
        final, monodromy = tangent_integrate(params, PhasePoint(q=state[0], p=state[1], t=t0), t1, dt=dt, order=order)
        records.append(
            PeriodicPointRecord(
                q=float(state[0]),
                p=float(state[1]),
                t0=t0,
                periods=periods,
                primitive_period=_primitive_period(params, state, periods, t0, dt, order, primitive_tolerance),
                period_time=duration,
                monodromy=monodromy.tolist(),
                kind=classify_orbit(monodromy),
                residual=math.hypot(final.q - state[0], final.p - state[1]),
            )
        )
    logger.info("Found %d distinct period-%d points from %d guesses", len(records), periods, len(x))
    return records


def orbit_samples(
    params: DrivenOscillator,
    record: PeriodicPointRecord,
    *,
    samples: int = 64,
    steps_per_period: int = 2048,
    order: int = 4,
) -> np.ndarray:
    """Closed polygon (q, p) along a periodic orbit; the last row repeats the first."""
    if samples < 1:
        raise ValueError("Need at least one sample per orbit")
    dt = params.period / steps_per_period
    times = record.t0 + record.period_time * np.arange(samples + 1) / samples
    q, p = record.q, record.p
    rows = [(q, p)]
    for start, end in zip(times[:-1], times[1:], strict=True):
        q, p = flow(params, q, p, float(start), float(end), dt=dt, order=order)
        rows.append((float(q), float(p)))
    polygon = np.array(rows)
    polygon[-1] = polygon[0]
    return polygon


# --- Midpoint geometry ---


@dataclass(frozen=True)
class MidpointSurface:
    """Midpoints (r_i + r_j) / 2 of a closed sampled orbit, triangulated on the torus of (i, j)."""

    vertices: np.ndarray
    faces: np.ndarray

    @property
    def samples(self) -> int:
        return self.vertices.shape[0]

    def vertex_array(self) -> np.ndarray:
        return self.vertices.reshape(-1, self.vertices.shape[-1])


def _open_polygon(samples: np.ndarray, tolerance: float) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or len(samples) < 2:
        raise ValueError("Orbit samples must be a (K + 1, d) array with K >= 1")
    scale = max(float(np.max(np.abs(samples))), 1.0)
    if np.max(np.abs(samples[-1] - samples[0])) > tolerance * scale:
        raise ValueError("Orbit samples are not closed: last sample differs from the first")
    return samples[:-1]


def midpoint_surface(samples: np.ndarray, *, tolerance: float = 1e-6) -> MidpointSurface:
    points = _open_polygon(samples, tolerance)
    k = len(points)
    vertices = 0.5 * (points[:, None, :] + points[None, :, :])
    faces = []
    if k > 1:
        for i in range(k):
            for j in range(k):
                v00 = i * k + j
                v10 = ((i + 1) % k) * k + j
                v11 = ((i + 1) % k) * k + (j + 1) % k
                v01 = i * k + (j + 1) % k
                faces.append((v00, v10, v11))
                faces.append((v00, v11, v01))
    return MidpointSurface(vertices=vertices, faces=np.array(faces, dtype=int).reshape(-1, 3))


def _tangents(points: np.ndarray) -> np.ndarray:
    return 0.5 * (np.roll(points, -1, axis=0) - np.roll(points, 1, axis=0))


def wigner_caustic(samples: np.ndarray, *, tolerance: float = 1e-6) -> np.ndarray:
    """Midpoints of chords whose endpoint tangents are parallel, for a planar curve."""
    points = _open_polygon(samples, tolerance)
    if points.shape[1] != 2:
        raise ValueError("The caustic is defined for planar curves only")
    k = len(points)
    tangents = _tangents(points)
    caustic = []
    for i in range(k):
        cross = tangents[i, 0] * tangents[:, 1] - tangents[i, 1] * tangents[:, 0]
        for j in range(k):
            gap = min((j - i) % k, (i - j) % k)
            if gap <= 1 or min((j + 1 - i) % k, (i - j - 1) % k) <= 1:
                continue
            here, there = cross[j], cross[(j + 1) % k]
            if here == 0.0:
                alpha = 0.0
            elif here * there < 0:
                alpha = here / (here - there)
            else:
                continue
            partner = points[j] + alpha * (points[(j + 1) % k] - points[j])
            caustic.append(0.5 * (points[i] + partner))
    return np.array(caustic, dtype=float).reshape(-1, 2)


def _segments_cross(a0: np.ndarray, a1: np.ndarray, b0: np.ndarray, b1: np.ndarray) -> np.ndarray:
    def orient(o, u, v):
        return (u[..., 0] - o[..., 0]) * (v[..., 1] - o[..., 1]) - (u[..., 1] - o[..., 1]) * (v[..., 0] - o[..., 0])

    a0, a1 = a0[:, None, :], a1[:, None, :]
    b0, b1 = b0[None, :, :], b1[None, :, :]
    d1 = orient(b0, b1, a0)
    d2 = orient(b0, b1, a1)
    d3 = orient(a0, a1, b0)
    d4 = orient(a0, a1, b1)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def midpoint_multiplicity(samples: np.ndarray, point: Sequence[float], *, tolerance: float = 1e-6) -> int:
    """Number of chords of a planar closed curve centered on ``point``.

    Chords centered at z pair up the intersections of the curve with its
    reflection 2z - C, so the count is half the number of crossings.
    """
    points = _open_polygon(samples, tolerance)
    if points.shape[1] != 2:
        raise ValueError("Chord counting is defined for planar curves only")
    center = np.asarray(point, dtype=float)
    reflected = 2 * center - points
    crossings = _segments_cross(points, np.roll(points, -1, axis=0), reflected, np.roll(reflected, -1, axis=0))
    return int(crossings.sum()) // 2


# --- Liouville propagator ---


@dataclass(frozen=True)
class LiouvilleDiagonalField:
    """Smoothed diagonal of the classical propagator on a window grid, axes (q, p)."""

    q_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray
    time: float
    epsilon: float
    momentum_width: float

    @property
    def cell_area(self) -> float:
        return float((self.q_axis[1] - self.q_axis[0]) * (self.p_axis[1] - self.p_axis[0]))


def gaussian_kernel(distance_sq, epsilon: float):
    return np.exp(-distance_sq / (2 * epsilon**2)) / (2 * math.pi * epsilon**2)


def default_smoothing(window: PhaseWindow, shape: tuple[int, int]) -> float:
    return 2 * max(window.cell_size(shape))


def liouville_diagonal(
    params: DrivenOscillator,
    window: PhaseWindow,
    shape: tuple[int, int],
    time: float,
    *,
    epsilon: float | None = None,
    momentum_width: float | None = None,
    t0: float = 0.0,
    steps_per_period: int = 2048,
    order: int = 4,
) -> LiouvilleDiagonalField:
    """k_eps(|Phi_t(r) - r|) at every node of the window grid.

    With ``momentum_width`` the kernel is the anisotropic Gaussian of
    widths eps in q and ``momentum_width`` in p, normalized to unit
    integral; a coherent state of position width sigma matches
    eps = sigma and momentum_width = hbar / sigma.
    """
    if time < 0:
        raise ValueError("Propagation time must be non-negative")
    epsilon = epsilon if epsilon is not None else default_smoothing(window, shape)
    if epsilon <= 0:
        raise ValueError("Smoothing width must be positive")
    momentum_width = momentum_width if momentum_width is not None else epsilon
    if momentum_width <= 0:
        raise ValueError("Momentum smoothing width must be positive")
    q_axis, p_axis = window.axes(shape)
    qq, pp = np.meshgrid(q_axis, p_axis, indexing="ij")
    q, p = flow(params, qq, pp, t0, t0 + time, dt=params.period / steps_per_period, order=order)
    values = np.exp(-0.5 * ((q - qq) ** 2 / epsilon**2 + (p - pp) ** 2 / momentum_width**2)) / (
        2 * math.pi * epsilon * momentum_width
    )
    logger.info(
        "Liouville diagonal on %dx%d grid at t=%.4g, widths %.3g x %.3g",
        shape[0],
        shape[1],
        time,
        epsilon,
        momentum_width,
    )
    return LiouvilleDiagonalField(
        q_axis=q_axis, p_axis=p_axis, values=values, time=time, epsilon=epsilon, momentum_width=momentum_width
    )


def default_shell_box(params: DrivenOscillator, energy: float, margin: float = 1.25) -> PhaseWindow:
    q_turn = margin * params.turning_point(energy + abs(params.drive) * params.turning_point(energy))
    p_turn = margin * params.max_momentum(energy + abs(params.drive) * q_turn)
    return PhaseWindow(q_min=-q_turn, q_max=q_turn, p_min=-p_turn, p_max=p_turn)


def classical_return_probability(
    params: DrivenOscillator,
    energy_window: EnergyWindow,
    time: float,
    *,
    epsilon: float,
    samples: int = 20_000,
    seed: int = 0,
    box: PhaseWindow | None = None,
    t0: float = 0.0,
    steps_per_period: int = 2048,
    order: int = 4,
    chunk_size: int = 4096,
) -> MonteCarloEstimate:
    """Energy-averaged smoothed return probability by Monte Carlo.

    Uniform samples in ``box`` are weighted by the energy density and
    each chunk draws from its own spawned seed, so results do not depend
    on how chunks are scheduled.
    """
    if samples < 1:
        raise ValueError("Need at least one Monte Carlo sample")
    box = box or default_shell_box(params, energy_window.e_max)
    dt = params.period / steps_per_period
    n_chunks = math.ceil(samples / chunk_size)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    weight_sum = 0.0
    weighted = []
    for index, child in enumerate(children):
        size = min(chunk_size, samples - index * chunk_size)
        rng = np.random.default_rng(child)
        q = rng.uniform(box.q_min, box.q_max, size)
        p = rng.uniform(box.p_min, box.p_max, size)
        weights = energy_window.density(params.energy(q, p, t0))
        inside = weights > 0
        if not inside.any():
            continue
        q, p, weights = q[inside], p[inside], weights[inside]
        qt, pt = flow(params, q, p, t0, t0 + time, dt=dt, order=order)
        kernel = gaussian_kernel((qt - q) ** 2 + (pt - p) ** 2, epsilon)
        weight_sum += float(weights.sum())
        weighted.append((weights, kernel))
    if weight_sum == 0.0:
        raise ValueError("No Monte Carlo sample fell inside the energy window; widen the window or the box")
    all_weights = np.concatenate([w for w, _ in weighted])
    all_kernel = np.concatenate([k for _, k in weighted])
    value = math.fsum(all_weights * all_kernel) / weight_sum
    stderr = math.sqrt(math.fsum(all_weights**2 * (all_kernel - value) ** 2)) / weight_sum
    return MonteCarloEstimate(value=value, stderr=stderr, samples=int(all_weights.size))
