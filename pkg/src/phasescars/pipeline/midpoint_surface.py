"""Midpoint-surface pipeline: chord-midpoint mesh of a closed orbit, with its caustic when planar."""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, Any

import numpy as np

from phasescars.models import CurveKind, OrbitKind
from phasescars.services.continuum_classical import (
    default_shell_box,
    find_periodic_points,
    midpoint_multiplicity,
    midpoint_surface,
    orbit_samples,
    seed_guesses,
    wigner_caustic,
)

if TYPE_CHECKING:
    from phasescars.models import RunConfig
    from phasescars.services.export import ArtifactStore

logger = logging.getLogger(__name__)

# Offset of the multiplicity sample point from the centroid, relative to the curve extent.
SAMPLE_OFFSET = 1e-3


def parametric_curve(kind: CurveKind, samples: int) -> np.ndarray:
    """Closed (K + 1, d) polygon of a built-in curve; the last row repeats the first."""
    if samples < 1:
        raise ValueError("Need at least one sample per curve")
    s = 2 * math.pi * np.arange(samples + 1) / samples
    if kind == CurveKind.CIRCLE:
        points = np.column_stack([np.cos(s), np.sin(s)])
    elif kind == CurveKind.ROUNDED_TRIANGLE:
        points = np.column_stack([np.cos(s) + 0.1 * np.cos(2 * s), np.sin(s) - 0.1 * np.sin(2 * s)])
    elif kind == CurveKind.KNOT:
        # Trefoil knot, read as a closed orbit in extended (q, p, t) space
        points = np.column_stack([np.sin(s) + 2 * np.sin(2 * s), np.cos(s) - 2 * np.cos(2 * s), -np.sin(3 * s)])
    else:
        raise ValueError(f"{kind} is not a parametric curve")
    points[-1] = points[0]
    return points


class MidpointSurfacePipeline:
    """Orchestrates one midpoint-surface run.

    Steps:
    1. Sample the closed curve (built-in parametric or a Newton-found periodic orbit)
    2. Triangulate the midpoints of every sample pair
    3. For planar curves, trace the caustic and count chords just off the centroid
    4. Write the mesh, caustic table and sidecar
    """

    def __init__(self, store: ArtifactStore) -> None:
        self.store = store

    def _periodic_orbit(self, config: RunConfig) -> np.ndarray:
        params = config.oscillator_params
        box = default_shell_box(params, config.shell_energy)
        records = find_periodic_points(
            params,
            seed_guesses(box, (config.newton_grid, config.newton_grid)),
            periods=max(config.periods, 1),
            t0=config.t0,
            steps_per_period=config.steps_per_period,
            order=config.integrator_order,
            max_iter=config.newton_max_iter,
        )
        if not records:
            raise ValueError("Newton search found no periodic orbit to sample")
        hyperbolic = [r for r in records if r.kind == OrbitKind.HYPERBOLIC]
        record = (hyperbolic or records)[0]
        logger.info("Sampling %s period-%d orbit through (%.6g, %.6g)", record.kind, record.periods, record.q, record.p)
        return orbit_samples(
            params,
            record,
            samples=config.curve_samples,
            steps_per_period=config.steps_per_period,
            order=config.integrator_order,
        )

    def run(self, config: RunConfig) -> dict:
        # Step 1: curve
        if config.curve == CurveKind.PERIODIC_ORBIT:
            samples = self._periodic_orbit(config)
        else:
            samples = parametric_curve(config.curve, config.curve_samples)

        # Step 2: mesh
        surface = midpoint_surface(samples)
        summary: dict[str, Any] = {
            "curve": config.curve,
            "samples": surface.samples,
            "vertices": surface.samples**2,
            "faces": len(surface.faces),
            "dimension": samples.shape[1],
        }
        self.store.write_mesh("midpoint_surface.obj", surface.vertex_array(), surface.faces)

        # Step 3: caustic and chord count
        if samples.shape[1] == 2 and surface.samples > 2:
            caustic = wigner_caustic(samples)
            closed = samples[:-1]
            extent = float(np.max(np.ptp(closed, axis=0)))
            point = closed.mean(axis=0) + np.array([SAMPLE_OFFSET * extent, 0.0])
            summary["caustic_points"] = len(caustic)
            summary["sample_point"] = point.tolist()
            summary["chord_multiplicity"] = midpoint_multiplicity(samples, point)
            self.store.write_table("caustic.csv", ("q", "p"), caustic.tolist())

        # Step 4: sidecar
        self.store.write_sidecar("midpoint_surface.txt", {**summary, "config": config.model_dump(mode="json")})
        logger.info("Midpoint surface: %d vertices, %d faces", summary["vertices"], summary["faces"])
        return summary
