"""Classical phase portraits: stroboscopic sections and periodic-point tables."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Any

import numpy as np

from phasescars.models import SystemKind, WeightKind
from phasescars.services.analysis import orbit_weight
from phasescars.services.continuum_classical import (
    default_shell_box,
    find_periodic_points,
    section_density_maxima,
    seed_guesses,
    stroboscopic_section,
    uniform_seeds,
)
from phasescars.services.torus_classical import (
    POINT_TABLE_HEADER,
    build_midpoint_catalog,
    enumerate_periodic_points,
    periodic_point_rows,
    stability_record,
)

if TYPE_CHECKING:
    from phasescars.models import DrivenOscillator, PhaseWindow, RunConfig
    from phasescars.services.continuum_classical import SectionCloud
    from phasescars.services.export import ArtifactStore

logger = logging.getLogger(__name__)

SECTION_HEADER = ("seed", "period", "q", "p")
CYCLE_HEADER = ("cycle", "length", "q_num", "p_num", "denom", "weight")
ORBIT_HEADER = (
    "q",
    "p",
    "periods",
    "kind",
    "trace",
    "stability_denominator",
    "residual",
    "map_weight",
    "scar_weight",
    "primitive_period",
)


def shell_section(config: RunConfig, params: DrivenOscillator, box: PhaseWindow) -> SectionCloud:
    """Section cloud of uniform seeds drawn from ``box``."""
    return stroboscopic_section(
        params,
        uniform_seeds(box, config.section_seeds, seed=config.seed),
        config.section_periods,
        t0=config.t0,
        steps_per_period=config.section_steps_per_period,
        order=config.integrator_order,
    )


def section_rows(cloud: SectionCloud) -> list[tuple]:
    return [
        (int(seed), k, cloud.q[row, k], cloud.p[row, k])
        for row, seed in enumerate(cloud.kept)
        for k in range(cloud.q.shape[1])
    ]


class PoincarePipeline:
    """Orchestrates one stroboscopic-section run.

    Steps:
    1. Draw seeds uniformly from the box around the energy shell
    2. Sample every seed once per period, dropping diverging seeds
    3. Locate the densest cells of the cloud
    4. Write the cloud, the density maxima and the sidecar
    """

    def __init__(self, store: ArtifactStore) -> None:
        self.store = store

    def run(self, config: RunConfig) -> dict:
        params = config.oscillator_params
        box = default_shell_box(params, config.shell_energy)
        cloud = shell_section(config, params, box)
        maxima = section_density_maxima(cloud, box)

        self.store.write_table("section.csv", SECTION_HEADER, section_rows(cloud))
        self.store.write_table("section_maxima.csv", ("q", "p"), maxima.tolist())
        summary: dict[str, Any] = {
            "seeds": config.section_seeds,
            "periods": config.section_periods,
            "kept": len(cloud.kept),
            "dropped": cloud.dropped,
            "box": box.model_dump(),
        }
        self.store.write_sidecar("section.txt", {**summary, "config": config.model_dump(mode="json")})
        logger.info("Section: %d seeds kept, %d dropped", summary["kept"], cloud.dropped)
        return summary


class PeriodicPointsPipeline:
    """Orchestrates one periodic-point run.

    Steps:
    1. Cat map: enumerate period-n points exactly and catalogue their midpoints;
       oscillator: Newton search from a grid plus section-density seeds
    2. Attach stability denominators and semiclassical weights
    3. Write the point table and the sidecar
    """

    def __init__(self, store: ArtifactStore) -> None:
        self.store = store

    def _torus(self, config: RunConfig) -> dict[str, Any]:
        torus_map = config.torus_map
        n = max(config.iterations, 1)
        point_set = enumerate_periodic_points(torus_map, n)
        catalog = build_midpoint_catalog(point_set)
        record = stability_record(torus_map, n)
        self.store.write_table("markers.csv", POINT_TABLE_HEADER, periodic_point_rows(point_set, catalog))
        cycle_rows = []
        for index, cycle in enumerate(point_set.cycles):
            start = point_set.points[cycle[0]]
            weight = orbit_weight(stability_denominator=record.weight_denominator, primitive_period=len(cycle))
            cycle_rows.append((index, len(cycle), start.q_num, start.p_num, start.denom, weight))
        self.store.write_table("cycles.csv", CYCLE_HEADER, cycle_rows)
        return {
            "n": n,
            "periodic_points": len(point_set),
            "cycles": len(point_set.cycles),
            "midpoint_entries": len(catalog),
            "unique_midpoints": len(catalog.unique_coordinates()),
            "trace_T_n": record.trace,
            "stability_denominator": record.weight_denominator,
        }

    def _oscillator(self, config: RunConfig) -> dict[str, Any]:
        params = config.oscillator_params
        n = max(config.periods, 1)
        box = default_shell_box(params, config.shell_energy)
        cloud = shell_section(config, params, box)
        guesses = np.vstack(
            [seed_guesses(box, (config.newton_grid, config.newton_grid)), section_density_maxima(cloud, box)]
        )
        records = find_periodic_points(
            params,
            guesses,
            periods=n,
            t0=config.t0,
            steps_per_period=config.steps_per_period,
            order=config.integrator_order,
            max_iter=config.newton_max_iter,
        )
        rows = []
        for r in records:
            try:
                map_weight = orbit_weight(r, WeightKind.MAP)
                scar_weight = orbit_weight(r, WeightKind.SCAR, hbar=config.hbar)
            except ValueError:
                logger.warning("Marginal orbit at (%.6g, %.6g) has no finite weight", r.q, r.p)
                map_weight = scar_weight = None
            rows.append(
                (
                    r.q,
                    r.p,
                    r.periods,
                    r.kind,
                    r.trace,
                    r.stability_denominator,
                    r.residual,
                    map_weight,
                    scar_weight,
                    r.primitive_period,
                )
            )
        self.store.write_table("periodic_points.csv", ORBIT_HEADER, rows)
        return {
            "n": n,
            "periodic_points": len(records),
            "guesses": len(guesses),
            "kinds": {kind: sum(1 for r in records if r.kind == kind) for kind in sorted({r.kind for r in records})},
        }

    def run(self, config: RunConfig) -> dict:
        if config.system == SystemKind.CAT:
            summary = self._torus(config)
        else:
            summary = self._oscillator(config)
        self.store.write_sidecar("periodic_points.txt", {**summary, "config": config.model_dump(mode="json")})
        logger.info("Periodic points: %d at period %d", summary["periodic_points"], summary["n"])
        return summary
