"""Driven-oscillator pipeline: quantum and classical diagonal propagators on one window."""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import TYPE_CHECKING, Any

from phasescars.errors import NumericalCheckError
from phasescars.models import PhaseWindow, SystemKind
from phasescars.pipeline.phase_portrait import SECTION_HEADER, section_rows, shell_section
from phasescars.services.analysis import identity_check
from phasescars.services.continuum_classical import (
    default_shell_box,
    find_periodic_points,
    liouville_diagonal,
    seed_guesses,
)
from phasescars.services.continuum_quantum import (
    central_axes,
    coherent_return_field,
    coherent_state_transport_check,
    continuum_diagonal_field,
    converged_floquet,
    jaccard_top_decile,
    peak_contrast,
    quadratic_limit_discrepancy,
    quasienergy_spectrum,
    weyl_propagator,
)

if TYPE_CHECKING:
    from phasescars.models import DrivenOscillator, PeriodicPointRecord, PositionGrid, RunConfig
    from phasescars.services.continuum_classical import SectionCloud
    from phasescars.services.export import ArtifactStore

logger = logging.getLogger(__name__)

PERIODIC_POINT_HEADER = (
    "q",
    "p",
    "periods",
    "primitive_period",
    "kind",
    "trace",
    "stability_denominator",
    "residual",
    "contrast",
    "raw_contrast",
)
MIDPOINT_HEADER = ("q", "p", "first", "second", "contrast")


def pair_midpoints(records: list[PeriodicPointRecord]) -> list[tuple[float, float, int, int]]:
    """Midpoints of every unordered pair of distinct periodic points."""
    return [
        ((a.q + b.q) / 2, (a.p + b.p) / 2, i, j)
        for (i, a), (j, b) in itertools.combinations(enumerate(records), 2)
    ]


class OscillatorScarsPipeline:
    """Orchestrates one driven-oscillator run.

    Steps:
    1. Build the dt-converged Floquet operator, the diagonal field of its
       Weyl propagator and the coherent-state return field at t = nT
    2. Build the Liouville diagonal with the coherent-state widths on the same window
    3. Find period-n points by Newton search and form their pair midpoints
    4. Sample the stroboscopic section from seeds in the energy shell
    5. Compare the coherent and Liouville fields, check the harmonic limit,
       write images, markers and sidecars

    Steps 1 to 4 are independent and run in a thread pool when
    ``threads`` > 1; every file is written afterwards on the calling thread.
    """

    def __init__(self, store: ArtifactStore, threads: int = 1) -> None:
        self.store = store
        self.threads = threads

    def _run_tasks(self, tasks: dict[str, Callable[[], Any]]) -> dict[str, Any]:
        if self.threads <= 1:
            return {name: task() for name, task in tasks.items()}
        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            futures = {name: executor.submit(task) for name, task in tasks.items()}
            return {name: future.result() for name, future in futures.items()}

    def _quantum_fields(self, config: RunConfig, params: DrivenOscillator, grid: PositionGrid, sigma: float):
        operator = converged_floquet(
            params,
            grid,
            steps=config.floquet_steps,
            max_steps=config.floquet_max_steps,
            tolerance=config.floquet_convergence_tolerance,
            t0=config.t0,
            unitarity_tolerance=config.floquet_unitarity_tolerance,
            order=config.integrator_order,
            workers=config.threads,
        )
        field = continuum_diagonal_field(weyl_propagator(operator, config.periods), tolerance=config.identity_tolerance)
        series = quasienergy_spectrum(operator, beta=config.beta)
        residual = identity_check(field.trace(), series, config.periods)
        if residual > config.identity_tolerance:
            raise NumericalCheckError("trace identity", residual, config.identity_tolerance)
        coherent = coherent_return_field(operator, config.periods, sigma=sigma)
        return operator, field, coherent, series, residual

    def _periodic_points(
        self, config: RunConfig, params: DrivenOscillator, window: PhaseWindow
    ) -> list[PeriodicPointRecord]:
        if config.periods == 0:
            logger.info("No periodic-point markers at t = 0")
            return []
        guesses = seed_guesses(window, (config.newton_grid, config.newton_grid))
        records = find_periodic_points(
            params,
            guesses,
            periods=config.periods,
            t0=config.t0,
            steps_per_period=config.steps_per_period,
            order=config.integrator_order,
            max_iter=config.newton_max_iter,
        )
        return [r for r in records if window.q_min <= r.q <= window.q_max and window.p_min <= r.p <= window.p_max]

    def _harmonic_checks(
        self, config: RunConfig, params: DrivenOscillator, grid: PositionGrid, sigma: float, discrepancy: float
    ) -> dict[str, float]:
        """Quadratic-limit bound and coherent-state transport for the harmonic system."""
        logger.info("Quadratic-limit L1 discrepancy %.3e", discrepancy)
        if discrepancy > config.quadratic_limit_tolerance:
            raise NumericalCheckError("quadratic limit", discrepancy, config.quadratic_limit_tolerance)
        transport = coherent_state_transport_check(
            params,
            grid,
            q0=0.5 * params.turning_point(config.shell_energy),
            p0=0.0,
            sigma=sigma,
            time=config.periods * params.period,
            t0=config.t0,
            steps_per_period=config.floquet_steps,
            order=config.integrator_order,
        )
        logger.info("Coherent-state transport L1 error %.3e after %d periods", transport.l1_error, config.periods)
        return {
            "quadratic_limit_discrepancy": discrepancy,
            "transport_l1_error": transport.l1_error,
            "transport_quantum_norm": transport.quantum_norm,
        }

    def run(self, config: RunConfig) -> dict:
        params = config.oscillator_params
        grid = config.position_grid()
        grid.check_resolution(params, config.shell_energy)
        q_axis, p_axis = central_axes(grid)
        window = PhaseWindow(
            q_min=float(q_axis[0]), q_max=float(q_axis[-1]), p_min=float(p_axis[0]), p_max=float(p_axis[-1])
        )
        shape = (grid.n_points, grid.n_points)
        time = config.periods * params.period
        sigma = config.coherent_width if config.coherent_width is not None else params.coherent_width(grid.hbar)
        logger.info(
            "Oscillator run: N=%d, L=%.4g, hbar=%.4g, sigma=%.4g, t=%d periods",
            grid.n_points,
            grid.box_length,
            grid.hbar,
            sigma,
            config.periods,
        )

        # Steps 1-4: independent computations
        results = self._run_tasks(
            {
                "quantum": lambda: self._quantum_fields(config, params, grid, sigma),
                "classical": lambda: liouville_diagonal(
                    params,
                    window,
                    shape,
                    time,
                    epsilon=sigma,
                    momentum_width=grid.hbar / sigma,
                    t0=config.t0,
                    steps_per_period=config.steps_per_period,
                    order=config.integrator_order,
                ),
                "markers": lambda: self._periodic_points(config, params, window),
                "section": lambda: shell_section(config, params, default_shell_box(params, config.shell_energy)),
            }
        )
        operator, field, coherent, series, residual = results["quantum"]
        liouville = results["classical"]
        records: list[PeriodicPointRecord] = results["markers"]
        cloud: SectionCloud = results["section"]

        # Step 5: comparisons
        points = [(r.q, r.p) for r in records]
        midpoints = pair_midpoints(records)
        point_contrast = peak_contrast(coherent.q_axis, coherent.p_axis, coherent.values, points)
        raw_contrast = peak_contrast(field.q_axis, field.p_axis, field.values, points)
        midpoint_contrast = peak_contrast(field.q_axis, field.p_axis, field.values, [m[:2] for m in midpoints])
        summary: dict[str, Any] = {
            "D": grid.n_points,
            "n": config.periods,
            "time": time,
            "trace": field.trace(),
            "expected_trace": field.expected_trace,
            "identity_residual": residual,
            "imaginary_residual": field.imaginary_residual,
            "floquet_steps": operator.steps,
            "floquet_step_change": operator.step_change,
            "min": float(field.values.min()),
            "max": float(field.values.max()),
            "coherent_width": sigma,
            "periodic_points": len(records),
            "midpoints": len(midpoints),
            "min_point_contrast": float(point_contrast.min()) if len(records) else None,
            "raw_min_point_contrast": float(raw_contrast.min()) if len(records) else None,
            "jaccard_top_decile": jaccard_top_decile(coherent.values, liouville.values),
            "section_seeds_dropped": cloud.dropped,
        }
        if config.system == SystemKind.HARMONIC:
            discrepancy = quadratic_limit_discrepancy(coherent.values, liouville.values)
            summary.update(self._harmonic_checks(config, params, grid, sigma, discrepancy))

        run_metadata = {
            "config": config.model_dump(mode="json"),
            "tolerances": {
                "identity": config.identity_tolerance,
                "floquet_unitarity": config.floquet_unitarity_tolerance,
                "floquet_convergence": config.floquet_convergence_tolerance,
                "quadratic_limit": config.quadratic_limit_tolerance,
            },
        }
        self.store.write_matrix("quantum_field.csv", field.values)
        self.store.write_image("quantum_field.ppm", field.values, config.color_limit)
        self.store.write_sidecar("quantum_field.txt", {**summary, **run_metadata})

        self.store.write_matrix("coherent_field.csv", coherent.values)
        self.store.write_image("coherent_field.ppm", coherent.values, config.color_limit)
        self.store.write_sidecar(
            "coherent_field.txt",
            {
                "n": config.periods,
                "time": time,
                "sigma": sigma,
                "min": float(coherent.values.min()),
                "max": float(coherent.values.max()),
                **run_metadata,
            },
        )

        self.store.write_matrix("liouville_field.csv", liouville.values)
        self.store.write_image("liouville_field.ppm", liouville.values, config.color_limit)
        self.store.write_sidecar(
            "liouville_field.txt",
            {
                "n": config.periods,
                "time": time,
                "epsilon": liouville.epsilon,
                "momentum_width": liouville.momentum_width,
                "min": float(liouville.values.min()),
                "max": float(liouville.values.max()),
                **run_metadata,
            },
        )

        self.store.write_table(
            "periodic_points.csv",
            PERIODIC_POINT_HEADER,
            [
                (r.q, r.p, r.periods, r.primitive_period, r.kind, r.trace, r.stability_denominator, r.residual, c, raw)
                for r, c, raw in zip(records, point_contrast, raw_contrast, strict=True)
            ],
        )
        self.store.write_table(
            "midpoints.csv",
            MIDPOINT_HEADER,
            [(*m, c) for m, c in zip(midpoints, midpoint_contrast, strict=True)],
        )
        self.store.write_table("section.csv", SECTION_HEADER, section_rows(cloud))
        self.store.write_column("quasienergies.csv", "eigenphase", series.eigenphases)

        logger.info("Oscillator run finished: trace %.10g, residual %.2e", summary["trace"], residual)
        return summary
