"""Form-factor pipeline: K(tau) from the diagonal fields next to the diagonal approximation."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Any

from phasescars.errors import NumericalCheckError
from phasescars.models import SystemKind
from phasescars.services.analysis import (
    SpectralSeries,
    diagonal_approximation_report,
    form_factor,
    form_factor_curve,
    identity_check,
    spectral_series_from_matrix,
)
from phasescars.services.continuum_classical import classical_return_probability, default_shell_box
from phasescars.services.continuum_quantum import (
    continuum_diagonal_field,
    converged_floquet,
    quasienergy_spectrum,
    weyl_propagator,
)
from phasescars.services.torus_classical import classical_return_probability_map
from phasescars.services.torus_quantum import diagonal_wigner_field, discrete_weyl_symbol, quantize_cat

if TYPE_CHECKING:
    from collections.abc import Callable

    from phasescars.models import RunConfig
    from phasescars.services.export import ArtifactStore

logger = logging.getLogger(__name__)

FORM_FACTOR_HEADER = ("n", "tau", "K", "two_over_beta_tau_Pcl", "ratio")
IDENTITY_HEADER = ("n", "field_trace", "expected_trace", "residual")


class FormFactorPipeline:
    """Orchestrates one form-factor run.

    Steps:
    1. Build the one-step unitary (cat map or Floquet operator) and its eigenphases
    2. For n = 0..max_iterations, sum the diagonal field and check it against D K(n)
    3. Estimate the classical return probability for n >= 1 and compare it with
       K(n), boxcar-averaged over `smoothing_window` steps
    4. Write the form-factor table, the identity table and the sidecar
    """

    def __init__(self, store: ArtifactStore) -> None:
        self.store = store

    def _cat_map(self, config: RunConfig) -> tuple[SpectralSeries, Callable[[int], float], dict[int, float]]:
        torus_map = config.torus_map
        qmap = quantize_cat(torus_map, config.dimension, tolerance=config.unitarity_tolerance)
        series = spectral_series_from_matrix(qmap.unitary, beta=config.beta)

        def field_trace(n: int) -> float:
            symbol = discrete_weyl_symbol(qmap, n)
            return diagonal_wigner_field(symbol, tolerance=config.identity_tolerance).trace()

        classical: dict[int, float] = {}
        if torus_map.is_hyperbolic:
            classical = {n: classical_return_probability_map(torus_map, n) for n in range(1, config.max_iterations + 1)}
        return series, field_trace, classical

    def _oscillator(self, config: RunConfig) -> tuple[SpectralSeries, Callable[[int], float], dict[int, float]]:
        params = config.oscillator_params
        grid = config.position_grid()
        grid.check_resolution(params, config.shell_energy)
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
        series = quasienergy_spectrum(operator, beta=config.beta)

        def field_trace(n: int) -> float:
            return continuum_diagonal_field(weyl_propagator(operator, n), tolerance=config.identity_tolerance).trace()

        # Per-point return probability integrated over the energy shell, so
        # that it is dimensionless like the torus sum over periodic points.
        window = config.energy_window
        box = default_shell_box(params, window.e_max)
        box_area = (box.q_max - box.q_min) * (box.p_max - box.p_min)
        epsilon = config.smoothing if config.smoothing is not None else max(grid.dq, grid.dp)
        classical: dict[int, float] = {}
        for n in range(1, config.max_iterations + 1):
            estimate = classical_return_probability(
                params,
                window,
                n * params.period,
                epsilon=epsilon,
                samples=config.mc_samples,
                seed=config.seed + n,
                box=box,
                t0=config.t0,
                steps_per_period=config.steps_per_period,
                order=config.integrator_order,
            )
            shell_area = box_area * estimate.samples / config.mc_samples
            classical[n] = estimate.value * shell_area
            logger.info(
                "P_cl(%d) = %.4g +/- %.2g (shell area %.4g)", n, classical[n], estimate.stderr * shell_area, shell_area
            )
        return series, field_trace, classical

    def run(self, config: RunConfig) -> dict:
        # Step 1: spectrum and field builder
        if config.system == SystemKind.CAT:
            series, field_trace, classical = self._cat_map(config)
        else:
            series, field_trace, classical = self._oscillator(config)
        dimension = series.dimension
        logger.info("Form factor for D=%d, n=0..%d", dimension, config.max_iterations)

        # Step 2: identity check at every n
        identity_rows = []
        residuals: dict[str, float] = {}
        for n in range(config.max_iterations + 1):
            trace = field_trace(n)
            residual = identity_check(trace, series, n)
            if residual > config.identity_tolerance:
                raise NumericalCheckError(f"trace identity at n={n}", residual, config.identity_tolerance)
            identity_rows.append((n, trace, dimension * form_factor(series, n), residual))
            residuals[str(n)] = residual

        # Step 3: diagonal approximation against the smoothed form factor
        steps = range(config.max_iterations + 1)
        smoothed = form_factor_curve(series, steps, window=config.smoothing_window)
        report = {
            row.n: row
            for row in diagonal_approximation_report(
                series, classical, beta=config.beta, window=config.smoothing_window
            )
        }
        rows: list[tuple[Any, ...]] = []
        for n in steps:
            row = report.get(n)
            if n == 0 or row is None:
                rows.append((n, n / dimension, float(smoothed[n]) if n else form_factor(series, 0), None, None))
            else:
                rows.append((n, row.tau, row.form_factor, row.classical_prediction, row.ratio))

        # Step 4: outputs
        self.store.write_table("form_factor.csv", FORM_FACTOR_HEADER, rows)
        self.store.write_table("identity_check.csv", IDENTITY_HEADER, identity_rows)
        summary: dict[str, Any] = {
            "D": dimension,
            "max_iterations": config.max_iterations,
            "smoothing_window": config.smoothing_window,
            "max_identity_residual": max(residuals.values()),
            "identity_residual": residuals,
            "classical_return_probability": {str(n): value for n, value in classical.items()},
        }
        self.store.write_sidecar(
            "form_factor.txt",
            {
                **summary,
                "config": config.model_dump(mode="json"),
                "tolerances": {"identity": config.identity_tolerance, "unitarity": config.unitarity_tolerance},
            },
        )
        logger.info("Form-factor run finished: largest identity residual %.2e", summary["max_identity_residual"])
        return summary
