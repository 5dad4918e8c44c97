"""Cat-map pipeline: diagonal Wigner propagator with periodic-point markers."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

from phasescars.errors import NumericalCheckError
from phasescars.services.analysis import identity_check, spectral_series_from_matrix
from phasescars.services.torus_classical import (
    POINT_TABLE_HEADER,
    build_midpoint_catalog,
    enumerate_periodic_points,
    pair_contribution_total,
    periodic_point_rows,
)
from phasescars.services.torus_quantum import (
    diagonal_wigner_field,
    discrete_weyl_symbol,
    peak_match,
    quantize_cat,
)

if TYPE_CHECKING:
    from phasescars.models import RunConfig
    from phasescars.services.export import ArtifactStore

logger = logging.getLogger(__name__)


class CatScarsPipeline:
    """Orchestrates one cat-map run.

    Steps:
    1. Quantize the map and form the Weyl symbol of U^n
    2. Build the diagonal field and check its trace against |tr U^n|^2
    3. Enumerate period-n points and their midpoints
    4. Match field extrema to the periodic points
    5. Write field, image, markers and sidecar
    """

    def __init__(self, store: ArtifactStore) -> None:
        self.store = store

    def run(self, config: RunConfig) -> dict:
        torus_map = config.torus_map
        n = config.iterations
        qmap = quantize_cat(torus_map, config.dimension, tolerance=config.unitarity_tolerance)

        logger.info("Building diagonal field for D=%d, n=%d", config.dimension, n)
        symbol = discrete_weyl_symbol(qmap, n)
        field = diagonal_wigner_field(symbol, tolerance=config.identity_tolerance)
        trace = field.trace()

        series = spectral_series_from_matrix(qmap.unitary, beta=config.beta)
        residual = identity_check(trace, series, n)
        if residual > config.identity_tolerance:
            raise NumericalCheckError("trace identity", residual, config.identity_tolerance)

        summary: dict = {
            "D": config.dimension,
            "n": n,
            "trace": trace,
            "expected_trace": field.expected_trace,
            "identity_residual": residual,
            "imaginary_residual": field.imaginary_residual,
            "min": float(field.values.min()),
            "max": float(field.values.max()),
        }

        self.store.write_matrix("diagonal_field.csv", field.values)
        self.store.write_image("diagonal_field.ppm", field.values, config.color_limit)

        if n >= 1 and torus_map.is_hyperbolic:
            point_set = enumerate_periodic_points(torus_map, n)
            catalog = build_midpoint_catalog(point_set)
            report = peak_match(field, point_set, catalog)
            self.store.write_table("markers.csv", POINT_TABLE_HEADER, periodic_point_rows(point_set, catalog))
            self.store.write_table(
                "peak_match.csv",
                ("label", "q", "p", "distance", "hit"),
                [(e.label, e.q, e.p, e.distance, e.hit) for e in report.entries],
            )
            summary.update(
                {
                    "periodic_points": len(point_set),
                    "cycles": len(point_set.cycles),
                    "midpoint_entries": len(catalog),
                    "pair_contribution_total": pair_contribution_total(torus_map, n),
                    "peak_hit_rate": report.hit_rate,
                    "midpoint_image_weights": [w.model_dump() for w in report.image_weights],
                }
            )
        else:
            logger.info("No periodic-point markers for n=%d", n)

        self.store.write_sidecar(
            "diagonal_field.txt",
            {
                **summary,
                "config": config.model_dump(mode="json"),
                "tolerances": {"identity": config.identity_tolerance, "unitarity": config.unitarity_tolerance},
            },
        )
        logger.info("Cat-map run finished: trace %.10g, residual %.2e", trace, residual)
        return summary
