"""Tests for the per-subcommand pipelines on small configurations."""

import math

import pytest

from phasescars.errors import NumericalCheckError
from phasescars.models import CurveKind, RunConfig, Subcommand, SystemKind
from phasescars.pipeline.cat_scars import CatScarsPipeline
from phasescars.pipeline.form_factor import FormFactorPipeline
from phasescars.pipeline.midpoint_surface import MidpointSurfacePipeline
from phasescars.pipeline.oscillator_scars import OscillatorScarsPipeline, pair_midpoints
from phasescars.pipeline.phase_portrait import PeriodicPointsPipeline, PoincarePipeline
from phasescars.services.export import ArtifactStore, parse_sidecar

SMALL_BOX = math.sqrt(2 * math.pi * 32)
SQUARE_BOX = math.sqrt(2 * math.pi * 64)


def _lines(path):
    return path.read_text(encoding="utf-8").splitlines()


def _harmonic_config(subcommand, tmp_path, **overrides):
    """Driven harmonic oscillator on a 32-point grid with hbar = 1."""
    values = {
        "subcommand": subcommand,
        "system": SystemKind.HARMONIC,
        "grid_points": 32,
        "hbar": 1.0,
        "box_length": SMALL_BOX,
        "window_energy": 2.0,
        "steps_per_period": 128,
        "floquet_steps": 512,
        "section_steps_per_period": 32,
        "newton_grid": 3,
        "section_seeds": 4,
        "section_periods": 3,
        "mc_samples": 500,
        "output_dir": tmp_path,
    }
    values.update(overrides)
    return RunConfig.model_validate(values)


def _quarter_turn_config(tmp_path, **overrides):
    """Driven harmonic oscillator turned by a quarter per drive period on a 64-point square grid."""
    values = {"grid_points": 64, "box_length": SQUARE_BOX, "omega": 4.0, **overrides}
    return _harmonic_config(Subcommand.OSCILLATOR_SCARS, tmp_path, **values)


# --- cat-scars ---


def test_cat_scars_single_step(store, tmp_path):
    """D = 60, n = 1: trace 2, two fixed points and eight midpoint entries."""
    config = RunConfig(subcommand=Subcommand.CAT_SCARS, dimension=60, iterations=1)
    summary = CatScarsPipeline(store).run(config)

    assert summary["trace"] == pytest.approx(2.0, rel=1e-8)
    assert summary["identity_residual"] < 1e-8
    assert summary["periodic_points"] == 2
    assert summary["midpoint_entries"] == 8
    assert summary["pair_contribution_total"] == 2.0
    assert len(_lines(tmp_path / "diagonal_field.csv")) == 120
    assert (tmp_path / "diagonal_field.ppm").read_bytes().startswith(b"P6\n120 120\n255\n")
    assert len(_lines(tmp_path / "markers.csv")) == 1 + 2 + 8
    assert len(_lines(tmp_path / "peak_match.csv")) == 1 + 2

    sidecar = parse_sidecar((tmp_path / "diagonal_field.txt").read_text(encoding="utf-8"))
    assert {"D", "n", "trace", "min", "max"} <= set(sidecar)
    assert float(sidecar["trace"]) == pytest.approx(2.0, rel=1e-8)
    assert sidecar["config.dimension"] == "60"


def test_cat_scars_three_steps(store):
    """n = 3: trace 50 over 50 points in 18 primitive cycles."""
    config = RunConfig(subcommand=Subcommand.CAT_SCARS, dimension=60, iterations=3)
    summary = CatScarsPipeline(store).run(config)
    assert summary["trace"] == pytest.approx(50.0, rel=1e-8)
    assert summary["periodic_points"] == 50
    assert summary["cycles"] == 18


def test_cat_scars_zero_steps(store, tmp_path):
    """n = 0: uniform field with trace D^2 and no markers."""
    config = RunConfig(subcommand=Subcommand.CAT_SCARS, dimension=60, iterations=0)
    summary = CatScarsPipeline(store).run(config)
    assert summary["trace"] == pytest.approx(3600.0)
    assert summary["min"] == pytest.approx(3600.0)
    assert "periodic_points" not in summary
    assert not (tmp_path / "markers.csv").exists()


# --- form-factor ---


def test_form_factor_cat_map(store, tmp_path):
    """Identity closes at every n; P_cl = 1 per step for the cat map."""
    config = RunConfig(subcommand=Subcommand.FORM_FACTOR, dimension=30, max_iterations=3)
    summary = FormFactorPipeline(store).run(config)

    assert summary["D"] == 30
    assert summary["max_identity_residual"] < 1e-8
    assert summary["classical_return_probability"] == {"1": 1.0, "2": 1.0, "3": 1.0}

    rows = _lines(tmp_path / "form_factor.csv")
    assert rows[0] == "n,tau,K,two_over_beta_tau_Pcl,ratio"
    assert len(rows) == 5
    assert rows[1].startswith("0,0,")
    assert rows[1].endswith(",,")
    assert len(_lines(tmp_path / "identity_check.csv")) == 5
    assert (tmp_path / "form_factor.txt").exists()


def test_form_factor_smoothing_window(tmp_path):
    """A three-step window averages K over n - 1, n and n + 1."""
    config = RunConfig(
        subcommand=Subcommand.FORM_FACTOR, dimension=30, max_iterations=3, smoothing_window=3, output_dir=tmp_path
    )
    summary = FormFactorPipeline(ArtifactStore(tmp_path)).run(config)
    assert summary["smoothing_window"] == 3

    raw = [float(line.split(",")[2]) / 30 for line in _lines(tmp_path / "identity_check.csv")[1:]]
    smoothed = {int(line.split(",")[0]): float(line.split(",")[2]) for line in _lines(tmp_path / "form_factor.csv")[1:]}
    assert smoothed[1] == pytest.approx((raw[0] + raw[1] + raw[2]) / 3, rel=1e-9)
    assert smoothed[2] == pytest.approx((raw[1] + raw[2] + raw[3]) / 3, rel=1e-9)


def test_form_factor_oscillator(tmp_path):
    """The continuum branch checks the identity and estimates P_cl by Monte Carlo."""
    config = _harmonic_config(Subcommand.FORM_FACTOR, tmp_path, max_iterations=2)
    summary = FormFactorPipeline(ArtifactStore(tmp_path)).run(config)
    assert summary["D"] == 32
    assert summary["max_identity_residual"] < 1e-8
    assert set(summary["classical_return_probability"]) == {"1", "2"}
    assert all(value >= 0 for value in summary["classical_return_probability"].values())
    assert len(_lines(tmp_path / "form_factor.csv")) == 4


# --- midpoint-surface ---


def test_midpoint_surface_circle(store, tmp_path):
    """K = 16 circle: K^2 vertices, 2 K^2 faces, one chord just off the centre."""
    config = RunConfig(subcommand=Subcommand.MIDPOINT_SURFACE, curve=CurveKind.CIRCLE, curve_samples=16)
    summary = MidpointSurfacePipeline(store).run(config)
    assert summary["vertices"] == 256
    assert summary["faces"] == 512
    assert summary["dimension"] == 2
    assert summary["chord_multiplicity"] == 1

    lines = _lines(tmp_path / "midpoint_surface.obj")
    assert sum(line.startswith("v ") for line in lines) == 256
    assert sum(line.startswith("f ") for line in lines) == 512
    assert (tmp_path / "caustic.csv").exists()
    assert (tmp_path / "midpoint_surface.txt").exists()


def test_midpoint_surface_rounded_triangle(store):
    """Three chords meet near the center of the rounded triangle."""
    config = RunConfig(
        subcommand=Subcommand.MIDPOINT_SURFACE, curve=CurveKind.ROUNDED_TRIANGLE, curve_samples=401
    )
    summary = MidpointSurfacePipeline(store).run(config)
    assert summary["chord_multiplicity"] == 3
    assert summary["caustic_points"] > 0


def test_midpoint_surface_knot(store, tmp_path):
    """Space curves get a mesh but no caustic."""
    config = RunConfig(subcommand=Subcommand.MIDPOINT_SURFACE, curve=CurveKind.KNOT, curve_samples=12)
    summary = MidpointSurfacePipeline(store).run(config)
    assert summary["dimension"] == 3
    assert "caustic_points" not in summary
    assert not (tmp_path / "caustic.csv").exists()


def test_midpoint_surface_periodic_orbit(tmp_path):
    """The forced harmonic response is a closed ellipse in (q, p)."""
    config = _harmonic_config(
        Subcommand.MIDPOINT_SURFACE, tmp_path, curve=CurveKind.PERIODIC_ORBIT, curve_samples=8
    )
    summary = MidpointSurfacePipeline(ArtifactStore(tmp_path)).run(config)
    assert summary["vertices"] == 64
    assert summary["dimension"] == 2


# --- periodic-points and poincare ---


def test_periodic_points_cat_map(store, tmp_path):
    """Period 3: 50 points in 18 cycles, weights from |det(T^3 - I)| = 50."""
    config = RunConfig(subcommand=Subcommand.PERIODIC_POINTS, iterations=3)
    summary = PeriodicPointsPipeline(store).run(config)
    assert summary["periodic_points"] == 50
    assert summary["cycles"] == 18
    assert summary["trace_T_n"] == 52
    assert summary["stability_denominator"] == 50

    cycles = _lines(tmp_path / "cycles.csv")
    assert cycles[0] == "cycle,length,q_num,p_num,denom,weight"
    assert len(cycles) == 19
    assert cycles[1].split(",")[1] == "1"
    assert cycles[1].split(",")[-1] == "0.02"
    assert (tmp_path / "periodic_points.txt").exists()


def test_periodic_points_oscillator(tmp_path):
    """The driven harmonic oscillator has one elliptic fixed point."""
    config = _harmonic_config(Subcommand.PERIODIC_POINTS, tmp_path)
    summary = PeriodicPointsPipeline(ArtifactStore(tmp_path)).run(config)
    assert summary["periodic_points"] == 1
    assert summary["guesses"] == 9 + 10
    assert summary["kinds"] == {"elliptic": 1}
    rows = _lines(tmp_path / "periodic_points.csv")
    assert len(rows) == 2
    assert rows[1].split(",")[3] == "elliptic"


def test_poincare_section(tmp_path):
    """Every seed is sampled once per period, including the start."""
    config = _harmonic_config(Subcommand.POINCARE, tmp_path, section_seeds=5, section_periods=4)
    summary = PoincarePipeline(ArtifactStore(tmp_path)).run(config)
    assert summary["kept"] == 5
    assert summary["dropped"] == 0
    assert len(_lines(tmp_path / "section.csv")) == 1 + 5 * 5
    assert len(_lines(tmp_path / "section_maxima.csv")) == 1 + 10


# --- oscillator-scars ---


def test_pair_midpoints():
    """Unordered pairs of distinct points."""

    class Point:
        def __init__(self, q, p):
            self.q, self.p = q, p

    midpoints = pair_midpoints([Point(0.0, 0.0), Point(2.0, 0.0), Point(0.0, 4.0)])
    assert midpoints == [(1.0, 0.0, 0, 1), (0.0, 2.0, 0, 2), (1.0, 2.0, 1, 2)]


def test_oscillator_scars_harmonic(tmp_path):
    """Coherent and Liouville fields agree in the quadratic limit; every artifact is written."""
    config = _quarter_turn_config(tmp_path)
    summary = OscillatorScarsPipeline(ArtifactStore(tmp_path)).run(config)

    assert summary["D"] == 64
    assert summary["identity_residual"] < 1e-8
    assert summary["trace"] == pytest.approx(summary["expected_trace"], rel=1e-8)
    assert summary["floquet_step_change"] <= 1e-6
    assert summary["coherent_width"] == pytest.approx(1.0)
    assert summary["periodic_points"] == 1
    assert summary["midpoints"] == 0
    assert summary["quadratic_limit_discrepancy"] < 1e-2
    assert summary["transport_l1_error"] < 1e-2
    assert summary["jaccard_top_decile"] > 0.8
    assert summary["min_point_contrast"] > 5
    assert summary["section_seeds_dropped"] == 0

    assert len(_lines(tmp_path / "quantum_field.csv")) == 64
    assert len(_lines(tmp_path / "coherent_field.csv")) == 64
    assert len(_lines(tmp_path / "liouville_field.csv")) == 64
    points = _lines(tmp_path / "periodic_points.csv")
    assert len(points) == 2
    assert points[1].split(",")[3] == "1"
    assert _lines(tmp_path / "midpoints.csv") == ["q,p,first,second,contrast"]
    assert len(_lines(tmp_path / "section.csv")) == 1 + 4 * 4
    assert len(_lines(tmp_path / "quasienergies.csv")) == 65
    sidecar = parse_sidecar((tmp_path / "quantum_field.txt").read_text(encoding="utf-8"))
    assert {"D", "n", "trace", "min", "max"} <= set(sidecar)


def test_oscillator_scars_zero_periods(tmp_path):
    """t = 0: the field is the identity's, trace N^2, and no markers."""
    config = _quarter_turn_config(tmp_path, periods=0)
    summary = OscillatorScarsPipeline(ArtifactStore(tmp_path)).run(config)
    assert summary["trace"] == pytest.approx(64**2)
    assert summary["quadratic_limit_discrepancy"] == pytest.approx(0.0, abs=1e-10)
    assert summary["periodic_points"] == 0
    assert summary["min_point_contrast"] is None


def test_oscillator_scars_threads_are_deterministic(tmp_path):
    """Threaded and sequential runs write identical files."""
    outputs = {}
    for threads in (1, 2):
        root = tmp_path / f"threads{threads}"
        config = _quarter_turn_config(root, threads=threads)
        OscillatorScarsPipeline(ArtifactStore(root), threads=threads).run(config)
        outputs[threads] = {
            name: (root / name).read_bytes()
            for name in ("liouville_field.csv", "periodic_points.csv", "section.csv", "quantum_field.csv")
        }
    assert outputs[1] == outputs[2]


def test_oscillator_scars_enforces_quadratic_limit(tmp_path):
    """A harmonic run whose fields disagree beyond the tolerance fails numerically."""
    config = _quarter_turn_config(tmp_path, quadratic_limit_tolerance=1e-300)
    with pytest.raises(NumericalCheckError, match="quadratic limit"):
        OscillatorScarsPipeline(ArtifactStore(tmp_path)).run(config)


def test_oscillator_scars_checks_resolution(tmp_path):
    """Too few grid points for the shell is rejected before any work."""
    config = _quarter_turn_config(tmp_path, grid_points=4)
    with pytest.raises(ValueError, match="grid points"):
        OscillatorScarsPipeline(ArtifactStore(tmp_path)).run(config)


# --- full-size reproductions ---


@pytest.mark.slow
def test_double_well_scar_run(tmp_path):
    """Default driven double well at N = 512, hbar = 10: converged Floquet and scars on the periodic points."""
    config = RunConfig(subcommand=Subcommand.OSCILLATOR_SCARS, output_dir=tmp_path, threads=4)
    summary = OscillatorScarsPipeline(ArtifactStore(tmp_path), threads=4).run(config)
    assert summary["D"] == 512
    assert summary["identity_residual"] < 1e-8
    assert summary["floquet_step_change"] <= 1e-6
    assert summary["min_point_contrast"] > 5
    assert summary["jaccard_top_decile"] > 0.2
    assert (tmp_path / "quantum_field.ppm").read_bytes().startswith(b"P6\n512 512\n255\n")


@pytest.mark.slow
def test_cat_map_form_factor_large(tmp_path):
    """D = 60, n = 0..6: every trace identity closes."""
    config = RunConfig(subcommand=Subcommand.FORM_FACTOR, dimension=60, max_iterations=6, output_dir=tmp_path)
    summary = FormFactorPipeline(ArtifactStore(tmp_path)).run(config)
    assert summary["max_identity_residual"] < 1e-8


@pytest.mark.slow
def test_harmonic_default_run(tmp_path):
    """Default harmonic system at N = 128, hbar = 10: the coherent and Liouville fields agree."""
    config = RunConfig(
        subcommand=Subcommand.OSCILLATOR_SCARS, system=SystemKind.HARMONIC, grid_points=128, output_dir=tmp_path
    )
    summary = OscillatorScarsPipeline(ArtifactStore(tmp_path)).run(config)
    assert summary["D"] == 128
    assert summary["quadratic_limit_discrepancy"] < 1e-2
