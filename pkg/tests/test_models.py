"""Tests for data models."""

import math

import pytest
from pydantic import ValidationError

from phasescars.models import (
    CurveKind,
    DrivenOscillator,
    DrivenQuarticParams,
    EnergyWindow,
    HarmonicParams,
    OrbitKind,
    PeriodicPointRecord,
    PhasePoint,
    PhaseWindow,
    PositionGrid,
    RunConfig,
    Subcommand,
    SystemKind,
    TorusMap,
)


def test_torus_map_defaults(cat_map):
    """The default map is the hyperbolic, quantizable cat map."""
    assert cat_map.matrix == ((2, 1), (3, 2))
    assert cat_map.trace == 4
    assert cat_map.is_hyperbolic
    assert cat_map.is_quantizable


def test_torus_map_rejects_non_unit_determinant():
    """Only area-preserving integer maps are accepted."""
    with pytest.raises(ValidationError, match="determinant 1"):
        TorusMap(a=2, b=1, c=1, d=2)


def test_torus_map_parity():
    """ab odd rules out the plain quantization."""
    assert not TorusMap(a=1, b=1, c=0, d=1).is_quantizable
    assert not TorusMap(a=1, b=1, c=0, d=1).is_hyperbolic


def test_double_well_depth(quartic):
    """The well bottoms sit at -E_b."""
    q_min = quartic.well_position
    assert quartic.static_potential(q_min) == pytest.approx(-quartic.barrier, abs=1e-12)
    assert quartic.static_potential(-q_min) == pytest.approx(-quartic.barrier, abs=1e-12)
    assert quartic.static_force(q_min) == pytest.approx(0.0, abs=1e-12)
    assert -quartic.static_force_gradient(q_min) == pytest.approx(quartic.well_frequency**2)


def test_double_well_barrier_top(quartic):
    """The static potential vanishes at the barrier top."""
    assert quartic.static_potential(0.0) == 0.0
    assert quartic.minimum_energy == -192.0
    assert quartic.reference_energy == 192.0


def test_turning_point_solves_potential(quartic):
    """V(q_turn) equals the shell energy."""
    q_turn = quartic.turning_point(50.0)
    assert quartic.static_potential(q_turn) == pytest.approx(50.0)
    with pytest.raises(ValueError, match="below the well bottom"):
        quartic.turning_point(-200.0)


def test_drive_enters_force(quartic):
    """The drive adds -S cos(omega t + phase) to the force."""
    expected = quartic.static_force(1.0) - quartic.drive * math.cos(quartic.phase)
    assert quartic.force(1.0, 0.0) == pytest.approx(expected)
    assert quartic.period == pytest.approx(2 * math.pi / 0.95)


def test_quartic_rejects_zero_omega0():
    """omega0 = 0 removes the double well."""
    with pytest.raises(ValidationError):
        DrivenQuarticParams(omega0=0.0)


def test_harmonic_limit(harmonic):
    """The harmonic model is undriven by default and quadratic."""
    assert harmonic.drive == 0.0
    assert harmonic.static_potential(2.0) == pytest.approx(2.0)
    assert harmonic.turning_point(2.0) == pytest.approx(2.0)
    assert harmonic.max_momentum(2.0) == pytest.approx(2.0)


def test_phase_point_must_be_finite():
    """Non-finite coordinates are rejected."""
    with pytest.raises(ValidationError):
        PhasePoint(q=math.inf, p=0.0)


def test_phase_window_axes():
    """Axes are inclusive and need two nodes."""
    window = PhaseWindow(q_min=-1.0, q_max=1.0, p_min=0.0, p_max=2.0)
    q_axis, p_axis = window.axes((3, 5))
    assert q_axis.tolist() == [-1.0, 0.0, 1.0]
    assert p_axis[-1] == 2.0
    assert window.cell_size((3, 5)) == (1.0, 0.5)
    with pytest.raises(ValueError, match="two nodes"):
        window.axes((1, 5))


def test_phase_window_rejects_reversed_bounds():
    """Bounds must be ordered."""
    with pytest.raises(ValidationError):
        PhaseWindow(q_min=1.0, q_max=-1.0, p_min=0.0, p_max=1.0)


def test_energy_window_density():
    """Uniform density inside the window, zero outside."""
    window = EnergyWindow(e_min=1.0, e_max=3.0)
    assert window.width == 2.0
    assert window.density([0.0, 2.0, 4.0]).tolist() == [0.0, 0.5, 0.0]


def test_position_grid_spacings():
    """Position and momentum spacings follow from N, L and hbar."""
    grid = PositionGrid(n_points=8, box_length=4.0, hbar=1.0)
    assert grid.dq == 0.5
    assert grid.dp == pytest.approx(math.pi / 2)
    assert grid.positions[0] == -2.0
    assert grid.momenta[1] == pytest.approx(grid.dp)
    assert grid.cell_area == pytest.approx(grid.dq * grid.dp / 4)


def test_position_grid_requires_power_of_two():
    """FFT grids must have a power-of-two size."""
    with pytest.raises(ValidationError, match="power of two"):
        PositionGrid(n_points=100, box_length=1.0)


def test_position_grid_for_window(quartic):
    """The box spans twice the classical extent plus a margin."""
    grid = PositionGrid.for_window(quartic, hbar=10.0, n_points=512, energy=192.0)
    assert grid.box_length == pytest.approx(4 * 1.1 * quartic.turning_point(192.0))
    grid.check_resolution(quartic, 192.0)


def test_position_grid_resolution_check(quartic):
    """Too few points for the classical momenta is a validation error."""
    grid = PositionGrid.for_window(quartic, hbar=10.0, n_points=64, energy=192.0)
    with pytest.raises(ValueError, match="grid points"):
        grid.check_resolution(quartic, 192.0)
    small_box = PositionGrid(n_points=512, box_length=10.0, hbar=10.0)
    with pytest.raises(ValueError, match="box_length"):
        small_box.check_resolution(quartic, 192.0)


def test_periodic_point_record_stability():
    """Trace and |det(M - I)| come from the monodromy matrix."""
    record = PeriodicPointRecord(
        q=0.0,
        p=0.0,
        t0=0.0,
        periods=1,
        period_time=1.0,
        monodromy=[[2.0, 1.0], [1.0, 1.0]],
        kind=OrbitKind.HYPERBOLIC,
        residual=0.0,
    )
    assert record.trace == 3.0
    assert record.stability_denominator == pytest.approx(1.0)
    assert record.primitive_period == 1


def test_periodic_point_record_primitive_period():
    """The primitive period divides the search multiple and scales the period time."""
    values = {
        "q": 0.0,
        "p": 0.0,
        "t0": 0.0,
        "periods": 4,
        "period_time": 8.0,
        "monodromy": [[2.0, 1.0], [1.0, 1.0]],
        "kind": OrbitKind.HYPERBOLIC,
        "residual": 0.0,
    }
    record = PeriodicPointRecord(**values, primitive_period=2)
    assert record.primitive_time == pytest.approx(4.0)
    assert PeriodicPointRecord(**values).primitive_period == 4
    with pytest.raises(ValidationError, match="does not divide"):
        PeriodicPointRecord(**values, primitive_period=3)


def test_oscillator_base_is_abstract():
    """Only concrete potentials can be instantiated."""
    with pytest.raises(TypeError):
        DrivenOscillator()


def test_coherent_width():
    """sqrt(hbar / m Omega) with Omega the well or harmonic frequency."""
    assert DrivenQuarticParams().coherent_width(10.0) == pytest.approx(math.sqrt(10.0))
    assert HarmonicParams(harmonic_frequency=4.0).coherent_width(1.0) == pytest.approx(0.5)


def test_run_config_defaults_system_per_subcommand():
    """Each subcommand picks its natural system."""
    assert RunConfig(subcommand=Subcommand.CAT_SCARS).system == SystemKind.CAT
    assert RunConfig(subcommand=Subcommand.OSCILLATOR_SCARS).system == SystemKind.OSCILLATOR
    assert RunConfig(subcommand=Subcommand.POINCARE).system == SystemKind.OSCILLATOR
    orbit = RunConfig(subcommand=Subcommand.MIDPOINT_SURFACE, curve=CurveKind.PERIODIC_ORBIT)
    assert orbit.system == SystemKind.OSCILLATOR


def test_run_config_rejects_unknown_keys():
    """Misspelled parameters fail before any computation."""
    with pytest.raises(ValidationError):
        RunConfig.model_validate({"subcommand": "cat-scars", "dimensions": 60})


@pytest.mark.parametrize(
    "values",
    [
        {"subcommand": "cat-scars", "dimension": 61},
        {"subcommand": "cat-scars", "map_a": 1, "map_b": 1, "map_c": 0, "map_d": 1},
        {"subcommand": "cat-scars", "map_c": 2},
        {"subcommand": "cat-scars", "system": "oscillator"},
        {"subcommand": "oscillator-scars", "system": "cat"},
        {"subcommand": "oscillator-scars", "integrator_order": 3},
        {"subcommand": "midpoint-surface", "system": "cat", "curve": "periodic-orbit"},
        {"subcommand": "form-factor", "smoothing_window": 2},
        {"subcommand": "oscillator-scars", "floquet_steps": 4096, "floquet_max_steps": 2048},
    ],
)
def test_run_config_validation_errors(values):
    """Inconsistent parameter sets are rejected."""
    with pytest.raises(ValidationError):
        RunConfig.model_validate(values)


def test_run_config_oscillator_params():
    """Physical parameters flow into the oscillator model."""
    config = RunConfig(subcommand=Subcommand.OSCILLATOR_SCARS, drive=0.1, barrier=100.0)
    params = config.oscillator_params
    assert isinstance(params, DrivenQuarticParams)
    assert params.drive == 0.1
    assert config.shell_energy == 100.0

    harmonic = RunConfig(subcommand=Subcommand.OSCILLATOR_SCARS, system=SystemKind.HARMONIC, window_energy=3.0)
    assert isinstance(harmonic.oscillator_params, HarmonicParams)
    assert harmonic.shell_energy == 3.0

    scaled = RunConfig(subcommand=Subcommand.OSCILLATOR_SCARS, system=SystemKind.HARMONIC, hbar=2.0)
    assert scaled.shell_energy == pytest.approx(40.0)


def test_run_config_energy_window():
    """The default window ends at the shell energy."""
    config = RunConfig(subcommand=Subcommand.FORM_FACTOR, system=SystemKind.OSCILLATOR)
    window = config.energy_window
    assert window.e_max == 192.0
    assert window.e_min == pytest.approx(192.0 - 19.2 - 1.0)


def test_run_config_position_grid():
    """An explicit box length overrides the turning-point box."""
    config = RunConfig(subcommand=Subcommand.OSCILLATOR_SCARS, grid_points=64, box_length=20.0, hbar=1.0)
    grid = config.position_grid()
    assert grid.n_points == 64
    assert grid.box_length == 20.0
