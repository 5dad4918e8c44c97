"""Tests for the quantized cat map and the doubled-grid Weyl calculus."""

import numpy as np
import pytest

from phasescars.errors import NumericalCheckError
from phasescars.models import TorusMap
from phasescars.services.analysis import identity_check, spectral_series_from_matrix
from phasescars.services.torus_classical import build_midpoint_catalog, enumerate_periodic_points
from phasescars.services.torus_quantum import (
    checked_autocorrelation,
    diagonal_wigner_field,
    diagonal_wigner_field_direct,
    discrete_weyl_symbol,
    doubled_grid_autocorrelation,
    doubled_grid_symbol,
    local_extrema,
    midpoint_image_weights,
    peak_match,
    phase_point_operator,
    quantize_cat,
    symbol_of_matrix,
    trace_field,
)


@pytest.fixture
def qmap60(cat_map):
    return quantize_cat(cat_map, 60)


def test_quantize_cat_is_unitary(cat_map):
    """U U^dagger = I to 1e-10."""
    qmap = quantize_cat(cat_map, 60)
    identity = qmap.unitary @ qmap.unitary.conj().T
    assert np.max(np.abs(identity - np.eye(60))) < 1e-10
    assert qmap.effective_hbar == pytest.approx(1 / (2 * np.pi * 60))


def test_quantize_cat_rejects_bad_input(cat_map):
    """Parity, coprimality and dimension are checked."""
    with pytest.raises(ValueError, match="quantized"):
        quantize_cat(TorusMap(a=1, b=1, c=0, d=1), 4)
    with pytest.raises(ValueError, match="coprime"):
        quantize_cat(TorusMap(a=1, b=2, c=0, d=1), 4)
    with pytest.raises(ValueError, match="positive"):
        quantize_cat(cat_map, 0)


def test_quantize_cat_unitarity_check(cat_map):
    """An impossible tolerance turns into a numerical failure."""
    with pytest.raises(NumericalCheckError):
        quantize_cat(cat_map, 60, tolerance=-1.0)


def test_phase_point_operator_is_reflection():
    """R(x, y) is Hermitian and squares to the identity."""
    for x, y in [(0, 0), (3, 5), (7, 2)]:
        operator = phase_point_operator(4, x, y)
        assert np.allclose(operator, operator.conj().T)
        assert np.allclose(operator @ operator, np.eye(4))


def test_symbol_is_half_trace_with_phase_point_operators(cat_map):
    """The FFT symbol equals tr(A R(x, y)) / 2 point by point."""
    unitary = quantize_cat(cat_map, 4).unitary
    symbol = doubled_grid_symbol(unitary)
    for x in range(8):
        for y in range(8):
            expected = 0.5 * np.trace(unitary @ phase_point_operator(4, x, y))
            assert symbol[x, y] == pytest.approx(expected, abs=1e-12)


def test_symbol_rejects_odd_dimension():
    """The doubled grid needs an even dimension."""
    with pytest.raises(ValueError, match="even-dimensional"):
        doubled_grid_symbol(np.eye(3))


def test_identity_symbol_lives_on_even_sublattice():
    """The identity has symbol 1 at (even, even) and 0 elsewhere."""
    symbol = doubled_grid_symbol(np.eye(6))
    assert np.allclose(symbol[::2, ::2], 1.0)
    assert np.allclose(symbol[1::2, :], 0.0)
    assert np.allclose(symbol[:, 1::2], 0.0)


def test_fast_field_matches_direct_sum(cat_map):
    """D = 4: convolution and the direct superoperator sum agree to 1e-10."""
    qmap = quantize_cat(cat_map, 4)
    for n in (1, 2):
        values = discrete_weyl_symbol(qmap, n).values
        fast = doubled_grid_autocorrelation(values)
        direct = diagonal_wigner_field_direct(values)
        assert np.max(np.abs(fast - direct)) < 1e-10


def test_field_is_superoperator_diagonal(cat_map):
    """D = 4: G(x, y) = 4 tr(U^n R U^-n R) with the explicit reflection operators."""
    qmap = quantize_cat(cat_map, 4)
    for n in (1, 2):
        power = qmap.power(n)
        field = diagonal_wigner_field(discrete_weyl_symbol(qmap, n))
        expected = np.empty((8, 8), dtype=complex)
        for x in range(8):
            for y in range(8):
                reflection = phase_point_operator(4, x, y)
                expected[x, y] = 4 * np.trace(power @ reflection @ power.conj().T @ reflection)
        assert np.max(np.abs(expected.imag)) < 1e-10
        assert np.max(np.abs(field.values - expected.real)) < 1e-10


@pytest.mark.parametrize(("n", "trace"), [(1, 2.0), (3, 50.0)])
def test_cat_map_field_trace(qmap60, n, trace):
    """D = 60: the cell-weighted field sum is 2 at n = 1 and 50 at n = 3."""
    field = diagonal_wigner_field(discrete_weyl_symbol(qmap60, n))
    assert field.trace() == pytest.approx(trace, rel=1e-6)
    assert trace_field(field) == field.trace()
    assert field.size == 120


def test_zero_step_field_is_uniform(qmap60):
    """n = 0 gives a constant field whose trace is D^2."""
    field = diagonal_wigner_field(discrete_weyl_symbol(qmap60, 0))
    assert np.allclose(field.values, 3600.0)
    assert field.trace() == pytest.approx(3600.0)


@pytest.mark.parametrize("dimension", [30, 60, 120])
def test_trace_identity(cat_map, dimension):
    """sum(P) = D K(n) for n = 0..6."""
    qmap = quantize_cat(cat_map, dimension)
    series = spectral_series_from_matrix(qmap.unitary)
    for n in range(7):
        field = diagonal_wigner_field(discrete_weyl_symbol(qmap, n))
        assert identity_check(field.trace(), series, n) < 1e-8
        assert field.imaginary_residual < 1e-8


def test_symbol_of_matrix_records_trace():
    """Operator trace and Frobenius norm are kept with the symbol."""
    symbol = symbol_of_matrix(2 * np.eye(4), step=0)
    assert symbol.operator_trace == 8
    assert symbol.frobenius_norm_sq == 16
    assert symbol.values.shape == (8, 8)


def test_checked_autocorrelation_is_real():
    """The autocorrelation of any symbol is real; a negative tolerance still fails."""
    rng = np.random.default_rng(3)
    values = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    real, residual = checked_autocorrelation(values, 1e-8)
    assert real.shape == (8, 8)
    assert residual < 1e-12
    with pytest.raises(NumericalCheckError, match="reality"):
        checked_autocorrelation(values, -1.0)


def test_local_extrema():
    """Isolated peaks above the floor are found, periodically."""
    values = np.zeros((6, 6))
    values[1, 1] = 1.0
    values[4, 5] = -0.5
    values[3, 3] = 0.05
    peaks = {tuple(p) for p in local_extrema(values)}
    assert peaks == {(1, 1), (4, 5)}
    assert local_extrema(np.zeros((4, 4))).shape == (0, 2)


def test_fixed_points_are_field_peaks(cat_map, qmap60):
    """At n = 1 both fixed points sit on local maxima."""
    field = diagonal_wigner_field(discrete_weyl_symbol(qmap60, 1))
    point_set = enumerate_periodic_points(cat_map, 1)
    report = peak_match(field, point_set, build_midpoint_catalog(point_set))
    assert report.hit_rate == 1.0
    assert all(entry.distance <= 1.0 for entry in report.entries)
    assert len(report.image_weights) == 4


def test_peak_match_reports_every_point(cat_map, qmap60):
    """n = 3: one entry per periodic point, at least 90% of them on a field peak."""
    field = diagonal_wigner_field(discrete_weyl_symbol(qmap60, 3))
    report = peak_match(field, enumerate_periodic_points(cat_map, 3))
    assert len(report.entries) == 50
    assert report.image_weights == []
    assert report.hit_rate >= 0.9
    assert all(np.isfinite(entry.distance) for entry in report.entries)


def test_midpoint_image_weights(cat_map, qmap60):
    """Each half-shift image collects one entry per ordered pair."""
    field = diagonal_wigner_field(discrete_weyl_symbol(qmap60, 1))
    catalog = build_midpoint_catalog(enumerate_periodic_points(cat_map, 1))
    weights = midpoint_image_weights(field, catalog)
    assert [(w.shift_q, w.shift_p) for w in weights] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert all(w.count == 2 for w in weights)


def test_eigenphases_sum_to_trace(qmap60):
    """sum exp(i theta) = tr U."""
    series = spectral_series_from_matrix(qmap60.unitary)
    assert np.sum(np.exp(1j * series.eigenphases)) == pytest.approx(np.trace(qmap60.unitary), abs=1e-10)


@pytest.mark.parametrize("n", [1, 2])
def test_symbol_plancherel(qmap60, n):
    """The symbol's squared norm is D times the squared Frobenius norm."""
    symbol = discrete_weyl_symbol(qmap60, n)
    assert symbol.frobenius_norm_sq == pytest.approx(60.0)
    assert np.sum(np.abs(symbol.values) ** 2) == pytest.approx(60 * symbol.frobenius_norm_sq, rel=1e-10)


def test_symbol_plancherel_for_any_matrix():
    """Plancherel does not need unitarity."""
    rng = np.random.default_rng(7)
    matrix = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    symbol = symbol_of_matrix(matrix)
    assert np.sum(np.abs(symbol.values) ** 2) == pytest.approx(6 * symbol.frobenius_norm_sq, rel=1e-10)


def test_adjoint_symbol_is_conjugate(qmap60):
    """Reflections are Hermitian, so the symbol of U^dagger is the conjugate symbol of U."""
    unitary = qmap60.unitary
    forward = doubled_grid_symbol(unitary)
    adjoint = doubled_grid_symbol(unitary.conj().T)
    assert np.max(np.abs(adjoint - forward.conj())) < 1e-12
