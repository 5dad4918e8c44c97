"""Pytest configuration and fixtures."""

import math

import pytest

from phasescars.models import DrivenQuarticParams, HarmonicParams, PositionGrid, TorusMap
from phasescars.services.export import ArtifactStore


@pytest.fixture
def cat_map():
    """The standard hyperbolic cat map (2, 1; 3, 2)."""
    return TorusMap()


@pytest.fixture
def quartic():
    """Driven double well with the default drive."""
    return DrivenQuarticParams()


@pytest.fixture
def undriven_quartic():
    """Double well without drive, so energy is conserved."""
    return DrivenQuarticParams(drive=0.0)


@pytest.fixture
def harmonic():
    """Undriven unit-frequency harmonic oscillator."""
    return HarmonicParams()


@pytest.fixture
def harmonic_grid():
    """Square phase-space grid (dq = dp) for the harmonic oscillator with hbar = 1."""
    return PositionGrid(n_points=128, box_length=math.sqrt(2 * math.pi * 128), hbar=1.0)


@pytest.fixture
def small_grid():
    """Coarse grid for fast Floquet checks."""
    return PositionGrid(n_points=32, box_length=math.sqrt(2 * math.pi * 32), hbar=1.0)


@pytest.fixture
def store(tmp_path):
    """Artifact store rooted in a temporary directory."""
    return ArtifactStore(tmp_path)
