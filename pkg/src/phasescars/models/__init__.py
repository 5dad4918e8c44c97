"""Data models for the application."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from enum import StrEnum
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# --- Enums ---


class Subcommand(StrEnum):
    CAT_SCARS = "cat-scars"
    OSCILLATOR_SCARS = "oscillator-scars"
    FORM_FACTOR = "form-factor"
    MIDPOINT_SURFACE = "midpoint-surface"
    POINCARE = "poincare"
    PERIODIC_POINTS = "periodic-points"


class SystemKind(StrEnum):
    CAT = "cat"
    OSCILLATOR = "oscillator"
    HARMONIC = "harmonic"


class OrbitKind(StrEnum):
    ELLIPTIC = "elliptic"
    HYPERBOLIC = "hyperbolic"
    MARGINAL = "marginal"


class PointKind(StrEnum):
    FIXED = "fixed"
    MIDPOINT = "midpoint"


class WeightKind(StrEnum):
    MAP = "map"
    SCAR = "scar"
    TUBE = "tube"


class CurveKind(StrEnum):
    CIRCLE = "circle"
    ROUNDED_TRIANGLE = "rounded-triangle"
    KNOT = "knot"
    PERIODIC_ORBIT = "periodic-orbit"


# --- Torus ---


class TorusMap(BaseModel):
    """Integer 2x2 matrix acting on (q, p) of the unit torus, det = 1."""

    model_config = ConfigDict(frozen=True)

    a: int = 2
    b: int = 1
    c: int = 3
    d: int = 2

    @model_validator(mode="after")
    def _check_determinant(self) -> TorusMap:
        if self.a * self.d - self.b * self.c != 1:
            raise ValueError(f"Torus map must have determinant 1, got {self.a * self.d - self.b * self.c}")
        return self

    @property
    def trace(self) -> int:
        return self.a + self.d

    @property
    def is_hyperbolic(self) -> bool:
        return abs(self.trace) > 2

    @property
    def is_quantizable(self) -> bool:
        """Both ab and cd even, so the map quantizes without phase shifts."""
        return (self.a * self.b) % 2 == 0 and (self.c * self.d) % 2 == 0

    @property
    def matrix(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return ((self.a, self.b), (self.c, self.d))


# --- Driven oscillators ---


class DrivenOscillator(BaseModel, ABC):
    """One degree of freedom with potential V0(q) + S q cos(omega t + phase).

    Concrete systems supply the static potential, its derivatives and the
    shell geometry; the drive and the energy are shared.
    """

    model_config = ConfigDict(frozen=True)

    mass: float = Field(default=1.0, gt=0)
    omega: float = Field(default=0.95, gt=0)
    phase: float = math.pi / 3
    drive: float = 0.07

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega

    @property
    @abstractmethod
    def reference_energy(self) -> float: ...

    @property
    @abstractmethod
    def minimum_energy(self) -> float: ...

    @property
    @abstractmethod
    def reference_frequency(self) -> float:
        """Small-oscillation frequency that sets the coherent-state width."""

    @abstractmethod
    def static_potential(self, q): ...

    @abstractmethod
    def static_force(self, q): ...

    @abstractmethod
    def static_force_gradient(self, q): ...

    @abstractmethod
    def turning_point(self, energy: float) -> float: ...

    def coherent_width(self, hbar: float) -> float:
        """Position width sqrt(hbar / m Omega) of the minimum-uncertainty Gaussian."""
        return math.sqrt(hbar / (self.mass * self.reference_frequency))

    def potential(self, q, t):
        return self.static_potential(q) + self.drive * q * np.cos(self.omega * t + self.phase)

    def force(self, q, t):
        return self.static_force(q) - self.drive * np.cos(self.omega * t + self.phase)

    def force_gradient(self, q, t):  # noqa: ARG002
        return self.static_force_gradient(q)

    def energy(self, q, p, t):
        return p**2 / (2 * self.mass) + self.potential(q, t)

    def max_momentum(self, energy: float) -> float:
        """Largest |p| reached on the undriven shell at ``energy``."""
        return math.sqrt(2 * self.mass * max(energy - self.minimum_energy, 0.0))


class DrivenQuarticParams(DrivenOscillator):
    """Symmetric double well with barrier height ``barrier`` and a periodic drive."""

    omega0: float = 1.0
    barrier: float = Field(default=192.0, gt=0)

    @field_validator("omega0")
    @classmethod
    def _nonzero_omega0(cls, value: float) -> float:
        if value == 0:
            raise ValueError("omega0 must be nonzero")
        return value

    @property
    def _quadratic(self) -> float:
        return self.mass * self.omega0**2 / 4

    @property
    def _quartic(self) -> float:
        return self.mass**2 * self.omega0**4 / (64 * self.barrier)

    @property
    def reference_energy(self) -> float:
        return self.barrier

    @property
    def minimum_energy(self) -> float:
        return -self.barrier

    @property
    def well_position(self) -> float:
        return math.sqrt(8 * self.barrier / (self.mass * self.omega0**2))

    @property
    def well_frequency(self) -> float:
        """Small-oscillation frequency at the bottom of either well."""
        return abs(self.omega0)

    @property
    def reference_frequency(self) -> float:
        return self.well_frequency

    def static_potential(self, q):
        return -self._quadratic * q**2 + self._quartic * q**4

    def static_force(self, q):
        return 2 * self._quadratic * q - 4 * self._quartic * q**3

    def static_force_gradient(self, q):
        return 2 * self._quadratic - 12 * self._quartic * q**2

    def turning_point(self, energy: float) -> float:
        if energy < self.minimum_energy:
            raise ValueError(f"Energy {energy} lies below the well bottom {self.minimum_energy}")
        u = (self._quadratic + math.sqrt(self._quadratic**2 + 4 * self._quartic * energy)) / (2 * self._quartic)
        return math.sqrt(u)


class HarmonicParams(DrivenOscillator):
    """Driven harmonic oscillator, the quadratic limit of the Weyl propagator."""

    harmonic_frequency: float = Field(default=1.0, gt=0)
    drive: float = 0.0
    energy_scale: float = Field(default=10.0, gt=0)

    @property
    def reference_energy(self) -> float:
        return self.energy_scale

    @property
    def minimum_energy(self) -> float:
        return 0.0

    @property
    def reference_frequency(self) -> float:
        return self.harmonic_frequency

    def static_potential(self, q):
        return 0.5 * self.mass * self.harmonic_frequency**2 * q**2

    def static_force(self, q):
        return -self.mass * self.harmonic_frequency**2 * q

    def static_force_gradient(self, q):
        return -self.mass * self.harmonic_frequency**2 + 0.0 * q

    def turning_point(self, energy: float) -> float:
        if energy < 0:
            raise ValueError(f"Energy {energy} lies below the potential minimum 0")
        return math.sqrt(2 * energy / (self.mass * self.harmonic_frequency**2))


# --- Phase space ---


class PhasePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    q: float
    p: float
    t: float = 0.0

    @model_validator(mode="after")
    def _finite(self) -> PhasePoint:
        if not all(math.isfinite(v) for v in (self.q, self.p, self.t)):
            raise ValueError("Phase point coordinates must be finite")
        return self


class PhaseWindow(BaseModel):
    """Rectangle of phase space sampled on an inclusive regular grid."""

    model_config = ConfigDict(frozen=True)

    q_min: float
    q_max: float
    p_min: float
    p_max: float

    @model_validator(mode="after")
    def _ordered(self) -> PhaseWindow:
        if not (self.q_max > self.q_min and self.p_max > self.p_min):
            raise ValueError("Phase window bounds must satisfy q_min < q_max and p_min < p_max")
        return self

    def axes(self, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        nq, np_ = shape
        if nq < 2 or np_ < 2:
            raise ValueError("Phase window grids need at least two nodes per axis")
        return np.linspace(self.q_min, self.q_max, nq), np.linspace(self.p_min, self.p_max, np_)

    def cell_size(self, shape: tuple[int, int]) -> tuple[float, float]:
        return (self.q_max - self.q_min) / (shape[0] - 1), (self.p_max - self.p_min) / (shape[1] - 1)


class EnergyWindow(BaseModel):
    """Uniform energy density on [e_min, e_max]."""

    model_config = ConfigDict(frozen=True)

    e_min: float
    e_max: float

    @model_validator(mode="after")
    def _ordered(self) -> EnergyWindow:
        if not self.e_max > self.e_min:
            raise ValueError("Energy window needs e_max > e_min")
        return self

    @property
    def width(self) -> float:
        return self.e_max - self.e_min

    def density(self, energy):
        energy = np.asarray(energy, dtype=float)
        return np.where((energy >= self.e_min) & (energy <= self.e_max), 1.0 / self.width, 0.0)


class PositionGrid(BaseModel):
    """N positions spaced L/N on a periodic box of length L, momentum spacing 2 pi hbar / L."""

    model_config = ConfigDict(frozen=True)

    n_points: int = Field(gt=0)
    box_length: float = Field(gt=0)
    hbar: float = Field(default=10.0, gt=0)

    @field_validator("n_points")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value < 2 or value & (value - 1):
            raise ValueError(f"Grid size must be a power of two, got {value}")
        return value

    @classmethod
    def for_window(
        cls, params: DrivenOscillator, *, hbar: float, n_points: int, energy: float, margin: float = 1.1
    ) -> PositionGrid:
        """Box twice the classical extent, so the shell sits in the central half."""
        return cls(n_points=n_points, box_length=4 * margin * params.turning_point(energy), hbar=hbar)

    @property
    def dq(self) -> float:
        return self.box_length / self.n_points

    @property
    def dp(self) -> float:
        return 2 * math.pi * self.hbar / self.box_length

    @property
    def p_nyquist(self) -> float:
        return math.pi * self.hbar * self.n_points / self.box_length

    @property
    def positions(self) -> np.ndarray:
        return -self.box_length / 2 + self.dq * np.arange(self.n_points)

    @property
    def momenta(self) -> np.ndarray:
        """Momenta in FFT order."""
        return 2 * math.pi * self.hbar * np.fft.fftfreq(self.n_points, d=self.dq)

    @property
    def cell_area(self) -> float:
        """Area of one doubled-grid cell."""
        return self.dq * self.dp / 4

    def check_resolution(self, params: DrivenOscillator, energy: float) -> None:
        """Require a factor-two margin in both position and momentum."""
        q_turn = params.turning_point(energy)
        p_max = params.max_momentum(energy)
        if self.box_length < 4 * q_turn:
            raise ValueError(
                f"Box length {self.box_length:.4g} is below twice the classical extent {4 * q_turn:.4g}; "
                "increase box_length"
            )
        if self.p_nyquist < 2 * p_max:
            needed = 2 * p_max * self.box_length / (math.pi * self.hbar)
            raise ValueError(
                f"Momentum cutoff {self.p_nyquist:.4g} is below twice the classical maximum {2 * p_max:.4g}; "
                f"use at least {needed:.0f} grid points or a larger hbar"
            )


# --- Periodic orbits ---


class PeriodicPointRecord(BaseModel):
    """Converged stroboscopic periodic point of a driven oscillator."""

    q: float
    p: float
    t0: float
    periods: int = Field(ge=1)
    primitive_period: int | None = Field(default=None, ge=1, description="Smallest k with Phi_kT(x) = x")
    period_time: float
    monodromy: list[list[float]]
    kind: OrbitKind
    residual: float

    @model_validator(mode="after")
    def _primitive_divides(self) -> PeriodicPointRecord:
        if self.primitive_period is None:
            self.primitive_period = self.periods
        if self.periods % self.primitive_period:
            raise ValueError(f"Primitive period {self.primitive_period} does not divide {self.periods}")
        return self

    @property
    def primitive_time(self) -> float:
        return self.period_time * (self.primitive_period or self.periods) / self.periods

    @property
    def trace(self) -> float:
        return self.monodromy[0][0] + self.monodromy[1][1]

    @property
    def stability_denominator(self) -> float:
        """|det(M - I)|."""
        m = self.monodromy
        return abs((m[0][0] - 1) * (m[1][1] - 1) - m[0][1] * m[1][0])


# --- Reports ---


class MonteCarloEstimate(BaseModel):
    value: float
    stderr: float
    samples: int


class PeakMatchEntry(BaseModel):
    label: str
    q: float
    p: float
    distance: float
    hit: bool


class MidpointImageWeight(BaseModel):
    shift_q: int
    shift_p: int
    count: int
    mean_value: float
    hits: int


class PeakMatchReport(BaseModel):
    entries: list[PeakMatchEntry] = Field(default_factory=list)
    image_weights: list[MidpointImageWeight] = Field(default_factory=list)
    tolerance: float
    hit_rate: float


class DiagonalApproximationRow(BaseModel):
    n: int
    tau: float
    form_factor: float
    classical_prediction: float
    ratio: float | None


class TransportReport(BaseModel):
    time: float
    l1_error: float
    quantum_norm: float
    classical_norm: float


# --- Run configuration ---

DEFAULT_SYSTEMS = {
    Subcommand.CAT_SCARS: SystemKind.CAT,
    Subcommand.OSCILLATOR_SCARS: SystemKind.OSCILLATOR,
    Subcommand.FORM_FACTOR: SystemKind.CAT,
    Subcommand.MIDPOINT_SURFACE: SystemKind.CAT,
    Subcommand.POINCARE: SystemKind.OSCILLATOR,
    Subcommand.PERIODIC_POINTS: SystemKind.CAT,
}

CONTINUUM_ONLY = (Subcommand.OSCILLATOR_SCARS, Subcommand.POINCARE)


class RunConfig(BaseModel):
    """Every parameter of one CLI run; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    subcommand: Subcommand
    system: SystemKind | None = None

    # Torus map
    map_a: int = 2
    map_b: int = 1
    map_c: int = 3
    map_d: int = 2
    dimension: int = Field(default=60, gt=0)
    iterations: int = Field(default=1, ge=0)
    max_iterations: int = Field(default=6, ge=0)
    beta: int = Field(default=2, ge=1, le=2)

    # Oscillator
    mass: float = Field(default=1.0, gt=0)
    omega0: float = 1.0
    omega: float = Field(default=0.95, gt=0)
    phase: float = math.pi / 3
    drive: float = 0.07
    barrier: float = Field(default=192.0, gt=0)
    harmonic_frequency: float = Field(default=1.0, gt=0)

    # Quantum grid
    hbar: float = Field(default=10.0, gt=0)
    grid_points: int = 512
    box_length: float | None = None
    window_energy: float | None = None

    # Integration
    steps_per_period: int = Field(default=2048, gt=0)
    section_steps_per_period: int = Field(default=256, gt=0)
    integrator_order: int = 4
    t0: float = 0.0
    periods: int = Field(default=1, ge=0)
    floquet_steps: int = Field(default=2048, gt=0, description="Split-operator steps per period before doubling")
    floquet_max_steps: int = Field(default=32768, gt=0)

    # Classical analysis
    smoothing: float | None = Field(default=None, gt=0)
    smoothing_window: int = Field(default=1, ge=1, description="Boxcar width over n for the form factor")
    coherent_width: float | None = Field(default=None, gt=0, description="Position width of the coherent states")
    newton_grid: int = Field(default=12, gt=0)
    newton_max_iter: int = Field(default=30, gt=0)
    section_seeds: int = Field(default=40, gt=0)
    section_periods: int = Field(default=200, gt=0)
    mc_samples: int = Field(default=20000, gt=0)
    energy_min: float | None = None
    energy_max: float | None = None

    # Midpoint surface
    curve: CurveKind = CurveKind.KNOT
    curve_samples: int = Field(default=64, gt=0)

    # Output and execution
    color_limit: float | None = Field(default=None, gt=0)
    seed: int = 20070101
    threads: int = Field(default=1, gt=0)
    output_dir: Path = Path("results")

    # Tolerances
    identity_tolerance: float = Field(default=1e-8, gt=0)
    unitarity_tolerance: float = Field(default=1e-10, gt=0)
    floquet_unitarity_tolerance: float = Field(default=1e-8, gt=0)
    floquet_convergence_tolerance: float = Field(default=1e-6, gt=0)
    quadratic_limit_tolerance: float = Field(default=1e-2, gt=0)

    @field_validator("integrator_order")
    @classmethod
    def _supported_order(cls, value: int) -> int:
        if value not in (2, 4):
            raise ValueError("integrator_order must be 2 or 4")
        return value

    @field_validator("smoothing_window")
    @classmethod
    def _odd_window(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("smoothing_window must be odd")
        return value

    @model_validator(mode="after")
    def _check_system(self) -> RunConfig:
        if self.system is None:
            self.system = DEFAULT_SYSTEMS[self.subcommand]
            if self.curve == CurveKind.PERIODIC_ORBIT and self.subcommand == Subcommand.MIDPOINT_SURFACE:
                self.system = SystemKind.OSCILLATOR
        if self.subcommand == Subcommand.CAT_SCARS and self.system != SystemKind.CAT:
            raise ValueError("cat-scars runs the cat map only")
        if self.subcommand in CONTINUUM_ONLY and self.system == SystemKind.CAT:
            raise ValueError(f"{self.subcommand} needs system=oscillator or system=harmonic")
        orbit_curve = self.curve == CurveKind.PERIODIC_ORBIT
        if self.subcommand == Subcommand.MIDPOINT_SURFACE and orbit_curve and self.system == SystemKind.CAT:
            raise ValueError("curve=periodic-orbit needs system=oscillator or system=harmonic")
        if self.system == SystemKind.CAT:
            tmap = self.torus_map
            if self.subcommand in (Subcommand.CAT_SCARS, Subcommand.FORM_FACTOR):
                if not tmap.is_quantizable:
                    raise ValueError("Torus map needs ab and cd even to be quantized")
                if self.dimension % 2:
                    raise ValueError("Hilbert-space dimension must be even")
        if self.floquet_max_steps < self.floquet_steps:
            raise ValueError("floquet_max_steps must be at least floquet_steps")
        return self

    @property
    def torus_map(self) -> TorusMap:
        return TorusMap(a=self.map_a, b=self.map_b, c=self.map_c, d=self.map_d)

    @property
    def oscillator_params(self) -> DrivenOscillator:
        common = {"mass": self.mass, "omega": self.omega, "phase": self.phase, "drive": self.drive}
        if self.system == SystemKind.HARMONIC:
            energy = self.window_energy if self.window_energy is not None else 20 * self.hbar * self.harmonic_frequency
            return HarmonicParams(harmonic_frequency=self.harmonic_frequency, energy_scale=energy, **common)
        return DrivenQuarticParams(omega0=self.omega0, barrier=self.barrier, **common)

    @property
    def shell_energy(self) -> float:
        if self.window_energy is not None:
            return self.window_energy
        return self.oscillator_params.reference_energy

    @property
    def energy_window(self) -> EnergyWindow:
        e_max = self.energy_max if self.energy_max is not None else self.shell_energy
        e_min = self.energy_min if self.energy_min is not None else e_max - 0.1 * abs(e_max) - 1.0
        return EnergyWindow(e_min=e_min, e_max=e_max)

    def position_grid(self) -> PositionGrid:
        if self.box_length is not None:
            return PositionGrid(n_points=self.grid_points, box_length=self.box_length, hbar=self.hbar)
        return PositionGrid.for_window(
            self.oscillator_params, hbar=self.hbar, n_points=self.grid_points, energy=self.shell_energy
        )
