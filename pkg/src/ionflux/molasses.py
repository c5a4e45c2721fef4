"""Optical-molasses bath coefficients and their assignment to chain sites.

A red-detuned counter-propagating beam pair acts on an ion as a Langevin bath
with friction gamma and momentum diffusion D (low saturation):

    gamma = -4 hbar k^2 (I/I0) s / (1 + s^2)^2,  s = 2 delta / Gamma
    D     = hbar^2 k^2 (I/I0) Gamma / (1 + s^2)

The associated temperature T = D/(gamma k_B) = -(hbar Gamma / 4 k_B)(1+s^2)/s
is minimized at s = -1 (the Doppler limit hbar Gamma / 2 k_B).
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .chain import ChainConfig
from .constants import CODATA, IonSpecies, PhysicalConstants
from .errors import ConfigurationError, UnreachableTemperatureError

INTENSITY_WARN = 0.2  # low-saturation formulas assume I/I0 well below 1


@dataclass(frozen=True)
class LaserBeam:
    """One molasses beam pair acting on a set of ions."""

    intensity_ratio: float   # I/I0
    detuning: float          # rad/s, must be negative (red) for cooling
    species: IonSpecies

    def __post_init__(self):
        if self.intensity_ratio < 0:
            raise ConfigurationError("intensity ratio must be nonnegative")
        if self.detuning >= 0:
            raise ConfigurationError(
                "positive detuning: bath model requires cooling (delta < 0)")
        if self.intensity_ratio > INTENSITY_WARN:
            warnings.warn(
                f"intensity ratio {self.intensity_ratio:g} is outside the "
                "low-saturation regime the bath formulas assume", stacklevel=2)

    @property
    def saturation_detuning(self) -> float:
        """s = 2 delta / Gamma."""
        return 2.0 * self.detuning / self.species.linewidth


def friction_coefficient(beam: LaserBeam,
                         constants: PhysicalConstants = CODATA) -> float:
    """Velocity drag gamma in kg/s; positive for red detuning."""
    if beam.detuning >= 0:
        raise ConfigurationError("heating configuration: detuning must be negative")
    s = beam.saturation_detuning
    k = beam.species.wavevector
    return -4.0 * constants.hbar * k**2 * beam.intensity_ratio * s / (1.0 + s * s) ** 2


def diffusion_coefficient(beam: LaserBeam,
                          constants: PhysicalConstants = CODATA) -> float:
    """Momentum diffusion D in kg^2 m^2 / s^3."""
    if beam.detuning >= 0:
        raise ConfigurationError("heating configuration: detuning must be negative")
    s = beam.saturation_detuning
    k = beam.species.wavevector
    return (constants.hbar**2 * k**2 * beam.intensity_ratio
            * beam.species.linewidth / (1.0 + s * s))


def bath_temperature(detuning: float, species: IonSpecies,
                     constants: PhysicalConstants = CODATA) -> float:
    """Molasses temperature in kelvin for the given detuning."""
    if detuning >= 0:
        raise ConfigurationError("bath temperature undefined for delta >= 0")
    s = 2.0 * detuning / species.linewidth
    return -(constants.hbar * species.linewidth / (4.0 * constants.k_B)) * (1.0 + s * s) / s


def doppler_limit(species: IonSpecies,
                  constants: PhysicalConstants = CODATA) -> float:
    """Minimum molasses temperature hbar Gamma / (2 k_B), reached at delta = -Gamma/2."""
    return constants.hbar * species.linewidth / (2.0 * constants.k_B)


def detuning_for_temperature(T: float, species: IonSpecies, branch: str = "low",
                             constants: PhysicalConstants = CODATA) -> float:
    """Invert the temperature formula; two detunings give the same T.

    branch "low" returns the root with |2 delta/Gamma| <= 1 (closer to
    resonance), "high" the one with |2 delta/Gamma| >= 1.
    """
    td = doppler_limit(species, constants)
    if T < td * (1.0 - 1e-12):
        raise UnreachableTemperatureError(
            f"temperature {T:.4g} K below the Doppler limit {td:.4g} K")
    # s^2 + tau s + 1 = 0 with tau = 4 k_B T / (hbar Gamma); both roots negative
    tau = 4.0 * constants.k_B * T / (constants.hbar * species.linewidth)
    disc = max(tau * tau - 4.0, 0.0)
    root = math.sqrt(disc)
    s = (-tau + root) / 2.0 if branch == "low" else (-tau - root) / 2.0
    if branch not in ("low", "high"):
        raise ConfigurationError(f"branch must be 'low' or 'high', got {branch!r}")
    return s * species.linewidth / 2.0


@dataclass(frozen=True)
class BathAssignment:
    """Per-site friction and diffusion plus the bathed site index sets (0-based)."""

    left_sites: tuple
    right_sites: tuple
    gamma: np.ndarray       # kg/s, zero off the bathed sites
    diffusion: np.ndarray   # kg^2 m^2 / s^3
    T_left: float           # K
    T_right: float          # K

    @property
    def bathed(self) -> np.ndarray:
        return np.asarray(self.left_sites + self.right_sites, dtype=int)


def assemble_bath(config: ChainConfig, left: LaserBeam, right: LaserBeam,
                  n_left: int, n_right: int) -> BathAssignment:
    """Attach the left beam to the first n_left sites and the right beam to
    the last n_right sites."""
    if n_left < 0 or n_right < 0:
        raise ConfigurationError("bath site counts must be nonnegative")
    if n_left + n_right > config.N:
        raise ConfigurationError(
            f"bath regions overlap: {n_left}+{n_right} sites on a chain of {config.N}")
    c = config.constants
    gamma = np.zeros(config.N)
    diff = np.zeros(config.N)
    ls = tuple(range(n_left))
    rs = tuple(range(config.N - n_right, config.N))
    if n_left:
        gamma[list(ls)] = friction_coefficient(left, c)
        diff[list(ls)] = diffusion_coefficient(left, c)
    if n_right:
        gamma[list(rs)] = friction_coefficient(right, c)
        diff[list(rs)] = diffusion_coefficient(right, c)
    return BathAssignment(
        left_sites=ls, right_sites=rs, gamma=gamma, diffusion=diff,
        T_left=bath_temperature(left.detuning, left.species, c),
        T_right=bath_temperature(right.detuning, right.species, c))
