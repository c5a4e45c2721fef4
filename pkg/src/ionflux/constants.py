"""Physical constants and ion species data.

Constants are pinned CODATA 2018 values. Species presets carry the atomic
data needed for the Doppler-cooling bath coefficients: transition frequency,
natural linewidth, and the laser wavevector (omega0/c unless overridden).
"""

from dataclasses import dataclass, field

from .errors import ConfigurationError

SPEED_OF_LIGHT = 299792458.0  # m/s, exact


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34       # J*s
    k_B: float = 1.380649e-23           # J/K, exact
    epsilon_0: float = 8.8541878128e-12  # F/m
    e_charge: float = 1.602176634e-19   # C, exact
    amu: float = 1.66053906660e-27      # kg

    def __post_init__(self):
        for name in ("hbar", "k_B", "epsilon_0", "e_charge", "amu"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"physical constant {name} must be positive")

    @property
    def coulomb(self) -> float:
        """q^2/(4 pi eps0) for the elementary charge, in J*m."""
        return self.e_charge**2 / (4.0 * 3.141592653589793 * self.epsilon_0)


CODATA = PhysicalConstants()


@dataclass(frozen=True)
class IonSpecies:
    """One ion species: mass, charge, and the cooling-transition data."""

    name: str
    mass: float                  # kg
    charge: float                # C
    transition_frequency: float  # rad/s, omega0 of the cooling transition
    linewidth: float             # rad/s, natural linewidth Gamma
    wavevector: float = field(default=0.0)  # 1/m; 0 means derive as omega0/c

    def __post_init__(self):
        if self.mass <= 0:
            raise ConfigurationError("ion mass must be positive")
        if self.charge == 0:
            raise ConfigurationError("ion charge must be nonzero")
        if self.transition_frequency <= 0 or self.linewidth <= 0:
            raise ConfigurationError("transition frequency and linewidth must be positive")
        if self.wavevector == 0.0:
            object.__setattr__(
                self, "wavevector", self.transition_frequency / SPEED_OF_LIGHT
            )


TWO_PI = 2.0 * 3.141592653589793

# 24Mg+ cooled on 3s 2S1/2 -> 3p 2P1/2.
MG24 = IonSpecies(
    name="Mg24",
    mass=23.985041697 * CODATA.amu,
    charge=CODATA.e_charge,
    transition_frequency=TWO_PI * 1069e12,
    linewidth=TWO_PI * 41.3e6,
)

SPECIES = {MG24.name: MG24}


def species_by_name(name: str) -> IonSpecies:
    try:
        return SPECIES[name]
    except KeyError:
        known = ", ".join(sorted(SPECIES))
        raise ConfigurationError(f"unknown ion species {name!r} (known: {known})") from None
