"""Natural unit system for the chain: mass m, time 1/omega1, length l.

In these units the Coulomb prefactor q^2/(4 pi eps0) equals 1 and the moment
linear system is well conditioned (SI position and momentum covariances differ
by ~30 orders of magnitude; natural ones are O(1e-2)). Conversions happen only
at I/O boundaries.
"""

from dataclasses import dataclass

from .chain import ChainConfig, characteristic_length
from .constants import CODATA, PhysicalConstants


@dataclass(frozen=True)
class NaturalUnits:
    mass: float     # kg, one ion
    time: float     # s, 1/omega1
    length: float   # m, characteristic length l
    constants: PhysicalConstants = CODATA

    @classmethod
    def for_chain(cls, config: ChainConfig) -> "NaturalUnits":
        omega1 = config.profile.reference_frequency()
        ell = characteristic_length(config.species, omega1, config.constants)
        return cls(mass=config.species.mass, time=1.0 / omega1, length=ell,
                   constants=config.constants)

    @property
    def omega(self) -> float:
        return 1.0 / self.time

    @property
    def energy(self) -> float:
        return self.mass * self.length**2 / self.time**2

    @property
    def power(self) -> float:
        return self.energy / self.time

    @property
    def momentum(self) -> float:
        return self.mass * self.length / self.time

    # SI -> natural
    def length_natural(self, x_m):
        return x_m / self.length

    def frequency_natural(self, w_si):
        return w_si * self.time

    def stiffness_natural(self, k_si):
        return k_si * self.time**2 / self.mass

    def friction_natural(self, gamma_si):
        return gamma_si * self.time / self.mass

    def diffusion_natural(self, d_si):
        return d_si * self.time / self.momentum**2

    def theta(self, T_kelvin):
        """Nondimensional temperature k_B T / (m l^2 omega1^2)."""
        return self.constants.k_B * T_kelvin / self.energy

    # natural -> SI
    def meters(self, x_nat):
        return x_nat * self.length

    def watts(self, p_nat):
        return p_nat * self.power

    def kelvin(self, theta):
        return theta * self.energy / self.constants.k_B

    def momentum_si(self, p_nat):
        return p_nat * self.momentum
