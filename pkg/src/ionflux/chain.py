"""Ion chain model: trap-frequency profiles, potential, Hessian, equilibrium.

The chain is N ions in individual harmonic traps centered at x_n0 = n*a,
coupled by the full long-range Coulomb repulsion. All functions here are
unit-agnostic formula evaluations except equilibrium_positions, which
nondimensionalizes internally for conditioning and converts back on return.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import CODATA, IonSpecies, PhysicalConstants
from .errors import ConfigurationError, SingularityError, SolverError

GRADED = "graded"
SEGMENTED = "segmented"
EXPLICIT = "explicit"


@dataclass(frozen=True)
class FrequencyProfile:
    """Trap-frequency profile along the chain.

    kind "graded":    omega_n = omega1 + delta_omega*(n-1)/(N-1)
    kind "segmented": sites 1..split_index at omega1, the rest at omega1+delta_omega
    kind "explicit":  omegas given per site
    """

    kind: str
    omega1: float = 0.0          # rad/s
    delta_omega: float = 0.0     # rad/s
    split_index: int = 0         # sites 1..split_index form the low segment
    omegas: tuple = ()           # rad/s, explicit variant only

    @classmethod
    def graded(cls, omega1, delta_omega):
        return cls(kind=GRADED, omega1=omega1, delta_omega=delta_omega)

    @classmethod
    def segmented(cls, omega1, delta_omega, split_index=0):
        # split_index 0 means "decide from N", resolved at materialization
        return cls(kind=SEGMENTED, omega1=omega1, delta_omega=delta_omega,
                   split_index=split_index)

    @classmethod
    def explicit(cls, omegas):
        return cls(kind=EXPLICIT, omegas=tuple(float(w) for w in omegas),
                   omega1=float(omegas[0]) if len(omegas) else 0.0)

    def reference_frequency(self) -> float:
        """The frequency that sets the natural units (omega1)."""
        if self.kind == EXPLICIT:
            if not self.omegas:
                raise ConfigurationError("explicit profile has no frequencies")
            return self.omegas[0]
        return self.omega1


def materialize_frequencies(profile: FrequencyProfile, N: int) -> np.ndarray:
    """Per-site trap frequencies omega_n (rad/s) as a length-N array."""
    if N < 1:
        raise ConfigurationError("chain needs at least one site")
    if profile.kind == EXPLICIT:
        if len(profile.omegas) != N:
            raise ConfigurationError(
                f"explicit profile has {len(profile.omegas)} frequencies for N={N}")
        out = np.asarray(profile.omegas, dtype=float)
    elif profile.kind == GRADED:
        if N == 1:
            out = np.asarray([profile.omega1], dtype=float)
        else:
            n = np.arange(N, dtype=float)
            out = profile.omega1 + profile.delta_omega * n / (N - 1)
    elif profile.kind == SEGMENTED:
        if N == 1:
            out = np.asarray([profile.omega1], dtype=float)
        else:
            split = profile.split_index
            if split == 0:
                split = (N + 1) // 2  # "half" rounded so the low segment gets the extra site
            if not 1 <= split <= N:
                raise ConfigurationError(f"segmented split_index {split} outside 1..{N}")
            out = np.where(np.arange(N) < split,
                           profile.omega1, profile.omega1 + profile.delta_omega)
            out = out.astype(float)
    else:
        raise ConfigurationError(f"unknown profile kind {profile.kind!r}")
    if np.any(out <= 0):
        raise ConfigurationError("frequency profile produces non-positive trap frequency")
    return out


def characteristic_length(species: IonSpecies, omega1: float,
                          constants: PhysicalConstants = CODATA) -> float:
    """Length at which the Coulomb repulsion of two ions balances the trap force.

    l = (q^2 / (4 pi eps0 m omega1^2))^(1/3)
    """
    if omega1 <= 0:
        raise ConfigurationError("omega1 must be positive")
    q2k = species.charge**2 / (4.0 * np.pi * constants.epsilon_0)
    return (q2k / (species.mass * omega1**2)) ** (1.0 / 3.0)


@dataclass(frozen=True)
class ChainConfig:
    """Full chain specification: species, geometry, and frequency profile."""

    N: int
    species: IonSpecies
    lattice_constant: float      # m
    profile: FrequencyProfile
    constants: PhysicalConstants = CODATA

    def __post_init__(self):
        if self.N < 1:
            raise ConfigurationError("N must be at least 1")
        if self.lattice_constant <= 0:
            raise ConfigurationError("lattice constant must be positive")
        materialize_frequencies(self.profile, self.N)  # validates profile against N

    @property
    def trap_centers(self) -> np.ndarray:
        """x_n0 = n*a, n = 1..N (m)."""
        return np.arange(1, self.N + 1, dtype=float) * self.lattice_constant

    def frequencies(self) -> np.ndarray:
        return materialize_frequencies(self.profile, self.N)


@dataclass(frozen=True)
class EquilibriumState:
    positions: np.ndarray        # m, strictly increasing
    gradient_residual: float     # nondimensional force-gradient norm at the solution
    ordered: bool


@dataclass(frozen=True)
class HessianMatrix:
    """Second derivative of the total potential, K_nm (kg/s^2)."""

    K: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ConfigurationError("Hessian must be square")
        object.__setattr__(self, "K", K)

    @property
    def N(self) -> int:
        return self.K.shape[0]


def _check_ordered(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.diff(x) <= 0):
        raise SingularityError("positions must be strictly increasing and distinct")
    return x


def total_potential(config: ChainConfig, x) -> float:
    """Trap plus pairwise-Coulomb potential energy V(x) in joules."""
    x = _check_ordered(x)
    w = config.frequencies()
    m = config.species.mass
    trap = 0.5 * m * np.sum(w**2 * (x - config.trap_centers) ** 2)
    q2k = config.species.charge**2 / (4.0 * np.pi * config.constants.epsilon_0)
    i, j = np.triu_indices(config.N, k=1)
    coulomb = q2k * np.sum(1.0 / (x[j] - x[i]))
    return float(trap + coulomb)


def potential_gradient(config: ChainConfig, x) -> np.ndarray:
    """dV/dx_n in newtons, one entry per ion."""
    x = _check_ordered(x)
    w = config.frequencies()
    m = config.species.mass
    q2k = config.species.charge**2 / (4.0 * np.pi * config.constants.epsilon_0)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, np.inf)
    # ordered positions: sign(x_n - x_l) = sign of the index difference
    coul = -q2k * np.sum(np.sign(dx) / dx**2, axis=1)
    return m * w**2 * (x - config.trap_centers) + coul


def hessian_at(config: ChainConfig, x) -> HessianMatrix:
    """Analytic Hessian of V at x; symmetric with negative off-diagonals."""
    x = _check_ordered(x)
    w = config.frequencies()
    m = config.species.mass
    q2k = config.species.charge**2 / (4.0 * np.pi * config.constants.epsilon_0)
    dx = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dx, np.inf)
    inv3 = 1.0 / dx**3
    K = -2.0 * q2k * inv3
    np.fill_diagonal(K, m * w**2 + 2.0 * q2k * np.sum(inv3, axis=1))
    return HessianMatrix(K=K)


def equilibrium_positions(config: ChainConfig, tol: float = 1e-12,
                          max_iter: int = 200) -> EquilibriumState:
    """Minimize V by damped Newton iteration from the trap centers.

    The iteration runs in natural units (lengths in l, frequencies in omega1)
    so the convergence tolerance is a nondimensional gradient norm. Steps that
    break the ion ordering or fail to reduce the gradient are halved.
    """
    omega1 = config.profile.reference_frequency()
    ell = characteristic_length(config.species, omega1, config.constants)
    if config.lattice_constant < ell:
        warnings.warn(
            "lattice constant below the characteristic length: Coulomb repulsion "
            "exceeds trap confinement and ions may not stay in their traps",
            stacklevel=2)

    wr = config.frequencies() / omega1       # nondimensional frequencies
    centers = config.trap_centers / ell
    wr2 = wr**2

    def grad(u):
        du = u[:, None] - u[None, :]
        np.fill_diagonal(du, np.inf)
        return wr2 * (u - centers) - np.sum(np.sign(du) / du**2, axis=1)

    def hess(u):
        du = np.abs(u[:, None] - u[None, :])
        np.fill_diagonal(du, np.inf)
        inv3 = 1.0 / du**3
        H = -2.0 * inv3
        np.fill_diagonal(H, wr2 + 2.0 * np.sum(inv3, axis=1))
        return H

    u = centers.copy()
    g = grad(u)
    for _ in range(max_iter):
        gnorm = np.linalg.norm(g)
        if gnorm <= tol:
            break
        step = np.linalg.solve(hess(u), g)
        scale = 1.0
        for _ in range(60):
            trial = u - scale * step
            if np.all(np.diff(trial) > 0):
                gt = grad(trial)
                if np.linalg.norm(gt) < gnorm:
                    u, g = trial, gt
                    break
            scale *= 0.5
        else:
            raise SolverError(
                f"equilibrium step rejected repeatedly (residual {gnorm:.3e})")
    else:
        raise SolverError(
            f"equilibrium did not converge in {max_iter} iterations "
            f"(residual {np.linalg.norm(g):.3e})")

    return EquilibriumState(positions=u * ell,
                            gradient_residual=float(np.linalg.norm(grad(u))),
                            ordered=bool(np.all(np.diff(u) > 0)))
