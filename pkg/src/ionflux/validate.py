"""Built-in property suite: fast self-checks behind the `validate` subcommand.

Each check prints one PASS/FAIL line. The suite exercises the invariants the
physics rests on (backend agreement, covariance structure, equipartition,
fluctuation-dissipation, flat equal-bath profiles, analytic derivatives) on
small systems, so a full run stays well under a minute.
"""

import math
import time

import numpy as np

from .chain import (ChainConfig, FrequencyProfile, equilibrium_positions,
                    hessian_at, potential_gradient, total_potential)
from .constants import CODATA, MG24
from .molasses import (LaserBeam, assemble_bath, bath_temperature,
                       diffusion_coefficient, friction_coefficient)
from .steady import (LinearizedSystem, local_temperatures, solve_moments_lyapunov,
                     solve_moments_paper, total_currents)

TWO_PI = 2.0 * math.pi


def _random_system(rng, N):
    """A physical-looking random dissipative system in natural-like units."""
    M = rng.normal(size=(N, N))
    K = M @ M.T + np.eye(N) * (0.5 + rng.uniform())
    gamma = np.zeros(N)
    # at least one bathed site; leave some sites bare like the chain interior
    bathed = rng.choice(N, size=max(1, N // 2), replace=False)
    gamma[bathed] = rng.uniform(0.01, 0.2, size=len(bathed))
    diffusion = np.zeros(N)
    diffusion[bathed] = rng.uniform(0.1, 2.0, size=len(bathed))
    return LinearizedSystem(K=K, gamma=gamma, diffusion=diffusion,
                            left_sites=(0,), right_sites=(N - 1,))


def _rel(a, b):
    denom = np.linalg.norm(b)
    return np.linalg.norm(a - b) / denom if denom > 0 else np.linalg.norm(a)


def check_backend_agreement():
    """Moment solve and covariance solve agree to 1e-8 on random systems."""
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(6):
        N = int(rng.integers(2, 9))
        sys = _random_system(rng, N)
        mom = solve_moments_paper(sys).to_covariance()
        cov = solve_moments_lyapunov(sys)
        worst = max(worst, _rel(mom.matrix, cov.matrix))
    return worst <= 1e-8, f"max rel deviation {worst:.2e} (tol 1e-08)"


def check_covariance_psd():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(6):
        N = int(rng.integers(2, 9))
        cov = solve_moments_lyapunov(_random_system(rng, N))
        eig = np.linalg.eigvalsh(cov.matrix)
        worst = min(worst, eig[0] / eig[-1])
    return worst >= -1e-12, f"min eigenvalue ratio {worst:.2e} (floor -1e-12)"


def check_cross_moment_structure():
    """Stationary <y_n p_n> = 0 and <y_n p_l> = -<y_l p_n>, to 1e-10."""
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(6):
        N = int(rng.integers(2, 9))
        cov = solve_moments_lyapunov(_random_system(rng, N))
        C = cov.cross_block()
        scale = max(np.abs(cov.matrix).max(), 1.0)
        worst = max(worst,
                    np.abs(np.diag(C)).max() / scale,
                    np.abs(C + C.T).max() / scale)
    return worst <= 1e-10, f"max structure violation {worst:.2e} (tol 1e-10)"


def check_single_ion_equipartition():
    """One damped ion: <p^2> = m D / gamma analytically and stochastically."""
    sys = LinearizedSystem(K=np.array([[1.3]]), gamma=np.array([0.05]),
                           diffusion=np.array([0.7]), left_sites=(0,),
                           right_sites=())
    mom = solve_moments_paper(sys)
    pp = float(mom.momentum_block()[0, 0])
    target = sys.mass * 0.7 / 0.05
    rel = abs(pp - target) / target
    if rel > 1e-10:
        return False, f"algebraic <p^2> off by rel {rel:.2e} (tol 1e-10)"

    from .langevin import (EnsembleSpec, IntegratorConfig, LangevinSystem,
                           ensemble_moments)
    lsys = LangevinSystem(
        omegas2=np.array([1.3]), centers=np.array([0.0]), x_eq=np.array([0.0]),
        gamma=np.array([0.05]), diffusion=np.array([0.7]),
        K=np.array([[1.3]]), lattice=1.0, left_sites=(0,), right_sites=(),
        linearized=True)
    integ = IntegratorConfig(dt=0.02, t_end=900.0, burn_in=300.0)
    em = ensemble_moments(lsys, integ, EnsembleSpec(n_trials=48, master_seed=3))
    dev = abs(float(em.mean_pp[0]) - target)
    se = max(float(em.se_pp[0]), 1e-300)
    ok = dev <= 3.0 * se
    return ok, (f"algebraic rel {rel:.2e}; stochastic off by {dev / se:.2f} SE "
                f"(tol 3 SE)")


def check_uniform_equal_bath():
    """Equal baths on a uniform chain: flat profile at T_bath, zero currents."""
    omega1 = TWO_PI * 1e6
    config = ChainConfig(N=6, species=MG24,
                         lattice_constant=25e-6,
                         profile=FrequencyProfile.graded(omega1, 0.0))
    beam = LaserBeam(intensity_ratio=0.08, detuning=-0.05 * MG24.linewidth,
                     species=MG24)
    bath = assemble_bath(config, beam, beam, 2, 2)
    from .steady import natural_linear_system
    sys, units, _ = natural_linear_system(config, bath)
    mom = solve_moments_paper(sys)
    T = local_temperatures(sys, mom, units=units)
    T_bath = bath_temperature(beam.detuning, MG24)
    spread = (T.max() - T.min()) / T_bath
    off = abs(T.mean() - T_bath) / T_bath
    J_L, J_R = total_currents(sys, mom)   # passes its own balance check
    ok = spread <= 1e-8 and off <= 1e-8
    return ok, (f"profile spread {spread:.2e}, offset {off:.2e} (tol 1e-08); "
                f"J_L = {units.watts(J_L):.2e} W")


def check_force_derivatives():
    """Analytic gradient and Hessian against central differences."""
    omega1 = TWO_PI * 1e6
    config = ChainConfig(N=5, species=MG24, lattice_constant=25e-6,
                         profile=FrequencyProfile.graded(omega1, 0.3 * omega1))
    x = equilibrium_positions(config).positions
    rng = np.random.default_rng(5)
    x = x + rng.uniform(-0.02, 0.02, size=len(x)) * config.lattice_constant
    x.sort()

    g = potential_gradient(config, x)
    h = 1e-7 * config.lattice_constant
    g_fd = np.zeros_like(g)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g_fd[i] = (total_potential(config, x + e) - total_potential(config, x - e)) / (2 * h)
    rel_g = _rel(g, g_fd)

    K = hessian_at(config, x).K
    h2 = 1e-4 * config.lattice_constant
    K_fd = np.zeros_like(K)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h2
        K_fd[:, i] = (potential_gradient(config, x + e)
                      - potential_gradient(config, x - e)) / (2 * h2)
    rel_K = _rel(K, K_fd)
    ok = rel_g <= 1e-6 and rel_K <= 1e-5
    return ok, f"gradient rel {rel_g:.2e} (tol 1e-06), hessian rel {rel_K:.2e} (tol 1e-05)"


def check_fluctuation_dissipation():
    """D / (gamma k_B) reproduces the molasses temperature to 1e-14."""
    worst = 0.0
    for frac in (-0.02, -0.05, -0.1, -0.3, -0.5, -0.9, -2.0):
        delta = frac * MG24.linewidth
        beam = LaserBeam(intensity_ratio=0.05, detuning=delta, species=MG24)
        lhs = diffusion_coefficient(beam) / (friction_coefficient(beam) * CODATA.k_B)
        T = bath_temperature(delta, MG24)
        worst = max(worst, abs(lhs - T) / T)
    return worst <= 1e-14, f"max rel deviation {worst:.2e} (tol 1e-14)"


CHECKS = (
    ("backend-agreement", check_backend_agreement),
    ("covariance-psd", check_covariance_psd),
    ("cross-moment-structure", check_cross_moment_structure),
    ("single-ion-equipartition", check_single_ion_equipartition),
    ("uniform-equal-bath", check_uniform_equal_bath),
    ("force-derivatives", check_force_derivatives),
    ("fluctuation-dissipation", check_fluctuation_dissipation),
)


def run_validation(stream=None) -> bool:
    """Run every check; print one line each; True when all pass."""
    ok_all = True
    t0 = time.perf_counter()
    for name, check in CHECKS:
        try:
            ok, detail = check()
        except Exception as err:   # a crashed check is a failed check
            ok, detail = False, f"raised {type(err).__name__}: {err}"
        ok_all &= ok
        if stream is not None:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=stream)
    if stream is not None:
        print(f"{'OK' if ok_all else 'FAILED'} ({len(CHECKS)} checks, "
              f"{time.perf_counter() - t0:.1f} s)", file=stream)
    return ok_all
