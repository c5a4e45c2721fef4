"""Stochastic integrator checks: conservation limits, stationary moments,
convergence behaviour, and the guard rails."""

import math
from dataclasses import replace

import numpy as np
import pytest

from ionflux import (
    MG24,
    ChainConfig,
    ConfigurationError,
    FrequencyProfile,
    InstabilityError,
    LaserBeam,
    assemble_bath,
    characteristic_length,
    current_time_series,
    default_integrator,
    ensemble_moments,
    langevin_system,
    simulate_trajectory,
    steady_state_report,
    total_energy,
)
from ionflux.langevin import (
    EULER,
    LEAPFROG,
    EnsembleSpec,
    IntegratorConfig,
    LangevinSystem,
)

TWO_PI = 2.0 * math.pi
OMEGA1 = TWO_PI * 1.0e6


def single_site(gamma=0.3, diffusion=0.21, stiffness=1.0):
    """Hand-built overdamped-free single ion: an Ornstein-Uhlenbeck pair."""
    return LangevinSystem(
        omegas2=np.array([stiffness]), centers=np.array([0.0]),
        x_eq=np.array([0.0]), gamma=np.array([gamma]),
        diffusion=np.array([diffusion]), K=np.array([[stiffness]]),
        lattice=1.0, left_sites=(0,), right_sites=(),
        mass=1.0, linearized=True)


@pytest.fixture(scope="module")
def ou_integ():
    return IntegratorConfig(dt=0.04, t_end=120.0, burn_in=30.0, scheme=LEAPFROG)


@pytest.fixture(scope="module")
def chain5():
    """Five-ion graded chain with two-site molasses baths on each end."""
    ell = characteristic_length(MG24, OMEGA1)
    cfg = ChainConfig(N=5, species=MG24, lattice_constant=4.76 * ell,
                      profile=FrequencyProfile.graded(OMEGA1, 0.3 * OMEGA1))
    bath = assemble_bath(cfg, LaserBeam(0.08, -0.02 * MG24.linewidth, MG24),
                         LaserBeam(0.08, -0.1 * MG24.linewidth, MG24), 2, 2)
    return cfg, bath


@pytest.fixture(scope="module")
def chain5_integ(chain5):
    cfg, bath = chain5
    system, _ = langevin_system(cfg, bath)
    tau = system.mass / system.gamma[system.gamma > 0].min()
    return IntegratorConfig(dt=0.02 / system.omega_max, t_end=50 * tau,
                            burn_in=15 * tau, scheme=LEAPFROG)


@pytest.fixture(scope="module")
def chain5_ensembles(chain5, chain5_integ):
    # one nonlinear and one linearized run off the same seed ladder
    cfg, bath = chain5
    ens = EnsembleSpec(n_trials=48, master_seed=31)
    system, units = langevin_system(cfg, bath, linearized=False)
    em = ensemble_moments(system, chain5_integ, ens)
    linear, _ = langevin_system(cfg, bath, linearized=True)
    em_lin = ensemble_moments(linear, chain5_integ, ens)
    return units, em, em_lin


def test_ou_moments_match_closed_form(ou_integ):
    """<p^2> = m D / gamma and <y^2> = D / (gamma k) for a damped ion."""
    system = single_site()
    em = ensemble_moments(system, ou_integ, EnsembleSpec(n_trials=2000,
                                                         master_seed=11))
    assert abs(em.mean_pp[0] - 0.7) < 3 * em.se_pp[0]
    assert abs(em.mean_yy[0] - 0.7) < 3 * em.se_yy[0]


def test_euler_scheme_moments(ou_integ):
    system = single_site()
    integ = replace(ou_integ, dt=0.01, scheme=EULER)
    em = ensemble_moments(system, integ, EnsembleSpec(n_trials=1000,
                                                      master_seed=51))
    assert abs(em.mean_pp[0] - 0.7) < 3 * em.se_pp[0]
    assert abs(em.mean_yy[0] - 0.7) < 3 * em.se_yy[0]


def test_dt_halving_within_noise(ou_integ):
    """Halving the step moves the moments by less than the sampling noise."""
    system = single_site()
    coarse = ensemble_moments(system, ou_integ,
                              EnsembleSpec(n_trials=2000, master_seed=19))
    fine = ensemble_moments(system, replace(ou_integ, dt=0.02),
                            EnsembleSpec(n_trials=2000, master_seed=20))
    se_pp = math.hypot(coarse.se_pp[0], fine.se_pp[0])
    se_yy = math.hypot(coarse.se_yy[0], fine.se_yy[0])
    assert abs(coarse.mean_pp[0] - fine.mean_pp[0]) < se_pp
    assert abs(coarse.mean_yy[0] - fine.mean_yy[0]) < se_yy


def test_se_shrinks_with_sqrt_trials(ou_integ):
    system = single_site()
    small = ensemble_moments(system, ou_integ,
                             EnsembleSpec(n_trials=400, master_seed=21))
    large = ensemble_moments(system, ou_integ,
                             EnsembleSpec(n_trials=800, master_seed=22))
    ratio = small.se_pp[0] / large.se_pp[0]
    assert math.sqrt(2.0) / 1.2 < ratio < math.sqrt(2.0) * 1.2


def test_ensembles_are_reproducible(ou_integ):
    system = single_site()
    ens = EnsembleSpec(n_trials=64, master_seed=77)
    a = ensemble_moments(system, ou_integ, ens)
    b = ensemble_moments(system, ou_integ, ens)
    assert np.array_equal(a.mean_pp, b.mean_pp)
    assert np.array_equal(a.mean_yy, b.mean_yy)
    assert np.array_equal(a.J_L, b.J_L)
    other = ensemble_moments(system, ou_integ,
                             EnsembleSpec(n_trials=64, master_seed=78))
    assert not np.array_equal(a.mean_pp, other.mean_pp)


def test_thread_count_does_not_change_results(ou_integ, monkeypatch):
    system = single_site()
    ens = EnsembleSpec(n_trials=32, master_seed=9)
    monkeypatch.setenv("IONFLUX_THREADS", "1")
    serial = ensemble_moments(system, ou_integ, ens)
    monkeypatch.setenv("IONFLUX_THREADS", "3")
    threaded = ensemble_moments(system, ou_integ, ens)
    assert np.array_equal(serial.mean_pp, threaded.mean_pp)
    assert np.array_equal(serial.mean_yy, threaded.mean_yy)
    assert np.array_equal(serial.J_L, threaded.J_L)
    assert np.array_equal(serial.J_R, threaded.J_R)


def test_chain_ensemble_matches_algebraic(chain5, chain5_ensembles):
    cfg, bath = chain5
    units, em, _ = chain5_ensembles
    report = steady_state_report(cfg, bath)
    T_sim = units.kelvin(em.mean_pp)
    se_T = units.kelvin(em.se_pp)
    assert np.all(np.abs(T_sim - report.temperatures) < 3 * se_T)
    assert abs(units.watts(em.J_L) - report.J_L) < 3 * units.watts(em.se_J_L)
    assert abs(units.watts(em.J_R) - report.J_R) < 3 * units.watts(em.se_J_R)


def test_nonlinear_matches_linearized_within_noise(chain5_ensembles):
    # same seeds, so the sampling noise largely cancels in the difference
    _, em, em_lin = chain5_ensembles
    se = np.hypot(em.se_pp, em_lin.se_pp)
    assert np.all(np.abs(em.mean_pp - em_lin.mean_pp) < 3 * se)
    se_J = math.hypot(em.se_J_L, em_lin.se_J_L)
    assert abs(em.J_L - em_lin.J_L) < 3 * se_J


def test_cold_start_draws_heat_from_both_baths(chain5):
    """From rest both baths initially pump energy into the chain."""
    cfg, bath = chain5
    system, _ = langevin_system(cfg, bath)
    tau = system.mass / system.gamma[system.gamma > 0].min()
    integ = IntegratorConfig(dt=0.02 / system.omega_max, t_end=2.0 * tau,
                             burn_in=1.0 * tau, scheme=LEAPFROG,
                             series_window=0.25 * tau)
    series = current_time_series(system, integ,
                                 EnsembleSpec(n_trials=64, master_seed=41))
    assert series.J_L[0] > 3 * series.se_J_L[0]
    assert series.J_R[0] > 3 * series.se_J_R[0]


def test_damped_chain_relaxes():
    """With drag but no drive the energy decays monotonically to zero."""
    ell = characteristic_length(MG24, OMEGA1)
    cfg = ChainConfig(N=2, species=MG24, lattice_constant=4.76 * ell,
                      profile=FrequencyProfile.graded(OMEGA1, 0.5 * OMEGA1))
    quiet = LaserBeam(0.0, -0.5 * MG24.linewidth, MG24)
    base, _ = langevin_system(cfg, assemble_bath(cfg, quiet, quiet, 1, 1),
                              linearized=True)
    system = replace(base, gamma=np.array([0.5, 0.5]),
                     diffusion=np.zeros(2), left_sites=(0,), right_sites=(1,))
    integ = IntegratorConfig(dt=0.02 / system.omega_max, t_end=80.0,
                             burn_in=0.0, scheme=LEAPFROG, series_window=2.0)
    x0 = system.x_eq + np.array([0.03, -0.02]) * system.lattice
    p0 = np.array([0.4, -0.2])
    stats = simulate_trajectory(system, integ, seed=0, x0=x0, p0=p0)
    energy = stats.series_energy
    assert np.all(np.diff(energy) <= 1e-12 * energy[0])
    assert np.max(np.abs(stats.final_p)) <= 1e-6 * np.max(np.abs(p0))


def test_energy_helper_forms():
    ell = characteristic_length(MG24, OMEGA1)
    cfg = ChainConfig(N=2, species=MG24, lattice_constant=4.76 * ell,
                      profile=FrequencyProfile.graded(OMEGA1, 0.5 * OMEGA1))
    quiet = LaserBeam(0.0, -0.5 * MG24.linewidth, MG24)
    bath = assemble_bath(cfg, quiet, quiet, 1, 1)
    p = np.array([0.3, -0.1])
    for linearized in (False, True):
        system, _ = langevin_system(cfg, bath, linearized=linearized)
        kinetic = (total_energy(system, system.x_eq, p)
                   - total_energy(system, system.x_eq, np.zeros(2)))
        assert kinetic == pytest.approx(np.sum(p**2) / (2 * system.mass),
                                        rel=1e-12)
    # for small displacements the full potential is quadratic to leading order
    nonlinear, _ = langevin_system(cfg, bath, linearized=False)
    y = 1e-3 * nonlinear.lattice * np.array([1.0, -1.0])
    dE = (total_energy(nonlinear, nonlinear.x_eq + y, np.zeros(2))
          - total_energy(nonlinear, nonlinear.x_eq, np.zeros(2)))
    assert dE == pytest.approx(0.5 * y @ nonlinear.K @ y, rel=1e-3)


def test_timestep_guard(chain5):
    cfg, bath = chain5
    system, _ = langevin_system(cfg, bath)
    integ = IntegratorConfig(dt=0.06 / system.omega_max, t_end=1.0,
                             burn_in=0.0, scheme=LEAPFROG)
    with pytest.raises(ConfigurationError, match="stability guard"):
        simulate_trajectory(system, integ, seed=0)


def test_blowup_detected(chain5):
    # overlapping ions liberate far more energy than the traps can hold
    cfg, bath = chain5
    system, _ = langevin_system(cfg, bath)
    integ = IntegratorConfig(dt=0.02 / system.omega_max, t_end=50.0,
                             burn_in=0.0, scheme=LEAPFROG)
    x0 = system.x_eq.copy()
    x0[2] = x0[1] + 1e-9 * system.lattice
    with pytest.raises(InstabilityError, match="blew up at step"):
        simulate_trajectory(system, integ, seed=0, x0=x0)


def test_requires_dissipation():
    ell = characteristic_length(MG24, OMEGA1)
    cfg = ChainConfig(N=2, species=MG24, lattice_constant=4.76 * ell,
                      profile=FrequencyProfile.graded(OMEGA1, 0.5 * OMEGA1))
    quiet = LaserBeam(0.0, -0.5 * MG24.linewidth, MG24)
    system, _ = langevin_system(cfg, assemble_bath(cfg, quiet, quiet, 1, 1))
    with pytest.raises(ConfigurationError, match="no dissipation"):
        default_integrator(system)


def test_undamped_chain_conserves_energy():
    """Zero-intensity beams leave a conservative chain; the windowed energy
    snapshots over ten thousand trap periods stay within 1e-6 of the start."""
    cfg = ChainConfig(N=2, species=MG24, lattice_constant=25e-6,
                      profile=FrequencyProfile.graded(OMEGA1, 0.0))
    quiet = LaserBeam(0.0, -0.1 * MG24.linewidth, MG24)
    system, _ = langevin_system(cfg, assemble_bath(cfg, quiet, quiet, 1, 1))
    assert np.all(system.gamma == 0) and np.all(system.diffusion == 0)
    period = TWO_PI / system.omega_max
    integ = IntegratorConfig(dt=0.01 / system.omega_max, t_end=1e4 * period,
                             burn_in=0.0, scheme=LEAPFROG)
    x0 = system.x_eq + 0.01 * system.lattice * np.array([1.0, -0.5])
    stats = simulate_trajectory(system, integ, seed=0, x0=x0)
    energy = stats.series_energy
    assert np.max(np.abs(energy - energy[0])) / abs(energy[0]) <= 1e-6
