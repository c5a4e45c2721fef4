"""Stochastic integration of the full nonlinear chain dynamics.

This is the slow cross-check for the algebraic solver: ensembles of Langevin
trajectories with the complete Coulomb force (or, on request, the linearized
force, to measure what linearization costs). Everything here runs in natural
units; builders convert from SI configurations.

The default scheme splits each step as kick / drift / exact
Ornstein-Uhlenbeck bath update / drift / kick. The bath substep uses the
exact one-step solution p -> c p + sigma Z with c = exp(-gamma dt / m) and
sigma^2 = (D m / gamma)(1 - c^2), so the friction-plus-noise part introduces
no time-step error at all and the scheme degrades gracefully to velocity
Verlet when the bath is switched off. Bath heat input is metered directly as
the kinetic-energy change across that substep, which makes the late-time
windowed currents directly comparable with the algebraic J_L and J_R.

Trajectory i draws its noise from an own PCG64 stream seeded by
(master_seed, i), so results are bit-identical for a fixed master seed no
matter how trials are batched or scheduled across threads.
"""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chain import ChainConfig, equilibrium_positions, hessian_at
from .errors import ConfigurationError, InstabilityError
from .molasses import BathAssignment
from .units import NaturalUnits

LEAPFROG = "stochastic-leapfrog"
EULER = "semi-implicit-euler-maruyama"

_BLOWUP_FACTOR = 1e3   # |y| beyond this many lattice constants is a blow-up
_CHUNK_STEPS = 2048    # noise pregeneration granularity; does not affect streams
_MAX_BLOCK = 512       # lockstep trajectories per worker block


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float               # natural time
    t_end: float
    burn_in: float
    scheme: str = LEAPFROG
    series_window: float = 0.0  # 0 picks (t_end - burn_in)/40

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0:
            raise ConfigurationError("dt and t_end must be positive")
        if not 0 <= self.burn_in < self.t_end:
            raise ConfigurationError("burn_in must lie in [0, t_end)")
        if self.scheme not in (LEAPFROG, EULER):
            raise ConfigurationError(f"unknown integration scheme {self.scheme!r}")


@dataclass(frozen=True)
class EnsembleSpec:
    n_trials: int
    master_seed: int

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigurationError("ensemble needs at least one trial")


@dataclass(frozen=True)
class LangevinSystem:
    """Chain plus bath in natural units, ready to integrate."""

    omegas2: np.ndarray      # trap omega_n^2
    centers: np.ndarray      # trap centers
    x_eq: np.ndarray         # equilibrium positions (initial condition)
    gamma: np.ndarray
    diffusion: np.ndarray
    K: np.ndarray            # linearized stiffness at x_eq
    lattice: float
    left_sites: tuple
    right_sites: tuple
    mass: float = 1.0
    linearized: bool = False  # use -K y instead of the full Coulomb force

    @property
    def N(self) -> int:
        return len(self.omegas2)

    @property
    def omega_max(self) -> float:
        return float(np.sqrt(np.linalg.eigvalsh(self.K).max() / self.mass))

    @property
    def bathed(self) -> np.ndarray:
        return np.nonzero(self.gamma > 0)[0]


def langevin_system(config: ChainConfig, bath: BathAssignment,
                    linearized: bool = False):
    """Build the natural-unit integration system. Returns (system, units)."""
    units = NaturalUnits.for_chain(config)
    eq = equilibrium_positions(config)
    K = units.stiffness_natural(hessian_at(config, eq.positions).K)
    omegas = units.frequency_natural(config.frequencies())
    sys = LangevinSystem(
        omegas2=omegas**2,
        centers=units.length_natural(config.trap_centers),
        x_eq=units.length_natural(eq.positions),
        gamma=units.friction_natural(bath.gamma),
        diffusion=units.diffusion_natural(bath.diffusion),
        K=K,
        lattice=units.length_natural(config.lattice_constant),
        left_sites=bath.left_sites,
        right_sites=bath.right_sites,
        linearized=linearized)
    return sys, units


def default_integrator(system: LangevinSystem, dt_factor: float = 0.02,
                       t_end_factor: float = 60.0, burn_in_factor: float = 20.0,
                       scheme: str = LEAPFROG) -> IntegratorConfig:
    """Step from the stiffest mode, horizon from the slowest bath relaxation."""
    if not np.any(system.gamma > 0):
        raise ConfigurationError(
            "no dissipation: relaxation time undefined, supply an explicit "
            "IntegratorConfig")
    tau = system.mass / system.gamma[system.gamma > 0].min()
    return IntegratorConfig(
        dt=dt_factor / system.omega_max,
        t_end=t_end_factor * tau,
        burn_in=burn_in_factor * tau,
        scheme=scheme)


@dataclass(frozen=True)
class TrajectoryStats:
    """Time-averaged post-burn-in statistics of one trajectory."""

    count: int               # accumulated steps
    mean_y: np.ndarray
    mean_p: np.ndarray
    second_y: np.ndarray     # time average of y_n^2
    second_p: np.ndarray     # time average of p_n^2
    bath_energy: np.ndarray  # net energy received per site post burn-in
    measure_time: float
    series_times: np.ndarray
    series_J_L: np.ndarray
    series_J_R: np.ndarray
    series_energy: np.ndarray  # instantaneous total energy at window starts
    final_x: np.ndarray
    final_p: np.ndarray


def total_energy(system: LangevinSystem, x, p):
    """Instantaneous mechanical energy per trajectory row (natural units).

    Kinetic plus trap plus pair-repulsion energy for the full dynamics, or
    the quadratic form around equilibrium for a linearized system.
    """
    x = np.atleast_2d(x)
    p = np.atleast_2d(p)
    m = system.mass
    kin = np.sum(p * p, axis=-1) / (2.0 * m)
    if system.linearized:
        y = x - system.x_eq
        pot = 0.5 * np.einsum("bn,nl,bl->b", y, system.K, y)
    else:
        pot = 0.5 * m * np.sum(system.omegas2 * (x - system.centers) ** 2, axis=-1)
        iu, ju = np.triu_indices(system.N, k=1)
        if len(iu):
            pot = pot + np.sum(1.0 / np.abs(x[:, iu] - x[:, ju]), axis=-1)
    return kin + pot


def _validate_step(system: LangevinSystem, integ: IntegratorConfig):
    wmax = system.omega_max
    if integ.dt > 0.05 / wmax:
        raise ConfigurationError(
            f"dt = {integ.dt:.3e} exceeds the stability guard 0.05/omega_max "
            f"= {0.05 / wmax:.3e}")
    return wmax


def _advance_block(system: LangevinSystem, integ: IntegratorConfig, seeds,
                   collect_series: bool, x0=None, p0=None):
    """Integrate a lockstep block of trajectories; per-trajectory accumulators.

    The arithmetic for each trajectory is elementwise over its own row, so
    the computed numbers do not depend on how trials are grouped into blocks.
    """
    wmax = _validate_step(system, integ)
    B = len(seeds)
    N = system.N
    m = system.mass
    dt = integ.dt
    n_total = int(np.ceil(integ.t_end / dt))
    n_burn = int(np.ceil(integ.burn_in / dt))

    bath = system.bathed
    nb = len(bath)
    g_b = system.gamma[bath]
    d_b = system.diffusion[bath]
    if integ.scheme == LEAPFROG:
        decay = np.exp(-g_b * dt / m)
        kick_noise = np.sqrt(d_b * m / g_b * (1.0 - decay**2))
    else:
        drag = 1.0 / (1.0 + g_b * dt / m)
        kick_noise = np.sqrt(2.0 * d_b * dt)

    window = integ.series_window
    if window <= 0:
        window = max((integ.t_end - integ.burn_in) / 40.0, dt)
    steps_per_window = max(1, int(round(window / dt)))
    n_windows = -(-n_total // steps_per_window)

    rngs = [np.random.Generator(np.random.PCG64(np.random.SeedSequence(s)))
            for s in seeds]

    x = np.tile(system.x_eq if x0 is None else np.asarray(x0, dtype=float), (B, 1))
    p = (np.zeros((B, N)) if p0 is None
         else np.tile(np.asarray(p0, dtype=float), (B, 1)))
    idx = np.arange(N)

    def force(xc):
        if system.linearized:
            return -np.einsum("nl,bl->bn", system.K, xc - system.x_eq)
        dx = xc[:, :, None] - xc[:, None, :]
        dx[:, idx, idx] = np.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            pair = np.sum(np.sign(dx) / dx**2, axis=2)
        return -system.omegas2 * (xc - system.centers) + pair

    mean_y = np.zeros((B, N))
    m2_y = np.zeros((B, N))
    mean_p = np.zeros((B, N))
    m2_p = np.zeros((B, N))
    e_site = np.zeros((B, N))
    series = np.zeros((B, n_windows, 2)) if collect_series else None
    energies = np.zeros((B, n_windows)) if collect_series else None
    left_mask = np.isin(bath, system.left_sites)
    right_mask = np.isin(bath, system.right_sites)

    F = force(x)
    count = 0
    step = 0
    while step < n_total:
        todo = min(_CHUNK_STEPS, n_total - step)
        if nb:
            Z = np.stack([r.standard_normal((todo, nb)) for r in rngs])
        for s in range(todo):
            if collect_series and step % steps_per_window == 0:
                energies[:, step // steps_per_window] = total_energy(system, x, p)
            if integ.scheme == LEAPFROG:
                p += (0.5 * dt) * F
                x += (0.5 * dt / m) * p
                if nb:
                    pb = p[:, bath]
                    pb_new = decay * pb + kick_noise * Z[:, s, :]
                    dE = (pb_new**2 - pb**2) / (2.0 * m)
                    p[:, bath] = pb_new
                x += (0.5 * dt / m) * p
                F = force(x)
                p += (0.5 * dt) * F
            else:
                q = p + dt * F
                if nb:
                    qb = q[:, bath]
                    qb_new = drag * (qb + kick_noise * Z[:, s, :])
                    dE = (qb_new**2 - qb**2) / (2.0 * m)
                    q[:, bath] = qb_new
                p = q
                x = x + (dt / m) * p
                F = force(x)
            if nb and collect_series:
                w = step // steps_per_window
                series[:, w, 0] += dE[:, left_mask].sum(axis=1)
                series[:, w, 1] += dE[:, right_mask].sum(axis=1)
            if step >= n_burn:
                count += 1
                y = x - system.x_eq
                dy = y - mean_y
                mean_y += dy / count
                m2_y += dy * (y - mean_y)
                dp = p - mean_p
                mean_p += dp / count
                m2_p += dp * (p - mean_p)
                if nb:
                    e_site[:, bath] += dE
            step += 1
        if not np.all(np.abs(x - system.x_eq) <= _BLOWUP_FACTOR * system.lattice):
            raise InstabilityError(
                f"trajectory blew up at step {step} (dt = {dt:.3e}, "
                f"omega_max = {wmax:.3e})")

    t_meas = count * dt
    second_y = m2_y / count + mean_y**2
    second_p = m2_p / count + mean_p**2
    if collect_series:
        widths = np.full(n_windows, steps_per_window * dt)
        last = n_total - (n_windows - 1) * steps_per_window
        widths[-1] = last * dt
        starts = np.arange(n_windows) * steps_per_window * dt
        times = starts + 0.5 * widths
        series = series / widths[None, :, None]
    else:
        times = starts = np.zeros(0)
    return {
        "count": count, "t_meas": t_meas,
        "mean_y": mean_y, "mean_p": mean_p,
        "second_y": second_y, "second_p": second_p,
        "e_site": e_site, "energies": energies,
        "series": series, "times": times, "window_starts": starts,
        "final_x": x, "final_p": p,
    }


def simulate_trajectory(system: LangevinSystem, integ: IntegratorConfig,
                        seed: int, x0=None, p0=None) -> TrajectoryStats:
    """One trajectory; equals trial 0 of an ensemble with master_seed = seed.

    x0/p0 override the default start (equilibrium positions at rest).
    """
    out = _advance_block(system, integ, [(seed, 0)], collect_series=True,
                         x0=x0, p0=p0)
    series = out["series"][0]
    return TrajectoryStats(
        count=out["count"],
        mean_y=out["mean_y"][0], mean_p=out["mean_p"][0],
        second_y=out["second_y"][0], second_p=out["second_p"][0],
        bath_energy=out["e_site"][0],
        measure_time=out["t_meas"],
        series_times=out["times"],
        series_J_L=series[:, 0], series_J_R=series[:, 1],
        series_energy=out["energies"][0],
        final_x=out["final_x"][0], final_p=out["final_p"][0])


def _thread_count() -> int:
    env = os.environ.get("IONFLUX_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigurationError(f"IONFLUX_THREADS must be an integer, got {env!r}")
        return max(1, n)
    return max(1, os.cpu_count() or 1)


def _run_blocks(system, integ, ens, collect_series):
    seeds = [(ens.master_seed, i) for i in range(ens.n_trials)]
    workers = _thread_count()
    block = min(_MAX_BLOCK, -(-ens.n_trials // workers))
    blocks = [seeds[i:i + block] for i in range(0, len(seeds), block)]
    if len(blocks) == 1 or workers == 1:
        outs = [_advance_block(system, integ, b, collect_series) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(
                lambda b: _advance_block(system, integ, b, collect_series), blocks))
    merged = {}
    for key in ("mean_y", "mean_p", "second_y", "second_p", "e_site",
                "final_x", "final_p"):
        merged[key] = np.concatenate([o[key] for o in outs], axis=0)
    if collect_series:
        for key in ("series", "energies"):
            merged[key] = np.concatenate([o[key] for o in outs], axis=0)
        merged["times"] = outs[0]["times"]
        merged["window_starts"] = outs[0]["window_starts"]
    merged["count"] = outs[0]["count"]
    merged["t_meas"] = outs[0]["t_meas"]
    return merged


def _mean_se(values):
    mean = values.mean(axis=0)
    n = values.shape[0]
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, values.std(axis=0, ddof=1) / np.sqrt(n)


@dataclass(frozen=True)
class EnsembleMoments:
    """Ensemble-and-time-averaged stationary moments with standard errors."""

    n_trials: int
    measure_time: float
    mean_yy: np.ndarray
    se_yy: np.ndarray
    mean_pp: np.ndarray
    se_pp: np.ndarray
    site_currents: np.ndarray    # natural power per site
    se_site_currents: np.ndarray
    J_L: float
    se_J_L: float
    J_R: float
    se_J_R: float
    elapsed: float               # wall-clock seconds for the whole ensemble


def ensemble_moments(system: LangevinSystem, integ: IntegratorConfig,
                     ens: EnsembleSpec) -> EnsembleMoments:
    """Average over independent trajectories; SE from between-trial spread."""
    t0 = time.perf_counter()
    out = _run_blocks(system, integ, ens, collect_series=False)
    return _moments_from(out, system, ens, time.perf_counter() - t0)


def _moments_from(out, system, ens, elapsed) -> EnsembleMoments:
    t_meas = out["t_meas"]
    yy, se_yy = _mean_se(out["second_y"])
    pp, se_pp = _mean_se(out["second_p"])
    j_trials = out["e_site"] / t_meas
    j, se_j = _mean_se(j_trials)
    JL_trials = j_trials[:, list(system.left_sites)].sum(axis=1)
    JR_trials = j_trials[:, list(system.right_sites)].sum(axis=1)
    JL, se_JL = _mean_se(JL_trials[:, None])
    JR, se_JR = _mean_se(JR_trials[:, None])
    return EnsembleMoments(
        n_trials=ens.n_trials, measure_time=t_meas,
        mean_yy=yy, se_yy=se_yy, mean_pp=pp, se_pp=se_pp,
        site_currents=j, se_site_currents=se_j,
        J_L=float(JL[0]), se_J_L=float(se_JL[0]),
        J_R=float(JR[0]), se_J_R=float(se_JR[0]),
        elapsed=elapsed)


@dataclass(frozen=True)
class CurrentSeries:
    """Windowed ensemble heat currents J_L(t), J_R(t) and their sum."""

    times: np.ndarray
    J_L: np.ndarray
    J_R: np.ndarray
    J_sum: np.ndarray
    se_J_L: np.ndarray
    se_J_R: np.ndarray
    late_J_L: float
    late_se_J_L: float
    late_J_R: float
    late_se_J_R: float


def current_time_series(system: LangevinSystem, integ: IntegratorConfig,
                        ens: EnsembleSpec) -> CurrentSeries:
    """Bath power vs time from the full ensemble, plus late-time averages.

    Late-time means use the windows lying entirely after the burn-in; those
    are the numbers to compare against the algebraic steady state.
    """
    out = _run_blocks(system, integ, ens, collect_series=True)
    return _series_from(out, integ)


def _series_from(out, integ) -> CurrentSeries:
    series = out["series"]          # (trials, windows, 2)
    times = out["times"]
    JL, se_JL = _mean_se(series[:, :, 0])
    JR, se_JR = _mean_se(series[:, :, 1])
    late = out["window_starts"] >= integ.burn_in
    if not np.any(late):
        late = np.zeros_like(times, dtype=bool)
        late[-1] = True
    late_JL_trials = series[:, late, 0].mean(axis=1)
    late_JR_trials = series[:, late, 1].mean(axis=1)
    lJL, lseJL = _mean_se(late_JL_trials[:, None])
    lJR, lseJR = _mean_se(late_JR_trials[:, None])
    return CurrentSeries(
        times=times, J_L=JL, J_R=JR, J_sum=JL + JR,
        se_J_L=se_JL, se_J_R=se_JR,
        late_J_L=float(lJL[0]), late_se_J_L=float(lseJL[0]),
        late_J_R=float(lJR[0]), late_se_J_R=float(lseJR[0]))


def ensemble_with_series(system: LangevinSystem, integ: IntegratorConfig,
                         ens: EnsembleSpec):
    """One integration pass giving both the stationary moments and the
    windowed current series: (EnsembleMoments, CurrentSeries)."""
    t0 = time.perf_counter()
    out = _run_blocks(system, integ, ens, collect_series=True)
    elapsed = time.perf_counter() - t0
    return _moments_from(out, system, ens, elapsed), _series_from(out, integ)
