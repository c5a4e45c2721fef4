"""Parameter studies: bias pairs, gradient sweeps, 2-D maps, profile comparison.

A "bias pair" is the basic experiment: solve the steady state once with the
hot beam on the left (right-going flux J_fwd) and once with the beams swapped
(left-going flux J_bwd), then form the rectification factor
R = (J_fwd - J_bwd)/max(J_fwd, J_bwd). Sweeps repeat that over parameter
grids. Grid points are independent; a work pool may evaluate them in any
order, results land in grid order, and per-point failures are recorded in
the row rather than aborting the sweep.

The default point solver is the algebraic moment solve. A sweep may instead
be backed by the stochastic integrator (solver="langevin"); those points run
serially and trajectory-level parallelism uses the thread budget, so the two
levels never compete for cores. Stochastic points draw their noise from the
sweep's master seed alone (not from evaluation order), which keeps the table
reproducible and lets adjacent grid points share random streams.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .chain import (ChainConfig, FrequencyProfile, GRADED, SEGMENTED,
                    characteristic_length)
from .errors import ConfigurationError, IonfluxError, UndefinedRectificationError
from .langevin import EnsembleSpec, default_integrator, ensemble_moments, langevin_system
from .molasses import LaserBeam, assemble_bath, bath_temperature
from .steady import rectification_factor, steady_state_report

AXIS_NAMES = ("delta_omega_ratio", "lattice_ratio", "omega1", "N", "profile")
ALGEBRAIC = "algebraic"
LANGEVIN = "langevin"


@dataclass(frozen=True)
class ExperimentBase:
    """Chain plus the two beams and bath geometry shared by all grid points."""

    config: ChainConfig
    hot: LaserBeam
    cold: LaserBeam
    n_left: int
    n_right: int
    backend: str = "moments"

    def __post_init__(self):
        th = bath_temperature(self.hot.detuning, self.hot.species,
                              self.config.constants)
        tc = bath_temperature(self.cold.detuning, self.cold.species,
                              self.config.constants)
        # Equal beams are allowed to construct: both currents vanish and the
        # rectification call reports that. Inverted beams are a plain mistake.
        if th < tc:
            raise ConfigurationError(
                f"hot beam is colder than cold beam (T_H = {th:.4g} K, "
                f"T_C = {tc:.4g} K); swap the beams")


@dataclass(frozen=True)
class SweepAxis:
    name: str
    values: tuple

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ConfigurationError(
                f"unknown sweep axis {self.name!r} (choose from {', '.join(AXIS_NAMES)})")
        if len(self.values) == 0:
            raise ConfigurationError("sweep axis needs at least one value")
        if self.name != "profile":
            vals = np.asarray(self.values, dtype=float)
            if len(vals) > 1 and not (np.all(np.diff(vals) > 0)
                                      or np.all(np.diff(vals) < 0)):
                raise ConfigurationError(f"axis {self.name!r} grid must be strictly monotone")


@dataclass(frozen=True)
class SweepSpec:
    base: ExperimentBase
    axis1: SweepAxis
    axis2: SweepAxis = None
    solver: str = ALGEBRAIC
    n_trials: int = 200       # langevin solver only
    master_seed: int = 0      # langevin solver only

    def __post_init__(self):
        if self.solver not in (ALGEBRAIC, LANGEVIN):
            raise ConfigurationError(
                f"sweep solver must be {ALGEBRAIC!r} or {LANGEVIN!r}, got {self.solver!r}")
        if self.n_trials < 1:
            raise ConfigurationError("n_trials must be >= 1")


@dataclass(frozen=True)
class SweepRow:
    parameters: dict
    J_forward: float      # W
    J_backward: float     # W
    R: float
    status: str = "ok"
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SweepResult:
    axes: tuple           # axis names in column order
    rows: tuple


def _apply_axis(config: ChainConfig, name: str, value):
    """A new ChainConfig with one swept parameter changed."""
    prof = config.profile
    if name == "delta_omega_ratio":
        omega1 = prof.reference_frequency()
        prof = replace(prof, delta_omega=float(value) * omega1)
        return replace(config, profile=prof)
    if name == "lattice_ratio":
        ell = characteristic_length(config.species, prof.reference_frequency(),
                                    config.constants)
        return replace(config, lattice_constant=float(value) * ell)
    if name == "omega1":
        old = prof.reference_frequency()
        ratio = prof.delta_omega / old if old else 0.0
        prof = replace(prof, omega1=float(value), delta_omega=ratio * float(value))
        return replace(config, profile=prof)
    if name == "N":
        return replace(config, N=int(value))
    if name == "profile":
        if value not in (GRADED, SEGMENTED):
            raise ConfigurationError("profile axis value must be graded or segmented")
        prof = FrequencyProfile(kind=value, omega1=prof.omega1,
                                delta_omega=prof.delta_omega,
                                split_index=prof.split_index)
        return replace(config, profile=prof)
    raise ConfigurationError(f"unknown sweep axis {name!r}")


def _algebraic_flux(base, cfg, bath):
    report = steady_state_report(cfg, bath, backend=base.backend)
    return abs(report.J_L)


def _langevin_flux(base, cfg, bath, n_trials, seed):
    system, units = langevin_system(cfg, bath)
    integ = default_integrator(system)
    stats = ensemble_moments(system, integ, EnsembleSpec(n_trials=n_trials,
                                                         master_seed=seed))
    return abs(stats.J_L) * units.power


def run_bias_pair(base: ExperimentBase, config: ChainConfig = None,
                  solver: str = ALGEBRAIC, n_trials: int = 200,
                  master_seed: int = 0):
    """Solve forward and reversed bias; returns (J_fwd, J_bwd, R) in W, W, 1.

    J_fwd is the flux magnitude with the hot beam on the left, J_bwd with
    the beams swapped. Solver errors carry the bias direction they hit.
    """
    cfg = config if config is not None else base.config
    th = bath_temperature(base.hot.detuning, base.hot.species, cfg.constants)
    tc = bath_temperature(base.cold.detuning, base.cold.species, cfg.constants)
    if th == tc:
        raise UndefinedRectificationError(
            "equal bath temperatures: both bias currents vanish, "
            "rectification factor undefined")
    out = []
    for tag, left, right, seed in (("forward bias, hot beam left",
                                    base.hot, base.cold, master_seed),
                                   ("reversed bias, hot beam right",
                                    base.cold, base.hot, master_seed + 1)):
        try:
            bath = assemble_bath(cfg, left, right, base.n_left, base.n_right)
            if solver == LANGEVIN:
                out.append(_langevin_flux(base, cfg, bath, n_trials, seed))
            else:
                out.append(_algebraic_flux(base, cfg, bath))
        except IonfluxError as err:
            raise type(err)(f"{err} [{tag}]") from err
    J_fwd, J_bwd = out
    return J_fwd, J_bwd, rectification_factor(J_fwd, J_bwd)


def _point_row(spec, params):
    cfg = spec.base.config
    try:
        for name, value in params.items():
            cfg = _apply_axis(cfg, name, value)
        J_fwd, J_bwd, R = run_bias_pair(spec.base, cfg, solver=spec.solver,
                                        n_trials=spec.n_trials,
                                        master_seed=spec.master_seed)
        return SweepRow(parameters=dict(params), J_forward=J_fwd,
                        J_backward=J_bwd, R=R)
    except IonfluxError as err:
        return SweepRow(parameters=dict(params), J_forward=float("nan"),
                        J_backward=float("nan"), R=float("nan"),
                        status=f"error: {err}")


def _pool_size() -> int:
    env = os.environ.get("IONFLUX_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"IONFLUX_THREADS must be an integer, got {env!r}")
    return max(1, os.cpu_count() or 1)


def _run_grid(spec, param_list):
    # Stochastic points keep the thread budget for their trajectories.
    workers = 1 if spec.solver == LANGEVIN else _pool_size()
    if workers == 1 or len(param_list) == 1:
        rows = [_point_row(spec, p) for p in param_list]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda p: _point_row(spec, p), param_list))
    return rows


def sweep_gradient(spec: SweepSpec) -> SweepResult:
    """One bias pair per gradient value; rows in grid order."""
    if spec.axis1.name != "delta_omega_ratio" or spec.axis2 is not None:
        raise ConfigurationError("gradient sweep takes a single delta_omega_ratio axis")
    params = [{"delta_omega_ratio": v} for v in spec.axis1.values]
    return SweepResult(axes=("delta_omega_ratio",),
                       rows=tuple(_run_grid(spec, params)))


def sweep_map(spec: SweepSpec) -> SweepResult:
    """Full outer grid of axis2 x axis1; axis1 varies fastest."""
    if spec.axis2 is None:
        raise ConfigurationError("map sweep needs two axes")
    if spec.axis1.name == spec.axis2.name:
        raise ConfigurationError("map sweep axes must differ")
    params = [{spec.axis2.name: b, spec.axis1.name: a}
              for b in spec.axis2.values for a in spec.axis1.values]
    return SweepResult(axes=(spec.axis2.name, spec.axis1.name),
                       rows=tuple(_run_grid(spec, params)))


def find_zero_crossings(result: SweepResult, axis: str = "delta_omega_ratio"):
    """Linear-interpolated roots of R between adjacent opposite-sign rows.

    Intervals touching the trivial point at a zero gradient are excluded
    (a uniform chain has R = 0 by symmetry, not by cancellation); failed
    rows break the interpolation chain.
    """
    rows = result.rows
    crossings = []
    for a, b in zip(rows, rows[1:]):
        if a.status != "ok" or b.status != "ok":
            continue
        xa, xb = a.parameters[axis], b.parameters[axis]
        if xa == 0.0 or xb == 0.0:
            continue
        if np.isnan(a.R) or np.isnan(b.R):
            continue
        if a.R * b.R < 0.0:
            crossings.append(xa - a.R * (xb - xa) / (b.R - a.R))
    return crossings


@dataclass(frozen=True)
class ProfileComparison:
    graded: SweepResult
    segmented: SweepResult


def compare_profiles(base: ExperimentBase, gradient_values) -> ProfileComparison:
    """The same gradient sweep run for the graded and the segmented profile."""
    results = {}
    for kind in (GRADED, SEGMENTED):
        cfg = _apply_axis(base.config, "profile", kind)
        b = replace(base, config=cfg)
        spec = SweepSpec(base=b, axis1=SweepAxis("delta_omega_ratio",
                                                 tuple(gradient_values)))
        results[kind] = sweep_gradient(spec)
    return ProfileComparison(graded=results[GRADED], segmented=results[SEGMENTED])
