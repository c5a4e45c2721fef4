"""Steady-state heat transport in laser-cooled trapped-ion chains.

A 1-D chain of ions in individual harmonic wells, coupled by the full
long-range Coulomb interaction, with optical-molasses Langevin baths on the
end segments. The package computes stationary temperature profiles, heat
currents and rectification factors two independent ways: a fast algebraic
solve of the linearized moment equations, and direct stochastic integration
of the Langevin dynamics. A sweep engine runs bias-pair experiments over
parameter grids, and a CLI exposes the whole thing on config files.
"""

from ._version import VERSION as __version__
from .chain import (ChainConfig, EquilibriumState, FrequencyProfile,
                    GRADED, HessianMatrix, SEGMENTED, characteristic_length,
                    equilibrium_positions, hessian_at, materialize_frequencies,
                    potential_gradient, total_potential)
from .config import (RunConfig, bath_assignment, beams, chain_config,
                     dump_config, ensemble_spec, experiment_base,
                     integrator_for, parse_config, preset_config,
                     preset_names, preset_text, sweep_spec)
from .constants import CODATA, MG24, IonSpecies, PhysicalConstants, species_by_name
from .errors import (ConfigurationError, InstabilityError,
                     InternalConsistencyError, IonfluxError, SingularityError,
                     SolverError, UndefinedRectificationError,
                     UnreachableTemperatureError)
from .langevin import (CurrentSeries, EnsembleMoments, EnsembleSpec,
                       IntegratorConfig, LangevinSystem, TrajectoryStats,
                       current_time_series, default_integrator,
                       ensemble_moments, ensemble_with_series, langevin_system,
                       simulate_trajectory, total_energy)
from .molasses import (BathAssignment, LaserBeam, assemble_bath,
                       bath_temperature, detuning_for_temperature,
                       diffusion_coefficient, doppler_limit,
                       friction_coefficient)
from .steady import (CovarianceMatrix, LinearizedSystem, MomentVector,
                     SteadyStateReport, build_drift_and_noise,
                     local_temperatures, natural_linear_system,
                     rectification_factor, site_currents,
                     solve_moments_lyapunov, solve_moments_paper,
                     stationarity_residuals, steady_state_report,
                     total_currents)
from .sweeps import (ExperimentBase, ProfileComparison, SweepAxis, SweepResult,
                     SweepRow, SweepSpec, compare_profiles, find_zero_crossings,
                     run_bias_pair, sweep_gradient, sweep_map)
from .units import NaturalUnits

__all__ = [name for name in dir() if not name.startswith("_")]
