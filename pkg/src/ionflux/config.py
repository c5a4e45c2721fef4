"""Run configuration: strict nested key-value files plus shipped presets.

Configs are YAML mappings with five sections (chain, baths, solver, langevin,
sweep, output). Parsing is strict: unknown keys, missing required keys, and
out-of-range values all fail with the dotted key path and the source line.
Quantities are entered the way experimental papers quote them: trap
frequencies in ordinary Hz (omega_1 = 2*pi*omega1_hz), detunings in units of
the transition linewidth, gradients in units of omega_1, so a config can be
transcribed from a caption without unit conversions.

`dump_config` emits a canonical form (fixed key order, null-valued optionals
omitted); parsing a dump reproduces the RunConfig exactly, and the shipped
presets are already in canonical form.
"""

import math
import os
from dataclasses import dataclass, replace

import numpy as np
import yaml

from .chain import ChainConfig, FrequencyProfile, GRADED, SEGMENTED, characteristic_length
from .constants import species_by_name
from .errors import ConfigurationError
from .langevin import (EULER, EnsembleSpec, IntegratorConfig, LEAPFROG,
                       default_integrator)
from .molasses import LaserBeam, assemble_bath
from .sweeps import (ALGEBRAIC, AXIS_NAMES, ExperimentBase, LANGEVIN,
                     SweepAxis, SweepSpec)

_REQUIRED = object()


@dataclass(frozen=True)
class ChainSection:
    species: str
    N: int
    omega1_hz: float
    profile: str
    delta_omega_ratio: float
    split_index: int       # 0 means the default boundary for segmented
    a_m: float = None      # exactly one of a_m / a_over_l
    a_over_l: float = None


@dataclass(frozen=True)
class BathsSection:
    delta_H_over_Gamma: float
    delta_C_over_Gamma: float
    intensity_ratio: float
    N_L: int
    N_R: int


@dataclass(frozen=True)
class SolverSection:
    backend: str
    residual_rtol: float
    balance_rtol: float


@dataclass(frozen=True)
class LangevinSection:
    scheme: str
    dt_factor: float
    t_end_factor: float
    burn_in_factor: float
    n_trials: int
    master_seed: int


@dataclass(frozen=True)
class SweepSection:
    axis1: str
    axis1_start: float
    axis1_stop: float
    axis1_count: int
    axis2: str = None
    axis2_start: float = None
    axis2_stop: float = None
    axis2_count: int = None
    solver: str = ALGEBRAIC


@dataclass(frozen=True)
class OutputSection:
    csv_path: str
    json_path: str


@dataclass(frozen=True)
class RunConfig:
    chain: ChainSection
    baths: BathsSection
    solver: SolverSection
    langevin: LangevinSection
    sweep: SweepSection
    output: OutputSection


def _positive(v):
    return None if v > 0 else "must be positive"


def _nonnegative(v):
    return None if v >= 0 else "must be >= 0"


def _cooling(v):
    if v >= 0:
        return "positive detuning: bath model requires cooling (delta < 0)"
    return None


def _choice(*allowed):
    def check(v):
        if v in allowed:
            return None
        return f"must be one of {', '.join(map(str, allowed))}"
    return check


def _species_known(v):
    try:
        species_by_name(v)
    except ConfigurationError as err:
        return str(err)
    return None


# (key, kind, default, check); kind "ofloat"/"ostr"/"oint" admit null
_SCHEMA = {
    "chain": (ChainSection, (
        ("species", "str", "Mg24", _species_known),
        ("N", "int", 15, lambda v: None if v >= 1 else "must be >= 1"),
        ("omega1_hz", "float", _REQUIRED, _positive),
        ("profile", "str", GRADED, _choice(GRADED, SEGMENTED)),
        ("delta_omega_ratio", "float", 0.0, _nonnegative),
        ("split_index", "int", 0, _nonnegative),
        ("a_m", "ofloat", None, _positive),
        ("a_over_l", "ofloat", None, _positive),
    )),
    "baths": (BathsSection, (
        ("delta_H_over_Gamma", "float", -0.02, _cooling),
        ("delta_C_over_Gamma", "float", -0.1, _cooling),
        ("intensity_ratio", "float", 0.08, _nonnegative),
        ("N_L", "int", 3, _nonnegative),
        ("N_R", "int", 3, _nonnegative),
    )),
    "solver": (SolverSection, (
        ("backend", "str", "moments", _choice("moments", "lyapunov")),
        ("residual_rtol", "float", 1e-10, _positive),
        ("balance_rtol", "float", 1e-8, _positive),
    )),
    "langevin": (LangevinSection, (
        ("scheme", "str", LEAPFROG, _choice(LEAPFROG, EULER)),
        ("dt_factor", "float", 0.02,
         lambda v: None if 0 < v <= 0.05 else "must lie in (0, 0.05]"),
        ("t_end_factor", "float", 60.0, _positive),
        ("burn_in_factor", "float", 20.0, _nonnegative),
        ("n_trials", "int", 200, lambda v: None if v >= 1 else "must be >= 1"),
        ("master_seed", "int", 12345, _nonnegative),
    )),
    "sweep": (SweepSection, (
        ("axis1", "str", "delta_omega_ratio", _choice(*AXIS_NAMES)),
        ("axis1_start", "float", 0.025, None),
        ("axis1_stop", "float", 1.5, None),
        ("axis1_count", "int", 60, lambda v: None if v >= 1 else "must be >= 1"),
        ("axis2", "ostr", None, _choice(*AXIS_NAMES)),
        ("axis2_start", "ofloat", None, None),
        ("axis2_stop", "ofloat", None, None),
        ("axis2_count", "oint", None, lambda v: None if v >= 1 else "must be >= 1"),
        ("solver", "str", ALGEBRAIC, _choice(ALGEBRAIC, LANGEVIN)),
    )),
    "output": (OutputSection, (
        ("csv_path", "str", "", None),
        ("json_path", "str", "", None),
    )),
}


def _key_lines(text):
    """Dotted key path -> 1-based source line, rejecting duplicate keys."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as err:
        raise ConfigurationError(f"config is not valid YAML: {err}")
    lines = {}

    def walk(node, prefix):
        if not isinstance(node, yaml.MappingNode):
            return
        for knode, vnode in node.value:
            if not isinstance(knode, yaml.ScalarNode):
                raise ConfigurationError(
                    f"line {knode.start_mark.line + 1}: mapping keys must be scalars")
            path = prefix + str(knode.value)
            line = knode.start_mark.line + 1
            if path in lines:
                raise ConfigurationError(f"{path} (line {line}): duplicate key")
            lines[path] = line
            walk(vnode, path + ".")

    walk(root, "")
    return root, lines


def _where(path, lines):
    line = lines.get(path)
    return f"{path} (line {line})" if line else path


def _coerce(path, lines, kind, value):
    optional = kind.startswith("o")
    base = kind[1:] if optional else kind
    if value is None:
        if optional:
            return None
        raise ConfigurationError(f"{_where(path, lines)}: value may not be null")
    if isinstance(value, bool):
        raise ConfigurationError(f"{_where(path, lines)}: expected {base}, got a boolean")
    if base == "int":
        if isinstance(value, int):
            return value
        raise ConfigurationError(f"{_where(path, lines)}: expected an integer, got {value!r}")
    if base == "float":
        if isinstance(value, (int, float)):
            out = float(value)
        elif isinstance(value, str):
            # YAML leaves exponent forms without a dot ('50e3') as strings
            try:
                out = float(value)
            except ValueError:
                raise ConfigurationError(
                    f"{_where(path, lines)}: expected a number, got {value!r}")
        else:
            raise ConfigurationError(
                f"{_where(path, lines)}: expected a number, got {value!r}")
        if not math.isfinite(out):
            raise ConfigurationError(f"{_where(path, lines)}: value must be finite")
        return out
    if base == "str":
        if isinstance(value, str):
            return value
        raise ConfigurationError(f"{_where(path, lines)}: expected a string, got {value!r}")
    raise ConfigurationError(f"internal schema kind {kind!r}")  # pragma: no cover


def _cross_checks(rc: RunConfig, lines):
    ch, ba, lv, sw = rc.chain, rc.baths, rc.langevin, rc.sweep
    have_a = ch.a_m is not None
    have_ratio = ch.a_over_l is not None
    if have_a == have_ratio:
        raise ConfigurationError(
            f"{_where('chain', lines)}: give exactly one of a_m and a_over_l"
            + (" (both present)" if have_a else " (neither present)"))
    if ch.split_index > ch.N:
        raise ConfigurationError(
            f"{_where('chain.split_index', lines)}: must be <= N = {ch.N}")
    if ba.N_L + ba.N_R > ch.N:
        raise ConfigurationError(
            f"{_where('baths', lines)}: N_L + N_R = {ba.N_L + ba.N_R} exceeds N = {ch.N}")
    if lv.burn_in_factor >= lv.t_end_factor:
        raise ConfigurationError(
            f"{_where('langevin.burn_in_factor', lines)}: must be below t_end_factor")
    axis2_keys = (sw.axis2, sw.axis2_start, sw.axis2_stop, sw.axis2_count)
    missing = [k for k, v in zip(("axis2", "axis2_start", "axis2_stop", "axis2_count"),
                                 axis2_keys) if v is None]
    if missing and len(missing) != 4:
        raise ConfigurationError(
            f"{_where('sweep', lines)}: axis2 needs axis2, axis2_start, "
            f"axis2_stop and axis2_count together (missing {', '.join(missing)})")
    for name, start, stop, count in (("axis1", sw.axis1_start, sw.axis1_stop, sw.axis1_count),
                                     ("axis2", sw.axis2_start, sw.axis2_stop, sw.axis2_count)):
        if start is None:
            continue
        if count > 1 and not stop > start:
            raise ConfigurationError(
                f"{_where(f'sweep.{name}_stop', lines)}: must exceed {name}_start")


def parse_config(source) -> RunConfig:
    """Parse a config from a path, file object, or literal YAML text."""
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, os.PathLike):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    elif isinstance(source, str) and "\n" not in source and os.path.exists(source):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    elif isinstance(source, str):
        text = source
    else:
        raise ConfigurationError(f"cannot read config from {type(source).__name__}")

    root, lines = _key_lines(text)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigurationError(f"config is not valid YAML: {err}")
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a mapping of sections")

    for section in data:
        if section not in _SCHEMA:
            raise ConfigurationError(
                f"{_where(str(section), lines)}: unknown section "
                f"(choose from {', '.join(_SCHEMA)})")

    built = {}
    for section, (cls, keys) in _SCHEMA.items():
        raw = data.get(section)
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigurationError(f"{_where(section, lines)}: section must be a mapping")
        known = {k[0] for k in keys}
        for key in raw:
            if key not in known:
                raise ConfigurationError(
                    f"{_where(f'{section}.{key}', lines)}: unknown key "
                    f"(known keys: {', '.join(sorted(known))})")
        values = {}
        for key, kind, default, check in keys:
            path = f"{section}.{key}"
            if key in raw:
                value = _coerce(path, lines, kind, raw[key])
            elif default is _REQUIRED:
                raise ConfigurationError(f"{_where(section, lines)}: missing required key {key!r}")
            else:
                value = default
            if value is not None and check is not None:
                problem = check(value)
                if problem:
                    raise ConfigurationError(f"{_where(path, lines)}: {problem}")
            values[key] = value
        built[section] = cls(**values)

    rc = RunConfig(**built)
    _cross_checks(rc, lines)
    return rc


_BARE = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_./-")


def _fmt(value):
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        s = repr(value)
        if "e" in s and "." not in s.split("e")[0]:
            mant, exp = s.split("e")
            s = f"{mant}.0e{exp}"
        return s
    if isinstance(value, str):
        if value and set(value) <= _BARE:
            return value
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise ConfigurationError(f"cannot format config value {value!r}")


def dump_config(rc: RunConfig) -> str:
    """Canonical text form; parse_config(dump_config(rc)) == rc."""
    out = []
    for section, (cls, keys) in _SCHEMA.items():
        sec = getattr(rc, section)
        out.append(f"{section}:")
        for key, kind, default, check in keys:
            value = getattr(sec, key)
            if value is None and kind.startswith("o"):
                continue
            out.append(f"  {key}: {_fmt(value)}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# builders: RunConfig -> simulation objects


def chain_config(rc: RunConfig) -> ChainConfig:
    ch = rc.chain
    species = species_by_name(ch.species)
    omega1 = 2.0 * math.pi * ch.omega1_hz
    delta = ch.delta_omega_ratio * omega1
    if ch.profile == GRADED:
        profile = FrequencyProfile.graded(omega1, delta)
    else:
        profile = FrequencyProfile.segmented(omega1, delta, ch.split_index)
    if ch.a_m is not None:
        a = ch.a_m
    else:
        a = ch.a_over_l * characteristic_length(species, omega1)
    return ChainConfig(N=ch.N, species=species, lattice_constant=a, profile=profile)


def beams(rc: RunConfig):
    """(hot, cold) molasses beams from the baths section."""
    species = species_by_name(rc.chain.species)
    gamma_line = species.linewidth
    hot = LaserBeam(intensity_ratio=rc.baths.intensity_ratio,
                    detuning=rc.baths.delta_H_over_Gamma * gamma_line,
                    species=species)
    cold = LaserBeam(intensity_ratio=rc.baths.intensity_ratio,
                     detuning=rc.baths.delta_C_over_Gamma * gamma_line,
                     species=species)
    return hot, cold


def bath_assignment(rc: RunConfig, config: ChainConfig = None, swap: bool = False):
    """Assemble the two-ended bath; swap=True reverses the bias."""
    cfg = config if config is not None else chain_config(rc)
    hot, cold = beams(rc)
    left, right = (cold, hot) if swap else (hot, cold)
    return assemble_bath(cfg, left, right, rc.baths.N_L, rc.baths.N_R)


def experiment_base(rc: RunConfig) -> ExperimentBase:
    hot, cold = beams(rc)
    return ExperimentBase(config=chain_config(rc), hot=hot, cold=cold,
                          n_left=rc.baths.N_L, n_right=rc.baths.N_R,
                          backend=rc.solver.backend)


def _axis_values(rc, name, start, stop, count):
    values = np.linspace(start, stop, count)
    if name == "omega1":
        values = 2.0 * math.pi * values   # grid entered in Hz
    return tuple(float(v) for v in values)


def sweep_spec(rc: RunConfig) -> SweepSpec:
    sw = rc.sweep
    axis1 = SweepAxis(sw.axis1, _axis_values(rc, sw.axis1, sw.axis1_start,
                                             sw.axis1_stop, sw.axis1_count))
    axis2 = None
    if sw.axis2 is not None:
        axis2 = SweepAxis(sw.axis2, _axis_values(rc, sw.axis2, sw.axis2_start,
                                                 sw.axis2_stop, sw.axis2_count))
    return SweepSpec(base=experiment_base(rc), axis1=axis1, axis2=axis2,
                     solver=sw.solver, n_trials=rc.langevin.n_trials,
                     master_seed=rc.langevin.master_seed)


def integrator_for(rc: RunConfig, system) -> IntegratorConfig:
    lv = rc.langevin
    return default_integrator(system, dt_factor=lv.dt_factor,
                              t_end_factor=lv.t_end_factor,
                              burn_in_factor=lv.burn_in_factor,
                              scheme=lv.scheme)


def ensemble_spec(rc: RunConfig, seed_override: int = None) -> EnsembleSpec:
    seed = rc.langevin.master_seed if seed_override is None else seed_override
    return EnsembleSpec(n_trials=rc.langevin.n_trials, master_seed=seed)


# ---------------------------------------------------------------------------
# shipped presets


def _base_preset(**chain_over):
    chain = {"species": "Mg24", "N": 15, "omega1_hz": 1.0e6, "profile": GRADED,
             "delta_omega_ratio": 0.1, "split_index": 0, "a_m": None,
             "a_over_l": 4.76}
    chain.update(chain_over)
    return RunConfig(
        chain=ChainSection(**chain),
        baths=BathsSection(delta_H_over_Gamma=-0.02, delta_C_over_Gamma=-0.1,
                           intensity_ratio=0.08, N_L=3, N_R=3),
        solver=SolverSection(backend="moments", residual_rtol=1e-10,
                             balance_rtol=1e-8),
        langevin=LangevinSection(scheme=LEAPFROG, dt_factor=0.02,
                                 t_end_factor=60.0, burn_in_factor=20.0,
                                 n_trials=200, master_seed=12345),
        sweep=SweepSection(axis1="delta_omega_ratio", axis1_start=0.025,
                           axis1_stop=1.5, axis1_count=60),
        output=OutputSection(csv_path="", json_path=""),
    )


def _fig2():
    rc = _base_preset(omega1_hz=5.0e4, delta_omega_ratio=0.5,
                      a_m=50.0e-6, a_over_l=None)
    return replace(rc, langevin=replace(rc.langevin, n_trials=1000,
                                        master_seed=7))


def _fig3():
    return _base_preset()


def _fig4():
    rc = _base_preset()
    return replace(rc, sweep=SweepSection(
        axis1="delta_omega_ratio", axis1_start=0.0375, axis1_stop=1.5,
        axis1_count=40, axis2="lattice_ratio", axis2_start=1.3,
        axis2_stop=6.0, axis2_count=40))


def _fig5():
    rc = _base_preset(split_index=8)
    return replace(rc, sweep=SweepSection(
        axis1="delta_omega_ratio", axis1_start=0.05, axis1_stop=1.5,
        axis1_count=30))


_PRESETS = {"fig2": _fig2, "fig3": _fig3, "fig4": _fig4, "fig5": _fig5}


def preset_names():
    return tuple(_PRESETS)


def preset_config(name: str) -> RunConfig:
    try:
        builder = _PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown preset {name!r} (available: {', '.join(_PRESETS)})")
    return builder()


def preset_text(name: str) -> str:
    return dump_config(preset_config(name))
