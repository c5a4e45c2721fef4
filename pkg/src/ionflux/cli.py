"""Command line interface.

Subcommands: steady, langevin, sweep, compare, validate, preset. CSV goes to
stdout unless the config's output section names a file; JSON is written only
when a json_path is configured. Exit codes: 0 success, 1 configuration
error, 2 solver/numerical error, 3 validation failure, 64 usage error.
"""

import argparse
import os
import sys
from dataclasses import replace

from ._version import VERSION
from .config import (bath_assignment, chain_config, parse_config, preset_names,
                     preset_text, integrator_for, ensemble_spec, experiment_base,
                     sweep_spec)
from .errors import ConfigurationError, IonfluxError
from .langevin import ensemble_moments, langevin_system
from .serialize import (compare_csv, compare_json, langevin_csv, langevin_json,
                        steady_csv, steady_json, sweep_csv, sweep_json)
from .steady import steady_state_report
from .sweeps import compare_profiles, sweep_gradient, sweep_map
from .validate import run_validation


class _CliUsage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _CliUsage(message)


def _read_config(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    if not os.path.exists(path):
        raise ConfigurationError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _emit(text: str, path: str):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args):
    rc = parse_config(_read_config(args.config))
    seed = getattr(args, "seed", None)
    if seed is not None:
        rc = replace(rc, langevin=replace(rc.langevin, master_seed=seed))
    return rc


def _cmd_steady(args) -> int:
    rc = _load(args)
    cfg = chain_config(rc)
    report = steady_state_report(cfg, bath_assignment(rc, cfg),
                                 backend=rc.solver.backend,
                                 residual_rtol=rc.solver.residual_rtol,
                                 balance_rtol=rc.solver.balance_rtol)
    _emit(steady_csv(report), rc.output.csv_path)
    if rc.output.json_path:
        _emit(steady_json(rc, report), rc.output.json_path)
    return 0


def _cmd_langevin(args) -> int:
    rc = _load(args)
    cfg = chain_config(rc)
    system, units = langevin_system(cfg, bath_assignment(rc, cfg))
    integ = integrator_for(rc, system)
    em = ensemble_moments(system, integ, ensemble_spec(rc))
    _emit(langevin_csv(cfg, em, units), rc.output.csv_path)
    if rc.output.json_path:
        _emit(langevin_json(rc, cfg, em, units), rc.output.json_path)
    return 0


def _cmd_sweep(args) -> int:
    rc = _load(args)
    spec = sweep_spec(rc)
    if spec.axis2 is not None:
        result = sweep_map(spec)
    elif spec.axis1.name == "delta_omega_ratio":
        result = sweep_gradient(spec)
    else:
        raise ConfigurationError(
            "single-axis sweeps use delta_omega_ratio; maps add axis2 = lattice_ratio")
    _emit(sweep_csv(result), rc.output.csv_path)
    if rc.output.json_path:
        _emit(sweep_json(rc, result), rc.output.json_path)
    return 0


def _cmd_compare(args) -> int:
    rc = _load(args)
    if rc.sweep.axis1 != "delta_omega_ratio":
        raise ConfigurationError("compare sweeps over delta_omega_ratio only")
    spec = sweep_spec(rc)
    comp = compare_profiles(spec.base, spec.axis1.values)
    _emit(compare_csv(comp), rc.output.csv_path)
    if rc.output.json_path:
        _emit(compare_json(rc, comp), rc.output.json_path)
    return 0


def _cmd_validate(args) -> int:
    return 0 if run_validation(stream=sys.stdout) else 3


def _cmd_preset(args) -> int:
    sys.stdout.write(preset_text(args.name))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ionflux",
                     description="Steady-state heat transport in trapped-ion chains")
    parser.add_argument("--version", action="version", version=f"ionflux {VERSION}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("steady", help="one algebraic steady-state solve")
    p.add_argument("config", help="config path, or - for stdin")
    p.set_defaults(handler=_cmd_steady)

    p = sub.add_parser("langevin", help="stochastic ensemble estimate")
    p.add_argument("config", help="config path, or - for stdin")
    p.add_argument("--seed", type=int, default=None,
                   help="override langevin.master_seed")
    p.set_defaults(handler=_cmd_langevin)

    p = sub.add_parser("sweep", help="parameter sweep or 2-D map")
    p.add_argument("config", help="config path, or - for stdin")
    p.add_argument("--seed", type=int, default=None,
                   help="override langevin.master_seed")
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("compare", help="graded vs segmented profile sweep")
    p.add_argument("config", help="config path, or - for stdin")
    p.add_argument("--seed", type=int, default=None,
                   help="override langevin.master_seed")
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("validate", help="run the built-in property suite")
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("preset", help="print a shipped figure config")
    p.add_argument("name", choices=preset_names())
    p.set_defaults(handler=_cmd_preset)

    return parser


def cli_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _CliUsage as err:
        print(f"error: {err}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 64
    if getattr(args, "handler", None) is None:
        parser.print_usage(sys.stderr)
        return 64
    try:
        return args.handler(args)
    except ConfigurationError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except IonfluxError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return 2


def entry():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    entry()
