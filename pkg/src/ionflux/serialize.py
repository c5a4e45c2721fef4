"""Result serialization: per-site CSV tables, sweep tables, JSON reports.

Column layouts are part of the tool's contract (golden-file tested): power in
watts, scientific notation; temperatures in mK; everything formatted through
fixed format strings so identical runs serialize to identical bytes. JSON
reports wrap the same numbers in an envelope carrying the tool version and
the sha256 of the canonical config, so any result file names the exact
configuration that produced it.
"""

import hashlib
import json
import math
from dataclasses import asdict

import numpy as np

from ._version import VERSION
from .config import RunConfig, dump_config
from .langevin import EnsembleMoments
from .steady import SteadyStateReport
from .sweeps import ProfileComparison, SweepResult

STEADY_HEADER = "site,omega_n_over_omega1,T_n_mK,j_n_W,J_L_W,J_R_W,residual"
LANGEVIN_HEADER = ("site,omega_n_over_omega1,T_n_mK,se_T_n_mK,j_n_W,se_j_n_W,"
                   "J_L_W,se_J_L_W,J_R_W,se_J_R_W")
SWEEP_TAIL = "J_fwd_W,J_bwd_W,R,status"


def _sci(x) -> str:
    return f"{float(x):.12e}"


def _gen(x) -> str:
    return f"{float(x):.10g}"


def steady_csv(report: SteadyStateReport) -> str:
    omega1 = float(report.omegas[0])
    stat = report.residuals["stationarity"]
    lines = [STEADY_HEADER]
    for n in range(len(report.omegas)):
        lines.append(",".join([
            str(n + 1),
            _gen(report.omegas[n] / omega1),
            _gen(report.temperatures[n] * 1e3),
            _sci(report.site_currents[n]),
            _sci(report.J_L),
            _sci(report.J_R),
            f"{float(stat[n]):.3e}",
        ]))
    return "\n".join(lines) + "\n"


def ensemble_site_table(config, em: EnsembleMoments, units) -> dict:
    """Ensemble stationary estimates converted to presentation units."""
    omegas = config.frequencies()
    mass = 1.0  # natural units
    T = units.kelvin(em.mean_pp / mass)
    se_T = units.kelvin(em.se_pp / mass)
    return {
        "omega_ratio": omegas / omegas[0],
        "T_mK": T * 1e3,
        "se_T_mK": se_T * 1e3,
        "j_W": units.watts(em.site_currents),
        "se_j_W": units.watts(em.se_site_currents),
        "J_L_W": units.watts(em.J_L),
        "se_J_L_W": units.watts(em.se_J_L),
        "J_R_W": units.watts(em.J_R),
        "se_J_R_W": units.watts(em.se_J_R),
    }


def langevin_csv(config, em: EnsembleMoments, units) -> str:
    t = ensemble_site_table(config, em, units)
    lines = [LANGEVIN_HEADER]
    for n in range(config.N):
        lines.append(",".join([
            str(n + 1),
            _gen(t["omega_ratio"][n]),
            _gen(t["T_mK"][n]),
            _gen(t["se_T_mK"][n]),
            _sci(t["j_W"][n]),
            _sci(t["se_j_W"][n]),
            _sci(t["J_L_W"]),
            _sci(t["se_J_L_W"]),
            _sci(t["J_R_W"]),
            _sci(t["se_J_R_W"]),
        ]))
    return "\n".join(lines) + "\n"


def _sweep_lines(result: SweepResult, lead=()):
    header = ",".join(tuple(lead) + result.axes) + "," + SWEEP_TAIL
    rows = []
    for row in result.rows:
        cells = [_gen(row.parameters[a]) if not isinstance(row.parameters[a], str)
                 else row.parameters[a] for a in result.axes]
        cells += [_sci(row.J_forward), _sci(row.J_backward), _gen(row.R),
                  row.status.replace(",", ";")]
        rows.append(cells)
    return header, rows


def sweep_csv(result: SweepResult) -> str:
    header, rows = _sweep_lines(result)
    return "\n".join([header] + [",".join(r) for r in rows]) + "\n"


def compare_csv(comparison: ProfileComparison) -> str:
    header, graded = _sweep_lines(comparison.graded, lead=("profile",))
    _, segmented = _sweep_lines(comparison.segmented, lead=("profile",))
    lines = [header]
    lines += [",".join(["graded"] + r) for r in graded]
    lines += [",".join(["segmented"] + r) for r in segmented]
    return "\n".join(lines) + "\n"


def config_digest(rc: RunConfig) -> str:
    return hashlib.sha256(dump_config(rc).encode("utf-8")).hexdigest()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def report_json(kind: str, rc: RunConfig, results: dict) -> str:
    doc = {
        "tool": "ionflux",
        "version": VERSION,
        "kind": kind,
        "config_sha256": config_digest(rc),
        "config": asdict(rc),
        "results": _jsonable(results),
    }
    return json.dumps(doc, indent=2) + "\n"


def steady_json(rc: RunConfig, report: SteadyStateReport) -> str:
    results = {
        "omegas_rad_s": report.omegas,
        "temperatures_mK": report.temperatures * 1e3,
        "site_currents_W": report.site_currents,
        "J_L_W": report.J_L,
        "J_R_W": report.J_R,
        "balance": report.balance,
        "residual_moment_system": report.residuals["moment_system"],
        "residual_stationarity_W": report.residuals["stationarity"],
        "left_sites": list(report.left_sites),
        "right_sites": list(report.right_sites),
        "backend": report.backend,
        "covariance_si": report.moments.matrix,
    }
    return report_json("steady", rc, results)


def langevin_json(rc: RunConfig, config, em: EnsembleMoments, units) -> str:
    t = ensemble_site_table(config, em, units)
    results = {k: v for k, v in t.items()}
    results["n_trials"] = em.n_trials
    results["measure_time_s"] = em.measure_time * units.time
    results["elapsed_s"] = em.elapsed
    return report_json("langevin", rc, results)


def _sweep_rows_json(result: SweepResult):
    return [{"parameters": _jsonable(row.parameters),
             "J_fwd_W": row.J_forward, "J_bwd_W": row.J_backward,
             "R": row.R, "status": row.status} for row in result.rows]


def sweep_json(rc: RunConfig, result: SweepResult) -> str:
    return report_json("sweep", rc, {"axes": list(result.axes),
                                     "rows": _sweep_rows_json(result)})


def compare_json(rc: RunConfig, comparison: ProfileComparison) -> str:
    return report_json("compare", rc, {
        "axes": list(comparison.graded.axes),
        "graded": _sweep_rows_json(comparison.graded),
        "segmented": _sweep_rows_json(comparison.segmented)})
