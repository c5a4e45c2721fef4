"""Bias-pair experiments, gradient/map sweeps, zero crossings, comparisons."""

import os

import numpy as np
import pytest

import ionflux.config as C
from ionflux import (MG24, ConfigurationError, ExperimentBase, LaserBeam,
                     SolverError, SweepAxis, SweepResult, SweepRow, SweepSpec,
                     UndefinedRectificationError, characteristic_length,
                     ChainConfig, FrequencyProfile, find_zero_crossings,
                     rectification_factor, run_bias_pair, sweep_gradient,
                     sweep_map)
from ionflux.constants import TWO_PI
from ionflux.serialize import sweep_csv

# fig3-preset coarse subset, frozen from a reference run
FROZEN_GRADIENT = [
    (0.05, 4.484015832709e-22, 4.165874857919e-22, 7.095001147617e-02),
    (0.25, 4.732275146360e-27, 3.905482627613e-27, 1.747135348592e-01),
    (0.45, 1.136104370858e-27, 1.184968368333e-27, -4.123654165040e-02),
    (0.65, 4.728459596620e-28, 4.827482628477e-28, -2.051235384520e-02),
    (0.85, 2.401275663065e-28, 2.427691060075e-28, -1.088087254769e-02),
    (1.05, 1.379764188354e-28, 1.386903488853e-28, -5.147654870378e-03),
    (1.25, 8.609329378751e-29, 8.622167165639e-29, -1.488928089866e-03),
    (1.45, 5.700907540162e-29, 5.693869022604e-29, 1.234631066757e-03),
]


@pytest.fixture(scope="module")
def fig3_base():
    return C.experiment_base(C.preset_config("fig3"))


def beam(d, intensity=0.08):
    return LaserBeam(intensity_ratio=intensity, detuning=d * MG24.linewidth,
                     species=MG24)


def test_frozen_gradient_regression(fig3_base):
    vals = tuple(v for v, *_ in FROZEN_GRADIENT)
    res = sweep_gradient(SweepSpec(base=fig3_base,
                                   axis1=SweepAxis("delta_omega_ratio", vals)))
    for row, (v, jf, jb, r) in zip(res.rows, FROZEN_GRADIENT):
        assert row.status == "ok"
        assert row.parameters["delta_omega_ratio"] == v
        assert row.J_forward == pytest.approx(jf, rel=1e-8)
        assert row.J_backward == pytest.approx(jb, rel=1e-8)
        assert row.R == pytest.approx(r, rel=1e-8)


def test_uniform_chain_reports_no_rectification(fig3_base):
    res = sweep_gradient(SweepSpec(base=fig3_base,
                                   axis1=SweepAxis("delta_omega_ratio", (0.0, 0.3))))
    assert abs(res.rows[0].R) <= 1e-8


def test_rectification_recomputes_bit_for_bit(fig3_sweep):
    for row in fig3_sweep.rows:
        if row.status == "ok":
            assert row.R == rectification_factor(row.J_forward, row.J_backward)


def test_axis_validation(fig3_base):
    with pytest.raises(ConfigurationError):
        SweepAxis("voltage", (0.1, 0.2))
    with pytest.raises(ConfigurationError):
        SweepAxis("delta_omega_ratio", ())
    with pytest.raises(ConfigurationError, match="monotone"):
        SweepAxis("delta_omega_ratio", (0.1, 0.3, 0.2))
    with pytest.raises(ConfigurationError, match="monotone"):
        SweepAxis("omega1", (2e5, 2e5))


def test_equal_bath_temperatures_are_rejected(fig3_base):
    base = ExperimentBase(config=fig3_base.config, hot=beam(-0.05),
                          cold=beam(-0.05), n_left=3, n_right=3)
    with pytest.raises(UndefinedRectificationError):
        run_bias_pair(base)


def test_inverted_beams_are_rejected(fig3_base):
    with pytest.raises(ConfigurationError, match="swap the beams"):
        ExperimentBase(config=fig3_base.config, hot=beam(-0.1), cold=beam(-0.02),
                       n_left=3, n_right=3)


def test_solver_errors_name_the_bias_direction(fig3_base):
    dead = ExperimentBase(config=fig3_base.config, hot=beam(-0.02, intensity=0.0),
                          cold=beam(-0.1, intensity=0.0), n_left=3, n_right=3)
    with pytest.raises(SolverError, match=r"\[forward bias, hot beam left\]"):
        run_bias_pair(dead)


def test_map_axis_order_and_parameters(fig3_base):
    a1 = SweepAxis("delta_omega_ratio", (0.2, 0.4, 0.6))
    a2 = SweepAxis("lattice_ratio", (1.0, 1.5))
    res = sweep_map(SweepSpec(base=fig3_base, axis1=a1, axis2=a2))
    assert res.axes == ("lattice_ratio", "delta_omega_ratio")
    assert len(res.rows) == 6
    # axis1 varies fastest within each axis2 row
    got = [(r.parameters["lattice_ratio"], r.parameters["delta_omega_ratio"])
           for r in res.rows]
    want = [(l, d) for l in (1.0, 1.5) for d in (0.2, 0.4, 0.6)]
    assert got == want
    assert all(r.status == "ok" for r in res.rows)


def test_thread_count_does_not_change_results(fig3_base, monkeypatch):
    spec = SweepSpec(base=fig3_base,
                     axis1=SweepAxis("delta_omega_ratio", (0.1, 0.3, 0.5)),
                     axis2=SweepAxis("lattice_ratio", (1.0, 2.0)))
    monkeypatch.setenv("IONFLUX_THREADS", "1")
    serial = sweep_csv(sweep_map(spec))
    monkeypatch.setenv("IONFLUX_THREADS", "3")
    pooled = sweep_csv(sweep_map(spec))
    assert serial == pooled


def test_failed_points_are_recorded_not_raised(fig3_base):
    # the first value drives the top trap frequency negative
    res = sweep_gradient(SweepSpec(base=fig3_base,
                                   axis1=SweepAxis("delta_omega_ratio", (-2.0, 0.3))))
    assert res.rows[0].status.startswith("error")
    assert np.isnan(res.rows[0].R)
    assert res.rows[1].status == "ok"


def synthetic_result(points):
    rows = [SweepRow(parameters={"delta_omega_ratio": x}, J_forward=1.0,
                     J_backward=1.0, R=r, status=("ok" if np.isfinite(r) else "error: x"))
            for x, r in points]
    return SweepResult(axes=("delta_omega_ratio",), rows=tuple(rows))


def test_zero_crossing_linear_interpolation():
    res = synthetic_result([(0.1, 0.2), (0.2, -0.2), (0.3, -0.1), (0.4, 0.3)])
    got = find_zero_crossings(res)
    np.testing.assert_allclose(got, [0.15, 0.325], rtol=1e-12)


def test_zero_crossing_skips_trivial_origin():
    # the uniform-chain point is an exact structural zero, not a sign change
    res = synthetic_result([(0.0, 1e-12), (0.1, -0.2), (0.2, 0.2)])
    got = find_zero_crossings(res)
    np.testing.assert_allclose(got, [0.15], rtol=1e-12)


def test_zero_crossing_broken_chain():
    res = synthetic_result([(0.1, 0.2), (0.2, np.nan), (0.3, -0.2)])
    assert find_zero_crossings(res) == []


def test_profile_axis_sweeps_both_kinds(fig3_base):
    res = sweep_map(SweepSpec(base=fig3_base,
                              axis1=SweepAxis("delta_omega_ratio", (0.3, 0.6)),
                              axis2=SweepAxis("profile", ("graded", "segmented"))))
    assert [r.parameters["profile"] for r in res.rows] == ["graded"] * 2 + ["segmented"] * 2
    assert all(r.status == "ok" for r in res.rows)
    # same gradient, different layout: the two chains rectify differently
    assert res.rows[0].R != res.rows[2].R


def test_gradient_sweep_requires_gradient_axis(fig3_base):
    with pytest.raises(ConfigurationError, match="delta_omega_ratio"):
        sweep_gradient(SweepSpec(base=fig3_base,
                                 axis1=SweepAxis("lattice_ratio", (1.0, 2.0))))
