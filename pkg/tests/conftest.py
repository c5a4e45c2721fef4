"""Shared fixtures. The expensive Langevin ensemble lives in test_acceptance."""

import time

import numpy as np
import pytest

import ionflux
import ionflux.config as C


@pytest.fixture(scope="session")
def fig2_rc():
    return C.preset_config("fig2")


@pytest.fixture(scope="session")
def fig2_setup(fig2_rc):
    cfg = C.chain_config(fig2_rc)
    bath = C.bath_assignment(fig2_rc, cfg)
    return cfg, bath


@pytest.fixture(scope="session")
def fig2_report(fig2_setup):
    cfg, bath = fig2_setup
    return ionflux.steady_state_report(cfg, bath)


@pytest.fixture(scope="session")
def fig3_sweep_timed():
    rc = C.preset_config("fig3")
    t0 = time.perf_counter()
    result = ionflux.sweep_gradient(C.sweep_spec(rc))
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def fig3_sweep(fig3_sweep_timed):
    return fig3_sweep_timed[0]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260822)
