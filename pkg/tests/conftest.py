"""Shared fixtures: the six-strategy benchmark configuration and its
pre-built solver dependencies (session-scoped, they are expensive)."""

import numpy as np
import pytest

from flowexec.myopic import InventoryRisk
from flowexec.ou_flow import FlowParams
from flowexec.simulation import build_table1_dependencies, table1

BENCH_SEED = 20260810


@pytest.fixture(scope="session")
def bench_params():
    return FlowParams(beta=0.05, sigma=0.14, kappa=10.0, eta=0.075)


@pytest.fixture(scope="session")
def bench_risk():
    return InventoryRisk.constant(0.1)


@pytest.fixture(scope="session")
def bench_deps(bench_params, bench_risk):
    return build_table1_dependencies(bench_params, bench_risk, 3.0)


@pytest.fixture(scope="session")
def table1_rows(bench_params, bench_risk, bench_deps):
    """The full 20,000-path, common-random-number comparison."""
    return table1(bench_params, bench_risk, 3.0, 0.0, n_paths=20000,
                  seed=BENCH_SEED, dt=0.01, deps=bench_deps)


@pytest.fixture(scope="session")
def fig2_params():
    return FlowParams(beta=0.05, sigma=0.14, kappa=10.0, eta=0.05)


def rng(seed=0):
    return np.random.default_rng(seed)
