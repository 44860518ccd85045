"""Shared fixtures: the bundled benchmark network and its learning runs.

The expensive pipelines run once per session; individual tests only read
the results.
"""

from dataclasses import replace

import numpy as np
import pytest

from coot.experiment import load_bundled_config
from coot.offpolicy import LearnParams, run_algorithm1_from_log
from coot.plant import simulate_behavior, simulate_closed_loop
from coot.qlearn import run_algorithm2_from_log


@pytest.fixture(scope="session")
def benchmark():
    return load_bundled_config()


@pytest.fixture(scope="session")
def behavior_log(benchmark):
    mas = benchmark.mas
    K0 = [np.zeros((f.m, f.n)) for f in mas.followers]
    return simulate_behavior(mas, K0, benchmark.params.noise_terms, t_end=145)


@pytest.fixture(scope="session")
def alg1_run(benchmark, behavior_log):
    return run_algorithm1_from_log(benchmark.mas, behavior_log, LearnParams())


@pytest.fixture(scope="session")
def alg2_run(benchmark, behavior_log):
    return run_algorithm2_from_log(benchmark.mas, behavior_log, LearnParams())


@pytest.fixture(scope="session")
def alg1_tight(benchmark, behavior_log):
    """Same pipeline with the regulator iteration driven much deeper."""
    return run_algorithm1_from_log(benchmark.mas, behavior_log, LearnParams(eps2=1e-7))


@pytest.fixture(scope="session")
def tracking_run(benchmark, alg1_tight):
    return simulate_closed_loop(benchmark.mas, alg1_tight, horizon=420)


def random_system(rng, n_max=3, m_max=2, rho_cap=1.0):
    """One random (A, B, Q, R): A scaled to the given radius cap."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    A = rng.standard_normal((n, n))
    radius = max(np.max(np.abs(np.linalg.eigvals(A))), 1e-3)
    A *= rng.uniform(0.3, 1.0) * rho_cap / radius
    B = rng.standard_normal((n, m))
    G = rng.standard_normal((n, n))
    Q = 0.5 * np.eye(n) + G @ G.T
    Gm = rng.standard_normal((m, m))
    R = 0.5 * np.eye(m) + Gm @ Gm.T
    return A, B, Q, R
