import numpy as np
import pytest

from coot.errors import AssumptionError, ConvergenceError, DimensionError
from coot.oracle import regulator_direct_solve
from coot.regulator import (
    assemble_data_driven,
    assemble_model_based,
    build_basis,
    choose_kappa,
    feedforward_gain,
    iterate_chi,
)


@pytest.fixture(scope="module")
def bench_basis(benchmark):
    f = benchmark.mas.followers[0]
    return f, build_basis(f.C, f.S, benchmark.mas.leader.F)


def test_basis_size(bench_basis):
    f, basis = bench_basis
    n_v, n_y = 2, 1
    # One particular pair plus n_v * (n + m - n_y) kernel pairs.
    assert basis.h == 1 + n_v * (f.n + f.m - n_y) == 5


def test_every_member_satisfies_output_equation(benchmark, bench_basis):
    f, basis = bench_basis
    F = benchmark.mas.leader.F
    assert np.linalg.norm(f.C @ basis.X[0] + f.S @ basis.U[0] + F) < 1e-12
    rng = np.random.default_rng(3)
    for _ in range(5):
        d = rng.standard_normal(basis.h - 1)
        X = basis.X[0] + sum(di * Xi for di, Xi in zip(d, basis.X[1:]))
        U = basis.U[0] + sum(di * Ui for di, Ui in zip(d, basis.U[1:]))
        assert np.linalg.norm(f.C @ X + f.S @ U + F) < 1e-10


def test_kernel_pairs_are_orthonormal(bench_basis):
    _, basis = bench_basis
    stacks = [
        np.concatenate([X.ravel(order="F"), U.ravel(order="F")])
        for X, U in zip(basis.X[1:], basis.U[1:])
    ]
    G = np.array([[a @ b for b in stacks] for a in stacks])
    assert np.allclose(G, np.eye(len(stacks)), atol=1e-10)


def test_basis_rejects_rank_deficient_outputs():
    with pytest.raises(AssumptionError):
        build_basis(C=np.zeros((1, 2)), S=np.zeros((1, 1)), F_obs=np.array([[-1.0]]))


def test_model_based_solution_matches_direct(benchmark, bench_basis):
    f, basis = bench_basis
    leader = benchmark.mas.leader
    problem = assemble_model_based(np.eye(f.n), f.A, f.B, leader.E, basis)
    result = iterate_chi(problem, eps2=1e-10)
    X_ref, U_ref = regulator_direct_solve(f.A, f.B, f.C, f.S, leader.E, leader.F)
    assert np.allclose(result.X, X_ref, atol=1e-6)
    assert np.allclose(result.U, U_ref, atol=1e-6)
    # The recovered pair satisfies both equations on its own.
    assert np.linalg.norm(f.A @ result.X + f.B @ result.U - result.X @ leader.E) < 1e-6
    assert np.linalg.norm(f.C @ result.X + f.S @ result.U + leader.F) < 1e-6


def test_weighted_residual_identity(benchmark, bench_basis):
    # Feeding the data-driven assembly exact cross terms must reproduce the
    # model-based system with weight M = A'P.
    f, basis = bench_basis
    leader = benchmark.mas.leader
    rng = np.random.default_rng(5)
    G = rng.standard_normal((f.n, f.n))
    P = np.eye(f.n) + G @ G.T
    M = f.A.T @ P
    L1 = f.A.T @ P @ f.B
    L3_list = [
        f.A.T @ P @ (f.A @ basis.X[l] - basis.X[l] @ leader.E) for l in range(basis.h)
    ]
    direct = assemble_model_based(M, f.A, f.B, leader.E, basis)
    learned = assemble_data_driven(L3_list, L1, basis)
    assert np.allclose(direct.Omega, learned.Omega, atol=1e-10)
    assert np.allclose(direct.eta, learned.eta, atol=1e-10)


def test_data_driven_needs_all_blocks(bench_basis):
    _, basis = bench_basis
    with pytest.raises(DimensionError):
        assemble_data_driven([np.zeros((2, 2))] * (basis.h - 1), np.zeros((2, 1)), basis)


def test_choose_kappa_bounds(benchmark, bench_basis):
    f, basis = bench_basis
    problem = assemble_model_based(np.eye(f.n), f.A, f.B, benchmark.mas.leader.E, basis)
    kappa = choose_kappa(problem)
    sing_max = np.linalg.norm(problem.Omega, 2)
    assert 0.0 < kappa <= (1.0 / sing_max**2) * (1.0 + 1e-9)
    with pytest.raises(AssumptionError):
        choose_kappa(problem, c=0.0)
    with pytest.raises(AssumptionError):
        choose_kappa(problem, c=1.5)


def test_iterate_chi_residual_decreases(benchmark, bench_basis):
    f, basis = bench_basis
    problem = assemble_model_based(np.eye(f.n), f.A, f.B, benchmark.mas.leader.E, basis)
    result = iterate_chi(problem, eps2=1e-8)
    residuals = [r for (_, r, _) in result.history]
    assert all(b <= a + 1e-14 for a, b in zip(residuals, residuals[1:]))


def test_iterate_chi_iteration_cap(benchmark, bench_basis):
    f, basis = bench_basis
    problem = assemble_model_based(np.eye(f.n), f.A, f.B, benchmark.mas.leader.E, basis)
    with pytest.raises(ConvergenceError):
        iterate_chi(problem, eps2=1e-12, max_iters=3)


def test_feedforward_gain_arithmetic():
    U = np.array([[1.0, 0.0]])
    K = np.array([[2.0, 0.0]])
    X = np.array([[1.0, 1.0], [0.0, 1.0]])
    assert np.allclose(feedforward_gain(U, K, X), [[3.0, 2.0]])
