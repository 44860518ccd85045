import numpy as np
import pytest

from coot.errors import AssumptionError, StabilityError
from coot.matkit import spectral_radius, symmetrize
from coot.oracle import (
    classic_pi,
    dare_reference,
    dlyap,
    h_fixed_point,
    h_from_p,
    radius_gap_rule,
    regulator_direct_solve,
    stabilizing_pi_group,
    stabilizing_pi_model_based,
    value_gap_rule,
)


def agent(benchmark, i):
    f = benchmark.mas.followers[i]
    return f.A, f.B, benchmark.mas.Q[i], benchmark.mas.R[i]


def test_dlyap_solves_the_fixed_point():
    rng = np.random.default_rng(0)
    Acl = rng.standard_normal((3, 3))
    Acl *= 0.7 / spectral_radius(Acl)
    G = rng.standard_normal((3, 3))
    Q = np.eye(3) + G @ G.T
    P = dlyap(Acl, Q)
    assert np.allclose(P, P.T)
    assert np.linalg.norm(Acl.T @ P @ Acl + Q - P) < 1e-10


def test_dlyap_rejects_unit_circle():
    with pytest.raises(StabilityError):
        dlyap(np.eye(2), np.eye(2))
    # Radius 1 in exact arithmetic that rounds just below: the Kronecker
    # system is singular even though the radius check passes.
    A4 = np.array([[0.0, 1.0], [-1.0, -0.8]])
    with pytest.raises(StabilityError):
        dlyap(A4, np.eye(2))


def test_classic_pi_reaches_riccati_fixed_point(benchmark):
    A, B, Q, R = agent(benchmark, 0)
    # Deadbeat start: A - B K0 is nilpotent for this companion-form agent.
    sol = classic_pi(A, B, Q, R, np.array([[-1.0, -0.2]]))
    P, K = sol.P, sol.K
    gain = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    assert np.allclose(K, gain, atol=1e-10)
    riccati = A.T @ P @ A - A.T @ P @ B @ gain + Q - P
    assert np.linalg.norm(riccati) < 1e-9


def test_classic_pi_value_decreases(benchmark):
    A, B, Q, R = agent(benchmark, 1)
    sol = classic_pi(A, B, Q, R, np.array([[-1.0, -0.4]]))
    for Pa, Pb in zip(sol.P_history, sol.P_history[1:]):
        assert np.linalg.eigvalsh(symmetrize(Pa - Pb)).min() >= -1e-10


def test_classic_pi_needs_stabilizing_start():
    A = np.array([[1.5, 0.0], [0.0, 0.2]])
    B = np.array([[1.0], [0.0]])
    with pytest.raises(StabilityError):
        classic_pi(A, B, np.eye(2), np.eye(1), np.zeros((1, 2)))


def test_stabilizing_iteration_stays_contractive(benchmark):
    A, B, Q, R = agent(benchmark, 2)
    K, gamma, history = stabilizing_pi_model_based(
        A, B, Q, R, np.zeros((1, 2)), beta=0.5, alpha0=1e-4, step_rule=value_gap_rule(0.5)
    )
    assert gamma >= 1.0
    assert spectral_radius(A - B @ K) < 1.0
    for rec in history:
        # The scaled loop stays strictly Schur before and after each step.
        assert rec.gamma * rec.rho < 1.0
        assert (rec.gamma + rec.alpha) * rec.rho < 1.0
        assert rec.alpha > 0.0


def test_lockstep_keeps_group_aligned(benchmark):
    systems = [agent(benchmark, i) for i in range(4)]
    K0 = [np.zeros((1, 2))] * 4
    K, gamma, histories = stabilizing_pi_group(
        systems, K0, beta=0.5, alpha0=1e-4, step_rule=value_gap_rule(0.5)
    )
    lengths = {len(h) for h in histories}
    assert len(lengths) == 1, "agents must sweep the same number of times"
    assert all(g >= 1.0 for g in gamma)
    for (A, B, _, _), Ki in zip(systems, K):
        assert spectral_radius(A - B @ Ki) < 1.0


def test_stabilizing_iteration_rejects_large_start(benchmark):
    A, B, Q, R = agent(benchmark, 2)  # open-loop radius is exactly 1
    with pytest.raises(StabilityError):
        stabilizing_pi_model_based(
            A, B, Q, R, np.zeros((1, 2)), beta=2.0, alpha0=1e-4, step_rule=value_gap_rule(0.5)
        )


def test_radius_gap_rule_fraction_validated():
    with pytest.raises(AssumptionError):
        radius_gap_rule(0.0)
    with pytest.raises(AssumptionError):
        value_gap_rule(1.0)


def test_dare_reference_handles_unstable_plant():
    A = np.array([[1.2, 0.3], [0.0, 0.9]])
    B = np.array([[0.0], [1.0]])
    sol = dare_reference(A, B, np.eye(2), np.eye(1))
    gain = np.linalg.solve(1.0 + B.T @ sol.P @ B, B.T @ sol.P @ A)
    residual = A.T @ sol.P @ A - A.T @ sol.P @ B @ gain + np.eye(2) - sol.P
    assert np.linalg.norm(residual) < 1e-9
    assert spectral_radius(A - B @ sol.K) < 1.0


def test_dare_reference_on_boundary_radius(benchmark):
    # Agents 3 and 4 have open-loop radius exactly 1; the reference must
    # detour through the stabilizing phase rather than trip on a singular
    # Lyapunov system.
    for i in (2, 3):
        A, B, Q, R = agent(benchmark, i)
        sol = dare_reference(A, B, Q, R)
        assert spectral_radius(A - B @ sol.K) < 1.0


def test_h_views_agree(benchmark):
    A, B, Q, R = agent(benchmark, 0)
    K = np.array([[-1.0, -0.2]])
    gamma = 0.9
    assert gamma * spectral_radius(A - B @ K) < 1.0
    P = dlyap(gamma * (A - B @ K), Q + K.T @ R @ K)
    H_direct = h_from_p(P, A, B, Q, R, gamma)
    H_fixed = h_fixed_point(A, B, Q, R, K, gamma)
    assert np.allclose(H_direct, H_fixed, atol=1e-9)


def test_h_fixed_point_without_stability():
    # The fixed point exists whenever no eigenvalue product hits one, even
    # for a loop that diverges.
    A, B, K = np.array([[2.0]]), np.array([[0.0]]), np.array([[0.0]])
    H = h_fixed_point(A, B, np.eye(1), np.eye(1), K)
    Pi = np.vstack([np.eye(1), -K]) @ np.hstack([A, B])
    QR = np.diag([1.0, 1.0])
    assert np.linalg.norm(QR + Pi.T @ H @ Pi - H) < 1e-10


def test_h_fixed_point_singular_pair():
    # Eigenvalues 2 and 0.5 multiply to one: no unique fixed point.
    A = np.diag([2.0, 0.5])
    B = np.zeros((2, 1))
    with pytest.raises(StabilityError):
        h_fixed_point(A, B, np.eye(2), np.eye(1), np.zeros((1, 2)))


def test_regulator_direct_solve_benchmark(benchmark):
    leader = benchmark.mas.leader
    for f in benchmark.mas.followers:
        X, U = regulator_direct_solve(f.A, f.B, f.C, f.S, leader.E, leader.F)
        assert np.linalg.norm(f.A @ X + f.B @ U - X @ leader.E) < 1e-12
        assert np.linalg.norm(f.C @ X + f.S @ U + leader.F) < 1e-12


def test_regulator_direct_solve_unsolvable():
    with pytest.raises(AssumptionError):
        regulator_direct_solve(
            A=np.zeros((1, 1)),
            B=np.zeros((1, 1)),
            C=np.eye(1),
            S=np.zeros((1, 1)),
            E=np.eye(1),
            F=np.array([[-1.0]]),
        )
