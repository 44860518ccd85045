"""Regulator-equation machinery shared by both learning pipelines.

The pair (X, U) solving A X + B U = X E and C X + S U + F = 0 is found in
two stages.  First an affine family of output-consistent candidates is
parameterized: a particular pair from the pseudoinverse of [C S] plus a
basis of kernel pairs.  Second, a gradient iteration picks the family
member that also satisfies the dynamic equation, using only quantities a
data-driven run can estimate.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError, ConvergenceError, DimensionError
from .matkit import null_space_basis, rank_with_tol, spectral_radius, unvec, vec


@dataclass
class RegulatorBasis:
    """Affine parameterization of all pairs satisfying the output equation.

    ``X[0], U[0]`` is the particular pair; the remaining entries span the
    kernel, so every output-consistent pair is
    (X[0] + sum_l d_l X[l], U[0] + sum_l d_l U[l]).
    """

    X: list
    U: list
    n: int
    m: int
    n_v: int

    @property
    def h(self):
        return len(self.X)


def build_basis(C, S, F_obs, tol=1e-8):
    """Particular plus kernel pairs from the output matrices and observed F.

    ``F_obs`` is the follower's estimate of the leader output matrix at
    data-collection time; with an exact estimate the particular pair solves
    C X + S U + F = 0 exactly.
    """
    C = np.asarray(C, dtype=float)
    S = np.asarray(S, dtype=float)
    F_obs = np.asarray(F_obs, dtype=float)
    n_y, n = C.shape
    m = S.shape[1]
    n_v = F_obs.shape[1]
    if F_obs.shape[0] != n_y or S.shape[0] != n_y:
        raise DimensionError("C, S, and F must agree on the number of output rows")
    Cbar = np.hstack([C, S])
    if rank_with_tol(Cbar, tol) < n_y:
        raise AssumptionError("[C S] must have full row rank")

    # Particular pair: minimum-norm solution of Cbar [X; U] = -F_obs.
    stack1 = -Cbar.T @ np.linalg.solve(Cbar @ Cbar.T, F_obs)
    X = [stack1[:n, :]]
    U = [stack1[n:, :]]

    # Kernel pairs: each kernel vector of I_{n_v} kron Cbar, unstacked.
    for w in null_space_basis(np.kron(np.eye(n_v), Cbar), tol):
        stack = unvec(w, n + m, n_v)
        X.append(stack[:n, :])
        U.append(stack[n:, :])
    return RegulatorBasis(X=X, U=U, n=n, m=m, n_v=n_v)


@dataclass
class RegulatorProblem:
    """Linear system Omega chi = eta whose solution encodes (X, U)."""

    Omega: np.ndarray
    eta: np.ndarray
    basis: RegulatorBasis


def _assemble(columns_top, eta_top, basis):
    """Stack the dynamic-residual block over the reconstruction block."""
    n, m, n_v, h = basis.n, basis.m, basis.n_v, basis.h
    n_top = columns_top[0].size if columns_top else eta_top.size
    top = np.zeros((n_top, (h - 1) + (n + m) * n_v))
    for idx, col in enumerate(columns_top):
        top[:, idx] = col
    bot = np.zeros(((n + m) * n_v, (h - 1) + (n + m) * n_v))
    for l in range(1, h):
        bot[:, l - 1] = vec(np.vstack([basis.X[l], basis.U[l]]))
    bot[:, h - 1 :] = -np.eye((n + m) * n_v)
    Omega = np.vstack([top, bot])
    eta = np.concatenate([eta_top, -vec(np.vstack([basis.X[0], basis.U[0]]))])
    return RegulatorProblem(Omega=Omega, eta=eta, basis=basis)


def assemble_model_based(M, A, B, E, basis):
    """Assembly with exact dynamic residuals, for reference and testing.

    The residual of pair l is X_l E - A X_l - B U_l, weighted by M.
    """
    M = np.asarray(M, dtype=float)
    A, B, E = (np.asarray(Z, dtype=float) for Z in (A, B, E))

    def weighted_residual(l):
        res = basis.X[l] @ E - A @ basis.X[l] - B @ basis.U[l]
        return vec(M @ res)

    cols = [weighted_residual(l) for l in range(1, basis.h)]
    eta_top = -weighted_residual(0)
    return _assemble(cols, eta_top, basis)


def assemble_data_driven(L3_list, L1, basis):
    """Assembly from learned cross terms, no model matrices involved.

    ``L3_list[l]`` estimates A'P pi_l for pair l (pi_l the dynamic residual
    of X_l alone) and ``L1`` estimates A'P B, so the weighted residual of
    pair l is recovered as -(L3_list[l] + L1 U_l).
    """
    L1 = np.asarray(L1, dtype=float)
    if len(L3_list) != basis.h:
        raise DimensionError(f"need {basis.h} cross-term blocks, got {len(L3_list)}")

    def weighted_residual(l):
        return vec(-(np.asarray(L3_list[l], dtype=float) + L1 @ basis.U[l]))

    cols = [weighted_residual(l) for l in range(1, basis.h)]
    eta_top = -weighted_residual(0)
    return _assemble(cols, eta_top, basis)


def choose_kappa(problem, c=1.0):
    """Gradient step 0 < kappa <= c / rho(Omega' Omega)."""
    if not 0.0 < c <= 1.0:
        raise AssumptionError("step fraction c must lie in (0, 1]")
    rho = spectral_radius(problem.Omega.T @ problem.Omega)
    if rho <= 0.0:
        raise AssumptionError("Omega is identically zero")
    return c / rho


@dataclass
class ChiResult:
    """Converged regulator iteration with its per-step history."""

    chi: np.ndarray
    X: np.ndarray
    U: np.ndarray
    history: list = field(default_factory=list)  # (n, residual, chi_delta)

    @property
    def iterations(self):
        return len(self.history)


def iterate_chi(problem, eps2=1e-4, max_iters=200000, kappa=None):
    """Plain gradient descent on |Omega chi - eta|^2 from chi = 0.

    Stops when the update norm drops to ``eps2``.  The kernel directions of
    Omega stay untouched, so the limit is the minimum-norm solution.
    """
    if kappa is None:
        kappa = choose_kappa(problem)
    Omega, eta, basis = problem.Omega, problem.eta, problem.basis
    n, m, n_v, h = basis.n, basis.m, basis.n_v, basis.h
    chi = np.zeros(Omega.shape[1])
    history = []
    for it in range(int(max_iters)):
        r = Omega @ chi - eta
        step = kappa * (Omega.T @ r)
        chi = chi - step
        delta = float(np.linalg.norm(step))
        history.append((it, float(np.linalg.norm(r)), delta))
        if delta <= eps2:
            stack = unvec(chi[h - 1 :], n + m, n_v)
            return ChiResult(chi=chi, X=stack[:n, :], U=stack[n:, :], history=history)
    raise ConvergenceError(
        f"regulator iteration did not meet {eps2:.1e} in {int(max_iters)} steps"
    )


def feedforward_gain(U, K, X):
    """T = U + K X, the input gain applied to the leader-state estimate."""
    return np.asarray(U, dtype=float) + np.asarray(K, dtype=float) @ np.asarray(X, dtype=float)
