"""Model-based reference solutions the data-driven pipeline is tested against.

Nothing here is used by the learning code at run time.  These routines see
the true (A, B) matrices and produce the quantities the data-driven stages
are supposed to recover: Riccati solutions, optimal gains, exact regulator
pairs, and the scaled policy-iteration trajectory.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AssumptionError,
    ConvergenceError,
    DimensionError,
    StabilityError,
)
from .matkit import scale_growth_bound, spectral_radius, symmetrize, unvec, vec


def dlyap(Acl, Q):
    """Solve P = Acl' P Acl + Q for symmetric P via the Kronecker system."""
    Acl = np.asarray(Acl, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = Acl.shape[0]
    if Acl.shape != (n, n) or Q.shape != (n, n):
        raise DimensionError("dlyap needs square matrices of equal order")
    rho = spectral_radius(Acl)
    if rho >= 1.0:
        raise StabilityError(f"closed loop is not Schur (spectral radius {rho:.6f})")
    lhs = np.eye(n * n) - np.kron(Acl.T, Acl.T)
    try:
        P = unvec(np.linalg.solve(lhs, vec(Q)), n, n)
    except np.linalg.LinAlgError as exc:
        # Eigenvalue products land on 1 within rounding: radius numerically
        # below 1 but the fixed-point system is singular anyway.
        raise StabilityError(
            f"closed loop sits on the unit circle to machine precision (radius {rho:.15f})"
        ) from exc
    return symmetrize(P)


@dataclass
class AreSolution:
    """Converged Riccati solution with the iterates that led to it."""

    P: np.ndarray
    K: np.ndarray
    P_history: list = field(default_factory=list)
    K_history: list = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.P_history)


def classic_pi(A, B, Q, R, K0, eps=1e-12, max_iters=500):
    """Policy iteration from a stabilizing gain down to the Riccati solution.

    Each sweep evaluates the current policy with a Lyapunov solve and then
    improves it; the value matrices decrease monotonically to the fixed
    point.  Stops when successive value matrices agree to ``eps`` in
    Frobenius norm.
    """
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    Q, R = np.asarray(Q, dtype=float), np.asarray(R, dtype=float)
    K = np.asarray(K0, dtype=float)
    rho = spectral_radius(A - B @ K)
    if rho >= 1.0:
        raise StabilityError(f"initial gain is not stabilizing (spectral radius {rho:.6f})")
    P_hist, K_hist = [], []
    P_prev = None
    for _ in range(max_iters):
        P = dlyap(A - B @ K, Q + K.T @ R @ K)
        P_hist.append(P)
        K_hist.append(K)
        if P_prev is not None and np.linalg.norm(P - P_prev) <= eps:
            return AreSolution(P=P, K=K, P_history=P_hist, K_history=K_hist)
        K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        P_prev = P
    raise ConvergenceError(f"policy iteration did not meet {eps:.1e} in {max_iters} sweeps")


@dataclass
class StepContext:
    """What a step-size rule may look at when extending the scale factor."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    gamma: float
    K_new: np.ndarray
    P: np.ndarray
    Q_bar_new: np.ndarray


def radius_gap_rule(a=0.5):
    """Step rule taking a fixed fraction of the exact admissible gap.

    The scale may grow until gamma * rho(A - B K_new) hits 1; this rule
    moves a fraction ``a`` of the way there.  Model-based only.
    """
    if not 0.0 < a < 1.0:
        raise AssumptionError("fraction a must lie in (0, 1)")

    def rule(ctx):
        rho = spectral_radius(ctx.A - ctx.B @ ctx.K_new)
        if rho <= 0.0:
            return 10.0
        return a * (1.0 / rho - ctx.gamma)

    return rule


def value_gap_rule(a=0.5, alpha_max=10.0):
    """Step rule from the value/cost singular-value bound.

    Uses only quantities a data-driven run can also estimate, so the same
    trajectory is reproducible without the model.
    """
    if not 0.0 < a < 1.0:
        raise AssumptionError("fraction a must lie in (0, 1)")

    def rule(ctx):
        return a * scale_growth_bound(ctx.P, ctx.Q_bar_new, ctx.gamma, cap=alpha_max)

    return rule


@dataclass
class StabRecord:
    """One sweep of the scaled stabilizing iteration for one system."""

    k: int
    gamma: float
    alpha: float
    K: np.ndarray
    P: np.ndarray
    rho: float


def stabilizing_pi_group(systems, K0, beta, alpha0, step_rule, lambda_bar=1.0, max_iters=1000):
    """Scaled policy iteration run in lockstep over a group of systems.

    ``systems`` is a list of (A, B, Q, R) tuples.  All systems advance
    together and the phase ends only when every scale factor has reached
    ``lambda_bar``; systems that crossed early keep refining their gain
    while the slow ones catch up.  Returns (K_list, gamma_list, histories).
    """
    mats = [tuple(np.asarray(M, dtype=float) for M in sys_i) for sys_i in systems]
    K = [np.asarray(Ki, dtype=float) for Ki in K0]
    if len(K) != len(mats):
        raise DimensionError("need one initial gain per system")
    gamma = [float(beta) + float(alpha0)] * len(mats)
    for (A, B, _, _), Ki, g in zip(mats, K, gamma):
        rho = spectral_radius(A - B @ Ki)
        if g * rho >= 1.0:
            raise StabilityError(
                f"initial scaled loop is not contractive (gamma*rho = {g * rho:.6f}); "
                "use a smaller starting scale"
            )
    histories = [[] for _ in mats]
    for k in range(max_iters):
        next_gamma = []
        for i, (A, B, Q, R) in enumerate(mats):
            g = gamma[i]
            Q_bar = Q + K[i].T @ R @ K[i]
            P = dlyap(g * (A - B @ K[i]), Q_bar)
            K_new = (g**2) * np.linalg.solve(R + (g**2) * (B.T @ P @ B), B.T @ P @ A)
            Q_bar_new = Q + K_new.T @ R @ K_new
            ctx = StepContext(A=A, B=B, Q=Q, R=R, gamma=g, K_new=K_new, P=P, Q_bar_new=Q_bar_new)
            alpha = float(step_rule(ctx))
            rho_new = spectral_radius(A - B @ K_new)
            if (g + alpha) * rho_new >= 1.0:
                raise StabilityError(
                    f"step rule overshot: (gamma+alpha)*rho = {(g + alpha) * rho_new:.6f} for system {i}"
                )
            histories[i].append(StabRecord(k=k, gamma=g, alpha=alpha, K=K_new, P=P, rho=rho_new))
            K[i] = K_new
            next_gamma.append(g + alpha)
        gamma = next_gamma
        if all(g >= lambda_bar for g in gamma):
            return K, gamma, histories
    raise ConvergenceError(f"scale factors did not reach {lambda_bar} in {max_iters} sweeps")


def stabilizing_pi_model_based(A, B, Q, R, K0, beta, alpha0, step_rule, lambda_bar=1.0, max_iters=1000):
    """Single-system scaled policy iteration; see :func:`stabilizing_pi_group`."""
    K, gamma, histories = stabilizing_pi_group(
        [(A, B, Q, R)], [K0], beta, alpha0, step_rule, lambda_bar, max_iters
    )
    return K[0], gamma[0], histories[0]


def dare_reference(A, B, Q, R, eps=1e-12):
    """Self-contained Riccati reference: stabilize first, then refine.

    If A itself is Schur the classic iteration starts from the zero gain;
    otherwise the scaled iteration manufactures a stabilizing gain first.
    """
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    K0 = np.zeros((B.shape[1], A.shape[0]))
    rho = spectral_radius(A)
    # The margin catches radii that are 1 in exact arithmetic but round below.
    if rho >= 1.0 - 1e-9:
        beta = 0.5 / rho
        K0, _, _ = stabilizing_pi_model_based(
            A, B, Q, R, K0, beta=beta, alpha0=1e-4, step_rule=radius_gap_rule(0.5)
        )
    return classic_pi(A, B, Q, R, K0, eps=eps)


def h_from_p(P, A, B, Q, R, gamma=1.0):
    """Quadratic form matrix in (x, u) matching a value matrix P at scale gamma."""
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    P = symmetrize(P)
    g2 = gamma**2
    H11 = g2 * (A.T @ P @ A) + np.asarray(Q, dtype=float)
    H12 = g2 * (A.T @ P @ B)
    H22 = g2 * (B.T @ P @ B) + np.asarray(R, dtype=float)
    return np.block([[H11, H12], [H12.T, H22]])


def h_fixed_point(A, B, Q, R, K, gamma=1.0):
    """Unique solution of the action-value fixed-point equation, if any.

    Solves H = blkdiag(Q, R) + Pi' H Pi with Pi = gamma [I; -K][A B] via
    the Kronecker system; exists whenever no pair of Pi eigenvalues has
    product one, regardless of stability.
    """
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    K = np.asarray(K, dtype=float)
    n, m = A.shape[0], B.shape[1]
    QR = np.zeros((n + m, n + m))
    QR[:n, :n] = np.asarray(Q, dtype=float)
    QR[n:, n:] = np.asarray(R, dtype=float)
    Pi = gamma * np.vstack([np.eye(n), -K]) @ np.hstack([A, B])
    d = n + m
    lhs = np.eye(d * d) - np.kron(Pi.T, Pi.T)
    try:
        H = unvec(np.linalg.solve(lhs, vec(QR)), d, d)
    except np.linalg.LinAlgError as exc:
        raise StabilityError(
            "action-value fixed point is singular at this scale"
        ) from exc
    return symmetrize(H)


def regulator_direct_solve(A, B, C, S, E, F, tol=1e-10):
    """Exact solution (X, U) of the output-regulation linear equations.

    Solves A X + B U = X E together with C X + S U + F = 0 as one linear
    system in the stacked unknowns.  Raises when no solution exists, which
    happens exactly when an eigenvalue of E is a transmission zero.
    """
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    C, S = np.asarray(C, dtype=float), np.asarray(S, dtype=float)
    E, F = np.asarray(E, dtype=float), np.asarray(F, dtype=float)
    n, m, n_v = A.shape[0], B.shape[1], E.shape[0]
    In, Inv = np.eye(n), np.eye(n_v)
    top = np.hstack([np.kron(Inv, A) - np.kron(E.T, In), np.kron(Inv, B)])
    bot = np.hstack([np.kron(Inv, C), np.kron(Inv, S)])
    lhs = np.vstack([top, bot])
    rhs = np.concatenate([np.zeros(n * n_v), -vec(F)])
    sol, _, _, _ = np.linalg.lstsq(lhs, rhs, rcond=None)
    residual = np.linalg.norm(lhs @ sol - rhs)
    if residual > tol * max(1.0, np.linalg.norm(rhs)):
        raise AssumptionError(
            f"regulator equations have no solution (residual {residual:.3e}); "
            "a leader eigenvalue coincides with a transmission zero"
        )
    X = unvec(sol[: n * n_v], n, n_v)
    U = unvec(sol[n * n_v :], m, n_v)
    return X, U
