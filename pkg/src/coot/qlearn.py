"""Q-learning variant: everything runs on the action-value matrix H.

The stacked vector Z = [x; u] carries both state and input, so policy
evaluation becomes a single regression on vecs(H) with no separate cross
terms.  The price is a second regression at the end to dig the regulator
right-hand sides back out of the logged data; the reward is a much smaller
unknown (criterion: 6 vs 15 parameters for two states and one input).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionError, SearchError
from .matkit import (
    is_positive_definite,
    min_norm_least_squares,
    rank_with_tol,
    scale_growth_bound,
    symmetrize,
    unvec,
    unvecs,
    vecs,
    vecv_rows,
)
from .offpolicy import (
    Beta0Result,
    DEFAULT_BETA_SEQUENCE,
    ExcitationReport,
    LearnedGains,
    LearnParams,
    StabIterate,
    StabPhaseResult,
    _build_bases,
    _initial_gains,
    _resolve_window,
    build_regression_bundle,
)
from .plant import simulate_behavior
from .regulator import assemble_data_driven, choose_kappa, feedforward_gain, iterate_chi


@dataclass
class QRegression:
    """Row blocks for the action-value regressions of one agent.

    Wraps the shared :class:`RegressionBundle` (reused verbatim by the
    regulator extraction) and adds the stacked-vector monomial rows plus
    the raw successor states needed to rebuild policy-dependent rows.
    """

    bundle: object
    mono_Z: np.ndarray
    x_next: np.ndarray

    @property
    def n(self):
        return self.bundle.n

    @property
    def m(self):
        return self.bundle.m

    @property
    def n_v(self):
        return self.bundle.n_v

    @property
    def Q(self):
        return self.bundle.Q

    @property
    def R(self):
        return self.bundle.R

    @property
    def cost_block(self):
        n, m = self.n, self.m
        QR = np.zeros((n + m, n + m))
        QR[:n, :n] = self.Q
        QR[n:, n:] = self.R
        return QR


def build_q_regression(log, basis, t0, t_f, agent, Q, R):
    """Assemble the action-value regression rows for one agent's window."""
    bundle = build_regression_bundle(log, basis, t0, t_f, agent, Q, R)
    Z = np.hstack([bundle.xt[0], bundle.u])
    return QRegression(bundle=bundle, mono_Z=vecv_rows(Z), x_next=bundle.xt1[0])


def check_excitation_z(qreg, tol=1e-8):
    """Rank test for the action-value solve: stacked-vector monomials."""
    d = qreg.n + qreg.m
    return ExcitationReport(
        achieved=rank_with_tol(qreg.mono_Z, tol), required=d * (d + 1) // 2
    )


def check_excitation_regulator(qreg, l=1, tol=1e-8):
    """Rank test for the follow-up regression recovering the cross terms."""
    b = qreg.bundle
    M = np.hstack([b.cross_zx[l], b.cross_zu, b.mono_z])
    required = qreg.n_v * (qreg.n + qreg.m) + qreg.n_v * (qreg.n_v + 1) // 2
    return ExcitationReport(achieved=rank_with_tol(M, tol), required=required)


def solve_H_stab(qreg, K, gamma):
    """Evaluate policy K at scale gamma: one regression on vecs(H).

    Rows equate the stacked-vector quadratic form with the stage cost plus
    the discounted form at the successor pair (x+, -K x+).
    """
    K = np.asarray(K, dtype=float)
    n, m = qreg.n, qreg.m
    if K.shape != (m, n):
        raise DimensionError(f"gain must be {m}x{n}, got {K.shape}")
    z_next = np.hstack([qreg.x_next, -(qreg.x_next @ K.T)])
    Xi = qreg.mono_Z - gamma**2 * vecv_rows(z_next)
    psi = qreg.mono_Z @ vecs(qreg.cost_block)
    w = min_norm_least_squares(Xi, psi)
    return symmetrize(unvecs(w, n + m))


def p_from_h(H, K):
    """Value matrix of the policy folded out of its action-value matrix."""
    K = np.asarray(K, dtype=float)
    J = np.vstack([np.eye(K.shape[1]), -K])
    return symmetrize(J.T @ np.asarray(H, dtype=float) @ J)


def update_gain_from_H(H, n):
    """Greedy gain from the partitioned action-value matrix."""
    H = np.asarray(H, dtype=float)
    return np.linalg.solve(H[n:, n:], H[n:, :n])


def determine_beta0_q(qreg, K0, alpha0=1e-4, beta_sequence=None):
    """Candidate-scale search on the action-value matrix; PD means go."""
    if beta_sequence is None:
        beta_sequence = DEFAULT_BETA_SEQUENCE
    for z, beta in enumerate(beta_sequence):
        gamma = float(beta) + float(alpha0)
        H = solve_H_stab(qreg, K0, gamma)
        if is_positive_definite(H):
            return Beta0Result(beta=float(beta), gamma=gamma, solution=H, tried=z + 1)
    raise SearchError(
        f"no candidate scale out of {len(beta_sequence)} yielded a positive definite "
        "action-value matrix"
    )


def schemeA_alpha_bound(H, K, Q_bar_new, gamma, alpha_max=10.0):
    """Fold H down to the value matrix, then bound as the value-based scheme."""
    return scale_growth_bound(p_from_h(H, K), Q_bar_new, gamma, cap=alpha_max)


def schemeB_alpha_bound(qreg, K_new, gamma, alpha_max=10.0):
    """Pseudo action-value solve for the new policy at the old scale."""
    H_pseudo = solve_H_stab(qreg, K_new, gamma)
    return scale_growth_bound(H_pseudo, qreg.cost_block, gamma, cap=alpha_max)


def schemeC_alpha_bound(H, cost_block, gamma, alpha_max=10.0):
    """Bound straight from the current action-value matrix; no extra solve."""
    return scale_growth_bound(H, cost_block, gamma, cap=alpha_max)


@dataclass
class QStabIterate(StabIterate):
    H: np.ndarray = None


def stabilizing_phase_q(
    qregs,
    K0,
    scheme="A",
    a=0.5,
    lambda_bar=1.0,
    alpha0=1e-4,
    beta_sequence=None,
    alpha_max=10.0,
    max_iters=1000,
):
    """Lockstep scale growth on action-value matrices; see the value twin.

    Scheme "A" folds H to the value matrix each sweep, "B" re-evaluates the
    new policy, "C" reuses the current H directly.
    """
    if scheme not in ("A", "B", "C"):
        raise DimensionError(f"unknown step-size scheme {scheme!r}")
    if not 0.0 < a < 1.0:
        raise DimensionError("step fraction a must lie in (0, 1)")
    K = [np.asarray(Ki, dtype=float) for Ki in K0]
    if len(K) != len(qregs):
        raise DimensionError("need one initial gain per agent")

    start = [determine_beta0_q(q, Ki, alpha0, beta_sequence) for q, Ki in zip(qregs, K)]
    gamma = [s.gamma for s in start]
    beta = [s.beta for s in start]
    histories = [[] for _ in qregs]

    for k in range(max_iters):
        for i, qreg in enumerate(qregs):
            H = solve_H_stab(qreg, K[i], gamma[i])
            K_new = update_gain_from_H(H, qreg.n)
            Q_bar_new = qreg.Q + K_new.T @ qreg.R @ K_new
            if scheme == "A":
                alpha_bar = schemeA_alpha_bound(H, K[i], Q_bar_new, gamma[i], alpha_max)
            elif scheme == "B":
                alpha_bar = schemeB_alpha_bound(qreg, K_new, gamma[i], alpha_max)
            else:
                alpha_bar = schemeC_alpha_bound(H, qreg.cost_block, gamma[i], alpha_max)
            alpha = a * alpha_bar
            histories[i].append(
                QStabIterate(
                    k=k,
                    gamma=gamma[i],
                    alpha_bar=alpha_bar,
                    alpha=alpha,
                    K=K_new,
                    P=p_from_h(H, K[i]),
                    H=H,
                )
            )
            K[i] = K_new
            gamma[i] = gamma[i] + alpha
        if all(g >= lambda_bar for g in gamma):
            return StabPhaseResult(K=K, gamma=gamma, beta=beta, histories=histories)
    raise ConvergenceError(f"scale factors did not reach {lambda_bar} in {max_iters} sweeps")


@dataclass
class QOptIterate:
    j: int
    K: np.ndarray
    H: np.ndarray
    H_delta: float


@dataclass
class QOptPhaseResult:
    H: np.ndarray
    P: np.ndarray
    K: np.ndarray
    history: list


def optimal_phase_q(qreg, K0, eps1=1e-4, max_iters=200):
    """Unit-scale action-value iteration down to the optimal gain."""
    K = np.asarray(K0, dtype=float)
    history = []
    H_prev = None
    for j in range(max_iters):
        H = solve_H_stab(qreg, K, 1.0)
        delta = np.inf if H_prev is None else float(np.linalg.norm(H - H_prev))
        history.append(QOptIterate(j=j, K=K, H=H, H_delta=delta))
        if delta <= eps1:
            return QOptPhaseResult(H=H, P=p_from_h(H, K), K=K, history=history)
        K = update_gain_from_H(H, qreg.n)
        H_prev = H
    raise ConvergenceError(f"optimal phase did not meet {eps1:.1e} in {max_iters} sweeps")


def solve_regulator_Ls(qreg, H, K, P):
    """Recover the leader-coupled cross terms from the logged data.

    For each regulator basis pair the shifted state obeys the same value
    recursion as the plain one, up to terms linear and quadratic in the
    leader estimate; moving every H- and P-explained piece to the right
    side leaves a small regression for exactly those terms.  Returns the
    list of L3 blocks consumed by the regulator assembly.
    """
    K = np.asarray(K, dtype=float)
    b = qreg.bundle
    n, m, n_v = qreg.n, qreg.m, qreg.n_v
    H = np.asarray(H, dtype=float)
    H12 = H[:n, n:]
    H22 = H[n:, n:]
    Q_bar = qreg.Q + K.T @ qreg.R @ K
    L3_list = []
    for idx in range(b.basis.h):
        l = 1 + idx
        Phi = np.hstack([2.0 * b.cross_zx[l], 2.0 * b.cross_zu, b.mono_z])
        theta = b.mono_x1[l] - b.mono_x[l]
        mono_kx = vecv_rows(b.xt[l] @ K.T)
        hbar = (
            theta @ vecs(P)
            - (2.0 * (b.cross_xx[l] @ np.kron(K.T, np.eye(n))) + 2.0 * b.cross_ux[l])
            @ (H12.reshape(-1, order="F"))
            + (mono_kx - b.mono_u) @ vecs(H22 - qreg.R)
            + b.mono_x[l] @ vecs(Q_bar)
        )
        w = min_norm_least_squares(Phi, hbar)
        L3_list.append(unvec(w[: n * n_v], n, n_v))
    return L3_list


def run_algorithm2_from_log(mas, log, params=None):
    """Full action-value pipeline on an existing behavior log."""
    params = params or LearnParams()
    K0 = _initial_gains(mas, params)
    bases = _build_bases(mas, log, params.t0, params.rank_tol)

    def rank_check(bundle):
        qreg = QRegression(
            bundle=bundle,
            mono_Z=vecv_rows(np.hstack([bundle.xt[0], bundle.u])),
            x_next=bundle.xt1[0],
        )
        rz = check_excitation_z(qreg, params.rank_tol)
        rr = check_excitation_regulator(qreg, 1, params.rank_tol)
        # Both solves must be unique; report whichever is further behind.
        return min([rz, rr], key=lambda r: r.achieved - r.required)

    t_f, bundles = _resolve_window(mas, log, bases, params, rank_check)
    qregs = [
        QRegression(
            bundle=b,
            mono_Z=vecv_rows(np.hstack([b.xt[0], b.u])),
            x_next=b.xt1[0],
        )
        for b in bundles
    ]

    stab = stabilizing_phase_q(
        qregs,
        K0,
        scheme=params.scheme or "A",
        a=params.a,
        lambda_bar=params.lambda_bar,
        alpha0=params.alpha0,
        beta_sequence=params.beta_sequence,
        alpha_max=params.alpha_max,
    )

    K_star, T_star, X_list, U_list, P_list, H_list = [], [], [], [], [], []
    opt_histories, chi_results = [], []
    for i, qreg in enumerate(qregs):
        opt = optimal_phase_q(qreg, stab.K[i], params.eps1)
        L3_list = solve_regulator_Ls(qreg, opt.H, opt.K, opt.P)
        H12 = opt.H[: qreg.n, qreg.n :]
        problem = assemble_data_driven(L3_list, H12, bases[i])
        kappa = choose_kappa(problem, params.kappa_c)
        chi = iterate_chi(problem, params.eps2, params.chi_max_iters, kappa)
        T = feedforward_gain(chi.U, opt.K, chi.X)
        K_star.append(opt.K)
        T_star.append(T)
        X_list.append(chi.X)
        U_list.append(chi.U)
        P_list.append(opt.P)
        H_list.append(opt.H)
        opt_histories.append(opt.history)
        chi_results.append(chi)

    return LearnedGains(
        K_star=K_star,
        T_star=T_star,
        X=X_list,
        U=U_list,
        P=P_list,
        beta=stab.beta,
        t_f=t_f,
        stab_histories=stab.histories,
        opt_histories=opt_histories,
        chi_results=chi_results,
        bases=bases,
        log=log,
        H=H_list,
    )


def run_algorithm2(mas, params=None):
    """Simulate the behavior phase, then learn on action-value matrices."""
    params = params or LearnParams()
    t_end = params.t_end if params.t_end is not None else params.t0 + 60
    log = simulate_behavior(
        mas, _initial_gains(mas, params), params.noise_terms, t_end, params.divergence_bound
    )
    return run_algorithm2_from_log(mas, log, params)
