"""Off-policy policy iteration from logged trajectories.

One batch of behavior data serves every policy evaluated later.  The
regression unknown stacks the value matrix with five cross terms that tie
the follower state to the leader estimate; the same solve powers the
stabilizing phase (scaled policies), the optimal phase (unit scale), and
the extraction of the regulator right-hand sides.

Unknown layout, for state size n, input size m, leader size n_v:

    [ vecs(P) | vec(L1) | vecs(L2) | vec(L3) | vec(L4) | vecs(L5) ]

with L1 ~ A'PB, L2 ~ B'PB, L3 ~ A'P pi, L4 ~ B'P pi, L5 ~ pi'P pi, where
pi is the dynamic residual of the regulator pair the data was shifted by.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    RankConditionError,
    SearchError,
)
from .matkit import (
    is_positive_definite,
    kron_rows,
    min_norm_least_squares,
    rank_with_tol,
    scale_growth_bound,
    unvec,
    unvecs,
    vecs,
    vecv_rows,
)
from .plant import simulate_behavior
from .regulator import (
    assemble_data_driven,
    build_basis,
    choose_kappa,
    feedforward_gain,
    iterate_chi,
)

DEFAULT_BETA_SEQUENCE = tuple(round(0.01 * z, 2) for z in range(50, 0, -1))
DEFAULT_NOISE = (("sin", 0.1, 16.0), ("cos", 0.1, 11.0))


@dataclass
class RegressionBundle:
    """Precomputed regression row blocks for one agent's data window.

    Index l = 0 corresponds to the zero regulator pair (the plain follower
    state); l = 1..h walk the basis pairs, shifting the state by X_l zeta.
    Rows cover the transitions t = t0 .. t_f - 1.
    """

    agent: int
    t0: int
    t_f: int
    Q: np.ndarray
    R: np.ndarray
    basis: object
    u: np.ndarray
    zeta: np.ndarray
    xt: list
    xt1: list
    mono_x: list
    mono_x1: list
    cross_xx: list
    cross_ux: list
    cross_zx: list
    mono_u: np.ndarray
    mono_z: np.ndarray
    cross_zu: np.ndarray

    @property
    def n(self):
        return self.xt[0].shape[1]

    @property
    def m(self):
        return self.u.shape[1]

    @property
    def n_v(self):
        return self.zeta.shape[1]

    @property
    def n_samples(self):
        return self.u.shape[0]


def build_regression_bundle(log, basis, t0, t_f, agent, Q, R):
    """Slice one agent's logged data into regression row blocks.

    Uses transitions t = t0 .. t_f - 1, so the log must extend to t_f.
    """
    if not 0 <= t0 < t_f:
        raise DimensionError(f"need 0 <= t0 < t_f, got t0={t0}, t_f={t_f}")
    if t_f > log.x[agent].shape[0] - 1:
        raise DimensionError(f"log ends at t={log.x[agent].shape[0] - 1}, t_f={t_f} is beyond it")
    x = log.x[agent]
    u = log.u[agent][t0:t_f]
    zeta_t = log.zeta[agent][t0:t_f]
    zeta_t1 = log.zeta[agent][t0 + 1 : t_f + 1]

    pairs = [np.zeros((basis.n, basis.n_v))] + list(basis.X)
    xt, xt1, mono_x, mono_x1, cross_xx, cross_ux, cross_zx = [], [], [], [], [], [], []
    for X_l in pairs:
        shift_t = x[t0:t_f] - zeta_t @ X_l.T
        shift_t1 = x[t0 + 1 : t_f + 1] - zeta_t1 @ X_l.T
        xt.append(shift_t)
        xt1.append(shift_t1)
        mono_x.append(vecv_rows(shift_t))
        mono_x1.append(vecv_rows(shift_t1))
        cross_xx.append(kron_rows(shift_t, shift_t))
        cross_ux.append(kron_rows(u, shift_t))
        cross_zx.append(kron_rows(zeta_t, shift_t))

    return RegressionBundle(
        agent=agent,
        t0=t0,
        t_f=t_f,
        Q=np.asarray(Q, dtype=float),
        R=np.asarray(R, dtype=float),
        basis=basis,
        u=u,
        zeta=zeta_t,
        xt=xt,
        xt1=xt1,
        mono_x=mono_x,
        mono_x1=mono_x1,
        cross_xx=cross_xx,
        cross_ux=cross_ux,
        cross_zx=cross_zx,
        mono_u=vecv_rows(u),
        mono_z=vecv_rows(zeta_t),
        cross_zu=kron_rows(zeta_t, u),
    )


@dataclass
class ExcitationReport:
    achieved: int
    required: int

    @property
    def ok(self):
        return self.achieved >= self.required


def check_excitation(bundle, l=0, tol=1e-8):
    """Rank test on the data blocks that must span the regression unknowns.

    The required rank is the number of distinct monomials in the combined
    (state, input, leader) vector; shifting by any regulator pair changes
    the span not at all, so l = 0 is representative.
    """
    M = np.hstack(
        [
            bundle.cross_xx[l],
            bundle.mono_u,
            bundle.mono_z,
            bundle.cross_ux[l],
            bundle.cross_zx[l],
            bundle.cross_zu,
        ]
    )
    d = bundle.n + bundle.m + bundle.n_v
    return ExcitationReport(achieved=rank_with_tol(M, tol), required=d * (d + 1) // 2)


@dataclass
class StabSolution:
    """One regression solve: value matrix plus the five cross terms."""

    P: np.ndarray
    L1: np.ndarray
    L2: np.ndarray
    L3: np.ndarray
    L4: np.ndarray
    L5: np.ndarray


def _split_solution(w, n, m, n_v):
    sn, sm, sv = n * (n + 1) // 2, m * (m + 1) // 2, n_v * (n_v + 1) // 2
    cuts = np.cumsum([sn, n * m, sm, n * n_v, m * n_v, sv])
    if w.size != cuts[-1]:
        raise DimensionError(f"solution has {w.size} entries, expected {cuts[-1]}")
    parts = np.split(w, cuts[:-1])
    return StabSolution(
        P=unvecs(parts[0], n),
        L1=unvec(parts[1], n, m),
        L2=unvecs(parts[2], m),
        L3=unvec(parts[3], n, n_v),
        L4=unvec(parts[4], m, n_v),
        L5=unvecs(parts[5], n_v),
    )


def solve_stab_regression(bundle, l, K, gamma):
    """Evaluate policy K at scale gamma against the logged data.

    Returns the stacked unknowns split back into matrices.  The rows
    encode one step of the scaled value recursion along the behavior
    trajectory; off-policy corrections fold the actually-applied input
    back in, so K never needs to have generated the data.
    """
    K = np.asarray(K, dtype=float)
    n, m, n_v = bundle.n, bundle.m, bundle.n_v
    if K.shape != (m, n):
        raise DimensionError(f"gain must be {m}x{n}, got {K.shape}")
    g2i = 1.0 / gamma**2
    mono_kx = vecv_rows(bundle.xt[l] @ K.T)
    Phi = np.hstack(
        [
            bundle.mono_x1[l] - g2i * bundle.mono_x[l],
            -2.0 * (bundle.cross_xx[l] @ np.kron(K.T, np.eye(n))) - 2.0 * bundle.cross_ux[l],
            mono_kx - bundle.mono_u,
            -2.0 * bundle.cross_zx[l],
            -2.0 * bundle.cross_zu,
            -bundle.mono_z,
        ]
    )
    Q_bar = bundle.Q + K.T @ bundle.R @ K
    psi = -g2i * (bundle.mono_x[l] @ vecs(Q_bar))
    w = min_norm_least_squares(Phi, psi)
    return _split_solution(w, n, m, n_v)


def update_gain_stab(sol, gamma, R):
    """Improved policy from the learned cross terms at scale gamma."""
    g2 = gamma**2
    R = np.asarray(R, dtype=float)
    return g2 * np.linalg.solve(R + g2 * sol.L2, sol.L1.T)


@dataclass
class Beta0Result:
    beta: float
    gamma: float
    solution: StabSolution
    tried: int


def determine_beta0(bundle, K0, alpha0=1e-4, beta_sequence=None):
    """Walk the candidate scale sequence until the value estimate is PD.

    A positive definite regression solution certifies that the scaled
    closed loop under K0 is contractive, so the iteration may start there.
    """
    if beta_sequence is None:
        beta_sequence = DEFAULT_BETA_SEQUENCE
    for z, beta in enumerate(beta_sequence):
        gamma = float(beta) + float(alpha0)
        sol = solve_stab_regression(bundle, 0, K0, gamma)
        if is_positive_definite(sol.P):
            return Beta0Result(beta=float(beta), gamma=gamma, solution=sol, tried=z + 1)
    raise SearchError(
        f"no candidate scale out of {len(beta_sequence)} yielded a positive definite value matrix"
    )


def scheme1_alpha_bound(bundle, K_new, gamma, alpha_max=10.0):
    """Scale-step bound from a pseudo evaluation of the *new* policy.

    Re-runs the regression with the improved gain at the unchanged scale
    and bounds the step by how far that value matrix sits above the new
    stage cost.
    """
    pseudo = solve_stab_regression(bundle, 0, K_new, gamma)
    K_new = np.asarray(K_new, dtype=float)
    Q_bar_new = bundle.Q + K_new.T @ bundle.R @ K_new
    return scale_growth_bound(pseudo.P, Q_bar_new, gamma, cap=alpha_max)


def scheme2_alpha_bound(P, Q_bar_new, gamma, alpha_max=10.0):
    """Scale-step bound reusing the current value matrix; no extra solve."""
    return scale_growth_bound(P, Q_bar_new, gamma, cap=alpha_max)


@dataclass
class StabIterate:
    """One lockstep sweep for one agent."""

    k: int
    gamma: float
    alpha_bar: float
    alpha: float
    K: np.ndarray
    P: np.ndarray


@dataclass
class StabPhaseResult:
    K: list
    gamma: list
    beta: list
    histories: list


def stabilizing_phase(
    bundles,
    K0,
    scheme="2",
    a=0.5,
    lambda_bar=1.0,
    alpha0=1e-4,
    beta_sequence=None,
    alpha_max=10.0,
    max_iters=1000,
):
    """Grow every agent's scale factor to lambda_bar in lockstep.

    All agents sweep together; the phase ends only when every scale has
    crossed the target, and agents that crossed early keep refining their
    gains while the slowest catch up.  ``scheme`` selects how the scale
    step is bounded: "1" re-evaluates the new policy, "2" reuses the
    current value matrix.
    """
    if scheme not in ("1", "2"):
        raise DimensionError(f"unknown step-size scheme {scheme!r}")
    if not 0.0 < a < 1.0:
        raise DimensionError("step fraction a must lie in (0, 1)")
    K = [np.asarray(Ki, dtype=float) for Ki in K0]
    if len(K) != len(bundles):
        raise DimensionError("need one initial gain per agent bundle")

    start = [determine_beta0(b, Ki, alpha0, beta_sequence) for b, Ki in zip(bundles, K)]
    gamma = [s.gamma for s in start]
    beta = [s.beta for s in start]
    histories = [[] for _ in bundles]

    for k in range(max_iters):
        for i, bundle in enumerate(bundles):
            sol = solve_stab_regression(bundle, 0, K[i], gamma[i])
            K_new = update_gain_stab(sol, gamma[i], bundle.R)
            Q_bar_new = bundle.Q + K_new.T @ bundle.R @ K_new
            if scheme == "1":
                alpha_bar = scheme1_alpha_bound(bundle, K_new, gamma[i], alpha_max)
            else:
                alpha_bar = scheme2_alpha_bound(sol.P, Q_bar_new, gamma[i], alpha_max)
            alpha = a * alpha_bar
            histories[i].append(
                StabIterate(k=k, gamma=gamma[i], alpha_bar=alpha_bar, alpha=alpha, K=K_new, P=sol.P)
            )
            K[i] = K_new
            gamma[i] = gamma[i] + alpha
        if all(g >= lambda_bar for g in gamma):
            return StabPhaseResult(K=K, gamma=gamma, beta=beta, histories=histories)
    raise ConvergenceError(f"scale factors did not reach {lambda_bar} in {max_iters} sweeps")


@dataclass
class OptIterate:
    j: int
    K: np.ndarray
    P: np.ndarray
    P_delta: float


@dataclass
class OptPhaseResult:
    P: np.ndarray
    K: np.ndarray
    L1: np.ndarray
    L3_list: list
    history: list


def optimal_phase(bundle, K0, eps1=1e-4, max_iters=200):
    """Unit-scale policy iteration down to the optimal gain.

    Stops when successive value matrices agree to ``eps1``; then re-solves
    the regression once per regulator basis pair to collect the cross
    terms the regulator assembly needs.
    """
    K = np.asarray(K0, dtype=float)
    history = []
    P_prev = None
    final = None
    for j in range(max_iters):
        sol = solve_stab_regression(bundle, 0, K, 1.0)
        delta = np.inf if P_prev is None else float(np.linalg.norm(sol.P - P_prev))
        history.append(OptIterate(j=j, K=K, P=sol.P, P_delta=delta))
        if delta <= eps1:
            final = sol
            break
        K = np.linalg.solve(bundle.R + sol.L2, sol.L1.T)
        P_prev = sol.P
    if final is None:
        raise ConvergenceError(f"optimal phase did not meet {eps1:.1e} in {max_iters} sweeps")
    L3_list = [solve_stab_regression(bundle, 1 + idx, K, 1.0).L3 for idx in range(bundle.basis.h)]
    return OptPhaseResult(P=final.P, K=K, L1=final.L1, L3_list=L3_list, history=history)


@dataclass
class LearnParams:
    """Everything the learning pipelines accept besides the network itself."""

    t0: int = 85
    t_end: int = None
    t_f: int = None
    noise_terms: tuple = DEFAULT_NOISE
    K0: list = None
    scheme: str = None
    a: float = 0.5
    lambda_bar: float = 1.0
    alpha0: float = 1e-4
    beta_sequence: tuple = None
    alpha_max: float = 10.0
    eps1: float = 1e-4
    eps2: float = 1e-4
    kappa_c: float = 1.0
    chi_max_iters: int = 200000
    rank_tol: float = 1e-8
    divergence_bound: float = 1e12


@dataclass
class LearnedGains:
    """Output of a full learning run: controllers plus the records behind them."""

    K_star: list
    T_star: list
    X: list
    U: list
    P: list
    beta: list
    t_f: int
    stab_histories: list
    opt_histories: list
    chi_results: list
    bases: list
    log: object
    H: list = None


def _initial_gains(mas, params):
    if params.K0 is not None:
        return [np.asarray(K, dtype=float) for K in params.K0]
    return [np.zeros((f.m, f.n)) for f in mas.followers]


def _build_bases(mas, log, t0, tol):
    bases = []
    for i, f in enumerate(mas.followers):
        F_obs = log.F_est[i][t0]
        bases.append(build_basis(f.C, f.S, F_obs, tol))
    return bases


def find_minimal_window(mas, log, bases, params, rank_check):
    """Smallest t_f whose data window passes ``rank_check`` for all agents.

    ``rank_check(bundle)`` returns an :class:`ExcitationReport`; the scan
    stops at the first window where every agent's report is satisfied.
    """
    t0 = params.t0
    t_last = log.x[0].shape[0] - 1
    worst = None
    for t_f in range(t0 + 1, t_last + 1):
        reports = []
        for i in range(mas.n_followers):
            bundle = build_regression_bundle(log, bases[i], t0, t_f, i, mas.Q[i], mas.R[i])
            reports.append(rank_check(bundle))
        worst = min(reports, key=lambda r: r.achieved - r.required)
        if all(r.ok for r in reports):
            return t_f
    raise RankConditionError(
        f"data through t={t_last} never reached the required excitation",
        achieved=None if worst is None else worst.achieved,
        required=None if worst is None else worst.required,
    )


def _resolve_window(mas, log, bases, params, rank_check):
    if params.t_f is not None:
        bundles = [
            build_regression_bundle(log, bases[i], params.t0, params.t_f, i, mas.Q[i], mas.R[i])
            for i in range(mas.n_followers)
        ]
        for bundle in bundles:
            report = rank_check(bundle)
            if not report.ok:
                raise RankConditionError(
                    f"window [{params.t0}, {params.t_f}] leaves agent {bundle.agent + 1} "
                    f"at rank {report.achieved} of {report.required}",
                    achieved=report.achieved,
                    required=report.required,
                )
        return params.t_f, bundles
    t_f = find_minimal_window(mas, log, bases, params, rank_check)
    bundles = [
        build_regression_bundle(log, bases[i], params.t0, t_f, i, mas.Q[i], mas.R[i])
        for i in range(mas.n_followers)
    ]
    return t_f, bundles


def run_algorithm1_from_log(mas, log, params=None):
    """Full first learning pipeline on an existing behavior log."""
    params = params or LearnParams()
    K0 = _initial_gains(mas, params)
    bases = _build_bases(mas, log, params.t0, params.rank_tol)
    t_f, bundles = _resolve_window(
        mas, log, bases, params, lambda b: check_excitation(b, 0, params.rank_tol)
    )

    stab = stabilizing_phase(
        bundles,
        K0,
        scheme=params.scheme or "2",
        a=params.a,
        lambda_bar=params.lambda_bar,
        alpha0=params.alpha0,
        beta_sequence=params.beta_sequence,
        alpha_max=params.alpha_max,
    )

    K_star, T_star, X_list, U_list, P_list = [], [], [], [], []
    opt_histories, chi_results = [], []
    for i, bundle in enumerate(bundles):
        opt = optimal_phase(bundle, stab.K[i], params.eps1)
        problem = assemble_data_driven(opt.L3_list, opt.L1, bases[i])
        kappa = choose_kappa(problem, params.kappa_c)
        chi = iterate_chi(problem, params.eps2, params.chi_max_iters, kappa)
        T = feedforward_gain(chi.U, opt.K, chi.X)
        K_star.append(opt.K)
        T_star.append(T)
        X_list.append(chi.X)
        U_list.append(chi.U)
        P_list.append(opt.P)
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
    )


def run_algorithm1(mas, params=None):
    """Simulate the behavior phase, then learn everything from the log."""
    params = params or LearnParams()
    t_end = params.t_end if params.t_end is not None else params.t0 + 60
    log = simulate_behavior(
        mas, _initial_gains(mas, params), params.noise_terms, t_end, params.divergence_bound
    )
    return run_algorithm1_from_log(mas, log, params)
