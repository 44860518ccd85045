"""Follower/leader models, exploration noise, and trajectory simulation.

The plant layer is deliberately dumb: it steps linear recursions, logs what
happened, and raises when a trajectory blows up.  Everything clever (data
matrices, policy iteration) lives downstream and consumes the logs produced
here.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError, DimensionError, DivergenceError, StabilityError
from .matkit import is_positive_definite, spectral_radius
from .observer import ObserverState, observer_step


def _mat(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be 2-d, got shape {M.shape}")
    return M


@dataclass
class FollowerModel:
    """One follower: x+ = A x + B u, y = C x + S u."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    S: np.ndarray
    x0: np.ndarray = None

    def __post_init__(self):
        self.A = _mat(self.A, "A")
        self.B = _mat(self.B, "B")
        self.C = _mat(self.C, "C")
        self.S = _mat(self.S, "S")
        n, m = self.A.shape[0], self.B.shape[1]
        if self.A.shape != (n, n):
            raise DimensionError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise DimensionError(f"B rows {self.B.shape[0]} do not match A of order {n}")
        if self.C.shape[1] != n or self.S.shape[1] != m:
            raise DimensionError("C/S column counts must match state/input sizes")
        if self.C.shape[0] != self.S.shape[0]:
            raise DimensionError("C and S must have the same number of output rows")
        if self.x0 is None:
            self.x0 = np.zeros(n)
        self.x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if self.x0.size != n:
            raise DimensionError(f"x0 has {self.x0.size} entries, expected {n}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def n_y(self):
        return self.C.shape[0]


@dataclass
class LeaderModel:
    """Exosystem v+ = E v with reference output y_d = -F v."""

    E: np.ndarray
    F: np.ndarray
    v0: np.ndarray = None

    def __post_init__(self):
        self.E = _mat(self.E, "E")
        self.F = _mat(self.F, "F")
        if self.E.shape[0] != self.E.shape[1]:
            raise DimensionError(f"E must be square, got {self.E.shape}")
        if self.F.shape[1] != self.E.shape[0]:
            raise DimensionError("F columns must match the leader order")
        if self.v0 is None:
            self.v0 = np.zeros(self.E.shape[0])
        self.v0 = np.asarray(self.v0, dtype=float).reshape(-1)
        if self.v0.size != self.E.shape[0]:
            raise DimensionError("v0 length must match the leader order")

    @property
    def n_v(self):
        return self.E.shape[0]

    @property
    def n_y(self):
        return self.F.shape[0]


@dataclass
class MasModel:
    """The whole network: followers, leader, graph, and per-agent costs."""

    followers: list
    leader: LeaderModel
    topology: object
    Q: list
    R: list

    def __post_init__(self):
        N = self.topology.n_followers
        if len(self.followers) != N:
            raise DimensionError(
                f"{len(self.followers)} followers but topology has {N} nodes"
            )
        if len(self.Q) != N or len(self.R) != N:
            raise DimensionError("need one Q and one R per follower")
        self.Q = [np.asarray(Qi, dtype=float) for Qi in self.Q]
        self.R = [np.asarray(Ri, dtype=float) for Ri in self.R]
        for i, (f, Qi, Ri) in enumerate(zip(self.followers, self.Q, self.R)):
            if f.n_y != self.leader.n_y:
                raise DimensionError(
                    f"follower {i + 1} has {f.n_y} outputs, leader has {self.leader.n_y}"
                )
            if Qi.shape != (f.n, f.n) or Ri.shape != (f.m, f.m):
                raise DimensionError(f"cost shapes for follower {i + 1} are wrong")
            if not is_positive_definite(Qi) or not is_positive_definite(Ri):
                raise AssumptionError(f"Q and R for follower {i + 1} must be positive definite")

    @property
    def n_followers(self):
        return len(self.followers)


def follower_step(follower, x, u):
    """x(t+1) = A x + B u."""
    return follower.A @ np.asarray(x, dtype=float) + follower.B @ np.asarray(u, dtype=float)


def leader_step(leader, v):
    """v(t+1) = E v."""
    return leader.E @ np.asarray(v, dtype=float)


def tracking_error(follower, leader, x, u, v):
    """e = C x + S u + F v (output minus reference)."""
    return follower.C @ np.asarray(x, dtype=float) + follower.S @ np.asarray(
        u, dtype=float
    ) + leader.F @ np.asarray(v, dtype=float)


def exploration_noise(t, terms):
    """Sum of sinusoid terms evaluated at integer time t.

    ``terms`` is a sequence of (kind, amplitude, frequency) with kind "sin"
    or "cos"; the same scalar is applied to every input channel.
    """
    total = 0.0
    for kind, amplitude, frequency in terms:
        if kind == "sin":
            total += amplitude * np.sin(frequency * t)
        elif kind == "cos":
            total += amplitude * np.cos(frequency * t)
        else:
            raise DimensionError(f"unknown noise term kind {kind!r}")
    return float(total)


@dataclass
class TrajectoryLog:
    """Everything recorded while the network ran for t = 0..t_end.

    States (x, v, zeta, and the estimate matrices) carry t_end + 1 samples;
    inputs and tracking errors carry t_end, one per applied input.
    """

    x: list
    u: list
    e: list
    v: np.ndarray
    zeta: list
    E_est: list
    F_est: list

    @property
    def t_end(self):
        return len(self.u[0])

    @property
    def n_followers(self):
        return len(self.x)

    def write_csv(self, path):
        """One row per time step t = 0..t_end-1, every column defined."""
        N = self.n_followers
        header = [f"v{j}" for j in range(self.v.shape[1])]
        for i in range(N):
            header += [f"agent{i + 1}.x{j}" for j in range(self.x[i].shape[1])]
            header += [f"agent{i + 1}.u{j}" for j in range(self.u[i].shape[1])]
            header += [f"agent{i + 1}.zeta{j}" for j in range(self.zeta[i].shape[1])]
            header += [f"agent{i + 1}.e{j}" for j in range(self.e[i].shape[1])]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t in range(self.t_end):
                row = list(self.v[t])
                for i in range(N):
                    row += list(self.x[i][t])
                    row += list(self.u[i][t])
                    row += list(self.zeta[i][t])
                    row += list(self.e[i][t])
                writer.writerow([format(val, ".17g") for val in row])


def _simulate(mas, input_rule, t_end, divergence_bound):
    """Common driver for behavior and closed-loop runs.

    ``input_rule(i, t, x_i, zeta_i)`` returns the input applied by follower
    i at time t.
    """
    N = mas.n_followers
    leader = mas.leader
    n_v, n_y = leader.n_v, leader.n_y

    x = [np.zeros((t_end + 1, f.n)) for f in mas.followers]
    u = [np.zeros((t_end, f.m)) for f in mas.followers]
    e = [np.zeros((t_end, n_y)) for f in mas.followers]
    v = np.zeros((t_end + 1, n_v))
    zeta = [np.zeros((t_end + 1, n_v)) for _ in range(N)]
    E_est = [np.zeros((t_end + 1, n_v, n_v)) for _ in range(N)]
    F_est = [np.zeros((t_end + 1, n_y, n_v)) for _ in range(N)]

    for i, f in enumerate(mas.followers):
        x[i][0] = f.x0
    v[0] = leader.v0
    obs = ObserverState.zeros(N, n_v, n_y)

    for t in range(t_end):
        for i, f in enumerate(mas.followers):
            ui = np.atleast_1d(np.asarray(input_rule(i, t, x[i][t], obs.zeta[i]), dtype=float))
            u[i][t] = ui
            e[i][t] = tracking_error(f, leader, x[i][t], ui, v[t])
            x[i][t + 1] = follower_step(f, x[i][t], ui)
            if not np.all(np.isfinite(x[i][t + 1])) or np.linalg.norm(x[i][t + 1]) > divergence_bound:
                raise DivergenceError(
                    f"follower {i + 1} left the magnitude bound {divergence_bound:.1e} at t={t + 1}"
                )
        obs = observer_step(mas.topology, leader, v[t], obs)
        v[t + 1] = leader_step(leader, v[t])
        for i in range(N):
            zeta[i][t + 1] = obs.zeta[i]
            E_est[i][t + 1] = obs.E_est[i]
            F_est[i][t + 1] = obs.F_est[i]

    return TrajectoryLog(x=x, u=u, e=e, v=v, zeta=zeta, E_est=E_est, F_est=F_est)


def simulate_behavior(mas, K0, noise_terms, t_end, divergence_bound=1e12):
    """Run the network open-loop-ish for data collection.

    Each follower applies u_i = -K0_i x_i + noise; the distributed observer
    runs alongside from zero initial estimates so its outputs can be logged
    and consumed by the learning stages.
    """
    if len(K0) != mas.n_followers:
        raise DimensionError("need one initial gain per follower")
    K0 = [np.asarray(K, dtype=float) for K in K0]

    def rule(i, t, xi, _zeta):
        return -K0[i] @ xi + exploration_noise(t, noise_terms) * np.ones(mas.followers[i].m)

    return _simulate(mas, rule, t_end, divergence_bound)


def simulate_closed_loop(mas, gains, horizon, divergence_bound=1e12):
    """Deploy learned controllers u_i = -K_i x_i + T_i zeta_i.

    ``gains`` provides per-agent lists ``K_star`` and ``T_star``.  Refuses
    to run a gain that does not place A - B K strictly inside the unit
    circle, since the run would be meaningless.
    """
    K = [np.asarray(Ki, dtype=float) for Ki in gains.K_star]
    T = [np.asarray(Ti, dtype=float) for Ti in gains.T_star]
    if len(K) != mas.n_followers or len(T) != mas.n_followers:
        raise DimensionError("need one K and one T per follower")
    for i, f in enumerate(mas.followers):
        rho = spectral_radius(f.A - f.B @ K[i])
        if rho >= 1.0:
            raise StabilityError(
                f"gain for follower {i + 1} is not stabilizing (spectral radius {rho:.6f})"
            )

    def rule(i, t, xi, zeta_i):
        return -K[i] @ xi + T[i] @ zeta_i

    return _simulate(mas, rule, horizon, divergence_bound)
