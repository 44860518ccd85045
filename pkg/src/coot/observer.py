"""Distributed leader observer over a directed communication graph.

Each follower keeps local estimates (E_i, F_i, zeta_i) of the leader's
dynamics matrix, output matrix, and state.  Estimates relax toward the
neighborhood average with the follower-specific step 1/(1 + d_i + a_i0),
which keeps the consensus iteration a contraction whenever the graph has a
spanning tree rooted at the leader node 0.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError, DimensionError


@dataclass
class Topology:
    """Directed weighted graph on nodes 0..N, node 0 being the leader.

    ``weights[i, j]`` is the weight a_ij on the edge from j into i.  The
    leader row is zero: node 0 never consumes information.
    """

    weights: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 2:
            raise DimensionError(f"adjacency must be square and >= 2x2, got {W.shape}")
        if np.any(W < 0):
            raise AssumptionError("edge weights must be nonnegative")
        if np.any(np.diag(W) != 0):
            raise AssumptionError("self-loops are not allowed")
        if np.any(W[0, :] != 0):
            raise AssumptionError("the leader node must not have incoming edges")
        self.weights = W
        self._check_rooted()

    @classmethod
    def from_edges(cls, n_followers, edges):
        """Build from an edge list of (source j, target i, weight) triples."""
        W = np.zeros((n_followers + 1, n_followers + 1))
        for j, i, w in edges:
            j, i = int(j), int(i)
            if not (0 <= j <= n_followers and 0 <= i <= n_followers):
                raise DimensionError(f"edge ({j}, {i}) references an unknown node")
            W[i, j] = float(w)
        return cls(W)

    @property
    def n_followers(self):
        return self.weights.shape[0] - 1

    def _check_rooted(self):
        # Breadth-first reachability from the leader along directed edges.
        N = self.weights.shape[0]
        seen = {0}
        frontier = [0]
        while frontier:
            j = frontier.pop()
            for i in range(N):
                if self.weights[i, j] > 0 and i not in seen:
                    seen.add(i)
                    frontier.append(i)
        if len(seen) != N:
            missing = sorted(set(range(N)) - seen)
            raise AssumptionError(
                f"graph has no spanning tree rooted at the leader; unreachable nodes {missing}"
            )

    def in_degrees(self):
        """d_i = sum of weights from other followers into follower i."""
        return self.weights[1:, 1:].sum(axis=1)

    def leader_weights(self):
        """a_i0 for each follower i."""
        return self.weights[1:, 0].copy()

    def mu(self):
        """Consensus step sizes 1 / (1 + d_i + a_i0), one per follower."""
        return 1.0 / (1.0 + self.in_degrees() + self.leader_weights())

    def consensus_matrix(self):
        """The follower-block iteration matrix I - diag(mu) H.

        H has d_i + a_i0 on the diagonal and -a_ij off it; the estimation
        errors of all followers contract by this matrix each step.
        """
        N = self.n_followers
        H = -self.weights[1:, 1:].copy()
        np.fill_diagonal(H, self.in_degrees() + self.leader_weights())
        return np.eye(N) - np.diag(self.mu()) @ H


@dataclass
class ObserverState:
    """Per-follower estimates of the leader triple (E, F, v)."""

    E_est: list = field(default_factory=list)
    F_est: list = field(default_factory=list)
    zeta: list = field(default_factory=list)

    @classmethod
    def zeros(cls, n_followers, n_v, n_y):
        return cls(
            E_est=[np.zeros((n_v, n_v)) for _ in range(n_followers)],
            F_est=[np.zeros((n_y, n_v)) for _ in range(n_followers)],
            zeta=[np.zeros(n_v) for _ in range(n_followers)],
        )


def observer_step(topology, leader, v, state):
    """One synchronous update of every follower's leader estimates.

    ``leader`` provides the true E and F (the node-0 pinned values) and ``v``
    is the leader state at the current step.  Returns the new state; the
    input state is left untouched.
    """
    N = topology.n_followers
    if len(state.E_est) != N:
        raise DimensionError(
            f"observer state holds {len(state.E_est)} followers, topology has {N}"
        )
    mu = topology.mu()
    W = topology.weights
    E_all = [np.asarray(leader.E, dtype=float)] + list(state.E_est)
    F_all = [np.asarray(leader.F, dtype=float)] + list(state.F_est)
    z_all = [np.asarray(v, dtype=float)] + list(state.zeta)

    E_new, F_new, z_new = [], [], []
    for i in range(1, N + 1):
        dE = sum(W[i, j] * (E_all[j] - E_all[i]) for j in range(N + 1) if W[i, j] > 0)
        dF = sum(W[i, j] * (F_all[j] - F_all[i]) for j in range(N + 1) if W[i, j] > 0)
        dz = sum(W[i, j] * (z_all[j] - z_all[i]) for j in range(N + 1) if W[i, j] > 0)
        if isinstance(dE, int):  # isolated node; rooted check makes this unreachable
            dE = np.zeros_like(E_all[i])
            dF = np.zeros_like(F_all[i])
            dz = np.zeros_like(z_all[i])
        E_new.append(E_all[i] + mu[i - 1] * dE)
        F_new.append(F_all[i] + mu[i - 1] * dF)
        # The state estimate advances with the *current* dynamics estimate.
        z_new.append(E_all[i] @ z_all[i] + mu[i - 1] * (E_all[i] @ dz))
    return ObserverState(E_est=E_new, F_est=F_new, zeta=z_new)


def observer_errors(state, leader, v):
    """Frobenius-norm estimation errors per follower.

    Returns a dict with arrays ``E``, ``F``, ``zeta`` of length N.
    """
    E = np.asarray(leader.E, dtype=float)
    F = np.asarray(leader.F, dtype=float)
    v = np.asarray(v, dtype=float)
    return {
        "E": np.array([np.linalg.norm(Ei - E) for Ei in state.E_est]),
        "F": np.array([np.linalg.norm(Fi - F) for Fi in state.F_est]),
        "zeta": np.array([np.linalg.norm(zi - v) for zi in state.zeta]),
    }
