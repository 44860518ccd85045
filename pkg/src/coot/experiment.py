"""Experiment configuration, report generation, and the command line.

A JSON file fully describes a network (leader, followers, graph, costs,
noise, learning constants); this module turns it into model objects, runs
either learning pipeline plus the closed loop, compares against the
model-based references, and writes everything of interest as CSV.
"""

import argparse
import csv
import json
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    AssumptionError,
    ConfigError,
    ConvergenceError,
    CootError,
    DivergenceError,
    RankConditionError,
    SearchError,
    StabilityError,
)
from .matkit import spectral_radius
from .observer import Topology
from .offpolicy import LearnParams, run_algorithm1, run_algorithm1_from_log
from .oracle import dare_reference, h_from_p, regulator_direct_solve
from .plant import FollowerModel, LeaderModel, MasModel, simulate_behavior, simulate_closed_loop
from .qlearn import run_algorithm2, run_algorithm2_from_log

BUNDLED_CONFIG = "paper_sec6.json"
_SCHEMES_BY_ALGORITHM = {1: ("1", "2"), 2: ("A", "B", "C")}


@dataclass
class ExperimentConfig:
    name: str
    mas: MasModel
    params: LearnParams
    tracking_horizon: int
    raw: dict


def _require(d, key, where):
    if key not in d:
        raise ConfigError(f"missing key {key!r} in {where}")
    return d[key]


def _matrix(obj, name):
    try:
        M = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} is not a numeric matrix") from exc
    if M.ndim != 2:
        raise ConfigError(f"{name} must be a list of rows (2-d), got {M.ndim}-d")
    return M


def config_from_dict(data, name_hint="config"):
    """Build an :class:`ExperimentConfig` from a parsed JSON dictionary."""
    if not isinstance(data, dict):
        raise ConfigError("top-level JSON value must be an object")
    leader_d = _require(data, "leader", "config")
    leader = LeaderModel(
        E=_matrix(_require(leader_d, "E", "leader"), "leader.E"),
        F=_matrix(_require(leader_d, "F", "leader"), "leader.F"),
        v0=leader_d.get("v0"),
    )
    followers = []
    for idx, fd in enumerate(_require(data, "followers", "config")):
        where = f"followers[{idx}]"
        followers.append(
            FollowerModel(
                A=_matrix(_require(fd, "A", where), f"{where}.A"),
                B=_matrix(_require(fd, "B", where), f"{where}.B"),
                C=_matrix(_require(fd, "C", where), f"{where}.C"),
                S=_matrix(_require(fd, "S", where), f"{where}.S"),
                x0=fd.get("x0"),
            )
        )
    graph_d = _require(data, "graph", "config")
    n_followers = int(graph_d.get("n_followers", len(followers)))
    if n_followers != len(followers):
        raise ConfigError(
            f"graph.n_followers = {n_followers} but {len(followers)} followers are defined"
        )
    edges = _require(graph_d, "edges", "graph")
    try:
        topology = Topology.from_edges(n_followers, edges)
    except CootError as exc:
        raise ConfigError(f"bad graph: {exc}") from exc

    cost_d = _require(data, "cost", "config")
    Q = [_matrix(Qi, f"cost.Q[{i}]") for i, Qi in enumerate(_require(cost_d, "Q", "cost"))]
    R = [_matrix(Ri, f"cost.R[{i}]") for i, Ri in enumerate(_require(cost_d, "R", "cost"))]

    try:
        mas = MasModel(followers=followers, leader=leader, topology=topology, Q=Q, R=R)
    except CootError as exc:
        raise ConfigError(f"inconsistent network: {exc}") from exc

    if "noise" in data:
        noise = []
        for idx, term in enumerate(data["noise"]):
            kind = _require(term, "kind", f"noise[{idx}]")
            if kind not in ("sin", "cos"):
                raise ConfigError(f"noise[{idx}].kind must be 'sin' or 'cos', got {kind!r}")
            noise.append(
                (kind, float(_require(term, "amplitude", f"noise[{idx}]")),
                 float(_require(term, "frequency", f"noise[{idx}]")))
            )
        noise = tuple(noise)
    else:
        noise = LearnParams.noise_terms

    learn_d = data.get("learning", {})
    known = {
        "t0": int, "t_end": int, "t_f": int, "alpha0": float, "a": float,
        "lambda_bar": float, "eps1": float, "eps2": float, "kappa_c": float,
        "alpha_max": float, "rank_tol": float, "chi_max_iters": int,
        "scheme": str, "beta_sequence": tuple, "divergence_bound": float,
    }
    kwargs = {}
    for key, value in learn_d.items():
        if key not in known:
            raise ConfigError(f"unknown learning option {key!r}")
        kwargs[key] = tuple(value) if known[key] is tuple else known[key](value)
    params = LearnParams(noise_terms=noise, **kwargs)

    return ExperimentConfig(
        name=str(data.get("name", name_hint)),
        mas=mas,
        params=params,
        tracking_horizon=int(data.get("tracking_horizon", 420)),
        raw=data,
    )


def load_config(path):
    """Parse a JSON experiment description from disk."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data, name_hint=Path(path).stem)


def load_bundled_config():
    """The packaged four-follower benchmark configuration."""
    text = resources.files("coot").joinpath(f"data/{BUNDLED_CONFIG}").read_text()
    return config_from_dict(json.loads(text), name_hint=BUNDLED_CONFIG)


@dataclass
class OracleSolution:
    """Per-agent model-based references for one network."""

    P: np.ndarray
    K: np.ndarray
    H: np.ndarray
    X: np.ndarray
    U: np.ndarray
    T: np.ndarray
    rho: float


def oracle_solutions(mas):
    """Model-based optimum for every follower: Riccati plus regulator."""
    out = []
    for f, Q, R in zip(mas.followers, mas.Q, mas.R):
        sol = dare_reference(f.A, f.B, Q, R)
        X, U = regulator_direct_solve(f.A, f.B, f.C, f.S, mas.leader.E, mas.leader.F)
        out.append(
            OracleSolution(
                P=sol.P,
                K=sol.K,
                H=h_from_p(sol.P, f.A, f.B, Q, R, 1.0),
                X=X,
                U=U,
                T=U + sol.K @ X,
                rho=spectral_radius(f.A - f.B @ sol.K),
            )
        )
    return out


def compare_with_oracle(config, learned):
    """Per-agent error table between a learning run and the references."""
    refs = oracle_solutions(config.mas)
    rows = []
    for i, (ref, f) in enumerate(zip(refs, config.mas.followers)):
        row = {
            "agent": i + 1,
            "K_err": float(np.max(np.abs(learned.K_star[i] - ref.K))),
            "P_err": float(np.linalg.norm(learned.P[i] - ref.P)),
            "X_err": float(np.max(np.abs(learned.X[i] - ref.X))),
            "U_err": float(np.max(np.abs(learned.U[i] - ref.U))),
            "T_err": float(np.max(np.abs(learned.T_star[i] - ref.T))),
            "rho_learned": spectral_radius(f.A - f.B @ learned.K_star[i]),
            "rho_star": ref.rho,
        }
        if learned.H is not None:
            row["H_err"] = float(np.linalg.norm(learned.H[i] - ref.H))
        rows.append(row)
    return rows


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])


def _flat_labels(prefix, M):
    return [f"{prefix}_{r}_{c}" for r in range(M.shape[0]) for c in range(M.shape[1])]


def write_reports(config, learned, out_dir, algorithm):
    """Dump a learning run into CSV files under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mas = config.mas
    refs = oracle_solutions(mas)

    learned.log.write_csv(out / "trajectory.csv")

    for i, hist in enumerate(learned.stab_histories):
        f = mas.followers[i]
        K0 = hist[0].K
        header = ["k", "gamma", "alpha", "rho_oracle"] + _flat_labels("K", K0)
        rows = []
        for rec in hist:
            rho = spectral_radius(f.A - f.B @ rec.K)
            rows.append([rec.k, rec.gamma, rec.alpha, rho] + [float(v) for v in rec.K.ravel()])
        _write_rows(out / f"stab_history_agent{i + 1}.csv", header, rows)

    for i, hist in enumerate(learned.opt_histories):
        ref = refs[i]
        header = ["j", "P_err", "K_err"]
        rows = []
        for rec in hist:
            P_j = rec.P if hasattr(rec, "P") else None
            if algorithm == 2:
                from .qlearn import p_from_h

                P_j = p_from_h(rec.H, rec.K)
            row = [
                rec.j,
                float(np.linalg.norm(P_j - ref.P)),
                float(np.linalg.norm(rec.K - ref.K)),
            ]
            if algorithm == 2:
                row.append(float(np.linalg.norm(rec.H - ref.H)))
            rows.append(row)
        if algorithm == 2:
            header = header + ["H_err"]
        _write_rows(out / f"opt_history_agent{i + 1}.csv", header, rows)

    for i, chi in enumerate(learned.chi_results):
        _write_rows(
            out / f"regulator_history_agent{i + 1}.csv",
            ["n", "residual", "chi_delta"],
            [list(step) for step in chi.history],
        )

    header = ["agent"]
    sample = learned
    header += _flat_labels("K", sample.K_star[0])
    header += _flat_labels("T", sample.T_star[0])
    header += _flat_labels("X", sample.X[0])
    header += _flat_labels("U", sample.U[0])
    rows = []
    for i in range(mas.n_followers):
        rows.append(
            [i + 1]
            + [float(v) for v in learned.K_star[i].ravel()]
            + [float(v) for v in learned.T_star[i].ravel()]
            + [float(v) for v in learned.X[i].ravel()]
            + [float(v) for v in learned.U[i].ravel()]
        )
    _write_rows(out / "learned_gains.csv", header, rows)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    learned: object
    closed_loop: object
    comparison: list


def run_experiment(config, algorithm=1, out_dir=None, log=None):
    """Learn, close the loop, compare with the oracle, optionally dump CSV."""
    if algorithm == 1:
        learned = run_algorithm1(config.mas, config.params) if log is None else (
            run_algorithm1_from_log(config.mas, log, config.params)
        )
    elif algorithm == 2:
        learned = run_algorithm2(config.mas, config.params) if log is None else (
            run_algorithm2_from_log(config.mas, log, config.params)
        )
    else:
        raise ConfigError(f"algorithm must be 1 or 2, got {algorithm!r}")
    closed = simulate_closed_loop(config.mas, learned, config.tracking_horizon)
    comparison = compare_with_oracle(config, learned)
    if out_dir is not None:
        write_reports(config, learned, out_dir, algorithm)
        closed.write_csv(Path(out_dir) / "closed_loop.csv")
    return ExperimentResult(
        config=config, learned=learned, closed_loop=closed, comparison=comparison
    )


def _apply_overrides(config, args):
    updates = {}
    for attr, flag in (
        ("scheme", "scheme"),
        ("a", "a"),
        ("lambda_bar", "lambda_bar"),
        ("t0", "t0"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            updates[attr] = value
    if updates:
        config.params = replace(config.params, **updates)
    algorithm = getattr(args, "algorithm", 1)
    scheme = config.params.scheme
    if scheme is not None and scheme not in _SCHEMES_BY_ALGORITHM[algorithm]:
        raise ConfigError(
            f"scheme {scheme!r} does not belong to algorithm {algorithm}; "
            f"valid choices are {_SCHEMES_BY_ALGORITHM[algorithm]}"
        )
    return config


def _config_from_args(args):
    if getattr(args, "config", None):
        return load_config(args.config)
    return load_bundled_config()


def _cmd_simulate(args):
    config = _config_from_args(args)
    params = config.params
    t_end = args.t_end if args.t_end is not None else (
        params.t_end if params.t_end is not None else params.t0 + 60
    )
    K0 = [np.zeros((f.m, f.n)) for f in config.mas.followers]
    log = simulate_behavior(config.mas, K0, params.noise_terms, t_end, params.divergence_bound)
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    log.write_csv(out / "trajectory.csv")
    print(f"wrote {out / 'trajectory.csv'} ({log.t_end} steps, {log.n_followers} agents)")
    return 0


def _cmd_learn(args):
    config = _apply_overrides(_config_from_args(args), args)
    result = run_experiment(config, algorithm=args.algorithm, out_dir=args.out)
    for row in result.comparison:
        fields = " ".join(
            f"{key}={row[key]:.3e}" for key in row if key not in ("agent", "rho_learned", "rho_star")
        )
        print(
            f"agent {row['agent']}: rho={row['rho_learned']:.4f} "
            f"(optimal {row['rho_star']:.4f}) {fields}"
        )
    emax = max(
        float(np.max(np.abs(result.closed_loop.e[i])))
        for i in range(config.mas.n_followers)
    )
    tail = max(
        float(np.max(np.abs(result.closed_loop.e[i][-20:])))
        for i in range(config.mas.n_followers)
    )
    print(f"closed loop: peak |e| = {emax:.3e}, final-window |e| = {tail:.3e}")
    if args.out:
        print(f"reports in {args.out}")
    return 0


def _cmd_reproduce(args):
    config = load_bundled_config()
    out = Path(args.out) if args.out else None
    for algorithm in (1, 2):
        dest = out / f"algorithm{algorithm}" if out else None
        result = run_experiment(config, algorithm=algorithm, out_dir=dest)
        learned = result.learned
        print(f"algorithm {algorithm}: minimal t_f = {learned.t_f}")
        for i, hist in enumerate(learned.stab_histories):
            rho = spectral_radius(
                config.mas.followers[i].A - config.mas.followers[i].B @ hist[-1].K
            )
            print(
                f"  agent {i + 1}: k={len(hist)} sweeps, "
                f"K~ = {np.array2string(hist[-1].K.ravel(), precision=4)}, rho = {rho:.4f}"
            )
        worst = max(row["K_err"] for row in result.comparison)
        print(f"  worst optimal-gain error vs oracle: {worst:.3e}")
    return 0


def _cmd_oracle(args):
    config = _config_from_args(args)
    refs = oracle_solutions(config.mas)
    writer = csv.writer(sys.stdout)
    first = refs[0]
    header = (
        ["agent"]
        + _flat_labels("P", first.P)
        + _flat_labels("K", first.K)
        + _flat_labels("X", first.X)
        + _flat_labels("U", first.U)
        + _flat_labels("T", first.T)
    )
    writer.writerow(header)
    for i, ref in enumerate(refs):
        row = [i + 1] + [
            format(float(v), ".17g")
            for M in (ref.P, ref.K, ref.X, ref.U, ref.T)
            for v in M.ravel()
        ]
        writer.writerow(row)
    return 0


def _cmd_compare(args):
    config = _apply_overrides(_config_from_args(args), args)
    result = run_experiment(config, algorithm=args.algorithm)
    rows = result.comparison
    keys = list(rows[0].keys())
    writer = csv.writer(sys.stdout)
    writer.writerow(keys)
    for row in rows:
        writer.writerow(
            [row["agent"]] + [format(float(row[k]), ".6e") for k in keys if k != "agent"]
        )
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="coot",
        description="Model-free stabilizing policy iteration for cooperative output tracking",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_algorithm=True):
        p.add_argument("--config", help="experiment JSON (default: bundled benchmark)")
        p.add_argument("--out", help="directory for CSV reports")
        p.add_argument("--seed", type=int, default=None, help="reserved; runs are deterministic")
        if with_algorithm:
            p.add_argument("--algorithm", type=int, choices=(1, 2), default=1)
            p.add_argument("--scheme", choices=("1", "2", "A", "B", "C"))
            p.add_argument("--a", type=float, dest="a")
            p.add_argument("--lambda-bar", type=float, dest="lambda_bar")
            p.add_argument("--t0", type=int, dest="t0")

    p_sim = sub.add_parser("simulate", help="run the behavior phase and dump the trajectory")
    common(p_sim, with_algorithm=False)
    p_sim.add_argument("--t-end", type=int, default=None, dest="t_end")
    p_sim.set_defaults(func=_cmd_simulate)

    p_learn = sub.add_parser("learn", help="full learning pipeline plus closed loop")
    common(p_learn)
    p_learn.set_defaults(func=_cmd_learn)

    p_rep = sub.add_parser(
        "reproduce-paper", help="run both pipelines on the bundled benchmark"
    )
    p_rep.add_argument("--out", help="directory for CSV reports")
    p_rep.set_defaults(func=_cmd_reproduce)

    p_oracle = sub.add_parser("oracle", help="print model-based reference solutions as CSV")
    common(p_oracle, with_algorithm=False)
    p_oracle.set_defaults(func=_cmd_oracle)

    p_cmp = sub.add_parser("compare", help="learn, then print errors against the oracle")
    common(p_cmp)
    p_cmp.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, AssumptionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except RankConditionError as exc:
        print(f"rank condition failed: {exc}", file=sys.stderr)
        return 3
    except (ConvergenceError, SearchError, StabilityError, DivergenceError) as exc:
        print(f"iteration failed: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
