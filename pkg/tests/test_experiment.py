import copy
import csv
import json

import numpy as np
import pytest

from coot.errors import ConfigError
from coot.experiment import (
    compare_with_oracle,
    config_from_dict,
    load_bundled_config,
    load_config,
    main,
    oracle_solutions,
    run_experiment,
    write_reports,
)
from coot.offpolicy import DEFAULT_NOISE
from coot.oracle import h_from_p


def test_bundled_config_contents(benchmark):
    assert benchmark.mas.n_followers == 4
    assert benchmark.params.t0 == 85
    assert benchmark.params.t_end == 145
    assert benchmark.tracking_horizon == 420
    assert benchmark.params.noise_terms == (("sin", 0.1, 16.0), ("cos", 0.1, 11.0))
    assert benchmark.mas.leader.n_v == 2


def test_config_round_trip(benchmark):
    again = config_from_dict(copy.deepcopy(benchmark.raw))
    assert again.mas.n_followers == benchmark.mas.n_followers
    assert np.allclose(again.mas.leader.E, benchmark.mas.leader.E)
    assert again.params == benchmark.params


def test_config_noise_semantics(benchmark):
    raw = copy.deepcopy(benchmark.raw)
    del raw["noise"]
    assert config_from_dict(raw).params.noise_terms == DEFAULT_NOISE
    raw["noise"] = []
    assert config_from_dict(raw).params.noise_terms == ()


@pytest.mark.parametrize(
    "mutate",
    [
        lambda raw: raw.pop("leader"),
        lambda raw: raw["leader"].pop("E"),
        lambda raw: raw["followers"][0].pop("B"),
        lambda raw: raw["graph"].__setitem__("edges", [[0, 1, 1.0]]),
        lambda raw: raw["graph"].__setitem__("n_followers", 7),
        lambda raw: raw["learning"].__setitem__("bogus_option", 3),
        lambda raw: raw["noise"].append({"kind": "square", "amplitude": 1, "frequency": 1}),
        lambda raw: raw["followers"][0].__setitem__("A", [["x", "y"], ["z", "w"]]),
        lambda raw: raw["cost"].__setitem__("R", [[[-1.0]]] * 4),
    ],
)
def test_bad_configs_rejected(benchmark, mutate):
    raw = copy.deepcopy(benchmark.raw)
    mutate(raw)
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_oracle_solutions(benchmark):
    mas = benchmark.mas
    refs = oracle_solutions(mas)
    assert len(refs) == 4
    for f, Q, R, ref in zip(mas.followers, mas.Q, mas.R, refs):
        assert ref.rho < 1.0
        gain = np.linalg.solve(R + f.B.T @ ref.P @ f.B, f.B.T @ ref.P @ f.A)
        assert np.allclose(ref.K, gain, atol=1e-9)
        assert np.linalg.norm(f.A @ ref.X + f.B @ ref.U - ref.X @ mas.leader.E) < 1e-10
        assert np.allclose(ref.T, ref.U + ref.K @ ref.X, atol=1e-12)
        assert np.allclose(ref.H, h_from_p(ref.P, f.A, f.B, Q, R), atol=1e-12)


def test_comparison_rows(benchmark, alg1_run, alg2_run):
    rows1 = compare_with_oracle(benchmark, alg1_run)
    assert [r["agent"] for r in rows1] == [1, 2, 3, 4]
    for row in rows1:
        assert "H_err" not in row
        assert row["K_err"] < 1e-5
        assert row["T_err"] < 0.05
        assert row["rho_learned"] < 1.0
    rows2 = compare_with_oracle(benchmark, alg2_run)
    for row in rows2:
        assert row["H_err"] < 1e-5


def test_run_experiment_writes_reports(tmp_path, behavior_log):
    config = load_bundled_config()
    result = run_experiment(config, algorithm=1, out_dir=tmp_path, log=behavior_log)
    expected = ["trajectory.csv", "closed_loop.csv", "learned_gains.csv"]
    expected += [f"stab_history_agent{i}.csv" for i in range(1, 5)]
    expected += [f"opt_history_agent{i}.csv" for i in range(1, 5)]
    expected += [f"regulator_history_agent{i}.csv" for i in range(1, 5)]
    for name in expected:
        assert (tmp_path / name).exists(), name
    with open(tmp_path / "stab_history_agent1.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["k"] == "0"
    assert {"gamma", "alpha", "rho_oracle", "K_0_0", "K_0_1"} <= set(rows[0])
    assert all(float(r["rho_oracle"]) * float(r["gamma"]) < 1.0 for r in rows)
    with open(tmp_path / "learned_gains.csv", newline="") as fh:
        gains = list(csv.DictReader(fh))
    assert len(gains) == 4
    assert float(gains[0]["K_0_0"]) == pytest.approx(result.learned.K_star[0][0, 0])


def test_write_reports_algorithm2_columns(tmp_path, benchmark, alg2_run):
    write_reports(benchmark, alg2_run, tmp_path, algorithm=2)
    with open(tmp_path / "opt_history_agent1.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert "H_err" in rows[0]
    assert float(rows[-1]["H_err"]) < 1e-5


def test_cli_simulate(tmp_path, capsys):
    code = main(["simulate", "--out", str(tmp_path), "--t-end", "30"])
    assert code == 0
    assert (tmp_path / "trajectory.csv").exists()
    assert "30 steps" in capsys.readouterr().out


def test_cli_oracle_prints_csv(capsys):
    assert main(["oracle"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("agent,P_0_0")
    assert len(out) == 5


def test_cli_learn(tmp_path, capsys):
    code = main(["learn", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "agent 1:" in out and "closed loop:" in out
    assert (tmp_path / "closed_loop.csv").exists()


def test_cli_rejects_mismatched_scheme(capsys):
    assert main(["learn", "--scheme", "A"]) == 2
    assert "scheme" in capsys.readouterr().err
    assert main(["learn", "--algorithm", "2", "--scheme", "1"]) == 2


def test_cli_missing_config_is_code_2(tmp_path, capsys):
    assert main(["learn", "--config", str(tmp_path / "nope.json")]) == 2


def test_cli_rank_failure_is_code_3(tmp_path, benchmark, capsys):
    raw = copy.deepcopy(benchmark.raw)
    raw["learning"]["t_f"] = 90
    path = tmp_path / "thin.json"
    path.write_text(json.dumps(raw))
    assert main(["learn", "--config", str(path)]) == 3
    assert "rank" in capsys.readouterr().err


def test_cli_search_failure_is_code_4(tmp_path, benchmark, capsys):
    raw = copy.deepcopy(benchmark.raw)
    raw["learning"]["beta_sequence"] = []
    path = tmp_path / "noscale.json"
    path.write_text(json.dumps(raw))
    assert main(["learn", "--config", str(path)]) == 4
    assert "iteration failed" in capsys.readouterr().err
