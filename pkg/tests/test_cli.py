import json

import pytest

from clusterlasso.cli import main

INI = """\
[experiment]
schema_version = 1
trials = 3
master_seed = 17
workers = 1

[mixture]
n = 24
p = 60
n_clusters = 6
n_active = 3
spread = 0.002

[centers]
source = orthonormal

[theorem]
alpha = 1.0
r = 0.2
cluster_floor = 0.5
cluster_power = 1

[truth]
support_rule = one_per_cluster
magnitude = constant
value = 1.0
sigma = 0.08

[solver]
tol = 1e-9
max_iter = 20000
"""


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(INI)
    return str(path)


def test_no_arguments_prints_usage(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_exits_one():
    with pytest.raises(SystemExit) as err:
        main(["constants", "--nonsense"])
    assert err.value.code == 1


def test_constants_prints_entropy_integral(config_path, capsys):
    assert main(["constants", "--config", config_path]) == 0
    out = capsys.readouterr().out
    assert "2.658680776" in out
    assert "c_mu" in out and "delta_lower" in out


def test_constants_runtime_failure_exit_two(capsys):
    assert main(["constants", "--config", "/nonexistent/path.cfg"]) == 2
    assert "error:" in capsys.readouterr().err


def test_gen_solve_roundtrip(tmp_path, config_path, capsys):
    design = tmp_path / "design.json"
    truth = tmp_path / "truth.json"
    assert (
        main(
            [
                "gen", "--config", config_path, "--trial", "1",
                "--out", str(design), "--with-truth", str(truth),
            ]
        )
        == 0
    )
    sol_path = tmp_path / "solution.json"
    assert (
        main(
            [
                "solve", "--design", str(design), "--truth", str(truth),
                "--config", config_path, "--out", str(sol_path),
            ]
        )
        == 0
    )
    doc = json.loads(sol_path.read_text())
    assert doc["kind"] == "solution"
    assert doc["duality_gap"] <= 1e-9 * max(1.0, doc["objective"])
    assert doc["kkt_infinity"] <= doc["lam"] * (1 + 1e-6)
    assert len(doc["support"]) == len(doc["values"])


def test_gen_by_seed_solve(tmp_path, config_path):
    design = tmp_path / "design.json"
    truth = tmp_path / "truth.json"
    main(
        [
            "gen", "--config", config_path, "--trial", "0", "--by-seed",
            "--out", str(design), "--with-truth", str(truth),
        ]
    )
    doc = json.loads(design.read_text())
    assert "deviations_b64" not in doc
    assert (
        main(
            [
                "solve", "--design", str(design), "--truth", str(truth),
                "--config", config_path,
            ]
        )
        == 0
    )


def test_verify_prints_assumptions_and_events(config_path, capsys):
    assert main(["verify", "--config", config_path, "--trial", "0"]) == 0
    out = capsys.readouterr().out
    assert "events:" in out
    assert "assumptions:" in out
    assert "center coherence" in out


def test_experiment_reproducible_and_report_matches(tmp_path, config_path, capsys):
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    assert main(["experiment", "--config", config_path, "--out", str(out1)]) == 0
    assert main(["experiment", "--config", config_path, "--out", str(out2)]) == 0
    for name in ("trials.jsonl", "summary.json", "trials.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    rep = tmp_path / "rep"
    assert (
        main(
            [
                "report", "--config", config_path,
                "--records", str(out1 / "trials.jsonl"), "--out", str(rep),
            ]
        )
        == 0
    )
    assert (rep / "summary.json").read_bytes() == (
        out1 / "summary.json"
    ).read_bytes()
    assert (rep / "trials.csv").read_bytes() == (out1 / "trials.csv").read_bytes()


def test_experiment_override_flags(tmp_path, config_path):
    out = tmp_path / "ov"
    assert (
        main(
            [
                "experiment", "--config", config_path, "--trials", "1",
                "--seed", "99", "--out", str(out),
            ]
        )
        == 0
    )
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_trials"] == 1
    assert summary["config"]["experiment"]["master_seed"] == 99
