import json

import pandas as pd
import pytest

from orchestration import EXIT_FLAGGED, EXIT_INPUT_ERROR, EXIT_OK, EXIT_USAGE, RunConfig, file_digest, run
from solver_model.solver_options import EqOptions, SolverProfile
from tests.conftest import EXAMPLE1_OPTIMUM


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_solve_so_writes_artifacts(tmp_path, networks_dir, capsys):
    out = tmp_path / "so"
    code = run(["solve-so", "--network", str(networks_dir / "single_link.net"), "--restarts", "2", "--out", str(out)])
    assert code == EXIT_OK
    assert "J* = 6.000000" in capsys.readouterr().out

    frame = pd.read_csv(out / "so_flow.csv")
    assert list(frame.columns) == ["config_hash", "od_id", "path", "fh", "fa", "total"]
    assert frame.loc[0, "total"] == pytest.approx(3.0)

    summary = read_json(out / "summary.json")
    config = RunConfig.model_validate(read_json(out / "config.json"))
    assert summary["social_delay"] == pytest.approx(6.0)
    assert summary["flagged"] is False
    assert summary["config_hash"] == config.config_hash() == frame.loc[0, "config_hash"]
    assert config.options.so.restarts == 2
    assert (out / "summary.txt").read_text(encoding="utf-8").startswith("=" * 69)
    assert "[SO_Solver]" in (out / "run.log").read_text(encoding="utf-8")


def test_same_seed_same_bytes(tmp_path, networks_dir):
    network = str(networks_dir / "pigou2.net")
    for name in ("first", "second"):
        assert run(["solve-so", "--network", network, "--seed", "5", "--restarts", "3",
                    "--out", str(tmp_path / name)]) == EXIT_OK
    first = (tmp_path / "first" / "so_flow.csv").read_bytes()
    assert first == (tmp_path / "second" / "so_flow.csv").read_bytes()
    assert b"\r\n" not in first

    assert run(["solve-so", "--network", network, "--seed", "6", "--restarts", "3",
                "--out", str(tmp_path / "third")]) == EXIT_OK
    assert (read_json(tmp_path / "third" / "summary.json")["config_hash"]
            != read_json(tmp_path / "first" / "summary.json")["config_hash"])


def test_input_errors_exit_with_one(tmp_path, networks_dir):
    assert run(["solve-so", "--network", str(tmp_path / "missing.net"), "--out", str(tmp_path / "a")]) \
        == EXIT_INPUT_ERROR

    broken = tmp_path / "broken.net"
    broken.write_text("{", encoding="utf-8")
    assert run(["solve-so", "--network", str(broken), "--out", str(tmp_path / "b")]) == EXIT_INPUT_ERROR

    assert run(["solve-ue", "--network", str(networks_dir / "pigou2.net"), "--prices", str(tmp_path / "none.csv"),
                "--out", str(tmp_path / "c")]) == EXIT_INPUT_ERROR

    assert run(["solve-so", "--network", str(networks_dir / "pigou2.net"), "--profile", "no-such-profile",
                "--out", str(tmp_path / "d")]) == EXIT_INPUT_ERROR


def test_usage_errors_exit_with_two(tmp_path):
    assert run(["solve-so", "--out", str(tmp_path)]) == EXIT_USAGE
    assert run(["no-such-command"]) == EXIT_USAGE
    assert run(["solve-so", "--restarts", "many"]) == EXIT_USAGE
    assert run([]) == EXIT_USAGE


def test_unpriced_equilibria(tmp_path, networks_dir):
    out = tmp_path / "ue"
    code = run(["solve-ue", "--network", str(networks_dir / "pigou2.net"), "--prices", "none", "--restarts", "3",
                "--out", str(out)])
    assert code == EXIT_OK
    frame = pd.read_csv(out / "equilibria.csv")
    assert list(frame.columns[:9]) == ["config_hash", "restart", "converged", "duplicate_of", "gap",
                                       "normalized_gap", "social_delay", "total_cost", "iterations"]
    assert {"fh_1", "fa_1", "fh_2", "fa_2"} <= set(frame.columns)
    assert len(frame) == 3
    assert frame["converged"].all()
    assert frame["social_delay"].to_list() == pytest.approx([4.4037] * 3, abs=1e-3)

    summary = read_json(out / "summary.json")
    assert summary["dedup_distance"] == pytest.approx(1e-5)
    assert summary["scaled_load_spread"] <= 1e-4
    assert "distinct at link-flow distance 1e-05" in (out / "summary.txt").read_text(encoding="utf-8")


def test_snapshot_replay(tmp_path, networks_dir):
    original = tmp_path / "original"
    assert run(["price", "--network", str(networks_dir / "single_link.net"), "--seed", "3", "--restarts", "2",
                "--out", str(original)]) == EXIT_OK

    replay = tmp_path / "replay"
    assert run(["price", "--config", str(original / "config.json"), "--out", str(replay)]) == EXIT_OK
    assert (replay / "prices.csv").read_bytes() == (original / "prices.csv").read_bytes()
    replayed = read_json(replay / "config.json")
    assert replayed["out"] == str(replay)
    assert {**replayed, "out": None} == {**read_json(original / "config.json"), "out": None}

    assert run(["solve-so", "--config", str(original / "config.json"), "--out", str(tmp_path / "x")]) == EXIT_USAGE
    for flag, value in (("--seed", "4"), ("--restarts", "5"), ("--profile", "fast"), ("--network", "other.net")):
        assert run(["price", "--config", str(original / "config.json"), flag, value,
                    "--out", str(tmp_path / "y")]) == EXIT_USAGE
        assert not (tmp_path / "y").exists()


def test_strict_flags_unconverged_runs(tmp_path, networks_dir):
    network = networks_dir / "pigou2.net"
    snapshot = RunConfig(
        command="solve-ue",
        network=str(network),
        network_sha256=file_digest(network),
        profile="default",
        prices="none",
        options=SolverProfile(ue=EqOptions(max_iters=1, restarts=2)),
    )
    config = tmp_path / "config.json"
    config.write_text(snapshot.model_dump_json(), encoding="utf-8")

    assert run(["solve-ue", "--config", str(config), "--out", str(tmp_path / "lenient")]) == EXIT_OK
    assert read_json(tmp_path / "lenient" / "summary.json")["flagged"] is True
    assert run(["solve-ue", "--config", str(config), "--out", str(tmp_path / "strict"), "--strict"]) \
        == EXIT_FLAGGED


@pytest.mark.slow
def test_reproduce_example1(tmp_path):
    out = tmp_path / "example1"
    assert run(["reproduce-example1", "--out", str(out)]) == EXIT_OK
    summary = read_json(out / "summary.json")
    assert 192.57 <= summary["optimum"] <= 194.51
    assert summary["optimum"] == pytest.approx(EXAMPLE1_OPTIMUM, rel=5e-3)
    assert 194.62 <= summary["undifferentiated"] <= 196.58
    assert summary["undifferentiated"] > summary["optimum"]
    assert summary["certificate"] == "PASS"
    for name in ("so_flow.csv", "prices.csv", "equilibria.csv", "certificate.csv", "mpec_trace.csv",
                 "comparison.csv", "config.json", "summary.txt"):
        assert (out / name).exists()
