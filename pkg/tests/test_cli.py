import json

import numpy as np
import pytest

from hydrodyn.actuator import ActuatorCoeffs, save_coeffs
from hydrodyn.baselines import save_weights
from hydrodyn.cli import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, run_command
from hydrodyn.config import RunConfig, config_from_dict, dump_config, load_config
from hydrodyn.errors import ConfigError
from hydrodyn.log import TrajectoryLog, header, write_log
from hydrodyn.nets import init_net


def small_config(archs=("mlp", "gru")):
    scen = {name: {"duration": 0.6} for name in RunConfig().scenarios}
    return {"scenarios": scen, "baselines": {"archs": list(archs), "iters": 3},
            "bench": {"iters": 100_000}}


@pytest.fixture
def small_cfg_file(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(small_config()))
    return p


def _rand_log(path, n=200, seed=0):
    rng = np.random.default_rng(seed)
    z = lambda s: rng.normal(0, s, (n, 12))
    write_log(TrajectoryLog(np.arange(n) * 1e-3, z(0.1), z(0.1), z(1.0), z(100.0)), path)
    return path


# --- config --------------------------------------------------------------------------

def test_default_config_round_trip(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(dump_config(RunConfig()))
    assert load_config(p) == RunConfig()


def test_partial_config_keeps_defaults():
    cfg = config_from_dict({"baselines": {"iters": 7}})
    assert cfg.baselines.iters == 7
    assert cfg.baselines.archs == RunConfig().baselines.archs
    assert cfg.scenarios == RunConfig().scenarios


@pytest.mark.parametrize("bad", [
    {"bogus": 1},
    {"baselines": {"iters": "many"}},
    {"baselines": {"iters": 0}},
    {"baselines": {"archs": ["cnn"]}},
    {"train_scenario": "nowhere"},
    {"scenarios": {"train": {"duration": -1.0}}},
    {"rewards": {"c_f": 2.0}},
])
def test_invalid_configs_rejected(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_invalid_json_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


# --- exit codes ----------------------------------------------------------------------

def test_unknown_subcommand_and_missing_args(tmp_path, capsys):
    assert run_command(["frobnicate"]) == EXIT_INVALID
    assert run_command([]) == EXIT_INVALID
    assert run_command(["fit", "--out", str(tmp_path)]) == EXIT_INVALID
    assert "usage" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path):
    assert run_command(["simulate", "--out", str(tmp_path),
                        "--set", "scenarios.train.duration=-2"]) == EXIT_INVALID
    assert run_command(["simulate", "--out", str(tmp_path), "--set", "nonsense"]) == EXIT_INVALID


def test_missing_file_exit_code(tmp_path):
    assert run_command(["fit", "--log", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 1


def test_schema_error_exit_code(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,q_0\n0,1\n")
    assert run_command(["fit", "--log", str(p), "--out", str(tmp_path / "o")]) == EXIT_INVALID


def test_zero_log_fit_is_runtime_failure(tmp_path, capsys):
    n = 100
    rows = [",".join(header())] + [",".join([f"{i * 1e-3:.3f}"] + ["0"] * 48) for i in range(n)]
    p = tmp_path / "zero.csv"
    p.write_text("\n".join(rows) + "\n")
    assert run_command(["fit", "--log", str(p), "--out", str(tmp_path / "o")]) == EXIT_RUNTIME
    assert "insufficient excitation" in capsys.readouterr().err


def test_rewards_check(tmp_path):
    state = tmp_path / "s.json"
    state.write_text(json.dumps({"v_xy": [0.4, 0.0], "cmd": [0.4, 0.0, 0.0]}))
    out = tmp_path / "o"
    assert run_command(["rewards-check", "--state", str(state), "--out", str(out)]) == EXIT_OK
    terms = json.loads((out / "terms.json").read_text())
    assert terms["global"]["r_v"] == pytest.approx(3.0)
    state.write_text("{oops")
    assert run_command(["rewards-check", "--state", str(state), "--out", str(out)]) == 1


def test_eval_four_models_five_logs(tmp_path):
    logs = [str(_rand_log(tmp_path / f"d{i}.csv", seed=i)) for i in range(5)]
    save_coeffs(tmp_path / "c.json", [ActuatorCoeffs(4e5, 0.02, 1e3, 50.0, 0.05)] * 12)
    weights = []
    for arch in ("mlp", "lstm", "gru"):
        save_weights(init_net(arch, 0), tmp_path / f"{arch}.weights")
        weights += ["--weights", str(tmp_path / f"{arch}.weights")]
    out = tmp_path / "o"
    argv = ["eval", "--coeffs", str(tmp_path / "c.json"), "--out", str(out), *weights]
    for p in logs:
        argv += ["--log", p]
    assert run_command(argv) == EXIT_OK
    csv_lines = (out / "table3.csv").read_text().splitlines()
    assert len(csv_lines) == 5
    assert len(csv_lines[0].split(",")) == 1 + 15
    assert [l.split(",")[0] for l in csv_lines[1:]] == ["Actuator model", "MLP", "LSTM", "GRU"]
    assert run_command(["eval", "--log", logs[0], "--out", str(out)]) == EXIT_INVALID


def test_dist_and_bench(tmp_path):
    log = _rand_log(tmp_path / "d.csv")
    out = tmp_path / "o"
    assert run_command(["dist", "--log", str(log), "--bins", "8", "--out", str(out)]) == EXIT_OK
    d = json.loads((out / "dist.json").read_text())
    assert d["n_total"] == 200 * 12 and 0.0 <= d["opposite_fraction"] <= 1.0
    save_coeffs(tmp_path / "c.json", [ActuatorCoeffs(4e5, 0.02, 1e3, 50.0, 0.05)] * 12)
    assert run_command(["bench", "--coeffs", str(tmp_path / "c.json"), "--iters", "100000",
                        "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "bench.json").read_text())["median"] > 0


def test_simulate_fit_train_chain(tmp_path, small_cfg_file):
    out = tmp_path / "o"
    base = ["--config", str(small_cfg_file), "--out", str(out)]
    assert run_command(["simulate", "--scenario", "train", *base]) == EXIT_OK
    log = out / "log_train.csv"
    assert log.exists()
    assert run_command(["fit", "--log", str(log), *base]) == EXIT_OK
    assert len(json.loads((out / "coeffs.json").read_text())) == 12
    assert run_command(["train-baseline", "--arch", "mlp", "--log", str(log), "--iters", "2",
                        *base]) == EXIT_OK
    assert (out / "mlp.weights").exists()


def _tree(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_pipeline_is_deterministic_and_contained(tmp_path, small_cfg_file, monkeypatch):
    monkeypatch.chdir(tmp_path)
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        argv = ["pipeline", "--config", str(small_cfg_file), "--seed", "7", "--no-bench",
                "--out", str(out)]
        assert run_command(argv) == EXIT_OK
        runs.append(_tree(out))
    assert runs[0].keys() == runs[1].keys()
    for k in runs[0]:
        assert runs[0][k] == runs[1][k], k
    names = {str(k) for k in runs[0]}
    assert {"coeffs.json", "table3.csv", "summary.json", "mlp.weights", "gru.weights"} <= names
    # nothing written outside the two output directories (besides the config fixture)
    assert {p.name for p in tmp_path.iterdir()} == {"a", "b", "small.json"}
