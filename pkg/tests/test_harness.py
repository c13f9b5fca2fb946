import json
from pathlib import Path

import pytest

from uavmec.core.exceptions import ConfigError, SimulationError, TraceFormatError
from uavmec.schemas.experiment import ExperimentConfig, MetricsRow, load_experiment_config, parse_experiment_config
from uavmec.services import harness
from uavmec.services.trace_io import save_network, write_traces
from uavmec.services.traffic import build_grid_network, generate_grid_traces
from uavmec.utils.enums import Algorithm, EnvironmentKind

TINY_NETWORK = {"window": 5, "conv_filters": [2, 3], "feature_dim": 4, "attention_dim": 3}


def small_config(**fields) -> dict:
    raw = {
        "scenario": {"type": "grid", "rows": 3, "cols": 3, "horizon": 6},
        "lattice": {"x_max": 4, "y_max": 4, "z_max": 1},
        "num_uavs": 2,
        "num_vehicles": 10,
        "algorithm": "random",
        "episodes": 3,
        "seed": 5,
    }
    raw.update(fields)
    return raw


def write_config(tmp_path, raw, name="experiment.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw), encoding="utf-8")
    return path


# ============ Config loading ============

def test_defaults_follow_simulation_table():
    cfg = parse_experiment_config({"scenario": {"type": "grid"}, "algorithm": "q-single"})
    assert cfg.num_uavs == 5
    assert cfg.num_vehicles == 100
    assert cfg.episodes == 5000
    assert cfg.hyperparameters.learning_rate == 0.01
    assert cfg.hyperparameters.discount == 0.9
    assert cfg.hyperparameters.qoe_threshold == 0.1
    assert cfg.radio.bandwidth_bs == 10e6
    assert cfg.radio.max_subchannels == 10
    assert cfg.radio.tx_power == 4000.0
    assert cfg.radio.carrier_freq == 2e9
    assert cfg.environment == EnvironmentKind.MEC


@pytest.mark.parametrize(
    "content, fragment",
    [
        ("{not json", "not valid JSON"),
        ("[1, 2]", "JSON object"),
        (json.dumps({"episodes": 3}), "algorithm"),
        (json.dumps({"algorithm": "random", "num_uavs": 0}), "num_uavs"),
        (json.dumps({"algorithm": "random", "surprise": 1}), "surprise"),
    ],
)
def test_invalid_configs_name_the_file(tmp_path, content, fragment):
    path = tmp_path / "bad.json"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        load_experiment_config(path)
    assert info.value.config_path == str(path)
    assert fragment in info.value.message


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_experiment_config(tmp_path / "absent.json")


def test_trace_scenario_paths_resolve_against_config_dir(tmp_path):
    scenario_dir = tmp_path / "scenario"
    write_traces(generate_grid_traces(3, 3, 8, 5, seed=2), scenario_dir / "traces.csv")
    save_network(build_grid_network(3, 3), scenario_dir / "network.json")
    raw = small_config(scenario={"type": "trace", "trace_path": "traces.csv", "network_path": "network.json"})
    cfg = load_experiment_config(write_config(scenario_dir, raw))
    assert cfg.resolve("traces.csv") == scenario_dir / "traces.csv"
    outcome = harness.run_experiment(cfg, out_dir=tmp_path / "out")
    assert len(outcome.rows) == 3


def test_missing_trace_file_is_a_config_error(tmp_path):
    raw = small_config(scenario={"type": "trace", "trace_path": "nowhere.csv"})
    with pytest.raises(ConfigError, match="nowhere.csv"):
        load_experiment_config(write_config(tmp_path, raw))


def test_trace_scenario_is_checked_against_its_network(tmp_path):
    save_network(build_grid_network(3, 3), tmp_path / "network.json")
    (tmp_path / "traces.csv").write_text(
        "t,vehicle_id,x,y,lane_id\n0,0,10.0,0.0,0\n0,1,999.0,999.0,42\n1,0,20.0,0.0,0\n", encoding="utf-8"
    )
    raw = small_config(scenario={"type": "trace", "trace_path": "traces.csv", "network_path": "network.json"})
    cfg = load_experiment_config(write_config(tmp_path, raw))
    with pytest.raises(TraceFormatError, match="unknown lanes"):
        harness.load_scenario(cfg, cfg.seed)


def test_overrides_replace_file_values(tmp_path):
    path = write_config(tmp_path, small_config())
    cfg = load_experiment_config(path, {"algorithm": "q-multi", "episodes": None, "seed": 11})
    assert cfg.algorithm == Algorithm.Q_MULTI
    assert cfg.episodes == 3
    assert cfg.seed == 11


# ============ Runs ============

def test_random_run_writes_one_row_per_episode(tmp_path):
    cfg = parse_experiment_config(small_config())
    outcome = harness.run_experiment(cfg, out_dir=tmp_path)
    assert [row.episode for row in outcome.rows] == [0, 1, 2]
    assert all(row.algo == Algorithm.RANDOM and row.seed == 5 for row in outcome.rows)
    assert all(0 <= row.offloading_uav_count <= 2 for row in outcome.rows)
    assert all(row.wallclock_ms == 0.0 for row in outcome.rows)
    assert harness.read_metrics(outcome.metrics_path) == outcome.rows


def test_reruns_are_byte_identical(tmp_path):
    cfg = parse_experiment_config(small_config(algorithm="q-single", episodes=4))
    first = harness.run_experiment(cfg, out_dir=tmp_path / "a")
    second = harness.run_experiment(cfg, out_dir=tmp_path / "b")
    assert first.metrics_path.read_bytes() == second.metrics_path.read_bytes()
    assert [p.read_bytes() for p in first.checkpoints] == [p.read_bytes() for p in second.checkpoints]
    assert len(first.checkpoints) == 2


def test_run_without_writing_leaves_no_files(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    outcome = harness.run_experiment(parse_experiment_config(small_config()), write=False)
    assert outcome.metrics_path is None
    assert list(tmp_path.iterdir()) == []


def test_tabular_algorithms_reject_monitoring_environment():
    cfg = parse_experiment_config(small_config(environment="monitor", algorithm="q-multi"))
    with pytest.raises(ConfigError, match="mec environment"):
        harness.run_experiment(cfg, write=False)


def test_deployment_stage_sets_training_start():
    cfg = parse_experiment_config(small_config(algorithm="q-multi", mec={"deployment_episodes": 25}))
    frames, _ = harness.load_scenario(cfg, cfg.seed)
    deployed = harness.deploy_uavs(cfg, frames, cfg.seed)
    assert len(deployed) == 2
    assert all(cfg.lattice.contains(cell) for cell in deployed)

    env = harness.build_environment(cfg, cfg.seed)
    assert env.setup.mec.initial_cells == list(deployed)
    assert env.reset().uav_cells == deployed

    # The greedy rollout starts at the marginal cells, so deployment never scores below them
    plain = harness.build_environment(parse_experiment_config(small_config(algorithm="q-multi")), cfg.seed)
    assert env.mos_at(deployed) >= plain.mos_at(plain.initial_cells())

    outcome = harness.run_experiment(cfg, write=False)
    assert len(outcome.rows) == 3


def test_evaluate_reloads_q_tables(tmp_path):
    cfg = parse_experiment_config(small_config(algorithm="q-multi", episodes=3, evaluation_episodes=2))
    trained = harness.run_experiment(cfg, out_dir=tmp_path / "train")
    assert all(p.parent.name == harness.QTABLE_DIR for p in trained.checkpoints)
    outcome = harness.evaluate(cfg, tmp_path / "train" / harness.QTABLE_DIR, out_dir=tmp_path / "eval")
    assert len(outcome.rows) == 2
    assert (tmp_path / "eval" / harness.METRICS_FILE).is_file()


def test_evaluate_reloads_network_checkpoint(tmp_path):
    raw = small_config(
        environment="monitor",
        monitor={"rows": 4, "cols": 4, "horizon": 4},
        algorithm="magcdrl",
        episodes=2,
        evaluation_episodes=3,
        hyperparameters={"warmup_experiences": 0, "network": TINY_NETWORK},
    )
    cfg = parse_experiment_config(raw)
    trained = harness.run_experiment(cfg, out_dir=tmp_path)
    assert trained.checkpoints == [tmp_path / harness.POLICY_FILE]
    outcome = harness.evaluate(cfg, tmp_path / harness.POLICY_FILE)
    assert [row.episode for row in outcome.rows] == [0, 1, 2]
    assert outcome.metrics_path is None


def test_untied_actor_critic_trains_per_agent_weights(tmp_path):
    raw = small_config(
        environment="monitor",
        monitor={"rows": 4, "cols": 4, "horizon": 3},
        algorithm="ac",
        episodes=2,
        hyperparameters={"warmup_experiences": 0, "network": TINY_NETWORK},
    )
    outcome = harness.run_experiment(parse_experiment_config(raw), out_dir=tmp_path)
    assert len(outcome.rows) == 2


# ============ Metrics ============

def test_metrics_invariants_are_enforced():
    row = MetricsRow(episode=0, algo="random", seed=0, total_reward=0.0, mos_total=30.0, mean_mos=3.0, offloading_uav_count=3)
    with pytest.raises(SimulationError) as info:
        harness.check_row(row, num_uavs=2, scored_entries=10)
    assert info.value.error_code == "metrics_invariant"
    with pytest.raises(SimulationError):
        harness.check_row(row, num_uavs=3, scored_entries=31)
    harness.check_row(row, num_uavs=3, scored_entries=30)


def test_metrics_csv_round_trips_floats(tmp_path):
    row = MetricsRow(
        episode=0, algo="ac", seed=1, total_reward=0.1 + 0.2, mos_total=1 / 3, mean_mos=2 / 3, offloading_uav_count=1,
    )
    path = harness.write_metrics([row], tmp_path / "m.csv")
    assert harness.read_metrics(path) == [row]
    assert path.read_text(encoding="utf-8").splitlines()[0] == ",".join(
        ["episode", "algo", "seed", "total_reward", "mos_total", "mean_mos", "offloading_uav_count", "wallclock_ms"]
    )


def test_shortage_report_flags_dense_blocks():
    cfg = parse_experiment_config(small_config(scenario={"type": "grid", "rows": 3, "cols": 3, "horizon": 4, "density_threshold": 1e-6}))
    frames, network = harness.load_scenario(cfg, cfg.seed)
    report = harness.report_shortages(cfg, frames, network)
    assert report
    assert set(report) <= {frame.t for frame in frames}


def test_config_json_schema_example_validates():
    example = ExperimentConfig.model_json_schema()["example"]
    assert parse_experiment_config(example).algorithm == Algorithm.MAGCDRL


@pytest.mark.parametrize("name", ["mec_grid.json", "mec_trace.json", "monitor.json"])
def test_example_configs_load(name):
    example_dir = Path(__file__).resolve().parent.parent / "data" / "example"
    cfg = load_experiment_config(example_dir / name)
    assert cfg.base_dir == example_dir


def test_bundled_trace_scenario_runs():
    example_dir = Path(__file__).resolve().parent.parent / "data" / "example"
    cfg = load_experiment_config(example_dir / "mec_trace.json", {"episodes": 2})
    frames, network = harness.load_scenario(cfg, cfg.seed)
    assert len(frames) == 6 and len(network.lanes) == 12
    outcome = harness.run_experiment(cfg, write=False)
    assert len(outcome.rows) == 2
    assert all(row.mos_total >= 6 for row in outcome.rows)


# ============ Algorithm comparisons ============

SEEDS = range(5)


def seed_average(raw: dict, field: str, tail: int) -> float:
    """Mean of `field` over the last `tail` episodes, averaged across seeds."""
    per_seed = []
    for seed in SEEDS:
        rows = harness.run_experiment(parse_experiment_config({**raw, "seed": seed}), write=False).rows
        per_seed.append(sum(getattr(row, field) for row in rows[-tail:]) / tail)
    return sum(per_seed) / len(per_seed)


@pytest.mark.slow
def test_attention_beats_independent_actor_critic_on_monitoring():
    raw = {
        "environment": "monitor",
        "monitor": {"rows": 8, "cols": 8, "horizon": 50},
        "num_uavs": 3,
        "episodes": 2000,
        "hyperparameters": {"warmup_experiences": 0},
    }
    attention = seed_average({**raw, "algorithm": "magcdrl"}, "total_reward", 100)
    independent = seed_average({**raw, "algorithm": "ac"}, "total_reward", 100)
    assert attention >= independent


@pytest.mark.slow
def test_mean_mos_ranks_attention_over_actor_critic_over_q_learning():
    raw = {
        "scenario": {"type": "grid", "rows": 10, "cols": 10, "horizon": 50},
        "num_uavs": 5,
        "num_vehicles": 100,
        "episodes": 2000,
        "hyperparameters": {"warmup_experiences": 0},
    }
    ranked = [seed_average({**raw, "algorithm": algo}, "mean_mos", 100) for algo in ("magcdrl", "ac", "q-multi")]
    assert ranked[0] >= ranked[1] >= ranked[2]
