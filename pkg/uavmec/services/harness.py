"""
Experiment runner: builds the environment a config describes, runs the
selected algorithm and writes one metrics row per episode plus the final
policy checkpoint.
"""
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from uavmec.config import settings
from uavmec.core.checkpoint import load_checkpoint, save_checkpoint
from uavmec.core.exceptions import ConfigError, SimulationError, TraceFormatError
from uavmec.core.seeding import make_rng
from uavmec.models.trace import TraceFrame
from uavmec.models.world import Cell, EpisodeStats, WorldState
from uavmec.schemas.experiment import METRICS_COLUMNS, ExperimentConfig, MetricsRow
from uavmec.schemas.traffic import LaneNetwork
from uavmec.services.a2c import evaluate_policy, train_magcdrl
from uavmec.services.actions import NUM_ACTIONS
from uavmec.services.mec_env import MecEnvironment, MecSetup, evaluate_frame
from uavmec.services.monitor_env import MonitorEnvironment
from uavmec.services.network import ParameterSet
from uavmec.services.tabular import deploy, evaluate_greedy, load_qtable, make_agents, save_qtable, train_tabular
from uavmec.services.trace_io import load_network, read_traces, validate_traces
from uavmec.services.traffic import build_grid_network, generate_grid_traces, shortage_report
from uavmec.utils.enums import Algorithm, EnvironmentKind, ScenarioType

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"
POLICY_FILE = "policy.magc"
QTABLE_DIR = "qtables"


@dataclass
class RunOutcome:
    rows: List[MetricsRow]
    metrics_path: Optional[Path] = None
    checkpoints: List[Path] = field(default_factory=list)


# ============ Scenario ============

def mec_setup(cfg: ExperimentConfig) -> MecSetup:
    return MecSetup(lattice=cfg.lattice, radio=cfg.radio, mec=cfg.mec, rate_map=cfg.rate_map, weights=cfg.weights)


def load_scenario(cfg: ExperimentConfig, seed: int) -> Tuple[List[TraceFrame], Optional[LaneNetwork]]:
    scenario = cfg.scenario
    if scenario.type == ScenarioType.GRID:
        frames = generate_grid_traces(
            scenario.rows, scenario.cols, cfg.num_vehicles, scenario.horizon, seed,
            scenario.block_length, scenario.speed_limit,
        )
        return frames, build_grid_network(scenario.rows, scenario.cols, scenario.block_length, scenario.speed_limit)
    trace_path = cfg.resolve(scenario.trace_path)
    frames = read_traces(trace_path)
    network = load_network(cfg.resolve(scenario.network_path)) if scenario.network_path else None
    if network is not None:
        validate_traces(frames, network, trace_path)
    return frames, network


def report_shortages(cfg: ExperimentConfig, frames: Sequence[TraceFrame], network: Optional[LaneNetwork]) -> dict:
    threshold = cfg.scenario.density_threshold
    if threshold is None or network is None:
        return {}
    report = shortage_report(frames, network, threshold)
    if report:
        first = min(report)
        logger.info(
            f"🔍 Resource shortage in {len(report)} of {len(frames)} slots (first at t={first}: blocks {report[first]}); "
            f"UAV deployment warranted"
        )
    else:
        logger.info(f"🔍 No block exceeds {threshold:g} vehicles/m")
    return report


def deploy_uavs(cfg: ExperimentConfig, frames: Sequence[TraceFrame], seed: int) -> Tuple[Cell, ...]:
    """Place the UAVs with Q-learning on the slot-0 snapshot held still for a whole trace."""
    snapshot = [frames[0]] * len(frames)
    env = MecEnvironment(snapshot, mec_setup(cfg), cfg.num_uavs, seed=seed)
    logger.info(f"🎯 Deploying {cfg.num_uavs} UAV(s) over {cfg.mec.deployment_episodes} episodes")
    return deploy(env, cfg.hyperparameters.tabular(), cfg.mec.deployment_episodes, seed, multi=cfg.num_uavs > 1)


def build_environment(cfg: ExperimentConfig, seed: int):
    if cfg.environment == EnvironmentKind.MONITOR:
        return MonitorEnvironment(cfg.monitor, cfg.num_uavs, seed=seed, base_dir=cfg.base_dir)
    frames, network = load_scenario(cfg, seed)
    report_shortages(cfg, frames, network)
    setup = mec_setup(cfg)
    if cfg.mec.deployment_episodes is not None:
        cells = deploy_uavs(cfg, frames, seed)
        setup = replace(setup, mec=cfg.mec.model_copy(update={"initial_cells": list(cells)}))
    return MecEnvironment(frames, setup, cfg.num_uavs, seed=seed)


def offloading_count(state: WorldState, frame: TraceFrame, setup: MecSetup) -> int:
    """UAVs serving at least one vehicle under the nearest-covering-UAV assignment."""
    return evaluate_frame(state.uav_cells, frame, setup).offloading_count


# ============ Policies ============

def run_random(env, episodes: int, seed: int) -> List[EpisodeStats]:
    rng = make_rng(seed)
    history = []
    for _ in range(episodes):
        started = time.perf_counter()
        env.reset()
        stats = EpisodeStats()
        done = False
        while not done:
            _, reward, done = env.step(tuple(int(a) for a in rng.integers(NUM_ACTIONS, size=env.num_agents)))
            stats.reward += reward
            stats.steps += 1
        stats.mos_total, stats.mos_count, stats.offloading = env.episode_summary()
        stats.wallclock_ms = (time.perf_counter() - started) * 1000.0
        history.append(stats)
    return history


def _require_mec(cfg: ExperimentConfig) -> None:
    if cfg.environment != EnvironmentKind.MEC:
        raise ConfigError(f"Algorithm '{cfg.algorithm.value}' runs on the mec environment only")


def _train(cfg: ExperimentConfig, env, seed: int, out_dir: Optional[Path]) -> Tuple[List[EpisodeStats], List[Path]]:
    algo = cfg.algorithm
    hp = cfg.hyperparameters
    if algo == Algorithm.RANDOM:
        return run_random(env, cfg.episodes, seed), []
    if algo.is_tabular:
        _require_mec(cfg)
        agents = make_agents(env.num_agents, hp.tabular(), multi=algo == Algorithm.Q_MULTI)
        result = train_tabular(env, agents, cfg.episodes, seed, hp.tabular())
        paths = []
        if out_dir is not None:
            paths = [save_qtable(agent.table, out_dir / QTABLE_DIR / f"agent{agent.index}.csv") for agent in agents]
        return result.episodes, paths
    network = hp.network_for(algo)
    result = train_magcdrl(env, hp.a2c(), network, cfg.episodes, seed, cfg.monitor.observation_scope)
    paths = [save_checkpoint(result.params, out_dir / POLICY_FILE)] if out_dir is not None else []
    return result.episodes, paths


def metrics_rows(algo: Algorithm, seed: int, history: Sequence[EpisodeStats], num_uavs: int) -> List[MetricsRow]:
    rows = []
    for episode, stats in enumerate(history):
        row = MetricsRow(
            episode=episode,
            algo=algo,
            seed=seed,
            total_reward=stats.reward,
            mos_total=stats.mos_total,
            mean_mos=stats.mean_mos,
            offloading_uav_count=stats.offloading,
            wallclock_ms=stats.wallclock_ms if settings.RECORD_WALLCLOCK else 0.0,
        )
        check_row(row, num_uavs, stats.mos_count)
        rows.append(row)
    return rows


def check_row(row: MetricsRow, num_uavs: int, scored_entries: int) -> None:
    if row.offloading_uav_count > num_uavs:
        raise SimulationError(
            f"Episode {row.episode}: {row.offloading_uav_count} offloading UAVs exceeds N={num_uavs}",
            error_code="metrics_invariant",
        )
    if row.mos_total < scored_entries - 1e-9:
        raise SimulationError(
            f"Episode {row.episode}: MOS total {row.mos_total} below the scale floor",
            error_code="metrics_invariant",
        )


# ============ Entry points ============

def output_directory(cfg: ExperimentConfig, out_dir: Optional[Union[str, Path]]) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    return cfg.resolve(cfg.output_dir) if cfg.output_dir else Path(settings.OUTPUT_DIR)


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None, write: bool = True) -> RunOutcome:
    """Train the configured algorithm and write metrics.csv plus the final checkpoint."""
    target = output_directory(cfg, out_dir) if write else None
    logger.info(
        f"🎯 Running {cfg.algorithm.value} on {cfg.environment.value}: "
        f"N={cfg.num_uavs}, episodes={cfg.episodes}, seed={cfg.seed}"
    )
    env = build_environment(cfg, cfg.seed)
    if target is not None:
        target.mkdir(parents=True, exist_ok=True)
    history, checkpoints = _train(cfg, env, cfg.seed, target)
    rows = metrics_rows(cfg.algorithm, cfg.seed, history, cfg.num_uavs)
    outcome = RunOutcome(rows=rows, checkpoints=checkpoints)
    if target is not None:
        outcome.metrics_path = write_metrics(rows, target / METRICS_FILE)
    logger.info(f"✅ {cfg.algorithm.value} finished: mean reward {np.mean([r.total_reward for r in rows]):.4f}")
    return outcome


def evaluate(cfg: ExperimentConfig, checkpoint: Union[str, Path], out_dir: Optional[Union[str, Path]] = None) -> RunOutcome:
    """Greedy episodes of a stored policy: a q-table directory or a parameter checkpoint."""
    checkpoint = Path(checkpoint)
    env = build_environment(cfg, cfg.seed)
    hp = cfg.hyperparameters
    algo = cfg.algorithm
    if algo == Algorithm.RANDOM:
        history = run_random(env, cfg.evaluation_episodes, cfg.seed)
    elif algo.is_tabular:
        _require_mec(cfg)
        directory = checkpoint if checkpoint.is_dir() else checkpoint.parent
        agents = make_agents(env.num_agents, hp.tabular(), multi=algo == Algorithm.Q_MULTI)
        for agent in agents:
            agent.table = load_qtable(directory / f"agent{agent.index}.csv", hp.learning_rate, hp.discount)
        history = evaluate_greedy(env, agents, cfg.evaluation_episodes, cfg.seed, hp.tabular()).episodes
    else:
        network = hp.network_for(algo)
        params = load_checkpoint(checkpoint, ParameterSet(network, env.num_agents, env.grid_shape))
        history = evaluate_policy(env, params, network, cfg.evaluation_episodes, cfg.seed, cfg.monitor.observation_scope)

    rows = metrics_rows(algo, cfg.seed, history, cfg.num_uavs)
    outcome = RunOutcome(rows=rows)
    if out_dir is not None:
        outcome.metrics_path = write_metrics(rows, Path(out_dir) / METRICS_FILE)
    logger.info(f"✅ Evaluated {checkpoint} over {len(rows)} episodes")
    return outcome


# ============ Metrics CSV ============

def metrics_frame(rows: Sequence[MetricsRow]) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump(mode="json") for row in rows], columns=METRICS_COLUMNS)


def write_frame(df: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\n", float_format=settings.METRICS_FLOAT_FORMAT, encoding="utf-8")
    return path


def write_metrics(rows: Sequence[MetricsRow], path: Union[str, Path]) -> Path:
    path = write_frame(metrics_frame(rows), path)
    logger.info(f"✅ Wrote {len(rows)} metrics rows to {path}")
    return path


def read_metrics(path: Union[str, Path]) -> List[MetricsRow]:
    path = Path(path)
    try:
        df = pd.read_csv(path, float_precision="round_trip", dtype={"algo": str}, encoding="utf-8")
    except FileNotFoundError:
        raise TraceFormatError("Metrics file not found", config_path=str(path))
    missing = [c for c in METRICS_COLUMNS if c not in df.columns]
    if missing:
        raise TraceFormatError(f"Metrics file lacks columns {missing}", config_path=str(path))
    try:
        return [MetricsRow.model_validate(record) for record in df[METRICS_COLUMNS].to_dict(orient="records")]
    except ValidationError as e:
        raise TraceFormatError(f"Invalid metrics row: {str(e)}", config_path=str(path))
