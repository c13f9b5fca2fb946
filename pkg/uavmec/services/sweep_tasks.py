"""
Celery tasks for parameter sweeps.
One task per (value, repetition) entry; the caller collects results in
submission order so the merged CSV does not depend on worker scheduling.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd

from uavmec.celery_app import celery_app
from uavmec.core.exceptions import ConfigError
from uavmec.core.seeding import derive_seed
from uavmec.schemas.experiment import METRICS_COLUMNS, ExperimentConfig
from uavmec.services.harness import output_directory, run_experiment, write_frame

logger = logging.getLogger(__name__)

SWEEP_FILE = "sweep.csv"
SWEEP_COLUMNS = ["sweep_value", "repetition"] + METRICS_COLUMNS


def _lookup(raw: dict, path: str) -> Any:
    node: Any = raw
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"Sweep field '{path}' does not exist in the config")
        node = node[key]
    return node


def _assign(raw: dict, path: str, value: float) -> dict:
    keys = path.split(".")
    node = raw
    for key in keys[:-1]:
        node = node[key]
    current = node[keys[-1]]
    node[keys[-1]] = int(value) if isinstance(current, int) and float(value).is_integer() else value
    return raw


def check_sweep_field(cfg: ExperimentConfig, vary: str) -> None:
    current = _lookup(cfg.model_dump(mode="json"), vary)
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise ConfigError(f"Sweep field '{vary}' is not numeric (found {type(current).__name__})")


def entry_config(cfg: ExperimentConfig, vary: str, value: float, repetition: int) -> ExperimentConfig:
    """The config of one sweep entry: `vary` set to `value`, seed derived from the entry's identity."""
    raw = _assign(cfg.model_dump(mode="json"), vary, value)
    raw["seed"] = derive_seed(cfg.seed, cfg.algorithm.value, value, repetition)
    try:
        entry = ExperimentConfig.model_validate(raw)
    except ValueError as e:
        raise ConfigError(f"Sweep value {value} for '{vary}' is invalid: {str(e)}")
    return entry.with_base_dir(cfg.base_dir)


@celery_app.task(bind=True, name='uavmec.services.sweep_tasks.run_sweep_entry')
def run_sweep_entry(self, raw_config: dict, base_dir: str, out_dir: str) -> List[Dict[str, Any]]:
    """
    Run one sweep entry and return its metrics rows as JSON-ready dicts.
    """
    cfg = ExperimentConfig.model_validate(raw_config).with_base_dir(base_dir)
    logger.info(f"🎯 Sweep entry {self.request.id}: {cfg.algorithm.value}, seed {cfg.seed}")
    outcome = run_experiment(cfg, out_dir=out_dir)
    return [row.model_dump(mode="json") for row in outcome.rows]


def sweep(
    cfg: ExperimentConfig,
    vary: str,
    values: Sequence[float],
    repetitions: int = 1,
    out_dir: Optional[Union[str, Path]] = None,
) -> pd.DataFrame:
    """Run `cfg` once per value and repetition and merge the metrics into sweep.csv."""
    if repetitions < 1:
        raise ConfigError(f"repetitions must be at least 1, got {repetitions}")
    check_sweep_field(cfg, vary)
    target = output_directory(cfg, out_dir)

    pending = []
    for value in values:
        for rep in range(repetitions):
            entry = entry_config(cfg, vary, value, rep)
            entry_dir = target / f"{vary}={value:g}" / f"rep{rep}"
            result = run_sweep_entry.delay(entry.model_dump(mode="json"), str(cfg.base_dir), str(entry_dir))
            pending.append((value, rep, result))
    logger.info(f"🎯 Sweep over {vary}: {len(pending)} entries dispatched")

    frames = []
    for value, rep, result in pending:
        rows = result.get()
        df = pd.DataFrame(rows, columns=METRICS_COLUMNS)
        df.insert(0, "repetition", rep)
        df.insert(0, "sweep_value", value)
        frames.append(df)
    merged = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=SWEEP_COLUMNS)
    path = write_frame(merged[SWEEP_COLUMNS], target / SWEEP_FILE)
    logger.info(f"✅ Sweep finished: {len(merged)} rows written to {path}")
    return merged
