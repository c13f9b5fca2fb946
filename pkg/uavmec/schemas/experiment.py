import json
from pathlib import Path
from typing import Optional, Union

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from uavmec.core.exceptions import ConfigError
from uavmec.schemas.environment import Lattice, MecConfig, MonitorConfig
from uavmec.schemas.learning import A2CConfig, EpsilonSchedule, NetworkConfig, TabularConfig
from uavmec.schemas.qoe import MosRateMap, MosWeights
from uavmec.schemas.radio import RadioConfig
from uavmec.services.traffic import DEFAULT_BLOCK_LENGTH, DEFAULT_SPEED_LIMIT
from uavmec.utils.enums import Algorithm, EnvironmentKind, ScenarioType

METRICS_COLUMNS = [
    "episode", "algo", "seed", "total_reward", "mos_total", "mean_mos", "offloading_uav_count", "wallclock_ms",
]


# ============ Experiment Schemas ============

class ScenarioConfig(BaseModel):
    """Where vehicle traces come from"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    type: ScenarioType = ScenarioType.GRID
    rows: int = Field(10, ge=2, description="Grid intersections per column")
    cols: int = Field(10, ge=2, description="Grid intersections per row")
    block_length: float = Field(DEFAULT_BLOCK_LENGTH, gt=0)
    speed_limit: float = Field(DEFAULT_SPEED_LIMIT, gt=0, description="m/s")
    horizon: int = Field(50, ge=1, description="Slots generated per grid trace")
    trace_path: Optional[str] = None
    network_path: Optional[str] = None
    density_threshold: Optional[float] = Field(None, gt=0, description="vehicles/m; enables the shortage report")

    @model_validator(mode="after")
    def _check_trace(self) -> "ScenarioConfig":
        if self.type == ScenarioType.TRACE and not self.trace_path:
            raise ValueError("scenario type 'trace' requires trace_path")
        return self


class HyperParameters(BaseModel):
    """Learner settings; defaults follow lr = 0.01, discount = 0.9, QoE threshold = 0.1"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: float = Field(0.01, gt=0, le=1)
    discount: float = Field(0.9, ge=0, lt=1)
    qoe_threshold: float = Field(0.1, gt=0)
    epsilon: EpsilonSchedule = EpsilonSchedule()
    early_stop: bool = True
    lr_critic: Optional[float] = Field(None, ge=0, description="Defaults to learning_rate")
    entropy_coef: float = Field(0.01, ge=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    warmup_experiences: Optional[int] = Field(None, ge=0)
    reward_scale: Optional[float] = Field(None, gt=0)
    max_grad_norm: Optional[float] = Field(10.0, gt=0)
    network: NetworkConfig = NetworkConfig()

    def tabular(self) -> TabularConfig:
        return TabularConfig(
            learning_rate=self.learning_rate,
            discount=self.discount,
            epsilon=self.epsilon,
            qoe_threshold=self.qoe_threshold,
            early_stop=self.early_stop,
        )

    def a2c(self) -> A2CConfig:
        return A2CConfig(
            discount=self.discount,
            lr_actor=self.learning_rate,
            lr_critic=self.learning_rate if self.lr_critic is None else self.lr_critic,
            entropy_coef=self.entropy_coef,
            momentum=self.momentum,
            warmup_experiences=self.warmup_experiences,
            reward_scale=self.reward_scale,
            max_grad_norm=self.max_grad_norm,
        )

    def network_for(self, algorithm: Algorithm) -> NetworkConfig:
        """`ac` runs untied weights without attention, `magcdrl` shared weights with attention."""
        if algorithm == Algorithm.AC:
            return self.network.model_copy(update={"tie_weights": False, "use_attention": False})
        return self.network.model_copy(update={"tie_weights": True, "use_attention": True})


class ExperimentConfig(BaseModel):
    """One experiment; omitted fields resolve to the simulation defaults (N = 5, M = 100, 5000 episodes)"""
    model_config = ConfigDict(
        frozen=True,
        extra="forbid",
        json_schema_extra={
            "example": {
                "environment": "mec",
                "scenario": {"type": "grid", "rows": 10, "cols": 10, "horizon": 50},
                "algorithm": "magcdrl",
                "episodes": 200,
                "seed": 7,
            }
        },
    )

    environment: EnvironmentKind = EnvironmentKind.MEC
    scenario: ScenarioConfig = ScenarioConfig()
    lattice: Lattice = Lattice()
    num_uavs: int = Field(5, ge=1)
    num_vehicles: int = Field(100, ge=1)
    radio: RadioConfig = RadioConfig()
    rate_map: MosRateMap = MosRateMap()
    weights: MosWeights = MosWeights()
    mec: MecConfig = MecConfig()
    monitor: MonitorConfig = MonitorConfig()
    algorithm: Algorithm
    hyperparameters: HyperParameters = HyperParameters()
    episodes: int = Field(5000, ge=1)
    evaluation_episodes: int = Field(10, ge=1)
    seed: int = Field(0, ge=0)
    output_dir: Optional[str] = None

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @property
    def base_dir(self) -> Path:
        return self._base_dir

    def with_base_dir(self, base_dir: Union[str, Path]) -> "ExperimentConfig":
        cfg = self.model_copy()
        cfg._base_dir = Path(base_dir)
        return cfg

    def resolve(self, path: Union[str, Path]) -> Path:
        """Paths in a config file are relative to the file's directory."""
        path = Path(path)
        return path if path.is_absolute() else self._base_dir / path


class MetricsRow(BaseModel):
    """One episode of one run"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    episode: int = Field(ge=0)
    algo: Algorithm
    seed: int = Field(ge=0)
    total_reward: float
    mos_total: float = Field(ge=0)
    mean_mos: float = Field(ge=0, le=5)
    offloading_uav_count: int = Field(ge=0)
    wallclock_ms: float = Field(0.0, ge=0)


# ============ Loading ============

def load_experiment_config(path: Union[str, Path], overrides: Optional[dict] = None) -> ExperimentConfig:
    """Parse and validate a JSON config; top-level `overrides` replace file values, errors carry the file path."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("Config file not found", config_path=str(path))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"Config is not valid JSON: {str(e)}", config_path=str(path))
    if not isinstance(raw, dict):
        raise ConfigError("Config must be a JSON object", config_path=str(path))
    raw.update({key: value for key, value in (overrides or {}).items() if value is not None})
    return parse_experiment_config(raw, base_dir=path.parent, source=str(path))


def parse_experiment_config(raw: dict, base_dir: Union[str, Path] = ".", source: Optional[str] = None) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment config: {str(e)}", config_path=source)
    cfg = cfg.with_base_dir(Path(base_dir))
    check_referenced_files(cfg, source)
    return cfg


def check_referenced_files(cfg: ExperimentConfig, source: Optional[str] = None) -> None:
    referenced = []
    if cfg.environment == EnvironmentKind.MEC and cfg.scenario.type == ScenarioType.TRACE:
        referenced.append(cfg.scenario.trace_path)
    if cfg.scenario.network_path:
        referenced.append(cfg.scenario.network_path)
    if cfg.environment == EnvironmentKind.MONITOR and cfg.monitor.map_path:
        referenced.append(cfg.monitor.map_path)
    for item in referenced:
        if not cfg.resolve(item).is_file():
            raise ConfigError(f"Referenced file does not exist: {item}", config_path=source)
