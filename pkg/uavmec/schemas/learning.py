from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


# ============ Learner Schemas ============

class EpsilonSchedule(BaseModel):
    """Linear epsilon-greedy decay from start to end over the first decay_fraction of episodes"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    start: float = Field(1.0, ge=0, le=1)
    end: float = Field(0.05, ge=0, le=1)
    decay_fraction: float = Field(0.6, gt=0, le=1)

    def value(self, episode: int, episodes: int) -> float:
        decay_episodes = max(1, round(self.decay_fraction * episodes))
        progress = min(1.0, episode / decay_episodes)
        return self.start + (self.end - self.start) * progress


class TabularConfig(BaseModel):
    """Q-learning settings shared by the single- and multi-UAV learners"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: float = Field(0.01, gt=0, le=1)
    discount: float = Field(0.9, ge=0, lt=1)
    epsilon: EpsilonSchedule = EpsilonSchedule()
    qoe_threshold: float = Field(0.1, gt=0, description="Relative MOS gain that marks an episode successful")
    early_stop: bool = True  # End an episode as soon as the QoE threshold is reached


class NetworkConfig(BaseModel):
    """Layer sizes of the actor-critic network"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    window: int = Field(5, ge=1, description="Side of the egocentric crop (cells, odd)")
    channels: int = Field(3, ge=1)
    conv_filters: Tuple[int, int] = (8, 16)
    kernel: int = Field(3, ge=1)
    feature_dim: int = Field(32, ge=1)
    attention_dim: int = Field(32, ge=1)
    leaky_slope: float = Field(0.2, ge=0, lt=1)
    coarse_factor: int = Field(2, ge=1)
    tie_weights: bool = True
    use_attention: bool = True
    init_scale: float = Field(0.5, gt=0, description="Weights start uniform in +-init_scale/sqrt(fan_in)")

    @model_validator(mode="after")
    def _check_shapes(self) -> "NetworkConfig":
        if self.window % 2 == 0:
            raise ValueError("window must be odd")
        if self.window - 2 * (self.kernel - 1) < 1:
            raise ValueError("window is too small for two valid convolutions")
        if min(self.conv_filters) < 1:
            raise ValueError("conv_filters must be positive")
        return self

    @property
    def conv_out(self) -> int:
        return self.window - 2 * (self.kernel - 1)


class A2CConfig(BaseModel):
    """Actor-critic optimisation settings"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    discount: float = Field(0.9, ge=0, lt=1)
    lr_actor: float = Field(0.01, ge=0)
    lr_critic: float = Field(0.01, ge=0)
    entropy_coef: float = Field(0.01, ge=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    warmup_experiences: Optional[int] = Field(None, ge=0, description="Defaults to settings.WARMUP_EXPERIENCES")
    reward_scale: Optional[float] = Field(None, gt=0, description="Multiplies rewards before returns; defaults to 1 / the environment reward bound")
    max_grad_norm: Optional[float] = Field(10.0, gt=0, description="Gradient norm clip, None disables")
