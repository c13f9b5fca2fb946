"""
Advantage actor-critic training with a shared reward.

Returns are Monte-Carlo over each episode segment (bootstrapped from the
critic when a segment stops before `done`). Advantages are held constant
while differentiating, so the actor gradient is the policy-gradient estimate
and the critic gradient comes from the squared return error alone.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from uavmec.config import settings
from uavmec.core.exceptions import ConfigError, InvalidArgumentError, TrainingError
from uavmec.core.seeding import make_rng
from uavmec.models.world import EpisodeStats, Experience
from uavmec.schemas.learning import A2CConfig, NetworkConfig
from uavmec.services import autodiff as ad
from uavmec.services.network import ParameterSet, forward, policy_step, stack_observations
from uavmec.services.observation import observe_all
from uavmec.services.returns import returns_to_go
from uavmec.utils.enums import ObservationScope

logger = logging.getLogger(__name__)

LOSS_TERMS = ("policy", "entropy", "critic")


@dataclass
class TrainingBatch:
    local: np.ndarray      # (T, N, C, w, w)
    coarse: np.ndarray     # (T, N, C, h, w)
    actions: np.ndarray    # (T, N) int
    returns: np.ndarray    # (T, N)

    @property
    def steps(self) -> int:
        return self.actions.shape[0]


@dataclass
class LossReport:
    loss: float
    policy_loss: float
    entropy: float
    critic_loss: float
    grad_norm: float = 0.0


def build_batch(
    experiences: Sequence[Experience], discount: float, params: ParameterSet, reward_scale: float = 1.0,
) -> TrainingBatch:
    """Stack cached observations and compute returns per contiguous segment, rewards times reward_scale."""
    if not experiences:
        raise InvalidArgumentError("Cannot train on an empty batch")
    if any(e.observations is None for e in experiences):
        raise InvalidArgumentError("Every experience needs cached observations")
    local, coarse = stack_observations([e.observations for e in experiences])
    steps, agents = local.shape[:2]
    actions = np.array([e.actions for e in experiences], dtype=int).reshape(steps, agents)
    rewards = reward_scale * np.array([e.reward for e in experiences], dtype=float)
    returns = np.empty((steps, agents))

    start = 0
    for end in range(steps):
        segment_over = experiences[end].done or end == steps - 1
        if not segment_over:
            continue
        bootstrap = np.zeros(agents)
        if not experiences[end].done:
            if experiences[end].next_observations is None:
                raise InvalidArgumentError("A segment ending before done needs next observations to bootstrap")
            next_local, next_coarse = stack_observations([experiences[end].next_observations])
            bootstrap = forward(params, next_local, next_coarse).values.value[0]
        for n in range(agents):
            returns[start:end + 1, n] = returns_to_go(rewards[start:end + 1], discount, bootstrap[n])
        start = end + 1
    return TrainingBatch(local=local, coarse=coarse, actions=actions, returns=returns)


def a2c_loss(
    params: ParameterSet,
    batch: TrainingBatch,
    entropy_coef: float,
    advantages: Optional[np.ndarray] = None,
    terms: Sequence[str] = LOSS_TERMS,
) -> Tuple[LossReport, np.ndarray]:
    """Loss and its gradient over the flat parameter vector.

    loss = -mean(adv * log pi(a)) - entropy_coef * mean(H(pi)) + mean((R - V)^2).
    `advantages` defaults to R - V with V taken from this forward pass.
    """
    unknown = set(terms) - set(LOSS_TERMS)
    if unknown:
        raise InvalidArgumentError(f"Unknown loss terms: {sorted(unknown)}")
    if not terms:
        raise InvalidArgumentError("At least one loss term is required")
    trace = forward(params, batch.local, batch.coarse)
    steps, agents = batch.actions.shape
    if advantages is None:
        advantages = batch.returns - trace.values.value
    advantages = np.asarray(advantages, dtype=float).reshape(steps, agents)

    log_probs = trace.log_probs
    picked = ad.gather(log_probs, np.arange(steps * agents) * log_probs.shape[-1] + batch.actions.reshape(-1))
    policy_loss = ad.neg(ad.mean(ad.mul(ad.constant(advantages.reshape(-1)), picked)))
    entropy = ad.mean(ad.neg(ad.sum_(ad.mul(ad.exp(log_probs), log_probs), axis=-1)))
    critic_loss = ad.mean(ad.mul(ad.sub(batch.returns, trace.values), ad.sub(batch.returns, trace.values)))

    parts = []
    if "policy" in terms:
        parts.append(policy_loss)
    if "entropy" in terms:
        parts.append(ad.mul(entropy, -entropy_coef))
    if "critic" in terms:
        parts.append(critic_loss)
    loss = parts[0]
    for part in parts[1:]:
        loss = ad.add(loss, part)

    if not np.isfinite(loss.value):
        raise TrainingError(
            "Non-finite actor-critic loss",
            details={
                "policy_loss": float(policy_loss.value),
                "entropy": float(entropy.value),
                "critic_loss": float(critic_loss.value),
                "max_abs_param": float(np.max(np.abs(params.values))) if params.size else 0.0,
            },
        )
    ad.backward(loss)
    grad = params.flat_grad(trace.tensors)
    report = LossReport(
        loss=float(loss.value),
        policy_loss=float(policy_loss.value),
        entropy=float(entropy.value),
        critic_loss=float(critic_loss.value),
        grad_norm=float(np.linalg.norm(grad)),
    )
    return report, grad


class MomentumSGD:
    """SGD with momentum; critic-head segments step with lr_critic, the rest with lr_actor"""

    def __init__(
        self,
        params: ParameterSet,
        lr_actor: float,
        lr_critic: float,
        momentum: float = 0.9,
        max_grad_norm: Optional[float] = None,
    ):
        self.lr = np.where(params.segment_mask("critic."), lr_critic, lr_actor)
        self.momentum = momentum
        self.max_grad_norm = max_grad_norm
        self.velocity = np.zeros(params.size)

    def step(self, params: ParameterSet, grad: np.ndarray) -> ParameterSet:
        norm = float(np.linalg.norm(grad))
        if self.max_grad_norm is not None and norm > self.max_grad_norm:
            grad = grad * (self.max_grad_norm / norm)
        self.velocity = self.momentum * self.velocity + grad
        return params.with_values(params.values - self.lr * self.velocity)


def a2c_update(
    params: ParameterSet,
    batch: Sequence[Experience],
    discount: float,
    lr_actor: float,
    lr_critic: float,
    entropy_coef: float,
    optimizer: Optional[MomentumSGD] = None,
    momentum: float = 0.9,
    reward_scale: float = 1.0,
) -> Tuple[ParameterSet, LossReport]:
    """One synchronous gradient step on a batch of complete episode segments."""
    training_batch = build_batch(batch, discount, params, reward_scale)
    report, grad = a2c_loss(params, training_batch, entropy_coef)
    if optimizer is None:
        optimizer = MomentumSGD(params, lr_actor, lr_critic, momentum)
    updated = optimizer.step(params, grad)
    if not np.all(np.isfinite(updated.values)):
        raise TrainingError("Parameters became non-finite after an update", details={"grad_norm": report.grad_norm})
    return updated, report


# ============ Training loop ============

@dataclass
class A2CResult:
    params: ParameterSet
    episodes: List[EpisodeStats] = field(default_factory=list)
    losses: List[LossReport] = field(default_factory=list)
    updates: int = 0

    @property
    def rewards(self) -> List[float]:
        return [stats.reward for stats in self.episodes]


def _play(env, params, network: NetworkConfig, scope, rng, greedy: bool) -> Tuple[List[Experience], EpisodeStats]:
    started = time.perf_counter()
    state = env.reset()
    views = observe_all(state, network.window, network.coarse_factor, scope)
    experiences: List[Experience] = []
    stats = EpisodeStats()
    done = False
    while not done:
        actions = policy_step(params, views, rng, greedy=greedy)
        next_state, reward, done = env.step(actions)
        next_views = observe_all(next_state, network.window, network.coarse_factor, scope)
        experiences.append(Experience(state, actions, reward, next_state, done, views, next_views))
        stats.reward += reward
        stats.steps += 1
        state, views = next_state, next_views
    stats.mos_total, stats.mos_count, stats.offloading = env.episode_summary()
    stats.wallclock_ms = (time.perf_counter() - started) * 1000.0
    return experiences, stats


def train_magcdrl(
    env,
    cfg: A2CConfig,
    network: NetworkConfig,
    episodes: int,
    seed: int,
    scope: ObservationScope = ObservationScope.GLOBAL,
    params: Optional[ParameterSet] = None,
) -> A2CResult:
    """On-policy actor-critic; updates start once the warmup gate has seen enough experiences."""
    if episodes < 1:
        raise ConfigError(f"episodes must be at least 1, got {episodes}")
    rng = make_rng(seed)
    if params is None:
        params = ParameterSet.initialise(network, env.num_agents, env.grid_shape, rng)
    elif not params.cfg.tie_weights and params.num_agents != env.num_agents:
        raise ConfigError(f"Parameters hold {params.num_agents} agents, environment has {env.num_agents}")
    warmup = cfg.warmup_experiences if cfg.warmup_experiences is not None else settings.WARMUP_EXPERIENCES
    reward_scale = cfg.reward_scale if cfg.reward_scale is not None else 1.0 / env.reward_bound
    optimizer = MomentumSGD(params, cfg.lr_actor, cfg.lr_critic, cfg.momentum, cfg.max_grad_norm)
    result = A2CResult(params=params)
    collected = 0

    mode = "shared weights + attention" if network.tie_weights and network.use_attention else "independent"
    logger.info(f"🎯 Actor-critic training ({mode}): {env.num_agents} agents, {episodes} episodes, warmup {warmup}")
    for episode in range(episodes):
        experiences, stats = _play(env, result.params, network, scope, rng, greedy=False)
        collected += len(experiences)
        if collected >= warmup:
            result.params, report = a2c_update(
                result.params, experiences, cfg.discount, cfg.lr_actor, cfg.lr_critic, cfg.entropy_coef, optimizer,
                reward_scale=reward_scale,
            )
            result.losses.append(report)
            result.updates += 1
        result.episodes.append(stats)
        logger.debug(f"Episode {episode}: reward {stats.reward:.3f}, experiences {collected}")
    logger.info(f"✅ Actor-critic training done: {result.updates} updates over {collected} experiences")
    return result


def evaluate_policy(env, params: ParameterSet, network: NetworkConfig, episodes: int, seed: int,
                    scope: ObservationScope = ObservationScope.GLOBAL) -> List[EpisodeStats]:
    """Greedy rollouts with frozen parameters."""
    rng = make_rng(seed)
    return [_play(env, params, network, scope, rng, greedy=True)[1] for _ in range(episodes)]
