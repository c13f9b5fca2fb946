import numpy as np
import pytest

from uavmec.core.exceptions import InvalidArgumentError, TrainingError
from uavmec.models.world import Experience
from uavmec.schemas.environment import MonitorConfig
from uavmec.schemas.learning import A2CConfig, NetworkConfig
from uavmec.services.a2c import MomentumSGD, TrainingBatch, a2c_loss, a2c_update, build_batch, evaluate_policy, train_magcdrl
from uavmec.services.actions import NUM_ACTIONS
from uavmec.services.harness import run_random
from uavmec.services.monitor_env import MonitorEnvironment
from uavmec.services.network import ParameterSet, forward, neighbour_mask, policy_step, stack_observations
from uavmec.services.observation import coarse_shape, observe_all
from uavmec.services.returns import returns_to_go


@pytest.fixture
def monitor_env():
    return MonitorEnvironment(MonitorConfig(rows=4, cols=4, horizon=5, coverage_radius=1.0), num_agents=3, seed=0)


def collect(env, params, cfg, rng, episodes=1):
    experiences = []
    for _ in range(episodes):
        state = env.reset()
        views = observe_all(state, cfg.window, cfg.coarse_factor)
        done = False
        while not done:
            actions = policy_step(params, views, rng)
            next_state, reward, done = env.step(actions)
            next_views = observe_all(next_state, cfg.window, cfg.coarse_factor)
            experiences.append(Experience(state, actions, reward, next_state, done, views, next_views))
            state, views = next_state, next_views
    return experiences


# ============ Batches ============

def test_build_batch_returns_per_episode(monitor_env, tiny_network, rng):
    params = ParameterSet.initialise(tiny_network, 3, monitor_env.grid_shape, rng)
    experiences = collect(monitor_env, params, tiny_network, rng, episodes=2)
    scale = 1.0 / monitor_env.reward_bound
    batch = build_batch(experiences, 0.9, params, reward_scale=scale)
    assert batch.local.shape[:2] == (10, 3)
    first = returns_to_go([scale * e.reward for e in experiences[:5]], 0.9)
    assert np.allclose(batch.returns[:5, 0], first)
    assert np.allclose(batch.returns[:5, 2], first)


def test_truncated_segment_bootstraps_from_critic(monitor_env, tiny_network, rng):
    params = ParameterSet.initialise(tiny_network, 3, monitor_env.grid_shape, rng)
    experiences = collect(monitor_env, params, tiny_network, rng)[:3]
    batch = build_batch(experiences, 0.5, params)
    local, coarse = stack_observations([experiences[-1].next_observations])
    bootstrap = forward(params, local, coarse).values.value[0]
    rewards = [e.reward for e in experiences]
    for n in range(3):
        assert np.allclose(batch.returns[:, n], returns_to_go(rewards, 0.5, bootstrap[n]))


def test_empty_batch_is_rejected(tiny_network):
    params = ParameterSet(tiny_network, 1, (4, 4))
    with pytest.raises(InvalidArgumentError):
        build_batch([], 0.9, params)


# ============ Loss and gradients ============

def test_gradient_matches_finite_differences(monitor_env, rng):
    cfg = NetworkConfig(window=5, conv_filters=(2, 3), feature_dim=4, attention_dim=3, init_scale=1.0)
    h = 1e-3
    checked = 0
    while checked < 20:
        params = ParameterSet.initialise(cfg, 3, monitor_env.grid_shape, rng)
        batch = build_batch(collect(monitor_env, params, cfg, rng), 0.9, params, 1.0 / monitor_env.reward_bound)
        trace = forward(params, batch.local, batch.coarse)
        if np.abs(trace.scores).min() < 1e-2:
            continue  # too close to the leaky-relu kink for a central difference
        advantages = batch.returns - trace.values.value
        _, grad = a2c_loss(params, batch, 0.05, advantages=advantages)

        def loss_at(values):
            return a2c_loss(params.with_values(values), batch, 0.05, advantages=advantages)[0].loss

        norm = np.linalg.norm(grad)
        directions = [grad / norm] + [d / np.linalg.norm(d) for d in rng.normal(size=(2, params.size))]
        for d in directions:
            fd = (loss_at(params.values + h * d) - loss_at(params.values - h * d)) / (2 * h)
            assert abs(fd - grad @ d) <= 1e-4 * norm
        checked += 1


def test_gradient_matches_finite_differences_per_coordinate(monitor_env, rng):
    """Every coordinate of the backprop gradient against a Richardson-extrapolated central difference."""
    cfg = NetworkConfig(window=5, conv_filters=(2, 3), feature_dim=4, attention_dim=3, init_scale=1.0)
    mask = neighbour_mask(3)
    h = 1e-3
    for _ in range(200):
        params = ParameterSet.initialise(cfg, 3, monitor_env.grid_shape, rng)
        batch = build_batch(collect(monitor_env, params, cfg, rng), 0.9, params, 1.0 / monitor_env.reward_bound)
        trace = forward(params, batch.local, batch.coarse)
        if np.abs(trace.scores[:, mask]).min() >= 5e-2:
            break
    else:
        pytest.fail("no draw kept every attention score clear of the leaky-relu kink")
    advantages = batch.returns - trace.values.value
    _, grad = a2c_loss(params, batch, 0.05, advantages=advantages)

    def central(i, step):
        up, down = params.values.copy(), params.values.copy()
        up[i] += step
        down[i] -= step
        loss_up = a2c_loss(params.with_values(up), batch, 0.05, advantages=advantages)[0].loss
        loss_down = a2c_loss(params.with_values(down), batch, 0.05, advantages=advantages)[0].loss
        return (loss_up - loss_down) / (2 * step)

    significant = 0
    for i in range(params.size):
        fd = (4 * central(i, h / 2) - central(i, h)) / 3
        if abs(grad[i]) > 1e-6:
            assert abs(fd - grad[i]) <= 1e-4 * abs(grad[i]), f"coordinate {i}: {fd} vs {grad[i]}"
            significant += 1
        else:
            assert abs(fd) <= 1e-6 + 1e-8
    assert significant


def test_zero_advantage_leaves_only_entropy_gradient(monitor_env, tiny_network, rng):
    params = ParameterSet.initialise(tiny_network, 3, monitor_env.grid_shape, rng)
    batch = build_batch(collect(monitor_env, params, tiny_network, rng), 0.9, params)
    zeros = np.zeros_like(batch.returns)
    _, with_policy = a2c_loss(params, batch, 0.01, advantages=zeros, terms=("policy", "entropy"))
    _, entropy_only = a2c_loss(params, batch, 0.01, advantages=zeros, terms=("entropy",))
    assert np.allclose(with_policy, entropy_only, atol=1e-14)
    assert np.any(entropy_only != 0)


def test_large_entropy_bonus_keeps_a_bandit_policy_near_uniform(tiny_network, rng):
    """One-step bandit where only action 0 pays: the policy gradient alone concentrates on it,
    a heavy entropy bonus holds the policy close to uniform."""
    grid_shape = (4, 4)
    local = rng.uniform(size=(1, 1, 3, tiny_network.window, tiny_network.window))
    coarse = rng.uniform(size=(1, 1) + coarse_shape(grid_shape, tiny_network.coarse_factor))
    batch = TrainingBatch(local=local, coarse=coarse, actions=np.zeros((1, 1), dtype=int), returns=np.ones((1, 1)))
    start = ParameterSet.initialise(tiny_network, 1, grid_shape, rng)

    def train(entropy_coef):
        params = start.copy()
        optimizer = MomentumSGD(params, lr_actor=0.05, lr_critic=0.05, momentum=0.0)
        for _ in range(500):
            _, grad = a2c_loss(params, batch, entropy_coef, advantages=np.ones((1, 1)), terms=("policy", "entropy"))
            params = optimizer.step(params, grad)
        return forward(params, local, coarse).probabilities[0, 0]

    greedy = train(0.0)
    spread = train(20.0)
    entropy = -float(np.sum(spread * np.log(spread)))
    assert greedy[0] > 0.9
    assert entropy > 0.98 * np.log(NUM_ACTIONS)
    assert spread[0] < 0.2


def test_loss_terms_are_validated(monitor_env, tiny_network, rng):
    params = ParameterSet.initialise(tiny_network, 3, monitor_env.grid_shape, rng)
    batch = build_batch(collect(monitor_env, params, tiny_network, rng), 0.9, params)
    with pytest.raises(InvalidArgumentError):
        a2c_loss(params, batch, 0.01, terms=("policy", "value"))
    with pytest.raises(InvalidArgumentError):
        a2c_loss(params, batch, 0.01, terms=())


def test_non_finite_loss_raises_training_error(monitor_env, tiny_network, rng):
    params = ParameterSet.initialise(tiny_network, 3, monitor_env.grid_shape, rng)
    experiences = collect(monitor_env, params, tiny_network, rng)
    broken = params.copy()
    broken.view("critic.bias")[...] = np.nan
    batch = build_batch([e for e in experiences if e.done], 0.9, broken)
    with pytest.raises(TrainingError) as info:
        a2c_loss(broken, batch, 0.01)
    assert info.value.error_code == "training_error"


# ============ Updates ============

def test_zero_learning_rate_keeps_parameters(monitor_env, tiny_network, rng):
    params = ParameterSet.initialise(tiny_network, 3, monitor_env.grid_shape, rng)
    experiences = collect(monitor_env, params, tiny_network, rng)
    once, _ = a2c_update(params, experiences, 0.9, 0.0, 0.0, 0.01)
    twice, _ = a2c_update(once, experiences, 0.9, 0.0, 0.0, 0.01)
    assert np.array_equal(twice.values, params.values)


def test_critic_segments_use_critic_learning_rate(tiny_network):
    params = ParameterSet(tiny_network, 1, (4, 4))
    optimizer = MomentumSGD(params, lr_actor=0.0, lr_critic=1.0, momentum=0.0)
    updated = optimizer.step(params, np.ones(params.size))
    moved = updated.values != params.values
    assert np.array_equal(moved, params.segment_mask("critic."))


def test_gradient_norm_is_clipped(tiny_network):
    params = ParameterSet(tiny_network, 1, (4, 4))
    optimizer = MomentumSGD(params, 1.0, 1.0, momentum=0.0, max_grad_norm=1.0)
    grad = np.zeros(params.size)
    grad[0] = 10.0
    updated = optimizer.step(params, grad)
    assert np.linalg.norm(updated.values - params.values) == pytest.approx(1.0)


# ============ Training loop ============

def test_warmup_beyond_collected_experiences_skips_updates(monitor_env, tiny_network, rng):
    params = ParameterSet.initialise(tiny_network, 3, monitor_env.grid_shape, rng)
    result = train_magcdrl(monitor_env, A2CConfig(warmup_experiences=10**6), tiny_network, 4, seed=1, params=params)
    assert result.updates == 0
    assert np.array_equal(result.params.values, params.values)
    assert len(result.episodes) == 4


def test_training_is_deterministic(tiny_network):
    def run():
        env = MonitorEnvironment(MonitorConfig(rows=4, cols=4, horizon=4), num_agents=2, seed=3)
        return train_magcdrl(env, A2CConfig(warmup_experiences=0), tiny_network, 5, seed=3)

    first, second = run(), run()
    assert first.rewards == second.rewards
    assert first.updates == 5
    assert np.array_equal(first.params.values, second.params.values)


def test_greedy_evaluation_runs_frozen_policy(monitor_env, tiny_network, rng):
    params = ParameterSet.initialise(tiny_network, 3, monitor_env.grid_shape, rng)
    history = evaluate_policy(monitor_env, params, tiny_network, 2, seed=0)
    assert [stats.steps for stats in history] == [5, 5]


@pytest.mark.slow
def test_attention_policy_beats_random_monitoring():
    network = NetworkConfig()
    cfg = A2CConfig(warmup_experiences=0, lr_actor=0.01, lr_critic=0.01)
    monitor = MonitorConfig(rows=8, cols=8, horizon=50)
    trained, random = [], []
    for seed in range(5):
        env = MonitorEnvironment(monitor, num_agents=3, seed=seed)
        result = train_magcdrl(env, cfg, network, 2000, seed=seed)
        trained.append(np.mean(result.rewards[-100:]))
        baseline = run_random(MonitorEnvironment(monitor, num_agents=3, seed=seed), 100, seed)
        random.append(np.mean([stats.reward for stats in baseline]))
    random_mean = float(np.mean(random))
    assert float(np.mean(trained)) >= random_mean + 0.3 * abs(random_mean)
