import itertools

import numpy as np
import pytest

from uavmec.core.exceptions import ConfigError, InvalidArgumentError
from uavmec.models.trace import TraceFrame
from uavmec.services.actions import ACTION_VECTORS, NUM_ACTIONS, STAY, move
from uavmec.services.harness import offloading_count
from uavmec.services.mec_env import (
    REWARD_DOWN,
    REWARD_FLAT,
    REWARD_UP,
    MecEnvironment,
    assign_serving,
    cell_position,
    evaluate_frame,
    marginal_cells,
    mos_reward,
    step_mec,
    vehicle_density,
)

from conftest import static_frames


def test_action_set_is_cube_corners_plus_stay():
    assert NUM_ACTIONS == 9
    assert ACTION_VECTORS[STAY] == (0, 0, 0)
    corners = set(ACTION_VECTORS[:STAY])
    assert corners == set(itertools.product((1, -1), repeat=3))


def test_move_clamps_at_lattice_corner():
    assert move((0, 0, 0), 7, (4, 4, 1)) == (0, 0, 0)
    assert move((3, 3, 0), 0, (4, 4, 1)) == (3, 3, 0)
    with pytest.raises(InvalidArgumentError):
        move((0, 0, 0), 9, (4, 4, 1))


def test_cell_position_uses_half_cube_spacing(small_lattice, radio):
    pos = cell_position(small_lattice, (2, 1, 0), radio)
    assert (pos.x, pos.y, pos.h) == (200.0, 100.0, radio.uav_height)


def test_marginal_cells_are_farthest_from_bs(small_lattice, radio):
    assert marginal_cells(small_lattice, 1, radio) == [(3, 3, 0)]
    # (2, 3) and (3, 2) tie; coordinate order decides
    assert marginal_cells(small_lattice, 3, radio) == [(3, 3, 0), (2, 3, 0), (3, 2, 0)]


def test_static_world_with_idle_uavs_pays_flat_reward(mec_setup):
    setup = mec_setup(initial_cells=[(1, 1, 0), (3, 0, 0)])
    frames = static_frames([[100, 100], [250, 40], [20, 300]], 4)
    env = MecEnvironment(frames, setup, num_uavs=2)
    state = env.reset()
    for _ in range(3):
        state, reward, done = env.step([STAY, STAY])
        assert reward == REWARD_FLAT
    assert done


def test_moving_toward_vehicles_pays_up_reward(mec_setup):
    setup = mec_setup(initial_cells=[(0, 0, 0)])
    frames = static_frames([[200, 200]], 3)
    env = MecEnvironment(frames, setup, num_uavs=1)
    state = env.reset()
    before = evaluate_frame(state.uav_cells, frames[0], setup).mos_sum
    next_state, reward, done = env.step([0])
    after = evaluate_frame(next_state.uav_cells, frames[1], setup).mos_sum
    assert next_state.uav_cells == ((1, 1, 0),)
    assert after > before
    assert reward == REWARD_UP
    assert not done


def test_outward_action_at_corner_keeps_position(mec_setup):
    setup = mec_setup(initial_cells=[(0, 0, 0)])
    env = MecEnvironment(static_frames([[300, 300]], 3), setup, num_uavs=1)
    env.reset()
    state, _, done = env.step([7])
    assert state.uav_cells == ((0, 0, 0),)
    assert not done


def test_step_mec_is_pure(mec_setup):
    setup = mec_setup(initial_cells=[(0, 0, 0)])
    frames = static_frames([[200, 200]], 3)
    env = MecEnvironment(frames, setup, num_uavs=1)
    state = env.reset()
    first = step_mec(state, [0], frames, setup)
    second = step_mec(state, [0], frames, setup)
    assert first[0].uav_cells == second[0].uav_cells
    assert first[1:] == second[1:]
    assert state.frame_index == 0


def test_horizon_ends_episode_and_guards_overrun(mec_setup):
    setup = mec_setup(horizon=2)
    frames = static_frames([[0, 0]], 6)
    env = MecEnvironment(frames, setup, num_uavs=1)
    assert env.horizon == 2
    state = env.reset()
    state, _, done = env.step([STAY])
    assert not done
    state, _, done = env.step([STAY])
    assert done
    with pytest.raises(InvalidArgumentError):
        step_mec(state, [STAY], frames, setup)


def test_action_count_must_match(mec_setup):
    env = MecEnvironment(static_frames([[0, 0]], 3), mec_setup(), num_uavs=2)
    env.reset()
    with pytest.raises(InvalidArgumentError):
        env.step([STAY])


def test_environment_config_errors(mec_setup):
    frames = static_frames([[0, 0]], 3)
    with pytest.raises(ConfigError):
        MecEnvironment(frames[:1], mec_setup(), num_uavs=1)
    with pytest.raises(ConfigError):
        MecEnvironment(frames, mec_setup(), num_uavs=0)
    with pytest.raises(ConfigError):
        MecEnvironment(frames, mec_setup(initial_cells=[(9, 0, 0)]), num_uavs=1)


def test_mos_reward_tolerance():
    assert mos_reward(10.0, 10.0 + 1e-12, 1e-9) == REWARD_FLAT
    assert mos_reward(10.0, 10.5, 1e-9) == REWARD_UP
    assert mos_reward(10.0, 9.5, 1e-9) == REWARD_DOWN


def test_assign_serving_matches_brute_force(rng):
    uav_xyz = np.column_stack([rng.uniform(0, 400, 4), rng.uniform(0, 400, 4), np.full(4, 100.0)])
    vehicles = rng.uniform(0, 400, size=(50, 2))
    serving = assign_serving(uav_xyz, vehicles, 150.0)
    for k, (vx, vy) in enumerate(vehicles):
        best, best_d = -1, np.inf
        for n, (ux, uy, _) in enumerate(uav_xyz):
            d = np.hypot(ux - vx, uy - vy)
            if d <= 150.0 and d < best_d:
                best, best_d = n, d
        assert serving[k] == best


def test_offloading_count(mec_setup):
    setup = mec_setup()
    env = MecEnvironment(static_frames([[0, 0]], 2), setup, num_uavs=2)
    empty = TraceFrame(t=0, vehicle_ids=(), xy=np.empty((0, 2)), lane_ids=())
    state = env.state_for([(0, 0, 0), (3, 3, 0)], 0)
    assert offloading_count(state, empty, setup) == 0
    assert offloading_count(state, static_frames([[10, 10]], 1)[0], setup) == 1
    both = static_frames([[10, 10], [290, 310]], 1)[0]
    assert offloading_count(state, both, setup) == 2


def test_offloading_count_matches_assignment_oracle(mec_setup, rng):
    setup = mec_setup()
    env = MecEnvironment(static_frames([[0, 0]], 2), setup, num_uavs=3)
    frame = static_frames(rng.uniform(0, 300, size=(40, 2)), 1)[0]
    cells = [tuple(int(v) for v in rng.integers(0, 4, size=2)) + (0,) for _ in range(3)]
    state = env.state_for(cells, 0)
    serving_uavs = set()
    for vx, vy in frame.xy:
        options = []
        for n, cell in enumerate(cells):
            pos = cell_position(setup.lattice, cell, setup.radio)
            d = np.hypot(pos.x - vx, pos.y - vy)
            if d <= setup.mec.coverage_radius_m:
                options.append((d, n))
        if options:
            serving_uavs.add(min(options)[1])
    assert offloading_count(state, frame, setup) == len(serving_uavs)


def test_episode_summary_counts_every_slot(mec_setup):
    env = MecEnvironment(static_frames([[0, 0], [100, 0]], 4), mec_setup(), num_uavs=1)
    env.reset()
    done = False
    while not done:
        _, _, done = env.step([STAY])
    mos_total, mos_count, offloading = env.episode_summary()
    assert mos_count == 4 * 2
    assert 1.0 * mos_count <= mos_total <= 5.0 * mos_count
    assert 0 <= offloading <= 1


def test_episode_summary_totals_uneven_slots(mec_setup):
    frames = static_frames([[0, 0], [100, 0]], 3)
    frames[1] = TraceFrame(t=1, vehicle_ids=(0,), xy=np.array([[0.0, 0.0]]), lane_ids=(0,))
    env = MecEnvironment(frames, mec_setup(), num_uavs=1)
    env.reset()
    env.step([STAY])
    mos_total, mos_count, _ = env.episode_summary()
    assert mos_count == 3
    assert mos_total == pytest.approx(sum(float(s.sum()) for s in env.episode_scores), rel=1e-12)
    env.step([STAY])
    assert env.episode_summary()[1] == 5


def test_vehicle_density_counts_under_columns(small_lattice):
    frame = static_frames([[0, 0], [10, 20], [300, 100], [1000, 1000]], 1)[0]
    grid = vehicle_density(frame, small_lattice)
    assert grid.shape == (4, 4)
    assert grid[0, 0] == 2
    assert grid[1, 3] == 1
    assert grid[3, 3] == 1
    assert grid.sum() == 4
