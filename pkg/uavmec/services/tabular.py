"""
Tabular Q-learning for UAV placement.

Independent learners (`q-single`) key their table on their own lattice cell
and treat the other UAVs as part of the environment. Opponent-modelling
learners (`q-multi`) key on every UAV's cell, store Q per joint action and
weight the other agents' actions by their observed frequencies.
"""
import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from uavmec.core.exceptions import ConfigError, InvalidArgumentError, TraceFormatError
from uavmec.core.seeding import make_rng
from uavmec.models.world import Cell, EpisodeStats, WorldState
from uavmec.schemas.learning import TabularConfig
from uavmec.services.actions import NUM_ACTIONS, STAY

logger = logging.getLogger(__name__)

StateKey = Tuple[int, ...]
JointAction = Tuple[int, ...]
QTABLE_COLUMNS = ["state_key", "action", "value"]


# ============ Tables ============

class QTable:
    """Sparse Q(s, a, others) store; unseen entries read as 0"""

    def __init__(self, learning_rate: float, discount: float):
        if not 0.0 < learning_rate <= 1.0:
            raise InvalidArgumentError(f"learning_rate must be in (0, 1], got {learning_rate}")
        if not 0.0 <= discount < 1.0:
            raise InvalidArgumentError(f"discount must be in [0, 1), got {discount}")
        self.learning_rate = learning_rate
        self.discount = discount
        self._rows: Dict[StateKey, Dict[Tuple[int, JointAction], float]] = defaultdict(dict)

    def __len__(self) -> int:
        return sum(len(row) for row in self._rows.values())

    def get(self, state: StateKey, action: int, others: JointAction = ()) -> float:
        row = self._rows.get(state)
        return row.get((action, others), 0.0) if row else 0.0

    def set(self, state: StateKey, action: int, value: float, others: JointAction = ()) -> None:
        self._rows[state][(action, others)] = float(value)

    def row(self, state: StateKey, others: JointAction = ()) -> np.ndarray:
        return np.array([self.get(state, a, others) for a in range(NUM_ACTIONS)])

    def entries(self, state: StateKey) -> Dict[Tuple[int, JointAction], float]:
        return self._rows.get(state, {})

    def items(self) -> Iterator[Tuple[StateKey, int, JointAction, float]]:
        for state in sorted(self._rows):
            for (action, others), value in sorted(self._rows[state].items()):
                yield state, action, others, value


class OpponentModel:
    """Per-state action counts of every other agent"""

    def __init__(self, num_others: int):
        if num_others < 0:
            raise InvalidArgumentError(f"num_others must be non-negative, got {num_others}")
        self.num_others = num_others
        self._counts: Dict[StateKey, np.ndarray] = {}

    def observe(self, state: StateKey, others: JointAction) -> None:
        if len(others) != self.num_others:
            raise InvalidArgumentError(f"Expected {self.num_others} opponent actions, got {len(others)}")
        counts = self._counts.setdefault(state, np.zeros((self.num_others, NUM_ACTIONS)))
        counts[np.arange(self.num_others), list(others)] += 1

    def frequencies(self, state: StateKey) -> np.ndarray:
        """(num_others, 9) rows summing to 1; uniform where the state was never seen."""
        counts = self._counts.get(state)
        if counts is None:
            return np.full((self.num_others, NUM_ACTIONS), 1.0 / NUM_ACTIONS)
        return counts / counts.sum(axis=1, keepdims=True)


def opponent_weighted_value(table: QTable, model: Optional[OpponentModel], state: StateKey) -> np.ndarray:
    """Expected Q per own action under the opponents' empirical joint action distribution."""
    if model is None or model.num_others == 0:
        return table.row(state)
    freq = model.frequencies(state)
    values = np.zeros(NUM_ACTIONS)
    # Unseen joint actions hold Q = 0 and add nothing
    for (action, others), q in table.entries(state).items():
        if len(others) == model.num_others:
            values[action] += q * np.prod(freq[np.arange(model.num_others), list(others)])
    return values


def q_update(
    table: QTable,
    state: StateKey,
    action: int,
    reward: float,
    next_state: StateKey,
    others: JointAction = (),
    model: Optional[OpponentModel] = None,
) -> float:
    """Q <- (1 - lr) Q + lr (r + discount * max_a' Q(s', a')); returns the stored value."""
    best_next = float(np.max(opponent_weighted_value(table, model, next_state)))
    lr = table.learning_rate
    value = (1.0 - lr) * table.get(state, action, others) + lr * (reward + table.discount * best_next)
    table.set(state, action, value, others)
    return value


def select_action(
    table: QTable,
    state: StateKey,
    epsilon: float,
    rng: np.random.Generator,
    model: Optional[OpponentModel] = None,
) -> int:
    """Epsilon-greedy; greedy ties go to the lowest action index."""
    if not 0.0 <= epsilon <= 1.0:
        raise InvalidArgumentError(f"epsilon must be in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(NUM_ACTIONS))
    return int(np.argmax(opponent_weighted_value(table, model, state)))


# ============ Agents ============

@dataclass
class TabularAgent:
    index: int
    table: QTable
    model: Optional[OpponentModel] = None  # Set for opponent-modelling learners

    @property
    def multi(self) -> bool:
        return self.model is not None

    def state_key(self, state: WorldState) -> StateKey:
        if self.multi:
            return tuple(v for cell in state.uav_cells for v in cell)
        return tuple(state.uav_cells[self.index])

    def others(self, actions: Sequence[int]) -> JointAction:
        if not self.multi:
            return ()
        return tuple(int(a) for k, a in enumerate(actions) if k != self.index)


def make_agents(num_agents: int, cfg: TabularConfig, multi: bool) -> List[TabularAgent]:
    return [
        TabularAgent(
            index=n,
            table=QTable(cfg.learning_rate, cfg.discount),
            model=OpponentModel(num_agents - 1) if multi else None,
        )
        for n in range(num_agents)
    ]


@dataclass
class TabularResult:
    """Outcome of a tabular training run"""
    agents: List[TabularAgent]
    episodes: List[EpisodeStats] = field(default_factory=list)
    success_trajectories: List[List[Tuple[Cell, ...]]] = field(default_factory=list)
    best_cells: Optional[Tuple[Cell, ...]] = None
    best_mos: float = float("-inf")

    @property
    def rewards(self) -> List[float]:
        return [stats.reward for stats in self.episodes]


def mos_gain(start_mos: float, current_mos: float) -> float:
    """Relative MOS improvement over the episode start."""
    if start_mos <= 0:
        return 0.0
    return (current_mos - start_mos) / start_mos


def _run_episode(env, agents, epsilon, rng, cfg: TabularConfig, learn: bool, result: TabularResult) -> None:
    started = time.perf_counter()
    state = env.reset()
    start_mos = state.last_mos
    trajectory = [state.uav_cells]
    stats = EpisodeStats()
    _track_best(result, state)
    success = False
    done = False
    while not done:
        keys = [agent.state_key(state) for agent in agents]
        actions = [select_action(agent.table, key, epsilon, rng, agent.model) for agent, key in zip(agents, keys)]
        next_state, reward, done = env.step(actions)
        if learn:
            for agent, key in zip(agents, keys):
                others = agent.others(actions)
                if agent.model is not None:
                    agent.model.observe(key, others)
                q_update(agent.table, key, actions[agent.index], reward, agent.state_key(next_state), others, agent.model)
        stats.reward += reward
        stats.steps += 1
        trajectory.append(next_state.uav_cells)
        _track_best(result, next_state)
        state = next_state
        if mos_gain(start_mos, state.last_mos) >= cfg.qoe_threshold:
            success = True
            if cfg.early_stop:
                break

    stats.mos_total, stats.mos_count, stats.offloading = env.episode_summary()
    stats.wallclock_ms = (time.perf_counter() - started) * 1000.0
    result.episodes.append(stats)
    if success:
        result.success_trajectories.append(trajectory)


def _track_best(result: TabularResult, state: WorldState) -> None:
    if state.last_mos > result.best_mos:
        result.best_mos = state.last_mos
        result.best_cells = state.uav_cells


def train_tabular(env, agents: List[TabularAgent], episodes: int, seed: int, cfg: TabularConfig) -> TabularResult:
    """Epsilon-greedy Q-learning over `episodes` episodes; reproducible for a fixed seed."""
    if episodes < 1:
        raise ConfigError(f"episodes must be at least 1, got {episodes}")
    if len(agents) != env.num_agents:
        raise ConfigError(f"{len(agents)} learners for an environment with {env.num_agents} UAVs")
    rng = make_rng(seed)
    result = TabularResult(agents=agents)
    logger.info(f"🎯 Tabular training: {len(agents)} agent(s), {episodes} episodes, seed {seed}")
    for episode in range(episodes):
        epsilon = cfg.epsilon.value(episode, episodes)
        _run_episode(env, agents, epsilon, rng, cfg, True, result)
        logger.debug(f"Episode {episode}: reward {result.episodes[-1].reward:.3f}, epsilon {epsilon:.3f}")
    logger.info(
        f"✅ Tabular training done: {len(result.success_trajectories)} successful episodes, best MOS {result.best_mos:.4f}"
    )
    return result


def evaluate_greedy(env, agents: List[TabularAgent], episodes: int, seed: int, cfg: TabularConfig) -> TabularResult:
    """Greedy rollouts with frozen tables."""
    if len(agents) != env.num_agents:
        raise ConfigError(f"{len(agents)} learners for an environment with {env.num_agents} UAVs")
    rng = make_rng(seed)
    result = TabularResult(agents=agents)
    frozen = cfg.model_copy(update={"early_stop": False})
    for _ in range(episodes):
        _run_episode(env, agents, 0.0, rng, frozen, False, result)
    return result


def resting_cells(env, agents: List[TabularAgent]) -> Tuple[Cell, ...]:
    """Where the learned greedy policy parks the UAVs.

    Rolls the frozen tables out from the deployment start until every agent
    picks STAY or the episode ends, and returns the joint cell with the
    highest MOS along that rollout (the start included).
    """
    if len(agents) != env.num_agents:
        raise ConfigError(f"{len(agents)} learners for an environment with {env.num_agents} UAVs")
    rng = make_rng(0)
    state = env.reset()
    best_cells, best_mos = state.uav_cells, state.last_mos
    done = False
    while not done:
        actions = [select_action(agent.table, agent.state_key(state), 0.0, rng, agent.model) for agent in agents]
        if all(action == STAY for action in actions):
            break
        state, _, done = env.step(actions)
        if state.last_mos > best_mos:
            best_cells, best_mos = state.uav_cells, state.last_mos
    return best_cells


def deploy(env, cfg: TabularConfig, episodes: int, seed: int, multi: bool) -> Tuple[Cell, ...]:
    """Q-learning deployment: train from the start cells, then follow the greedy policy."""
    agents = make_agents(env.num_agents, cfg, multi=multi)
    train_tabular(env, agents, episodes, seed, cfg)
    cells = resting_cells(env, agents)
    logger.info(f"✅ Deployed {env.num_agents} UAV(s) at {list(cells)}, MOS {env.mos_at(cells):.4f}")
    return cells


def deploy_single(env, cfg: TabularConfig, episodes: int, seed: int) -> Cell:
    """Train one UAV and return the cell its greedy policy settles on."""
    if env.num_agents != 1:
        raise ConfigError(f"Single-UAV deployment needs exactly one UAV, got {env.num_agents}")
    return deploy(env, cfg, episodes, seed, multi=False)[0]


# ============ CSV ============

def _format_key(values: Sequence[int], sep: str) -> str:
    return sep.join(str(int(v)) for v in values)


def _parse_key(text: str, sep: str) -> Tuple[int, ...]:
    text = str(text)
    return tuple(int(v) for v in text.split(sep)) if text else ()


def save_qtable(table: QTable, path: Union[str, Path]) -> Path:
    """CSV `state_key,action,value`; state coordinates joined by `_`, joint actions by `-`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [
        {"state_key": _format_key(state, "_"), "action": _format_key((action,) + others, "-"), "value": value}
        for state, action, others, value in table.items()
    ]
    pd.DataFrame(rows, columns=QTABLE_COLUMNS).to_csv(path, index=False, lineterminator="\n", float_format="%.17g")
    return path


def load_qtable(path: Union[str, Path], learning_rate: float, discount: float) -> QTable:
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype={"state_key": str, "action": str}, float_precision="round_trip", keep_default_na=False)
    except FileNotFoundError:
        raise TraceFormatError("Q-table file not found", config_path=str(path))
    if list(df.columns) != QTABLE_COLUMNS:
        raise TraceFormatError(f"Expected header {','.join(QTABLE_COLUMNS)}", config_path=str(path))
    table = QTable(learning_rate, discount)
    try:
        for state_key, action, value in df.itertuples(index=False):
            joint = _parse_key(action, "-")
            table.set(_parse_key(state_key, "_"), joint[0], float(value), joint[1:])
    except (ValueError, IndexError) as e:
        raise TraceFormatError(f"Bad Q-table row: {str(e)}", config_path=str(path))
    return table
