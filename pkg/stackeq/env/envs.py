# Copyright (c) 2025 The StackEq Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Benchmark games built on MarkovGameModel."""

from collections import deque
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from stackeq.env.markov_game import MarkovGameModel, Transition, rollout
from stackeq.game.matrix_game import ESCAPE_GAME, MAINTAIN_GAME, MatrixGame

MAIN_LANE, AUX_LANE = 0, 1
MERGE_ACTIONS = ('LANE_LEFT', 'IDLE', 'LANE_RIGHT', 'FASTER', 'SLOWER')
LANE_LEFT, IDLE, LANE_RIGHT, FASTER, SLOWER = range(len(MERGE_ACTIONS))

GRID_CELLS = 5
GRID_ACTIONS = ('left', 'right', 'stay')
GRID_SQUARES = {0: 10.0, GRID_CELLS - 1: 20.0}

# outcome label a run must end in to count as optimal
OPTIMAL_OUTCOME = {
    'escape': 'C-Z',
    'maintain': 'A-X',
    'grid': 'both_at_20',
    'merge': 'leader_first',
    'counterexample': 'B-A',
}


def make_matrix_env(game: MatrixGame, name: str = 'matrix', gamma: float = 0.0) -> MarkovGameModel:
    """One-step Markov game paying the matrix entries: state 0 to terminal state 1."""
    n1, n2 = game.shape
    rewards = np.zeros((2, n1, n2, 2))
    rewards[0, ..., 0] = game.u1
    rewards[0, ..., 1] = game.u2
    transitions = {(0, a1, a2): ((1, 1.0),) for a1 in range(n1) for a2 in range(n2)}
    names1 = game.action_names1 or tuple(str(a) for a in range(n1))
    names2 = game.action_names2 or tuple(str(a) for a in range(n2))
    return MarkovGameModel(name=name,
                           state_names=('s0', 'end'),
                           action_names=(names1, names2),
                           transitions=transitions,
                           rewards=rewards,
                           gamma=gamma,
                           start_state=0,
                           terminal_states=frozenset([1]),
                           horizon=1)


def grid_state(a: int, b: int) -> int:
    return a * GRID_CELLS + b


def make_grid_env(gamma: float = 0.95, horizon: int = 20) -> MarkovGameModel:
    """Two agents in a 1x5 corridor with a 10-square at cell 0 and a 20-square at cell 4.

    A starts at cell 1 and B at cell 3. Both standing on the same reward
    square ends the episode with that common reward.
    """
    moves = (-1, 1, 0)
    names = tuple('A{}B{}'.format(a, b) for a in range(GRID_CELLS) for b in range(GRID_CELLS))
    terminal = frozenset(grid_state(c, c) for c in GRID_SQUARES)
    rewards = np.zeros((len(names), 3, 3, 2))
    transitions = {}
    for a in range(GRID_CELLS):
        for b in range(GRID_CELLS):
            s = grid_state(a, b)
            if s in terminal:
                continue
            for a1, m1 in enumerate(moves):
                for a2, m2 in enumerate(moves):
                    na = min(max(a + m1, 0), GRID_CELLS - 1)
                    nb = min(max(b + m2, 0), GRID_CELLS - 1)
                    transitions[(s, a1, a2)] = ((grid_state(na, nb), 1.0),)
                    if na == nb and na in GRID_SQUARES:
                        rewards[s, a1, a2] = GRID_SQUARES[na]
    return MarkovGameModel(name='grid',
                           state_names=names,
                           action_names=(GRID_ACTIONS, GRID_ACTIONS),
                           transitions=transitions,
                           rewards=rewards,
                           gamma=gamma,
                           start_state=grid_state(1, 3),
                           terminal_states=terminal,
                           horizon=horizon)


def make_counterexample_env(gamma: float = 0.9, horizon: int = 100) -> MarkovGameModel:
    """Two-state game whose bi-level Bellman fixed point is not the bi-level optimum."""
    a, b = 0, 1
    rewards = np.zeros((2, 2, 2, 2))
    rewards[0, a, b] = (0.0, 10.0)
    rewards[0, b, a] = (10.0, 0.0)
    rewards[0, b, b] = (-1.0, -1.0)
    transitions = {
        (0, a, a): ((0, 1.0),),
        (0, a, b): ((1, 1.0),),
        (0, b, a): ((1, 1.0),),
        (0, b, b): ((0, 1.0),),
    }
    return MarkovGameModel(name='counterexample',
                           state_names=('s1', 's2'),
                           action_names=(('A', 'B'), ('A', 'B')),
                           transitions=transitions,
                           rewards=rewards,
                           gamma=gamma,
                           start_state=0,
                           terminal_states=frozenset([1]),
                           horizon=horizon)


def counterexample_q_tables(gamma: float = 0.9) -> Tuple[np.ndarray, np.ndarray]:
    """Q-values of joint policy (A, B) in the counterexample game.

    V(s1) = (0, 10) under that policy, so Q_i(s1, a) = R_i(s1, a) + gamma *
    V_i(next). For every gamma in [0, 1) they are an exact bi-level Bellman
    fixed point.
    """
    model = make_counterexample_env(gamma)
    v = np.array([[0.0, 0.0], [10.0, 0.0]])  # v[agent, state]
    q1 = model.reward_table(0) + gamma * model.expected_next(v[0])
    q2 = model.reward_table(1) + gamma * model.expected_next(v[1])
    return q1, q2


@dataclass(frozen=True)
class MergeConfig:
    """Simplified highway merge: a main lane and an auxiliary lane ending at ``merge_point``.

    Positions are integer cells advancing by the current speed each step; a
    car that reaches ``length`` has passed the merge zone.
    """
    length: int = 10
    merge_point: int = 6
    max_speed: int = 2
    start_speeds: Tuple[int, ...] = (1, 2)
    horizon: int = 50
    gamma: float = 0.95
    crash_reward: float = -10.0
    first_reward: float = 50.0
    second_reward: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, 'start_speeds', tuple(int(v) for v in self.start_speeds))
        if not 1 <= self.merge_point < self.length:
            raise ValueError('merge point should lie in [1, length), got M={} L={}'.format(
                self.merge_point, self.length))
        if self.max_speed < 1:
            raise ValueError('max_speed should be >= 1, got {}'.format(self.max_speed))
        if len(self.start_speeds) == 0 or any(not 0 <= v <= self.max_speed for v in self.start_speeds):
            raise ValueError('bad start speeds {} for max_speed {}'.format(self.start_speeds, self.max_speed))
        if self.horizon < 1:
            raise ValueError('horizon should be positive, got {}'.format(self.horizon))
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError('gamma should lie in [0, 1), got {}'.format(self.gamma))


Car = Tuple[int, int, int]  # (lane, cell, speed)
MergeState = Tuple[Car, Car]


def _drive(config: MergeConfig, car: Car, action: int) -> Tuple[Car, int]:
    """Move one car; returns the new car and its unclipped position."""
    lane, cell, speed = car
    if cell >= config.length:
        return car, cell
    if action == FASTER:
        speed = min(speed + 1, config.max_speed)
    elif action == SLOWER:
        speed = max(speed - 1, 0)
    elif action == LANE_LEFT and lane == AUX_LANE:
        lane = MAIN_LANE
    elif action == LANE_RIGHT and lane == MAIN_LANE and cell < config.merge_point:
        lane = AUX_LANE
    reach = cell + speed
    if lane == AUX_LANE and reach >= config.merge_point:
        # the auxiliary lane ends here
        lane = MAIN_LANE
    if reach >= config.length:
        return (MAIN_LANE, config.length, 0), reach
    return (lane, reach, speed), reach


def _advance(config: MergeConfig, state: MergeState, a1: int, a2: int) -> Tuple[MergeState, Optional[str]]:
    """Move both cars; the event is crash, leader_first, follower_first or None."""
    passed_before = [car[1] >= config.length for car in state]
    (car1, reach1), (car2, reach2) = _drive(config, state[0], a1), _drive(config, state[1], a2)
    passed = [car1[1] >= config.length, car2[1] >= config.length]
    if not any(passed) and car1[0] == car2[0] and car1[1] == car2[1]:
        return (car1, car2), 'crash'
    event = None
    if not any(passed_before) and any(passed):
        if all(passed):
            # further ahead passes first, the leader on a tie
            event = 'leader_first' if reach1 >= reach2 else 'follower_first'
        else:
            event = 'leader_first' if passed[0] else 'follower_first'
    return (car1, car2), event


def merge_step(config: MergeConfig, state: MergeState, a1: int,
               a2: int) -> Tuple[Optional[MergeState], float, float]:
    """Deterministic merge dynamics; a ``None`` next state means the episode ended."""
    (car1, car2), event = _advance(config, state, a1, a2)
    if event == 'crash':
        return None, config.crash_reward, config.crash_reward
    rewards = [0.0, 0.0]
    for i, (before, after) in enumerate(zip(state, (car1, car2))):
        if after[1] >= config.length > before[1]:
            rewards[i] = config.second_reward
    if event == 'leader_first':
        rewards[0] = config.first_reward
    elif event == 'follower_first':
        rewards[1] = config.first_reward
    if car1[1] >= config.length and car2[1] >= config.length:
        return None, rewards[0], rewards[1]
    return (car1, car2), rewards[0], rewards[1]


def merge_start_states(config: MergeConfig) -> List[MergeState]:
    return [((MAIN_LANE, 0, v1), (AUX_LANE, 0, v2)) for v1 in config.start_speeds for v2 in config.start_speeds]


def make_merge_env(config: Optional[MergeConfig] = None) -> MarkovGameModel:
    """Enumerate the reachable merge states into an explicit model.

    The leader starts on the main lane and the follower on the auxiliary
    lane, both at cell 0, with start speeds drawn uniformly from
    ``config.start_speeds``. The last state index is the shared terminal state.
    """
    config = config or MergeConfig()
    n = len(MERGE_ACTIONS)
    starts = merge_start_states(config)
    index: Dict[MergeState, int] = {}
    queue = deque()
    for s in starts:
        if s not in index:
            index[s] = len(index)
            queue.append(s)
    outcomes = {}
    while queue:
        state = queue.popleft()
        for a1 in range(n):
            for a2 in range(n):
                nxt, r1, r2 = merge_step(config, state, a1, a2)
                outcomes[(state, a1, a2)] = (nxt, r1, r2)
                if nxt is not None and nxt not in index:
                    index[nxt] = len(index)
                    queue.append(nxt)
    terminal = len(index)
    states = sorted(index, key=index.get)
    rewards = np.zeros((terminal + 1, n, n, 2))
    transitions = {}
    for (state, a1, a2), (nxt, r1, r2) in outcomes.items():
        s = index[state]
        transitions[(s, a1, a2)] = ((terminal if nxt is None else index[nxt], 1.0),)
        rewards[s, a1, a2] = (r1, r2)
    features = np.zeros((terminal + 1, 6))
    for state, s in index.items():
        features[s] = [v for lane, cell, speed in state
                       for v in (lane, cell / config.length, speed / config.max_speed)]
    names = tuple('{}|{}'.format(*('{}:{}:{}'.format(*car) for car in state)) for state in states) + ('end',)
    start_ids = sorted(set(index[s] for s in starts))
    start_probs = [sum(1.0 for s in starts if index[s] == i) / len(starts) for i in start_ids]
    return MarkovGameModel(name='merge',
                           state_names=names,
                           action_names=(MERGE_ACTIONS, MERGE_ACTIONS),
                           transitions=transitions,
                           rewards=rewards,
                           gamma=config.gamma,
                           start_state=start_ids[0],
                           terminal_states=frozenset([terminal]),
                           horizon=config.horizon,
                           start_distribution=tuple(zip(start_ids, start_probs)),
                           features=features,
                           info={'merge': asdict(config)})


def merge_config_of(model: MarkovGameModel) -> MergeConfig:
    """The MergeConfig a merge model was built from."""
    return MergeConfig(**model.info['merge']) if 'merge' in model.info else MergeConfig()


def parse_merge_state(name: str) -> MergeState:
    car1, car2 = (tuple(int(v) for v in car.split(':')) for car in name.split('|'))
    return car1, car2


def merge_outcome(model: MarkovGameModel, episode: Sequence[Transition]) -> str:
    """leader_first, follower_first, crash or timeout, replayed from the visited states."""
    config = merge_config_of(model)
    for tr in episode:
        _, event = _advance(config, parse_merge_state(model.state_names[tr.s]), tr.a1, tr.a2)
        if event is not None:
            return event
    return 'timeout'


def classify_episode(model: MarkovGameModel, episode: Sequence[Transition]) -> str:
    """Outcome label of a greedy episode, comparable to ``OPTIMAL_OUTCOME``."""
    if len(episode) == 0:
        raise ValueError('cannot classify an empty episode')
    if model.name == 'merge':
        return merge_outcome(model, episode)
    if model.name == 'grid':
        last = episode[-1]
        if last.done and not last.truncated:
            return 'both_at_{}'.format(int(last.r1))
        return 'none'
    first = episode[0]
    return model.joint_name(first.a1, first.a2)


ENVS = {
    'escape': lambda **kw: make_matrix_env(ESCAPE_GAME, name='escape', **kw),
    'maintain': lambda **kw: make_matrix_env(MAINTAIN_GAME, name='maintain', **kw),
    'grid': make_grid_env,
    'counterexample': make_counterexample_env,
    'merge': lambda **kw: make_merge_env(MergeConfig(**kw)),
}


def make_env(name: str, **kwargs) -> MarkovGameModel:
    if name not in ENVS:
        raise ValueError('unknown environment {}, choose from {}'.format(name, sorted(ENVS)))
    return ENVS[name](**kwargs)


def optimal_cell(model: MarkovGameModel) -> Optional[Tuple[int, int, int]]:
    """(start state, a1, a2) of the designated optimal joint action, for games that have one."""
    label = OPTIMAL_OUTCOME.get(model.name)
    if label is None or model.name in ('grid', 'merge'):
        return None
    name1, name2 = label.split('-')
    return model.start_state, model.action_names[0].index(name1), model.action_names[1].index(name2)


def evaluate_greedy(model: MarkovGameModel, act, rng: Optional[np.random.Generator] = None):
    """Roll ``act`` out from every start state, weighted by the start distribution.

    Returns:
        Tuple[Dict[str, float], float, float]: outcome shares and the expected
            undiscounted returns of both agents.
    """
    shares: Dict[str, float] = {}
    return1, return2 = 0.0, 0.0
    for start, p in model.starts:
        episode = rollout(model, act, rng, start=start)
        label = classify_episode(model, episode)
        shares[label] = shares.get(label, 0.0) + p
        return1 += p * sum(tr.r1 for tr in episode)
        return2 += p * sum(tr.r2 for tr in episode)
    return shares, return1, return2
