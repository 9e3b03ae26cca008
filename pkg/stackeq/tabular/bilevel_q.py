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
"""Bi-level tabular Q-learning and bi-level value iteration.

Both agents learn Q-values over joint actions. The bootstrap joint action
at the next state is the Stackelberg solution of the stage game formed by
the two tables there, shared by both targets.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from stackeq.env.envs import classify_episode, evaluate_greedy, optimal_cell
from stackeq.env.markov_game import JointPolicy, MarkovGameModel, Transition, env_reset, env_step
from stackeq.game.matrix_game import stackelberg_actions
from stackeq.utils.common import make_rngs
from stackeq.utils.file_utils import logging, read_json, write_json
from stackeq.utils.run_record import RunRecord
from stackeq.utils.scheduler import LinearSchedule, build_rate
from stackeq.utils.train_utils import log_per_step


@dataclass
class QTable:
    """Joint-action Q tables, q1[s, a1, a2] for the leader and q2 for the follower."""
    q1: np.ndarray
    q2: np.ndarray

    def __post_init__(self):
        self.q1 = np.array(self.q1, dtype=np.float64)
        self.q2 = np.array(self.q2, dtype=np.float64)
        if self.q1.shape != self.q2.shape or self.q1.ndim != 3:
            raise ValueError('Q tables should share an (S, A1, A2) shape, got {} and {}'.format(
                self.q1.shape, self.q2.shape))

    @classmethod
    def zeros(cls, model: MarkovGameModel, q0: float = 0.0) -> 'QTable':
        shape = (model.n_states,) + model.n_actions
        q = cls(np.full(shape, q0), np.full(shape, q0))
        # terminal rows stay at zero, they are never bootstrapped from
        q.q1[list(model.terminal_states)] = 0.0
        q.q2[list(model.terminal_states)] = 0.0
        return q

    def copy(self) -> 'QTable':
        return QTable(self.q1.copy(), self.q2.copy())

    def check(self):
        assert np.all(np.isfinite(self.q1)) and np.all(np.isfinite(self.q2)), 'non-finite Q-values'

    def to_json(self):
        return {'q1': self.q1.tolist(), 'q2': self.q2.tolist()}

    @classmethod
    def from_json(cls, obj) -> 'QTable':
        return cls(obj['q1'], obj['q2'])


def save_qtable(q: QTable, path):
    write_json(path, q.to_json())


def load_qtable(path) -> QTable:
    return QTable.from_json(read_json(path))


@dataclass(frozen=True)
class TabularConfig:
    """Hyper-parameters of the tabular learners.

    ``epsilon_episodes`` defaults to half of ``episodes``; the decay starts
    once the ``warmup_steps`` uniform-random steps are spent. ``gamma`` None
    uses the model's discount.
    """
    alpha1: float = 0.1
    alpha2: float = 0.05
    gamma: Optional[float] = None
    epsilon_initial: float = 1.0
    epsilon_final: float = 0.05
    epsilon_episodes: Optional[int] = None
    warmup_steps: int = 1000
    episodes: int = 2000
    seed: int = 0
    lr_schedule: str = 'constant'
    omega: float = 0.8
    q0: float = 0.0
    log_interval: int = 0
    convergence_fraction: float = 0.1

    def __post_init__(self):
        for name in ('alpha1', 'alpha2'):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValueError('{} should lie in (0, 1], got {}'.format(name, getattr(self, name)))
        for name in ('epsilon_initial', 'epsilon_final'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError('{} should lie in [0, 1], got {}'.format(name, getattr(self, name)))
        if self.gamma is not None and not 0.0 <= self.gamma < 1.0:
            raise ValueError('gamma should lie in [0, 1), got {}'.format(self.gamma))
        if self.episodes < 1 or self.warmup_steps < 0:
            raise ValueError('bad episode budget: episodes {} warmup {}'.format(self.episodes, self.warmup_steps))
        if self.lr_schedule not in ('constant', 'visit'):
            raise ValueError('unknown learning rate schedule: {}'.format(self.lr_schedule))

    def epsilon_schedule(self) -> LinearSchedule:
        steps = self.epsilon_episodes if self.epsilon_episodes is not None else self.episodes // 2
        return LinearSchedule(self.epsilon_initial, self.epsilon_final, steps)


def stage_actions(q: QTable, s: int) -> Tuple[int, int]:
    """Stackelberg joint action of the stage game (q1[s], q2[s])."""
    a1, a2 = stackelberg_actions(q.q1[s], q.q2[s])
    return int(a1), int(a2)


def greedy_policy(model: MarkovGameModel, q: QTable) -> JointPolicy:
    a1, a2 = stackelberg_actions(q.q1, q.q2)
    return JointPolicy.from_arrays(model, a1, a2)


def td_update(q: QTable, tr: Transition, alpha1: float, alpha2: float, gamma: float) -> QTable:
    """One bi-level TD step on the visited cell of both tables, in place."""
    if tr.bootstrap:
        n1, n2 = stage_actions(q, tr.s_next)
        next1, next2 = q.q1[tr.s_next, n1, n2], q.q2[tr.s_next, n1, n2]
    else:
        next1, next2 = 0.0, 0.0
    cell = (tr.s, tr.a1, tr.a2)
    q.q1[cell] = (1.0 - alpha1) * q.q1[cell] + alpha1 * (tr.r1 + gamma * next1)
    q.q2[cell] = (1.0 - alpha2) * q.q2[cell] + alpha2 * (tr.r2 + gamma * next2)
    return q


def explore(rng: np.random.Generator, greedy: Tuple[int, int], n_actions: Tuple[int, int], epsilon: float,
            uniform: bool = False) -> Tuple[int, int]:
    """Each agent independently replaces its greedy action by a uniform one with probability epsilon."""
    joint = []
    for a, n in zip(greedy, n_actions):
        if uniform or rng.random() < epsilon:
            a = int(rng.integers(n))
        joint.append(a)
    return joint[0], joint[1]


def train_bilevel_q(model: MarkovGameModel, config: TabularConfig, writer=None) -> Tuple[QTable, JointPolicy, RunRecord]:
    rng, _ = make_rngs(config.seed)
    gamma = model.gamma if config.gamma is None else config.gamma
    q = QTable.zeros(model, config.q0)
    visits = np.zeros_like(q.q1)
    rate1 = build_rate(config.alpha1, config.lr_schedule, config.omega)
    rate2 = build_rate(config.alpha2, config.lr_schedule, config.omega)
    epsilon = config.epsilon_schedule()
    opt = optimal_cell(model)
    record = RunRecord(model.name, 'bilevel_q', config.seed)
    total_steps, explore_episode = 0, 0
    for episode in range(config.episodes):
        eps = epsilon(explore_episode)
        if total_steps >= config.warmup_steps:
            explore_episode += 1
        state = env_reset(model, rng)
        trs = []
        for t in range(model.horizon or 1000):
            warm = total_steps < config.warmup_steps
            a1, a2 = explore(rng, stage_actions(q, state), model.n_actions, eps, uniform=warm)
            tr = env_step(model, state, a1, a2, rng, t)
            visits[tr.s, tr.a1, tr.a2] += 1
            n = visits[tr.s, tr.a1, tr.a2]
            td_update(q, tr, rate1(n), rate2(n), gamma)
            trs.append(tr)
            total_steps += 1
            if tr.done:
                break
            state = tr.s_next
        policy = greedy_policy(model, q)
        g1, g2 = policy[model.start_state]
        record.append(sum(tr.r1 for tr in trs), sum(tr.r2 for tr in trs),
                      model.action_names[0][g1], model.action_names[1][g2],
                      policy.on_path_hash(model), classify_episode(model, trs),
                      model.joint_name(trs[0].a1, trs[0].a2),
                      None if opt is None else (q.q1[opt], q.q2[opt]))
        log_per_step(writer, {'tag': 'bilevel_q', 'step': episode, 'unit': 'episode',
                              'log_interval': config.log_interval,
                              'loss_dict': {'return1': record.returns1[-1], 'return2': record.returns2[-1],
                                            'epsilon': eps}})
    q.check()
    policy = greedy_policy(model, q)
    record.finish(*evaluate_greedy(model, lambda s: policy[s], rng), fraction=config.convergence_fraction)
    if not record.converged:
        logging.warning('bilevel_q on {} seed {} did not settle on a greedy policy'.format(model.name, config.seed))
    return q, policy, record


@dataclass
class ValueIterationResult:
    q: QTable
    v1: np.ndarray
    v2: np.ndarray
    sweeps: int
    converged: bool
    # per state, whether the final stage game has a global optimal point
    global_optimum: Tuple[bool, ...] = ()


def stage_values(model: MarkovGameModel, q: QTable) -> Tuple[np.ndarray, np.ndarray]:
    """Stackelberg payoffs of every state's stage game, zero at terminal states."""
    a1, a2 = stackelberg_actions(q.q1, q.q2)
    states = np.arange(model.n_states)
    v1 = q.q1[states, a1, a2]
    v2 = q.q2[states, a1, a2]
    v1[list(model.terminal_states)] = 0.0
    v2[list(model.terminal_states)] = 0.0
    return v1, v2


def bilevel_backup(model: MarkovGameModel, q: QTable, gamma: Optional[float] = None) -> QTable:
    """Q_i <- R_i + gamma * E[V_i(s')] with V_i the stage-game Stackelberg payoffs."""
    gamma = model.gamma if gamma is None else gamma
    v1, v2 = stage_values(model, q)
    return QTable(model.reward_table(0) + gamma * model.expected_next(v1),
                  model.reward_table(1) + gamma * model.expected_next(v2))


def _has_global_optimum(u1: np.ndarray, u2: np.ndarray) -> bool:
    return bool(np.any((u1 == u1.max()) & (u2 == u2.max())))


def bilevel_value_iteration(model: MarkovGameModel, tolerance: float = 1e-10, max_sweeps: int = 100000,
                            initial: Optional[QTable] = None) -> ValueIterationResult:
    """Synchronous bi-level Bellman sweeps until the sup-norm change drops below ``tolerance``."""
    q = initial.copy() if initial is not None else QTable.zeros(model)
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        new = bilevel_backup(model, q)
        change = max(np.max(np.abs(new.q1 - q.q1)), np.max(np.abs(new.q2 - q.q2)))
        q = new
        if change < tolerance:
            converged = True
            break
    if not converged:
        logging.warning('bilevel value iteration on {} stopped after {} sweeps without converging'.format(
            model.name, sweeps))
    v1, v2 = stage_values(model, q)
    optimum = tuple(_has_global_optimum(q.q1[s], q.q2[s]) for s in range(model.n_states))
    return ValueIterationResult(q, v1, v2, sweeps, converged, optimum)
