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
"""Independent Q-learning baseline: each agent treats the other as part of the environment."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from stackeq.env.envs import classify_episode, evaluate_greedy
from stackeq.env.markov_game import JointPolicy, MarkovGameModel, Transition, env_reset, env_step
from stackeq.tabular.bilevel_q import TabularConfig, explore
from stackeq.utils.common import make_rngs
from stackeq.utils.file_utils import logging
from stackeq.utils.run_record import RunRecord
from stackeq.utils.scheduler import build_rate
from stackeq.utils.train_utils import log_per_step


@dataclass
class IndependentQ:
    """Own-action Q tables, q1[s, a1] and q2[s, a2]."""
    q1: np.ndarray
    q2: np.ndarray

    @classmethod
    def zeros(cls, model: MarkovGameModel, q0: float = 0.0) -> 'IndependentQ':
        n1, n2 = model.n_actions
        q = cls(np.full((model.n_states, n1), q0), np.full((model.n_states, n2), q0))
        q.q1[list(model.terminal_states)] = 0.0
        q.q2[list(model.terminal_states)] = 0.0
        return q

    def actions(self, s: int) -> Tuple[int, int]:
        return int(np.argmax(self.q1[s])), int(np.argmax(self.q2[s]))

    def policy(self, model: MarkovGameModel) -> JointPolicy:
        return JointPolicy.from_arrays(model, np.argmax(self.q1, axis=1), np.argmax(self.q2, axis=1))


def independent_update(q: IndependentQ, tr: Transition, alpha1: float, alpha2: float, gamma: float) -> IndependentQ:
    for table, a, r, alpha in ((q.q1, tr.a1, tr.r1, alpha1), (q.q2, tr.a2, tr.r2, alpha2)):
        target = r + (gamma * table[tr.s_next].max() if tr.bootstrap else 0.0)
        table[tr.s, a] = (1.0 - alpha) * table[tr.s, a] + alpha * target
    return q


def train_independent_q(model: MarkovGameModel, config: TabularConfig,
                        writer=None) -> Tuple[IndependentQ, JointPolicy, RunRecord]:
    rng, _ = make_rngs(config.seed)
    gamma = model.gamma if config.gamma is None else config.gamma
    q = IndependentQ.zeros(model, config.q0)
    n1, n2 = model.n_actions
    visits1 = np.zeros((model.n_states, n1))
    visits2 = np.zeros((model.n_states, n2))
    rate1 = build_rate(config.alpha1, config.lr_schedule, config.omega)
    rate2 = build_rate(config.alpha2, config.lr_schedule, config.omega)
    epsilon = config.epsilon_schedule()
    record = RunRecord(model.name, 'independent_q', config.seed)
    total_steps, explore_episode = 0, 0
    for episode in range(config.episodes):
        eps = epsilon(explore_episode)
        if total_steps >= config.warmup_steps:
            explore_episode += 1
        state = env_reset(model, rng)
        trs = []
        for t in range(model.horizon or 1000):
            warm = total_steps < config.warmup_steps
            a1, a2 = explore(rng, q.actions(state), model.n_actions, eps, uniform=warm)
            tr = env_step(model, state, a1, a2, rng, t)
            visits1[tr.s, tr.a1] += 1
            visits2[tr.s, tr.a2] += 1
            independent_update(q, tr, rate1(visits1[tr.s, tr.a1]), rate2(visits2[tr.s, tr.a2]), gamma)
            trs.append(tr)
            total_steps += 1
            if tr.done:
                break
            state = tr.s_next
        policy = q.policy(model)
        g1, g2 = policy[model.start_state]
        record.append(sum(tr.r1 for tr in trs), sum(tr.r2 for tr in trs),
                      model.action_names[0][g1], model.action_names[1][g2],
                      policy.on_path_hash(model), classify_episode(model, trs),
                      model.joint_name(trs[0].a1, trs[0].a2))
        log_per_step(writer, {'tag': 'independent_q', 'step': episode, 'unit': 'episode',
                              'log_interval': config.log_interval,
                              'loss_dict': {'return1': record.returns1[-1], 'return2': record.returns2[-1],
                                            'epsilon': eps}})
    policy = q.policy(model)
    record.finish(*evaluate_greedy(model, lambda s: policy[s], rng), fraction=config.convergence_fraction)
    if not record.converged:
        logging.warning('independent_q on {} seed {} did not settle on a greedy policy'.format(model.name, config.seed))
    return q, policy, record
