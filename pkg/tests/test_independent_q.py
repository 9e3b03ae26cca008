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

import numpy as np
import pytest

from stackeq.bench.experiment import load_config
from stackeq.env.envs import make_env
from stackeq.env.markov_game import Transition
from stackeq.tabular.bilevel_q import TabularConfig
from stackeq.tabular.independent_q import IndependentQ, independent_update, train_independent_q


def test_update_uses_own_action_only(counterexample_env):
    q = IndependentQ.zeros(counterexample_env)
    q.q1[0] = [1.0, 3.0]
    q.q2[0] = [2.0, 0.0]
    independent_update(q, Transition(0, 0, 1, 0, 1.0, -1.0, False), 0.5, 1.0, 0.5)
    assert q.q1[0].tolist() == [0.5 * 1.0 + 0.5 * (1.0 + 0.5 * 3.0), 3.0]
    assert q.q2[0].tolist() == [2.0, -1.0 + 0.5 * 2.0]


def test_terminal_update_does_not_bootstrap(escape_env):
    q = IndependentQ.zeros(escape_env)
    independent_update(q, Transition(0, 1, 2, 1, 10.0, 0.0, True), 1.0, 1.0, 0.9)
    assert q.q1[0].tolist() == [0.0, 10.0, 0.0]
    assert q.q2[0].tolist() == [0.0, 0.0, 0.0]


def test_policy(escape_env):
    q = IndependentQ.zeros(escape_env)
    q.q1[0, 2] = 1.0
    q.q2[0, 1] = 1.0
    assert q.actions(0) == (2, 1)
    assert q.policy(escape_env)[0] == (2, 1)


def test_training_record(escape_env):
    config = TabularConfig(episodes=300, warmup_steps=100, epsilon_episodes=100, seed=1)
    q, policy, record = train_independent_q(escape_env, config)
    assert len(record) == 300
    assert record.algorithm == 'independent_q'
    assert np.all(np.isfinite(q.q1)) and np.all(np.isfinite(q.q2))
    assert sum(record.outcome_shares.values()) == pytest.approx(1.0)
    assert record.final_outcome == escape_env.joint_name(*policy[0])


def test_maintain_misses_stackelberg_outcome(maintain_env):
    config = TabularConfig(episodes=2000, warmup_steps=500, epsilon_episodes=1000, seed=0)
    _, policy, record = train_independent_q(maintain_env, config)
    assert not record.converged_to('A-X')


@pytest.mark.slow
def test_maintain_baseline_contrast(maintain_env):
    hits = 0
    for seed in range(100):
        _, _, record = train_independent_q(maintain_env, TabularConfig(episodes=2000, warmup_steps=500,
                                                                       epsilon_episodes=1000, seed=seed))
        hits += record.converged_to('A-X')
    assert hits == 0


@pytest.mark.slow
def test_escape_baseline_often_misses_the_optimum():
    configs = load_config('escape')
    model = make_env('escape', **configs['env'])
    seeds = 100
    hits = 0
    for seed in range(seeds):
        _, _, record = train_independent_q(model, TabularConfig(**{**configs['independent_q'], 'seed': seed}))
        hits += record.converged_to('C-Z')
    assert hits / seeds <= 0.7
