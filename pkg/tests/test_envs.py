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

from stackeq.env.envs import (AUX_LANE, FASTER, IDLE, LANE_LEFT, MAIN_LANE, SLOWER, MergeConfig, classify_episode,
                              counterexample_q_tables, evaluate_greedy, grid_state, make_env, make_merge_env,
                              merge_config_of, merge_step, optimal_cell)
from stackeq.env.markov_game import MarkovGameModel, env_step, rollout
from stackeq.game.matrix_game import stackelberg_actions

LEFT, RIGHT, STAY = 0, 1, 2


def test_registry():
    for name in ('escape', 'maintain', 'grid', 'counterexample'):
        assert make_env(name).name == name
    with pytest.raises(ValueError):
        make_env('highway')


def test_grid_layout(grid_env):
    assert grid_env.n_states == 25
    assert grid_env.start_state == grid_state(1, 3)
    assert grid_env.terminal_states == frozenset([grid_state(0, 0), grid_state(4, 4)])
    assert grid_env.identical_payoffs


def test_grid_rewards(grid_env):
    tr = env_step(grid_env, grid_state(3, 4), RIGHT, STAY)
    assert (tr.s_next, tr.r1, tr.r2, tr.done) == (grid_state(4, 4), 20.0, 20.0, True)
    tr = env_step(grid_env, grid_state(1, 1), LEFT, LEFT)
    assert (tr.s_next, tr.r1, tr.done) == (grid_state(0, 0), 10.0, True)
    # walls clip, meeting off the reward squares pays nothing
    tr = env_step(grid_env, grid_state(0, 2), LEFT, RIGHT)
    assert (tr.s_next, tr.r1, tr.done) == (grid_state(0, 3), 0.0, False)
    tr = env_step(grid_env, grid_state(1, 3), RIGHT, LEFT)
    assert (tr.s_next, tr.r1, tr.done) == (grid_state(2, 2), 0.0, False)


def test_grid_classification(grid_env):
    episode = rollout(grid_env, lambda s: (RIGHT, RIGHT))
    assert classify_episode(grid_env, episode) == 'both_at_20'
    episode = rollout(grid_env, lambda s: (STAY, STAY))
    assert classify_episode(grid_env, episode) == 'none'


def test_counterexample_q_tables():
    q1, q2 = counterexample_q_tables(0.9)
    assert np.allclose(q1[0], [[0, 0], [10, -1]])
    assert np.allclose(q2[0], [[9, 10], [0, 8]])
    a1, a2 = stackelberg_actions(q1[0], q2[0])
    assert (int(a1), int(a2)) == (0, 1)
    # without the self-loop term the stage game solves to (B, A)
    q1, q2 = counterexample_q_tables(0.0)
    a1, a2 = stackelberg_actions(q1[0], q2[0])
    assert (int(a1), int(a2)) == (1, 0)


def test_optimal_cell(escape_env, maintain_env, counterexample_env, grid_env):
    assert optimal_cell(escape_env) == (0, 2, 2)
    assert optimal_cell(maintain_env) == (0, 0, 0)
    assert optimal_cell(counterexample_env) == (0, 1, 0)
    assert optimal_cell(grid_env) is None


def test_evaluate_greedy(escape_env):
    shares, return1, return2 = evaluate_greedy(escape_env, lambda s: (2, 2))
    assert shares == {'C-Z': 1.0}
    assert (return1, return2) == (30.0, 30.0)


@pytest.mark.parametrize('kwargs', [
    {'merge_point': 0},
    {'merge_point': 10},
    {'max_speed': 0},
    {'start_speeds': (3,)},
    {'start_speeds': ()},
    {'gamma': 1.0},
    {'horizon': 0},
])
def test_bad_merge_config(kwargs):
    with pytest.raises(ValueError):
        MergeConfig(**kwargs)


def test_merge_crash():
    config = MergeConfig()
    state = ((MAIN_LANE, 2, 1), (AUX_LANE, 2, 1))
    assert merge_step(config, state, IDLE, LANE_LEFT) == (None, -10.0, -10.0)


def test_merge_auxiliary_lane_ends():
    config = MergeConfig()
    state = ((MAIN_LANE, 0, 1), (AUX_LANE, 5, 1))
    nxt, r1, r2 = merge_step(config, state, IDLE, IDLE)
    assert nxt == ((MAIN_LANE, 1, 1), (MAIN_LANE, 6, 1))
    assert (r1, r2) == (0.0, 0.0)


def test_merge_passing_order():
    config = MergeConfig()
    nxt, r1, r2 = merge_step(config, ((MAIN_LANE, 9, 2), (AUX_LANE, 4, 1)), IDLE, IDLE)
    assert nxt == ((MAIN_LANE, 10, 0), (AUX_LANE, 5, 1))
    assert (r1, r2) == (50.0, 0.0)
    nxt, r1, r2 = merge_step(config, ((MAIN_LANE, 10, 0), (MAIN_LANE, 9, 1)), IDLE, IDLE)
    assert nxt is None
    assert (r1, r2) == (0.0, 10.0)
    # passing together: further ahead first
    _, r1, r2 = merge_step(config, ((MAIN_LANE, 8, 2), (MAIN_LANE, 9, 2)), IDLE, IDLE)
    assert (r1, r2) == (10.0, 50.0)


def test_merge_model(merge_env):
    terminal = merge_env.n_states - 1
    assert merge_env.terminal_states == frozenset([terminal])
    assert merge_env.feature_dim == 6
    assert len(merge_env.starts) == 4
    assert sum(p for _, p in merge_env.starts) == pytest.approx(1.0)


def test_merge_outcomes(merge_env):
    shares, return1, return2 = evaluate_greedy(merge_env, lambda s: (FASTER, FASTER))
    assert shares == {'crash': pytest.approx(1.0)}
    assert (return1, return2) == pytest.approx((-10.0, -10.0))
    shares, return1, return2 = evaluate_greedy(merge_env, lambda s: (FASTER, SLOWER))
    assert shares == {'leader_first': pytest.approx(1.0)}
    assert (return1, return2) == pytest.approx((50.0, 0.0))


def test_merge_outcomes_follow_the_model_rewards():
    model = make_merge_env(MergeConfig(first_reward=100.0, crash_reward=-20.0))
    assert merge_config_of(model).first_reward == 100.0
    episode = rollout(model, lambda s: (FASTER, FASTER))
    assert (episode[-1].r1, episode[-1].r2) == (-20.0, -20.0)
    assert classify_episode(model, episode) == 'crash'
    episode = rollout(model, lambda s: (FASTER, SLOWER))
    assert classify_episode(model, episode) == 'leader_first'
    assert sum(tr.r1 for tr in episode) == 100.0
    shares, _, _ = evaluate_greedy(model, lambda s: (SLOWER, FASTER))
    assert shares == {'follower_first': pytest.approx(1.0)}


def test_merge_outcomes_with_equal_pass_rewards():
    model = make_merge_env(MergeConfig(first_reward=10.0, second_reward=10.0))
    shares, _, _ = evaluate_greedy(model, lambda s: (FASTER, SLOWER))
    assert shares == {'leader_first': pytest.approx(1.0)}


def test_merge_config_survives_json():
    config = MergeConfig(length=8, merge_point=4, crash_reward=-5.0)
    model = MarkovGameModel.from_json(make_merge_env(config).to_json())
    assert merge_config_of(model) == config
    episode = rollout(model, lambda s: (FASTER, FASTER))
    assert classify_episode(model, episode) == 'crash'


def test_classify_empty_episode(escape_env):
    with pytest.raises(ValueError):
        classify_episode(escape_env, [])
