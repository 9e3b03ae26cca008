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
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stackeq.game.matrix_game import (MatrixGame, cooperation_level, enumerate_pure_nash, find_global_optimal_point,
                                      follower_best_responses, load_game, pareto_dominates, pearson,
                                      sample_random_game, save_game, solve_minimax, solve_stackelberg,
                                      stackelberg_actions)


def small_games(max_size=4):
    shapes = st.tuples(st.integers(1, max_size), st.integers(1, max_size))
    return shapes.flatmap(lambda shape: st.tuples(
        arrays(np.int64, shape, elements=st.integers(-5, 5)),
        arrays(np.int64, shape, elements=st.integers(-5, 5))))


def test_escape_stackelberg(escape_game):
    se = solve_stackelberg(escape_game)
    assert (se.leader_action, se.follower_action) == (2, 2)
    assert (se.leader_payoff, se.follower_payoff) == (30.0, 30.0)


def test_maintain_stackelberg(maintain_game):
    se = solve_stackelberg(maintain_game)
    assert (se.leader_action, se.follower_action) == (0, 0)
    assert (se.leader_payoff, se.follower_payoff) == (20.0, 15.0)


def test_escape_nash_strict_and_weak(escape_game):
    assert enumerate_pure_nash(escape_game).points == ((0, 0), (2, 2))
    assert enumerate_pure_nash(escape_game, strict=False).points == ((0, 0), (1, 1), (2, 2))


def test_maintain_nash(maintain_game):
    nash = enumerate_pure_nash(maintain_game)
    assert nash.points == ((1, 1), (2, 2))
    assert (0, 0) not in nash


def test_maintain_stackelberg_pareto_dominates_every_nash(maintain_game):
    se = solve_stackelberg(maintain_game)
    for point in enumerate_pure_nash(maintain_game):
        assert pareto_dominates((se.leader_payoff, se.follower_payoff),
                                (maintain_game.u1[point], maintain_game.u2[point]))


def test_follower_ties_go_to_leader():
    # follower indifferent in row 0; the leader prefers column 1
    game = MatrixGame([[1, 5], [0, 0]], [[2, 2], [0, 1]])
    assert follower_best_responses(game.u1, game.u2).tolist() == [1, 1]
    se = solve_stackelberg(game)
    assert (se.leader_action, se.follower_action) == (0, 1)


def test_leader_ties_go_to_lowest_index():
    game = MatrixGame([[3, 0], [3, 0]], [[1, 0], [1, 0]])
    assert solve_stackelberg(game).leader_action == 0


def test_one_by_one_game():
    game = MatrixGame([[4.0]], [[-2.0]])
    se = solve_stackelberg(game)
    assert (se.leader_action, se.follower_action, se.leader_payoff, se.follower_payoff) == (0, 0, 4.0, -2.0)
    assert enumerate_pure_nash(game).points == ((0, 0),)


def test_minimax(maintain_game):
    game = MatrixGame([[1, -3], [0, 2], [-1, 5]], [[0, 0], [0, 0], [0, 0]])
    assert solve_minimax(game) == (1, 0.0)
    assert solve_minimax(maintain_game) == (0, 0.0)


def test_cooperation_level(escape_game):
    assert cooperation_level(escape_game) == pytest.approx(1.0)
    zero_sum = MatrixGame([[1, -2], [3, 0]], [[-1, 2], [-3, 0]])
    assert cooperation_level(zero_sum) == pytest.approx(-1.0)


def test_cooperation_level_zero_variance():
    with pytest.raises(ValueError):
        cooperation_level(MatrixGame([[1, 1], [1, 1]], [[0, 1], [2, 3]]))
    with pytest.raises(ValueError):
        pearson(np.arange(4.0), np.zeros(4))


def test_global_optimal_point(escape_game, maintain_game):
    assert find_global_optimal_point(escape_game) == (2, 2)
    assert find_global_optimal_point(maintain_game) is None


def test_pareto_dominates():
    assert pareto_dominates((20, 15), (10, 5))
    assert not pareto_dominates((20, 15), (20, 15))
    assert not pareto_dominates((20, 4), (10, 5))


@pytest.mark.parametrize('u1, u2', [
    ([[1, 2]], [[1, 2], [3, 4]]),
    ([1, 2], [1, 2]),
    (np.zeros((0, 2)), np.zeros((0, 2))),
    ([[1, np.nan]], [[1, 2]]),
])
def test_bad_games(u1, u2):
    with pytest.raises(ValueError):
        MatrixGame(u1, u2)


def test_game_json(tmp_path, maintain_game):
    path = tmp_path / 'maintain.json'
    save_game(maintain_game, path)
    game = load_game(path)
    assert np.array_equal(game.u1, maintain_game.u1) and np.array_equal(game.u2, maintain_game.u2)
    assert game.action_names2 == ('X', 'Y', 'Z')


def test_random_game_extremes(rng):
    game = sample_random_game(6, 1.0, rng)
    assert np.array_equal(game.u1, game.u2)
    game = sample_random_game(6, -1.0, rng)
    assert np.allclose(game.u2, -game.u1)
    with pytest.raises(ValueError):
        sample_random_game(6, 1.5, rng)


def test_independent_random_games_are_uncorrelated(rng):
    levels = [cooperation_level(sample_random_game(20, 0.0, rng)) for _ in range(20)]
    assert abs(np.mean(levels)) < 0.05


def test_random_game_is_seeded():
    first = sample_random_game(5, 0.3, np.random.default_rng(9))
    second = sample_random_game(5, 0.3, np.random.default_rng(9))
    assert np.array_equal(first.u1, second.u1) and np.array_equal(first.u2, second.u2)
    third = sample_random_game(5, 0.3, np.random.default_rng(10))
    assert not np.array_equal(first.u1, third.u1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 10.0), st.floats(-5.0, 5.0), st.floats(0.1, 10.0),
       st.floats(-5.0, 5.0))
def test_cooperation_level_affine_invariance(seed, a1, b1, a2, b2):
    game = sample_random_game(4, 0.3, np.random.default_rng(seed))
    moved = MatrixGame(a1 * game.u1 + b1, a2 * game.u2 + b2)
    assert cooperation_level(moved) == pytest.approx(cooperation_level(game), abs=1e-9)
    assert cooperation_level(MatrixGame(game.u1, -a2 * game.u2)) == pytest.approx(-cooperation_level(game), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(small_games(), st.integers(1, 4), st.integers(-6, 6), st.integers(1, 4), st.integers(-6, 6))
def test_stackelberg_affine_invariance(game, a1, b1, a2, b2):
    u1, u2 = game
    base = solve_stackelberg(MatrixGame(u1, u2))
    moved = solve_stackelberg(MatrixGame(a1 * u1 + b1, a2 * u2 + b2))
    assert (base.leader_action, base.follower_action) == (moved.leader_action, moved.follower_action)


@settings(max_examples=60, deadline=None)
@given(small_games(), st.booleans())
def test_nash_matches_definition(game, strict):
    u1, u2 = game
    expected = []
    for i in range(u1.shape[0]):
        for j in range(u1.shape[1]):
            leader = u1[i, j] == u1[:, j].max()
            follower = u2[i, j] == u2[i, :].max()
            if strict:
                leader = leader and np.sum(u1[:, j] == u1[i, j]) == 1
                follower = follower and np.sum(u2[i, :] == u2[i, j]) == 1
            if leader and follower:
                expected.append((i, j))
    assert list(enumerate_pure_nash(MatrixGame(u1, u2), strict=strict)) == expected


@settings(max_examples=60, deadline=None)
@given(small_games())
def test_stackelberg_is_leader_optimal(game):
    u1, u2 = game
    se = solve_stackelberg(MatrixGame(u1, u2))
    assert u2[se.leader_action, se.follower_action] == u2[se.leader_action].max()
    for a1 in range(u1.shape[0]):
        replies = np.flatnonzero(u2[a1] == u2[a1].max())
        assert u1[a1, replies].max() <= se.leader_payoff


def test_batched_stage_actions_match_single(rng):
    games = [sample_random_game(int(rng.integers(1, 6)), float(rng.uniform(-1, 1)), rng) for _ in range(100)]
    for game in games:
        se = solve_stackelberg(game)
        a1, a2 = stackelberg_actions(game.u1[None], game.u2[None])
        assert (int(a1[0]), int(a2[0])) == (se.leader_action, se.follower_action)
    u1 = rng.standard_normal((100, 4, 3))
    u2 = rng.standard_normal((100, 4, 3))
    a1, a2 = stackelberg_actions(u1, u2)
    for k in range(100):
        se = solve_stackelberg(MatrixGame(u1[k], u2[k]))
        assert (a1[k], a2[k]) == (se.leader_action, se.follower_action)
