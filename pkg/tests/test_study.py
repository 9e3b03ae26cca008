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

from stackeq.game.study import (STUDY_HEADER, StudyConfig, monte_carlo_expected_max, run_trial, se_vs_ne_study,
                                write_study_csv)
from stackeq.utils.file_utils import read_csv


def test_trials_are_order_independent():
    assert run_trial(5, 0.3, 7, 2, 11) == run_trial(5, 0.3, 7, 2, 11)
    assert run_trial(5, 0.3, 7, 2, 11) != run_trial(5, 0.3, 7, 2, 12)


def test_threads_match_serial():
    serial = se_vs_ne_study(StudyConfig(size_n=4, covariances=(0.0, 0.5), trials=50, seed=3))
    threaded = se_vs_ne_study(StudyConfig(size_n=4, covariances=(0.0, 0.5), trials=50, seed=3, num_workers=4))
    assert serial == threaded


def test_identical_payoffs_study():
    result = se_vs_ne_study(StudyConfig(size_n=5, covariances=(1.0,), trials=100, seed=0))
    row = result.row(1.0)
    assert row.se_leader == pytest.approx(row.se_follower)
    # the global maximum cell of an identical-payoff game is always a strict equilibrium
    assert row.ne_exists_frac == 1.0
    assert row.ne_count >= 1.0
    assert row.se_leader >= row.ne_leader


def test_nash_count_grows_with_covariance():
    result = se_vs_ne_study(StudyConfig(size_n=10, covariances=(-1.0, 1.0), trials=200, seed=0))
    assert result.row(-1.0).ne_count < result.row(1.0).ne_count


def test_nash_count_is_lower_when_payoffs_oppose():
    result = se_vs_ne_study(StudyConfig(size_n=10, covariances=(-0.9, 0.9), trials=500, seed=1))
    assert result.row(-0.9).ne_count < result.row(0.9).ne_count


@pytest.mark.parametrize('kwargs', [
    {'size_n': 0},
    {'trials': 0},
    {'covariances': ()},
    {'covariances': (0.0, 1.2)},
    {'seed': -1},
])
def test_bad_study_config(kwargs):
    with pytest.raises(ValueError):
        StudyConfig(**kwargs)


def test_study_csv(tmp_path):
    result = se_vs_ne_study(StudyConfig(size_n=3, covariances=(0.0, 0.9), trials=20))
    path = tmp_path / 'study.csv'
    write_study_csv(result, path)
    rows = read_csv(path)
    assert tuple(rows[0].keys()) == STUDY_HEADER
    assert [float(r['covariance']) for r in rows] == [0.0, 0.9]


def test_expected_max_of_one_normal():
    assert monte_carlo_expected_max(1, 200000, np.random.default_rng(0)) == pytest.approx(0.0, abs=0.01)
    assert monte_carlo_expected_max(2, 200000, np.random.default_rng(0)) == pytest.approx(1 / np.sqrt(np.pi), abs=0.01)


@pytest.mark.slow
def test_stackelberg_vs_nash_acceptance():
    config = StudyConfig(size_n=10, covariances=(-1.0, -0.5, 0.0, 0.5, 0.9, 1.0), trials=2000, seed=0)
    result = se_vs_ne_study(config)
    oracle = monte_carlo_expected_max(100, 200000, np.random.default_rng(1))
    assert result.row(1.0).se_leader == pytest.approx(oracle, abs=0.05)
    for c in (0.9, 1.0):
        row = result.row(c)
        assert min(row.se_leader, row.se_follower) > max(row.ne_leader, row.ne_follower)
    counts = [result.row(c).ne_count for c in (-0.5, 0.0, 0.5, 0.9)]
    assert all(a < b for a, b in zip(counts, counts[1:]))
