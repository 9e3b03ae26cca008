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
"""Monte-Carlo comparison of Stackelberg and average pure Nash payoffs."""

from concurrent import futures
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from stackeq.game.matrix_game import enumerate_pure_nash, sample_random_game, solve_stackelberg
from stackeq.utils.file_utils import logging, write_csv

STUDY_HEADER = ('covariance', 'se_leader', 'se_follower', 'ne_leader', 'ne_follower', 'ne_count', 'ne_exists_frac')


@dataclass(frozen=True)
class StudyConfig:
    size_n: int = 10
    covariances: Tuple[float, ...] = (-1.0, -0.5, 0.0, 0.5, 0.9, 1.0)
    trials: int = 2000
    seed: int = 0
    num_workers: int = 1

    def __post_init__(self):
        if self.size_n < 1:
            raise ValueError('size_n should be >= 1, got {}'.format(self.size_n))
        if self.trials < 1:
            raise ValueError('trials should be >= 1, got {}'.format(self.trials))
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError('seed should be a 64-bit unsigned integer, got {}'.format(self.seed))
        covariances = tuple(float(c) for c in self.covariances)
        if len(covariances) == 0:
            raise ValueError('at least one covariance is needed')
        for c in covariances:
            if not -1.0 <= c <= 1.0:
                raise ValueError('covariance should lie in [-1, 1], got {}'.format(c))
        object.__setattr__(self, 'covariances', covariances)


@dataclass(frozen=True)
class StudyRow:
    covariance: float
    se_leader: float
    se_follower: float
    ne_leader: float
    ne_follower: float
    ne_count: float
    ne_exists_frac: float

    def as_tuple(self):
        return (self.covariance, self.se_leader, self.se_follower, self.ne_leader,
                self.ne_follower, self.ne_count, self.ne_exists_frac)


@dataclass(frozen=True)
class StudyResult:
    size_n: int
    trials: int
    rows: Tuple[StudyRow, ...] = field(default_factory=tuple)

    def row(self, covariance: float) -> StudyRow:
        for r in self.rows:
            if r.covariance == covariance:
                return r
        raise KeyError(covariance)


def run_trial(size_n: int, covariance: float, seed: int, level: int, trial: int):
    """One sampled game: SE payoffs, mean payoffs over its pure NEs, NE count.

    Each trial owns a generator derived from (seed, level, trial), so the
    result does not depend on the order trials are run in.
    """
    rng = np.random.default_rng([seed, level, trial])
    game = sample_random_game(size_n, covariance, rng)
    se = solve_stackelberg(game)
    nash = enumerate_pure_nash(game)
    if len(nash) > 0:
        ne1 = float(np.mean([game.u1[p] for p in nash]))
        ne2 = float(np.mean([game.u2[p] for p in nash]))
    else:
        ne1, ne2 = None, None
    return se.leader_payoff, se.follower_payoff, ne1, ne2, len(nash)


def aggregate(covariance: float, outcomes: Sequence) -> StudyRow:
    se1 = np.array([o[0] for o in outcomes])
    se2 = np.array([o[1] for o in outcomes])
    counts = np.array([o[4] for o in outcomes], dtype=np.float64)
    with_ne = [o for o in outcomes if o[2] is not None]
    if len(with_ne) > 0:
        ne1 = float(np.mean([o[2] for o in with_ne]))
        ne2 = float(np.mean([o[3] for o in with_ne]))
    else:
        logging.warning('no trial at covariance {} had a pure NE'.format(covariance))
        ne1, ne2 = float('nan'), float('nan')
    return StudyRow(covariance=float(covariance),
                    se_leader=float(se1.mean()),
                    se_follower=float(se2.mean()),
                    ne_leader=ne1,
                    ne_follower=ne2,
                    ne_count=float(counts.mean()),
                    ne_exists_frac=float(np.mean(counts > 0)))


def se_vs_ne_study(config: StudyConfig, progress: bool = False) -> StudyResult:
    rows: List[StudyRow] = []
    for level, covariance in enumerate(config.covariances):
        args = [(config.size_n, covariance, config.seed, level, t) for t in range(config.trials)]
        if config.num_workers > 1:
            with futures.ThreadPoolExecutor(max_workers=config.num_workers) as pool:
                outcomes = list(pool.map(lambda a: run_trial(*a), args))
        else:
            outcomes = [run_trial(*a) for a in tqdm(args, disable=not progress,
                                                    desc='covariance {}'.format(covariance))]
        row = aggregate(covariance, outcomes)
        logging.info('covariance {} se ({:.3f}, {:.3f}) ne ({:.3f}, {:.3f}) count {:.3f}'.format(
            covariance, row.se_leader, row.se_follower, row.ne_leader, row.ne_follower, row.ne_count))
        rows.append(row)
    return StudyResult(config.size_n, config.trials, tuple(rows))


def monte_carlo_expected_max(k: int, trials: int, rng: Optional[np.random.Generator] = None) -> float:
    """Monte-Carlo estimate of E[max of k i.i.d. standard normals]."""
    rng = rng if rng is not None else np.random.default_rng(0)
    return float(rng.standard_normal((trials, k)).max(axis=1).mean())


def write_study_csv(result: StudyResult, path):
    write_csv(path, STUDY_HEADER, [r.as_tuple() for r in result.rows])
