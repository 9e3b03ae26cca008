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
"""Per-episode log of one training run."""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from stackeq.utils.file_utils import read_csv, read_json, write_csv, write_json

RECORD_HEADER = ('episode', 'ep_return_1', 'ep_return_2', 'greedy_a1', 'greedy_a2', 'policy',
                 'outcome', 'behaviour', 'q1_opt', 'q2_opt')


def convergence_verdict(policies: List[str], fraction: float = 0.1) -> bool:
    """Whether the greedy policy stayed the same over the last ``fraction`` of episodes."""
    if len(policies) == 0:
        return False
    window = max(1, int(math.ceil(len(policies) * fraction)))
    tail = policies[-window:]
    return all(p == tail[-1] for p in tail)


@dataclass
class RunRecord:
    """Learning trace of one (environment, algorithm, seed) run.

    Per episode: the behaviour returns, the greedy joint action at the start
    state, a hash of the whole greedy joint policy, the outcome label of the
    behaviour episode, its first joint action and optionally the learned
    values of the designated optimal cell.
    """
    env_name: str
    algorithm: str
    seed: int
    returns1: List[float] = field(default_factory=list)
    returns2: List[float] = field(default_factory=list)
    greedy_a1: List[str] = field(default_factory=list)
    greedy_a2: List[str] = field(default_factory=list)
    policies: List[str] = field(default_factory=list)
    outcomes: List[str] = field(default_factory=list)
    behaviour: List[str] = field(default_factory=list)
    q1_opt: List[float] = field(default_factory=list)
    q2_opt: List[float] = field(default_factory=list)
    final_outcome: str = ''
    outcome_shares: Dict[str, float] = field(default_factory=dict)
    final_return1: float = float('nan')
    final_return2: float = float('nan')
    converged: bool = False
    diverged: bool = False

    def __len__(self):
        return len(self.returns1)

    def append(self, return1: float, return2: float, greedy_a1: str, greedy_a2: str, policy: str,
               outcome: str, behaviour: str, q_opt: Optional[tuple] = None):
        self.returns1.append(float(return1))
        self.returns2.append(float(return2))
        self.greedy_a1.append(greedy_a1)
        self.greedy_a2.append(greedy_a2)
        self.policies.append(policy)
        self.outcomes.append(outcome)
        self.behaviour.append(behaviour)
        q1, q2 = q_opt if q_opt is not None else (float('nan'), float('nan'))
        self.q1_opt.append(float(q1))
        self.q2_opt.append(float(q2))

    def finish(self, outcome_shares: Dict[str, float], final_return1: float, final_return2: float,
               fraction: float = 0.1):
        """Close the record with the greedy evaluation; the most likely outcome becomes ``final_outcome``."""
        self.outcome_shares = dict(sorted(outcome_shares.items()))
        self.final_outcome = max(self.outcome_shares, key=self.outcome_shares.get) if outcome_shares else ''
        self.final_return1 = float(final_return1)
        self.final_return2 = float(final_return2)
        self.converged = convergence_verdict(self.policies, fraction)
        self.diverged = not all(math.isfinite(v) for v in self.returns1 + self.returns2)

    def converged_to(self, label: str) -> bool:
        return self.converged and self.final_outcome == label

    def rows(self):
        for i in range(len(self)):
            yield (i, self.returns1[i], self.returns2[i], self.greedy_a1[i], self.greedy_a2[i],
                   self.policies[i], self.outcomes[i], self.behaviour[i], self.q1_opt[i], self.q2_opt[i])

    def meta(self):
        return {'env': self.env_name, 'algorithm': self.algorithm, 'seed': self.seed,
                'episodes': len(self), 'final_outcome': self.final_outcome,
                'outcome_shares': self.outcome_shares,
                'final_return1': self.final_return1, 'final_return2': self.final_return2,
                'converged': self.converged, 'diverged': self.diverged}

    def write(self, csv_path, meta_path=None):
        write_csv(csv_path, RECORD_HEADER, self.rows())
        if meta_path is not None:
            write_json(meta_path, self.meta())

    @classmethod
    def read(cls, csv_path, meta_path) -> 'RunRecord':
        meta = read_json(meta_path)
        record = cls(meta['env'], meta['algorithm'], int(meta['seed']))
        for row in read_csv(csv_path):
            record.append(float(row['ep_return_1']), float(row['ep_return_2']), row['greedy_a1'],
                          row['greedy_a2'], row['policy'], row['outcome'], row['behaviour'],
                          (float(row['q1_opt']), float(row['q2_opt'])))
        record.final_outcome = meta['final_outcome']
        record.outcome_shares = {k: float(v) for k, v in meta.get('outcome_shares', {}).items()}
        record.final_return1 = float(meta['final_return1'])
        record.final_return2 = float(meta['final_return2'])
        record.converged = bool(meta['converged'])
        record.diverged = bool(meta['diverged'])
        return record
