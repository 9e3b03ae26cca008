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
"""Check that a bi-level Bellman fixed point need not solve the bi-level problem."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from stackeq.env.envs import counterexample_q_tables, make_counterexample_env
from stackeq.env.markov_game import birl_oracle
from stackeq.game.matrix_game import stackelberg_actions

RESIDUAL_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class CounterexampleReport:
    gamma: float
    checks: List[Check] = field(default_factory=list)
    stage_solution: Tuple[str, str] = ('', '')
    oracle_values: Tuple[float, float] = (float('nan'), float('nan'))
    residual: float = float('nan')

    @property
    def passed(self) -> bool:
        return len(self.checks) > 0 and all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def text(self) -> str:
        lines = ['counterexample game, gamma {}'.format(self.gamma)]
        for c in self.checks:
            lines.append('{} {}: {}'.format('PASS' if c.passed else 'FAILED', c.name, c.detail))
        if self.passed:
            lines.append('the stage-wise Stackelberg fixed point (A, B) pays (0, 10) while the '
                         'bi-level optimum (B, A) pays the leader 10: a bi-level Bellman fixed '
                         'point need not solve the bi-level problem')
        else:
            lines.append('verification FAILED')
        return '\n'.join(lines)


def verify_counterexample(gamma: float = 0.9,
                          q_tables: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> CounterexampleReport:
    """Run the three checks on the counterexample game.

    1. ``q_tables`` (by default the Q-values of joint policy (A, B)) have zero
       Bellman residual under that policy.
    2. The Stackelberg solution of their stage game at s1 is (A, B).
    3. The exact bi-level solution has the leader play B for payoff (10, 0).
    """
    model = make_counterexample_env(gamma)
    q1, q2 = q_tables if q_tables is not None else counterexample_q_tables(gamma)
    q1, q2 = np.asarray(q1, dtype=np.float64), np.asarray(q2, dtype=np.float64)
    report = CounterexampleReport(gamma)
    s1, a, b = model.start_state, 0, 1

    v1, v2 = np.zeros(model.n_states), np.zeros(model.n_states)
    v1[s1], v2[s1] = q1[s1, a, b], q2[s1, a, b]
    residual = 0.0
    for q, v, agent in ((q1, v1, 0), (q2, v2, 1)):
        backup = model.reward_table(agent) + model.gamma * model.expected_next(v)
        live = list(model.nonterminal_states)
        residual = max(residual, float(np.max(np.abs(q[live] - backup[live]))))
    report.residual = residual
    report.checks.append(Check('bellman residual', residual <= RESIDUAL_TOLERANCE,
                               'max |Q - T Q| under (A, B) = {:.3e}'.format(residual)))

    l1, l2 = stackelberg_actions(q1[s1], q2[s1])
    report.stage_solution = (model.action_names[0][int(l1)], model.action_names[1][int(l2)])
    report.checks.append(Check('stage stackelberg', (int(l1), int(l2)) == (a, b),
                               'stage game at s1 solves to {}'.format(model.joint_name(int(l1), int(l2)))))

    policy, value1, value2 = birl_oracle(model)
    report.oracle_values = (value1, value2)
    ok = (policy.leader(s1) == b and abs(value1 - 10.0) <= RESIDUAL_TOLERANCE
          and abs(value2) <= RESIDUAL_TOLERANCE)
    report.checks.append(Check('bi-level optimum', ok, 'oracle plays {} for ({:.6f}, {:.6f})'.format(
        model.joint_name(*policy[s1]), value1, value2)))
    return report
