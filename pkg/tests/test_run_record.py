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

import math

from stackeq.utils.run_record import RunRecord, convergence_verdict


def make_record(policies, returns=None):
    record = RunRecord('escape', 'bilevel_q', 7)
    for i, policy in enumerate(policies):
        r = returns[i] if returns is not None else float(i)
        record.append(r, r, 'C', 'Z', policy, 'C-Z', 'C-Z', (30.0, 30.0))
    return record


def test_convergence_verdict():
    assert convergence_verdict(['a'] * 9 + ['b'])
    assert not convergence_verdict(['a'] * 18 + ['b', 'a'])
    assert convergence_verdict(['b'] * 18 + ['a', 'a'])
    assert not convergence_verdict([])
    assert convergence_verdict(['a', 'b'], fraction=0.5)


def test_finish_takes_the_most_likely_outcome():
    record = make_record(['p'] * 10)
    record.finish({'C-Z': 0.7, 'A-X': 0.3}, 30.0, 30.0)
    assert record.final_outcome == 'C-Z'
    assert record.converged and not record.diverged
    assert record.converged_to('C-Z')
    assert not record.converged_to('A-X')


def test_unsettled_run_does_not_count():
    record = make_record(['p'] * 18 + ['q', 'p'])
    record.finish({'C-Z': 1.0}, 30.0, 30.0)
    assert not record.converged
    assert not record.converged_to('C-Z')


def test_nan_returns_mark_divergence():
    record = make_record(['p'] * 3, returns=[1.0, float('nan'), 2.0])
    record.finish({'C-Z': 1.0}, 30.0, 30.0)
    assert record.diverged


def test_write_read(tmp_path):
    record = make_record(['p', 'q', 'q'])
    record.append(0.0, 0.0, 'A', 'X', 'q', 'A-X', 'A-X')
    record.finish({'A-X': 0.25, 'C-Z': 0.75}, 22.5, 22.5)
    csv_path, meta_path = str(tmp_path / 'seed_7.csv'), str(tmp_path / 'seed_7.json')
    record.write(csv_path, meta_path)
    loaded = RunRecord.read(csv_path, meta_path)
    assert loaded.meta() == record.meta()
    assert loaded.policies == record.policies
    assert loaded.returns1 == record.returns1
    assert loaded.q1_opt[:3] == [30.0] * 3
    assert math.isnan(loaded.q1_opt[3])
    assert len(loaded) == 4


def test_meta():
    record = make_record(['p'])
    record.finish({}, 0.0, 0.0)
    assert record.final_outcome == ''
    assert record.meta()['episodes'] == 1
    assert record.meta()['seed'] == 7
