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

import os

import numpy as np
import pytest

from stackeq.bench.plot_data import emit_plot_data, running_frequencies
from stackeq.utils.file_utils import read_csv
from stackeq.utils.run_record import RunRecord


def constant_record(seed, episodes=5, behaviour='C-Z'):
    record = RunRecord('escape', 'bilevel_q', seed)
    for _ in range(episodes):
        record.append(30.0, 30.0, 'C', 'Z', 'p', behaviour, behaviour)
    return record


def test_running_frequencies_window_grows():
    freq = running_frequencies(['a', 'b', 'b', 'b'], ['a', 'b'], window=2)
    assert np.allclose(freq, [[1.0, 0.0], [0.5, 0.5], [0.0, 1.0], [0.0, 1.0]])
    freq = running_frequencies(['a', 'b', 'b'], ['a', 'b'], window=100)
    assert np.allclose(freq[-1], [1.0 / 3.0, 2.0 / 3.0])


def test_constant_runs_have_zero_spread(tmp_path):
    out = str(tmp_path / 'curves')
    written = emit_plot_data([constant_record(0), constant_record(1)], out)
    assert os.path.join(out, 'returns1.csv') in written
    # q-values of the optimal cell were never recorded
    assert os.path.join(out, 'q1_opt.csv') not in written
    rows = read_csv(os.path.join(out, 'returns1.csv'))
    assert len(rows) == 5
    assert all(float(r['value']) == 30.0 and float(r['std']) == 0.0 for r in rows)


def test_ragged_runs_and_frequency_table(tmp_path):
    out = str(tmp_path / 'curves')
    emit_plot_data([constant_record(0, 4, 'A-X'), constant_record(1, 2, 'C-Z')], out)
    rows = read_csv(os.path.join(out, 'joint_action_frequency.csv'))
    assert len(rows) == 4
    assert float(rows[0]['A-X']) == pytest.approx(0.5)
    assert float(rows[3]['A-X']) == pytest.approx(1.0)
    assert len(read_csv(os.path.join(out, 'returns2.csv'))) == 4


def test_empty_records():
    with pytest.raises(ValueError):
        emit_plot_data([], 'unused')
