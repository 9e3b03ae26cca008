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
"""Plot-ready learning curves; plotting itself is left to external tools."""

import os
from typing import List, Sequence

import numpy as np

from stackeq.utils.file_utils import ensure_dir, write_csv
from stackeq.utils.run_record import RunRecord

SERIES = ('returns1', 'returns2', 'q1_opt', 'q2_opt')
CURVE_HEADER = ('episode', 'value', 'std')


def _stack(records: Sequence[RunRecord], name: str) -> np.ndarray:
    """(runs, episodes) array padded with NaN where a run stopped early."""
    length = max(len(r) for r in records)
    out = np.full((len(records), length), np.nan)
    for i, r in enumerate(records):
        values = getattr(r, name)
        out[i, :len(values)] = values
    return out


def running_frequencies(labels: Sequence[str], vocabulary: Sequence[str], window: int = 100) -> np.ndarray:
    """Share of each label among the last ``window`` entries; the window grows from 1 at the start."""
    index = {label: i for i, label in enumerate(vocabulary)}
    counts = np.zeros((len(labels) + 1, len(vocabulary)))
    for t, label in enumerate(labels):
        counts[t + 1] = counts[t]
        counts[t + 1, index[label]] += 1
    out = np.zeros((len(labels), len(vocabulary)))
    for t in range(len(labels)):
        lo = max(0, t + 1 - window)
        out[t] = (counts[t + 1] - counts[lo]) / (t + 1 - lo)
    return out


def emit_plot_data(records: Sequence[RunRecord], out_dir: str, window: int = 100) -> List[str]:
    """Write one ``episode,value,std`` CSV per series plus the joint-action frequency table.

    Returns:
        List[str]: paths written.
    """
    if len(records) == 0:
        raise ValueError('no run records to emit plot data for')
    ensure_dir(out_dir)
    written = []
    for name in SERIES:
        values = _stack(records, name)
        if values.size == 0 or np.all(np.isnan(values)):
            continue
        with np.errstate(invalid='ignore'):
            mean = np.nanmean(values, axis=0)
            std = np.nanstd(values, axis=0)
        path = os.path.join(out_dir, '{}.csv'.format(name))
        write_csv(path, CURVE_HEADER, [(t, float(m), float(s)) for t, (m, s) in enumerate(zip(mean, std))])
        written.append(path)

    vocabulary = sorted(set(label for r in records for label in r.behaviour))
    if len(vocabulary) > 0:
        length = max(len(r) for r in records)
        total = np.zeros((length, len(vocabulary)))
        runs = np.zeros(length)
        for r in records:
            freq = running_frequencies(r.behaviour, vocabulary, window)
            total[:len(freq)] += freq
            runs[:len(freq)] += 1
        path = os.path.join(out_dir, 'joint_action_frequency.csv')
        write_csv(path, ('episode',) + tuple(vocabulary),
                  [(t,) + tuple(float(v) for v in total[t] / runs[t]) for t in range(length)])
        written.append(path)
    return written
