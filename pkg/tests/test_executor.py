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

import pytest

from stackeq.utils.executor import Executor


@pytest.mark.parametrize('num_workers', [1, 2])
def test_results_keep_job_order(num_workers):
    assert Executor(num_workers, progress=False).run(math.factorial, [5, 3, 4, 1]) == [120, 6, 24, 1]


def test_bad_worker_count():
    with pytest.raises(AssertionError):
        Executor(0)
