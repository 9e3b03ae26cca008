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

from stackeq.utils.scheduler import ConstantRate, ExponentialSchedule, LinearSchedule, VisitCountRate, build_rate


def test_linear_schedule():
    schedule = LinearSchedule(1.0, 0.05, 100, start=10)
    assert schedule(0) == 1.0
    assert schedule(10) == 1.0
    assert schedule(60) == pytest.approx(0.525)
    assert schedule(110) == 0.05
    assert schedule(10 ** 6) == 0.05


def test_linear_schedule_without_steps():
    schedule = LinearSchedule(1.0, 0.0, 0)
    assert schedule(0) == 1.0
    assert schedule(1) == 0.0


def test_linear_schedule_step():
    schedule = LinearSchedule(1.0, 0.0, 4)
    assert [schedule.step() for _ in range(5)] == pytest.approx([0.75, 0.5, 0.25, 0.0, 0.0])


def test_exponential_schedule_is_geometric():
    schedule = ExponentialSchedule(1.0, 0.01, 100)
    assert schedule(50) == pytest.approx(0.1)
    assert schedule(25) == pytest.approx(math.sqrt(0.1))
    with pytest.raises(AssertionError):
        ExponentialSchedule(0.0, 1.0, 10)


def test_visit_count_rate():
    rate = VisitCountRate(0.5, omega=0.8)
    assert rate(0) == 0.5
    assert rate(1) == 0.5
    assert rate(32) == pytest.approx(0.5 / 16.0)
    with pytest.raises(AssertionError):
        VisitCountRate(0.5, omega=0.5)


def test_build_rate():
    assert isinstance(build_rate(0.1), ConstantRate)
    assert build_rate(0.1)(1000) == 0.1
    assert isinstance(build_rate(0.1, 'visit', 1.0), VisitCountRate)
    assert build_rate(0.1, 'visit', 1.0)(4) == pytest.approx(0.025)
    with pytest.raises(ValueError):
        build_rate(0.1, 'cosine')
