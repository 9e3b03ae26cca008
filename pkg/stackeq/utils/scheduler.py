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
"""Annealing schedules for exploration rates, temperatures and learning rates."""

import math
from typing import Union


class LinearSchedule:
    """Linear annealing with a hold at both ends.

        value(step) = initial                         for step <= start
                      initial + (final - initial) * (step - start) / steps
                                                      for start < step < start + steps
                      final                           afterwards

    With steps == 0 the schedule jumps to ``final`` right after ``start``.
    """

    def __init__(self, initial: float, final: float, steps: int, start: int = 0):
        assert steps >= 0, 'steps should be non-negative, got {}'.format(steps)
        self.initial = float(initial)
        self.final = float(final)
        self.steps = int(steps)
        self.start = int(start)
        self.last_step = 0

    def __repr__(self):
        return '{}(initial={}, final={}, steps={}, start={})'.format(
            self.__class__.__name__, self.initial, self.final, self.steps, self.start)

    def __call__(self, step: int) -> float:
        offset = step - self.start
        if offset <= 0:
            return self.initial
        if self.steps == 0 or offset >= self.steps:
            return self.final
        return self.initial + (self.final - self.initial) * offset / self.steps

    def step(self) -> float:
        self.last_step += 1
        return self(self.last_step)


class ExponentialSchedule(LinearSchedule):
    """Geometric interpolation between ``initial`` and ``final``.

    Used for the Gumbel-Softmax temperature, where equal ratios per step
    behave better than equal differences once the temperature is small.
    """

    def __init__(self, initial: float, final: float, steps: int, start: int = 0):
        assert initial > 0 and final > 0, 'exponential schedule needs positive end points'
        super().__init__(initial, final, steps, start)

    def __call__(self, step: int) -> float:
        offset = step - self.start
        if offset <= 0:
            return self.initial
        if self.steps == 0 or offset >= self.steps:
            return self.final
        ratio = offset / self.steps
        return math.exp((1.0 - ratio) * math.log(self.initial) + ratio * math.log(self.final))


class VisitCountRate:
    """Learning rate alpha / n(s, a) ** omega.

    With 0.5 < omega <= 1 the rates satisfy sum alpha_t = inf and
    sum alpha_t ** 2 < inf for every visited cell, which is the classic
    stochastic-approximation condition for tabular Q-learning.
    """

    def __init__(self, alpha: float, omega: float = 0.8):
        assert 0.5 < omega <= 1.0, 'omega should be in (0.5, 1], got {}'.format(omega)
        self.alpha = float(alpha)
        self.omega = float(omega)

    def __repr__(self):
        return '{}(alpha={}, omega={})'.format(self.__class__.__name__, self.alpha, self.omega)

    def __call__(self, visits: Union[int, float]) -> float:
        return self.alpha / max(float(visits), 1.0) ** self.omega


class ConstantRate:

    def __init__(self, alpha: float):
        self.alpha = float(alpha)

    def __repr__(self):
        return '{}(alpha={})'.format(self.__class__.__name__, self.alpha)

    def __call__(self, visits: Union[int, float]) -> float:
        return self.alpha


def build_rate(alpha: float, schedule: str = 'constant', omega: float = 0.8):
    if schedule == 'constant':
        return ConstantRate(alpha)
    elif schedule == 'visit':
        return VisitCountRate(alpha, omega)
    else:
        raise ValueError('unknown learning rate schedule: {}'.format(schedule))
