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

from typing import List

import numpy as np

from stackeq.env.markov_game import Transition


class ReplayBuffer:
    """Fixed-capacity ring of transitions; the oldest record is overwritten first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError('buffer capacity should be positive, got {}'.format(capacity))
        self.capacity = capacity
        self.buffer: List[Transition] = []
        self.position = 0
        self.pushed = 0

    def __len__(self):
        return len(self.buffer)

    def push(self, transition: Transition):
        if len(self.buffer) < self.capacity:
            self.buffer.append(None)
        self.buffer[self.position] = transition
        self.position = (self.position + 1) % self.capacity
        self.pushed += 1

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Transition]:
        """Uniform draw with replacement."""
        if len(self.buffer) == 0:
            raise ValueError('cannot sample from an empty replay buffer')
        indices = rng.integers(len(self.buffer), size=batch_size)
        return [self.buffer[i] for i in indices]

    def records(self) -> List[Transition]:
        """Stored transitions, oldest first."""
        if len(self.buffer) < self.capacity:
            return list(self.buffer)
        return self.buffer[self.position:] + self.buffer[:self.position]
