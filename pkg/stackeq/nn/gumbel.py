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

from dataclasses import dataclass
from typing import Optional, Tuple

import torch
import torch.nn.functional as F

from stackeq.utils.scheduler import ExponentialSchedule


@dataclass(frozen=True)
class GumbelConfig:
    temperature: float = 1.0
    final_temperature: float = 0.1
    anneal_steps: int = 10000
    # straight-through: one-hot forward, relaxed backward
    hard: bool = True

    def __post_init__(self):
        if self.temperature <= 0 or self.final_temperature <= 0:
            raise ValueError('Gumbel temperatures should be positive, got {} -> {}'.format(
                self.temperature, self.final_temperature))
        if self.anneal_steps < 0:
            raise ValueError('anneal_steps should be non-negative, got {}'.format(self.anneal_steps))

    def schedule(self) -> ExponentialSchedule:
        return ExponentialSchedule(self.temperature, self.final_temperature, self.anneal_steps)


def sample_gumbel(shape, generator: Optional[torch.Generator] = None, dtype=torch.float32) -> torch.Tensor:
    u = torch.rand(shape, generator=generator, dtype=dtype)
    tiny = torch.finfo(dtype).tiny
    return -torch.log(-torch.log(u.clamp(min=tiny)))


def gumbel_softmax_sample(logits: torch.Tensor,
                          temperature: float,
                          generator: Optional[torch.Generator] = None,
                          hard: bool = False) -> Tuple[torch.Tensor, torch.Tensor]:
    """Relaxed categorical sample of softmax(logits).

    Returns:
        Tuple[torch.Tensor, torch.Tensor]: softmax((logits + g) / temperature),
            or its straight-through one-hot when ``hard``, and the argmax
            index of the perturbed logits, an exact categorical sample.
    """
    if temperature <= 0:
        raise ValueError('temperature should be positive, got {}'.format(temperature))
    perturbed = logits + sample_gumbel(logits.shape, generator, logits.dtype)
    soft = F.softmax(perturbed / temperature, dim=-1)
    index = perturbed.argmax(dim=-1)
    if hard:
        one_hot = F.one_hot(index, logits.shape[-1]).to(soft.dtype)
        return one_hot - soft.detach() + soft, index
    return soft, index
