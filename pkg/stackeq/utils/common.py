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
"""Utility functions shared by the learners."""

import hashlib
import json
from dataclasses import asdict, is_dataclass
from typing import Sequence, Tuple

import numpy as np
import torch


def make_rngs(seed: int, *keys: int) -> Tuple[np.random.Generator, torch.Generator]:
    """Derive the numpy and torch generators of one run.

    Args:
        seed (int): run seed.
        keys (int): extra stream keys, e.g. a trial index.

    Returns:
        Tuple[np.random.Generator, torch.Generator]: independent streams,
            bit-identical for identical (seed, keys).

    Examples:
        >>> rng, gen = make_rngs(3)
        >>> rng2, gen2 = make_rngs(3)
        >>> rng.integers(100) == rng2.integers(100)
        True
    """
    seq = np.random.SeedSequence([int(seed)] + [int(k) for k in keys])
    np_seq, torch_seq = seq.spawn(2)
    rng = np.random.default_rng(np_seq)
    generator = torch.Generator()
    generator.manual_seed(int(torch_seq.generate_state(1, dtype=np.uint64)[0] & 0x7fffffffffffffff))
    return rng, generator


def config_hash(config) -> str:
    if is_dataclass(config):
        config = asdict(config)
    payload = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha1(payload.encode('utf8')).hexdigest()[:12]


def policy_hash(entries: Sequence[Sequence[int]]) -> str:
    payload = ','.join(':'.join(str(int(v)) for v in entry) for entry in entries)
    return hashlib.sha1(payload.encode('utf8')).hexdigest()[:10]
