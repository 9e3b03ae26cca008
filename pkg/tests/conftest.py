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
import sys
ROOT_DIR = os.path.dirname(os.path.abspath(__file__))
sys.path.append('{}/..'.format(ROOT_DIR))

import numpy as np
import pytest

from stackeq.env.envs import MergeConfig, make_counterexample_env, make_env, make_grid_env, make_merge_env
from stackeq.game.matrix_game import ESCAPE_GAME, MAINTAIN_GAME


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running acceptance experiment, deselect with -m "not slow"')


@pytest.fixture
def escape_game():
    return ESCAPE_GAME


@pytest.fixture
def maintain_game():
    return MAINTAIN_GAME


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def escape_env():
    return make_env('escape')


@pytest.fixture
def maintain_env():
    return make_env('maintain')


@pytest.fixture
def counterexample_env():
    return make_counterexample_env(0.9)


@pytest.fixture(scope='session')
def grid_env():
    return make_grid_env()


@pytest.fixture(scope='session')
def merge_env():
    return make_merge_env(MergeConfig())
