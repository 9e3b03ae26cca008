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
"""Two-player matrix games and their pure-strategy equilibria.

Agent 1 (rows) is the leader, agent 2 (columns) the follower. Every solver
is deterministic: ties are broken by the rules documented on each function.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from stackeq.utils.file_utils import read_json, write_json


@dataclass(frozen=True)
class MatrixGame:
    """Payoff pair (u1, u2) over joint actions, row = leader action."""
    u1: np.ndarray
    u2: np.ndarray
    action_names1: Optional[Tuple[str, ...]] = None
    action_names2: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        u1 = np.array(self.u1, dtype=np.float64)
        u2 = np.array(self.u2, dtype=np.float64)
        check_stage_game(u1, u2)
        u1.setflags(write=False)
        u2.setflags(write=False)
        object.__setattr__(self, 'u1', u1)
        object.__setattr__(self, 'u2', u2)
        for names, size in ((self.action_names1, u1.shape[0]), (self.action_names2, u1.shape[1])):
            if names is not None and len(names) != size:
                raise ValueError('expect {} action names, got {}'.format(size, len(names)))
        if self.action_names1 is not None:
            object.__setattr__(self, 'action_names1', tuple(self.action_names1))
        if self.action_names2 is not None:
            object.__setattr__(self, 'action_names2', tuple(self.action_names2))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.u1.shape

    def name_of(self, a1: int, a2: int) -> str:
        n1 = self.action_names1[a1] if self.action_names1 else str(a1)
        n2 = self.action_names2[a2] if self.action_names2 else str(a2)
        return '{}-{}'.format(n1, n2)

    def to_json(self):
        obj = {'u1': self.u1.tolist(), 'u2': self.u2.tolist()}
        if self.action_names1 is not None:
            obj['actions1'] = list(self.action_names1)
        if self.action_names2 is not None:
            obj['actions2'] = list(self.action_names2)
        return obj

    @classmethod
    def from_json(cls, obj) -> 'MatrixGame':
        if 'u1' not in obj or 'u2' not in obj:
            raise ValueError('matrix game json needs "u1" and "u2" keys')
        return cls(obj['u1'], obj['u2'], obj.get('actions1'), obj.get('actions2'))


@dataclass(frozen=True)
class StackelbergSolution:
    leader_action: int
    follower_action: int
    leader_payoff: float
    follower_payoff: float


@dataclass(frozen=True)
class PureNashSet:
    points: Tuple[Tuple[int, int], ...] = field(default_factory=tuple)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __contains__(self, point):
        return tuple(point) in self.points


def check_stage_game(u1: np.ndarray, u2: np.ndarray):
    if u1.ndim != 2 or u2.ndim != 2:
        raise ValueError('payoff matrices should be 2-d, got shapes {} and {}'.format(u1.shape, u2.shape))
    if u1.shape != u2.shape:
        raise ValueError('payoff matrices differ in shape: {} vs {}'.format(u1.shape, u2.shape))
    if u1.shape[0] == 0 or u1.shape[1] == 0:
        raise ValueError('empty payoff matrix of shape {}'.format(u1.shape))
    if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(u2))):
        raise ValueError('payoff matrices contain non-finite entries')


def follower_best_responses(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Tie-ruled best response of the follower to every leader action.

    Among the follower's maximizers of u2[a1, :], pick the one best for the
    leader (strong Stackelberg), then the lowest index. Works on a single
    stage game (A1, A2) or a batch (..., A1, A2).

    Returns:
        np.ndarray: integer array of shape (..., A1).
    """
    best = u2.max(axis=-1, keepdims=True)
    leader_view = np.where(u2 == best, u1, -np.inf)
    return np.argmax(leader_view, axis=-1)


def stackelberg_actions(u1: np.ndarray, u2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Batched strong Stackelberg joint actions.

    Args:
        u1 (np.ndarray): leader payoffs (..., A1, A2).
        u2 (np.ndarray): follower payoffs (..., A1, A2).

    Returns:
        Tuple[np.ndarray, np.ndarray]: leader actions and follower actions,
            each of shape (...). Leader ties go to the lowest index.
    """
    br = follower_best_responses(u1, u2)
    leader_values = np.take_along_axis(u1, br[..., None], axis=-1)[..., 0]
    a1 = np.asarray(np.argmax(leader_values, axis=-1))
    a2 = np.take_along_axis(br, a1[..., None], axis=-1)[..., 0]
    return a1, a2


def solve_stackelberg(game: MatrixGame) -> StackelbergSolution:
    a1, a2 = stackelberg_actions(game.u1, game.u2)
    a1, a2 = int(a1), int(a2)
    return StackelbergSolution(a1, a2, float(game.u1[a1, a2]), float(game.u2[a1, a2]))


def enumerate_pure_nash(game: MatrixGame, strict: bool = True) -> PureNashSet:
    """All pure Nash equilibria, in row-major order.

    A cell (a1, a2) is an equilibrium when u1[a1, a2] attains the maximum of
    column a2 of u1 and u2[a1, a2] attains the maximum of row a1 of u2. With
    ``strict`` each maximum must also be attained uniquely, which drops the
    weak equilibria that only exist on payoff ties (for the Escape game the
    10-10 cell B-Y).
    """
    u1, u2 = game.u1, game.u2
    col_max = u1.max(axis=0, keepdims=True)
    row_max = u2.max(axis=1, keepdims=True)
    leader_ok = u1 == col_max
    follower_ok = u2 == row_max
    if strict:
        leader_ok &= (leader_ok.sum(axis=0, keepdims=True) == 1)
        follower_ok &= (follower_ok.sum(axis=1, keepdims=True) == 1)
    rows, cols = np.nonzero(leader_ok & follower_ok)
    return PureNashSet(tuple((int(r), int(c)) for r, c in zip(rows, cols)))


def solve_minimax(game: MatrixGame) -> Tuple[int, float]:
    """Pure security level of the leader: max over rows of the row minimum."""
    row_min = game.u1.min(axis=1)
    a1 = int(np.argmax(row_min))
    return a1, float(row_min[a1])


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    assert x.shape == y.shape, 'pearson needs equal sizes'
    for values, who in ((x, 'leader'), (y, 'follower')):
        if np.all(values == values[0]):
            raise ValueError('cooperation level undefined: zero variance in {} payoffs'.format(who))
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.dot(dx, dx))
    sy = np.sqrt(np.dot(dy, dy))
    return float(np.clip(np.dot(dx, dy) / (sx * sy), -1.0, 1.0))


def cooperation_level(game: MatrixGame) -> float:
    """Pearson correlation of u1 and u2 over all joint pure actions.

    1 for a cooperative (identical-payoff) game, -1 for a zero-sum one.
    """
    return pearson(game.u1, game.u2)


def find_global_optimal_point(game: MatrixGame) -> Optional[Tuple[int, int]]:
    """Joint action where both agents get their highest payoff, if any."""
    both = (game.u1 == game.u1.max()) & (game.u2 == game.u2.max())
    rows, cols = np.nonzero(both)
    if len(rows) == 0:
        return None
    return int(rows[0]), int(cols[0])


def pareto_dominates(p: Sequence[float], q: Sequence[float]) -> bool:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return bool(np.all(p >= q) and np.any(p > q))


def sample_random_game(size_n: int, covariance: float, rng: np.random.Generator) -> MatrixGame:
    """Draw every cell's (u1, u2) from a standard bivariate normal.

    The pair is the Cholesky factor of [[1, c], [c, 1]] applied to two
    independent standard normals: u1 = z1, u2 = c * z1 + sqrt(1 - c^2) * z2.
    """
    if size_n < 1:
        raise ValueError('size_n should be positive, got {}'.format(size_n))
    if not -1.0 <= covariance <= 1.0:
        raise ValueError('covariance should lie in [-1, 1], got {}'.format(covariance))
    z = rng.standard_normal((2, size_n, size_n))
    u1 = z[0]
    u2 = covariance * z[0] + np.sqrt(1.0 - covariance ** 2) * z[1]
    return MatrixGame(u1, u2)


def load_game(path) -> MatrixGame:
    return MatrixGame.from_json(read_json(path))


def save_game(game: MatrixGame, path):
    write_json(path, game.to_json())


# Coordination games used throughout the experiments.
ESCAPE_GAME = MatrixGame(
    u1=[[15, 10, 0], [10, 10, 0], [0, 0, 30]],
    u2=[[15, 10, 0], [10, 10, 0], [0, 0, 30]],
    action_names1=('A', 'B', 'C'),
    action_names2=('X', 'Y', 'Z'))

MAINTAIN_GAME = MatrixGame(
    u1=[[20, 0, 0], [30, 10, 0], [0, 0, 5]],
    u2=[[15, 0, 0], [0, 5, 0], [0, 0, 10]],
    action_names1=('A', 'B', 'C'),
    action_names2=('X', 'Y', 'Z'))
