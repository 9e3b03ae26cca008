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
"""Explicit finite two-player Markov games.

A model is both a simulator (``env_reset`` / ``env_step``) and a dynamic
programming model (``expected_next``, ``evaluate_joint_policy``). Agent 1 is
the leader. Terminal states carry no transitions and have value zero.
"""

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from stackeq.game.matrix_game import pearson
from stackeq.utils.common import policy_hash
from stackeq.utils.file_utils import read_json, write_json, write_json_lines

PROB_TOLERANCE = 1e-9
VALUE_TIE = 1e-9


@dataclass(frozen=True)
class Transition:
    s: int
    a1: int
    a2: int
    s_next: int
    r1: float
    r2: float
    done: bool
    # done because the horizon ran out rather than a terminal state
    truncated: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.r1) and np.isfinite(self.r2)):
            raise ValueError('transition rewards should be finite, got ({}, {})'.format(self.r1, self.r2))

    @property
    def bootstrap(self) -> bool:
        return (not self.done) or self.truncated

    def to_json(self):
        return {'s': self.s, 'a1': self.a1, 'a2': self.a2, 's_next': self.s_next,
                'r1': self.r1, 'r2': self.r2, 'done': self.done, 'truncated': self.truncated}

    @classmethod
    def from_json(cls, obj) -> 'Transition':
        return cls(int(obj['s']), int(obj['a1']), int(obj['a2']), int(obj['s_next']),
                   float(obj['r1']), float(obj['r2']), bool(obj['done']), bool(obj.get('truncated', False)))


@dataclass(frozen=True)
class JointPolicy:
    """Deterministic joint policy, ``None`` on terminal states."""
    actions: Tuple[Optional[Tuple[int, int]], ...]

    def __getitem__(self, s: int) -> Tuple[int, int]:
        joint = self.actions[s]
        if joint is None:
            raise ValueError('joint policy undefined at terminal state {}'.format(s))
        return joint

    def __len__(self):
        return len(self.actions)

    def leader(self, s: int) -> int:
        return self[s][0]

    def follower(self, s: int) -> int:
        return self[s][1]

    def reachable_states(self, model: 'MarkovGameModel') -> List[int]:
        """Non-terminal states visited with positive probability when play starts from ``model.starts``."""
        seen = set()
        stack = [s for s, p in model.starts if p > 0.0]
        while stack:
            s = stack.pop()
            if s in seen or s in model.terminal_states:
                continue
            seen.add(s)
            stack.extend(n for n, p in model.transitions[(s,) + self[s]] if p > 0.0)
        return sorted(seen)

    def on_path_hash(self, model: 'MarkovGameModel') -> str:
        """Hash of the joint actions at the reachable states only.

        Joint actions with the same rewards and transitions hash alike, so a
        greedy argmax flipping between them leaves the hash unchanged.
        """
        return policy_hash([(s,) + model.canonical_actions[(s,) + self[s]] for s in self.reachable_states(model)])

    @classmethod
    def from_arrays(cls, model: 'MarkovGameModel', a1: Sequence[int], a2: Sequence[int]) -> 'JointPolicy':
        return cls(tuple(None if s in model.terminal_states else (int(a1[s]), int(a2[s]))
                         for s in range(model.n_states)))


@dataclass(frozen=True, eq=False)
class MarkovGameModel:
    """Finite Markov game <S, A_1, A_2, P, R_1, R_2, gamma>.

    Args:
        transitions: (s, a1, a2) -> ((s_next, prob), ...) for every
            non-terminal s and every joint action.
        rewards: array (S, A1, A2, 2), rewards[s, a1, a2, i] is agent i's
            reward; rows of terminal states are ignored.
        start_distribution: optional ((s, prob), ...); a point mass on
            ``start_state`` when omitted.
        features: optional (S, d) state encoding for function approximators;
            one-hot when omitted.
        info: parameters the environment was built from, e.g. the merge
            geometry and rewards; carried through JSON.
    """
    name: str
    state_names: Tuple[str, ...]
    action_names: Tuple[Tuple[str, ...], Tuple[str, ...]]
    transitions: Dict[Tuple[int, int, int], Tuple[Tuple[int, float], ...]]
    rewards: np.ndarray
    gamma: float
    start_state: int = 0
    terminal_states: FrozenSet[int] = field(default_factory=frozenset)
    horizon: Optional[int] = None
    start_distribution: Optional[Tuple[Tuple[int, float], ...]] = None
    features: Optional[np.ndarray] = None
    info: Dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'state_names', tuple(self.state_names))
        object.__setattr__(self, 'action_names', (tuple(self.action_names[0]), tuple(self.action_names[1])))
        object.__setattr__(self, 'terminal_states', frozenset(int(s) for s in self.terminal_states))
        rewards = np.array(self.rewards, dtype=np.float64)
        n_states, n1, n2 = self.n_states, len(self.action_names[0]), len(self.action_names[1])
        if n1 == 0 or n2 == 0 or n_states == 0:
            raise ValueError('empty state or action space in model {}'.format(self.name))
        if rewards.shape != (n_states, n1, n2, 2):
            raise ValueError('rewards should have shape {}, got {}'.format((n_states, n1, n2, 2), rewards.shape))
        if not np.all(np.isfinite(rewards)):
            raise ValueError('rewards of model {} contain non-finite entries'.format(self.name))
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError('gamma should lie in [0, 1), got {}'.format(self.gamma))
        if self.horizon is not None and self.horizon < 1:
            raise ValueError('horizon should be positive, got {}'.format(self.horizon))
        rewards.setflags(write=False)
        object.__setattr__(self, 'rewards', rewards)
        transitions = {}
        for (s, a1, a2), outcomes in self.transitions.items():
            if s in self.terminal_states:
                raise ValueError('terminal state {} has outgoing transitions'.format(s))
            outcomes = tuple((int(n), float(p)) for n, p in outcomes)
            total = sum(p for _, p in outcomes)
            if abs(total - 1.0) > PROB_TOLERANCE:
                raise ValueError('transition ({}, {}, {}) sums to {}'.format(s, a1, a2, total))
            for n, p in outcomes:
                if not 0 <= n < n_states or p < 0.0:
                    raise ValueError('bad outcome ({}, {}) at ({}, {}, {})'.format(n, p, s, a1, a2))
            transitions[(int(s), int(a1), int(a2))] = outcomes
        for s in self.nonterminal_states:
            for a1 in range(n1):
                for a2 in range(n2):
                    if (s, a1, a2) not in transitions:
                        raise ValueError('missing transition for ({}, {}, {})'.format(s, a1, a2))
        object.__setattr__(self, 'transitions', transitions)
        if self.start_state in self.terminal_states:
            raise ValueError('start state {} is terminal'.format(self.start_state))
        if self.start_distribution is not None:
            dist = tuple((int(s), float(p)) for s, p in self.start_distribution)
            if abs(sum(p for _, p in dist) - 1.0) > PROB_TOLERANCE:
                raise ValueError('start distribution does not sum to 1')
            if any(s in self.terminal_states for s, _ in dist):
                raise ValueError('start distribution puts mass on a terminal state')
            object.__setattr__(self, 'start_distribution', dist)
        features = self.features
        if features is None:
            features = np.eye(n_states)
        features = np.array(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != n_states:
            raise ValueError('features should have shape (S, d), got {}'.format(features.shape))
        features.setflags(write=False)
        object.__setattr__(self, 'features', features)

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def n_actions(self) -> Tuple[int, int]:
        return len(self.action_names[0]), len(self.action_names[1])

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def nonterminal_states(self) -> Tuple[int, ...]:
        return tuple(s for s in range(self.n_states) if s not in self.terminal_states)

    @cached_property
    def starts(self) -> Tuple[Tuple[int, float], ...]:
        if self.start_distribution is not None:
            return self.start_distribution
        return ((self.start_state, 1.0),)

    @cached_property
    def canonical_actions(self) -> Dict[Tuple[int, int, int], Tuple[int, int]]:
        """(s, a1, a2) -> the first joint action at s with the same rewards and transitions."""
        n1, n2 = self.n_actions
        canonical = {}
        for s in self.nonterminal_states:
            seen = {}
            for a1 in range(n1):
                for a2 in range(n2):
                    key = (self.transitions[(s, a1, a2)], tuple(self.rewards[s, a1, a2]))
                    canonical[(s, a1, a2)] = seen.setdefault(key, (a1, a2))
        return canonical

    @cached_property
    def identical_payoffs(self) -> bool:
        live = list(self.nonterminal_states)
        return bool(np.array_equal(self.rewards[live, ..., 0], self.rewards[live, ..., 1]))

    @cached_property
    def sparse_transitions(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flat (s, a1, a2) index, next state and probability of every outcome."""
        n1, n2 = self.n_actions
        keys, nexts, probs = [], [], []
        for (s, a1, a2), outcomes in self.transitions.items():
            flat = (s * n1 + a1) * n2 + a2
            for n, p in outcomes:
                keys.append(flat)
                nexts.append(n)
                probs.append(p)
        return np.array(keys, dtype=np.int64), np.array(nexts, dtype=np.int64), np.array(probs)

    def reward(self, s: int, a1: int, a2: int) -> Tuple[float, float]:
        return float(self.rewards[s, a1, a2, 0]), float(self.rewards[s, a1, a2, 1])

    def reward_table(self, agent: int) -> np.ndarray:
        r = np.array(self.rewards[..., agent])
        r[list(self.terminal_states)] = 0.0
        return r

    def expected_next(self, values: np.ndarray) -> np.ndarray:
        """E[values(s') | s, a1, a2] as an (S, A1, A2) array."""
        n1, n2 = self.n_actions
        keys, nexts, probs = self.sparse_transitions
        flat = np.bincount(keys, weights=probs * values[nexts], minlength=self.n_states * n1 * n2)
        return flat.reshape(self.n_states, n1, n2)

    def start_value(self, values: np.ndarray) -> float:
        return float(sum(p * values[s] for s, p in self.starts))

    def joint_name(self, a1: int, a2: int) -> str:
        return '{}-{}'.format(self.action_names[0][a1], self.action_names[1][a2])

    def to_json(self):
        live = self.nonterminal_states
        n1, n2 = self.n_actions
        return {
            'name': self.name,
            'states': list(self.state_names),
            'actions': [list(self.action_names[0]), list(self.action_names[1])],
            'transitions': [[s, a1, a2, n, p] for (s, a1, a2), outs in sorted(self.transitions.items())
                            for n, p in outs],
            'rewards': [[s, a1, a2, float(self.rewards[s, a1, a2, 0]), float(self.rewards[s, a1, a2, 1])]
                        for s in live for a1 in range(n1) for a2 in range(n2)],
            'gamma': self.gamma,
            'start_state': self.start_state,
            'terminal_states': sorted(self.terminal_states),
            'horizon': self.horizon,
            'start_distribution': None if self.start_distribution is None
            else [[s, p] for s, p in self.start_distribution],
            'features': self.features.tolist(),
            'info': dict(self.info),
        }

    @classmethod
    def from_json(cls, obj) -> 'MarkovGameModel':
        states = obj['states']
        n1, n2 = len(obj['actions'][0]), len(obj['actions'][1])
        transitions: Dict[Tuple[int, int, int], List[Tuple[int, float]]] = {}
        for s, a1, a2, n, p in obj['transitions']:
            transitions.setdefault((int(s), int(a1), int(a2)), []).append((int(n), float(p)))
        rewards = np.zeros((len(states), n1, n2, 2))
        for s, a1, a2, r1, r2 in obj['rewards']:
            rewards[int(s), int(a1), int(a2)] = (r1, r2)
        start_distribution = obj.get('start_distribution')
        return cls(name=obj['name'],
                   state_names=tuple(states),
                   action_names=(tuple(obj['actions'][0]), tuple(obj['actions'][1])),
                   transitions={k: tuple(v) for k, v in transitions.items()},
                   rewards=rewards,
                   gamma=float(obj['gamma']),
                   start_state=int(obj.get('start_state', 0)),
                   terminal_states=frozenset(obj.get('terminal_states', [])),
                   horizon=obj.get('horizon'),
                   start_distribution=None if start_distribution is None
                   else tuple((int(s), float(p)) for s, p in start_distribution),
                   features=obj.get('features'),
                   info=obj.get('info') or {})


def save_model_json(model: MarkovGameModel, path):
    write_json(path, model.to_json())


def load_model_json(path) -> MarkovGameModel:
    return MarkovGameModel.from_json(read_json(path))


def write_episode_log(path, transitions: Sequence[Transition]):
    write_json_lines(path, [t.to_json() for t in transitions])


def _sample(outcomes: Tuple[Tuple[int, float], ...], rng: Optional[np.random.Generator]) -> int:
    if len(outcomes) == 1:
        return outcomes[0][0]
    if rng is None:
        raise ValueError('a random generator is needed to sample a stochastic transition')
    u = rng.random()
    acc = 0.0
    for n, p in outcomes:
        acc += p
        if u < acc:
            return n
    return outcomes[-1][0]


def env_reset(model: MarkovGameModel, rng: Optional[np.random.Generator] = None) -> int:
    return _sample(model.starts, rng)


def env_step(model: MarkovGameModel, state: int, a1: int, a2: int,
             rng: Optional[np.random.Generator] = None, t: int = 0) -> Transition:
    """Advance the game one step from ``state``.

    Args:
        t (int): number of steps already taken in the episode; the step is
            flagged done when ``t + 1`` reaches the model's horizon.
    """
    n1, n2 = model.n_actions
    if not (0 <= a1 < n1 and 0 <= a2 < n2):
        raise ValueError('joint action ({}, {}) out of range {}'.format(a1, a2, (n1, n2)))
    if state in model.terminal_states:
        raise ValueError('cannot step terminal state {} ({})'.format(state, model.state_names[state]))
    s_next = _sample(model.transitions[(state, a1, a2)], rng)
    r1, r2 = model.reward(state, a1, a2)
    terminal = s_next in model.terminal_states
    truncated = (not terminal) and model.horizon is not None and t + 1 >= model.horizon
    return Transition(state, a1, a2, s_next, r1, r2, terminal or truncated, truncated)


class MarkovGameEnv:
    """Stateful wrapper around a model for episode-by-episode simulation."""

    def __init__(self, model: MarkovGameModel, rng: np.random.Generator):
        self.model = model
        self.rng = rng
        self.state = None
        self.t = 0

    def reset(self) -> int:
        self.state = env_reset(self.model, self.rng)
        self.t = 0
        return self.state

    def step(self, a1: int, a2: int) -> Transition:
        assert self.state is not None, 'call reset() before step()'
        tr = env_step(self.model, self.state, a1, a2, self.rng, self.t)
        self.t += 1
        self.state = tr.s_next
        return tr


def rollout(model: MarkovGameModel, act: Callable[[int], Tuple[int, int]],
            rng: Optional[np.random.Generator] = None, start: Optional[int] = None,
            max_steps: Optional[int] = None) -> List[Transition]:
    """Play one episode with ``act(state) -> (a1, a2)``."""
    state = env_reset(model, rng) if start is None else start
    max_steps = max_steps or model.horizon or 1000
    episode = []
    for t in range(max_steps):
        a1, a2 = act(state)
        tr = env_step(model, state, a1, a2, rng, t)
        episode.append(tr)
        if tr.done:
            break
        state = tr.s_next
    return episode


def _policy_arrays(model: MarkovGameModel, policy: JointPolicy):
    keys, nexts, probs = model.sparse_transitions
    n1, n2 = model.n_actions
    chosen = np.full(model.n_states * n1 * n2, False)
    r = np.zeros((2, model.n_states))
    for s in model.nonterminal_states:
        a1, a2 = policy[s]
        chosen[(s * n1 + a1) * n2 + a2] = True
        r[:, s] = model.rewards[s, a1, a2]
    mask = chosen[keys]
    return keys[mask] // (n1 * n2), nexts[mask], probs[mask], r


def evaluate_joint_policy(model: MarkovGameModel, policy: JointPolicy,
                          tolerance: float = 1e-10, max_iter: int = 1000000) -> Tuple[np.ndarray, np.ndarray]:
    """Discounted values of a deterministic joint policy for both agents.

    Iterates V <- r_pi + gamma * P_pi V until the sup-norm change certifies
    an error below ``tolerance``.
    """
    if len(policy) != model.n_states:
        raise ValueError('policy covers {} states, model has {}'.format(len(policy), model.n_states))
    rows, nexts, probs, r = _policy_arrays(model, policy)
    values = np.zeros((2, model.n_states))
    threshold = tolerance * (1.0 - model.gamma)
    for _ in range(max_iter):
        new = np.stack([r[i] + model.gamma * np.bincount(rows, weights=probs * values[i][nexts],
                                                         minlength=model.n_states) for i in range(2)])
        change = np.max(np.abs(new - values))
        values = new
        if change <= threshold:
            break
    return values[0], values[1]


def greedy_joint_policy(model: MarkovGameModel, q1: np.ndarray, q2: Optional[np.ndarray] = None) -> JointPolicy:
    """Per-state joint argmax of q1 (lowest flat index on ties)."""
    n1, n2 = model.n_actions
    flat = np.argmax(q1.reshape(model.n_states, n1 * n2), axis=1)
    return JointPolicy.from_arrays(model, flat // n2, flat % n2)


def joint_mdp_value_iteration(model: MarkovGameModel, tolerance: float = 1e-10,
                              max_sweeps: int = 100000) -> Tuple[np.ndarray, JointPolicy]:
    """Value iteration on the joint-action MDP of an identical-payoff game."""
    if not model.identical_payoffs:
        raise ValueError('joint MDP value iteration needs identical payoffs, model {} has not'.format(model.name))
    r = model.reward_table(0)
    values = np.zeros(model.n_states)
    threshold = tolerance * (1.0 - model.gamma)
    q = r
    for _ in range(max_sweeps):
        q = r + model.gamma * model.expected_next(values)
        new = q.max(axis=(1, 2))
        new[list(model.terminal_states)] = 0.0
        change = np.max(np.abs(new - values))
        values = new
        if change <= threshold:
            break
    return values, greedy_joint_policy(model, q)


def best_response_values(model: MarkovGameModel, policy: JointPolicy, agent: int,
                         tolerance: float = 1e-10, max_sweeps: int = 100000) -> np.ndarray:
    """Optimal values of ``agent`` (0 leader, 1 follower) against the other's fixed policy."""
    r = model.reward_table(agent)
    values = np.zeros(model.n_states)
    live = list(model.nonterminal_states)
    other = np.array([policy[s][1 - agent] for s in live], dtype=np.int64)
    threshold = tolerance * (1.0 - model.gamma)
    for _ in range(max_sweeps):
        q = r + model.gamma * model.expected_next(values)
        new = np.zeros(model.n_states)
        if agent == 0:
            new[live] = q[live, :, other].max(axis=1)
        else:
            new[live] = q[live, other, :].max(axis=1)
        change = np.max(np.abs(new - values))
        values = new
        if change <= threshold:
            break
    return values


def is_nash_policy(model: MarkovGameModel, policy: JointPolicy, tolerance: float = 1e-8) -> bool:
    """Whether no agent gains from the start distribution by a unilateral deviation."""
    values = evaluate_joint_policy(model, policy)
    for agent in range(2):
        best = model.start_value(best_response_values(model, policy, agent))
        if best > model.start_value(values[agent]) + tolerance:
            return False
    return True


def _enumeration_size(model: MarkovGameModel) -> Tuple[int, int]:
    n1, n2 = model.n_actions
    live = len(model.nonterminal_states)
    return n1 ** live, n2 ** live


def iterate_joint_policies(model: MarkovGameModel, max_policies: int = 10 ** 6):
    """Yield (leader_index, follower_index, policy) over all deterministic joint policies."""
    size1, size2 = _enumeration_size(model)
    if size1 * size2 > max_policies:
        raise ValueError('{} joint policies exceed the enumeration limit {}'.format(size1 * size2, max_policies))
    n1, n2 = model.n_actions
    live = model.nonterminal_states
    for i, leader in enumerate(itertools.product(range(n1), repeat=len(live))):
        for j, follower in enumerate(itertools.product(range(n2), repeat=len(live))):
            a1 = np.zeros(model.n_states, dtype=np.int64)
            a2 = np.zeros(model.n_states, dtype=np.int64)
            a1[list(live)] = leader
            a2[list(live)] = follower
            yield i, j, JointPolicy.from_arrays(model, a1, a2)


def birl_oracle(model: MarkovGameModel, max_policies: int = 10 ** 6) -> Tuple[JointPolicy, float, float]:
    """Exact bi-level solution over deterministic policies.

    For every leader policy the follower's best reply maximizes its own
    start value, ties going to the leader's benefit and then to the first
    policy in lexicographic order; the leader keeps the first policy with the
    highest start value under that reply.

    With identical payoffs the bi-level optimum is the joint optimum, and any
    optimal joint policy is a solution (the follower's reply to the leader's
    part reaches the same value), so joint-MDP value iteration solves the
    problem without enumeration.
    """
    if model.identical_payoffs:
        values, policy = joint_mdp_value_iteration(model)
        v1, v2 = evaluate_joint_policy(model, policy)
        return policy, model.start_value(v1), model.start_value(v2)
    best = None
    current_leader, reply = None, None
    for i, _, policy in iterate_joint_policies(model, max_policies):
        if i != current_leader:
            best = _better_leader(best, reply)
            current_leader, reply = i, None
        v1, v2 = evaluate_joint_policy(model, policy)
        candidate = (policy, model.start_value(v1), model.start_value(v2))
        if reply is None or _follower_prefers(candidate, reply):
            reply = candidate
    best = _better_leader(best, reply)
    return best


def _follower_prefers(candidate, incumbent) -> bool:
    if candidate[2] > incumbent[2] + VALUE_TIE:
        return True
    if candidate[2] >= incumbent[2] - VALUE_TIE:
        return candidate[1] > incumbent[1] + VALUE_TIE
    return False


def _better_leader(best, reply):
    if reply is None:
        return best
    if best is None or reply[1] > best[1] + VALUE_TIE:
        return reply
    return best


def policy_cooperation_level(model: MarkovGameModel, max_policies: int = 10 ** 6) -> float:
    """Pearson correlation of the two agents' start values over all deterministic joint policies."""
    v1s, v2s = [], []
    for _, _, policy in iterate_joint_policies(model, max_policies):
        v1, v2 = evaluate_joint_policy(model, policy)
        v1s.append(model.start_value(v1))
        v2s.append(model.start_value(v2))
    return pearson(np.array(v1s), np.array(v2s))
