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
"""Bi-level actor-critic.

The leader is a Q-learner over joint actions; the follower has its own
joint-action critic and an actor conditioned on the leader's action.
Training is centralized; at execution each agent holds a copy of the leader
critic and the follower actor and recomputes the same joint action alone.
"""

import copy
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from stackeq.env.envs import classify_episode, evaluate_greedy, optimal_cell
from stackeq.env.markov_game import JointPolicy, MarkovGameModel, Transition, env_reset, env_step, rollout
from stackeq.nn.gumbel import GumbelConfig, gumbel_softmax_sample
from stackeq.nn.mlp import Mlp, sync_target
from stackeq.nn.replay_buffer import ReplayBuffer
from stackeq.utils.common import config_hash, make_rngs
from stackeq.utils.file_utils import logging
from stackeq.utils.run_record import RunRecord
from stackeq.utils.scheduler import LinearSchedule
from stackeq.utils.train_utils import init_optimizer, load_model, log_per_step, save_model

CRITIC_RULE = 'semi-gradient TD per critic: theta_i <- theta_i + alpha_i * delta_i * grad_theta_i Q_i'


@dataclass(frozen=True)
class BiACConfig:
    alpha1: float = 5e-3
    alpha2: float = 2.5e-3
    beta: float = 5e-3
    gamma: Optional[float] = None
    momentum: float = 0.9
    batch_size: int = 32
    buffer_capacity: int = 10000
    target_sync: int = 100
    target_tau: Optional[float] = None
    epsilon_initial: float = 1.0
    epsilon_final: float = 0.05
    epsilon_episodes: Optional[int] = None
    warmup_steps: int = 1000
    episodes: int = 3000
    seed: int = 0
    hidden_sizes: Tuple[int, ...] = (64, 64)
    reward_scale: float = 0.1
    actor_objective: str = 'score'
    gumbel: GumbelConfig = field(default_factory=GumbelConfig)
    eval_interval: int = 10
    log_interval: int = 0
    convergence_fraction: float = 0.1

    def __post_init__(self):
        if isinstance(self.gumbel, dict):
            object.__setattr__(self, 'gumbel', GumbelConfig(**self.gumbel))
        object.__setattr__(self, 'hidden_sizes', tuple(int(h) for h in self.hidden_sizes))
        for name in ('alpha1', 'alpha2', 'beta', 'reward_scale'):
            if getattr(self, name) < 0:
                raise ValueError('{} should be non-negative, got {}'.format(name, getattr(self, name)))
        if self.gamma is not None and not 0.0 <= self.gamma < 1.0:
            raise ValueError('gamma should lie in [0, 1), got {}'.format(self.gamma))
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError('need 1 <= batch_size <= buffer_capacity, got {} and {}'.format(
                self.batch_size, self.buffer_capacity))
        if self.target_sync < 1 or self.eval_interval < 1:
            raise ValueError('target_sync and eval_interval should be positive')
        if self.actor_objective not in ('score', 'gumbel'):
            raise ValueError('unknown actor objective: {}'.format(self.actor_objective))
        if self.episodes < 1 or self.warmup_steps < 0:
            raise ValueError('bad episode budget: episodes {} warmup {}'.format(self.episodes, self.warmup_steps))


@dataclass
class BiACParams:
    """Leader critic, follower critic, follower actor and the two target critics.

    Critics map (state features, leader one-hot, follower action vector) to a
    scalar; the actor maps (state features, leader one-hot) to follower
    logits. Critic outputs are in units of ``reward_scale`` times reward.
    """
    q1: nn.Module
    q2: nn.Module
    actor: nn.Module
    q1_target: nn.Module
    q2_target: nn.Module
    features: torch.Tensor
    n_actions: Tuple[int, int]
    gumbel: GumbelConfig = field(default_factory=GumbelConfig)
    reward_scale: float = 1.0

    @classmethod
    def build(cls, model: MarkovGameModel, config: BiACConfig,
              generator: Optional[torch.Generator] = None) -> 'BiACParams':
        n1, n2 = model.n_actions
        d = model.feature_dim
        q1 = Mlp(d + n1 + n2, 1, config.hidden_sizes, generator)
        q2 = Mlp(d + n1 + n2, 1, config.hidden_sizes, generator)
        actor = Mlp(d + n1, n2, config.hidden_sizes, generator)
        return cls(q1, q2, actor, copy.deepcopy(q1), copy.deepcopy(q2),
                   torch.tensor(model.features, dtype=torch.float32), (n1, n2),
                   config.gumbel, config.reward_scale)

    @property
    def dtype(self) -> torch.dtype:
        return self.features.dtype

    def state_dict(self) -> Dict:
        return {name: getattr(self, name).state_dict() for name in ('q1', 'q2', 'actor', 'q1_target', 'q2_target')}

    def load_state_dict(self, state_dict: Dict):
        for name, sd in state_dict.items():
            getattr(self, name).load_state_dict(sd)


@dataclass
class BiACOptimizers:
    q1: torch.optim.Optimizer
    q2: torch.optim.Optimizer
    actor: torch.optim.Optimizer

    @classmethod
    def build(cls, params: BiACParams, config: BiACConfig) -> 'BiACOptimizers':
        return cls(init_optimizer(params.q1, config.alpha1, config.momentum),
                   init_optimizer(params.q2, config.alpha2, config.momentum),
                   init_optimizer(params.actor, config.beta, config.momentum))


def _one_hot(indices: np.ndarray, size: int, dtype: torch.dtype) -> torch.Tensor:
    return F.one_hot(torch.as_tensor(np.asarray(indices), dtype=torch.long), size).to(dtype)


def actor_input(params: BiACParams, states: np.ndarray, a1: np.ndarray) -> torch.Tensor:
    states = torch.as_tensor(np.asarray(states), dtype=torch.long)
    return torch.cat([params.features[states], _one_hot(a1, params.n_actions[0], params.dtype)], dim=-1)


def critic_input(params: BiACParams, states: np.ndarray, a1: np.ndarray, a2_vec: torch.Tensor) -> torch.Tensor:
    return torch.cat([actor_input(params, states, a1), a2_vec.to(params.dtype)], dim=-1)


@torch.no_grad()
def greedy_joint_actions(params: BiACParams, states: Sequence[int],
                         q1: Optional[nn.Module] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Batched leader argmax of Q1(s, a1, actor-greedy a2); ties go to the lowest index."""
    q1 = params.q1 if q1 is None else q1
    states = np.asarray(states, dtype=np.int64)
    n1, n2 = params.n_actions
    s_rep = np.repeat(states, n1)
    a1_rep = np.tile(np.arange(n1), len(states))
    logits = params.actor(actor_input(params, s_rep, a1_rep)).cpu().numpy()
    a2_greedy = np.argmax(logits, axis=-1)
    q = q1(critic_input(params, s_rep, a1_rep, _one_hot(a2_greedy, n2, params.dtype)))
    q = q.reshape(len(states), n1).cpu().numpy()
    a1 = np.argmax(q, axis=1)
    a2 = a2_greedy.reshape(len(states), n1)[np.arange(len(states)), a1]
    return a1, a2


def select_next_actions(params: BiACParams, state: int) -> Tuple[int, int]:
    a1, a2 = greedy_joint_actions(params, [state])
    return int(a1[0]), int(a2[0])


@torch.no_grad()
def critic_values(params: BiACParams, state: int) -> Tuple[np.ndarray, np.ndarray]:
    """Both critics over every joint action at ``state``, in reward units."""
    n1, n2 = params.n_actions
    a1 = np.repeat(np.arange(n1), n2)
    a2 = np.tile(np.arange(n2), n1)
    x = critic_input(params, np.full(n1 * n2, state), a1, _one_hot(a2, n2, params.dtype))
    scale = params.reward_scale if params.reward_scale > 0 else 1.0
    return (params.q1(x).reshape(n1, n2).cpu().numpy() / scale,
            params.q2(x).reshape(n1, n2).cpu().numpy() / scale)


def _unpack(batch: Sequence[Transition]):
    s = np.array([tr.s for tr in batch])
    a1 = np.array([tr.a1 for tr in batch])
    a2 = np.array([tr.a2 for tr in batch])
    s_next = np.array([tr.s_next for tr in batch])
    r = torch.tensor([[tr.r1, tr.r2] for tr in batch], dtype=torch.float64)
    bootstrap = torch.tensor([1.0 if tr.bootstrap else 0.0 for tr in batch], dtype=torch.float64)
    return s, a1, a2, s_next, r, bootstrap


def critic_update(params: BiACParams, batch: Sequence[Transition], optimizers: BiACOptimizers,
                  gamma: float) -> Tuple[float, float]:
    """One semi-gradient TD step per critic; returns the two mean squared TD errors."""
    if len(batch) == 0:
        raise ValueError('critic update needs a non-empty batch')
    s, a1, a2, s_next, r, bootstrap = _unpack(batch)
    n2 = params.n_actions[1]
    with torch.no_grad():
        next1, next2 = greedy_joint_actions(params, s_next, params.q1_target)
        x_next = critic_input(params, s_next, next1, _one_hot(next2, n2, params.dtype))
        bootstrap = bootstrap.to(params.dtype)
        r = r.to(params.dtype) * params.reward_scale
        target1 = r[:, 0] + gamma * bootstrap * params.q1_target(x_next).squeeze(-1)
        target2 = r[:, 1] + gamma * bootstrap * params.q2_target(x_next).squeeze(-1)
    x = critic_input(params, s, a1, _one_hot(a2, n2, params.dtype))
    losses = []
    for net, optimizer, target in ((params.q1, optimizers.q1, target1), (params.q2, optimizers.q2, target2)):
        pred = net(x).squeeze(-1)
        loss = 0.5 * torch.mean((pred - target) ** 2)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        losses.append(2.0 * loss.item())
    return losses[0], losses[1]


def actor_update(params: BiACParams, batch: Sequence[Transition], optimizer: torch.optim.Optimizer,
                 objective: str = 'score', temperature: float = 1.0,
                 generator: Optional[torch.Generator] = None) -> float:
    """Policy-gradient step of the follower actor.

    ``score`` ascends log pi(a2 | s, a1) * Q2(s, a1, a2) on the stored
    actions with the raw critic value as weight. ``gumbel`` ascends
    Q2(s, a1, y) through a relaxed sample y of the actor.
    """
    if len(batch) == 0:
        raise ValueError('actor update needs a non-empty batch')
    s, a1, a2, _, _, _ = _unpack(batch)
    n2 = params.n_actions[1]
    logits = params.actor(actor_input(params, s, a1))
    if objective == 'score':
        with torch.no_grad():
            weight = params.q2(critic_input(params, s, a1, _one_hot(a2, n2, params.dtype))).squeeze(-1)
        log_prob = F.log_softmax(logits, dim=-1).gather(-1, torch.as_tensor(a2).long()[:, None]).squeeze(-1)
        loss = -torch.mean(log_prob * weight)
    elif objective == 'gumbel':
        y, _ = gumbel_softmax_sample(logits, temperature, generator, hard=params.gumbel.hard)
        loss = -torch.mean(params.q2(critic_input(params, s, a1, y)).squeeze(-1))
    else:
        raise ValueError('unknown actor objective: {}'.format(objective))
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    params.q2.zero_grad()
    return loss.item()


@torch.no_grad()
def follower_probs(params: BiACParams, state: int, a1: int) -> np.ndarray:
    logits = params.actor(actor_input(params, [state], [a1]))
    return F.softmax(logits.double(), dim=-1)[0].cpu().numpy()


def _behaviour(params: BiACParams, state: int, n_actions: Tuple[int, int], rng: np.random.Generator,
               generator: torch.Generator, epsilon: float, warm: bool) -> Tuple[int, int]:
    n1, n2 = n_actions
    if warm:
        return int(rng.integers(n1)), int(rng.integers(n2))
    a1, _ = select_next_actions(params, state)
    if rng.random() < epsilon:
        a1 = int(rng.integers(n1))
    if rng.random() < epsilon:
        return a1, int(rng.integers(n2))
    probs = torch.as_tensor(follower_probs(params, state, a1))
    a2 = int(torch.multinomial(probs, 1, generator=generator).item())
    return a1, a2


def greedy_joint_policy(params: BiACParams, model: MarkovGameModel) -> JointPolicy:
    a1, a2 = greedy_joint_actions(params, list(range(model.n_states)))
    return JointPolicy.from_arrays(model, a1, a2)


def greedy_policy_hash(params: BiACParams, model: MarkovGameModel) -> str:
    """Hash of the greedy joint actions along the states greedy play reaches."""
    return greedy_joint_policy(params, model).on_path_hash(model)


def train_biac(model: MarkovGameModel, config: BiACConfig, writer=None) -> Tuple[BiACParams, RunRecord]:
    rng, generator = make_rngs(config.seed)
    gamma = model.gamma if config.gamma is None else config.gamma
    params = BiACParams.build(model, config, generator)
    optimizers = BiACOptimizers.build(params, config)
    buffer = ReplayBuffer(config.buffer_capacity)
    steps = config.epsilon_episodes if config.epsilon_episodes is not None else config.episodes // 2
    epsilon = LinearSchedule(config.epsilon_initial, config.epsilon_final, steps)
    temperature = params.gumbel.schedule()
    opt = optimal_cell(model)
    record = RunRecord(model.name, 'bilevel_ac', config.seed)
    total_steps, explore_episode, updates = 0, 0, 0
    losses = (float('nan'), float('nan'), float('nan'))
    policy_label = greedy_policy_hash(params, model)
    diverged = False
    for episode in range(config.episodes):
        eps = epsilon(explore_episode)
        if total_steps >= config.warmup_steps:
            explore_episode += 1
        state = env_reset(model, rng)
        trs: List[Transition] = []
        for t in range(model.horizon or 1000):
            warm = total_steps < config.warmup_steps
            a1, a2 = _behaviour(params, state, model.n_actions, rng, generator, eps, warm)
            tr = env_step(model, state, a1, a2, rng, t)
            buffer.push(tr)
            trs.append(tr)
            total_steps += 1
            if not warm and len(buffer) >= config.batch_size:
                batch = buffer.sample(config.batch_size, rng)
                c1, c2 = critic_update(params, batch, optimizers, gamma)
                la = actor_update(params, batch, optimizers.actor, config.actor_objective,
                                  temperature(updates), generator)
                losses = (c1, c2, la)
                updates += 1
                if config.target_tau is not None:
                    sync_target(params.q1, params.q1_target, config.target_tau)
                    sync_target(params.q2, params.q2_target, config.target_tau)
                elif updates % config.target_sync == 0:
                    sync_target(params.q1, params.q1_target)
                    sync_target(params.q2, params.q2_target)
            if tr.done:
                break
            state = tr.s_next
        if updates > 0 and not all(math.isfinite(v) for v in losses):
            diverged = True
        if (episode + 1) % config.eval_interval == 0 or episode == config.episodes - 1:
            policy_label = greedy_policy_hash(params, model)
        g1, g2 = select_next_actions(params, model.start_state)
        q_opt = None
        if opt is not None:
            v1, v2 = critic_values(params, opt[0])
            q_opt = (v1[opt[1], opt[2]], v2[opt[1], opt[2]])
        record.append(sum(tr.r1 for tr in trs), sum(tr.r2 for tr in trs),
                      model.action_names[0][g1], model.action_names[1][g2], policy_label,
                      classify_episode(model, trs), model.joint_name(trs[0].a1, trs[0].a2), q_opt)
        log_per_step(writer, {'tag': 'bilevel_ac', 'step': episode, 'unit': 'episode',
                              'log_interval': config.log_interval,
                              'loss_dict': {'return1': record.returns1[-1], 'return2': record.returns2[-1],
                                            'td1': losses[0], 'td2': losses[1], 'actor': losses[2],
                                            'epsilon': eps}})
        if diverged:
            logging.warning('bilevel_ac on {} seed {} diverged at episode {}'.format(model.name, config.seed, episode))
            break
    record.finish(*evaluate_greedy(model, lambda s: select_next_actions(params, s), rng),
                  fraction=config.convergence_fraction)
    record.diverged = record.diverged or diverged
    if not record.converged:
        logging.warning('bilevel_ac on {} seed {} did not settle on a greedy policy'.format(model.name, config.seed))
    return params, record


@dataclass
class ExecutionStats:
    episodes: List[List[Transition]]
    mean_return1: float
    mean_return2: float
    outcome_shares: Dict[str, float]

    def joint_actions(self) -> List[List[Tuple[int, int]]]:
        return [[(tr.a1, tr.a2) for tr in ep] for ep in self.episodes]


def _stats(model: MarkovGameModel, episodes: List[List[Transition]]) -> ExecutionStats:
    shares: Dict[str, float] = {}
    for ep in episodes:
        label = classify_episode(model, ep)
        shares[label] = shares.get(label, 0.0) + 1.0 / len(episodes)
    return ExecutionStats(episodes,
                          float(np.mean([sum(tr.r1 for tr in ep) for ep in episodes])),
                          float(np.mean([sum(tr.r2 for tr in ep) for ep in episodes])),
                          dict(sorted(shares.items())))


def execute_decentralized(params: BiACParams, model: MarkovGameModel, episodes: int,
                          rng: np.random.Generator) -> ExecutionStats:
    """Each agent acts from its own copy of the trained leader critic and follower actor.

    Both copies recompute the leader's action from the shared state; the
    follower answers that action with its actor's greedy choice.
    """
    if episodes < 1:
        raise ValueError('episodes should be positive, got {}'.format(episodes))
    leader = copy.deepcopy(params)
    follower = copy.deepcopy(params)

    def act(state):
        a1, _ = select_next_actions(leader, state)
        a1_seen, a2 = select_next_actions(follower, state)
        assert a1_seen == a1, 'agents disagree on the leader action at state {}'.format(state)
        return a1, a2

    return _stats(model, [rollout(model, act, rng) for _ in range(episodes)])


def execute_centralized(params: BiACParams, model: MarkovGameModel, episodes: int,
                        rng: np.random.Generator) -> ExecutionStats:
    if episodes < 1:
        raise ValueError('episodes should be positive, got {}'.format(episodes))
    return _stats(model, [rollout(model, lambda s: select_next_actions(params, s), rng) for _ in range(episodes)])


def save_params(params: BiACParams, path: str, model_name: str, config: BiACConfig, seed: int):
    info = {'env': model_name, 'config_hash': config_hash(asdict(config)), 'seed': int(seed),
            'n_actions': list(params.n_actions), 'reward_scale': params.reward_scale,
            'critic_rule': CRITIC_RULE}
    save_model(params.state_dict(), path, info)


def load_params(params: BiACParams, path: str) -> Dict:
    """Load a checkpoint into ``params`` (built with the same shapes); returns its manifest."""
    state_dict, info = load_model(path)
    params.load_state_dict(state_dict)
    return info
