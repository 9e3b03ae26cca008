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
"""Fully connected networks used as critics and actors."""

import math
from typing import Dict, Optional, Sequence, Tuple

import torch
import torch.nn as nn


class Mlp(nn.Module):
    """Three-layer perceptron: two ReLU hidden layers and a linear output.

    Weights are drawn uniformly in +-sqrt(6 / (fan_in + fan_out)) from
    ``generator``; biases start at zero.
    """

    def __init__(self,
                 input_size: int,
                 output_size: int,
                 hidden_sizes: Sequence[int] = (64, 64),
                 generator: Optional[torch.Generator] = None,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        assert input_size > 0 and output_size > 0, 'layer sizes should be positive'
        self.sizes = (input_size,) + tuple(hidden_sizes) + (output_size,)
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            layers.append(nn.Linear(fan_in, fan_out, dtype=dtype))
            if i < len(self.sizes) - 2:
                layers.append(nn.ReLU())
        self.layers = nn.Sequential(*layers)
        self.reset_parameters(generator)

    @property
    def input_size(self) -> int:
        return self.sizes[0]

    @property
    def output_size(self) -> int:
        return self.sizes[-1]

    @torch.no_grad()
    def reset_parameters(self, generator: Optional[torch.Generator] = None):
        for layer in self.layers:
            if isinstance(layer, nn.Linear):
                bound = math.sqrt(6.0 / (layer.in_features + layer.out_features))
                noise = torch.rand(layer.weight.shape, generator=generator, dtype=layer.weight.dtype)
                layer.weight.copy_((2.0 * noise - 1.0) * bound)
                layer.bias.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.layers(x)


def forward(net: Mlp, x: torch.Tensor) -> Tuple[torch.Tensor, Dict]:
    """Evaluate ``net`` and keep what ``backward`` needs."""
    if x.shape[-1] != net.input_size:
        raise ValueError('input has {} features, network expects {}'.format(x.shape[-1], net.input_size))
    x = x.detach().requires_grad_(True)
    y = net(x)
    return y, {'x': x, 'y': y}


def backward(net: Mlp, cache: Dict, dy: torch.Tensor) -> Dict[str, torch.Tensor]:
    """Gradients of <dy, y> w.r.t. every parameter (and the input under key 'input')."""
    y = cache['y']
    if dy.shape != y.shape:
        raise ValueError('output gradient has shape {}, output has {}'.format(tuple(dy.shape), tuple(y.shape)))
    names = [name for name, _ in net.named_parameters()]
    inputs = [p for _, p in net.named_parameters()] + [cache['x']]
    grads = torch.autograd.grad(y, inputs, grad_outputs=dy.to(y.dtype), allow_unused=True)
    out = {}
    for name, p, g in zip(names + ['input'], inputs, grads):
        out[name] = torch.zeros_like(p) if g is None else g
    return out


def sgd_step(net: Mlp, grads: Dict[str, torch.Tensor], optimizer: torch.optim.Optimizer):
    """Apply ``grads`` (keyed by parameter name) through ``optimizer``."""
    optimizer.zero_grad()
    for name, p in net.named_parameters():
        p.grad = grads[name].detach().clone()
    optimizer.step()


@torch.no_grad()
def sync_target(online: nn.Module, target: nn.Module, tau: Optional[float] = None):
    """Hard copy when ``tau`` is None or 1, otherwise target <- tau * online + (1 - tau) * target."""
    if tau is not None and not 0.0 <= tau <= 1.0:
        raise ValueError('soft update factor should lie in [0, 1], got {}'.format(tau))
    if tau is None or tau == 1.0:
        target.load_state_dict(online.state_dict())
        return
    if tau == 0.0:
        return
    for target_param, param in zip(target.parameters(), online.parameters()):
        target_param.data.copy_(tau * param.data + (1.0 - tau) * target_param.data)


def mlp_to_json(net: Mlp):
    return {'sizes': list(net.sizes),
            'params': {name: p.detach().cpu().tolist() for name, p in net.named_parameters()}}


def mlp_from_json(obj, dtype: torch.dtype = torch.float32) -> Mlp:
    sizes = obj['sizes']
    net = Mlp(sizes[0], sizes[-1], sizes[1:-1], dtype=dtype)
    net.load_state_dict({name: torch.tensor(v, dtype=dtype) for name, v in obj['params'].items()})
    return net
