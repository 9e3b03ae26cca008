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

import datetime
import os
import re
from typing import Dict, Optional

import torch
import torch.optim as optim
from torch.utils.tensorboard import SummaryWriter

from stackeq.utils.file_utils import ensure_dir, logging, read_yaml, write_yaml


def init_optimizer(module: torch.nn.Module, lr: float, momentum: float = 0.9, optim_name: str = 'sgd'):
    if optim_name == 'sgd':
        return optim.SGD(module.parameters(), lr=lr, momentum=momentum)
    else:
        raise ValueError('unknown optimizer: {}'.format(optim_name))


def init_summarywriter(tensorboard_dir: Optional[str]) -> Optional[SummaryWriter]:
    writer = None
    if tensorboard_dir:
        ensure_dir(tensorboard_dir)
        writer = SummaryWriter(tensorboard_dir)
    return writer


def log_per_step(writer: Optional[SummaryWriter], info_dict: Dict):
    """Write ``info_dict['loss_dict']`` to TensorBoard and, every ``log_interval`` steps, to the log."""
    tag = info_dict['tag']
    step = info_dict['step']
    loss_dict = info_dict['loss_dict']

    if writer is not None:
        for k, v in loss_dict.items():
            writer.add_scalar('{}/{}'.format(tag, k), v, step + 1)

    log_interval = info_dict.get('log_interval', 0)
    if log_interval > 0 and (step + 1) % log_interval == 0:
        log_str = '{} {} {} '.format(tag, info_dict.get('unit', 'step'), step + 1)
        for name, value in loss_dict.items():
            log_str += '{} {:.6f} '.format(name, value)
        logging.debug(log_str)


def save_model(state_dict: Dict, model_path: str, info_dict: Dict):
    """Save ``state_dict`` with torch and an info manifest next to it as YAML."""
    ensure_dir(os.path.dirname(model_path))
    torch.save(state_dict, model_path)
    info_path = re.sub('.pt$', '.yaml', model_path)
    info_dict = dict(info_dict)
    info_dict['save_time'] = datetime.datetime.now().strftime('%d/%m/%Y %H:%M:%S')
    write_yaml(info_path, info_dict)
    logging.info('Checkpoint: save to checkpoint {}'.format(model_path))


def load_model(model_path: str):
    state_dict = torch.load(model_path, map_location='cpu')
    info_path = re.sub('.pt$', '.yaml', model_path)
    info_dict = read_yaml(info_path) if os.path.exists(info_path) else {}
    return state_dict, info_dict
