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
import csv
import json
import logging
from typing import Dict, Iterable, List, Sequence

import yaml

logging.basicConfig(level=logging.DEBUG,
                    format='%(asctime)s %(levelname)s %(message)s')


def ensure_dir(path):
    if path == '':
        return path
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise ValueError('output directory {} is not writable: {}'.format(path, e))
    if not os.access(path, os.W_OK):
        raise ValueError('output directory {} is not writable'.format(path))
    return path


def read_json(path):
    with open(path, 'r', encoding='utf8') as fin:
        return json.load(fin)


def write_json(path, obj):
    ensure_dir(os.path.dirname(path))
    with open(path, 'w', encoding='utf8') as fout:
        json.dump(obj, fout, indent=2, sort_keys=True)
        fout.write('\n')


def read_json_lines(path) -> List[Dict]:
    lists = []
    with open(path, 'r', encoding='utf8') as fin:
        for line in fin:
            line = line.strip()
            if line:
                lists.append(json.loads(line))
    return lists


def write_json_lines(path, rows: Iterable[Dict]):
    ensure_dir(os.path.dirname(path))
    with open(path, 'w', encoding='utf8') as fout:
        for row in rows:
            fout.write(json.dumps(row, sort_keys=True))
            fout.write('\n')


def format_cell(value):
    # repr keeps floats round-trippable and byte-stable across runs
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ''
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]):
    ensure_dir(os.path.dirname(path))
    with open(path, 'w', encoding='utf8', newline='') as fout:
        writer = csv.writer(fout, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])


def read_csv(path) -> List[Dict[str, str]]:
    with open(path, 'r', encoding='utf8', newline='') as fin:
        return list(csv.DictReader(fin))


def write_yaml(path, obj):
    ensure_dir(os.path.dirname(path))
    with open(path, 'w', encoding='utf8') as fout:
        fout.write(yaml.safe_dump(obj, sort_keys=True))


def read_yaml(path):
    with open(path, 'r', encoding='utf8') as fin:
        return yaml.safe_load(fin)
