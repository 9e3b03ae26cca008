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

from concurrent import futures
from typing import Callable, List, Sequence

import torch
from tqdm import tqdm

from stackeq.utils.file_utils import logging


def _init_worker():
    # seeds already run in parallel, one thread per worker keeps runs independent
    torch.set_num_threads(1)


class Executor:
    """Runs one job per seed, in a process pool when ``num_workers`` > 1.

    Results come back in job order regardless of completion order, so the
    reduce step is deterministic.
    """

    def __init__(self, num_workers: int = 1, progress: bool = True):
        assert num_workers >= 1, 'num_workers should be >= 1, got {}'.format(num_workers)
        self.num_workers = num_workers
        self.progress = progress

    def run(self, fn: Callable, jobs: Sequence, desc: str = 'seeds') -> List:
        ''' Apply fn to every job
        '''
        logging.info('{} {} jobs on {} workers'.format(desc, len(jobs), self.num_workers))
        if self.num_workers == 1:
            return [fn(job) for job in tqdm(jobs, desc=desc, disable=not self.progress)]
        results = [None] * len(jobs)
        with futures.ProcessPoolExecutor(max_workers=self.num_workers, initializer=_init_worker) as pool:
            pending = {pool.submit(fn, job): i for i, job in enumerate(jobs)}
            with tqdm(total=len(jobs), desc=desc, disable=not self.progress) as bar:
                for future in futures.as_completed(pending):
                    results[pending[future]] = future.result()
                    bar.update(1)
        return results
