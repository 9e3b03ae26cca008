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
"""Run an experiment across seeds and aggregate it into a summary table."""

import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import yaml
from hyperpyyaml import load_hyperpyyaml

from stackeq.bench.plot_data import emit_plot_data
from stackeq.biac.bilevel_ac import BiACConfig, save_params, train_biac
from stackeq.env.envs import OPTIMAL_OUTCOME, evaluate_greedy, make_env
from stackeq.game.study import StudyConfig, StudyResult, se_vs_ne_study, write_study_csv
from stackeq.tabular.bilevel_q import TabularConfig, bilevel_value_iteration, greedy_policy, save_qtable, train_bilevel_q
from stackeq.tabular.independent_q import train_independent_q
from stackeq.utils.executor import Executor
from stackeq.utils.file_utils import ensure_dir, logging, write_csv, write_json, write_yaml
from stackeq.utils.run_record import RunRecord
from stackeq.utils.train_utils import init_summarywriter

EXPERIMENTS = ('escape', 'maintain', 'grid', 'merge', 'se_vs_ne', 'counterexample')
ALGORITHMS = ('bilevel_q', 'bilevel_ac', 'independent_q', 'value_iteration')
CONF_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))), 'conf')

SUMMARY_HEADER = ('experiment', 'algorithm', 'seeds', 'mean_return_1', 'mean_return_2', 'optimality_rate',
                  'converged_rate', 'leader_first', 'follower_first', 'crash')


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    algorithm: Optional[str]
    seeds: Tuple[int, ...]
    out_dir: str
    overrides: Dict = field(default_factory=dict)
    config_path: Optional[str] = None
    num_workers: int = 1
    tensorboard_dir: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, 'seeds', tuple(int(s) for s in self.seeds))
        if self.experiment not in EXPERIMENTS:
            raise ValueError('unknown experiment {}, choose from {}'.format(self.experiment, EXPERIMENTS))
        if self.experiment == 'se_vs_ne':
            if self.algorithm is not None:
                raise ValueError('se_vs_ne is a study and takes no algorithm, got {}'.format(self.algorithm))
        elif self.algorithm not in ALGORITHMS:
            raise ValueError('unknown algorithm {}, choose from {}'.format(self.algorithm, ALGORITHMS))
        if len(self.seeds) == 0:
            raise ValueError('at least one seed is needed')
        if self.num_workers < 1:
            raise ValueError('num_workers should be >= 1, got {}'.format(self.num_workers))


@dataclass(frozen=True)
class SummaryRow:
    experiment: str
    algorithm: str
    seeds: int
    mean_return_1: float
    mean_return_2: float
    optimality_rate: float
    converged_rate: float
    leader_first: Optional[float] = None
    follower_first: Optional[float] = None
    crash: Optional[float] = None

    def as_tuple(self):
        return tuple(getattr(self, name) for name in SUMMARY_HEADER)


@dataclass
class SummaryTable:
    rows: List[SummaryRow] = field(default_factory=list)
    study: Optional[StudyResult] = None

    def row(self, algorithm: str) -> SummaryRow:
        for r in self.rows:
            if r.algorithm == algorithm:
                return r
        raise KeyError(algorithm)

    def write(self, csv_path: str, json_path: str):
        write_csv(csv_path, SUMMARY_HEADER, [r.as_tuple() for r in self.rows])
        write_json(json_path, [asdict(r) for r in self.rows])


def parse_overrides(items) -> Dict:
    """['bilevel_q.episodes=500', ...] -> {'bilevel_q': {'episodes': 500}}, values parsed as YAML."""
    overrides: Dict = {}
    for item in items or ():
        if '=' not in item:
            raise ValueError('override should look like key.sub=value, got {}'.format(item))
        key, value = item.split('=', 1)
        node = overrides
        parts = key.strip().split('.')
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = yaml.safe_load(value)
    return overrides


def load_config(experiment: str, config_path: Optional[str] = None, overrides: Optional[Dict] = None) -> Dict:
    path = config_path or os.path.join(CONF_DIR, '{}.yaml'.format(experiment))
    if not os.path.exists(path):
        raise ValueError('config file {} does not exist'.format(path))
    with open(path, 'r') as f:
        try:
            configs = load_hyperpyyaml(f, overrides=overrides or {})
        except KeyError as e:
            raise ValueError('override {} matches no key of {}'.format(e, path))
    return configs


def summarize(experiment: str, algorithm: str, records: List[RunRecord]) -> SummaryRow:
    """Aggregate completed (non-diverged) runs; fractions are averaged over them."""
    if len(records) == 0:
        raise ValueError('cannot summarize an empty record set')
    done = [r for r in records if not r.diverged]
    if len(done) < len(records):
        logging.warning('{} of {} runs diverged and are left out'.format(len(records) - len(done), len(records)))
    label = OPTIMAL_OUTCOME[experiment]

    def mean(values):
        return float(np.mean(values)) if len(values) > 0 else float('nan')

    row = dict(experiment=experiment, algorithm=algorithm, seeds=len(done),
               mean_return_1=mean([r.final_return1 for r in done]),
               mean_return_2=mean([r.final_return2 for r in done]),
               optimality_rate=mean([1.0 if r.converged_to(label) else 0.0 for r in done]),
               converged_rate=mean([1.0 if r.converged else 0.0 for r in done]))
    if experiment == 'merge':
        for outcome in ('leader_first', 'follower_first', 'crash'):
            row[outcome] = mean([r.outcome_shares.get(outcome, 0.0) for r in done])
    return SummaryRow(**row)


def check_config(experiment: str, algorithm: str, env_kwargs: Dict, conf: Dict):
    """Build the environment and the algorithm config once; a bad nested key fails here, not in a worker."""
    try:
        make_env(experiment, **env_kwargs)
        if algorithm in ('bilevel_q', 'independent_q'):
            TabularConfig(**conf)
        elif algorithm == 'bilevel_ac':
            BiACConfig(**conf)
        elif algorithm == 'value_iteration':
            unknown = set(conf) - {'tolerance', 'max_sweeps'}
            if unknown:
                raise TypeError('unexpected keys {}'.format(sorted(unknown)))
    except TypeError as e:
        raise ValueError('bad config for {} {}: {}'.format(experiment, algorithm, e))


def run_seed(job: Dict) -> RunRecord:
    """Train one seed; module level so a process pool can pickle it."""
    experiment, algorithm, seed, out_dir = job['experiment'], job['algorithm'], job['seed'], job['out_dir']
    model = make_env(experiment, **job['env'])
    conf = dict(job['conf'])
    writer = None
    if job.get('tensorboard_dir'):
        writer = init_summarywriter(os.path.join(job['tensorboard_dir'], algorithm, 'seed_{}'.format(seed)))
    if algorithm == 'bilevel_q':
        q, _, record = train_bilevel_q(model, TabularConfig(**{**conf, 'seed': seed}), writer)
        save_qtable(q, os.path.join(out_dir, 'qtables', 'seed_{}.json'.format(seed)))
    elif algorithm == 'independent_q':
        _, _, record = train_independent_q(model, TabularConfig(**{**conf, 'seed': seed}), writer)
    elif algorithm == 'bilevel_ac':
        config = BiACConfig(**{**conf, 'seed': seed})
        params, record = train_biac(model, config, writer)
        save_params(params, os.path.join(out_dir, 'params', 'seed_{}.pt'.format(seed)), model.name, config, seed)
    elif algorithm == 'value_iteration':
        result = bilevel_value_iteration(model, **conf)
        policy = greedy_policy(model, result.q)
        record = RunRecord(model.name, algorithm, seed)
        record.finish(*evaluate_greedy(model, lambda s: policy[s]))
        record.converged = result.converged
        save_qtable(result.q, os.path.join(out_dir, 'qtables', 'seed_{}.json'.format(seed)))
    else:
        raise ValueError('unknown algorithm: {}'.format(algorithm))
    if writer is not None:
        writer.close()
    return record


def run_study(spec: ExperimentSpec, configs: Dict) -> SummaryTable:
    study_conf = dict(configs.get('study', {}))
    study_conf.setdefault('seed', spec.seeds[0])
    study_conf.setdefault('num_workers', spec.num_workers)
    config = StudyConfig(**study_conf)
    result = se_vs_ne_study(config, progress=True)
    write_study_csv(result, os.path.join(spec.out_dir, 'study.csv'))
    write_yaml(os.path.join(spec.out_dir, 'config.yaml'),
               {'experiment': spec.experiment, 'study': {k: (list(v) if isinstance(v, tuple) else v)
                                                         for k, v in asdict(config).items()}})
    return SummaryTable(study=result)


def run_experiment(spec: ExperimentSpec) -> SummaryTable:
    ensure_dir(spec.out_dir)
    configs = load_config(spec.experiment, spec.config_path, spec.overrides)
    if spec.experiment == 'se_vs_ne':
        return run_study(spec, configs)
    env_kwargs = dict(configs.get('env') or {})
    conf = dict(configs.get(spec.algorithm) or {})
    check_config(spec.experiment, spec.algorithm, env_kwargs, conf)
    jobs = [{'experiment': spec.experiment, 'algorithm': spec.algorithm, 'seed': seed, 'env': env_kwargs,
             'conf': conf, 'out_dir': spec.out_dir, 'tensorboard_dir': spec.tensorboard_dir}
            for seed in spec.seeds]
    records = Executor(spec.num_workers).run(run_seed, jobs, desc='{} {}'.format(spec.experiment, spec.algorithm))
    for record in records:
        record.write(os.path.join(spec.out_dir, 'runs', 'seed_{}.csv'.format(record.seed)),
                     os.path.join(spec.out_dir, 'runs', 'seed_{}.json'.format(record.seed)))
    table = SummaryTable([summarize(spec.experiment, spec.algorithm, records)])
    table.write(os.path.join(spec.out_dir, 'summary.csv'), os.path.join(spec.out_dir, 'summary.json'))
    if any(len(r) > 0 for r in records):
        emit_plot_data(records, os.path.join(spec.out_dir, 'curves'))
    write_yaml(os.path.join(spec.out_dir, 'config.yaml'),
               {'experiment': spec.experiment, 'algorithm': spec.algorithm, 'seeds': list(spec.seeds),
                'env': env_kwargs, spec.algorithm: conf})
    row = table.rows[0]
    logging.info('{} {} optimality {:.3f} returns ({:.3f}, {:.3f}) over {} seeds'.format(
        spec.experiment, spec.algorithm, row.optimality_rate, row.mean_return_1, row.mean_return_2, row.seeds))
    return table
