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

from __future__ import print_function
import argparse
import os
import sys
ROOT_DIR = os.path.dirname(os.path.abspath(__file__))
sys.path.append('{}/../..'.format(ROOT_DIR))

from stackeq.bench.counterexample import verify_counterexample
from stackeq.bench.experiment import ALGORITHMS, EXPERIMENTS, ExperimentSpec, parse_overrides, run_experiment
from stackeq.game.matrix_game import (cooperation_level, enumerate_pure_nash, find_global_optimal_point,
                                      load_game, pareto_dominates, solve_minimax, solve_stackelberg)
from stackeq.game.study import StudyConfig, se_vs_ne_study, write_study_csv
from stackeq.utils.file_utils import ensure_dir, logging, write_yaml


def get_args(argv=None):
    parser = argparse.ArgumentParser(description='Stackelberg equilibria in matrix and Markov games')
    parser.add_argument('--verbose', action='store_true', default=False, help='log at DEBUG level')
    sub = parser.add_subparsers(dest='command', required=True)

    solve = sub.add_parser('solve', help='solve a matrix game stored as json')
    solve.add_argument('--game', required=True, help='game json with "u1" and "u2"')
    solve.add_argument('--nash', action='store_true', help='enumerate pure Nash equilibria')
    solve.add_argument('--weak', action='store_true', help='also keep weak (tie) Nash equilibria')
    solve.add_argument('--stackelberg', action='store_true', help='strong Stackelberg solution')
    solve.add_argument('--minimax', action='store_true', help='pure security level of the leader')
    solve.add_argument('--coop-level', dest='coop_level', action='store_true', help='cooperation level')

    run = sub.add_parser('run', help='run an experiment over seeds')
    run.add_argument('--experiment', required=True, choices=EXPERIMENTS, help='experiment name')
    run.add_argument('--algo', choices=ALGORITHMS, help='algorithm, not used by se_vs_ne')
    run.add_argument('--seeds', type=int, default=10, help='number of seeds, 0..N-1')
    run.add_argument('--seed_offset', type=int, default=0, help='first seed')
    run.add_argument('--out', required=True, help='output directory')
    run.add_argument('--config', help='config file, conf/<experiment>.yaml by default')
    run.add_argument('--override', action='append', default=[], help='key.sub=value, repeatable')
    run.add_argument('--num_workers', type=int, default=1, help='worker processes, one seed each')
    run.add_argument('--tensorboard_dir', default=None, help='tensorboard log dir')

    study = sub.add_parser('study', help='Stackelberg vs Nash payoff study on random games')
    study.add_argument('--sizes', type=int, default=10, help='actions per agent')
    study.add_argument('--covariances', default='-1,-0.5,0,0.5,0.9,1.0', help='comma separated list')
    study.add_argument('--trials', type=int, default=2000, help='games per covariance')
    study.add_argument('--seed', type=int, default=0, help='study seed')
    study.add_argument('--num_workers', type=int, default=1, help='threads per covariance')
    study.add_argument('--out', required=True, help='output directory')

    verify = sub.add_parser('verify-counterexample', help='check the bi-level Bellman counterexample')
    verify.add_argument('--gamma', type=float, default=0.9, help='discount of the counterexample game')
    return parser.parse_args(argv)


def _cell(game, point):
    a1, a2 = point
    return '{} ({:g}, {:g})'.format(game.name_of(a1, a2), game.u1[a1, a2], game.u2[a1, a2])


def solve(args):
    game = load_game(args.game)
    everything = not (args.nash or args.stackelberg or args.minimax or args.coop_level)
    se = solve_stackelberg(game)
    if args.stackelberg or everything:
        print('stackelberg: {}'.format(_cell(game, (se.leader_action, se.follower_action))))
    if args.nash or everything:
        nash = enumerate_pure_nash(game, strict=not args.weak)
        if len(nash) == 0:
            print('pure nash: none')
        for point in nash:
            dominated = pareto_dominates((se.leader_payoff, se.follower_payoff), (game.u1[point], game.u2[point]))
            print('pure nash: {}{}'.format(_cell(game, point), ', pareto-dominated by stackelberg' if dominated else ''))
    if args.minimax or everything:
        a1, value = solve_minimax(game)
        name = game.action_names1[a1] if game.action_names1 else str(a1)
        print('minimax: leader {} secures {:g}'.format(name, value))
    if args.coop_level or everything:
        try:
            print('cooperation level: {:.6f}'.format(cooperation_level(game)))
        except ValueError as e:
            print('cooperation level: undefined ({})'.format(e))
    if everything:
        point = find_global_optimal_point(game)
        print('global optimal point: {}'.format('none' if point is None else _cell(game, point)))
    return 0


def run(args):
    if args.seeds < 1:
        raise ValueError('--seeds should be positive, got {}'.format(args.seeds))
    spec = ExperimentSpec(experiment=args.experiment,
                          algorithm=args.algo,
                          seeds=tuple(range(args.seed_offset, args.seed_offset + args.seeds)),
                          out_dir=args.out,
                          overrides=parse_overrides(args.override),
                          config_path=args.config,
                          num_workers=args.num_workers,
                          tensorboard_dir=args.tensorboard_dir)
    table = run_experiment(spec)
    for row in table.rows:
        print('{} {}: optimality {:.3f} converged {:.3f} returns ({:.3f}, {:.3f})'.format(
            row.experiment, row.algorithm, row.optimality_rate, row.converged_rate,
            row.mean_return_1, row.mean_return_2))
    return 0


def study(args):
    covariances = tuple(float(c) for c in args.covariances.split(',') if c.strip())
    config = StudyConfig(size_n=args.sizes, covariances=covariances, trials=args.trials,
                         seed=args.seed, num_workers=args.num_workers)
    ensure_dir(args.out)
    result = se_vs_ne_study(config, progress=True)
    write_study_csv(result, '{}/study.csv'.format(args.out))
    write_yaml('{}/config.yaml'.format(args.out),
               {'study': {'size_n': config.size_n, 'covariances': list(config.covariances),
                          'trials': config.trials, 'seed': config.seed}})
    for row in result.rows:
        print('covariance {:g}: se ({:.3f}, {:.3f}) ne ({:.3f}, {:.3f}) ne count {:.3f}'.format(
            row.covariance, row.se_leader, row.se_follower, row.ne_leader, row.ne_follower, row.ne_count))
    return 0


def verify(args):
    report = verify_counterexample(args.gamma)
    print(report.text())
    return 0 if report.passed else 1


COMMANDS = {'solve': solve, 'run': run, 'study': study, 'verify-counterexample': verify}


def main(argv=None):
    args = get_args(argv)
    logging.getLogger().setLevel(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return COMMANDS[args.command](args)
    except ValueError as e:
        print('stackeq {}: {}'.format(args.command, e), file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
