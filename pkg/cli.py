"""
KPP inverse toolkit - command-line entry point.
Forward solves, single inversions, batch experiments and verification suites.
"""

import argparse
import copy
import json
import logging
import os
import sys
from datetime import datetime

from dateutil import tz
from dotenv import load_dotenv

load_dotenv()

# Configure logging
log_level = os.getenv('LOG_LEVEL', 'WARN').upper()
logging.basicConfig(
    level=getattr(logging, log_level, logging.INFO),
    format='%(levelname)s:%(name)s:%(message)s'
)
logger = logging.getLogger(__name__)

from errors import ConfigError, KppError, TraceError
from experiments import FULL_SAMPLES, config_record, reconstructed_field, run_batch, true_field
from inverse import invert, synthesize_trace
from param_space import BumpCoefficients
from pde_core import extract_trace, solve_kpp
from result_formatter import (format_inversion_result, read_trace_csv, write_batch_csv, write_field_csv,
                              write_json, write_mu_csv, write_trace_csv)
from run_config import (apply_overrides, build_basis, build_batch_config, build_observation, build_problem,
                        build_verify_settings, load_run_config, solver_settings, validate_run_config)
from utils import default_out_dir, default_worker_count
from verify import SUITES, run_suite

TOOL_VERSION = '1.0.0'

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2


def build_manifest(command, config, inputs, outputs):
    """Everything needed to rerun a command."""
    return {
        'command': command,
        'config': config,
        'version': TOOL_VERSION,
        'timestamp': datetime.now(tz.tzlocal()).isoformat(),
        'inputs': inputs,
        'outputs': outputs,
    }


def _resolve_config(args, require_physics):
    config = load_run_config(args.config, require_physics=require_physics)
    config = apply_overrides(config, cells=args.cells, dt=args.dt, samples=args.samples, seed=args.seed,
                             criterion=args.criterion, workers=args.workers)
    ok, problems = validate_run_config(config)
    if not ok:
        anchor = args.config or 'defaults'
        raise ConfigError(f"{anchor}: " + "; ".join(problems))
    return config


def _materialized(config):
    """Config with the solver defaults resolved."""
    t_end, dt = solver_settings(config)
    config = copy.deepcopy(config)
    config['solver'] = {'dt': dt, 't_end': t_end}
    return config


def _finish(out_dir, command, config, inputs, outputs):
    manifest_path = os.path.join(out_dir, 'manifest.json')
    write_json(manifest_path, build_manifest(command, _materialized(config), inputs, outputs + [manifest_path]))


def cmd_forward(args):
    """Solve the configured problem; write the solution, the trace at x0 and a manifest."""
    config = _resolve_config(args, require_physics=True)
    problem = build_problem(config)
    obs = build_observation(config)
    t_end, dt = solver_settings(config)

    field = solve_kpp(problem, t_end, dt)
    trace = extract_trace(field, problem.domain, obs.x0, obs.eps, with_uxx=True)

    out = args.out
    solution_path = os.path.join(out, 'solution.csv')
    trace_path = os.path.join(out, 'trace.csv')
    write_field_csv(solution_path, field)
    write_trace_csv(trace_path, trace)
    _finish(out, 'forward', config, [args.config], [solution_path, trace_path])
    print(f"forward: {len(field.times)} time samples, trace of {len(trace)} samples at x0={trace.x0}")
    return EXIT_OK


def cmd_invert(args):
    """Reconstruct mu from a reference trace file or from a known ground-truth field."""
    config = _resolve_config(args, require_physics=True)
    criterion = config['inversion']['criterion']
    problem = build_problem(config)
    obs = build_observation(config, criterion)
    _, dt = solver_settings(config)
    basis = build_basis(config)

    reference_path = config['inversion']['reference_trace']
    mu_true = None
    inputs = [args.config]
    if reference_path:
        reference = read_trace_csv(reference_path, obs.x0)
        inputs.append(reference_path)
    else:
        mu_true = problem.mu
        reference = synthesize_trace(problem, obs, dt)

    h0 = config['inversion']['h0']
    result = invert(problem, obs, reference, dt, basis, cap=int(config['inversion']['cap']),
                    h0=h0, mu_true=mu_true)

    out = args.out
    result_path = os.path.join(out, 'result.json')
    outputs = [result_path]
    seed = config['mu'].get('seed')
    write_json(result_path, format_inversion_result(result, seed=seed))
    if mu_true is not None:
        true_path = os.path.join(out, 'mu_true.csv')
        write_mu_csv(true_path, mu_true)
        outputs.append(true_path)
    rec_path = os.path.join(out, 'mu_rec.csv')
    write_mu_csv(rec_path, BumpCoefficients(basis, result.h_star))
    outputs.append(rec_path)
    _finish(out, 'invert', config, inputs, outputs)

    error_text = 'unknown' if result.rel_l2_error is None else f"{result.rel_l2_error:.4f}"
    print(f"invert [{criterion}]: cost {result.final_cost:.3e}, rel L2 error {error_text}, "
          f"{result.evaluations} evaluations")
    return EXIT_OK


def cmd_batch(args):
    """Batch of random fields inverted under G and/or H."""
    config = _resolve_config(args, require_physics=False)
    if args.full:
        config['batch']['n_samples'] = FULL_SAMPLES
    batch = build_batch_config(config)
    summary = run_batch(batch)

    out = args.out
    results_path = os.path.join(out, 'batch_results.csv')
    summary_path = os.path.join(out, 'summary.json')
    write_batch_csv(results_path, summary.records)
    write_json(summary_path, {'config': config_record(batch), 'statistics': summary.statistics})
    outputs = [results_path, summary_path]

    for record in summary.records:
        if not record.ok:
            continue
        if record.criterion == batch.criteria[0]:
            path = os.path.join(out, f"mu_true_{record.k}.csv")
            write_mu_csv(path, true_field(batch, record))
            outputs.append(path)
        suffix = '' if record.criterion == 'G' else '_H'
        path = os.path.join(out, f"mu_rec{suffix}_{record.k}.csv")
        write_mu_csv(path, reconstructed_field(batch, record))
        outputs.append(path)
    _finish(out, 'batch', config, [args.config], outputs)

    for criterion in batch.criteria:
        stats = summary.statistics.get(criterion)
        if stats:
            print(f"batch [{criterion}]: {stats['count']} ok, {stats['failed']} failed, "
                  f"rel error mean {stats['rel_error']['mean']:.4f} (std {stats['rel_error']['std']:.4f}), "
                  f"cost mean {stats['cost']['mean']:.3e}")
    if 'separation_ratio' in summary.statistics:
        print(f"batch: separation ratio H/G = {summary.statistics['separation_ratio']:.2f}")
    return EXIT_OK if all(r.ok for r in summary.records) else EXIT_NUMERICAL


def cmd_verify(args):
    """Run a verification suite; nonzero exit if any verdict fails."""
    config = _resolve_config(args, require_physics=False)
    verdicts = run_suite(args.suite, build_verify_settings(config))

    out = args.out
    verdict_path = os.path.join(out, f"verify_{args.suite}.json")
    write_json(verdict_path, verdicts)
    _finish(out, f"verify {args.suite}", config, [args.config], [verdict_path])
    for record in verdicts:
        print(json.dumps(record, sort_keys=True))
    return EXIT_OK if all(v['passed'] for v in verdicts) else EXIT_NUMERICAL


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='PATH', help='JSON run configuration')
    common.add_argument('--out', metavar='DIR', default=default_out_dir(), help='output directory')
    common.add_argument('--workers', metavar='N', type=int, default=None, help='batch worker processes')
    common.add_argument('--samples', metavar='N', type=int, default=None, help='batch sample count')
    common.add_argument('--criterion', choices=('G', 'H', 'both'), default=None)
    common.add_argument('--seed', metavar='N', type=int, default=None, help='base seed')
    common.add_argument('--cells', metavar='N', type=int, default=None, help='number of grid cells')
    common.add_argument('--dt', metavar='X', type=float, default=None, help='time step')

    parser = argparse.ArgumentParser(prog='kpp', description='Fisher-KPP forward solver and growth-rate inversion')
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('forward', parents=[common], help='solve and write solution/trace CSVs').set_defaults(func=cmd_forward)
    sub.add_parser('invert', parents=[common], help='reconstruct mu from a point trace').set_defaults(func=cmd_invert)
    batch = sub.add_parser('batch', parents=[common], help='batch of random reconstructions')
    batch.add_argument('--full', action='store_true', help=f'run {FULL_SAMPLES} samples')
    batch.set_defaults(func=cmd_batch)
    verify = sub.add_parser('verify', parents=[common], help='identifiability and positivity checks')
    verify.add_argument('suite', choices=SUITES)
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.workers is None and os.getenv('KPP_WORKERS'):
        args.workers = default_worker_count()
    try:
        return args.func(args)
    except (ConfigError, TraceError) as e:
        logger.error(f"Configuration error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except KppError as e:
        logger.error(f"Numerical failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == '__main__':
    sys.exit(main())
