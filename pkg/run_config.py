"""
Run configuration management module.
Handles loading, validating and saving JSON run configurations and turning
them into problem, observation and batch objects.
"""

import copy
import json
import logging
import os
from fractions import Fraction

from errors import ConfigError, KppError
from experiments import BatchConfig
from inverse import EVALUATION_CAP, ObservationConfig
from param_space import UNIT_A, UNIT_B, BumpBasis, field_from_record
from pde_core import BoundaryCoefficients, Domain, InitialCondition, ProblemSpec, default_dt
from verify import VerifySettings

logger = logging.getLogger(__name__)

# Reference setting: Neumann ends, u_i = 0.2, eps = 0.3, x0 = 2/3, n = 10
DEFAULT_CONFIG = {
    'domain': {'a': 0.0, 'b': 1.0, 'n_cells': 960},
    'problem': {'D': 0.1, 'gamma': 1.0},
    'bc': {'alpha1': 0.0, 'beta1': 1.0, 'alpha2': 0.0, 'beta2': 1.0},
    'initial': {'kind': 'constant', 'value': 0.2},
    'mu': {'kind': 'random', 'n': 10, 'seed': 1},
    'obs': {'x0': '2/3', 'eps': 0.3, 'use_derivative': True},
    'solver': {'dt': None, 't_end': None},
    'inversion': {'criterion': 'G', 'cap': EVALUATION_CAP, 'n': 10, 'h0': None, 'reference_trace': None},
    'batch': {'n_samples': 20, 'base_seed': 0, 'criterion': 'both', 'workers': 1},
}

REQUIRED_PHYSICS = ('D', 'gamma')


def _line_of(text, key):
    """1-based line of the first occurrence of a JSON key, or 1."""
    needle = f'"{key}"'
    for number, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return number
    return 1


def parse_number(value, name):
    """Float from a JSON number or a fraction string such as '2/3'."""
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            pass
    raise ConfigError(f"{name}: expected a number, got {value!r}")


def default_config():
    return copy.deepcopy(DEFAULT_CONFIG)


def load_run_config(path=None, require_physics=False):
    """Load a run configuration and merge it over the defaults.

    With require_physics the file must state problem.D and problem.gamma.
    """
    config = default_config()
    if path is None:
        if require_physics:
            raise ConfigError("this command needs --config with a problem block (D, gamma)")
        return config

    try:
        with open(path, 'r') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config: {e}")

    if not text.strip():
        loaded = {}
    else:
        try:
            loaded = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}")
    if not isinstance(loaded, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")

    for block, values in loaded.items():
        if block not in config:
            raise ConfigError(f"{path}:{_line_of(text, block)}: unknown config block '{block}'")
        if not isinstance(values, dict):
            raise ConfigError(f"{path}:{_line_of(text, block)}: block '{block}' must be an object")
        if block in ('mu', 'initial'):
            # kind-dependent records replace the default wholesale
            config[block] = dict(values)
            continue
        for key, value in values.items():
            if key not in config[block]:
                raise ConfigError(f"{path}:{_line_of(text, key)}: {block}: unknown field '{key}'")
            config[block][key] = value

    if require_physics:
        problem = loaded.get('problem')
        if problem is None:
            raise ConfigError(f"{path}:1: missing required block 'problem' (fields {', '.join(REQUIRED_PHYSICS)})")
        for key in REQUIRED_PHYSICS:
            if key not in problem:
                raise ConfigError(f"{path}:{_line_of(text, 'problem')}: problem: missing required field '{key}'")

    logger.info(f"Loaded run configuration from {path}")
    return config


def apply_overrides(config, cells=None, dt=None, samples=None, seed=None, criterion=None, workers=None):
    """Command-line flags take precedence over the file."""
    config = copy.deepcopy(config)
    if cells is not None:
        config['domain']['n_cells'] = cells
    if dt is not None:
        config['solver']['dt'] = dt
    if samples is not None:
        config['batch']['n_samples'] = samples
    if seed is not None:
        config['batch']['base_seed'] = seed
        if config['mu'].get('kind') == 'random':
            config['mu']['seed'] = seed
    if criterion is not None:
        config['batch']['criterion'] = criterion
        if criterion in ('G', 'H'):
            config['inversion']['criterion'] = criterion
    if workers is not None:
        config['batch']['workers'] = workers
    return config


def build_domain(config):
    block = config['domain']
    n_cells = block['n_cells']
    if isinstance(n_cells, bool) or not isinstance(n_cells, int):
        raise ConfigError(f"domain.n_cells: expected an integer, got {n_cells!r}")
    return Domain(parse_number(block['a'], 'domain.a'), parse_number(block['b'], 'domain.b'), n_cells)


def build_bc(config):
    block = config['bc']
    return BoundaryCoefficients(*(parse_number(block[k], f"bc.{k}") for k in ('alpha1', 'beta1', 'alpha2', 'beta2')))


def build_initial(config, domain):
    block = config['initial']
    kind = block.get('kind', 'constant')
    if kind == 'constant':
        return InitialCondition.constant(domain, parse_number(block.get('value', 0.2), 'initial.value'))
    if kind == 'vanishing':
        x0 = parse_number(block.get('x0', config['obs']['x0']), 'initial.x0')
        level = parse_number(block.get('level', 0.2), 'initial.level')
        return InitialCondition.vanishing_at(domain, domain.nodes[domain.node_index(x0)], level)
    if kind == 'grid':
        return InitialCondition(block['values'])
    raise ConfigError(f"initial: unknown kind '{kind}'")


def build_mu(config, domain):
    return field_from_record(config['mu'], domain)


def build_problem(config, mu=None):
    domain = build_domain(config)
    block = config['problem']
    return ProblemSpec(domain=domain,
                       D=parse_number(block['D'], 'problem.D'),
                       gamma=parse_number(block['gamma'], 'problem.gamma'),
                       mu=mu if mu is not None else build_mu(config, domain),
                       bc=build_bc(config),
                       u_init=build_initial(config, domain))


def build_observation(config, criterion=None):
    block = config['obs']
    use_derivative = bool(block['use_derivative'])
    if criterion is not None:
        use_derivative = criterion == 'G'
    return ObservationConfig(parse_number(block['x0'], 'obs.x0'), parse_number(block['eps'], 'obs.eps'),
                             use_derivative)


def solver_settings(config):
    """(t_end, dt): t_end defaults to eps, dt to eps / 600."""
    eps = parse_number(config['obs']['eps'], 'obs.eps')
    block = config['solver']
    t_end = eps if block['t_end'] is None else parse_number(block['t_end'], 'solver.t_end')
    dt = default_dt(eps) if block['dt'] is None else parse_number(block['dt'], 'solver.dt')
    return t_end, dt


def build_basis(config):
    return BumpBasis(int(config['inversion']['n']))


def build_batch_config(config):
    batch = config['batch']
    problem = config['problem']
    obs = config['obs']
    return BatchConfig(n_samples=batch['n_samples'], base_seed=int(batch['base_seed']),
                       D=parse_number(problem['D'], 'problem.D'),
                       gamma=parse_number(problem['gamma'], 'problem.gamma'),
                       level=parse_number(config['initial'].get('value', 0.2), 'initial.value'),
                       eps=parse_number(obs['eps'], 'obs.eps'), x0=parse_number(obs['x0'], 'obs.x0'),
                       n=int(config['inversion']['n']), cap=int(config['inversion']['cap']),
                       criterion=batch['criterion'], n_cells=build_domain(config).n_cells,
                       dt=solver_settings(config)[1], workers=int(batch['workers']))


def build_verify_settings(config):
    problem = config['problem']
    obs = config['obs']
    return VerifySettings(n_cells=build_domain(config).n_cells, dt=solver_settings(config)[1],
                          eps=parse_number(obs['eps'], 'obs.eps'), x0=parse_number(obs['x0'], 'obs.x0'),
                          D=parse_number(problem['D'], 'problem.D'),
                          gamma=parse_number(problem['gamma'], 'problem.gamma'),
                          level=parse_number(config['initial'].get('value', 0.2), 'initial.value'),
                          n=int(config['inversion']['n']), base_seed=int(config['batch']['base_seed']))


def validate_run_config(config):
    """Validate a merged configuration.

    Returns (ok, problems) and never raises.
    """
    problems = []
    try:
        problem = build_problem(config)
        obs = build_observation(config)
        unit = (UNIT_A, UNIT_B)
        if config['mu']['kind'] in ('bump', 'random') and (problem.domain.a, problem.domain.b) != unit:
            problems.append(f"mu of kind '{config['mu']['kind']}' is a bump field on [{UNIT_A}, {UNIT_B}], "
                            f"domain is [{problem.domain.a}, {problem.domain.b}]")
        obs.check(problem.domain, problem.bc)
        problem.domain.node_index(obs.x0)
        t_end, dt = solver_settings(config)
        if t_end < obs.eps:
            problems.append(f"solver.t_end={t_end} is shorter than obs.eps={obs.eps}")
        if dt > t_end:
            problems.append(f"solver.dt={dt} exceeds t_end={t_end}")
    except KppError as e:
        problems.append(str(e))
    except (KeyError, TypeError, ValueError) as e:
        problems.append(f"malformed configuration: {e}")
    if config['inversion']['criterion'] not in ('G', 'H'):
        problems.append(f"inversion.criterion must be G or H, got {config['inversion']['criterion']}")
    if config['batch']['criterion'] not in ('G', 'H', 'both'):
        problems.append(f"batch.criterion must be G, H or both, got {config['batch']['criterion']}")
    reference = config['inversion']['reference_trace']
    if reference and not os.path.exists(reference):
        problems.append(f"inversion.reference_trace {reference} does not exist")
    return len(problems) == 0, problems
