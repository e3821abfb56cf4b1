"""
Batch reconstruction experiments.
Samples random bump fields, inverts them with the G and/or H criterion and
aggregates cost and error statistics.
"""

import logging
from dataclasses import asdict, dataclass, field
from multiprocessing import Pool

import numpy as np

from errors import BatchError, ConfigError, KppError
from inverse import EVALUATION_CAP, ObservationConfig, invert, relative_l2_error, synthesize_trace
from param_space import BumpBasis, BumpCoefficients, GridSamples, sample_random_mu
from pde_core import BoundaryCoefficients, Domain, InitialCondition, ProblemSpec, default_dt

logger = logging.getLogger(__name__)

DESK_SAMPLES = 20
FULL_SAMPLES = 100
CRITERIA = ('G', 'H')


@dataclass(frozen=True)
class BatchConfig:
    """Batch protocol; defaults are the reference setting (Neumann ends, u_i = 0.2)."""

    n_samples: int = DESK_SAMPLES
    base_seed: int = 0
    D: float = 0.1
    gamma: float = 1.0
    level: float = 0.2
    eps: float = 0.3
    x0: float = 2.0 / 3.0
    n: int = 10
    cap: int = EVALUATION_CAP
    criterion: str = 'both'
    n_cells: int = 960
    dt: float = None
    workers: int = 1

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ConfigError(f"n_samples must be a positive integer, got {self.n_samples}")
        if self.criterion not in ('G', 'H', 'both'):
            raise ConfigError(f"criterion must be G, H or both, got {self.criterion}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")

    @property
    def criteria(self):
        return CRITERIA if self.criterion == 'both' else (self.criterion,)

    @property
    def time_step(self):
        return self.dt if self.dt is not None else default_dt(self.eps)

    @property
    def basis(self):
        return BumpBasis(self.n)

    def seed_for(self, k):
        return self.base_seed + k

    def problem(self, mu):
        domain = Domain(0.0, 1.0, self.n_cells)
        return ProblemSpec(domain=domain, D=self.D, gamma=self.gamma, mu=mu,
                           bc=BoundaryCoefficients(0.0, 1.0, 0.0, 1.0),
                           u_init=InitialCondition.constant(domain, self.level))


@dataclass
class SampleRecord:
    k: int
    seed: int
    criterion: str
    status: str = 'ok'
    final_cost: float = float('nan')
    evaluations: int = 0
    rel_error: float = float('nan')
    baseline_rel_error: float = float('nan')
    h_true: list = field(default_factory=list)
    h_star: list = field(default_factory=list)
    error: str = ''

    @property
    def ok(self):
        return self.status == 'ok'


@dataclass
class BatchSummary:
    records: list
    statistics: dict

    def records_for(self, criterion):
        return [r for r in self.records if r.criterion == criterion]


def run_sample(config, k):
    """Invert sample k under every configured criterion."""
    seed = config.seed_for(k)
    basis = config.basis
    dt = config.time_step
    records = []
    try:
        mu_true = sample_random_mu(basis, seed)
        problem = config.problem(mu_true)
        reference = synthesize_trace(problem, ObservationConfig(config.x0, config.eps, True), dt)
        baseline = relative_l2_error(mu_true, GridSamples.constant(mu_true.evaluate(config.x0)))
    except KppError as e:
        logger.warning(f"Sample {k} (seed {seed}) could not be set up: {e}")
        return [SampleRecord(k, seed, c, status='failed', error=str(e)) for c in config.criteria]

    for criterion in config.criteria:
        obs = ObservationConfig(config.x0, config.eps, use_derivative=(criterion == 'G'))
        record = SampleRecord(k, seed, criterion, baseline_rel_error=baseline,
                              h_true=[float(v) for v in mu_true.h])
        try:
            result = invert(problem, obs, reference, dt, basis, cap=config.cap, mu_true=mu_true)
            record.final_cost = float(result.final_cost)
            record.evaluations = int(result.evaluations)
            record.rel_error = float(result.rel_l2_error)
            record.h_star = [float(v) for v in result.h_star]
            logger.info(f"Sample {k} [{criterion}]: cost {record.final_cost:.3e}, rel error {record.rel_error:.4f}, "
                        f"{record.evaluations} evaluations")
        except KppError as e:
            logger.warning(f"Sample {k} [{criterion}] failed: {e}")
            record.status = 'failed'
            record.error = str(e)
        records.append(record)
    return records


def _run_sample_task(task):
    config, k = task
    return run_sample(config, k)


def describe(values):
    """min, max, mean and population standard deviation."""
    values = np.asarray(values, dtype=float)
    return {'min': float(np.min(values)), 'max': float(np.max(values)),
            'mean': float(np.mean(values)), 'std': float(np.std(values))}


def summarize(records):
    """Statistics over the successful records."""
    good = [r for r in records if r.ok]
    if not good:
        raise BatchError("no successful inversions")
    return {
        'count': len(good),
        'failed': len(records) - len(good),
        'cost': describe([r.final_cost for r in good]),
        'rel_error': describe([r.rel_error for r in good]),
        'baseline_rel_error': describe([r.baseline_rel_error for r in good]),
        'evaluations': describe([r.evaluations for r in good]),
    }


def batch_statistics(records, criteria):
    """Per-criterion statistics plus the H/G separation and baseline/G ratios."""
    statistics = {}
    for criterion in criteria:
        subset = [r for r in records if r.criterion == criterion]
        try:
            statistics[criterion] = summarize(subset)
        except BatchError as e:
            logger.warning(f"Criterion {criterion}: {e}")
            statistics[criterion] = None
    g_stats = statistics.get('G')
    h_stats = statistics.get('H')
    if g_stats and g_stats['rel_error']['mean'] > 0:
        g_mean = g_stats['rel_error']['mean']
        statistics['baseline_ratio'] = g_stats['baseline_rel_error']['mean'] / g_mean
        if h_stats:
            statistics['separation_ratio'] = h_stats['rel_error']['mean'] / g_mean
    if all(statistics.get(c) is None for c in criteria):
        raise BatchError("no successful inversions")
    return statistics


def run_batch(config):
    """Run every sample (in parallel when workers > 1) and aggregate."""
    tasks = [(config, k) for k in range(1, config.n_samples + 1)]
    logger.info(f"Running batch of {config.n_samples} samples, criterion {config.criterion}, "
                f"{config.workers} worker(s)")
    if config.workers > 1:
        with Pool(config.workers) as pool:
            chunks = pool.map(_run_sample_task, tasks)
    else:
        chunks = [_run_sample_task(task) for task in tasks]
    records = sorted((r for chunk in chunks for r in chunk), key=lambda r: (r.k, r.criterion))
    return BatchSummary(records, batch_statistics(records, config.criteria))


def config_record(config):
    record = asdict(config)
    record['dt'] = config.time_step
    return record


def reconstructed_field(config, record):
    return BumpCoefficients(config.basis, record.h_star)


def true_field(config, record):
    return BumpCoefficients(config.basis, record.h_true)
