#!/usr/bin/env python3
import numpy as np
import pytest

from errors import ConfigError
from experiments import BatchConfig, config_record, reconstructed_field, run_batch, run_sample, true_field
from param_space import sample_random_mu
from result_formatter import write_batch_csv


def small_config(**overrides):
    settings = dict(n_samples=2, base_seed=10, n=4, cap=30, n_cells=48, dt=0.005, workers=1)
    settings.update(overrides)
    return BatchConfig(**settings)


def test_batch_config_validation():
    with pytest.raises(ConfigError):
        BatchConfig(n_samples=0)
    with pytest.raises(ConfigError):
        BatchConfig(criterion='K')
    with pytest.raises(ConfigError):
        BatchConfig(workers=0)


def test_batch_config_defaults():
    config = BatchConfig()
    assert config.n_samples == 20
    assert config.cap == 2000
    assert config.criteria == ('G', 'H')
    assert config.time_step == pytest.approx(0.3 / 600)
    assert config.seed_for(3) == 3
    assert BatchConfig(criterion='H').criteria == ('H',)


def test_problem_uses_reference_setting():
    config = small_config()
    mu = sample_random_mu(config.basis, 1)
    problem = config.problem(mu)
    assert problem.domain.n_cells == 48
    assert problem.bc.is_symmetric
    assert np.all(problem.u_init.values == 0.2)


def test_run_sample_records_both_criteria():
    config = small_config()
    records = run_sample(config, 1)
    assert [r.criterion for r in records] == ['G', 'H']
    for r in records:
        assert r.ok, r.error
        assert r.seed == 11
        assert r.evaluations <= config.cap
        assert r.final_cost >= 0.0
        assert r.rel_error >= 0.0
        assert r.baseline_rel_error > 0.0
        assert len(r.h_true) == len(r.h_star) == 5
    assert records[0].h_true == records[1].h_true


def test_run_batch_is_reproducible():
    config = small_config()
    first = run_batch(config)
    second = run_batch(config)
    assert [(r.k, r.criterion) for r in first.records] == [(1, 'G'), (1, 'H'), (2, 'G'), (2, 'H')]
    assert [r.h_star for r in first.records] == [r.h_star for r in second.records]
    assert first.statistics['G']['count'] == 2
    assert 'separation_ratio' in first.statistics


def test_fields_from_records():
    config = small_config(criterion='G', n_samples=1)
    summary = run_batch(config)
    r = summary.records[0]
    assert np.array_equal(true_field(config, r).h, sample_random_mu(config.basis, config.seed_for(1)).h)
    assert np.array_equal(reconstructed_field(config, r).h, r.h_star)
    record = config_record(config)
    assert record['dt'] == 0.005
    assert record['criterion'] == 'G'


def test_parallel_batch_matches_serial(tmp_path):
    serial = run_batch(small_config(n_samples=3, cap=20))
    parallel = run_batch(small_config(n_samples=3, cap=20, workers=2))
    assert [(r.k, r.criterion, r.h_star, r.final_cost) for r in parallel.records] == \
        [(r.k, r.criterion, r.h_star, r.final_cost) for r in serial.records]
    assert parallel.statistics == serial.statistics

    write_batch_csv(tmp_path / 'serial.csv', serial.records)
    write_batch_csv(tmp_path / 'parallel.csv', parallel.records)
    assert (tmp_path / 'serial.csv').read_bytes() == (tmp_path / 'parallel.csv').read_bytes()
