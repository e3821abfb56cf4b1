#!/usr/bin/env python3
"""Reference-scale runs (960 cells, dt = eps/600). Enable with RUN_SLOW=true."""
import numpy as np
import pytest

from experiments import BatchConfig, run_batch
from inverse import ObservationConfig, synthesize_trace
from param_space import BumpBasis, sample_random_mu
from pde_core import Domain, convergence_study, homogeneous_problem, logistic_reference, solve_kpp
from utils import default_worker_count, env_flag
from verify import VerifySettings, counterexample_check, run_suite

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(not env_flag('RUN_SLOW'), reason='set RUN_SLOW=true for reference-scale runs'),
]

SETTINGS = VerifySettings()


def test_logistic_oracle_on_reference_grid():
    field = solve_kpp(homogeneous_problem(Domain(0.0, 1.0, 960)), 0.3, 0.3 / 600)
    exact = logistic_reference(1.0, 1.0, 0.2, 0.3)
    assert abs(exact - 0.25232) < 5e-6
    assert np.allclose(field.values[-1], exact, rtol=1e-5, atol=0)


def test_convergence_from_reference_grid():
    rows = convergence_study()
    assert rows[0]['n_cells'] == 240
    assert rows[0]['dt'] == 0.3 / 2000
    assert rows[0]['max_error'] / rows[1]['max_error'] >= 3.6
    assert rows[1]['order'] >= 1.85


def test_reference_trace_length():
    mu = sample_random_mu(BumpBasis(10), 1)
    trace = synthesize_trace(SETTINGS.problem(mu), ObservationConfig(2.0 / 3.0, 0.3, True), SETTINGS.time_step)
    assert len(trace) == 600


def test_midpoint_counterexample_on_reference_grid():
    mu = sample_random_mu(BumpBasis(10), 1)
    comparison = counterexample_check(mu, SETTINGS.problem(mu), 0.3, SETTINGS.time_step)
    assert comparison.sup_diff_u <= 1e-8
    assert comparison.sup_diff_ux > 1e-8


def test_verify_all_suites_pass():
    for record in run_suite('all', SETTINGS):
        assert record['passed'], record


def test_single_g_reconstruction():
    summary = run_batch(BatchConfig(n_samples=1, criterion='G'))
    record = summary.records[0]
    assert record.ok, record.error
    assert record.final_cost <= 1e-4
    assert record.rel_error < 0.2


def test_separation_between_criteria():
    summary = run_batch(BatchConfig(n_samples=20, criterion='both', workers=default_worker_count()))
    statistics = summary.statistics
    assert statistics['G']['rel_error']['mean'] < 0.10
    assert statistics['H']['rel_error']['mean'] > 0.30
    assert statistics['separation_ratio'] >= 5.0
    assert all(r.final_cost < 1e-3 for r in summary.records_for('G') if r.ok)
