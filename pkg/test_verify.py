#!/usr/bin/env python3
from dataclasses import replace

import numpy as np
import pytest

from errors import ConfigError, InvalidProblemError, StationaryError
from inverse import ObservationConfig
from param_space import BumpBasis, BumpCoefficients, GridSamples, sample_random_mu
from pde_core import BoundaryCoefficients, InitialCondition, SpaceTimeField, solve_kpp
from verify import (VerifySettings, counterexample_check, distinguishability_check,
                    gamma_identifiability_check, positivity_check, reflection_identity, run_suite,
                    stationary_nonuniqueness_check, stationary_residual, stationary_solve, transformed_pair)

SETTINGS = VerifySettings(n_cells=48, dt=0.005, counterexample_samples=3, positivity_samples=4)
DT = SETTINGS.dt


def random_mu(seed=1):
    return sample_random_mu(BumpBasis(10), seed)


def test_compare_identical_traces():
    spec = SETTINGS.problem(random_mu())
    comparison = distinguishability_check(spec.mu, spec.mu, spec, ObservationConfig(2.0 / 3.0, 0.3), DT)
    assert comparison.max_diff <= 1e-12
    assert comparison.mu_l2_distance == 0.0


def test_shifted_growth_rate_is_distinguishable():
    mu = random_mu()
    spec = SETTINGS.problem(mu)
    shifted = GridSamples(mu.on_nodes(spec.domain.nodes) + 1.0, 0.0, 1.0)
    comparison = distinguishability_check(mu, shifted, spec, ObservationConfig(2.0 / 3.0, 0.3), DT)
    assert comparison.sup_diff_u > 1e-3
    assert comparison.mu_l2_distance == pytest.approx(1.0)


def test_reflected_coefficient_shares_midpoint_u_trace():
    for seed in (1, 2):
        mu = random_mu(seed)
        comparison = counterexample_check(mu, SETTINGS.problem(mu), 0.3, DT)
        assert comparison.sup_diff_u <= 1e-8
        assert comparison.sup_diff_ux > 1e-6
        assert comparison.mu_l2_distance > 0.0


def test_symmetric_coefficient_is_its_own_reflection():
    symmetric = BumpCoefficients(BumpBasis(10), [1.0, -2.0, 0.5, 3.0, 1.0, 2.0, 1.0, 3.0, 0.5, -2.0, 1.0])
    comparison = counterexample_check(symmetric, SETTINGS.problem(symmetric), 0.3, DT)
    assert comparison.max_diff <= 1e-12
    assert comparison.mu_l2_distance == 0.0


def test_counterexample_needs_symmetric_setting():
    mu = random_mu()
    spec = SETTINGS.problem(mu)
    asymmetric_bc = BoundaryCoefficients(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(InvalidProblemError, match="symmetry hypotheses violated"):
        counterexample_check(mu, replace(spec, bc=asymmetric_bc), 0.3, DT)
    tilted = InitialCondition.from_function(spec.domain, lambda x: 0.2 + 0.05 * np.cos(np.pi * x))
    with pytest.raises(InvalidProblemError):
        counterexample_check(mu, replace(spec, u_init=tilted), 0.3, DT)


def test_reflection_identity_holds():
    mu = random_mu(3)
    identity = reflection_identity(mu, SETTINGS.problem(mu), 0.3, DT)
    assert identity['max_reflection_gap'] <= 1e-8
    assert identity['max_midpoint_ux_sum'] <= 1e-6


def test_gamma_changes_the_trace():
    mu = random_mu()
    domain = SETTINGS.domain
    spec = SETTINGS.problem(mu, InitialCondition.vanishing_at(domain, 2.0 / 3.0, 0.2))
    same = gamma_identifiability_check(mu, 1.0, 1.0, spec, 2.0 / 3.0, 0.3, DT)
    assert same.max_diff <= 1e-12
    different = gamma_identifiability_check(mu, 1.0, 2.0, spec, 2.0 / 3.0, 0.3, DT)
    assert different.max_diff > 1e-6
    assert different.sup_diff_uxx >= 0.0


def test_gamma_check_needs_vanishing_datum():
    mu = random_mu()
    spec = SETTINGS.problem(mu)
    with pytest.raises(InvalidProblemError, match="vanishing initial datum"):
        gamma_identifiability_check(mu, 1.0, 2.0, spec, 2.0 / 3.0, 0.3, DT)


def test_constant_equilibrium():
    spec = SETTINGS.problem(GridSamples.constant(1.0))
    state = stationary_solve(spec)
    assert np.max(np.abs(state.values - 1.0)) <= 1e-6
    assert state.residual <= 1e-6
    assert stationary_residual(state.values, spec) == state.residual


def test_decaying_population_has_no_equilibrium():
    spec = SETTINGS.problem(GridSamples.constant(-1.0))
    with pytest.raises(StationaryError, match="no positive equilibrium reached"):
        stationary_solve(spec)


def test_equilibrium_does_not_identify_the_pair():
    sample = random_mu(2)
    domain = SETTINGS.domain
    mu = GridSamples(1.0 + 0.1 * sample.on_nodes(domain.nodes), 0.0, 1.0)
    spec = SETTINGS.problem(mu)
    state = stationary_solve(spec)
    assert np.all(state.values > 0)
    pair = transformed_pair(spec, state.values, 0.5)
    assert pair.gamma == pytest.approx(0.5)
    assert stationary_residual(state.values, pair) <= 1e-6
    record = stationary_nonuniqueness_check(spec, state=state)
    assert record['check'] == 'stationary_nonuniqueness'
    assert record['passed']
    assert set(record['metrics']['residuals']) == {'0.25', '0.5', '0.75'}


def test_positivity_of_solutions():
    spec = SETTINGS.problem(BumpCoefficients(BumpBasis(10), np.full(11, -5.0)))
    field = solve_kpp(spec, 0.3, DT)
    report = positivity_check(field, spec.domain)
    assert report['ok']
    assert report['min_interior'] > 0.0
    assert report['violations'] == []

    flat = solve_kpp(SETTINGS.problem(GridSamples.constant(1.0)), 0.3, DT)
    assert positivity_check(flat)['min_global'] == 0.2


def test_positivity_detector():
    values = np.full((3, 5), 0.2)
    values[2, 3] = -1.0
    report = positivity_check(SpaceTimeField(np.array([0.0, 0.1, 0.2]), values))
    assert not report['ok']
    assert report['min_global'] == -1.0
    assert report['violations'][0] == {'t': 0.2, 'value': -1.0, 'node': 3}


def test_run_suites():
    for name in ('gamma', 'distinguishability', 'positivity', 'stationary'):
        verdicts = run_suite(name, SETTINGS)
        assert verdicts
        for v in verdicts:
            assert set(v) == {'check', 'passed', 'metrics'}
            assert v['passed'], v


def test_counterexample_suite():
    checks = {v['check']: v for v in run_suite('counterexample', SETTINGS)}
    assert checks['counterexample']['passed']
    assert checks['reflection_identity']['passed']
    assert len(checks['counterexample']['metrics']['samples']) == 3


def test_unknown_suite():
    with pytest.raises(ConfigError):
        run_suite('everything', SETTINGS)
