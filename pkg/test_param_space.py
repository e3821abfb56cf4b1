#!/usr/bin/env python3
import math

import numpy as np
import pytest

from errors import ConfigError, DomainError
from param_space import (BumpBasis, BumpCoefficients, GridSamples, bump_j, eval_mu, field_from_record,
                         sample_random_mu, unit_grid)
from pde_core import Domain


def test_bump_values():
    assert bump_j(0.0) == 1.0
    assert bump_j(2.0) == 0.0
    assert bump_j(-2.0) == 0.0
    assert bump_j(3.0) == 0.0
    assert bump_j(1.0) == pytest.approx(math.exp(-4.0 / 3.0), rel=1e-14)
    assert bump_j(1.0) == pytest.approx(0.2635971, abs=1e-7)


def test_bump_is_even_and_vectorized():
    x = np.linspace(-2.5, 2.5, 101)
    values = bump_j(x)
    assert values.shape == x.shape
    assert np.array_equal(values, bump_j(-x))
    assert np.all(values <= 1.0)
    # close to the support edge the exponent underflows to exactly zero
    assert bump_j(1.999999) == 0.0


def test_basis_centers():
    basis = BumpBasis(10)
    assert basis.size == 11
    assert basis.scale == 8.0
    assert basis.centers[0] == pytest.approx(-0.125)
    assert basis.centers[5] == pytest.approx(0.5)
    assert basis.centers[9] == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        BumpBasis(2)


def test_zero_coefficients_give_zero_field():
    mu = BumpCoefficients(BumpBasis(10), np.zeros(11))
    assert np.all(mu.evaluate(unit_grid(101)) == 0.0)


def test_single_coefficient_at_its_center():
    h = np.zeros(11)
    h[1] = 1.0
    mu = BumpCoefficients(BumpBasis(10), h)
    assert eval_mu(mu, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert eval_mu(mu, 0.125) == pytest.approx(math.exp(-4.0 / 3.0))


def test_wrong_coefficient_count():
    with pytest.raises(ConfigError):
        BumpCoefficients(BumpBasis(10), np.zeros(10))


def test_evaluation_outside_domain():
    mu = sample_random_mu(BumpBasis(10), 3)
    with pytest.raises(DomainError, match="evaluation outside domain"):
        eval_mu(mu, 1.5)
    with pytest.raises(DomainError):
        mu.evaluate(np.array([0.5, -0.1]))
    grid = GridSamples([1.0, 2.0, 3.0], 0.0, 2.0)
    with pytest.raises(DomainError):
        grid.evaluate(2.5)


def test_linearity_in_coefficients():
    basis = BumpBasis(10)
    first = sample_random_mu(basis, 1)
    second = sample_random_mu(basis, 2)
    x = unit_grid(257)
    assert np.max(np.abs((first + second).evaluate(x) - first.evaluate(x) - second.evaluate(x))) <= 1e-13
    assert np.allclose(first.scaled(2.0).evaluate(x), 2.0 * first.evaluate(x), rtol=0, atol=1e-13)


def test_random_sampling_is_deterministic():
    basis = BumpBasis(10)
    assert np.array_equal(sample_random_mu(basis, 7).h, sample_random_mu(basis, 7).h)
    assert not np.array_equal(sample_random_mu(basis, 7).h, sample_random_mu(basis, 8).h)


def test_random_sampling_statistics():
    basis = BumpBasis(10)
    draws = np.array([sample_random_mu(basis, seed).h for seed in range(10000)])
    assert np.all(np.abs(draws.mean(axis=0)) < 0.2)
    assert draws.min() > -5.0 and draws.max() < 5.0


def test_random_field_bound():
    basis = BumpBasis(10)
    x = unit_grid(2001)
    for seed in range(20):
        mu = sample_random_mu(basis, seed)
        assert np.max(np.abs(mu.evaluate(x))) <= np.sum(np.abs(mu.h)) <= 55.0


def test_random_field_is_continuous():
    mu = sample_random_mu(BumpBasis(10), 11)
    x = unit_grid(20001)
    jumps = np.abs(np.diff(mu.evaluate(x)))
    # j' is bounded by 2 and the dilation is 8, with at most four bumps overlapping
    assert np.max(jumps) <= 4 * 5.0 * 8.0 * 2.0 * (x[1] - x[0])


def test_reflection_of_bump_field():
    mu = sample_random_mu(BumpBasis(10), 4)
    x = unit_grid(501)
    assert np.allclose(mu.reflect().evaluate(x), mu.evaluate(1.0 - x), rtol=0, atol=1e-12)


def test_grid_samples_interpolate():
    grid = GridSamples([0.0, 1.0, 4.0], 0.0, 1.0)
    assert grid.evaluate(0.25) == pytest.approx(0.5)
    assert grid.evaluate(0.75) == pytest.approx(2.5)
    assert np.array_equal(grid.reflect().values, [4.0, 1.0, 0.0])
    constant = GridSamples.constant(1.5, 0.0, 3.0)
    assert np.all(constant.evaluate(np.linspace(0, 3, 7)) == 1.5)


def test_grid_samples_exact_on_matching_nodes():
    domain = Domain(0.0, 1.0, 12)
    values = np.sin(domain.nodes) + 2.0
    grid = GridSamples(values, 0.0, 1.0)
    assert np.array_equal(grid.on_nodes(domain.nodes), values)


def test_field_records():
    domain = Domain(0.0, 2.0, 8)
    bump = field_from_record({'kind': 'bump', 'n': 4, 'h': [1, 2, 3, 4, 5]})
    assert isinstance(bump, BumpCoefficients)
    assert bump.basis.n == 4
    rebuilt = field_from_record(bump.to_record())
    assert np.array_equal(rebuilt.h, bump.h)

    random = field_from_record({'kind': 'random', 'n': 10, 'seed': 5})
    assert np.array_equal(random.h, sample_random_mu(BumpBasis(10), 5).h)

    constant = field_from_record({'kind': 'constant', 'value': 2.0}, domain)
    assert constant.evaluate(1.9) == 2.0

    grid = field_from_record({'kind': 'grid', 'values': [1, 2]}, domain)
    assert grid.evaluate(1.0) == pytest.approx(1.5)


def test_bad_field_records():
    with pytest.raises(ConfigError, match="unknown mu kind"):
        field_from_record({'kind': 'spline'})
    with pytest.raises(ConfigError, match="missing field"):
        field_from_record({'kind': 'random', 'n': 10})
    with pytest.raises(ConfigError):
        field_from_record({'n': 10})


@pytest.mark.parametrize('n', [4, 10])
def test_bumps_vanish_outside_their_support(n):
    basis = BumpBasis(n)
    x = unit_grid(2001)
    values = basis.matrix(x)
    assert basis.half_width == pytest.approx(2.0 / (n - 2))
    for i, center in enumerate(basis.centers):
        outside = np.abs(x - center) >= basis.half_width
        inside = np.abs(x - center) < 0.5 * basis.half_width
        assert np.all(values[outside, i] == 0.0)
        assert np.all(values[inside, i] > 0.0)
