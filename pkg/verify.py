"""
Executable identifiability checks.
Distinct parameters must give distinct point traces; reflected problems share
their midpoint trace; equilibria cannot separate (mu, gamma); solutions stay positive.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from errors import ConfigError, InvalidProblemError, KppError, StationaryError
from inverse import ObservationConfig
from param_space import BumpBasis, BumpCoefficients, GridSamples, sample_random_mu
from pde_core import (BoundaryCoefficients, Domain, InitialCondition, KppStepper, ProblemSpec,
                      default_dt, extract_trace, left_first_derivative, right_first_derivative,
                      solve_kpp, validate_initial_condition)

logger = logging.getLogger(__name__)

NOISE_FLOOR = 1e-8
SAME_PROBLEM_TOL = 1e-12
STATIONARY_TOL = 1e-10
STATIONARY_RESIDUAL_TOL = 1e-6
STATIONARY_DT = 1.0
STATIONARY_T_MAX = 1e3
SYMMETRY_TOL = 1e-12
SLOPE_SEPARATION = 1e-4
SUITES = ('positivity', 'counterexample', 'distinguishability', 'gamma', 'stationary', 'all')


@dataclass(frozen=True)
class TraceComparison:
    """Sup-norm differences between two point traces over (0, eps]."""

    sup_diff_u: float
    sup_diff_ux: float
    sup_diff_uxx: float = 0.0
    mu_l2_distance: float = None

    @property
    def max_diff(self):
        return max(self.sup_diff_u, self.sup_diff_ux, self.sup_diff_uxx)

    def metrics(self):
        return {'sup_diff_u': self.sup_diff_u, 'sup_diff_ux': self.sup_diff_ux,
                'sup_diff_uxx': self.sup_diff_uxx, 'mu_l2_distance': self.mu_l2_distance}


@dataclass(frozen=True, eq=False)
class StationaryState:
    values: np.ndarray
    residual: float
    time: float


@dataclass(frozen=True)
class VerifySettings:
    """Grid and problem used by the verdict suites."""

    n_cells: int = 960
    dt: float = None
    eps: float = 0.3
    x0: float = 2.0 / 3.0
    D: float = 0.1
    gamma: float = 1.0
    level: float = 0.2
    n: int = 10
    base_seed: int = 0
    counterexample_samples: int = 10
    positivity_samples: int = 50

    @property
    def time_step(self):
        return self.dt if self.dt is not None else default_dt(self.eps)

    @property
    def domain(self):
        return Domain(0.0, 1.0, self.n_cells)

    def problem(self, mu, u_init=None):
        domain = self.domain
        return ProblemSpec(domain=domain, D=self.D, gamma=self.gamma, mu=mu,
                           bc=BoundaryCoefficients(0.0, 1.0, 0.0, 1.0),
                           u_init=u_init or InitialCondition.constant(domain, self.level))


def verdict(check, passed, **metrics):
    """JSON-ready verdict record."""
    return {'check': check, 'passed': bool(passed), 'metrics': metrics}


def compare_traces(first, second, mu_l2_distance=None):
    def sup(a, b):
        a, b = np.asarray(a), np.asarray(b)
        return float(np.max(np.abs(a - b))) if a.size else 0.0

    return TraceComparison(sup(first.u, second.u), sup(first.u_x, second.u_x),
                           sup(first.u_xx, second.u_xx), mu_l2_distance)


def _trace(spec, x0, eps, dt, with_uxx=True):
    solution = solve_kpp(spec, eps, dt)
    return extract_trace(solution, spec.domain, x0, eps, with_uxx=with_uxx)


def _mu_distance(spec, mu1, mu2):
    nodes = spec.domain.nodes
    diff = mu1.on_nodes(nodes) - mu2.on_nodes(nodes)
    return float(np.sqrt(trapezoid(diff * diff, nodes)))


def symmetry_violations(spec):
    """Hypotheses under which a reflected coefficient yields the same midpoint trace."""
    problems = []
    if not spec.bc.is_symmetric:
        problems.append("boundary coefficients are not symmetric (alpha1 != alpha2 or beta1 != beta2)")
    u = spec.u_init.values
    if np.max(np.abs(u - u[::-1])) > SYMMETRY_TOL * (1.0 + np.max(np.abs(u))):
        problems.append("initial condition is not symmetric about the midpoint")
    if spec.domain.n_cells % 2:
        problems.append("grid has no node at the midpoint (odd n_cells)")
    return problems


def counterexample_check(mu, spec, eps=0.3, dt=None):
    """Compare midpoint traces of mu and its reflection mu(b - (x - a))."""
    problems = symmetry_violations(spec)
    if problems:
        raise InvalidProblemError(["symmetry hypotheses violated"] + problems)
    dt = dt or default_dt(eps)
    mid = spec.domain.midpoint
    reflected = mu.reflect()
    first = _trace(spec.with_mu(mu), mid, eps, dt)
    second = _trace(spec.with_mu(reflected), mid, eps, dt)
    return compare_traces(first, second, _mu_distance(spec, mu, reflected))


def reflection_identity(mu, spec, eps=0.3, dt=None):
    """max |u(t,x) - u~(t, b-(x-a))| and max |u_x(t,mid) + u~_x(t,mid)|."""
    problems = symmetry_violations(spec)
    if problems:
        raise InvalidProblemError(["symmetry hypotheses violated"] + problems)
    dt = dt or default_dt(eps)
    field = solve_kpp(spec.with_mu(mu), eps, dt)
    mirrored = solve_kpp(spec.with_mu(mu.reflect()), eps, dt)
    mid = spec.domain.midpoint
    first = extract_trace(field, spec.domain, mid, eps)
    second = extract_trace(mirrored, spec.domain, mid, eps)
    return {'max_reflection_gap': float(np.max(np.abs(field.values - mirrored.values[:, ::-1]))),
            'max_midpoint_ux_sum': float(np.max(np.abs(first.u_x + second.u_x)))}


def distinguishability_check(mu1, mu2, spec, obs, dt=None):
    """Trace differences at obs.x0 between two coefficients."""
    dt = dt or default_dt(obs.eps)
    obs.check(spec.domain, spec.bc)
    first = _trace(spec.with_mu(mu1), obs.x0, obs.eps, dt)
    second = _trace(spec.with_mu(mu2), obs.x0, obs.eps, dt)
    return compare_traces(first, second, _mu_distance(spec, mu1, mu2))


def gamma_identifiability_check(mu, gamma1, gamma2, spec, x0, eps=0.3, dt=None):
    """(u, u_x, u_xx) trace differences for two competition coefficients; needs u_i(x0) = 0."""
    j = spec.domain.node_index(x0)
    if spec.u_init.values[j] != 0.0:
        raise InvalidProblemError([f"vanishing initial datum at x0 required, u_i(x0) = {spec.u_init.values[j]}"])
    dt = dt or default_dt(eps)
    first = _trace(spec.with_mu(mu).with_gamma(gamma1), x0, eps, dt)
    second = _trace(spec.with_mu(mu).with_gamma(gamma2), x0, eps, dt)
    return compare_traces(first, second)


def stationary_residual(p, spec):
    """Max-norm residual of D p'' + p (mu - gamma p) = 0 with the Robin rows."""
    p = np.asarray(p, dtype=float)
    h = spec.domain.h
    mu = spec.mu_on_nodes()
    interior = (spec.D * (p[:-2] - 2.0 * p[1:-1] + p[2:]) / (h * h)
                + p[1:-1] * (mu[1:-1] - spec.gamma * p[1:-1]))
    left = spec.bc.alpha1 * p[0] - spec.bc.beta1 * left_first_derivative(p, h)
    right = spec.bc.alpha2 * p[-1] + spec.bc.beta2 * right_first_derivative(p, h)
    return float(max(np.max(np.abs(interior)), abs(left), abs(right)))


def stationary_solve(spec, dt=STATIONARY_DT, tol=STATIONARY_TOL, t_max=STATIONARY_T_MAX):
    """March with backward Euler until the step increment drops below tol."""
    ok, violations = validate_initial_condition(spec.u_init, spec.bc, spec.domain)
    if not ok:
        raise InvalidProblemError(violations)
    stepper = KppStepper(spec, dt, theta=1.0)
    u = spec.u_init.values.copy()
    t = 0.0
    step = 0
    while t < t_max:
        step += 1
        following = stepper.step(u, step)
        t += dt
        increment = float(np.max(np.abs(following - u)))
        u = following
        if increment < tol:
            break
    else:
        raise StationaryError(f"no positive equilibrium reached by t = {t_max}")

    if np.max(u) < NOISE_FLOOR or np.min(u) <= 0:
        raise StationaryError(f"no positive equilibrium reached: marching decayed to max {np.max(u):.3e} at t = {t}")
    residual = stationary_residual(u, spec)
    if residual > STATIONARY_RESIDUAL_TOL:
        raise StationaryError(f"stationary residual {residual:.3e} above {STATIONARY_RESIDUAL_TOL}")
    logger.info(f"Stationary state reached at t = {t} (residual {residual:.2e})")
    return StationaryState(u, residual, t)


def transformed_pair(spec, p, tau):
    """(mu - tau gamma p, (1 - tau) gamma): same equilibrium equation on p."""
    mu_nodes = spec.mu_on_nodes()
    mu_tilde = GridSamples(mu_nodes - tau * spec.gamma * p, spec.domain.a, spec.domain.b)
    return spec.with_mu(mu_tilde).with_gamma((1.0 - tau) * spec.gamma)


def stationary_nonuniqueness_check(spec, taus=(0.25, 0.5, 0.75), state=None):
    """Residuals of the transformed pairs on the equilibrium of (mu, gamma)."""
    state = state or stationary_solve(spec)
    residuals = {str(tau): stationary_residual(state.values, transformed_pair(spec, state.values, tau))
                 for tau in taus}
    passed = all(r <= STATIONARY_RESIDUAL_TOL for r in residuals.values())
    return verdict('stationary_nonuniqueness', passed, base_residual=state.residual, residuals=residuals)


def positivity_check(field, domain=None, limit=10):
    """Min over t >= dt on interior nodes must be > 0, global min >= -1e-8."""
    values = field.values
    later = values[1:, 1:-1]
    min_interior = float(np.min(later)) if later.size else float('inf')
    min_global = float(np.min(values))
    violations = []
    offending = np.argwhere(later <= 0)
    for k, j in offending[:limit]:
        where = {'t': float(field.times[k + 1]), 'value': float(later[k, j])}
        if domain is not None:
            where['x'] = float(domain.nodes[j + 1])
        else:
            where['node'] = int(j + 1)
        violations.append(where)
    below = np.argwhere(values < -NOISE_FLOOR)
    for k, j in below[:limit]:
        where = {'t': float(field.times[k]), 'value': float(values[k, j])}
        if domain is not None:
            where['x'] = float(domain.nodes[j])
        else:
            where['node'] = int(j)
        if where not in violations:
            violations.append(where)
    return {'ok': not violations, 'min_interior': min_interior, 'min_global': min_global,
            'violations': violations}


def _suite_positivity(settings):
    basis = BumpBasis(settings.n)
    dt = settings.time_step
    worst = {'min_interior': float('inf'), 'min_global': float('inf')}
    failures = []
    fields = [sample_random_mu(basis, settings.base_seed + k) for k in range(1, settings.positivity_samples + 1)]
    fields.append(BumpCoefficients(basis, np.full(basis.size, -5.0)))
    for index, mu in enumerate(fields):
        spec = settings.problem(mu)
        report = positivity_check(solve_kpp(spec, settings.eps, dt), spec.domain)
        worst['min_interior'] = min(worst['min_interior'], report['min_interior'])
        worst['min_global'] = min(worst['min_global'], report['min_global'])
        if not report['ok']:
            failures.append({'field': index, 'violations': report['violations']})
    return [verdict('positivity', not failures, fields=len(fields), failures=failures, **worst)]


def _suite_counterexample(settings):
    basis = BumpBasis(settings.n)
    first_mu = sample_random_mu(basis, settings.base_seed + 1)
    spec = settings.problem(first_mu)
    dt = settings.time_step
    rows = []
    passed = True
    for k in range(1, settings.counterexample_samples + 1):
        mu = sample_random_mu(basis, settings.base_seed + k)
        comparison = counterexample_check(mu, spec, settings.eps, dt)
        ok = comparison.sup_diff_u <= NOISE_FLOOR and comparison.sup_diff_ux > SLOPE_SEPARATION
        passed = passed and ok
        rows.append({'seed': settings.base_seed + k, **comparison.metrics()})
    identity = reflection_identity(first_mu, spec, settings.eps, dt)
    identity_ok = identity['max_reflection_gap'] <= NOISE_FLOOR and identity['max_midpoint_ux_sum'] <= 1e-6
    return [verdict('counterexample', passed, samples=rows),
            verdict('reflection_identity', identity_ok, **identity)]


def _suite_distinguishability(settings):
    basis = BumpBasis(settings.n)
    dt = settings.time_step
    mu = sample_random_mu(basis, settings.base_seed + 1)
    spec = settings.problem(mu)
    nodes = spec.domain.nodes
    shifted = GridSamples(mu.on_nodes(nodes) + 1.0, spec.domain.a, spec.domain.b)
    obs = ObservationConfig(settings.x0, settings.eps, True)
    same = distinguishability_check(mu, mu, spec, obs, dt)
    shift = distinguishability_check(mu, shifted, spec, obs, dt)
    mid_obs = ObservationConfig(spec.domain.midpoint, settings.eps, True)
    mirror = distinguishability_check(mu, mu.reflect(), spec, mid_obs, dt)
    return [
        verdict('distinguishability_identical', same.max_diff <= SAME_PROBLEM_TOL, **same.metrics()),
        verdict('distinguishability_shift', shift.sup_diff_u > 1e-3, **shift.metrics()),
        verdict('distinguishability_reflection', mirror.sup_diff_u <= NOISE_FLOOR and mirror.sup_diff_ux > NOISE_FLOOR,
                **mirror.metrics()),
    ]


def _suite_gamma(settings):
    basis = BumpBasis(settings.n)
    dt = settings.time_step
    domain = settings.domain
    mu = sample_random_mu(basis, settings.base_seed + 1)
    spec = settings.problem(mu, InitialCondition.vanishing_at(domain, settings.x0, settings.level))
    same = gamma_identifiability_check(mu, 1.0, 1.0, spec, settings.x0, settings.eps, dt)
    different = gamma_identifiability_check(mu, 1.0, 2.0, spec, settings.x0, settings.eps, dt)
    return [verdict('gamma_identical', same.max_diff <= SAME_PROBLEM_TOL, **same.metrics()),
            verdict('gamma_distinct', different.max_diff > 1e-6, **different.metrics())]


def _suite_stationary(settings):
    domain = settings.domain
    flat = settings.problem(GridSamples.constant(1.0, domain.a, domain.b))
    flat_state = stationary_solve(flat)
    flat_error = float(np.max(np.abs(flat_state.values - 1.0)))
    sample = sample_random_mu(BumpBasis(settings.n), settings.base_seed + 1)
    mu = GridSamples(1.0 + 0.1 * sample.on_nodes(domain.nodes), domain.a, domain.b)
    spec = settings.problem(mu)
    return [verdict('stationary_constant', flat_error <= 1e-6, max_error=flat_error, residual=flat_state.residual),
            stationary_nonuniqueness_check(spec)]


SUITE_RUNNERS = {
    'positivity': _suite_positivity,
    'counterexample': _suite_counterexample,
    'distinguishability': _suite_distinguishability,
    'gamma': _suite_gamma,
    'stationary': _suite_stationary,
}


def run_suite(name, settings=None):
    """Run one suite (or 'all') and return its verdict records."""
    settings = settings or VerifySettings()
    if name not in SUITES:
        raise ConfigError(f"unknown suite '{name}'")
    names = list(SUITE_RUNNERS) if name == 'all' else [name]
    verdicts = []
    for suite in names:
        logger.info(f"Running verify suite '{suite}'")
        try:
            verdicts.extend(SUITE_RUNNERS[suite](settings))
        except KppError as e:
            logger.error(f"Suite {suite} failed: {e}")
            verdicts.append(verdict(suite, False, error=str(e)))
    return verdicts
