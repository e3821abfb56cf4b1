"""
Single-point cost functionals and quasi-Newton reconstruction of mu.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import minimize as scipy_minimize

from errors import ConfigError, DegenerateFieldError, InvalidProblemError, SolverError, TraceError
from param_space import UNIT_A, UNIT_B, BumpCoefficients, unit_grid
from pde_core import extract_trace, solve_kpp, validate_initial_condition

logger = logging.getLogger(__name__)

EVALUATION_CAP = 2000
FD_REL_STEP = 1e-6
GRAD_TOL = 1e-8
STEP_TOL = 1e-12
LINE_SEARCH_FAILED = 2
REL_ERROR_POINTS = 2001


@dataclass(frozen=True)
class ObservationConfig:
    """Observation point, horizon and criterion (G with u_x, H without)."""

    x0: float = 2.0 / 3.0
    eps: float = 0.3
    use_derivative: bool = True

    @property
    def criterion(self):
        return 'G' if self.use_derivative else 'H'

    def check(self, domain, bc):
        """Raise ConfigError unless x0 is admissible for this domain and boundary."""
        if not self.eps > 0:
            raise ConfigError(f"observation horizon eps must be positive, got {self.eps}")
        if self.x0 < domain.a or self.x0 > domain.b:
            raise ConfigError(f"observation point {self.x0} outside [{domain.a}, {domain.b}]")
        if self.x0 == domain.a and not bc.beta1 > 0:
            raise ConfigError("observation at x0 = a needs beta1 > 0")
        if self.x0 == domain.b and not bc.beta2 > 0:
            raise ConfigError("observation at x0 = b needs beta2 > 0")


@dataclass(frozen=True)
class CostValue:
    total: float
    u_part: float
    ux_part: float = 0.0


@dataclass
class InversionResult:
    """Outcome of one reconstruction."""

    h_star: np.ndarray
    final_cost: float
    evaluations: int
    rel_l2_error: float = None
    trace_of_iterates: list = field(default_factory=list)
    h0: np.ndarray = None
    criterion: str = None
    seed: int = None
    message: str = ''


class EvaluationCapReached(Exception):
    """Raised by EvaluationBudget to stop the optimizer."""


class EvaluationBudget:
    """Counting wrapper around a cost function.

    Remembers the last point so repeated calls at the same x are free, keeps the
    best point seen, and stops the optimizer once the cap is used up.
    """

    def __init__(self, cost_fn, cap):
        self.cost_fn = cost_fn
        self.cap = int(cap)
        self.count = 0
        self.best_x = None
        self.best_f = np.inf
        self.history = []
        self._last_x = None
        self._last_f = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self._last_x is not None and np.array_equal(x, self._last_x):
            return self._last_f
        if self.count >= self.cap:
            raise EvaluationCapReached()
        value = float(self.cost_fn(x))
        self.count += 1
        self._last_x = x.copy()
        self._last_f = value
        if value < self.best_f or self.best_x is None:
            self.best_f = value
            self.best_x = x.copy()
            self.history.append((self.count, value))
        return value


def l2_time_norm(series, times, initial=None):
    """L2(0, eps) norm of a sampled time series by the trapezoidal rule.

    Without `initial` the first sample is held constant back to t = 0; with it,
    (0, initial) is prepended as an ordinary trapezoid node.
    """
    series = np.asarray(series, dtype=float)
    times = np.asarray(times, dtype=float)
    if series.size == 0:
        raise TraceError("empty trace")
    if series.size != times.size:
        raise TraceError(f"series has {series.size} samples but times has {times.size}")
    squared = series * series
    if initial is None:
        head = times[0] * squared[0]
    else:
        head = 0.5 * times[0] * (initial * initial + squared[0])
    return float(np.sqrt(head + trapezoid(squared, times)))


def _check_compatible(reference, trace):
    if len(reference) != len(trace) or not np.allclose(reference.times, trace.times, rtol=1e-12, atol=0.0):
        raise TraceError(f"incompatible discretization: reference trace has {len(reference)} samples, "
                         f"candidate has {len(trace)}")
    if abs(reference.x0 - trace.x0) > 1e-12 * max(1.0, abs(reference.x0)):
        raise TraceError(f"incompatible discretization: reference x0={reference.x0}, candidate x0={trace.x0}")


def candidate_trace(candidate, problem, obs, dt):
    """Forward solve with mu = candidate and extract its trace at x0."""
    spec = problem.with_mu(candidate)
    solution = solve_kpp(spec, obs.eps, dt)
    return extract_trace(solution, spec.domain, obs.x0, obs.eps, with_uxx=False)


def synthesize_trace(problem, obs, dt, with_uxx=False):
    """Reference trace of the problem's own mu."""
    solution = solve_kpp(problem, obs.eps, dt)
    return extract_trace(solution, problem.domain, obs.x0, obs.eps, with_uxx=with_uxx)


def cost(reference, candidate, problem, obs, dt):
    """G (use_derivative) or H cost of a candidate field against a reference trace."""
    trace = candidate_trace(candidate, problem, obs, dt)
    _check_compatible(reference, trace)
    u_part = l2_time_norm(trace.u - reference.u, trace.times, initial=0.0)
    ux_part = 0.0
    if obs.use_derivative:
        ux_part = l2_time_norm(trace.u_x - reference.u_x, trace.times, initial=0.0)
    return CostValue(u_part + ux_part, u_part, ux_part)


def make_cost_function(reference, problem, obs, dt, basis):
    """Cost as a function of the bump coefficient vector.

    Solver failures map to +inf so a line search can back off; any other
    error propagates.
    """
    def cost_of(h):
        candidate = BumpCoefficients(basis, h)
        try:
            return cost(reference, candidate, problem, obs, dt).total
        except SolverError as e:
            logger.debug(f"Candidate solve failed, returning inf: {e}")
            return np.inf
    return cost_of


def fd_gradient(h, cost_fn, f0=None):
    """Forward-difference gradient with step 1e-6 (1 + |h_i|)."""
    h = np.asarray(h, dtype=float)
    if f0 is None:
        f0 = cost_fn(h)
    grad = np.empty_like(h)
    for i in range(h.size):
        step = FD_REL_STEP * (1.0 + abs(h[i]))
        probe = h.copy()
        probe[i] += step
        grad[i] = (cost_fn(probe) - f0) / step
    return grad


def minimize(cost_fn, h0, cap=EVALUATION_CAP):
    """BFGS with a Wolfe line search and forward-difference gradients.

    Every cost evaluation, gradient probes included, counts against `cap`.
    A failed line search restarts BFGS from the best point with a fresh
    Hessian, so only the gradient test, the step test or the cap end the run.
    A restart that lowers nothing has taken a zero step and also ends it.
    Returns the best iterate seen.
    """
    h0 = np.asarray(h0, dtype=float)
    if cap < h0.size + 1:
        raise ConfigError(f"evaluation cap {cap} is below dim + 1 = {h0.size + 1}")
    budget = EvaluationBudget(cost_fn, cap)
    f0 = budget(h0)
    message = ''
    if f0 == 0.0:
        message = 'initial point is a global minimizer'
    else:
        def gradient(h):
            return fd_gradient(h, budget, f0=budget(h))

        restarts = 0
        try:
            while True:
                start_f = budget.best_f
                outcome = scipy_minimize(budget, budget.best_x, jac=gradient, method='BFGS',
                                         options={'gtol': GRAD_TOL, 'norm': np.inf,
                                                  'xrtol': STEP_TOL, 'maxiter': cap})
                message = str(outcome.message)
                if outcome.status != LINE_SEARCH_FAILED or not np.isfinite(budget.best_f):
                    break
                if restarts and budget.best_f >= start_f:
                    message = 'no step from the best point lowers the cost'
                    break
                restarts += 1
                logger.debug(f"Line search failed at cost {budget.best_f:.3e} after {budget.count} "
                             f"evaluations, restart {restarts}")
        except EvaluationCapReached:
            message = f"evaluation cap of {cap} reached"
    logger.info(f"Minimization stopped after {budget.count} evaluations, best cost {budget.best_f:.3e}: {message}")
    return InversionResult(h_star=budget.best_x, final_cost=budget.best_f,
                           evaluations=budget.count, trace_of_iterates=list(budget.history),
                           h0=h0.copy(), message=message)


def relative_l2_error(mu_true, mu_rec, n_points=REL_ERROR_POINTS):
    """||mu_true - mu_rec|| / ||mu_true|| in L2(0, 1), trapezoid on a uniform grid."""
    x = unit_grid(n_points)
    true_values = mu_true.evaluate(x)
    rec_values = mu_rec.evaluate(x)
    norm_true = np.sqrt(trapezoid(true_values ** 2, x))
    if norm_true < 1e-12:
        raise DegenerateFieldError("degenerate ground truth")
    return float(np.sqrt(trapezoid((true_values - rec_values) ** 2, x)) / norm_true)


def invert(problem, obs, reference, dt, basis, cap=EVALUATION_CAP, h0=None, mu_true=None):
    """Reconstruct bump coefficients of mu from a reference trace."""
    domain = problem.domain
    if (domain.a, domain.b) != (UNIT_A, UNIT_B):
        raise ConfigError(f"bump reconstruction needs the domain [{UNIT_A}, {UNIT_B}], "
                          f"got [{domain.a}, {domain.b}]")
    ok, violations = validate_initial_condition(problem.u_init, problem.bc, domain)
    if not ok:
        raise InvalidProblemError(violations)
    obs.check(domain, problem.bc)
    if h0 is None:
        h0 = np.zeros(basis.size)
    cost_fn = make_cost_function(reference, problem, obs, dt, basis)
    result = minimize(cost_fn, h0, cap)
    if not np.isfinite(result.final_cost):
        raise SolverError(f"no candidate produced a finite cost in {result.evaluations} evaluations")
    result.criterion = obs.criterion
    if mu_true is not None:
        result.rel_l2_error = relative_l2_error(mu_true, BumpCoefficients(basis, result.h_star))
    return result
