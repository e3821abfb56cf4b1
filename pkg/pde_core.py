"""
Forward solver for the heterogeneous Fisher-KPP problem
    u_t - D u_xx = u (mu(x) - gamma u)  on (a, b),
    alpha1 u - beta1 u_x = 0 at a,  alpha2 u + beta2 u_x = 0 at b,
plus point-trace extraction and the closed-form logistic oracle.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from errors import (ConfigError, DomainError, InvalidProblemError, OffGridError,
                    PositivityError, SolverError, TraceError)
from param_space import GridSamples, bump_j

logger = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
NEGATIVE_TOL = 1e-8
COMPAT_TOL = 1e-8
DEFAULT_CELLS = 960
STEPS_PER_WINDOW = 600
ON_GRID_TOL = 1e-8


@dataclass(frozen=True)
class Domain:
    """Interval (a, b) with n_cells uniform cells."""

    a: float = 0.0
    b: float = 1.0
    n_cells: int = DEFAULT_CELLS

    def __post_init__(self):
        if not self.a < self.b:
            raise ConfigError(f"domain needs a < b, got a={self.a}, b={self.b}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 4:
            raise ConfigError(f"domain needs an integer n_cells >= 4, got {self.n_cells}")

    @property
    def h(self):
        return (self.b - self.a) / self.n_cells

    @property
    def nodes(self):
        return self.a + self.h * np.arange(self.n_cells + 1)

    @property
    def midpoint(self):
        return 0.5 * (self.a + self.b)

    def node_index(self, x0):
        """Index of the node at x0; raises if x0 is outside or off-grid."""
        if x0 < self.a or x0 > self.b:
            raise DomainError(f"observation point {x0} outside [{self.a}, {self.b}]")
        j = int(round((x0 - self.a) / self.h))
        if abs(self.a + j * self.h - x0) > ON_GRID_TOL * (self.b - self.a):
            raise OffGridError(f"observation point off-grid: x0={x0} is not a node of {self.n_cells} cells on [{self.a}, {self.b}]")
        return j


@dataclass(frozen=True)
class BoundaryCoefficients:
    """Robin coefficients: alpha1 u - beta1 u_x = 0 at a, alpha2 u + beta2 u_x = 0 at b."""

    alpha1: float = 0.0
    beta1: float = 1.0
    alpha2: float = 0.0
    beta2: float = 1.0

    def __post_init__(self):
        coeffs = (self.alpha1, self.beta1, self.alpha2, self.beta2)
        if min(coeffs) < 0:
            raise ConfigError(f"boundary coefficients must be nonnegative, got {coeffs}")
        if self.alpha1 + self.beta1 <= 0 or self.alpha2 + self.beta2 <= 0:
            raise ConfigError("boundary coefficients need alpha1 + beta1 > 0 and alpha2 + beta2 > 0")

    @property
    def is_symmetric(self):
        return self.alpha1 == self.alpha2 and self.beta1 == self.beta2


@dataclass(frozen=True, eq=False)
class InitialCondition:
    """Initial density on the grid nodes."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def constant(cls, domain, level):
        return cls(np.full(domain.n_cells + 1, float(level)))

    @classmethod
    def from_function(cls, domain, func):
        return cls(np.asarray(func(domain.nodes), dtype=float))

    @classmethod
    def vanishing_at(cls, domain, x0, level=0.2):
        """level * (1 - j((x - x0)/w)): zero with zero slope at x0, constant near both ends."""
        w = min(x0 - domain.a, domain.b - x0) / 4.0
        if w <= 0:
            raise ConfigError(f"vanishing initial profile needs an interior x0, got {x0}")
        return cls(level * (1.0 - bump_j((domain.nodes - x0) / w)))


@dataclass(frozen=True)
class ProblemSpec:
    """Full data of the initial-boundary-value problem."""

    domain: Domain
    D: float
    gamma: float
    mu: object
    bc: BoundaryCoefficients
    u_init: InitialCondition

    def __post_init__(self):
        if not self.D > 0:
            raise ConfigError(f"diffusion coefficient D must be positive, got {self.D}")
        if not self.gamma > 0:
            raise ConfigError(f"competition coefficient gamma must be positive, got {self.gamma}")
        if self.u_init.values.size != self.domain.n_cells + 1:
            raise ConfigError(f"initial condition has {self.u_init.values.size} values, grid has {self.domain.n_cells + 1} nodes")

    def with_mu(self, mu):
        return replace(self, mu=mu)

    def with_gamma(self, gamma):
        return replace(self, gamma=gamma)

    def mu_on_nodes(self):
        return np.asarray(self.mu.on_nodes(self.domain.nodes), dtype=float)


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """u(t_k, x_j) on the stored time samples (row k) and grid nodes (column j)."""

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def final_time(self):
        return float(self.times[-1])


@dataclass(frozen=True, eq=False)
class PointTrace:
    """Time series of u, u_x and (optionally) u_xx at x0 over (0, eps]."""

    x0: float
    times: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    u_x: np.ndarray = field(repr=False)
    u_xx: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.size and np.any(np.diff(times) <= 0):
            raise TraceError("trace times must be strictly increasing")
        for name in ('u', 'u_x'):
            if np.asarray(getattr(self, name)).size != times.size:
                raise TraceError(f"trace column {name} has the wrong length")
        if np.asarray(self.u_xx).size not in (0, times.size):
            raise TraceError("trace column u_xx has the wrong length")

    def __len__(self):
        return len(self.times)


def default_dt(eps):
    """Default time step: eps / 600."""
    return eps / STEPS_PER_WINDOW


# one-sided second-order stencils, left end; the right end mirrors them

def left_first_derivative(v, h):
    return (-3.0 * v[..., 0] + 4.0 * v[..., 1] - v[..., 2]) / (2.0 * h)


def right_first_derivative(v, h):
    return (3.0 * v[..., -1] - 4.0 * v[..., -2] + v[..., -3]) / (2.0 * h)


def left_second_derivative(v, h):
    return (2.0 * v[..., 0] - 5.0 * v[..., 1] + 4.0 * v[..., 2] - v[..., 3]) / (h * h)


def right_second_derivative(v, h):
    return (2.0 * v[..., -1] - 5.0 * v[..., -2] + 4.0 * v[..., -3] - v[..., -4]) / (h * h)


def validate_initial_condition(u_init, bc, domain):
    """Check the initial-data hypotheses on the grid.

    Returns (ok, violations); never raises.
    """
    violations = []
    u = np.asarray(u_init.values, dtype=float)
    if u.size != domain.n_cells + 1:
        return False, [f"u_i has {u.size} values but the grid has {domain.n_cells + 1} nodes"]
    if not np.all(np.isfinite(u)):
        return False, ["u_i has non-finite values"]

    h = domain.h
    tol = COMPAT_TOL * (1.0 + np.max(np.abs(u)))

    if np.any(u < 0):
        violations.append(f"u_i >= 0 fails at {int(np.sum(u < 0))} nodes")
    if not np.any(u > 0):
        violations.append("u_i ≢ 0 fails")
    else:
        zero = u == 0
        if np.any(zero[1:] & zero[:-1]):
            violations.append("zero set of u_i contains a cell (adjacent zero nodes)")

    left = bc.alpha1 * u[0] - bc.beta1 * left_first_derivative(u, h)
    if abs(left) > tol:
        violations.append(f"left boundary compatibility alpha1 u_i(a) - beta1 u_i'(a) = {left:.3e} != 0")
    right = bc.alpha2 * u[-1] + bc.beta2 * right_first_derivative(u, h)
    if abs(right) > tol:
        violations.append(f"right boundary compatibility alpha2 u_i(b) + beta2 u_i'(b) = {right:.3e} != 0")
    if bc.beta1 == 0:
        curvature = left_second_derivative(u, h)
        if abs(curvature) > tol:
            violations.append(f"left Dirichlet compatibility u_i''(a) = {curvature:.3e} != 0")
    if bc.beta2 == 0:
        curvature = right_second_derivative(u, h)
        if abs(curvature) > tol:
            violations.append(f"right Dirichlet compatibility u_i''(b) = {curvature:.3e} != 0")

    return len(violations) == 0, violations


def logistic_reference(mu, gamma, u0, t):
    """Closed-form solution of u' = u (mu - gamma u), u(0) = u0."""
    if mu == 0:
        return u0 / (1.0 + gamma * u0 * t)
    growth = math.exp(mu * t)
    return mu * u0 * growth / (mu + gamma * u0 * (growth - 1.0))


class KppStepper:
    """One theta-scheme step (theta=0.5: Crank-Nicolson) with Newton on the reaction term.

    Unknowns are all node values; the first and last rows of the system are the
    Robin conditions with three-point one-sided differences, so the Jacobian is
    banded with two sub- and two super-diagonals.
    """

    def __init__(self, spec, dt, theta=0.5):
        if not 0.0 < theta <= 1.0:
            raise ConfigError(f"theta must lie in (0, 1], got {theta}")
        self.spec = spec
        self.dt = float(dt)
        self.theta = float(theta)
        self.h = spec.domain.h
        self.n = spec.domain.n_cells
        self.mu = spec.mu_on_nodes()
        self.D = float(spec.D)
        self.gamma = float(spec.gamma)
        self.bc = spec.bc
        self._lap = self.D / (self.h * self.h)
        h2 = 2.0 * self.h
        self._left_row = np.array([self.bc.alpha1 + 3.0 * self.bc.beta1 / h2,
                                   -4.0 * self.bc.beta1 / h2,
                                   self.bc.beta1 / h2])
        self._right_row = np.array([self.bc.alpha2 + 3.0 * self.bc.beta2 / h2,
                                    -4.0 * self.bc.beta2 / h2,
                                    self.bc.beta2 / h2])

    def rate(self, v):
        """Interior right-hand side D v_xx + v (mu - gamma v)."""
        inner = v[1:-1]
        return (self._lap * (v[:-2] - 2.0 * inner + v[2:])
                + inner * (self.mu[1:-1] - self.gamma * inner))

    def boundary_residuals(self, v):
        left = self._left_row @ v[:3]
        right = self._right_row @ v[-1:-4:-1]
        return left, right

    def _residual(self, U, explicit):
        F = np.empty_like(U)
        F[1:-1] = U[1:-1] - self.theta * self.dt * self.rate(U) - explicit
        F[0], F[-1] = self.boundary_residuals(U)
        return F

    def _jacobian(self, U):
        n = self.n
        ab = np.zeros((5, n + 1))
        td = self.theta * self.dt
        ab[2, 1:-1] = 1.0 - td * (-2.0 * self._lap + self.mu[1:-1] - 2.0 * self.gamma * U[1:-1])
        ab[1, 2:] = -td * self._lap
        ab[3, :-2] = -td * self._lap
        ab[2, 0], ab[1, 1], ab[0, 2] = self._left_row
        ab[2, n], ab[3, n - 1], ab[4, n - 2] = self._right_row
        return ab

    def step(self, u, step_index=None):
        """Advance u by one time step."""
        explicit = u[1:-1]
        if self.theta < 1.0:
            explicit = explicit + (1.0 - self.theta) * self.dt * self.rate(u)
        U = u.copy()
        for iteration in range(NEWTON_MAX_ITER + 1):
            F = self._residual(U, explicit)
            norm = np.max(np.abs(F))
            if not np.isfinite(norm):
                raise SolverError("nonlinear step failed (non-finite residual)", step_index)
            if norm <= NEWTON_TOL:
                logger.debug(f"Step {step_index}: Newton converged in {iteration} iterations (residual {norm:.2e})")
                break
            if iteration == NEWTON_MAX_ITER:
                raise SolverError(f"nonlinear step failed after {NEWTON_MAX_ITER} Newton iterations (residual {norm:.2e})", step_index)
            U -= solve_banded((2, 2), self._jacobian(U), F)
        if U.min() < -NEGATIVE_TOL:
            raise PositivityError(f"positivity violated (min {U.min():.3e})", step_index)
        return U


def step_count(t_end, dt):
    """Number of steps of size dt covering [0, t_end]."""
    if not dt > 0 or not t_end > 0:
        raise ConfigError(f"t_end and dt must be positive, got t_end={t_end}, dt={dt}")
    if dt > t_end * (1.0 + 1e-12):
        raise ConfigError(f"dt={dt} exceeds t_end={t_end}")
    n_steps = max(1, int(round(t_end / dt)))
    if abs(n_steps * dt - t_end) > 1e-9 * t_end:
        logger.warning(f"t_end={t_end} is not a multiple of dt={dt}; integrating to {n_steps * dt}")
    return n_steps


def solve_kpp(spec, t_end, dt, theta=0.5):
    """Solve the problem on [0, t_end] with fixed step dt; every step is stored."""
    ok, violations = validate_initial_condition(spec.u_init, spec.bc, spec.domain)
    if not ok:
        raise InvalidProblemError(violations)

    n_steps = step_count(t_end, dt)
    stepper = KppStepper(spec, dt, theta)
    values = np.empty((n_steps + 1, spec.domain.n_cells + 1))
    values[0] = spec.u_init.values
    u = values[0].copy()
    logger.debug(f"Solving on {spec.domain.n_cells} cells, {n_steps} steps of {dt}")
    for k in range(1, n_steps + 1):
        u = stepper.step(u, k)
        values[k] = u
    times = dt * np.arange(n_steps + 1)
    return SpaceTimeField(times, values)


def extract_trace(field, domain, x0, eps, with_uxx=False):
    """Point trace of u, u_x (and u_xx) at the node x0 for stored times in (0, eps]."""
    if not eps > 0:
        raise TraceError(f"observation horizon must be positive, got {eps}")
    if eps > field.final_time * (1.0 + 1e-9):
        raise TraceError(f"observation horizon {eps} exceeds the solved time {field.final_time}")
    j = domain.node_index(x0)
    n = domain.n_cells
    h = domain.h

    mask = (field.times > 0) & (field.times <= eps * (1.0 + 1e-9))
    rows = field.values[mask]
    if j == 0:
        u_x = left_first_derivative(rows, h)
    elif j == n:
        u_x = right_first_derivative(rows, h)
    else:
        u_x = (rows[:, j + 1] - rows[:, j - 1]) / (2.0 * h)

    if with_uxx:
        if j == 0:
            u_xx = left_second_derivative(rows, h)
        elif j == n:
            u_xx = right_second_derivative(rows, h)
        else:
            u_xx = (rows[:, j - 1] - 2.0 * rows[:, j] + rows[:, j + 1]) / (h * h)
    else:
        u_xx = np.empty(0)

    return PointTrace(float(domain.nodes[j]), field.times[mask].copy(), rows[:, j].copy(), u_x, u_xx)


def homogeneous_problem(domain, mu=1.0, gamma=1.0, D=0.1, level=0.2, bc=None):
    """Spatially constant problem with Neumann conditions (logistic oracle setting)."""
    return ProblemSpec(domain=domain, D=D, gamma=gamma,
                       mu=GridSamples.constant(mu, domain.a, domain.b),
                       bc=bc or BoundaryCoefficients(0.0, 1.0, 0.0, 1.0),
                       u_init=InitialCondition.constant(domain, level))


def convergence_study(levels=((240, 0.3 / 2000), (480, 0.3 / 4000)), mu=1.0, gamma=1.0,
                      D=0.1, level=0.2, t_end=0.3):
    """Max-norm error against the logistic oracle for refined (n_cells, dt) pairs.

    Each row carries the observed order relative to the previous row.
    """
    rows = []
    exact = logistic_reference(mu, gamma, level, t_end)
    for n_cells, dt in levels:
        spec = homogeneous_problem(Domain(0.0, 1.0, n_cells), mu, gamma, D, level)
        result = solve_kpp(spec, t_end, dt)
        error = float(np.max(np.abs(result.values[-1] - exact)))
        row = {'n_cells': n_cells, 'dt': dt, 'max_error': error, 'order': None}
        if rows and error > 0:
            previous = rows[-1]
            row['order'] = math.log(previous['max_error'] / error) / math.log(previous['dt'] / dt)
        rows.append(row)
        logger.info(f"Convergence level n_cells={n_cells}, dt={dt}: max error {error:.3e}")
    return rows
