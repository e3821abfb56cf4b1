"""
Coefficient space for the growth rate mu(x).
Mollifier bump basis on [0, 1], grid-sampled fields and random sampling.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

# exp() of anything below this is 0.0 in double precision
EXP_UNDERFLOW = -745.0

# Bump fields live on the unit interval
UNIT_A = 0.0
UNIT_B = 1.0

# Range of the uniformly drawn bump coefficients
COEFF_LOW = -5.0
COEFF_HIGH = 5.0


def bump_j(x):
    """Mollifier j(x) = exp(4x^2 / (x^2 - 4)) on (-2, 2), zero elsewhere.

    Accepts scalars or arrays; returns the same shape.
    """
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x)
    out = np.zeros_like(flat)
    inside = np.abs(flat) < 2.0
    xi = flat[inside]
    exponent = 4.0 * xi * xi / (xi * xi - 4.0)
    out[inside] = np.where(exponent < EXP_UNDERFLOW, 0.0, np.exp(np.maximum(exponent, EXP_UNDERFLOW)))
    if x.ndim == 0:
        return float(out[0])
    return out.reshape(x.shape)


@dataclass(frozen=True)
class BumpBasis:
    """n + 1 dilated bumps j((n-2)(x - c_i)) with centres c_i = (i-1)/(n-2)."""

    n: int = 10

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ConfigError(f"bump basis needs an integer n >= 3, got {self.n}")

    @property
    def size(self):
        return self.n + 1

    @property
    def scale(self):
        return float(self.n - 2)

    @property
    def centers(self):
        i = np.arange(self.n + 1)
        return (i - 1) / (self.n - 2)

    @property
    def half_width(self):
        """Half-width of each bump's support."""
        return 2.0 / self.scale

    def matrix(self, x):
        """Evaluation matrix B[k, i] = j((n-2)(x_k - c_i))."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bump_j(self.scale * (x[:, None] - self.centers[None, :]))


class GrowthField:
    """Common interface of the coefficient representations."""

    kind = None
    a = UNIT_A
    b = UNIT_B

    def _evaluate(self, x):
        raise NotImplementedError

    def evaluate(self, x):
        """Evaluate mu at x (scalar or array); x must lie in [a, b]."""
        arr = np.asarray(x, dtype=float)
        span = self.b - self.a
        slack = 1e-12 * span
        if np.any(arr < self.a - slack) or np.any(arr > self.b + slack):
            raise DomainError(f"evaluation outside domain [{self.a}, {self.b}]")
        values = self._evaluate(np.clip(np.atleast_1d(arr), self.a, self.b))
        if arr.ndim == 0:
            return float(values[0])
        return values.reshape(arr.shape)

    def on_nodes(self, nodes):
        return self.evaluate(nodes)

    def reflect(self):
        """Field x -> mu(b - (x - a))."""
        raise NotImplementedError

    def to_record(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class BumpCoefficients(GrowthField):
    """mu(x) = sum_i h_i j((n-2)(x - c_i)) on [0, 1]."""

    basis: BumpBasis
    h: np.ndarray = field(repr=False)

    kind = 'bump'

    def __post_init__(self):
        h = np.array(self.h, dtype=float).ravel()
        if h.size != self.basis.size:
            raise ConfigError(f"bump field with n={self.basis.n} needs {self.basis.size} coefficients, got {h.size}")
        h.setflags(write=False)
        object.__setattr__(self, 'h', h)

    def _evaluate(self, x):
        return self.basis.matrix(x) @ self.h

    def reflect(self):
        # 1 - c_i = c_{n-i}, so reflection reverses the coefficient vector
        return BumpCoefficients(self.basis, self.h[::-1].copy())

    def __add__(self, other):
        if not isinstance(other, BumpCoefficients) or other.basis != self.basis:
            return NotImplemented
        return BumpCoefficients(self.basis, self.h + other.h)

    def scaled(self, factor):
        return BumpCoefficients(self.basis, factor * self.h)

    def to_record(self):
        return {'kind': 'bump', 'n': self.basis.n, 'h': [float(v) for v in self.h]}


@dataclass(frozen=True, eq=False)
class GridSamples(GrowthField):
    """Node values on a uniform grid over [a, b], linearly interpolated."""

    values: np.ndarray = field(repr=False)
    a: float = UNIT_A
    b: float = UNIT_B

    kind = 'grid'

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.size < 2:
            raise ConfigError("grid field needs at least two node values")
        if not self.a < self.b:
            raise ConfigError(f"grid field needs a < b, got [{self.a}, {self.b}]")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def constant(cls, value, a=UNIT_A, b=UNIT_B, n_nodes=2):
        return cls(np.full(n_nodes, float(value)), a, b)

    @property
    def nodes(self):
        return np.linspace(self.a, self.b, self.values.size)

    def _evaluate(self, x):
        return np.interp(x, self.nodes, self.values)

    def on_nodes(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        # exact node values when the grids coincide
        if nodes.size == self.values.size and np.allclose(nodes, self.nodes, rtol=0.0, atol=1e-12 * (self.b - self.a)):
            return self.values.copy()
        return self.evaluate(nodes)

    def reflect(self):
        return GridSamples(self.values[::-1].copy(), self.a, self.b)

    def to_record(self):
        return {'kind': 'grid', 'a': float(self.a), 'b': float(self.b),
                'values': [float(v) for v in self.values]}


def eval_mu(mu, x):
    """Evaluate a growth field at x; raises DomainError outside [a, b]."""
    return mu.evaluate(x)


def sample_random_mu(basis, rng_seed):
    """Draw h_i i.i.d. uniform on (-5, 5) from a PCG64 stream seeded with rng_seed."""
    rng = np.random.default_rng(int(rng_seed))
    h = rng.uniform(COEFF_LOW, COEFF_HIGH, size=basis.size)
    logger.debug(f"Sampled bump coefficients for seed {rng_seed}: {h}")
    return BumpCoefficients(basis, h)


def field_from_record(record, domain=None):
    """Build a growth field from its JSON record.

    Accepted kinds: bump {n, h}, grid {values[, a, b]}, constant {value},
    random {n, seed}. Grid and constant fields default to the given domain.
    """
    if not isinstance(record, dict) or 'kind' not in record:
        raise ConfigError("mu record must be an object with a 'kind' field")
    kind = record['kind']
    a = domain.a if domain is not None else UNIT_A
    b = domain.b if domain is not None else UNIT_B
    try:
        if kind == 'bump':
            basis = BumpBasis(int(record.get('n', 10)))
            return BumpCoefficients(basis, record['h'])
        if kind == 'random':
            basis = BumpBasis(int(record.get('n', 10)))
            return sample_random_mu(basis, int(record['seed']))
        if kind == 'grid':
            return GridSamples(record['values'], float(record.get('a', a)), float(record.get('b', b)))
        if kind == 'constant':
            return GridSamples.constant(float(record['value']), a, b)
    except KeyError as e:
        raise ConfigError(f"mu record of kind '{kind}' is missing field {e}")
    raise ConfigError(f"unknown mu kind '{kind}'")


def unit_grid(n_points=2001):
    """Uniform evaluation grid on [0, 1]."""
    return np.linspace(UNIT_A, UNIT_B, n_points)
