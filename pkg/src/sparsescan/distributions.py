"""Base distributions, the sparse contamination mixture, and its parameterization.

Every base law exposes ``cdf``, ``survival``, ``quantile`` and ``isf`` that
accept scalars or arrays. Upper-tail quantities are computed directly (never
as ``1 - cdf``) because the statistics live in the far upper tail.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import special

from .numerics import betainc_kernel, betaincinv_kernel

__all__ = [
    "BaseDistribution",
    "Normal",
    "GeneralizedGaussian",
    "StudentT",
    "Pareto",
    "Cauchy",
    "Uniform01",
    "MixtureSpec",
    "make_distribution",
    "uniforms",
    "sample",
    "mixture_sample",
    "shift_amount",
    "sparsity_fraction",
]


class BaseDistribution:
    """Continuous base law F on the real line."""

    family = "base"
    #: polynomial tail index a in bar F(t) ~ t^-a; None for lighter tails
    tail_exponent = None
    unimodal = True
    _symmetric = False

    def survival(self, x):
        raise NotImplementedError

    def isf(self, q):
        raise NotImplementedError

    def cdf(self, x):
        return self.survival(-np.asarray(x, dtype=float)) if self._symmetric else 1.0 - self.survival(x)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0.0) | (p >= 1.0)):
            raise ValueError("quantile requires p in (0, 1)")
        out = self.isf(1.0 - p)
        # lower half: use the symmetric form for accuracy
        if self._symmetric:
            out = np.where(p < 0.5, -self.isf(np.minimum(p, 0.5)), out)
        return out[()] if out.ndim == 0 else out

    def params(self):
        return {}

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({inner})"


def _as_out(x):
    return x[()] if np.ndim(x) == 0 else x


@dataclass(frozen=True, repr=False)
class Normal(BaseDistribution):
    family = "normal"
    _symmetric = True

    def survival(self, x):
        return _as_out(special.ndtr(-np.asarray(x, dtype=float)))

    def isf(self, q):
        return _as_out(-special.ndtri(np.asarray(q, dtype=float)))


@dataclass(frozen=True, repr=False)
class GeneralizedGaussian(BaseDistribution):
    """Density proportional to exp(-|x|^a / a)."""

    a: float = 2.0
    family = "generalized_gaussian"
    _symmetric = True

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"shape a must be positive, got {self.a!r}")

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        half = 0.5 * special.gammaincc(1.0 / self.a, np.abs(x) ** self.a / self.a)
        return _as_out(np.where(x >= 0, half, 1.0 - half))

    def isf(self, q):
        q = np.asarray(q, dtype=float)
        qq = np.minimum(q, 1.0 - q)
        mag = (self.a * special.gammainccinv(1.0 / self.a, 2.0 * qq)) ** (1.0 / self.a)
        return _as_out(np.where(q <= 0.5, mag, -mag))

    def params(self):
        return {"a": self.a}


@njit(cache=True)
def _t_survival(x, df):
    out = np.empty_like(x)
    for i in range(x.size):
        xi = x[i]
        ax = abs(xi)
        if ax > 1e100:
            r = df / (ax * ax)
            z = r / (1.0 + r)
        else:
            z = df / (df + ax * ax)
        half = 0.5 * betainc_kernel(z, 0.5 * df, 0.5)
        out[i] = half if xi >= 0.0 else 1.0 - half
    return out


@njit(cache=True)
def _t_isf(q, df):
    out = np.empty_like(q)
    for i in range(q.size):
        qi = q[i]
        tail = min(qi, 1.0 - qi)
        if tail <= 0.0:
            mag = np.inf
        elif 2.0 * tail <= 0.5:
            z = betaincinv_kernel(2.0 * tail, 0.5 * df, 0.5)
            mag = math.sqrt(df * (1.0 - z) / z) if z > 0.0 else np.inf
        else:
            w = betaincinv_kernel(1.0 - 2.0 * tail, 0.5, 0.5 * df)
            mag = math.sqrt(df * w / (1.0 - w))
        out[i] = mag if qi <= 0.5 else -mag
    return out


@dataclass(frozen=True, repr=False)
class StudentT(BaseDistribution):
    """Student t with real df > 0, evaluated through the incomplete beta."""

    df: float = 1.0
    family = "student_t"
    _symmetric = True

    def __post_init__(self):
        if not self.df > 0:
            raise ValueError(f"df must be positive, got {self.df!r}")

    @property
    def tail_exponent(self):
        return float(self.df)

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        return _as_out(_t_survival(np.atleast_1d(x).ravel(), float(self.df)).reshape(x.shape))

    def isf(self, q):
        q = np.asarray(q, dtype=float)
        return _as_out(_t_isf(np.atleast_1d(q).ravel(), float(self.df)).reshape(q.shape))

    def params(self):
        return {"df": self.df}


@dataclass(frozen=True, repr=False)
class Pareto(BaseDistribution):
    """bar F(x) = (scale / x)^a for x >= scale."""

    a: float = 1.0
    scale: float = 1.0
    family = "pareto"

    def __post_init__(self):
        if not (self.a > 0 and self.scale > 0):
            raise ValueError(f"need a > 0 and scale > 0, got a={self.a!r}, scale={self.scale!r}")

    @property
    def tail_exponent(self):
        return float(self.a)

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            s = np.where(x > self.scale, (self.scale / np.maximum(x, self.scale)) ** self.a, 1.0)
        return _as_out(s)

    def isf(self, q):
        q = np.asarray(q, dtype=float)
        return _as_out(self.scale * q ** (-1.0 / self.a))

    def params(self):
        return {"a": self.a, "scale": self.scale}


@dataclass(frozen=True, repr=False)
class Cauchy(BaseDistribution):
    family = "cauchy"
    tail_exponent = 1.0
    _symmetric = True

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            upper = np.arctan(1.0 / np.abs(x)) / np.pi
        return _as_out(np.where(x >= 0, np.where(x == 0, 0.5, upper), 1.0 - upper))

    def isf(self, q):
        q = np.asarray(q, dtype=float)
        qq = np.minimum(q, 1.0 - q)
        with np.errstate(divide="ignore"):
            mag = 1.0 / np.tan(np.pi * qq)
        mag = np.where(qq == 0.5, 0.0, mag)
        return _as_out(np.where(q <= 0.5, mag, -mag))


@dataclass(frozen=True, repr=False)
class Uniform01(BaseDistribution):
    family = "uniform01"

    def survival(self, x):
        return _as_out(np.clip(1.0 - np.asarray(x, dtype=float), 0.0, 1.0))

    def cdf(self, x):
        return _as_out(np.clip(np.asarray(x, dtype=float), 0.0, 1.0))

    def isf(self, q):
        return _as_out(1.0 - np.asarray(q, dtype=float))

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0.0) | (p >= 1.0)):
            raise ValueError("quantile requires p in (0, 1)")
        return _as_out(p.copy())


_FAMILIES = {
    "normal": Normal,
    "generalized_gaussian": GeneralizedGaussian,
    "student_t": StudentT,
    "pareto": Pareto,
    "cauchy": Cauchy,
    "uniform01": Uniform01,
}


def make_distribution(family, **params):
    """Build a base distribution from its config name and parameter map."""
    key = family.lower().replace("-", "_")
    if key not in _FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(_FAMILIES)}")
    return _FAMILIES[key](**params)


def uniforms(rng, n):
    """n iid uniforms on the open interval (0, 1), on the 2^-53 midpoint lattice."""
    return (rng.integers(0, 2**53, size=n, dtype=np.int64) + 0.5) * 2.0**-53


def sample(dist, rng, n):
    """n iid draws from ``dist`` by inverse transform, sorted ascending."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    return np.sort(np.atleast_1d(dist.isf(uniforms(rng, n))))


def sparsity_fraction(n, beta):
    """epsilon = n^-beta."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n!r}")
    if not (0.5 < beta < 1.0):
        raise ValueError(f"beta must lie in (1/2, 1), got {beta!r}")
    return float(n) ** (-beta)


def shift_amount(dist, n, r):
    """Shift mu_n putting the model's tail function at mu_n on the r log n scale.

    ======================  ================================
    family                  mu_n
    ======================  ================================
    normal                  sqrt(2 r log n)
    generalized_gaussian    (a r log n)^(1/a)
    student_t(df=k)         n^(r / (k + 1))
    pareto(a)               n^(r / (a + 1))
    cauchy                  n^(r / 2)
    ======================  ================================
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n!r}")
    if r < 0:
        raise ValueError(f"r must be nonnegative, got {r!r}")
    log_n = math.log(n)
    if isinstance(dist, Normal):
        return math.sqrt(2.0 * r * log_n)
    if isinstance(dist, GeneralizedGaussian):
        return (dist.a * r * log_n) ** (1.0 / dist.a)
    if isinstance(dist, (StudentT, Pareto, Cauchy)):
        return float(n) ** (r / (dist.tail_exponent + 1.0))
    raise ValueError(f"no shift parameterization for family {dist.family!r}")


@dataclass(frozen=True)
class MixtureSpec:
    """Alternative (1 - eps) F(x) + eps F(x - mu) with eps = n^-beta.

    ``shift`` overrides the parameterized mu_n when given, for sweeps in mu.
    """

    base: BaseDistribution
    n: int
    beta: float
    r: float = 0.0
    shift: float | None = None
    epsilon: float = field(init=False)
    mu: float = field(init=False)

    def __post_init__(self):
        eps = sparsity_fraction(self.n, self.beta)
        if eps > 0.5:
            raise ValueError(f"epsilon = n^-beta = {eps:.4g} exceeds 1/2; increase n")
        mu = float(self.shift) if self.shift is not None else shift_amount(self.base, self.n, self.r)
        if mu < 0:
            raise ValueError(f"shift must be nonnegative, got {mu!r}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "mu", mu)

    def with_shift(self, mu):
        return MixtureSpec(self.base, self.n, self.beta, self.r, shift=mu)

    def alt_survival(self, x):
        """Survival function of the mixture."""
        eps = self.epsilon
        return (1.0 - eps) * self.base.survival(x) + eps * self.base.survival(np.asarray(x) - self.mu)


def mixture_sample(spec, rng, epsilon=None):
    """Sorted draw of size spec.n from the contamination mixture.

    The base uniforms are consumed first, so with epsilon = 0 the output equals
    ``sample(spec.base, rng, spec.n)`` for the same generator state.
    """
    eps = spec.epsilon if epsilon is None else epsilon
    x = np.atleast_1d(spec.base.isf(uniforms(rng, spec.n)))
    hit = rng.random(spec.n) < eps
    if spec.mu != 0.0:
        x = x + spec.mu * hit
    return np.sort(x)
