"""Detection boundaries r = rho(beta) in the (beta, r) plane, for 1/2 < beta < 1.

Each curve is the value of r above which the corresponding (oracle) test is
asymptotically fully powerful under eps = n^-beta and the family's mu_n
scaling (see ``distributions.shift_amount``).
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "BoundaryCurve",
    "CURVES",
    "GUMBEL_CLASSES",
    "ingster_boundary",
    "gg_threshold_boundary",
    "gg_max_boundary",
    "omega_boundary",
    "omega_gumbel",
    "omega_power",
    "power_law_scan_boundary",
    "power_law_threshold_boundary",
    "make_curve",
]


def _check_beta(beta):
    if not (0.5 < beta < 1.0):
        raise ValueError(f"beta must lie in (1/2, 1), got {beta!r}")


def _check_a(a):
    if not a > 0:
        raise ValueError(f"a must be positive, got {a!r}")


def ingster_boundary(beta):
    """Normal-model boundary: beta - 1/2 up to 3/4, then (1 - sqrt(1 - beta))^2."""
    _check_beta(beta)
    if beta <= 0.75:
        return beta - 0.5
    return (1.0 - math.sqrt(1.0 - beta)) ** 2


def gg_threshold_boundary(a, beta):
    """Oracle threshold boundary when log(1 - F(x)) ~ -phi(x), phi(ut)/phi(t) -> u^a."""
    _check_a(a)
    _check_beta(beta)
    if a <= 1.0:
        return 2.0 * (beta - 0.5)
    if beta < 1.0 - 2.0 ** (-a / (a - 1.0)):
        return (2.0 ** (1.0 / (a - 1.0)) - 1.0) ** (a - 1.0) * (beta - 0.5)
    return (1.0 - (1.0 - beta) ** (1.0 / a)) ** a


def gg_max_boundary(a, beta):
    """Max-test boundary in the same class: (1 - (1 - beta)^(1/a))^a."""
    _check_a(a)
    _check_beta(beta)
    return (1.0 - (1.0 - beta) ** (1.0 / a)) ** a


def omega_gumbel(v):
    """omega(v) = log(1/v), shared by phi(t) = exp(t^a) and phi(t) = exp((log t)^a)."""
    return -math.log(v)


def omega_power(a, b=0.0):
    """omega(v) = (1 - v^(1/a)) / a^(b/a), for phi(t) ~ t^a (log t)^b."""
    _check_a(a)
    scale = a ** (b / a)
    return lambda v: (1.0 - v ** (1.0 / a)) / scale


# mu_n scalings of the two Gumbel-type classes: mu_n ~ r * lambda(log n)
GUMBEL_CLASSES = {
    "exp(t^a)": lambda a, log_n: (1.0 / a) * math.log(log_n) ** (1.0 / a - 1.0),
    "exp((log t)^a)": lambda a, log_n: (
        (1.0 / a) * math.log(log_n) ** (1.0 / a - 1.0) * math.exp(math.log(log_n) ** (1.0 / a))
    ),
}


def _check_omega(omega, samples=64):
    v = np.linspace(1e-6, 1.0, samples)
    w = np.array([omega(x) for x in v])
    if not np.all(np.isfinite(w)):
        raise ValueError("omega must be finite on (0, 1]")
    if np.any(np.diff(w) > 1e-12 * np.maximum(1.0, np.abs(w[1:]))):
        raise ValueError("omega must be non-increasing on (0, 1]")
    if abs(omega(1.0)) > 1e-12:
        raise ValueError(f"omega(1) must be 0, got {omega(1.0)!r}")


def omega_boundary(omega, beta, tol=1e-8, grid=2000):
    """inf over 0 < h <= 1 - beta of omega(h) - omega(2 beta - 1 + 2h).

    A coarse grid locates the basin, golden-section search refines it to
    ``tol`` in h, and the endpoint h = 1 - beta is always checked.
    """
    _check_beta(beta)
    _check_omega(omega)
    top = 1.0 - beta

    def g(h):
        return omega(h) - omega(2.0 * beta - 1.0 + 2.0 * h)

    hs = top * np.arange(1, grid + 1) / grid
    vals = np.array([g(h) for h in hs])
    k = int(np.argmin(vals))
    best = min(vals[k], g(top))

    lo = hs[k - 1] if k > 0 else top * 1e-12
    hi = hs[k + 1] if k + 1 < hs.size else top
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - ratio * (hi - lo)
    x2 = lo + ratio * (hi - lo)
    f1, f2 = g(x1), g(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - ratio * (hi - lo)
            f1 = g(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + ratio * (hi - lo)
            f2 = g(x2)
    return float(max(min(best, f1, f2), 0.0))


def power_law_scan_boundary(beta):
    """Oracle scan boundary for power-law tails: 2 beta - 1."""
    _check_beta(beta)
    return 2.0 * beta - 1.0


def power_law_threshold_boundary(a, beta):
    """Oracle threshold boundary for tails bar F(t) ~ t^-a: (1 + 1/a)(2 beta - 1)."""
    _check_a(a)
    _check_beta(beta)
    return (1.0 + 1.0 / a) * (2.0 * beta - 1.0)


@dataclass(frozen=True)
class BoundaryCurve:
    name: str
    evaluator: Callable[[float], float]
    domain: tuple[float, float] = (0.5, 1.0)

    def __call__(self, beta):
        return self.evaluator(beta)


CURVES = ("ingster", "gg-threshold", "gg-max", "omega-gumbel", "pl-scan", "pl-threshold")


def make_curve(name, a=None):
    """Curve by CLI name; ``a`` is the tail shape for the gg-* and pl-threshold curves."""
    needs_a = {"gg-threshold", "gg-max", "pl-threshold"}
    if name not in CURVES:
        raise ValueError(f"unknown curve {name!r}; valid curves: {', '.join(CURVES)}")
    if name in needs_a and a is None:
        raise ValueError(f"curve {name!r} needs the shape parameter a")
    if name == "ingster":
        return BoundaryCurve(name, ingster_boundary)
    if name == "gg-threshold":
        return BoundaryCurve(f"{name}(a={a})", lambda b: gg_threshold_boundary(a, b))
    if name == "gg-max":
        return BoundaryCurve(f"{name}(a={a})", lambda b: gg_max_boundary(a, b))
    if name == "omega-gumbel":
        return BoundaryCurve(name, lambda b: omega_boundary(omega_gumbel, b))
    if name == "pl-scan":
        return BoundaryCurve(name, power_law_scan_boundary)
    return BoundaryCurve(f"{name}(a={a})", lambda b: power_law_threshold_boundary(a, b))
