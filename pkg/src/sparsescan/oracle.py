"""Oracle threshold and oracle scan tests with exact binomial power.

Both oracles know (F, eps, mu). For a region R with null mass p and mixture
mass q, the count N(R) is Bin(n, p) under the null and Bin(n, q) under the
alternative; the level-alpha test on R rejects when N(R) >= c(p), the binomial
critical count, and has power P(Bin(n, q) >= c(p)).

The search runs over the critical count instead of over region endpoints.
c(p) is a nondecreasing step function of p, and regions sharing a critical
count c are best when they are as large as allowed, i.e. when their null mass
equals p*_c, the largest p with P(Bin(n, p) >= c) <= alpha. Enlarging a region
never lowers its mixture mass, so:

* threshold: for each c the optimal t solves 1 - F(t) = p*_c exactly, and
  the oracle is a finite maximum over c = 1..n;
* scan: for each c the window of null mass p*_c with the largest mixture
  mass is found by a sweep over right endpoints (a quantile grid of F plus
  its mu-shifted copy, plus t = +inf) and a golden-section polish.

Because t = +inf is admissible, every threshold region is also a scan window.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .numerics import binom_critical_kernel, binom_max_null_mass, binom_sf_kernel

__all__ = [
    "OracleTestResult",
    "exact_test_power",
    "critical_masses",
    "oracle_grid",
    "oracle_threshold_test",
    "oracle_scan_test",
]

DEFAULT_REFINEMENT = 4
_POLISH_TOP = 4
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OracleTestResult:
    kind: str
    threshold: float | None
    interval: tuple[float, float] | None
    critical_count: int
    exact_power: float
    null_level: float
    null_mass: float
    alt_mass: float


def exact_test_power(n, p, q, alpha):
    """Critical count and exact power of the level-alpha test of Bin(n, p) vs Bin(n, q)."""
    for name, v in (("p", p), ("q", q)):
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
    c = int(binom_critical_kernel(int(n), float(p), float(alpha)))
    return c, float(binom_sf_kernel(c, int(n), float(q)))


@njit(cache=True)
def critical_masses(n, alpha):
    """p*_c for c = 1..n (index c - 1)."""
    out = np.empty(n)
    for c in range(1, n + 1):
        out[c - 1] = binom_max_null_mass(c, n, alpha)
    return out


@njit(cache=True)
def _powers(counts, n, q):
    out = np.empty(q.size)
    for i in range(q.size):
        out[i] = binom_sf_kernel(counts[i], n, min(max(q[i], 0.0), 1.0))
    return out


def oracle_grid(spec, refinement=DEFAULT_REFINEMENT):
    """Sorted candidate endpoints: base upper quantiles and their mu-shifted copies."""
    m = int(refinement * spec.n)
    levels = np.arange(1, m) / m
    base_pts = np.atleast_1d(spec.base.isf(levels))
    pts = np.concatenate([base_pts, base_pts + spec.mu]) if spec.mu > 0 else base_pts
    return np.unique(pts[np.isfinite(pts)])


def _check(spec, alpha):
    if spec.n < 2:
        raise ValueError("oracle tests need n >= 2")
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")


def _result(kind, spec, alpha, p, q, threshold=None, interval=None):
    c, power = exact_test_power(spec.n, p, q, alpha)
    return OracleTestResult(
        kind=kind,
        threshold=threshold,
        interval=interval,
        critical_count=c,
        exact_power=power,
        null_level=float(binom_sf_kernel(c, spec.n, p)),
        null_mass=p,
        alt_mass=q,
    )


def _threshold_candidates(spec, alpha):
    n = spec.n
    eps = spec.epsilon
    pstar = critical_masses(n, float(alpha))
    t = np.atleast_1d(spec.base.isf(pstar))
    # written as p + eps * (excess mass) so that mu = 0 gives q == p exactly
    excess = np.atleast_1d(spec.base.survival(t - spec.mu)) - np.atleast_1d(spec.base.survival(t))
    q = pstar + eps * excess
    counts = np.arange(1, n + 1)
    return pstar, t, q, _powers(counts, n, q)


def oracle_threshold_test(spec, alpha):
    """Most powerful single-threshold test {N(t) >= c_t}, exact over all real t.

    Ties go to the smallest t.
    """
    _check(spec, alpha)
    pstar, t, q, power = _threshold_candidates(spec, alpha)
    best = power.max()
    i = int(np.flatnonzero(power == best).max())  # largest c is the smallest t
    return _result("threshold", spec, alpha, float(pstar[i]), float(q[i]), threshold=float(t[i]))


class _WindowFamily:
    """Windows [s, t] of fixed null mass p, indexed by the right endpoint t."""

    def __init__(self, spec, p):
        self.spec = spec
        self.p = p

    def excess_mass(self, t):
        """Shifted-component mass minus null mass of each window, and its left end."""
        base = self.spec.base
        mu = self.spec.mu
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s_t = np.atleast_1d(base.survival(t))
        level = s_t + self.p
        ok = level < 1.0
        s = np.full(t.shape, -np.inf)
        if ok.any():
            s[ok] = base.isf(level[ok])
        alt = np.atleast_1d(base.survival(s - mu)) - np.atleast_1d(base.survival(t - mu))
        null = np.atleast_1d(base.survival(s)) - s_t
        return np.where(ok, alt - null, -np.inf), s

    def polish(self, lo, hi, iters=60):
        """Golden-section maximization of the excess mass for t in [lo, hi]."""
        a, b = lo, hi
        x1 = b - _GOLDEN * (b - a)
        x2 = a + _GOLDEN * (b - a)
        f1 = self.excess_mass(x1)[0][0]
        f2 = self.excess_mass(x2)[0][0]
        for _ in range(iters):
            if f1 >= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - _GOLDEN * (b - a)
                f1 = self.excess_mass(x1)[0][0]
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + _GOLDEN * (b - a)
                f2 = self.excess_mass(x2)[0][0]
        return (x1, f1) if f1 >= f2 else (x2, f2)


def oracle_scan_test(spec, alpha, refinement=DEFAULT_REFINEMENT):
    """Most powerful single-window test {N[s, t] >= c_st}; t = +inf is allowed.

    For every critical count c whose best conceivable power can still beat
    the incumbent, the window of null mass p*_c with the largest mixture mass
    is located on the endpoint grid (``refinement`` quantile levels per
    observation) and the leading candidates are polished by golden section.
    Ties go to the lexicographically smallest (s, t).
    """
    _check(spec, alpha)
    n = spec.n
    eps = spec.epsilon
    pstar, t_thr, q_thr, pw_thr = _threshold_candidates(spec, alpha)
    grid = oracle_grid(spec, refinement)
    s_grid = np.atleast_1d(spec.base.survival(grid))

    # half-lines seed the incumbent
    best_power = pw_thr.max()
    cands = []  # (power, c index, s, t, q)
    for i in np.flatnonzero(pw_thr == best_power):
        cands.append((pw_thr[i], i, float(t_thr[i]), math.inf, float(q_thr[i])))

    # optimistic power if the whole contaminated component landed in the window
    bound = _powers(np.arange(1, n + 1), n, pstar + eps * (1.0 - pstar))
    for i in np.argsort(-bound, kind="stable"):
        if bound[i] < best_power:
            break
        fam = _WindowFamily(spec, float(pstar[i]))
        usable = s_grid + pstar[i] < 1.0
        if not usable.any():
            continue
        ts = grid[usable]
        excess, s = fam.excess_mass(ts)
        j = int(np.argmax(excess))
        lo = ts[j - 1] if j > 0 else ts[j]
        hi = ts[j + 1] if j + 1 < ts.size else ts[j]
        q = pstar[i] + eps * excess[j]
        power = float(binom_sf_kernel(i + 1, n, min(q, 1.0)))
        cands.append((power, i, float(s[j]), float(ts[j]), q, lo, hi))
        if power > best_power:
            best_power = power

    # polish the strongest grid candidates on the continuum
    grid_cands = sorted((c for c in cands if len(c) == 7), key=lambda c: -c[0])[:_POLISH_TOP]
    for power, i, s, t, q, lo, hi in grid_cands:
        if hi <= lo:
            continue
        fam = _WindowFamily(spec, float(pstar[i]))
        t_new, excess_new = fam.polish(lo, hi)
        q_new = pstar[i] + eps * excess_new
        if q_new > q:
            s_new = float(fam.excess_mass(t_new)[1][0])
            p_new = float(binom_sf_kernel(i + 1, n, min(q_new, 1.0)))
            cands.append((p_new, i, s_new, float(t_new), q_new))

    top = max(c[0] for c in cands)
    winners = sorted((c for c in cands if c[0] == top), key=lambda c: (c[2], c[3]))
    _, i, s, t, q = winners[0][:5]
    return _result("scan", spec, alpha, float(pstar[i]), float(min(q, 1.0)), interval=(s, t))
