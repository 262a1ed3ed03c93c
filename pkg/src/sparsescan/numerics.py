"""Special functions: regularized incomplete beta, binomial tails, critical counts.

The scalar kernels are compiled with numba so the statistics and oracle grids
can call them inside tight loops. The public wrappers validate arguments and
return plain floats / ints.
"""

import math

import numpy as np
from numba import njit

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAXIT = 100_000
_SUM_RTOL = 1e-17


@njit(cache=True)
def _lbeta(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


@njit(cache=True)
def _betacf(x, a, b):
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            break
    return h


_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_STIRLING_BIG = 10.0


@njit(cache=True)
def _stirling_corr(z):
    # lgamma(z) - [(z - 1/2) log z - z + log sqrt(2 pi)], for z >= 10
    w = 1.0 / (z * z)
    return (
        1.0 / 12.0
        + w * (-1.0 / 360.0
        + w * (1.0 / 1260.0
        + w * (-1.0 / 1680.0
        + w * (1.0 / 1188.0
        + w * (-691.0 / 360360.0
        + w * (1.0 / 156.0))))))
    ) / z


@njit(cache=True)
def _log_front(x, a, b):
    """log of x^a (1-x)^b / B(a, b), avoiding lgamma cancellation for large shapes."""
    lo = min(a, b)
    hi = max(a, b)
    if lo >= _STIRLING_BIG:
        s = a + b
        x0 = a / s
        corr = _stirling_corr(a) + _stirling_corr(b) - _stirling_corr(s)
        return (
            a * math.log1p((x - x0) / x0)
            + b * math.log1p((x0 - x) / (1.0 - x0))
            + 0.5 * math.log(a * b / s)
            - _LN_SQRT_2PI
            - corr
        )
    if hi >= _STIRLING_BIG:
        # lgamma(hi) - lgamma(hi + lo) via Stirling, lgamma(lo) directly
        s = a + b
        ratio = (
            -(hi - 0.5) * math.log1p(lo / hi)
            - lo * math.log(s)
            + lo
            + _stirling_corr(hi)
            - _stirling_corr(s)
        )
        return a * math.log(x) + b * math.log1p(-x) - math.lgamma(lo) - ratio
    return a * math.log(x) + b * math.log1p(-x) - _lbeta(a, b)


@njit(cache=True)
def log_betainc_kernel(x, a, b):
    """log I_x(a, b) without validation."""
    if x <= 0.0:
        return -np.inf
    if x >= 1.0:
        return 0.0
    if x < (a + 1.0) / (a + b + 2.0):
        return _log_front(x, a, b) + math.log(_betacf(x, a, b)) - math.log(a)
    comp = math.exp(_log_front(1.0 - x, b, a)) * _betacf(1.0 - x, b, a) / b
    return math.log1p(-comp)


@njit(cache=True)
def betainc_kernel(x, a, b):
    """I_x(a, b) without validation."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(_log_front(x, a, b)) * _betacf(x, a, b) / a
    return 1.0 - math.exp(_log_front(1.0 - x, b, a)) * _betacf(1.0 - x, b, a) / b


@njit(cache=True)
def betaincinv_kernel(y, a, b):
    """Solve I_x(a, b) = y for x; intended for y <= 1/2.

    Safeguarded Newton on t = log x, which keeps relative accuracy when the
    root is many orders of magnitude below 1.
    """
    if y <= 0.0:
        return 0.0
    if y >= 1.0:
        return 1.0
    log_y = math.log(y)
    lo = -745.0
    hi = 0.0
    lb = _lbeta(a, b)
    # leading term of the small-x expansion: I_x ~ x^a / (a B(a, b))
    t = (log_y + math.log(a) + lb) / a
    if not (lo < t < hi):
        t = -1.0
    for _ in range(400):
        x = math.exp(t)
        g = log_betainc_kernel(x, a, b) - log_y
        if g > 0.0:
            hi = t
        else:
            lo = t
        deriv = math.exp(a * t + (b - 1.0) * math.log1p(-x) - lb - (g + log_y))
        t_new = t - g / deriv if deriv > 0.0 else 0.5 * (lo + hi)
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= 1e-15 * max(1.0, abs(t)):
            t = t_new
            break
        if hi - lo <= 1e-15 * max(1.0, abs(lo)):
            t = 0.5 * (lo + hi)
            break
        t = t_new
    return math.exp(t)


@njit(cache=True)
def betaincinv_any(y, a, b):
    """Solve I_x(a, b) = y on all of (0, 1), reflecting when y > 1/2."""
    if y <= 0.5:
        return betaincinv_kernel(y, a, b)
    return 1.0 - betaincinv_kernel(1.0 - y, b, a)


@njit(cache=True)
def binom_max_null_mass(c, n, alpha):
    """Largest p with P(Bin(n, p) >= c) <= alpha, for 1 <= c <= n.

    This is the alpha-quantile of Beta(c, n - c + 1); it is nudged down until
    the summation tail agrees, so the level holds exactly as evaluated.
    """
    p = betaincinv_any(alpha, c + 0.0, n - c + 1.0)
    for _ in range(200):
        if binom_sf_kernel(c, n, p) <= alpha:
            break
        p *= 1.0 - 1e-13
    return p


@njit(cache=True)
def _log_binom_pmf(k, n, p):
    # C(n, k) = 1 / ((n + 1) B(k + 1, n - k + 1))
    return (
        _log_front(p, k + 1.0, n - k + 1.0)
        - math.log(p)
        - math.log1p(-p)
        - math.log(n + 1.0)
    )


@njit(cache=True)
def binom_sf_kernel(c, n, p):
    """P(Bin(n, p) >= c) by direct summation of the short side of the pmf."""
    if c <= 0:
        return 1.0
    if c > n:
        return 0.0
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    odds = p / (1.0 - p)
    if c > n * p:
        # terms decrease from k = c upward
        term = math.exp(_log_binom_pmf(c, n, p))
        total = term
        k = c
        while k < n:
            term *= (n - k) / (k + 1.0) * odds
            k += 1
            total += term
            if term <= total * _SUM_RTOL:
                break
        return total
    # terms decrease from k = c - 1 downward; take the complement
    term = math.exp(_log_binom_pmf(c - 1, n, p))
    total = term
    k = c - 1
    while k > 0:
        term *= k / ((n - k + 1.0) * odds)
        k -= 1
        total += term
        if term <= total * _SUM_RTOL:
            break
    return max(0.0, 1.0 - total)


@njit(cache=True)
def binom_critical_kernel(n, p, alpha):
    """Smallest c in {0, ..., n+1} with P(Bin(n, p) >= c) <= alpha."""
    if binom_sf_kernel(0, n, p) <= alpha:
        return 0
    # bracket: sf(lo) > alpha, sf(hi) <= alpha
    lo = 0
    hi = n + 1
    sd = math.sqrt(n * p * (1.0 - p))
    guess_hi = int(math.ceil(n * p + 12.0 * sd + 12.0))
    if guess_hi < hi and binom_sf_kernel(guess_hi, n, p) <= alpha:
        hi = guess_hi
    guess_lo = int(math.floor(n * p))
    if lo < guess_lo < hi and binom_sf_kernel(guess_lo, n, p) > alpha:
        lo = guess_lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if binom_sf_kernel(mid, n, p) <= alpha:
            hi = mid
        else:
            lo = mid
    return hi


def _check_prob(name, u):
    if not (0.0 <= u <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {u!r}")


def _check_shape(a, b):
    if not (a > 0 and b > 0):
        raise ValueError(f"shape parameters must be positive, got a={a!r}, b={b!r}")


def reg_inc_beta(u, a, b):
    """Regularized incomplete beta function I_u(a, b), the Beta(a, b) cdf at u."""
    _check_prob("u", u)
    _check_shape(a, b)
    return float(betainc_kernel(float(u), float(a), float(b)))


def log_reg_inc_beta(u, a, b):
    """Natural log of I_u(a, b); stays finite far below the float64 range."""
    _check_prob("u", u)
    _check_shape(a, b)
    return float(log_betainc_kernel(float(u), float(a), float(b)))


def binom_sf(c, n, p):
    """P(Bin(n, p) >= c) for 0 <= c <= n + 1."""
    _check_prob("p", p)
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n!r}")
    if c < 0 or c > n + 1:
        raise ValueError(f"count c must lie in [0, n+1], got c={c!r}, n={n!r}")
    return float(binom_sf_kernel(int(c), int(n), float(p)))


def binom_critical(n, p, alpha):
    """Critical count of the level-alpha upper-tail binomial test.

    Returns the smallest c with P(Bin(n, p) >= c) <= alpha. The value n + 1
    means no count is extreme enough and the test never rejects.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    _check_prob("p", p)
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    return int(binom_critical_kernel(int(n), float(p), float(alpha)))


def bernstein_beta_bound(u, k, n):
    """Bernstein upper bound on the Beta(k, n-k+1) cdf, valid for u <= k/n."""
    _check_prob("u", u)
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got k={k!r}, n={n!r}")
    if u * n > k * (1.0 + 1e-15):
        raise ValueError(f"bound only holds for u <= k/n, got u={u!r}, k/n={k / n!r}")
    gap = max(k - n * u, 0.0)
    denom = n * u * (1.0 - u) + gap / 3.0
    if denom == 0.0:
        return 1.0
    return math.exp(-0.5 * gap * gap / denom)
