"""Monte Carlo calibration, power estimation, and power-curve experiments.

Every replication draws from its own generator, derived from
(master seed, purpose tag, stream, replication index) through numpy's
``SeedSequence``. Results therefore do not depend on how replications are
split across worker processes.

Scores live on a family-invariant scale: the log p-value for BJ and the
Tippett scan, F(max X) for the max test, and the raw statistic otherwise.
Under the null each score has a law depending on n only, so one calibration
on Uniform01 serves every base family.
"""

import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .boundaries import (
    gg_max_boundary,
    gg_threshold_boundary,
    ingster_boundary,
    power_law_scan_boundary,
    power_law_threshold_boundary,
)
from .distributions import (
    GeneralizedGaussian,
    MixtureSpec,
    Normal,
    Uniform01,
    make_distribution,
    mixture_sample,
    sample,
)
from .statistics import LARGE, REJECT_DIRECTION, TEST_NAMES, compute_statistics, upper_pvalues

__all__ = [
    "MIN_NULL_REPS",
    "ExperimentConfig",
    "Calibration",
    "PowerCell",
    "PowerCurve",
    "CellError",
    "replication_rng",
    "null_scores",
    "calibrate_tests",
    "calibrate_null",
    "estimate_powers",
    "estimate_power",
    "boundary_annotations",
    "resolve_workers",
    "run_experiment",
]

MIN_NULL_REPS = 100
_MAX_SEED = 2**64


def _tag(name):
    return zlib.crc32(name.encode())


def replication_rng(seed, tag, stream, rep):
    """Generator for one replication; independent of worker layout."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_tag(tag), int(stream), int(rep)))
    return np.random.default_rng(ss)


def resolve_workers(workers=None):
    """Explicit count, else SPARSESCAN_WORKERS, else 1."""
    if workers is None:
        env = os.environ.get("SPARSESCAN_WORKERS")
        workers = int(env) if env else 1
    workers = int(workers)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def _check_tests(tests):
    tests = tuple(tests)
    if not tests:
        raise ValueError("at least one test is required")
    bad = [t for t in tests if t not in TEST_NAMES]
    if bad:
        raise ValueError(f"unknown tests {bad}; choose from {list(TEST_NAMES)}")
    if len(set(tests)) != len(tests):
        raise ValueError(f"duplicate tests in {list(tests)}")
    return tests


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")


def _check_seed(seed):
    if not (isinstance(seed, (int, np.integer)) and 0 <= seed < _MAX_SEED):
        raise ValueError(f"seed must be an integer in [0, 2^64), got {seed!r}")


def null_scores(tests, x, base):
    """Calibration-scale scores of several tests on one sorted sample."""
    stats = compute_statistics([t for t in tests if t != "Max"], x, base)
    out = []
    for t in tests:
        if t == "Max":
            out.append(1.0 - float(upper_pvalues(x[-1:], base)[0]))
        else:
            out.append(stats[t].score)
    return out


# ---------------------------------------------------------------------------
# replication workers (module level so they pickle)


def _null_chunk(tests, n, seed, stream, reps):
    base = Uniform01()
    out = np.empty((len(reps), len(tests)))
    for row, rep in enumerate(reps):
        x = sample(base, replication_rng(seed, "null", stream, rep), n)
        out[row] = null_scores(tests, x, base)
    return out


def _power_chunk(tests, spec, seed, stream, reps):
    out = np.empty((len(reps), len(tests)))
    for row, rep in enumerate(reps):
        x = mixture_sample(spec, replication_rng(seed, "power", stream, rep))
        out[row] = null_scores(tests, x, spec.base)
    return out


def _chunks(reps, workers):
    size = max(1, math.ceil(reps / (4 * workers))) if workers > 1 else reps
    return [range(lo, min(lo + size, reps)) for lo in range(0, reps, size)]


def _run_reps(fn, args, reps, workers, executor=None):
    """Apply fn(*args, chunk) over replication chunks and stack rows in rep order."""
    chunks = _chunks(reps, workers)
    if workers == 1 and executor is None:
        parts = [fn(*args, c) for c in chunks]
    elif executor is not None:
        parts = list(executor.map(fn, *zip(*[(*args, c) for c in chunks])))
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(fn, *zip(*[(*args, c) for c in chunks])))
    return np.vstack(parts)


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class Calibration:
    """Empirical null critical value of one test; the ``calibrate`` JSON record."""

    test: str
    n: int
    alpha: float
    reps: int
    seed: int
    critical: float

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(
            test=str(d["test"]),
            n=int(d["n"]),
            alpha=float(d["alpha"]),
            reps=int(d["reps"]),
            seed=int(d["seed"]),
            critical=float(d["critical"]),
        )


def _critical_from_scores(scores, direction, alpha):
    # k-th most extreme value with k = ceil(alpha * reps); rejection is strict,
    # so at most k - 1 calibration draws reject
    k = max(1, math.ceil(alpha * scores.size - 1e-9))
    s = np.sort(scores)
    return float(s[-k] if direction == LARGE else s[k - 1])


def calibrate_tests(tests, n, alpha, null_reps, seed, workers=None, executor=None):
    """Calibrate several tests on shared Uniform01 null samples.

    Sharing samples does not change any single test's result: ``calibrate_null``
    for one test returns the same critical value.
    """
    tests = _check_tests(tests)
    _check_alpha(alpha)
    _check_seed(seed)
    if null_reps < MIN_NULL_REPS:
        raise ValueError(f"null_reps must be >= {MIN_NULL_REPS}, got {null_reps}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    workers = resolve_workers(workers)
    scores = _run_reps(_null_chunk, (tests, int(n), int(seed), 0), int(null_reps), workers, executor)
    return {
        t: Calibration(
            t, int(n), float(alpha), int(null_reps), int(seed),
            _critical_from_scores(scores[:, j], REJECT_DIRECTION[t], alpha),
        )
        for j, t in enumerate(tests)
    }


def calibrate_null(test, n, alpha, null_reps, seed, workers=None):
    """Level-alpha critical value of ``test`` at sample size n, by Monte Carlo."""
    return calibrate_tests((test,), n, alpha, null_reps, seed, workers)[test]


# ---------------------------------------------------------------------------
# power


def _critical_value(test, critical, n):
    if isinstance(critical, Calibration):
        if critical.test != test:
            raise ValueError(f"calibration is for {critical.test!r}, not {test!r}")
        if critical.n != n:
            raise ValueError(f"calibration n={critical.n} does not match sample size n={n}")
        return critical.critical
    return float(critical)


def _rejections(test, scores, critical):
    if REJECT_DIRECTION[test] == LARGE:
        return scores > critical
    return scores < critical


def estimate_powers(tests, spec, criticals, power_reps, seed, stream=0, workers=None, executor=None):
    """Power and standard error of several tests on shared mixture samples.

    ``criticals`` maps test name to a float or a ``Calibration``.
    """
    tests = _check_tests(tests)
    _check_seed(seed)
    if power_reps < 1:
        raise ValueError(f"power_reps must be >= 1, got {power_reps}")
    crit = {t: _critical_value(t, criticals[t], spec.n) for t in tests}
    workers = resolve_workers(workers)
    scores = _run_reps(_power_chunk, (tests, spec, int(seed), int(stream)), int(power_reps), workers, executor)
    out = {}
    for j, t in enumerate(tests):
        p = float(np.count_nonzero(_rejections(t, scores[:, j], crit[t]))) / power_reps
        out[t] = (p, math.sqrt(p * (1.0 - p) / power_reps))
    return out


def estimate_power(test, spec, critical, power_reps, seed, stream=0, workers=None):
    """(power, se) of one test against the mixture ``spec``."""
    return estimate_powers((test,), spec, {test: critical}, power_reps, seed, stream, workers)[test]


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class ExperimentConfig:
    """One power-curve experiment: a base law, (n, beta), an r grid and a test set.

    ``criticals`` optionally supplies precomputed critical values (from
    ``calibrate``) keyed by test name; those tests skip calibration.
    """

    family: str
    n: int
    beta: float
    r_grid: tuple
    tests: tuple
    params: dict = field(default_factory=dict)
    alpha: float = 0.05
    null_reps: int = 1000
    power_reps: int = 100
    seed: int = 0
    criticals: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "r_grid", tuple(float(r) for r in self.r_grid))
        object.__setattr__(self, "tests", tuple(self.tests))
        object.__setattr__(self, "params", dict(self.params))
        object.__setattr__(self, "criticals", dict(self.criticals))
        errors = self.validation_errors()
        if errors:
            raise ValueError("; ".join(errors))

    def validation_errors(self):
        errs = []
        try:
            make_distribution(self.family, **self.params)
        except (TypeError, ValueError) as exc:
            errs.append(f"family/params: {exc}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 2):
            errs.append(f"n: must be an integer >= 2, got {self.n!r}")
        if not (0.5 < self.beta < 1.0):
            errs.append(f"beta: must lie in (1/2, 1), got {self.beta!r}")
        elif not errs and self.n ** (-self.beta) > 0.5:
            errs.append(f"beta: epsilon = n^-beta exceeds 1/2 at n={self.n}")
        if not self.r_grid:
            errs.append("r_grid: must be nonempty")
        elif any(r < 0 for r in self.r_grid) or any(b <= a for a, b in zip(self.r_grid, self.r_grid[1:])):
            errs.append("r_grid: must be strictly ascending and nonnegative")
        try:
            _check_tests(self.tests)
        except ValueError as exc:
            errs.append(f"tests: {exc}")
        if not (0.0 < self.alpha < 1.0):
            errs.append(f"alpha: must lie in (0, 1), got {self.alpha!r}")
        uncalibrated = [t for t in self.tests if t not in self.criticals]
        if uncalibrated and not self.null_reps >= MIN_NULL_REPS:
            errs.append(f"null_reps: must be >= {MIN_NULL_REPS}, got {self.null_reps!r}")
        if not self.power_reps >= 1:
            errs.append(f"power_reps: must be >= 1, got {self.power_reps!r}")
        try:
            _check_seed(self.seed)
        except ValueError as exc:
            errs.append(f"seed: {exc}")
        for t, c in self.criticals.items():
            if isinstance(c, Calibration) and (c.n != self.n or c.test != t):
                errs.append(f"criticals.{t}: calibrated for test={c.test}, n={c.n}")
            elif isinstance(c, Calibration) and c.alpha != self.alpha:
                errs.append(f"criticals.{t}: calibrated at alpha={c.alpha}, config has {self.alpha}")
        return errs

    def base(self):
        return make_distribution(self.family, **self.params)

    def to_dict(self):
        d = asdict(self)
        d["r_grid"] = list(self.r_grid)
        d["tests"] = list(self.tests)
        d["criticals"] = {
            t: (c.to_dict() if isinstance(c, Calibration) else float(c)) for t, c in self.criticals.items()
        }
        return d


@dataclass(frozen=True)
class PowerCell:
    test: str
    r: float
    power: float
    se: float
    reps: int
    critical: float


class CellError(RuntimeError):
    """Failure of one (test, r) cell, carrying the cell identity."""

    def __init__(self, test, r, cause):
        super().__init__(f"cell (test={test}, r={r}) failed: {cause}")
        self.test = test
        self.r = r
        self.cause = cause


@dataclass
class PowerCurve:
    """Power per (test, r), boundary annotations, provenance and failures."""

    cells: list
    boundaries: dict
    metadata: dict
    failures: list = field(default_factory=list)

    def cell(self, test, r):
        for c in self.cells:
            if c.test == test and c.r == r:
                return c
        raise KeyError((test, r))

    def series(self, test):
        """(r, power, se) arrays of one test, ordered by r."""
        cs = sorted((c for c in self.cells if c.test == test), key=lambda c: c.r)
        return (
            np.array([c.r for c in cs]),
            np.array([c.power for c in cs]),
            np.array([c.se for c in cs]),
        )


def boundary_annotations(base, beta):
    """Boundary r values relevant to the base family, keyed by curve name."""
    if base.tail_exponent is not None:
        return {
            "pl-scan": power_law_scan_boundary(beta),
            "pl-threshold": power_law_threshold_boundary(base.tail_exponent, beta),
        }
    if isinstance(base, Normal):
        return {"ingster": ingster_boundary(beta)}
    if isinstance(base, GeneralizedGaussian):
        return {
            "gg-threshold": gg_threshold_boundary(base.a, beta),
            "gg-max": gg_max_boundary(base.a, beta),
        }
    return {}


def run_experiment(config, workers=None):
    """Calibrate each test once, then estimate power on every (test, r) cell.

    Replications at grid point r_k use stream k, shared by all tests. A failing
    r-point is recorded in ``failures`` with its cell identity; if every cell
    fails the first ``CellError`` is raised.
    """
    if not isinstance(config, ExperimentConfig):
        raise TypeError("config must be an ExperimentConfig")
    base = config.base()
    workers = resolve_workers(workers)
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        criticals = {}
        for t, c in config.criticals.items():
            if t in config.tests:
                criticals[t] = _critical_value(t, c, config.n)
        todo = [t for t in config.tests if t not in criticals]
        if todo:
            cals = calibrate_tests(
                todo, config.n, config.alpha, config.null_reps, config.seed, workers, executor
            )
            criticals.update({t: cal.critical for t, cal in cals.items()})

        cells, failures = [], []
        for k, r in enumerate(config.r_grid):
            try:
                spec = MixtureSpec(base, config.n, config.beta, r)
                res = estimate_powers(
                    config.tests, spec, criticals, config.power_reps, config.seed, k, workers, executor
                )
            except Exception as exc:  # noqa: BLE001 - recorded per cell
                for t in config.tests:
                    failures.append(CellError(t, r, exc))
                continue
            for t in config.tests:
                p, se = res[t]
                cells.append(PowerCell(t, r, p, se, config.power_reps, criticals[t]))
    finally:
        if executor is not None:
            executor.shutdown()

    if not cells and failures:
        raise failures[0]
    metadata = {
        "config": config.to_dict(),
        "code_version": __version__,
        "criticals": criticals,
    }
    return PowerCurve(cells, boundary_annotations(base, config.beta), metadata, failures)
