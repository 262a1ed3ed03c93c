"""Command-line interface: boundary curves, null calibration, power experiments.

Exit codes: 0 success, 2 config or usage error, 3 some cells failed,
4 internal error (including every cell failing).
"""

import argparse
import hashlib
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .boundaries import CURVES, make_curve
from .simulation import (
    MIN_NULL_REPS,
    Calibration,
    ExperimentConfig,
    calibrate_null,
    resolve_workers,
    run_experiment,
)
from .statistics import TEST_NAMES

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3
EXIT_INTERNAL = 4

POWER_HEADER = ("test", "r", "power", "se", "reps", "critical")
_CONFIG_KEYS = {
    "family", "params", "n", "beta", "r_grid", "tests", "alpha",
    "null_reps", "power_reps", "seed", "criticals", "calibrations",
}


class ConfigError(ValueError):
    pass


def fmt(x):
    """Number in 17 significant digits (integers verbatim)."""
    if isinstance(x, int):
        return str(x)
    return f"{float(x):.17g}"


def parse_range(text):
    """'start:stop:step' to the inclusive grid start, start+step, ..., stop."""
    try:
        start, stop, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise ConfigError(f"range must look like start:stop:step, got {text!r}") from None
    if not step > 0 or stop < start:
        raise ConfigError(f"range needs step > 0 and stop >= start, got {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def canonical_hash(obj):
    """SHA-256 of the key-sorted compact JSON encoding."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# config loading


def _load_calibration(path):
    try:
        with open(path) as fh:
            return Calibration.from_dict(json.load(fh))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"calibrations: cannot read {path}: {exc}") from None


def load_config(path, seed=None, alpha=None):
    """ExperimentConfig from a TOML file or from a previous run's manifest.json."""
    path = Path(path)
    try:
        if path.suffix == ".json":
            raw = json.loads(path.read_text())
            raw = raw.get("config", raw)
        else:
            raw = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return config_from_mapping(raw, base_dir=path.parent, seed=seed, alpha=alpha)


def config_from_mapping(raw, base_dir=Path("."), seed=None, alpha=None):
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    missing = [k for k in ("family", "n", "beta", "r_grid", "tests") if k not in raw]
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")
    r_grid = raw["r_grid"]
    if isinstance(r_grid, str):
        r_grid = parse_range(r_grid)
    criticals = {}
    for t, c in dict(raw.get("criticals", {})).items():
        criticals[t] = Calibration.from_dict(c) if isinstance(c, dict) else c
    for p in raw.get("calibrations", []):
        cal = _load_calibration(Path(base_dir) / p)
        criticals[cal.test] = cal
    kwargs = {
        "family": raw["family"],
        "params": raw.get("params", {}),
        "n": raw["n"],
        "beta": raw["beta"],
        "r_grid": r_grid,
        "tests": raw["tests"],
        "criticals": criticals,
    }
    for key in ("alpha", "null_reps", "power_reps", "seed"):
        if key in raw:
            kwargs[key] = raw[key]
    if seed is not None:
        kwargs["seed"] = seed
    if alpha is not None:
        kwargs["alpha"] = alpha
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# outputs


def power_csv(curve, tests):
    lines = [",".join(POWER_HEADER)]
    order = {t: i for i, t in enumerate(tests)}
    for c in sorted(curve.cells, key=lambda c: (order[c.test], c.r)):
        lines.append(",".join([c.test, fmt(c.r), fmt(c.power), fmt(c.se), fmt(c.reps), fmt(c.critical)]))
    return "\n".join(lines) + "\n"


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
_MARKER_DASH = {"pl-scan": "8,5", "pl-threshold": "2,4"}


def power_svg(curve, tests, title=""):
    """800x600 SVG: one polyline per test, vertical lines at the boundary r values."""
    W, H = 800, 600
    left, right, top, bottom = 70, 170, 40, 60
    rs = [c.r for c in curve.cells]
    marks = dict(curve.boundaries)
    lo = min(rs + list(marks.values()))
    hi = max(rs + list(marks.values()))
    if hi <= lo:
        hi = lo + 1.0

    def px(r):
        return left + (r - lo) / (hi - lo) * (W - left - right)

    def py(p):
        return H - bottom - p * (H - top - bottom)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="24" text-anchor="middle" font-size="16">{title}</text>',
        f'<line x1="{left}" y1="{py(0)}" x2="{W - right}" y2="{py(0)}" stroke="black"/>',
        f'<line x1="{left}" y1="{py(0)}" x2="{left}" y2="{py(1)}" stroke="black"/>',
        f'<text x="{(left + W - right) / 2}" y="{H - 15}" text-anchor="middle" font-size="14">r</text>',
        f'<text x="20" y="{(top + H - bottom) / 2}" font-size="14" '
        f'transform="rotate(-90 20 {(top + H - bottom) / 2})" text-anchor="middle">power</text>',
    ]
    for k in range(6):
        p = k / 5
        out.append(f'<text x="{left - 8}" y="{py(p) + 4:.2f}" text-anchor="end" font-size="12">{p:.1f}</text>')
    for k in range(6):
        r = lo + k * (hi - lo) / 5
        out.append(f'<text x="{px(r):.2f}" y="{py(0) + 18:.2f}" text-anchor="middle" font-size="12">{r:.2f}</text>')
    for name, r in marks.items():
        dash = _MARKER_DASH.get(name, "8,5")
        out.append(
            f'<line class="boundary" data-curve="{name}" x1="{px(r):.2f}" y1="{py(0):.2f}" '
            f'x2="{px(r):.2f}" y2="{py(1):.2f}" stroke="black" stroke-dasharray="{dash}"/>'
        )
    for i, t in enumerate(tests):
        color = _COLORS[i % len(_COLORS)]
        pts = sorted((c.r, c.power) for c in curve.cells if c.test == t)
        if pts:
            coords = " ".join(f"{px(r):.2f},{py(p):.2f}" for r, p in pts)
            out.append(f'<polyline class="power" data-test="{t}" points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        y = top + 20 + 20 * i
        out.append(f'<line x1="{W - right + 15}" y1="{y}" x2="{W - right + 40}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - right + 46}" y="{y + 4}" font-size="12">{t}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _now():
    return datetime.now(timezone.utc).isoformat()


# ---------------------------------------------------------------------------
# subcommands


def cmd_boundary(args):
    try:
        betas = [b for b in parse_range(args.beta) if 0.5 < b < 1.0]
        curve = make_curve(args.curve, args.a)
        rows = ["beta,r"] + [f"{fmt(b)},{fmt(curve(b))}" for b in betas]
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_calibrate(args):
    if args.reps < MIN_NULL_REPS:
        print(f"error: --reps must be >= {MIN_NULL_REPS}, got {args.reps}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cal = calibrate_null(args.test, args.n, args.alpha, args.reps, args.seed, args.workers)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = json.dumps(cal.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args):
    started = _now()
    try:
        config = load_config(args.config, seed=args.seed, alpha=args.alpha)
        workers = resolve_workers(args.workers)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        curve = run_experiment(config, workers=workers)
    except Exception as exc:  # noqa: BLE001 - total failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL

    out.mkdir(parents=True, exist_ok=True)
    files = {"power": out / "power.csv"}
    files["power"].write_text(power_csv(curve, config.tests))
    if args.plot:
        files["plot"] = out / "power.svg"
        params = ", ".join(f"{k}={v}" for k, v in config.params.items())
        title = f"{config.family}({params}), n={config.n}, beta={config.beta}"
        files["plot"].write_text(power_svg(curve, config.tests, title))
    cfg = config.to_dict()
    manifest = {
        "config": cfg,
        "config_hash": canonical_hash(cfg),
        "seed": config.seed,
        "code_version": __version__,
        "started": started,
        "finished": _now(),
        "workers": workers,
        "criticals": curve.metadata["criticals"],
        "boundaries": curve.boundaries,
        "failures": [{"test": f.test, "r": f.r, "error": str(f.cause)} for f in curve.failures],
        "outputs": {k: str(v) for k, v in files.items()},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if curve.failures:
        print(f"warning: {len(curve.failures)} cells failed; see manifest.json", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="sparsescan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("boundary", help="tabulate a detection-boundary curve as beta,r CSV")
    b.add_argument("curve", choices=CURVES)
    b.add_argument("--beta", default="0.5:1.0:0.01", help="inclusive start:stop:step (default %(default)s)")
    b.add_argument("--a", type=float, default=None, help="tail shape for gg-threshold, gg-max, pl-threshold")
    b.add_argument("--out", help="output CSV path (default stdout)")
    b.set_defaults(func=cmd_boundary)

    c = sub.add_parser("calibrate", help="Monte Carlo null critical value of one test")
    c.add_argument("test", choices=TEST_NAMES)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--alpha", type=float, default=0.05)
    c.add_argument("--reps", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--workers", type=int, default=None)
    c.add_argument("--out", help="output JSON path (default stdout)")
    c.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("simulate", help="run a power-curve experiment from a TOML config")
    s.add_argument("--config", required=True, help="TOML config, or a manifest.json to rerun")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--plot", action="store_true", help="also write power.svg")
    s.add_argument("--seed", type=int, default=None, help="override the config seed")
    s.add_argument("--alpha", type=float, default=None, help="override the config alpha")
    s.add_argument("--workers", type=int, default=None, help="worker processes (default $SPARSESCAN_WORKERS or 1)")
    s.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
