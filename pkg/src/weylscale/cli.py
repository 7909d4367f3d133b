"""Command-line runner for the diagnostics.

Usage::

    weylscale run EXPERIMENT [--config FILE] [--mass 1] [--lambda-grid 1:1e-3:7] ...
    weylscale validate FILE

Configuration is flat ``key = value`` text; command-line flags override
file values. Each run writes ``<experiment>.csv`` (or ``.json``) and
``manifest.json`` into the output directory. Random draws use NumPy's
counter-based Philox generator, ``numpy.random.Generator(numpy.random.Philox(seed))``.

Exit status: 0 success, 2 invalid configuration, 3 numerical guard, 4 I/O
failure.
"""
import argparse
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import SmearedOperator
from .errors import NumericalGuardError, SupportError, ZeroModeError
from .quasiequiv import (
    bessel_k,
    build_galerkin,
    form_q,
    form_q_matrix,
    fourier_trace_diagnostic,
    norm_equivalence,
    operator_diagnostics,
)
from .scalinglimit import (
    TensorWeight,
    ir_divergence_slope,
    smeared_npoint,
    sweep_massive_defect,
    sweep_notiso,
    sweep_npoint,
    sweep_translation,
)
from .testfn import Grid, GridFunction, make_bump, make_bump_derivative, random_null_function

MANIFEST_SCHEMA = 1

EXPERIMENTS = (
    "sweep-notiso",
    "sweep-translation",
    "sweep-massive-defect",
    "npoint-limit",
    "ir-slope",
    "bessel",
    "kernel-crosscheck",
    "trace-diagnostics",
    "galerkin",
    "norm-equivalence",
)

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_IO = 0, 2, 3, 4


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "sweep-notiso"
    grid_points: int = 4096
    half_width: float = 32.0
    mass: float = 1.0
    lambda_grid: tuple = (1.0, 1e-3, 7)
    nodes: int = 33
    seed: int = 0
    samples: int = 20
    sign: str = "minus"
    K: int = 256
    basis_size: int = 32
    interval: tuple = (-1.0, 1.0)
    symbol: str = ""
    ir_symbol: str = "bump"
    output: str = "out"
    format: str = "csv"

    @property
    def lambdas(self):
        hi, lo, n = self.lambda_grid
        return tuple(float(v) for v in np.geomspace(hi, lo, int(n)))

    @property
    def grid(self):
        return Grid(self.grid_points, self.half_width)

    def canonical(self):
        d = asdict(self)
        d["lambda_grid"] = list(self.lambda_grid)
        d["interval"] = list(self.interval)
        d.pop("output")
        return d


_FIELDS = {f: f.replace("_", "-") for f in ExperimentConfig.__dataclass_fields__}
_ALIASES = {"n": "grid_points", "l": "half_width", "m": "mass"}


def _parse_triple(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("expected hi:lo:count")
    return float(parts[0]), float(parts[1]), int(parts[2])


def _parse_interval(text):
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError("expected a:b")
    return float(parts[0]), float(parts[1])


_PARSERS = {
    "grid_points": int,
    "half_width": float,
    "mass": float,
    "lambda_grid": _parse_triple,
    "nodes": int,
    "seed": int,
    "samples": int,
    "K": int,
    "basis_size": int,
    "interval": _parse_interval,
}


def _key(raw):
    k = raw.strip().replace("-", "_")
    k = _ALIASES.get(k.lower(), k)
    if k.lower() == "k":
        return "K"
    return k


def _is_pow2(n):
    return n > 0 and (n & (n - 1)) == 0


def validate_config(text, overrides=None):
    """Parse flat ``key = value`` text plus overrides.

    Returns
    -------
    ExperimentConfig or list of str
        The configuration, or every violation found.
    """
    errors, values = [], {}
    items = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected key = value")
            continue
        k, v = line.split("=", 1)
        items.append((f"line {lineno}", _key(k), v.strip()))
    for k, v in (overrides or {}).items():
        items.append((f"--{_FIELDS.get(k, k)}", _key(k), str(v)))
    for where, k, v in items:
        if k not in ExperimentConfig.__dataclass_fields__:
            errors.append(f"{where}: unknown key {k!r}")
            continue
        try:
            values[k] = _PARSERS.get(k, str)(v)
        except ValueError as exc:
            errors.append(f"{where}: bad value for {k}: {exc}")
    cfg = replace(ExperimentConfig(), **values)
    errors.extend(_check(cfg, set(values)))
    return errors if errors else cfg


def _check(c, given):
    e = []
    if c.experiment not in EXPERIMENTS:
        e.append(f"experiment: {c.experiment!r} is not one of {', '.join(EXPERIMENTS)}")
    if not _is_pow2(c.grid_points):
        e.append(f"grid_points: {c.grid_points} is not a power of two")
    if not c.half_width > 0:
        e.append("half_width: must be positive")
    if not (c.mass > 0 and math.isfinite(c.mass)):
        e.append("mass: must be positive and finite")
    hi, lo, n = c.lambda_grid
    if not (0 < lo < hi <= 1 and n >= 2):
        e.append("lambda_grid: need 0 < lo < hi <= 1 and at least two points")
    if c.nodes < 1:
        e.append("nodes: must be at least 1")
    if c.seed < 0:
        e.append("seed: must be nonnegative")
    if c.samples < 20:
        e.append("samples: must be at least 20")
    if c.sign not in ("plus", "minus"):
        e.append("sign: must be plus or minus")
    if c.K < 64:
        e.append("K: must be at least 64")
    if not 1 <= c.basis_size <= 128:
        e.append("basis_size: must be between 1 and 128")
    if not c.interval[0] < c.interval[1]:
        e.append("interval: need a < b")
    if c.ir_symbol not in ("bump", "null"):
        e.append("ir_symbol: must be bump or null")
    if c.format not in ("csv", "json"):
        e.append("format: must be csv or json")
    if c.symbol and not Path(c.symbol).is_file():
        e.append(f"symbol: file {c.symbol!r} does not exist")
    return e


# -- inputs -----------------------------------------------------------------------------


def _symbol(c, default):
    if c.symbol:
        return GridFunction.from_json(json.loads(Path(c.symbol).read_text()))
    return default(c.grid)


#: half extent in time of the default weight of ``sweep-notiso``
NOTISO_T = 1.5


def notiso_symbol(grid):
    """Default symbol of ``sweep-notiso``: null real part, wide imaginary bump.

    The decay in ``lambda`` is driven by the real zero mode that the massive
    evolution creates from ``integral Im f``, so a large imaginary moment
    spread over low momenta makes it visible within three decades.
    """
    return make_bump_derivative(0, 3, 1, grid) + 1j * make_bump(0, 8, 1, grid)


def _bump_weight(t, x):
    def b(u):
        u2 = np.clip(u * u, 0.0, 1.0)
        with np.errstate(divide="ignore"):
            return np.where(u2 < 1.0, np.exp(-1.0 / (1.0 - u2)), 0.0)

    return b(t / NOTISO_T) * b(x)


def _gauss_weight(t, x):
    return np.exp(-2.0 * (t * t + x * x))


# -- experiments ------------------------------------------------------------------------


@dataclass
class Outcome:
    columns: tuple
    rows: list
    summary: dict = field(default_factory=dict)
    passed: bool = True


def _sweep_rows(r):
    b = r.bounds or (None,) * len(r.lambdas)
    return [
        (lam, complex(v).real, complex(v).imag, float("nan") if bb is None else bb)
        for lam, v, bb in zip(r.lambdas, r.values, b)
    ]


def _exp_sweep_notiso(c):
    f = _symbol(c, notiso_symbol)
    w = TensorWeight.trapezoid(_bump_weight, (-NOTISO_T, NOTISO_T), (-1.0, 1.0), c.nodes)
    r = sweep_notiso(f, w, c.mass, c.lambdas)
    v = r.real_values()
    ok = bool(np.all(np.diff(v) < 0) and v[-1] < 0.5 * v[0])
    summary = {"first": v[0], "last": v[-1], "ratio": v[-1] / v[0], "strictly_decreasing": ok}
    return Outcome(("lambda", "value_re", "value_im", "bound"), _sweep_rows(r), summary, ok)


def _defect_outcome(r):
    v = r.real_values()
    # a violated domination bound is recorded as nan
    bounds_ok = bool(np.all(np.isfinite(r.bounds)))
    dec = r.decreasing_after_first_decade()
    ok = bool(dec and v[-1] < 0.1 * v[0] and bounds_ok)
    summary = {"first": v[0], "last": v[-1], "decreasing": dec, "bounds_ok": bounds_ok}
    return Outcome(("lambda", "value_re", "value_im", "bound"), _sweep_rows(r), summary, ok)


def _exp_sweep_translation(c):
    f = _symbol(
        c, lambda g: make_bump_derivative(0, 3, 3, g) + 1j * make_bump_derivative(0.5, 2.5, 1, g)
    )
    return _defect_outcome(sweep_translation(f, (2.0, 0.5), c.mass, c.lambdas))


def _exp_sweep_massive_defect(c):
    h = _symbol(c, lambda g: make_bump(0, 3, 1, g) + 1j * make_bump(0.3, 2, 1, g))
    return _defect_outcome(sweep_massive_defect(h, 2.0, c.mass, c.lambdas))


def _exp_npoint_limit(c):
    g = c.grid
    f1 = make_bump_derivative(0, 2.5, 1.0, g) + 1j * make_bump(0.2, 2.5, 0.5, g)
    f2 = make_bump_derivative(0.4, 2.0, -0.8, g) + 1j * make_bump(-0.1, 2.8, 0.3, g)
    ops = [
        SmearedOperator.tensor_trapezoid(_gauss_weight, (-1, 1), (-1, 1), f, 1.0, c.mass, c.nodes)
        for f in (f1, f2)
    ]
    limit = smeared_npoint([replace(o, scale=0.0) for o in ops])
    r = sweep_npoint(ops, c.lambdas)
    last = complex(r.values[-1])
    rel = abs(last - limit) / abs(limit)
    summary = {"limit_re": limit.real, "limit_im": limit.imag, "relative_gap": rel}
    return Outcome(("lambda", "value_re", "value_im", "bound"), _sweep_rows(r), summary, rel < 0.05)


def _exp_ir_slope(c):
    g = c.grid
    if c.ir_symbol == "null":
        h = make_bump_derivative(0, 2, 1, g) + 1j * make_bump(0, 2, 1, g)
    else:
        h = make_bump(0, 2, 1, g) + 1j * make_bump(0.5, 1.5, 1, g)
    masses = np.geomspace(1e-1, 1e-6, 6)
    r = ir_divergence_slope(h, masses)
    fit = r.fit
    if c.ir_symbol == "null":
        ok = abs(fit["slope"]) < 1e-3 * fit["scale"]
    else:
        ok = fit["r2"] > 0.99 and abs(fit["slope"] / fit["expected_slope"] - 1) < 0.15
    rows = [(m, v) for m, v in zip(r.lambdas, r.values)]
    return Outcome(("mass", "norm_sq"), rows, dict(fit), bool(ok))


def _exp_bessel(c):
    x = np.geomspace(1e-3, 50.0, 64)
    k0, k1 = bessel_k(0, x), bessel_k(1, x)
    mono = bool(np.all(np.diff(k0) < 0) and np.all(np.diff(k1) < 0))
    small = abs(1e-6 * bessel_k(1, 1e-6) - 1.0)
    summary = {"monotone": mono, "small_argument_defect": small}
    rows = list(zip(x, k0, k1))
    return Outcome(("x", "K0", "K1"), rows, summary, mono and small < 1e-5)


def _exp_kernel_crosscheck(c):
    g = c.grid
    rng = np.random.Generator(np.random.Philox(c.seed))
    fs = [random_null_function(rng, c.interval, g) for _ in range(c.samples)]
    gs = [random_null_function(rng, c.interval, g) for _ in range(c.samples)]
    rows, worst = [], 0.0
    for sign in ("-", "+"):
        mom = np.diag(form_q_matrix(sign, fs, gs, c.mass))
        for i, (f, h) in enumerate(zip(fs, gs)):
            pos = form_q(sign, f, h, c.mass, "position")
            rel = abs(pos - mom[i]) / max(1.0, abs(mom[i]))
            worst = max(worst, rel)
            rows.append((i, "minus" if sign == "-" else "plus", mom[i], pos, rel))
    summary = {"max_relative_difference": worst}
    return Outcome(("pair", "sign", "momentum", "position", "rel_diff"), rows, summary, worst < 1e-4)


def _exp_trace_diagnostics(c):
    d = fourier_trace_diagnostic(c.sign, c.mass, K=c.K)
    s = d.summary()
    s["c0_error"] = abs(d.c0 - d.c0_quadrature)
    ok = s["increment"] < 0.05 and s["c0_error"] < 1e-8
    if d.sign == "-":
        s["exponent_in_window"] = 1.8 <= d.exponent <= 2.2
        ok = ok and s["exponent_in_window"]
    return Outcome(("k", "re", "im"), d.to_rows(), s, bool(ok))


def _exp_galerkin(c):
    gm = build_galerkin(c.interval, c.mass, c.basis_size)
    d = operator_diagnostics(gm)
    s = d.summary()
    s["condition"] = gm.condition
    s["gram_identity_error"] = float(np.abs(gm.gram_m - np.eye(gm.gram_m.shape[0])).max())
    ok = s["form_residual"] < 1e-5 and s["gram_identity_error"] < 1e-8
    rows = [(i, e, t) for i, (e, t) in enumerate(zip(d.eigenvalues, d.partial_trace_norms))]
    return Outcome(("index", "eigenvalue", "partial_trace_norm"), rows, s, bool(ok))


def _exp_norm_equivalence(c):
    a = norm_equivalence(c.interval, c.mass, c.samples, c.seed, c.grid)
    b = norm_equivalence(c.interval, c.mass, 2 * c.samples, c.seed, c.grid)
    s = a.summary()
    s["max_ratio_plus_doubled"] = float(b.ratio_plus.max())
    s["max_ratio_minus_doubled"] = float(b.ratio_minus.max())
    stable = all(
        abs(s[f"max_ratio_{k}_doubled"] / s[f"max_ratio_{k}"] - 1) <= 0.1 for k in ("plus", "minus")
    )
    s["stable_under_doubling"] = stable
    ok = a.one_sided_ok and a.omega_bound_ok and stable
    rows = [(i, p, q) for i, (p, q) in enumerate(zip(a.ratio_plus, a.ratio_minus))]
    return Outcome(("sample", "ratio_plus", "ratio_minus"), rows, s, bool(ok))


RUNNERS = {
    "sweep-notiso": _exp_sweep_notiso,
    "sweep-translation": _exp_sweep_translation,
    "sweep-massive-defect": _exp_sweep_massive_defect,
    "npoint-limit": _exp_npoint_limit,
    "ir-slope": _exp_ir_slope,
    "bessel": _exp_bessel,
    "kernel-crosscheck": _exp_kernel_crosscheck,
    "trace-diagnostics": _exp_trace_diagnostics,
    "galerkin": _exp_galerkin,
    "norm-equivalence": _exp_norm_equivalence,
}


# -- output -----------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def render_csv(outcome):
    buf = io.StringIO()
    buf.write(",".join(outcome.columns) + "\n")
    for row in outcome.rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def _dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def config_hash(c):
    return hashlib.sha256(json.dumps(c.canonical(), sort_keys=True).encode()).hexdigest()


def run(c):
    """Run one experiment and write its artifacts.

    Returns
    -------
    int
        Exit status.
    """
    try:
        outcome = RUNNERS[c.experiment](c)
    except NumericalGuardError as exc:
        print(f"guard tripped: {exc.guard}: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except SupportError as exc:
        print(f"guard tripped: support: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ZeroModeError as exc:
        print(f"guard tripped: zero-mode: {exc}", file=sys.stderr)
        return EXIT_GUARD
    out = Path(c.output)
    if c.format == "csv":
        name, body = f"{c.experiment}.csv", render_csv(outcome)
    else:
        name = f"{c.experiment}.json"
        body = _dumps({"columns": list(outcome.columns), "rows": [list(r) for r in outcome.rows]})
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "experiment": c.experiment,
        "version": __version__,
        "config": c.canonical(),
        "config_hash": config_hash(c),
        "artifact": name,
        "summary": outcome.summary,
        "pass": outcome.passed,
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(body)
        (out / "manifest.json").write_text(_dumps(manifest))
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{c.experiment}: {'pass' if outcome.passed else 'fail'} -> {out / name}")
    return EXIT_OK


def _parser():
    p = argparse.ArgumentParser(prog="weylscale", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("experiment", choices=EXPERIMENTS)
    r.add_argument("--config", help="flat key = value file")
    for name in ExperimentConfig.__dataclass_fields__:
        if name == "experiment":
            continue
        flag = "--K" if name == "K" else "--" + _FIELDS[name]
        r.add_argument(flag, dest=name, default=None)
    v = sub.add_parser("validate", help="check a configuration file")
    v.add_argument("config")
    return p


def _read(path):
    try:
        return Path(path).read_text(), None
    except OSError as exc:
        return None, f"cannot read config: {exc}"


def main(argv=None):
    args = _parser().parse_args(argv)
    text, err = _read(args.config) if args.config else ("", None)
    if err:
        print(err, file=sys.stderr)
        return EXIT_CONFIG
    overrides = {}
    if args.command == "run":
        overrides = {
            k: v for k, v in vars(args).items() if k in _FIELDS and v is not None and k != "experiment"
        }
        overrides["experiment"] = args.experiment
    res = validate_config(text, overrides)
    if isinstance(res, list):
        for e in res:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"valid: {res.experiment}")
        return EXIT_OK
    return run(res)


if __name__ == "__main__":
    sys.exit(main())
