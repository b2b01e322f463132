"""Command-line front end: ``drrbdo solve | sweep | verify | oracle``.

Exit codes: 0 success, 2 invalid input, 3 solver non-convergence,
4 Monte Carlo failure probability above the certified bound, 5 oracle failure.
"""
import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigurationError, InfeasibleBudgetError, MechanismError, SolverError, StructuralError
from .robust import (
    ReliabilitySpec,
    load_uncertainty,
    sequential_sdp,
    solve_nominal,
    uncertainty_from_dict,
)
from .robust.uncertainty import NORMS
from .truss import bundled_path, load_model
from .verify import McConfig, double_loop, variance_identity_battery, variance_duality_oracle

log = logging.getLogger("drrbdo")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3
EXIT_VERIFY = 4
EXIT_ORACLE = 5

INVALID_INPUT = (
    jsonschema.ValidationError,
    json.JSONDecodeError,
    FileNotFoundError,
    StructuralError,
    ConfigurationError,
    MechanismError,
    ValueError,
)


class UsageError(Exception):
    pass


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temp file in the same directory and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(doc):
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _schema(name):
    return json.loads(resources.files("drrbdo.schemas").joinpath(name).read_text())


def write_report(path, doc, schema):
    jsonschema.validate(doc, _schema(schema))
    atomic_write(path, _json_text(doc))


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _float_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("grid is empty")
    return vals


def _resolve(path):
    p = Path(path)
    if p.exists():
        return p.resolve()
    b = bundled_path(str(path))
    if b.exists():
        return b
    raise FileNotFoundError(f"no such file or bundled problem: {path}")


# ---------------------------------------------------------------- problem setup

def _uncertainty(args, path=None, doc=None):
    """Uncertainty file (or stored dict) with command-line overrides applied."""
    if doc is not None:
        unc, spec = uncertainty_from_dict(doc)
    elif path is not None:
        unc, spec = load_uncertainty(_resolve(path))
    else:
        return None, None
    changes = {k: getattr(args, k) for k in ("alpha", "beta", "norm") if getattr(args, k, None) is not None}
    if changes:
        unc = unc.with_(**changes)
    eps = spec.epsilon if getattr(args, "eps", None) is None else args.eps
    family = spec.family if getattr(args, "family", None) is None else args.family
    return unc, ReliabilitySpec(eps, family)


def _unc_doc(unc, spec):
    if unc is None:
        return None
    doc = unc.to_dict()
    doc.update(epsilon=spec.epsilon, family=spec.family)
    return doc


def _design_row(model, design):
    return [*(design.areas * model.area_unit).tolist(), design.volume, design.compliance / model.compliance_unit]


def _design_header(model):
    return [f"x{j + 1}" for j in range(model.n_members)] + ["obj_val", "pi"]


def _solve(model, unc, spec, mode):
    nominal = solve_nominal(model)
    if mode == "nominal":
        return nominal, nominal, None, "optimal", 0, []
    result = sequential_sdp(model, unc, spec)
    return result.design, nominal, result.certificate, result.status, result.iterations, result.log


def _mode(args, unc):
    mode = args.mode or ("robust" if unc is not None else "nominal")
    if mode == "robust":
        if unc is None:
            raise UsageError("robust mode needs --unc")
    return mode


# ---------------------------------------------------------------- subcommands

def run_solve(args):
    model_path = _resolve(args.model)
    model = load_model(model_path)
    unc, spec = _uncertainty(args, args.unc)
    mode = _mode(args, unc)
    if mode == "robust":
        spec.check_robust()
    design, nominal, cert, status, iterations, history = _solve(model, unc, spec, mode)
    report = {
        "mode": mode,
        "model": str(model_path),
        "uncertainty": _unc_doc(unc, spec),
        "status": status,
        "iterations": iterations,
        "volume_ratio": design.volume / nominal.volume,
        "design": design.report(model),
        "nominal": nominal.report(model),
        "certificate": None if cert is None else {"z": cert.z, "W": cert.W.tolist(), "breakdown": cert.breakdown},
        "log": history,
    }
    out = Path(args.out)
    write_report(out / "solution.json", report, "solution.schema.json")
    atomic_write(out / "solution.csv", _csv_text(_design_header(model), [_design_row(model, design)]))
    print(f"{mode}: volume {design.volume:.6e} mm^3 (ratio {report['volume_ratio']:.5f}), "
          f"compliance {design.compliance / model.compliance_unit:.3f}, status {status}")
    return EXIT_NOT_CONVERGED if status == "not-converged" else EXIT_OK


SWEEP_HEADER = ["param_name", "param_value", "volume", "status"]


def _read_sweep(path):
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != SWEEP_HEADER:
        raise ConfigurationError(f"{path} exists but is not a sweep file")
    return rows[1:]


def _check_sorted(name, grid):
    inc = all(a < b for a, b in zip(grid, grid[1:]))
    dec = all(a > b for a, b in zip(grid, grid[1:]))
    if not (inc or dec):
        raise ConfigurationError(f"--grid-{name} must be strictly monotone, got {grid}")


def _sweep_points(args, unc, spec):
    beta_ratio = unc.beta / unc.alpha if unc.alpha > 0 else 0.05
    points = []
    for eps in args.grid_eps or []:
        points.append(("eps", eps, unc, ReliabilitySpec(eps, spec.family)))
    for alpha in args.grid_alpha or []:
        points.append(("alpha", alpha, unc.with_(alpha=alpha, beta=beta_ratio * alpha), spec))
    return points


def run_sweep(args):
    if not args.grid_eps and not args.grid_alpha:
        raise UsageError("sweep needs --grid-eps and/or --grid-alpha")
    if args.unc is None:
        raise UsageError("sweep needs --unc")
    for name in ("eps", "alpha"):
        grid = getattr(args, f"grid_{name}")
        if grid:
            _check_sorted(name, grid)
    model = load_model(_resolve(args.model))
    unc, spec = _uncertainty(args, args.unc)
    out = Path(args.out)
    path = out / "sweep.csv"
    rows = _read_sweep(path)
    done = {(r[0], float(r[1])) for r in rows}
    for name, value, u, s in _sweep_points(args, unc, spec):
        if (name, value) in done:
            continue
        try:
            s.check_robust()
            res = sequential_sdp(model, u, s)
            volume, status = res.design.volume, res.status
        except (SolverError, InfeasibleBudgetError, ConfigurationError, ValueError) as exc:
            volume, status = math.nan, f"error: {type(exc).__name__}"
        rows.append([name, repr(float(value)), repr(float(volume)), status])
        atomic_write(path, _csv_text(SWEEP_HEADER, rows))
        print(f"{name}={value:g}: volume {volume:.6e} ({status})")
    if args.svg:
        atomic_write(out / "sweep.svg", sweep_svg(rows))
    failed = [r for r in rows if r[3] != "converged"]
    return EXIT_NOT_CONVERGED if failed else EXIT_OK


def run_verify(args):
    out = Path(args.out)
    with open(out / "solution.json") as fh:
        report = json.load(fh)
    jsonschema.validate(report, _schema("solution.schema.json"))
    model = load_model(report["model"])
    if args.unc is not None:
        unc, spec = _uncertainty(args, args.unc)
    elif report.get("uncertainty") is not None:
        unc, spec = _uncertainty(args, doc=report["uncertainty"])
    else:
        raise UsageError("nominal solution without stored uncertainty: pass --unc")
    x = np.asarray(report["design"]["areas"], dtype=float)
    cfg = McConfig(outer=args.outer, inner=args.inner, seed=args.seed, exact=args.exact, workers=args.workers)
    res = double_loop(model, x, unc, spec, cfg)
    summary = res.summary()
    summary.update(seed=args.seed, exact=bool(args.exact))
    atomic_write(out / "verify.csv", _csv_text(res.header(), res.rows()))
    write_report(out / "verify.json", summary, "verify.schema.json")
    print(f"max failure probability {res.max:.6f} (mean {res.mean:.6f}); bound {spec.epsilon + res.slack():.6f}")
    return EXIT_OK if res.certified() else EXIT_VERIFY


def oracle_battery(seed, count=200, samples=100_000, unc=None):
    """Both duality checks on seeded random instances; returns the report dict."""
    rng = np.random.default_rng(seed)
    v = variance_identity_battery(count, rng)
    if unc is None:
        unc, _ = load_uncertainty(bundled_path("two_bar_unc"))
    n = unc.n
    cases = []

    def record(label, lam, u, exact=None, gap_limit=0.02):
        chk = variance_duality_oracle(lam, u, samples, rng)
        ok = chk.sandwich_ok and chk.gap <= gap_limit
        entry = {"case": label, "norm": u.norm, "beta": u.beta, "sampled_max": chk.sampled_max,
                 "dual_min": chk.dual_min, "gap": chk.gap, "sandwich": bool(chk.sandwich_ok)}
        if exact is not None:
            entry["expected"] = exact
            ok = ok and abs(chk.dual_min - exact) <= 1e-8 * max(1.0, abs(exact))
        entry["passed"] = bool(ok)
        cases.append(entry)

    for norm in NORMS:
        u = unc.with_(norm=norm)
        for i in range(5):
            L = rng.standard_normal((n, n))
            record(f"random-{i}", 0.5 * (L + L.T), u)
        L = rng.standard_normal((n, n))
        lam = L @ L.T
        record("beta-zero", lam, u.with_(beta=0.0), exact=float(np.sum(u.sigma_tilde * lam)))
    u = unc.with_(norm="linf", B=np.eye(n))
    record("diagonal", np.eye(n), u, exact=float(np.trace(u.sigma_tilde) + u.beta * n))

    L = rng.standard_normal((n, n))
    lam = 0.5 * (L + L.T)
    trend = []
    for s in (1_000, 10_000, 100_000):
        chk = variance_duality_oracle(lam, unc, s, rng, extremes=False)
        trend.append({"samples": s, "gap": chk.gap})

    v_fail = sum(not r["passed"] for r in v)
    c_fail = sum(not c["passed"] for c in cases)
    return {
        "seed": seed,
        "passed": v_fail == 0 and c_fail == 0,
        "variance_identity": {"instances": v, "max_gap": max(r["gap"] for r in v), "failures": v_fail},
        "covariance_duality": {"instances": cases, "max_gap": max(c["gap"] for c in cases), "failures": c_fail},
        "gap_vs_samples": trend,
    }


def run_oracle(args):
    unc = None
    if args.unc is not None:
        unc, _ = _uncertainty(args, args.unc)
    report = oracle_battery(args.seed, args.count, args.samples, unc)
    write_report(Path(args.out) / "oracle.json", report, "oracle.schema.json")
    vi, cd = report["variance_identity"], report["covariance_duality"]
    print(f"variance identity: {len(vi['instances'])} instances, max gap {vi['max_gap']:.2e}, {vi['failures']} failures")
    print(f"covariance duality: {len(cd['instances'])} cases, max gap {cd['max_gap']:.2e}, {cd['failures']} failures")
    for row in report["gap_vs_samples"]:
        print(f"  samples {row['samples']:>7d}: sampling gap {row['gap']:.3e}")
    return EXIT_OK if report["passed"] else EXIT_ORACLE


# ---------------------------------------------------------------- plotting

def sweep_svg(rows, width=480, height=320, pad=48):
    """Static line chart(s) of volume against the swept parameter."""
    series = {}
    for name, value, volume, status in rows:
        v = float(volume)
        if math.isfinite(v):
            series.setdefault(name, []).append((float(value), v))
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height * max(1, len(series))}">']
    for k, (name, pts) in enumerate(sorted(series.items())):
        pts.sort()
        xs, ys = zip(*pts)
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        sx = (width - 2 * pad) / ((x1 - x0) or 1.0)
        sy = (height - 2 * pad) / ((y1 - y0) or 1.0)
        top = k * height
        coords = " ".join(f"{pad + (x - x0) * sx:.2f},{top + height - pad - (y - y0) * sy:.2f}" for x, y in pts)
        parts += [
            f'<rect x="{pad}" y="{top + pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" fill="none" stroke="#999"/>',
            f'<polyline points="{coords}" fill="none" stroke="#1f77b4" stroke-width="2"/>',
            f'<text x="{width / 2}" y="{top + height - 12}" text-anchor="middle" font-size="12">{name}</text>',
            f'<text x="{pad}" y="{top + pad - 8}" font-size="11">volume {y0:.4g} .. {y1:.4g} mm^3</text>',
        ]
    parts.append("</svg>\n")
    return "\n".join(parts)


# ---------------------------------------------------------------- entry point

def build_parser():
    ap = argparse.ArgumentParser(prog="drrbdo", description="Distributionally-robust reliability-based truss design.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        if model:
            p.add_argument("--model", required=True, help="truss JSON file or bundled name (two_bar, grid_29)")
        p.add_argument("--unc", help="uncertainty JSON file or bundled name")
        p.add_argument("--eps", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--norm", choices=NORMS)
        p.add_argument("--family", choices=("gaussian", "all"))
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("solve", help="nominal or robust optimum")
    common(p)
    p.add_argument("--mode", choices=("nominal", "robust"), help="default: robust when --unc is given")
    p.set_defaults(func=run_solve)

    p = sub.add_parser("sweep", help="optimal volume over an eps or alpha grid")
    common(p)
    p.add_argument("--grid-eps", type=_float_list)
    p.add_argument("--grid-alpha", type=_float_list)
    p.add_argument("--svg", action="store_true", help="also write sweep.svg")
    p.set_defaults(func=run_sweep)

    p = sub.add_parser("verify", help="double-loop Monte Carlo on a stored solution")
    common(p, model=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outer", type=int, default=200)
    p.add_argument("--inner", type=int, default=20_000)
    p.add_argument("--exact", action="store_true", help="re-solve the FEM model per sample")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=run_verify)

    p = sub.add_parser("oracle", help="duality oracle batteries")
    common(p, model=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--samples", type=int, default=100_000)
    p.set_defaults(func=run_oracle)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SolverError, InfeasibleBudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except INVALID_INPUT as exc:
        msg = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
