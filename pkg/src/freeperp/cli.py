"""Command-line interface: ``freeperp <command> [options]``.

Measures are given as JSON files or as ``builtin:name(args)``; joint laws of
``(A, B)`` as JSON files or ``graph:<measure>[;power=2][;beta=b][;symmetric]``.
Results go to files (JSON or CSV), a short summary to standard output.
Exit status: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import ast
import csv
import json
import math
import os
import re
import sys
import time

import numpy as np

from . import __version__
from .measure import Measure, MeasureError, builtin_law, levy_distance, stable_tail_law, symmetrize
from .subordination import JointLaw

__all__ = ["UsageError", "parse_measure", "parse_joint", "build_parser", "dispatch", "main"]


class UsageError(Exception):
    pass


_EXTRA = {
    "stable_tail": lambda *a, **k: stable_tail_law(*a, **k),
}
_BUILTIN_RE = re.compile(r"^builtin:([a-z_]+)(?:\((.*)\))?$")


def _call_args(text: str):
    if not text or not text.strip():
        return [], {}
    try:
        node = ast.parse(f"f({text})", mode="eval").body
        args = [ast.literal_eval(a) for a in node.args]
        kw = {k.arg: ast.literal_eval(k.value) for k in node.keywords}
    except (SyntaxError, ValueError) as exc:
        raise UsageError(f"cannot parse arguments {text!r}") from exc
    return args, kw


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def parse_measure(spec: str) -> Measure:
    """``builtin:name(args)``, ``symmetrized:<spec>`` or a JSON file."""
    if spec.startswith("symmetrized:"):
        return symmetrize(parse_measure(spec[len("symmetrized:"):]))
    m = _BUILTIN_RE.match(spec.strip())
    if m:
        name, raw = m.groups()
        args, kw = _call_args(raw or "")
        if name in _EXTRA:
            return _EXTRA[name](*args, **kw)
        return builtin_law(name, *args, **kw)
    if spec.startswith("builtin:"):
        raise UsageError(f"malformed builtin spec {spec!r}")
    d = _load_json(spec)
    return Measure.from_dict(d.get("measure", d))


def parse_joint(spec: str) -> JointLaw:
    """``graph:<measure>[;power=2][;beta=b][;symmetric]`` or a JSON file."""
    if not spec.startswith("graph:"):
        d = _load_json(spec)
        return JointLaw.from_dict(d.get("joint", d))
    parts = spec[len("graph:"):].split(";")
    base = parse_measure(parts[0])
    opts, symmetric = {}, False
    for p in parts[1:]:
        if p == "symmetric":
            symmetric = True
            continue
        key, _, val = p.partition("=")
        if key not in ("power", "beta") or not val:
            raise UsageError(f"unknown graph option {p!r}")
        opts[key] = float(val)
    power = int(opts.get("power", 1))
    beta = opts.get("beta", 1.0)
    if symmetric:
        return JointLaw.symmetric_graph(base, power=power, beta=beta, label=spec)
    return JointLaw.graph(base, power=power, beta=beta, label=spec)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _complexes(text: str) -> np.ndarray:
    try:
        return np.array([complex(v.replace(" ", "")) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise UsageError(f"expected comma-separated complex numbers, got {text!r}") from exc


def _points_csv(path: str) -> np.ndarray:
    """First column of a CSV file (header optional) as complex points."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and r[0].strip()]
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    vals = []
    for i, r in enumerate(rows):
        try:
            vals.append(complex(r[0].replace(" ", "")))
        except ValueError:
            if i == 0:
                continue
            raise UsageError(f"{path}: bad point {r[0]!r}") from None
    return np.array(vals)


def _grid(text: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError as exc:
        raise UsageError(f"grid must be lo:hi:n, got {text!r}") from exc


def _num(x):
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    return _num(obj)


def _write_json(path: str | None, payload: dict):
    if not path:
        return
    with open(path, "w") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str | None, header, rows):
    if not path:
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _config(args, echo: bool = False) -> dict:
    """Flags of the run; result files leave out settings that cannot change them."""
    skip = ("func",) if echo else ("func", "threads", "quiet")
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ---------------------------------------------------------------------------
# commands


def cmd_transform(args, out):
    from .transforms import cauchy, chi, psi, s_transform

    mu = parse_measure(args.measure)
    if args.at:
        pts = _complexes(args.at)
    elif args.grid:
        pts = _grid(args.grid).astype(complex)
    elif args.points_file:
        pts = _points_csv(args.points_file)
    else:
        raise UsageError("give --at, --grid or --points")
    fn = {"cauchy": cauchy, "psi": psi, "chi": chi, "s": s_transform}[args.kind]
    if args.kind in ("chi", "s"):
        if np.any(pts.imag != 0):
            raise UsageError(f"{args.kind} is evaluated on real points only")
        vals = np.asarray(fn(mu, pts.real), dtype=complex)
    else:
        vals = np.asarray(fn(mu, pts), dtype=complex)
    rows = [(z.real, z.imag, v.real, v.imag) for z, v in zip(pts, np.atleast_1d(vals))]
    _write_csv(args.out, ("z_re", "z_im", "value_re", "value_im"), rows)
    for r in rows[:10]:
        print(f"{args.kind}({complex(r[0], r[1]):.6g}) = {complex(r[2], r[3]):.12g}", file=out)
    if len(rows) > 10:
        print(f"... {len(rows)} points", file=out)
    return 0


def cmd_mult_power(args, out):
    from . import mult_power as mp

    mu = parse_measure(args.measure)
    result = {"n": args.n, "eta": mp.eta(mu), "integer_moments": {}, "fractional_moments": {}}
    for p in (int(v) for v in _floats(args.moments)) if args.moments else ():
        result["integer_moments"][str(p)] = mp.integer_moment_power(mu, args.n, p)
    for g in _floats(args.gamma) if args.gamma else ():
        result["fractional_moments"][repr(g)] = mp.fractional_moment_power(mu, args.n, g)
    if args.report:
        ns = list(range(10, args.n + 1, 10)) or [args.n]
        rows = []
        for n in ns:
            row = [n]
            row += [n ** (1 - p) * mp.integer_moment_power(mu, n, p) / mu.moment(1) ** (n * p)
                    for p in (int(v) for v in _floats(args.moments or ""))]
            row += [n ** (1 - g) * mp.fractional_moment_power(mu, n, g) for g in _floats(args.gamma or "")]
            rows.append(row)
        header = ["n"] + [f"scaled_m{int(p)}" for p in _floats(args.moments or "")]
        header += [f"scaled_m{g!r}" for g in _floats(args.gamma or "")]
        _write_csv(args.report, header, rows)
    if args.lln_out:
        t = np.linspace(0.0, 1.0, 201)[1:-1]
        q = mp.lln_quantile(mu, t)
        _write_csv(args.lln_out, ("level", "quantile"), zip(t, q))
    result["config"] = _config(args)
    _write_json(args.out, result)
    print(f"eta = Var/m1^2 = {result['eta']:.10g}", file=out)
    for k, v in result["integer_moments"].items():
        print(f"m_{k}(mu^[x]{args.n}) = {v:.12g}", file=out)
    for k, v in result["fractional_moments"].items():
        print(f"m_{k}(mu^[x]{args.n}) = {v:.12g}", file=out)
    return 0


def cmd_subordinate(args, out):
    from .subordination import solve_subordination

    mu = parse_measure(args.measure)
    rho = parse_joint(args.joint)
    if (args.z is None) == (args.z_grid is None):
        raise UsageError("give exactly one of --z or --z-grid")
    zs = _complexes(args.z) if args.z else _points_csv(args.z_grid)
    rows = []
    for z in zs:
        p = solve_subordination(mu, rho, z, tol=args.tol)
        rows.append((z.real, z.imag, p.f.real, p.f.imag, p.sf.real, p.sf.imag, p.residual, p.iterations,
                     p.consistency))
        print(f"z = {z:.6g}: delta = {p.delta:.12g}  residual {p.residual:.2e}  "
              f"consistency {p.consistency:.2e}", file=out)
    _write_csv(args.out, ("z_re", "z_im", "f_re", "f_im", "sf_re", "sf_im", "residual", "iters", "consistency"),
               rows)
    return 0


def cmd_perpetuity(args, out):
    from .perpetuity import PerpetuityProblem, solve_perpetuity

    rho = parse_joint(args.joint)
    prob = PerpetuityProblem(rho, regime=args.regime)
    init = parse_measure(args.init) if args.init else None
    res = solve_perpetuity(prob, init=init, levy_tol=args.levy_tol, max_outer=args.max_outer,
                           points=args.points)
    summary = {"criticality": prob.criticality, "tau_A": prob.tau_A, "iterations": res.iterations,
               "levy_steps": res.levy_steps, "config": _config(args)}
    if res.tail is not None:
        summary["tail"] = {"alpha": res.tail.alpha, "c": res.tail.c}
    if args.compare:
        summary["levy_to_compare"] = levy_distance(res.law, parse_measure(args.compare))
    payload = {"measure": res.law.to_dict(), "summary": summary}
    _write_json(args.out, payload)
    _write_csv(args.trace, ("step", "levy_step", "tail_alpha", "tail_c"), res.trace)
    print(f"{prob.criticality} problem, tau(A) = {prob.tau_A:.10g}", file=out)
    print(f"converged after {res.iterations} steps (last Levy step {res.levy_steps[-1]:.3g})", file=out)
    if "levy_to_compare" in summary:
        print(f"Levy distance to {args.compare}: {summary['levy_to_compare']:.3g}", file=out)
    return 0


def cmd_tails(args, out):
    from .tails import predict_tail, tauberian_estimate

    mu = parse_measure(args.measure)
    lo, hi = _floats(args.window)
    hint, pred = args.alpha_hint, None
    regime = args.regime
    if args.predict_from:
        reg, e, pred = predict_tail(parse_joint(args.predict_from), args.regime)
        hint = e if hint is None else hint
        regime = reg
    rep = tauberian_estimate(mu, hint, regime, (lo, hi), args.points, predicted=pred)
    payload = rep.to_dict()
    payload["config"] = _config(args)
    _write_json(args.out, payload)
    print(f"exponent {rep.exponent:.6g}, constant {rep.constant:.8g} (R^2 {rep.r_squared:.6f})", file=out)
    if math.isfinite(rep.predicted_constant):
        print(f"predicted {rep.predicted_constant:.8g}, relative error {rep.relative_error:.3g}", file=out)
    return 0


def cmd_oracle(args, out):
    from .rm_oracle import MatrixEnsembleConfig, empirical_mult_power, empirical_perpetuity

    if (args.joint is None) == (args.measure is None):
        raise UsageError("give exactly one of --joint or --measure")
    cfg = MatrixEnsembleConfig(N=args.N, trials=args.trials, seed=args.seed, n_terms=args.n_terms)
    if args.joint:
        emp = empirical_perpetuity(parse_joint(args.joint), cfg, args.method, args.threads)
    else:
        if args.n is None:
            raise UsageError("--measure needs --n")
        emp = empirical_mult_power(parse_measure(args.measure), args.n, cfg, args.method, args.threads)
    x = emp.atom_x
    summary = {"size": int(x.size), "mean": float(np.mean(x)), "second_moment": float(np.mean(x**2)),
               "min": float(x.min()), "max": float(x.max()), "config": _config(args)}
    if args.compare:
        summary["levy_to_compare"] = levy_distance(emp, parse_measure(args.compare))
    _write_json(args.out, summary)
    _write_csv(args.spectra, ("eigenvalue",), ((v,) for v in x))
    print(f"{x.size} eigenvalues, mean {summary['mean']:.6g}, range [{summary['min']:.4g}, {summary['max']:.4g}]",
          file=out)
    if "levy_to_compare" in summary:
        print(f"Levy distance to {args.compare}: {summary['levy_to_compare']:.4g}", file=out)
    return 0


def cmd_validate(args, out):
    from .validation import run_checks

    rows = run_checks(args.group)
    width = max(len(r[0]) for r in rows)
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}", file=out)
    failed = sum(not ok for _, ok, _ in rows)
    print(f"{len(rows) - failed}/{len(rows)} checks passed", file=out)
    return 0 if failed == 0 else 1


# ---------------------------------------------------------------------------
# parser


def _default_threads() -> int:
    env = os.environ.get("FREEPERP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="freeperp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"freeperp {__version__}")
    ap.add_argument("--threads", type=int, default=_default_threads(),
                    help="worker threads for Monte Carlo trials (env FREEPERP_THREADS)")
    ap.add_argument("-q", "--quiet", action="store_true", help="suppress the config echo")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="Cauchy, psi, chi or S transform on points")
    p.add_argument("--measure", required=True)
    p.add_argument("--kind", "--what", dest="kind", choices=("cauchy", "psi", "chi", "s"), default="psi")
    p.add_argument("--at", help="comma-separated (complex) points")
    p.add_argument("--grid", help="lo:hi:n real grid")
    p.add_argument("--points", dest="points_file", help="CSV file whose first column holds the points")
    p.add_argument("--out")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("mult-power", help="moments of free multiplicative powers")
    p.add_argument("--measure", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--moments", help="integer orders, e.g. 1,2,3")
    p.add_argument("--gamma", help="fractional orders in (0, 1)")
    p.add_argument("--lln-out", help="CSV of the limiting quantile function")
    p.add_argument("--report", help="CSV trend of the scaled moments over n = 10, 20, ..., --n")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mult_power)

    p = sub.add_parser("subordinate", help="subordination functions at points")
    p.add_argument("--measure", "--x", dest="measure", required=True, help="law of X")
    p.add_argument("--joint", required=True, help="law of (A, B)")
    p.add_argument("--z", help="comma-separated points")
    p.add_argument("--z-grid", help="CSV file whose first column holds the points")
    p.add_argument("--tol", type=float, default=1e-11)
    p.add_argument("--out")
    p.set_defaults(func=cmd_subordinate)

    p = sub.add_parser("perpetuity", help="solve X = A^1/2 X A^1/2 + B")
    p.add_argument("--joint", required=True)
    p.add_argument("--regime", choices=("positive", "symmetric"), default="positive")
    p.add_argument("--init")
    p.add_argument("--levy-tol", type=float, default=1e-4)
    p.add_argument("--max-outer", type=int, default=200)
    p.add_argument("--points", type=int, default=401)
    p.add_argument("--compare", help="reference measure for a Levy distance")
    p.add_argument("--out", default="x.json")
    p.add_argument("--trace", help="CSV of the iteration trace")
    p.set_defaults(func=cmd_perpetuity)

    p = sub.add_parser("tails", help="Tauberian tail estimate")
    p.add_argument("--measure", required=True)
    p.add_argument("--regime", choices=("positive", "symmetric"), default="positive")
    p.add_argument("--alpha-hint", type=float)
    p.add_argument("--predict-from", help="joint law giving the predicted constant")
    p.add_argument("--window", default="1e3,1e7")
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tails)

    p = sub.add_parser("oracle", help="random-matrix Monte Carlo")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--joint")
    p.add_argument("--measure")
    p.add_argument("--n", type=int)
    p.add_argument("--N", type=int, default=500)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--n-terms", "--terms", dest="n_terms", type=int, default=60)
    p.add_argument("--method", choices=("lapack", "jacobi"), default="lapack")
    p.add_argument("--compare")
    p.add_argument("--out")
    p.add_argument("--spectra", help="CSV of pooled eigenvalues")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("validate", help="run the invariant suite")
    p.add_argument("group", nargs="?", default="all")
    p.set_defaults(func=cmd_validate)
    return ap


_LIST_FLAGS = ("--at", "--z", "--grid", "--window", "--gamma", "--moments")


def _glue_lists(argv):
    """Attach values like ``-1,-10`` to their flag so they are not read as options."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in _LIST_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def dispatch(argv=None, out=None) -> int:
    out = out or sys.stdout
    ap = build_parser()
    argv = _glue_lists(sys.argv[1:] if argv is None else list(argv))
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not args.quiet:
        print("# config " + json.dumps(_clean(_config(args, echo=True)), sort_keys=True), file=out)
    t0 = time.perf_counter()
    try:
        code = args.func(args, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (MeasureError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if not args.quiet:
        print(f"# done in {time.perf_counter() - t0:.2f} s", file=out)
    return code


def main(argv=None):
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
