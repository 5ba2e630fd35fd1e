"""Command-line front end.

Problem files are line-oriented `key = value` text under [section]
headers; sections domain, g, f and params are mandatory, solver is
optional.  Exit codes: 0 success, 1 when the requested computation ran but
reached a nonexistence/divergence verdict (so scripts can branch on it),
2 on usage or parse errors.  Every run writes its numeric payload to the
--out file (CSV or JSON by extension); reruns with identical inputs are
byte-identical.
"""

from __future__ import annotations

import argparse
import json
import re
import sys

import numpy as np

from .bifurcate import (
    EXISTS,
    BracketError,
    bisect_threshold,
    closed_form_threshold,
    existence_predicate,
    supersolution_search,
    sweep,
)
from .grid import DomainSpec, ScalarField, read_field_csv, write_field_csv
from .nonlin import FSpec, GSpec, check_ko
from .odeprofile import solve_h, verify_supersolution
from .solver import (
    CONVERGED,
    ProblemSpec,
    SolverOpts,
    discretization_slack,
    problem_residual,
)
from .spectral import eigen_boundary_bounds, principal_eigenpair

__all__ = ["ParseError", "parse_problem", "render_problem", "dispatch", "main"]

_FMT = "%.17g"


class ParseError(ValueError):
    pass


# --------------------------------------------------------------------------
# problem files
# --------------------------------------------------------------------------

_SECTIONS = ("domain", "g", "f", "params", "solver")
_KEYS = {
    "domain": {"kind", "a", "b", "ax", "bx", "ay", "by", "n"},
    "g": {"family", "alpha", "a0"},
    "f": {"family", "beta", "c", "eps"},
    "params": {"lambda", "mu", "p"},
    "solver": {"tol", "max_iter", "sup_cap"},
}


def _num(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"line {lineno}: malformed number {tok!r}") from None


def parse_problem(text: str):
    """Parse a problem file into (ProblemSpec, SolverOpts).

    Unknown keys and sections are rejected; parse errors cite line numbers.
    """
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[(\w+)\]", line)
        if m:
            name = m.group(1)
            if name not in _SECTIONS:
                raise ParseError(f"line {lineno}: unknown section [{name}]")
            if name in sections:
                raise ParseError(f"line {lineno}: duplicate section [{name}]")
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected key = value, got {line!r}")
        if current is None:
            raise ParseError(f"line {lineno}: key outside any [section]")
        key, val = (tok.strip() for tok in line.split("=", 1))
        if key not in _KEYS[current]:
            raise ParseError(f"line {lineno}: unknown key {key!r} in [{current}]")
        if key in sections[current]:
            raise ParseError(f"line {lineno}: duplicate key {key!r}")
        sections[current][(key, lineno)] = val

    for name in ("domain", "g", "f", "params"):
        if name not in sections:
            raise ParseError(f"missing mandatory section [{name}]")

    def flat(name):
        return {k: (v, ln) for (k, ln), v in sections.get(name, {}).items()}

    dom = flat("domain")

    def need(sec, key, secname):
        if key not in sec:
            raise ParseError(f"section [{secname}] is missing key {key!r}")
        return sec[key]

    kind, _ = need(dom, "kind", "domain")
    nval, nln = need(dom, "n", "domain")
    n = int(_num(nval, nln))
    try:
        if kind == "interval":
            a, la = need(dom, "a", "domain")
            b, lb = need(dom, "b", "domain")
            domain = DomainSpec.interval(_num(a, la), _num(b, lb), n)
        elif kind == "rectangle":
            vals = [_num(*need(dom, k, "domain")) for k in ("ax", "bx", "ay", "by")]
            domain = DomainSpec.rectangle(*vals, n)
        else:
            raise ParseError(f"unknown domain kind {kind!r}")
    except ValueError as exc:
        raise ParseError(str(exc)) from None

    gsec = flat("g")
    gfam, _ = need(gsec, "family", "g")
    try:
        if gfam == "power":
            g = GSpec.power(_num(*need(gsec, "alpha", "g")))
        elif gfam == "power_shift":
            g = GSpec.power_shift(_num(*need(gsec, "alpha", "g")),
                                  _num(*need(gsec, "a0", "g")))
        else:
            raise ParseError(f"unknown g family {gfam!r}")
    except ValueError as exc:
        raise ParseError(str(exc)) from None

    fsec = flat("f")
    ffam, _ = need(fsec, "family", "f")
    try:
        if ffam in ("const", "constant"):
            f = FSpec.constant()
        elif ffam == "power":
            f = FSpec.power(_num(*need(fsec, "beta", "f")))
        elif ffam == "linear":
            f = FSpec.linear(_num(*need(fsec, "c", "f")))
        elif ffam == "arrhenius":
            f = FSpec.arrhenius(_num(*need(fsec, "eps", "f")))
        else:
            raise ParseError(f"unknown f family {ffam!r}")
    except ValueError as exc:
        raise ParseError(str(exc)) from None

    psec = flat("params")
    lam = _num(*need(psec, "lambda", "params"))
    mu = _num(*need(psec, "mu", "params"))
    p = _num(*need(psec, "p", "params"))
    if not (0.0 < p <= 2.0):
        raise ParseError(f"p must lie in (0, 2], got {p}")
    try:
        spec = ProblemSpec(domain, g, f, lam, mu, p)
    except ValueError as exc:
        raise ParseError(str(exc)) from None

    ssec = flat("solver")
    kwargs = {}
    if "tol" in ssec:
        kwargs["tol"] = _num(*ssec["tol"])
    if "max_iter" in ssec:
        kwargs["max_iter"] = int(_num(*ssec["max_iter"]))
    if "sup_cap" in ssec:
        kwargs["sup_cap"] = _num(*ssec["sup_cap"])
    try:
        opts = SolverOpts(**kwargs)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    return spec, opts


def render_problem(spec: ProblemSpec, opts: SolverOpts = SolverOpts()) -> str:
    """Inverse of parse_problem for the built-in families."""
    lines = ["[domain]", f"kind = {spec.domain.kind}"]
    ab = spec.domain.axis_bounds
    if spec.domain.kind == "interval":
        lines += [f"a = {_FMT % ab[0][0]}", f"b = {_FMT % ab[0][1]}"]
    else:
        lines += [f"ax = {_FMT % ab[0][0]}", f"bx = {_FMT % ab[0][1]}",
                  f"ay = {_FMT % ab[1][0]}", f"by = {_FMT % ab[1][1]}"]
    lines.append(f"n = {spec.domain.n}")
    lines.append("")
    lines.append("[g]")
    lines.append(f"family = {spec.g.family}")
    lines.append(f"alpha = {_FMT % spec.g.alpha}")
    if spec.g.family == "power_shift":
        lines.append(f"a0 = {_FMT % spec.g.a0}")
    lines.append("")
    lines.append("[f]")
    lines.append(f"family = {spec.f.family}")
    if spec.f.family == "power":
        lines.append(f"beta = {_FMT % spec.f.beta}")
    elif spec.f.family == "linear":
        lines.append(f"c = {_FMT % spec.f.c}")
    elif spec.f.family == "arrhenius":
        lines.append(f"eps = {_FMT % spec.f.eps}")
    lines.append("")
    lines.append("[params]")
    lines.append(f"lambda = {_FMT % spec.lam}")
    lines.append(f"mu = {_FMT % spec.mu}")
    lines.append(f"p = {_FMT % spec.p}")
    lines.append("")
    lines.append("[solver]")
    lines.append(f"tol = {_FMT % opts.tol}")
    lines.append(f"max_iter = {opts.max_iter}")
    lines.append(f"sup_cap = {_FMT % opts.sup_cap}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# flag grammars
# --------------------------------------------------------------------------

def parse_g_expr(expr: str) -> GSpec:
    """Compact flag syntax: power(alpha=0.5) or power_shift(alpha=.5, a0=1)."""
    name, kw = _call_expr(expr)
    if name == "power":
        return GSpec.power(kw["alpha"])
    if name == "power_shift":
        return GSpec.power_shift(kw["alpha"], kw["a0"])
    raise ParseError(f"unknown g family {name!r}")


def parse_f_expr(expr: str) -> FSpec:
    name, kw = _call_expr(expr)
    if name in ("const", "constant"):
        return FSpec.constant()
    if name == "power":
        return FSpec.power(kw["beta"])
    if name == "linear":
        return FSpec.linear(kw["c"])
    if name == "arrhenius":
        return FSpec.arrhenius(kw["eps"])
    raise ParseError(f"unknown f family {name!r}")


def _call_expr(expr: str):
    m = re.fullmatch(r"\s*(\w+)\s*(?:\(([^)]*)\))?\s*", expr)
    if not m:
        raise ParseError(f"malformed family expression {expr!r}")
    kw = {}
    if m.group(2):
        for part in m.group(2).split(","):
            if "=" not in part:
                raise ParseError(f"malformed argument {part!r} in {expr!r}")
            k, v = (t.strip() for t in part.split("=", 1))
            kw[k] = _num(v, 0)
    return m.group(1), kw


def _parse_domain_flag(expr: str) -> DomainSpec:
    """interval:a:b:n or rectangle:ax:bx:ay:by:n."""
    toks = expr.split(":")
    try:
        if toks[0] == "interval" and len(toks) == 4:
            return DomainSpec.interval(float(toks[1]), float(toks[2]), int(toks[3]))
        if toks[0] == "rectangle" and len(toks) == 6:
            return DomainSpec.rectangle(*(float(t) for t in toks[1:5]), int(toks[5]))
    except ValueError as exc:
        raise ParseError(f"bad domain flag {expr!r}: {exc}") from None
    raise ParseError(f"bad domain flag {expr!r}")


# --------------------------------------------------------------------------
# result files
# --------------------------------------------------------------------------

def _jsonify(obj):
    if isinstance(obj, float):
        return float(_FMT % obj)
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    return obj


def _write_out(path: str, payload: dict, csv_rows=None, csv_header=None):
    if path.endswith(".csv"):
        with open(path, "w", newline="") as fh:
            fh.write(",".join(csv_header) + "\n")
            for row in csv_rows:
                fh.write(",".join(row) + "\n")
    else:
        with open(path, "w") as fh:
            json.dump(_jsonify(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt_cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return _FMT % v


def _report_payload(report) -> dict:
    return {
        "verdict": report.verdict,
        "residual_inf": report.residual_inf,
        "iterations": report.iterations,
        "sup_norm": report.sup_norm(),
        "history": [list(t) for t in report.history],
        "note": report.note,
    }


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _load_problem(path: str):
    with open(path) as fh:
        return parse_problem(fh.read())


def _cmd_solve(args) -> int:
    spec, opts = _load_problem(args.problem)
    verdict = existence_predicate(spec, opts=opts)
    report = verdict.report
    payload = {
        "outcome": verdict.outcome,
        "attempts": [list(a) for a in verdict.attempts],
    }
    if report is not None:
        payload["report"] = _report_payload(report)
    if verdict.outcome == EXISTS:
        sol = report.solution
        from .grid import boundary_distance
        ratios = sol.values / boundary_distance(spec.domain).values
        payload["ratio_min"] = float(np.min(ratios))
        payload["ratio_max"] = float(np.max(ratios))
        print(f"verdict: {report.verdict}  sup_norm = {sol.sup_norm():.6g}  "
              f"residual = {report.residual_inf:.3e}  "
              f"iterations = {report.iterations}")
        print(f"boundary ratios: [{payload['ratio_min']:.6g}, "
              f"{payload['ratio_max']:.6g}]")
        if args.dump_solution:
            write_field_csv(sol, args.dump_solution)
    else:
        print(f"outcome: {verdict.outcome}")
        for name, v in verdict.attempts:
            print(f"  attempt {name}: {v}")
    _write_out(args.out, payload)
    return 0 if verdict.outcome == EXISTS else 1


def _cmd_eigen(args) -> int:
    domain = _parse_domain_flag(args.domain)
    pair = principal_eigenpair(domain, tol=args.tol)
    c1, c2 = eigen_boundary_bounds(pair)
    print(f"lambda1 = {pair.lambda1:.10g}")
    print(f"C1 = {c1:.10g}  C2 = {c2:.10g}")
    print(f"residual = {pair.residual:.3e}")
    payload = {"lambda1": pair.lambda1, "C1": c1, "C2": c2,
               "residual": pair.residual}
    _write_out(args.out, payload)
    if args.dump_phi:
        write_field_csv(pair.phi1, args.dump_phi)
    return 0


def _cmd_ko(args) -> int:
    g = parse_g_expr(args.g)
    res = check_ko(g, quad_tol=args.quad_tol)
    print(f"value = {res.value:.10g}  satisfied = {res.satisfied}"
          + ("  (undetermined)" if res.undetermined else ""))
    _write_out(args.out, {"value": res.value, "satisfied": res.satisfied,
                          "undetermined": res.undetermined})
    return 0


def _cmd_sweep(args) -> int:
    spec, opts = _load_problem(args.problem)
    values = [float(t) for t in args.values.split(",")]
    curve = sweep(spec, args.axis, values, opts=opts,
                  warm_starts=not args.parallel)
    rows = []
    for r in curve.records:
        rows.append([_fmt_cell(v) for v in
                     (r.param, r.outcome, r.sup_norm, r.center_value,
                      r.ratio_min, r.ratio_max, r.iterations, r.residual)])
        print(f"{r.param:.6g}: {r.outcome}  sup={r.sup_norm:.6g}")
    payload = {"axis": curve.axis,
               "records": [dict(zip(curve.CSV_HEADER,
                                    (r.param, r.outcome, r.sup_norm,
                                     r.center_value, r.ratio_min, r.ratio_max,
                                     r.iterations, r.residual)))
                           for r in curve.records]}
    _write_out(args.out, payload, csv_rows=rows, csv_header=curve.CSV_HEADER)
    return 0


def _cmd_bisect(args) -> int:
    spec, opts = _load_problem(args.problem)
    try:
        est = bisect_threshold(spec, args.axis, args.lo, args.hi,
                               args.param_tol, opts=opts)
    except BracketError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print(f"threshold estimate = {est.estimate:.10g} "
          f"(bracket [{est.lo:.10g}, {est.hi:.10g}], {est.bisection_steps} steps)")
    if est.closed_form is not None:
        print(f"closed form = {est.closed_form:.10g}")
    if est.poisoned_probes:
        print(f"WARNING: {est.poisoned_probes} inconclusive probes counted "
              "as nonexistent")
    payload = {"lo": est.lo, "hi": est.hi, "estimate": est.estimate,
               "bisection_steps": est.bisection_steps,
               "closed_form": est.closed_form,
               "poisoned_probes": est.poisoned_probes,
               "probes": [[p, o] for p, o in est.probes]}
    header = ("param", "outcome")
    rows = [[_fmt_cell(p), o] for p, o in est.probes]
    rows.append(["estimate", _fmt_cell(est.estimate)])
    _write_out(args.out, payload, csv_rows=rows, csv_header=header)
    return 0


def _cmd_supersol(args) -> int:
    spec, opts = _load_problem(args.problem)
    profile = solve_h(spec.g, eta=args.eta, hprime_eta=args.hprime_eta)
    from .bifurcate import _Context
    ctx = _Context(opts)
    ctx._profile[spec.g] = profile
    found = supersolution_search(spec, ctx, opts)
    if found is None:
        print("no verified super-solution on the (M, c) ladder")
        _write_out(args.out, {"found": False})
        return 1
    m, c, cand = found
    min_excess, ok = verify_supersolution(cand, spec)
    print(f"verified super-solution: M = {m:g}, c = {c:g}, "
          f"min_excess = {min_excess:.6g}")
    payload = {"found": True, "M": m, "c": c, "min_excess": min_excess,
               "sup_norm": cand.sup_norm()}
    _write_out(args.out, payload)
    if args.dump_excess:
        excess = problem_residual(spec, cand.values)
        write_field_csv(ScalarField(spec.domain, excess), args.dump_excess)
    return 0


def _cmd_verify(args) -> int:
    spec, opts = _load_problem(args.problem)
    u = read_field_csv(args.field, spec.domain)
    if np.any(u.values <= 0):
        print("field is not positive at all interior nodes", file=sys.stderr)
        return 1
    excess = problem_residual(spec, u.values)
    slack = discretization_slack(spec.domain, u.values)
    payload = {
        "residual_inf": float(np.max(np.abs(excess))),
        "excess_min": float(np.min(excess)),
        "excess_max": float(np.max(excess)),
        "slack": slack,
        "is_supersolution": bool(np.min(excess) >= -slack),
        "is_subsolution": bool(np.max(excess) <= slack),
    }
    print(f"residual_inf = {payload['residual_inf']:.6g}  "
          f"excess in [{payload['excess_min']:.6g}, {payload['excess_max']:.6g}]")
    print(f"super-solution: {payload['is_supersolution']}  "
          f"sub-solution: {payload['is_subsolution']}")
    _write_out(args.out, payload)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="singbvp",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("solve", help="solve one problem instance")
    s.add_argument("--problem", required=True)
    s.add_argument("--out", default="solve_result.json")
    s.add_argument("--dump-solution", default=None)
    s.set_defaults(fn=_cmd_solve)

    s = sub.add_parser("eigen", help="principal eigenpair of -Lap")
    s.add_argument("--domain", required=True,
                   help="interval:a:b:n or rectangle:ax:bx:ay:by:n")
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--out", default="eigen_result.json")
    s.add_argument("--dump-phi", default=None)
    s.set_defaults(fn=_cmd_eigen)

    s = sub.add_parser("ko", help="Keller-Osserman integral of g")
    s.add_argument("--g", required=True, help='e.g. "power(alpha=0.5)"')
    s.add_argument("--quad-tol", type=float, default=1e-10)
    s.add_argument("--out", default="ko_result.json")
    s.set_defaults(fn=_cmd_ko)

    s = sub.add_parser("sweep", help="parameter sweep")
    s.add_argument("--problem", required=True)
    s.add_argument("--axis", choices=("lambda", "mu"), required=True)
    s.add_argument("--values", required=True, help="comma-separated increasing")
    s.add_argument("--parallel", action="store_true",
                   help="cold mode: no warm starts, order-independent")
    s.add_argument("--out", default="sweep_result.csv")
    s.set_defaults(fn=_cmd_sweep)

    s = sub.add_parser("bisect", help="existence threshold bisection")
    s.add_argument("--problem", required=True)
    s.add_argument("--axis", choices=("lambda", "mu"), required=True)
    s.add_argument("--lo", type=float, required=True)
    s.add_argument("--hi", type=float, required=True)
    s.add_argument("--param-tol", type=float, required=True)
    s.add_argument("--out", default="bisect_result.csv")
    s.set_defaults(fn=_cmd_bisect)

    s = sub.add_parser("supersol", help="search the (M, c) super-solution ladder")
    s.add_argument("--problem", required=True)
    s.add_argument("--eta", type=float, default=1.0)
    s.add_argument("--hprime-eta", type=float, default=1.0)
    s.add_argument("--out", default="supersol_result.json")
    s.add_argument("--dump-excess", default=None)
    s.set_defaults(fn=_cmd_supersol)

    s = sub.add_parser("verify", help="classify a dumped field against a problem")
    s.add_argument("--problem", required=True)
    s.add_argument("--field", required=True)
    s.add_argument("--out", default="verify_result.json")
    s.set_defaults(fn=_cmd_verify)
    return ap


def dispatch(argv) -> int:
    """Run one subcommand; returns the process exit code."""
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.fn(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))
