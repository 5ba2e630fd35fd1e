"""Existence verdicts, threshold bisection and parameter sweeps.

"Numerically nonexistent" is an evidence grade, not a proof: it means every
solver strategy diverged and no verified super-solution was found, and each
such verdict carries the full attempt ledger.  The existence set along a
swept parameter is down-closed (an instance solvable at a larger parameter
is solvable below it), which is what justifies plain bisection for the
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import DomainSpec, ScalarField, boundary_distance, build_grid
from .nonlin import GSpec, g_asymptote
from .odeprofile import HProfile, build_supersolution, solve_h, verify_supersolution
from .solver import (
    CONVERGED,
    DIVERGED,
    ITERATION_CAP,
    PRECONDITION_FAILED,
    ProblemSpec,
    SolveReport,
    SolverOpts,
    minimal_subsolution,
    solve_monotone,
    solve_newton,
    solve_transformed_p2,
)
from .spectral import EigenPair, cached_eigenpair

__all__ = [
    "ExistenceVerdict",
    "ThresholdEstimate",
    "SweepRecord",
    "BifurcationCurve",
    "BracketError",
    "existence_predicate",
    "closed_form_threshold",
    "bisect_threshold",
    "sweep",
    "supersolution_search",
]

EXISTS = "exists"
NONEXISTENT = "numerically_nonexistent"
INCONCLUSIVE = "inconclusive"

NEWTON_LADDER = (1e-2, 1e-1, 1.0, 1e1, 1e2)
M_LADDER = tuple(1.5 * 4.0**k for k in range(12))   # 1.5 ... ~6.3e6
C_LADDER = (0.3, 0.6, 0.9)


class BracketError(RuntimeError):
    def __init__(self, msg: str, lo_outcome: str, hi_outcome: str):
        super().__init__(msg)
        self.lo_outcome = lo_outcome
        self.hi_outcome = hi_outcome


@dataclass
class ExistenceVerdict:
    outcome: str
    report: Optional[SolveReport]
    attempts: list = field(default_factory=list)

    def __post_init__(self):
        if self.outcome == EXISTS and (self.report is None or not self.report.converged):
            raise ValueError("exists requires a converged report")


class _Context:
    """Shared per-(domain, g) machinery: eigenpair, minimal sub-solution
    and ODE profile, built lazily and reused across probes of one study."""

    def __init__(self, opts: SolverOpts):
        self.opts = opts
        self._zeta: dict = {}
        self._profile: dict = {}

    def pair(self, domain: DomainSpec) -> EigenPair:
        return cached_eigenpair(domain)

    def zeta(self, domain: DomainSpec, g: GSpec) -> Optional[ScalarField]:
        key = (domain, g)
        if key not in self._zeta:
            rep = minimal_subsolution(g, domain, self.opts)
            self._zeta[key] = rep.solution if rep.converged else None
        return self._zeta[key]

    def profile(self, g: GSpec) -> Optional[HProfile]:
        if g not in self._profile:
            try:
                self._profile[g] = solve_h(g, eta=1.0, hprime_eta=1.0, tol=1e-10)
            except Exception:
                self._profile[g] = None
        return self._profile[g]


def supersolution_search(problem: ProblemSpec, ctx: Optional[_Context] = None,
                         opts: SolverOpts = SolverOpts(),
                         m_ladder=M_LADDER, c_ladder=C_LADDER):
    """First (M, c) on the logarithmic ladder whose composed candidate
    M*h(c*phi1) verifies as a discrete super-solution dominating zeta.

    Returns (M, c, candidate) or None.  The ladder replaces the explicit
    constant chase of the analytic construction; only verified candidates
    are ever used.
    """
    ctx = ctx or _Context(opts)
    pair = ctx.pair(problem.domain)
    profile = ctx.profile(problem.g)
    if profile is None:
        return None
    zeta = ctx.zeta(problem.domain, problem.g)
    for c in c_ladder:
        if c * float(np.max(pair.phi1.values)) >= profile.eta:
            continue
        for m in m_ladder:
            cand = build_supersolution(profile, pair, m, c)
            if zeta is not None and np.any(cand.values < zeta.values):
                continue
            _, ok = verify_supersolution(cand, problem)
            if ok:
                return m, c, cand
    return None


def existence_predicate(problem: ProblemSpec,
                        warm_start: Optional[ScalarField] = None,
                        opts: SolverOpts = SolverOpts(),
                        ctx: Optional[_Context] = None) -> ExistenceVerdict:
    """Numerical proxy for solvability: a ladder of strategies, stopping at
    the first convergence.

    Order: warm-start Newton; monotone iteration between zeta and a
    verified super-solution from the (M, c) ladder; the p = 2 transformed
    path when applicable; the deterministic Newton start ladder.  The
    outcome is numerically_nonexistent only when every attempted solve
    failed (diverged or stalled at its iteration cap) and the
    super-solution search came up empty; a verified super-solution without
    any converged solve is contradictory evidence and stays inconclusive.
    """
    ctx = ctx or _Context(opts)
    attempts = []
    reports = []

    def record(name: str, rep: SolveReport) -> bool:
        attempts.append((name, rep.verdict))
        reports.append(rep)
        return rep.converged

    if warm_start is not None:
        rep = solve_newton(problem, warm_start, opts)
        if record("warm_newton", rep):
            return ExistenceVerdict(EXISTS, rep, attempts)

    zeta = ctx.zeta(problem.domain, problem.g)
    found = supersolution_search(problem, ctx, opts)
    supersearch_failed = found is None
    if found is not None and zeta is not None:
        m, c, cand = found
        rep = solve_monotone(problem, zeta, cand, opts)
        if record(f"monotone(M={m:g},c={c:g})", rep):
            return ExistenceVerdict(EXISTS, rep, attempts)
    else:
        attempts.append(("supersolution_search", "no verified candidate"))

    if problem.p == 2.0 and problem.lam > 0 and (problem.f.is_x_only
                                                 or problem.mu == 0.0):
        rep = solve_transformed_p2(problem, opts, warm_start=warm_start)
        if rep.verdict != PRECONDITION_FAILED:
            if record("transformed_p2", rep):
                return ExistenceVerdict(EXISTS, rep, attempts)

    pair = ctx.pair(problem.domain)
    for m in NEWTON_LADDER:
        init = ScalarField(problem.domain, m * pair.phi1.values)
        rep = solve_newton(problem, init, opts)
        if record(f"newton({m:g}*phi1)", rep):
            return ExistenceVerdict(EXISTS, rep, attempts)

    solver_verdicts = [r.verdict for r in reports if r.verdict != PRECONDITION_FAILED]
    all_failed = bool(solver_verdicts) and all(
        v in (DIVERGED, ITERATION_CAP) for v in solver_verdicts)
    last = reports[-1] if reports else None
    if all_failed and supersearch_failed:
        return ExistenceVerdict(NONEXISTENT, last, attempts)
    return ExistenceVerdict(INCONCLUSIVE, last, attempts)


def closed_form_threshold(g: GSpec, mu: float, pair: EigenPair) -> float:
    """lambda1 / (a + mu) for the p = 2, s-independent-f regime."""
    a = g_asymptote(g)
    if a + mu <= 0:
        raise ValueError("threshold formula needs a + mu > 0")
    return pair.lambda1 / (a + mu)


@dataclass
class ThresholdEstimate:
    lo: float
    hi: float
    estimate: float
    bisection_steps: int
    closed_form: Optional[float] = None
    poisoned_probes: int = 0
    probes: list = field(default_factory=list, repr=False)


def _probe(problem: ProblemSpec, axis: str, value: float,
           warm: Optional[ScalarField], opts: SolverOpts,
           ctx: _Context):
    inst = problem.with_param(axis, value)
    return existence_predicate(inst, warm_start=warm, opts=opts, ctx=ctx)


def bisect_threshold(problem: ProblemSpec, axis: str, lo: float, hi: float,
                     param_tol: float, opts: SolverOpts = SolverOpts()) -> ThresholdEstimate:
    """Bisection on the existence predicate over [lo, hi].

    Endpoints are verified first (exists at lo, numerically nonexistent at
    hi); an invalid bracket raises BracketError carrying both verdicts.
    Probes warm-start from the nearest converged solution.  Inconclusive
    probes are retried at doubled iteration budget and then counted as
    nonexistent, poisoning the estimate with a reported flag.
    """
    if not (lo < hi) or param_tol <= 0:
        raise ValueError("need lo < hi and positive param_tol")
    ctx = _Context(opts)
    probes = []

    lo_v = _probe(problem, axis, lo, None, opts, ctx)
    probes.append((lo, lo_v.outcome))
    hi_v = _probe(problem, axis, hi, None, opts, ctx)
    poisoned = 0
    if hi_v.outcome == INCONCLUSIVE:
        hi_v = _probe(problem, axis, hi, None,
                      SolverOpts(tol=opts.tol, max_iter=2 * opts.max_iter,
                                 sup_cap=opts.sup_cap), ctx)
        if hi_v.outcome == INCONCLUSIVE:
            poisoned += 1
    probes.append((hi, hi_v.outcome))
    if lo_v.outcome != EXISTS or hi_v.outcome == EXISTS:
        raise BracketError(
            f"no threshold in range [{lo}, {hi}]: lo is {lo_v.outcome}, "
            f"hi is {hi_v.outcome}",
            lo_v.outcome, hi_v.outcome,
        )

    warm = lo_v.report.solution if lo_v.report else None
    steps = 0
    while hi - lo > param_tol:
        mid = 0.5 * (lo + hi)
        verdict = _probe(problem, axis, mid, warm, opts, ctx)
        if verdict.outcome == INCONCLUSIVE:
            retry_opts = SolverOpts(tol=opts.tol, max_iter=2 * opts.max_iter,
                                    sup_cap=opts.sup_cap)
            verdict = _probe(problem, axis, mid, warm, retry_opts, ctx)
            if verdict.outcome == INCONCLUSIVE:
                poisoned += 1
        probes.append((mid, verdict.outcome))
        if verdict.outcome == EXISTS:
            lo = mid
            warm = verdict.report.solution
        else:
            hi = mid
        steps += 1

    cf = None
    if problem.p == 2.0 and problem.f.is_x_only:
        a = g_asymptote(problem.g)
        mu = problem.mu if axis == "lambda" else 0.0
        if axis == "lambda" and a + mu > 0:
            cf = closed_form_threshold(problem.g, problem.mu, ctx.pair(problem.domain))
    return ThresholdEstimate(lo=lo, hi=hi, estimate=0.5 * (lo + hi),
                             bisection_steps=steps, closed_form=cf,
                             poisoned_probes=poisoned, probes=probes)


@dataclass
class SweepRecord:
    param: float
    outcome: str
    sup_norm: float
    center_value: float
    ratio_min: float
    ratio_max: float
    iterations: int
    residual: float


@dataclass
class BifurcationCurve:
    axis: str
    records: list

    CSV_HEADER = ("param", "outcome", "sup_norm", "center_value",
                  "ratio_min", "ratio_max", "iterations", "residual")

    def down_closed(self) -> bool:
        """No existing record above a numerically nonexistent one."""
        seen_nonexistent = False
        for rec in self.records:
            if rec.outcome == NONEXISTENT:
                seen_nonexistent = True
            elif rec.outcome == EXISTS and seen_nonexistent:
                return False
        return True


def _center_index(domain: DomainSpec) -> int:
    g = build_grid(domain)
    centers = [0.5 * (a + b) for a, b in domain.axis_bounds]
    idx = [int(np.argmin(np.abs(ax - c))) for ax, c in zip(g.axes, centers)]
    if domain.ndim == 1:
        return idx[0]
    return idx[0] * domain.n + idx[1]


def sweep(problem: ProblemSpec, axis: str, values, opts: SolverOpts = SolverOpts(),
          warm_starts: bool = True) -> BifurcationCurve:
    """Solve along an increasing parameter list, recording diagnostics.

    Nonexistent points are recorded and the sweep continues.  Warm starts
    reuse the previous converged solution; cold mode re-solves each point
    independently and must reach the same outcomes.
    """
    vals = [float(v) for v in values]
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError("sweep values must be strictly increasing")
    ctx = _Context(opts)
    cidx = _center_index(problem.domain)
    dist = boundary_distance(problem.domain).values
    records = []
    warm = None
    for v in vals:
        verdict = _probe(problem, axis, v, warm if warm_starts else None, opts, ctx)
        if verdict.outcome == EXISTS:
            sol = verdict.report.solution
            ratios = sol.values / dist
            rec = SweepRecord(
                param=v, outcome=verdict.outcome,
                sup_norm=sol.sup_norm(),
                center_value=float(sol.values[cidx]),
                ratio_min=float(np.min(ratios)),
                ratio_max=float(np.max(ratios)),
                iterations=verdict.report.iterations,
                residual=verdict.report.residual_inf,
            )
            if warm_starts:
                warm = sol
        else:
            rep = verdict.report
            rec = SweepRecord(
                param=v, outcome=verdict.outcome,
                sup_norm=float("nan"), center_value=float("nan"),
                ratio_min=float("nan"), ratio_max=float("nan"),
                iterations=rep.iterations if rep else 0,
                residual=float("nan"),
            )
        records.append(rec)
    return BifurcationCurve(axis=axis, records=records)
