"""Parametric nonlinearity families.

g is the singular zero-order term: positive, nonincreasing on (0, inf),
blowing up at 0.  f is the nonnegative perturbation, nondecreasing in s,
optionally carrying a separable positive x-weight.  This module also
classifies f against the four structural hypotheses used by the existence
theory and evaluates the Keller-Osserman integral of g near the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

__all__ = [
    "GSpec",
    "FSpec",
    "Hypothesis",
    "HypothesisReport",
    "KOResult",
    "HOLDS",
    "FAILS",
    "UNDETERMINED",
    "eval_g",
    "g_prime",
    "g_asymptote",
    "g_antiderivative",
    "check_ko",
    "eval_f",
    "f_prime_s",
    "classify_f",
]

HOLDS = "holds"
FAILS = "fails"
UNDETERMINED = "undetermined"

_SAMPLE_LO = 1e-6
_SAMPLE_HI = 1e6


@dataclass(frozen=True)
class GSpec:
    """Singular nonlinearity g.

    Families: power g(s) = s^(-alpha); power_shift g(s) = s^(-alpha) + a0;
    table, a user-supplied nonincreasing positive table interpolated
    linearly and extended flat beyond its abscissas.
    """

    family: str
    alpha: float = 1.0
    a0: float = 0.0
    s_table: Optional[np.ndarray] = field(default=None, compare=False)
    g_table: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.family in ("power", "power_shift"):
            if not (self.alpha > 0 and np.isfinite(self.alpha)):
                raise ValueError(f"alpha must be positive, got {self.alpha}")
            if self.family == "power_shift" and not (self.a0 >= 0):
                raise ValueError(f"a0 must be nonnegative, got {self.a0}")
        elif self.family == "table":
            s = np.asarray(self.s_table, dtype=float)
            g = np.asarray(self.g_table, dtype=float)
            if s.ndim != 1 or s.shape != g.shape or s.size < 2:
                raise ValueError("table needs matching 1D s and g arrays")
            if np.any(np.diff(s) <= 0) or s[0] <= 0:
                raise ValueError("table abscissas must be positive increasing")
            if np.any(g <= 0):
                raise ValueError("g must be positive")
            if np.any(np.diff(g) > 1e-12 * np.max(g)):
                raise ValueError("g must be nonincreasing")
            object.__setattr__(self, "s_table", s)
            object.__setattr__(self, "g_table", g)
        else:
            raise ValueError(f"unknown g family {self.family!r}")

    @staticmethod
    def power(alpha: float) -> "GSpec":
        return GSpec("power", alpha=float(alpha))

    @staticmethod
    def power_shift(alpha: float, a0: float) -> "GSpec":
        return GSpec("power_shift", alpha=float(alpha), a0=float(a0))

    @staticmethod
    def table(s_vals, g_vals) -> "GSpec":
        return GSpec("table", s_table=np.asarray(s_vals), g_table=np.asarray(g_vals))


def eval_g(g: GSpec, s):
    """Evaluate g at s > 0; the singularity makes s <= 0 a domain error."""
    arr = np.asarray(s, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("g is defined on (0, inf) only; got a nonpositive argument")
    if g.family == "power":
        out = arr ** (-g.alpha)
    elif g.family == "power_shift":
        out = arr ** (-g.alpha) + g.a0
    else:
        out = np.interp(arr, g.s_table, g.g_table)
    return out if isinstance(s, np.ndarray) else float(out)


def g_prime(g: GSpec, s):
    """dg/ds; analytic for the power families, finite differences for tables."""
    arr = np.asarray(s, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("g' is defined on (0, inf) only")
    if g.family in ("power", "power_shift"):
        out = -g.alpha * arr ** (-g.alpha - 1.0)
    else:
        ds = 1e-6 * np.maximum(arr, 1e-12)
        lo = np.maximum(arr - ds, 0.5 * arr)
        out = (np.interp(arr + ds, g.s_table, g.g_table)
               - np.interp(lo, g.s_table, g.g_table)) / (arr + ds - lo)
    return out if isinstance(s, np.ndarray) else float(out)


def g_asymptote(g: GSpec) -> float:
    """The limit a = lim_{s->inf} g(s), finite by monotonicity."""
    if g.family == "power":
        return 0.0
    if g.family == "power_shift":
        return float(g.a0)
    tail = g.g_table[-3:]
    if np.any(np.diff(tail) > 0):
        raise ValueError("table tail is not nonincreasing; asymptote unreliable")
    return float(g.g_table[-1])


def g_antiderivative(g: GSpec, y):
    """An antiderivative G of g, fixed up to a constant.

    For power families with alpha >= 1 the constant is chosen so that only
    differences G(b) - G(a) are meaningful (the primitive diverges at 0).
    """
    arr = np.asarray(y, dtype=float)
    if g.family in ("power", "power_shift"):
        if g.alpha == 1.0:
            with np.errstate(divide="ignore"):
                out = np.log(arr)
        else:
            out = arr ** (1.0 - g.alpha) / (1.0 - g.alpha)
        if g.family == "power_shift":
            out = out + g.a0 * arr
    else:
        s, gv = g.s_table, g.g_table
        knots = np.concatenate([[0.0], s])
        vals = np.concatenate([[gv[0]], gv])  # flat extension below s[0]
        cum = np.concatenate([[0.0], np.cumsum(np.diff(knots) * 0.5 * (vals[:-1] + vals[1:]))])
        below = arr <= knots[-1]
        out = np.empty_like(arr, dtype=float)
        out[below] = np.interp(arr[below], knots, cum)
        out[~below] = cum[-1] + gv[-1] * (arr[~below] - knots[-1])
    return out if isinstance(y, np.ndarray) else float(out)


@dataclass(frozen=True)
class KOResult:
    value: float
    satisfied: bool
    undetermined: bool = False


def check_ko(g: GSpec, quad_tol: float = 1e-10) -> KOResult:
    """Keller-Osserman integral of g around the origin.

    Computes int_0^1 (int_0^t g)^{-1/2} dt.  A divergent inner integral is
    read as integrand 0 (the infinity^{-1/2} = 0 convention), so strongly
    singular g gives value 0, satisfied.  The outer endpoint singularity is
    handled by shrinking the lower limit geometrically and extrapolating the
    tail as a geometric series; failure to extrapolate is reported as
    undetermined.
    """
    if g.family in ("power", "power_shift") and g.alpha >= 1.0:
        return KOResult(0.0, True)

    # inner antiderivative from 0: finite for the families reaching here
    if g.family in ("power", "power_shift"):
        def inner0(t):
            v = t ** (1.0 - g.alpha) / (1.0 - g.alpha)
            if g.family == "power_shift":
                v += g.a0 * t
            return v
    else:
        base = float(g_antiderivative(g, 1e-300))
        def inner0(t):
            return float(g_antiderivative(g, t)) - base

    def integrand(t):
        v = inner0(t)
        if not np.isfinite(v) or v <= 0:
            return 0.0
        return v ** (-0.5)

    deltas = [1e-2 * 4.0 ** (-k) for k in range(14)]
    vals = []
    for d in deltas:
        # full_output silences the roundoff warning near the singular end;
        # the geometric-tail extrapolation below owns the accuracy claim
        part = quad(integrand, d, 1.0, epsabs=quad_tol * 1e-2,
                    epsrel=quad_tol * 1e-2, limit=400, full_output=1)[0]
        vals.append(part)
    diffs = np.diff(vals)
    # geometric tail: I_inf ~ I_k + d_k * r / (1 - r)
    for k in range(len(diffs) - 1, 0, -1):
        if abs(diffs[k]) < quad_tol:
            return KOResult(float(vals[k + 1]), True)
        r = diffs[k] / diffs[k - 1]
        if 0 < r < 0.95:
            est = vals[k + 1] + diffs[k] * r / (1.0 - r)
            return KOResult(float(est), True)
    if abs(diffs[-1]) >= abs(diffs[0]):
        # no decay in the tail contributions: divergent outer integral
        return KOResult(float("inf"), False)
    return KOResult(float(vals[-1]), False, undetermined=True)


@dataclass(frozen=True)
class FSpec:
    """Perturbation f(x, s) = weight(x) * phi(s), weight positive.

    phi families: constant phi = 1; power phi(s) = s^beta; linear
    phi(s) = c s; arrhenius phi(s) = exp(s / (1 + eps s)); table.
    """

    family: str
    beta: float = 1.0
    c: float = 1.0
    eps: float = 0.1
    s_table: Optional[np.ndarray] = field(default=None, compare=False)
    f_table: Optional[np.ndarray] = field(default=None, compare=False)
    weight: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.family == "power":
            if not (self.beta > 0 and np.isfinite(self.beta)):
                raise ValueError(f"beta must be positive, got {self.beta}")
        elif self.family == "linear":
            if not (self.c > 0 and np.isfinite(self.c)):
                raise ValueError(f"c must be positive, got {self.c}")
        elif self.family == "arrhenius":
            if not (self.eps > 0 and np.isfinite(self.eps)):
                raise ValueError(f"eps must be positive, got {self.eps}")
        elif self.family == "table":
            s = np.asarray(self.s_table, dtype=float)
            f = np.asarray(self.f_table, dtype=float)
            if s.ndim != 1 or s.shape != f.shape or s.size < 2:
                raise ValueError("table needs matching 1D s and f arrays")
            if np.any(np.diff(s) <= 0) or s[0] < 0:
                raise ValueError("table abscissas must be nonnegative increasing")
            if np.any(f < 0) or np.any(np.diff(f) < -1e-12 * max(1.0, np.max(f))):
                raise ValueError("f must be nonnegative and nondecreasing")
            object.__setattr__(self, "s_table", s)
            object.__setattr__(self, "f_table", f)
        elif self.family != "constant":
            raise ValueError(f"unknown f family {self.family!r}")

    @property
    def is_x_only(self) -> bool:
        """True when f does not depend on s (the transform-friendly case)."""
        return self.family == "constant"

    @staticmethod
    def constant(weight: Optional[Callable] = None) -> "FSpec":
        return FSpec("constant", weight=weight)

    @staticmethod
    def power(beta: float) -> "FSpec":
        return FSpec("power", beta=float(beta))

    @staticmethod
    def linear(c: float) -> "FSpec":
        return FSpec("linear", c=float(c))

    @staticmethod
    def arrhenius(eps: float) -> "FSpec":
        return FSpec("arrhenius", eps=float(eps))


def _phi(f: FSpec, s: np.ndarray) -> np.ndarray:
    if f.family == "constant":
        return np.ones_like(s)
    if f.family == "power":
        return s**f.beta
    if f.family == "linear":
        return f.c * s
    if f.family == "arrhenius":
        return np.exp(s / (1.0 + f.eps * s))
    return np.interp(s, f.s_table, f.f_table)


def _phi_prime(f: FSpec, s: np.ndarray) -> np.ndarray:
    if f.family == "constant":
        return np.zeros_like(s)
    if f.family == "power":
        return f.beta * s ** (f.beta - 1.0)
    if f.family == "linear":
        return np.full_like(s, f.c)
    if f.family == "arrhenius":
        return np.exp(s / (1.0 + f.eps * s)) / (1.0 + f.eps * s) ** 2
    ds = 1e-6 * np.maximum(s, 1e-9)
    return (np.interp(s + ds, f.s_table, f.f_table)
            - np.interp(np.maximum(s - ds, 0.0), f.s_table, f.f_table)) / (
        ds + np.minimum(ds, s))


def _weights(f: FSpec, points) -> np.ndarray:
    if f.weight is None:
        return np.asarray(1.0)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    w = np.asarray(f.weight(*(pts[:, k] for k in range(pts.shape[1]))), dtype=float)
    if np.any(w <= 0):
        raise ValueError("f weight must be strictly positive")
    return w


def eval_f(f: FSpec, s, points=None):
    """Evaluate f(x, s).  points is an (N, ndim) coordinate array matching
    s; omitted for x-independent f."""
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise ValueError("f is defined for s >= 0 only")
    out = _phi(f, arr)
    if f.weight is not None:
        if points is None:
            raise ValueError("x-dependent f needs node coordinates")
        out = out * _weights(f, points)
    return out if isinstance(s, np.ndarray) else float(out)


def f_prime_s(f: FSpec, s, points=None):
    """Partial derivative of f with respect to s."""
    arr = np.asarray(s, dtype=float)
    out = _phi_prime(f, arr)
    if f.weight is not None:
        if points is None:
            raise ValueError("x-dependent f needs node coordinates")
        out = out * _weights(f, points)
    return out if isinstance(s, np.ndarray) else float(out)


@dataclass(frozen=True)
class Hypothesis:
    verdict: str
    witness: Optional[tuple] = None

    def __post_init__(self):
        if self.verdict == FAILS and self.witness is None:
            raise ValueError("a failing verdict requires a witness")


@dataclass(frozen=True)
class HypothesisReport:
    """Tri-state verdicts for the four structural hypotheses on f:
    f1: f(x,s) >= c s for some c > 0 and all s;
    f2: s -> f(x,s)/s nondecreasing;
    f3: s -> f(x,s)/s nonincreasing;
    f4: f(x,s)/s -> 0 as s -> inf."""

    f1: Hypothesis
    f2: Hypothesis
    f3: Hypothesis
    f4: Hypothesis

    def as_dict(self) -> dict:
        return {
            name: {"verdict": h.verdict, "witness": h.witness}
            for name, h in (("f1", self.f1), ("f2", self.f2),
                            ("f3", self.f3), ("f4", self.f4))
        }


def _sampled_hypotheses(f: FSpec, samples: int) -> HypothesisReport:
    s = np.geomspace(_SAMPLE_LO, _SAMPLE_HI, samples)
    q = _phi(f, s) / s

    def monotone(direction: int) -> Hypothesis:
        d = np.diff(q) * direction
        bad = np.nonzero(d < -1e-12 * np.max(np.abs(q)))[0]
        if bad.size:
            i = int(bad[0])
            return Hypothesis(FAILS, (float(s[i]), float(s[i + 1])))
        return Hypothesis(HOLDS)

    # limit-based hypotheses from samples alone stay undetermined unless
    # the tail decisively contradicts them
    f1 = Hypothesis(UNDETERMINED)
    if q[-1] < 0.5 * np.min(q[: samples // 2]) and np.all(np.diff(q[-8:]) < 0):
        f1 = Hypothesis(FAILS, (float(s[-1]),))
    f4 = Hypothesis(UNDETERMINED)
    if q[-1] > 1e-3 and np.all(np.diff(q[-8:]) >= -1e-15):
        f4 = Hypothesis(FAILS, (float(s[-1]),))
    return HypothesisReport(f1=f1, f2=monotone(+1), f3=monotone(-1), f4=f4)


def classify_f(f: FSpec, samples: int = 200) -> HypothesisReport:
    """Check (f1)-(f4).  Built-in families carry analytic verdicts which
    override sampling; tables get sampled tri-state verdicts."""
    if samples < 10:
        raise ValueError("need at least 10 samples")
    if f.family == "table":
        return _sampled_hypotheses(f, samples)

    big = _SAMPLE_HI
    if f.family == "constant":
        return HypothesisReport(
            f1=Hypothesis(FAILS, (big,)),          # 1 < c*s for s large
            f2=Hypothesis(FAILS, (1.0, 2.0)),      # 1/s is decreasing
            f3=Hypothesis(HOLDS),
            f4=Hypothesis(HOLDS),
        )
    if f.family == "linear":
        return HypothesisReport(
            f1=Hypothesis(HOLDS),
            f2=Hypothesis(HOLDS),
            f3=Hypothesis(HOLDS),
            f4=Hypothesis(FAILS, (big,)),          # f/s = c > 0
        )
    if f.family == "power":
        b = f.beta
        if b < 1.0:
            return HypothesisReport(
                f1=Hypothesis(FAILS, (big,)),
                f2=Hypothesis(FAILS, (1.0, 2.0)),
                f3=Hypothesis(HOLDS),
                f4=Hypothesis(HOLDS),
            )
        if b == 1.0:
            return HypothesisReport(
                f1=Hypothesis(HOLDS), f2=Hypothesis(HOLDS),
                f3=Hypothesis(HOLDS), f4=Hypothesis(FAILS, (big,)),
            )
        return HypothesisReport(
            f1=Hypothesis(FAILS, (_SAMPLE_LO,)),   # s^{beta-1} -> 0 at 0
            f2=Hypothesis(HOLDS),
            f3=Hypothesis(FAILS, (1.0, 2.0)),
            f4=Hypothesis(FAILS, (big,)),
        )
    # arrhenius: f/s has derivative sign given by s/(1+eps s)^2 - 1, which
    # stays negative for all s iff 1 + (2 eps - 1) s + eps^2 s^2 has no
    # positive root, i.e. iff eps >= 1/4
    e = f.eps
    if e >= 0.25:
        f3 = Hypothesis(HOLDS)
    else:
        root = ((1.0 - 2.0 * e) - math.sqrt(1.0 - 4.0 * e)) / (2.0 * e * e)
        mid = ((1.0 - 2.0 * e) + math.sqrt(1.0 - 4.0 * e)) / (2.0 * e * e)
        f3 = Hypothesis(FAILS, (float(root), float(0.5 * (root + mid))))
    return HypothesisReport(
        f1=Hypothesis(FAILS, (big,)),              # f bounded by e^{1/eps}
        f2=Hypothesis(FAILS, (_SAMPLE_LO, 2.0 * _SAMPLE_LO)),
        f3=f3,
        f4=Hypothesis(HOLDS),
    )
