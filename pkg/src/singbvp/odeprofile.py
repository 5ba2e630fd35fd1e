"""One-dimensional concave profile h with h'' = -g(h), h(0) = 0.

Naive forward time-stepping from t = 0 dies on the singularity of g at
h = 0, so the trajectory is built from its first integral instead: with
G(y) = int_y^{h(eta)} g, every solution satisfies

    h'(t)^2 = 2 G(h(t)) + h'(eta)^2,

which pins the whole curve once the terminal height h(eta) is known.  The
terminal height is calibrated so that the traversal time of [0, h(eta)]
at the energy speed equals eta.  Composing M * h(c * phi1) then yields the
super-solution candidates used by the existence machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .grid import ScalarField
from .nonlin import GSpec, eval_g, g_antiderivative
from .spectral import EigenPair

__all__ = [
    "HProfile",
    "ProfileError",
    "GrowthCheck",
    "solve_h",
    "energy_residual",
    "growth_constants",
    "build_supersolution",
    "verify_supersolution",
]


class ProfileError(RuntimeError):
    pass


@dataclass(frozen=True)
class HProfile:
    """Tabulated increasing concave solution of h'' = -g(h) on [0, eta].

    nodes are strictly increasing abscissas starting at 0; h the profile
    values (h[0] = 0); hprime the derivative values, +inf at 0 when g is
    not integrable at the origin.
    """

    eta: float
    nodes: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    hprime: np.ndarray = field(repr=False)
    g: GSpec

    def __post_init__(self):
        if self.h[0] != 0.0 or self.nodes[0] != 0.0:
            raise ProfileError("profile must start at h(0) = 0")
        if np.any(np.diff(self.nodes) <= 0) or np.any(np.diff(self.h) <= 0):
            raise ProfileError("profile must be strictly increasing")
        finite = np.isfinite(self.hprime)
        if np.any(self.hprime[finite] <= 0):
            raise ProfileError("h' must stay positive on [0, eta]")
        if np.any(np.diff(self.hprime[finite]) > 1e-9 * self.hprime[finite][0]):
            raise ProfileError("h' must be nonincreasing (concavity)")

    @property
    def h_eta(self) -> float:
        return float(self.h[-1])

    @property
    def hprime_eta(self) -> float:
        return float(self.hprime[-1])

    def interpolator(self) -> PchipInterpolator:
        """Monotone cubic interpolant of h over [0, eta]."""
        return PchipInterpolator(self.nodes, self.h)


def _speed(g: GSpec, y, g_top: float, hprime_eta: float):
    """h' as a function of height via the first integral."""
    gy = g_antiderivative(g, y)
    val = 2.0 * (g_top - gy) + hprime_eta**2
    return np.sqrt(val)


def _time_to_fall(g: GSpec, height: float, hprime_eta: float,
                  quad_tol: float) -> float:
    g_top = float(g_antiderivative(g, height))

    def integrand(y):
        s = _speed(g, y, g_top, hprime_eta)
        return 0.0 if not np.isfinite(s) else 1.0 / s

    val, _ = quad(integrand, 0.0, height, epsabs=quad_tol, epsrel=quad_tol,
                  limit=400)
    return val


def solve_h(g: GSpec, eta: float = 1.0, hprime_eta: float = 1.0,
            tol: float = 1e-10, num_nodes: int = 1200) -> HProfile:
    """Construct the profile with terminal slope hprime_eta at t = eta.

    The terminal height H = h(eta) solves T(H) = eta where T is the
    traversal time of [0, H] at the energy speed; T is increasing in H, so
    a bracketing root find calibrates H without ever evaluating g at 0.
    """
    if eta <= 0 or hprime_eta <= 0:
        raise ValueError("eta and hprime_eta must be positive")
    quad_tol = min(1e-12, tol * 1e-2)

    hi = max(eta * hprime_eta, 1.0)
    t_hi = _time_to_fall(g, hi, hprime_eta, quad_tol)
    doublings = 0
    while t_hi < eta:
        hi *= 2.0
        doublings += 1
        if doublings > 200:
            raise ProfileError("terminal-height calibration failed to bracket")
        t_hi = _time_to_fall(g, hi, hprime_eta, quad_tol)
    lo = hi
    while _time_to_fall(g, lo, hprime_eta, quad_tol) > eta:
        lo /= 2.0
        if lo < 1e-280:
            raise ProfileError("terminal-height calibration failed to bracket")

    height = brentq(
        lambda H: _time_to_fall(g, H, hprime_eta, quad_tol) - eta,
        lo, hi, xtol=1e-15, rtol=8.9e-16,
    )

    g_top = float(g_antiderivative(g, height))
    # heights clustered toward 0 so the singular end stays resolved
    s = (np.arange(num_nodes + 1) / num_nodes) ** 2.5
    heights = height * s
    times = np.zeros(num_nodes + 1)

    def integrand(y):
        sp = _speed(g, y, g_top, hprime_eta)
        return 0.0 if not np.isfinite(sp) else 1.0 / sp

    for j in range(1, num_nodes + 1):
        seg, _ = quad(integrand, heights[j - 1], heights[j],
                      epsabs=quad_tol, epsrel=quad_tol, limit=200)
        times[j] = times[j - 1] + seg

    if abs(times[-1] - eta) > 1e3 * max(tol, 1e-12) * max(1.0, eta):
        raise ProfileError(
            f"time reconstruction drifted: t_end = {times[-1]!r} vs eta = {eta!r}"
        )

    with np.errstate(divide="ignore", over="ignore"):
        hprime = np.empty_like(heights)
        hprime[0] = _speed(g, heights[0], g_top, hprime_eta) if heights[0] > 0 else (
            _speed_at_zero(g, g_top, hprime_eta))
        hprime[1:] = _speed(g, heights[1:], g_top, hprime_eta)

    return HProfile(eta=eta, nodes=times, h=heights, hprime=hprime, g=g)


def _speed_at_zero(g: GSpec, g_top: float, hprime_eta: float) -> float:
    """h'(0+): finite exactly when int_0 g converges."""
    if g.family in ("power", "power_shift") and g.alpha >= 1.0:
        return np.inf
    g0 = float(g_antiderivative(g, 0.0)) if g.family == "table" else (
        0.0 if g.family == "power" else 0.0)
    return float(np.sqrt(2.0 * (g_top - g0) + hprime_eta**2))


def energy_residual(hp: HProfile) -> float:
    """Sup defect of h'(t)^2 - 2 G(h(t)) - h'(eta)^2 over the finite nodes."""
    g_top = float(g_antiderivative(hp.g, hp.h_eta))
    finite = np.isfinite(hp.hprime) & (hp.h > 0)
    finite[-1] = True
    gv = g_antiderivative(hp.g, np.maximum(hp.h[finite], 1e-300))
    defect = hp.hprime[finite] ** 2 - 2.0 * (g_top - gv) - hp.hprime_eta**2
    if hp.h[0] == 0.0 and np.isfinite(hp.hprime[0]):
        g0 = float(g_antiderivative(hp.g, 1e-300)) if hp.g.family == "table" else 0.0
        if hp.g.family in ("power", "power_shift") and hp.g.alpha < 1.0:
            g0 = 0.0
        d0 = hp.hprime[0] ** 2 - 2.0 * (g_top - g0) - hp.hprime_eta**2
        return float(max(np.max(np.abs(defect)), abs(d0)))
    return float(np.max(np.abs(defect)))


@dataclass(frozen=True)
class GrowthCheck:
    c1: float
    c2: float
    verified: bool
    witness_index: Optional[int] = None


def growth_constants(hp: HProfile, p: float) -> GrowthCheck:
    """Constants c1 = 2 h(eta), c2 = h'(eta)^2 + 1 dominating (h')^p by
    c1 g(h) + c2, verified at every node."""
    if not (0.0 < p <= 2.0):
        raise ValueError(f"p must lie in (0, 2], got {p}")
    c1 = 2.0 * hp.h_eta
    c2 = hp.hprime_eta**2 + 1.0
    mask = hp.h > 0
    lhs = hp.hprime[mask] ** p
    rhs = c1 * eval_g(hp.g, hp.h[mask]) + c2
    ok = np.isinf(rhs) | (lhs <= rhs * (1.0 + 1e-12) + 1e-12)
    if np.all(ok):
        return GrowthCheck(c1, c2, True)
    bad = int(np.nonzero(~ok)[0][0]) + int(np.argmax(mask))
    return GrowthCheck(c1, c2, False, witness_index=bad)


def build_supersolution(hp: HProfile, pair: EigenPair, M: float,
                        c: float) -> ScalarField:
    """Compose M * h(c * phi1) nodewise via monotone interpolation.

    Requires c * sup(phi1) < eta so the composition never leaves [0, eta],
    and M >= 1 (M = 1 is the bare profile composition).
    """
    if M < 1.0:
        raise ValueError(f"M must be >= 1, got {M}")
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    phimax = float(np.max(pair.phi1.values))
    if c * phimax >= hp.eta:
        raise ValueError(
            f"composition outside the profile range: c*||phi1|| = {c * phimax} "
            f">= eta = {hp.eta}"
        )
    interp = hp.interpolator()
    t = np.clip(c * pair.phi1.values, 0.0, hp.nodes[-1])
    return ScalarField(pair.domain, M * interp(t))


def verify_supersolution(candidate: ScalarField, problem) -> tuple:
    """Nodewise excess -Lap u - g(u) - lam |grad u|^p - mu f(x,u).

    Returns (min_excess, ok) with ok = min_excess >= -slack, where slack
    is the O(h^2) discretization allowance scaled by field magnitude.
    A nonpositive candidate is rejected.
    """
    from .solver import discretization_slack, problem_residual

    if np.any(candidate.values <= 0):
        raise ValueError("super-solution candidate must be positive at all nodes")
    excess = problem_residual(problem, candidate.values)
    slack = discretization_slack(problem.domain, candidate.values)
    min_excess = float(np.min(excess))
    return min_excess, bool(min_excess >= -slack)
