"""Monotone (rotated) parameter families of piecewise equations.

When the parameter derivative of the right-hand side keeps one sign and is
not identically zero along solutions, limit cycles move monotonically in
the parameter and can only be created or destroyed in pairs at folds.  This
module certifies that sign numerically, continues cycle branches, and
locates fold thresholds by bisection on the cycle count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .cycles import HYPERBOLIC_TOL, LimitCycle, classify_jet, find_cycles
from .equation import PiecewiseEquation, normalize
from .poincare import NotInDomain, displacement_many, knots
from .cycles import _jet_at

ALPHA_FLOOR = 1e-7
THRESHOLD_WIDTH = 1e-9

__all__ = [
    "RotatedFamily",
    "Certificate",
    "BadBracketError",
    "Branch",
    "certify",
    "continue_cycle",
    "saddle_node_threshold",
]


class BadBracketError(ValueError):
    """Cycle counts at the bracket ends do not differ by two."""


@dataclass(frozen=True)
class Certificate:
    sign: int                 # +1 for >= 0, -1 for <= 0
    witness: tuple            # (piece index, x, alpha) where strict
    rejected: bool = False
    conflict: Optional[tuple] = None  # (piece index, x, alpha) pair on rejection


@dataclass
class RotatedFamily:
    builder: Callable[[float], PiecewiseEquation]
    alpha_range: tuple[float, float]
    certificate: Optional[Certificate] = None

    def equation(self, alpha: float) -> PiecewiseEquation:
        lo, hi = self.alpha_range
        if not (lo <= alpha <= hi):
            raise ValueError("alpha=%g outside the family range [%g, %g]"
                             % (alpha, lo, hi))
        return self.builder(alpha)


@dataclass(frozen=True)
class Branch:
    points: tuple            # of (alpha, LimitCycle)
    termination: str         # range-end | merged | lost
    last_alpha: float


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

def certify(family: RotatedFamily, grid: int = 64) -> Certificate:
    """Sample the parameter derivative of every piece on a (x, alpha) grid.

    The derivative is estimated by central differences in alpha.  A valid
    certificate needs one global sign and, on every x-subinterval of length
    at least 1e-3, a point where some piece is strictly signed.
    """
    lo_a, hi_a = family.alpha_range
    alphas = np.linspace(lo_a, hi_a, grid)
    da = max(1e-6 * (hi_a - lo_a), 1e-9)
    eq0 = normalize(family.equation(lo_a))
    xlo, xhi = eq0.scan_interval()
    xs = np.linspace(xlo, xhi, grid)

    scale = 0.0
    dmat = np.zeros((eq0.n, grid, grid))  # piece x x-grid x alpha-grid
    for j, a in enumerate(alphas):
        ap = min(a + da, hi_a)
        am = max(a - da, lo_a)
        ep = normalize(family.equation(ap))
        em = normalize(family.equation(am))
        for i in range(eq0.n):
            vp = ep.pieces[i].eval_unchecked(xs)
            vm = em.pieces[i].eval_unchecked(xs)
            dmat[i, :, j] = (vp - vm) / (ap - am)
            scale = max(scale, float(np.max(np.abs(vp))))
    tol = 1e-9 * max(1.0, scale)
    pos = dmat > tol
    neg = dmat < -tol
    if pos.any() and neg.any():
        ip = np.unravel_index(np.argmax(dmat), dmat.shape)
        im = np.unravel_index(np.argmin(dmat), dmat.shape)
        cert = Certificate(sign=0, witness=(ip[0], xs[ip[1]], alphas[ip[2]]),
                           rejected=True,
                           conflict=(im[0], xs[im[1]], alphas[im[2]]))
        family.certificate = cert
        return cert
    strict = pos if pos.any() else neg
    if not strict.any():
        cert = Certificate(sign=0, witness=(), rejected=True, conflict=None)
        family.certificate = cert
        return cert
    sign = 1 if pos.any() else -1

    # strictness: every x-subinterval of length >= 1e-3 must meet a strict point
    strict_x = strict.any(axis=(0, 2))
    span = (xhi - xlo) / (grid - 1)
    window = max(1, int(np.ceil(1e-3 / span)))
    ok = all(strict_x[k:k + window + 1].any()
             for k in range(0, grid - window))
    if not ok:
        cert = Certificate(sign=0, witness=(), rejected=True, conflict=None)
        family.certificate = cert
        return cert
    iw = np.unravel_index(np.argmax(np.abs(dmat)), dmat.shape)
    cert = Certificate(sign=sign, witness=(iw[0], xs[iw[1]], alphas[iw[2]]))
    family.certificate = cert
    return cert


# ---------------------------------------------------------------------------
# branch continuation
# ---------------------------------------------------------------------------

def _correct(ne, x_guess: float, radius: float):
    """Zero of the displacement near x_guess, or None."""
    try:
        jet = _jet_at(ne, x_guess)
    except NotInDomain:
        return None
    x = x_guess
    for _ in range(60):
        d = displacement_many(ne, [x])[0]
        if not np.isfinite(d):
            return None
        dp = _jet_at(ne, x).d1 - 1.0
        if dp == 0:
            break
        step = d / dp
        xn = x - step
        if abs(xn - x_guess) > radius:
            break
        x = xn
        if abs(step) < 1e-13 * (1.0 + abs(x)):
            dfin = displacement_many(ne, [x])[0]
            if np.isfinite(dfin) and abs(dfin) < 1e-10 * (1.0 + abs(x)):
                return x
            return None
    # safeguard: bracket around the guess
    for r in (0.25 * radius, 0.5 * radius, radius):
        a, b = x_guess - r, x_guess + r
        da = displacement_many(ne, [a])[0]
        db = displacement_many(ne, [b])[0]
        if np.isfinite(da) and np.isfinite(db) and da * db < 0:
            try:
                return brentq(lambda t: displacement_many(ne, [t])[0], a, b,
                              xtol=1e-14, rtol=1e-15)
            except ValueError:
                return None
    return None


def continue_cycle(family: RotatedFamily, seed: LimitCycle, alpha0: float,
                   path) -> Branch:
    """Track a hyperbolic cycle along a monotone alpha path.

    The previous x0 seeds a Newton corrector on the displacement; the step is
    halved on corrector failure down to a floor.  Stops when the cycle merges
    (|P' - 1| below the hyperbolicity tolerance) or is lost.
    """
    if abs(seed.jet.d1 - 1.0) <= HYPERBOLIC_TOL:
        raise ValueError("seed cycle must be hyperbolic")
    path = list(path)
    if any(np.sign(b - a) != np.sign(path[1] - path[0])
           for a, b in zip(path[:-1], path[1:])):
        raise ValueError("path must be monotone")
    points = [(alpha0, seed)]
    x_prev = seed.x0
    a_prev = alpha0
    termination = "range-end"
    k = 0
    while k < len(path):
        a_next = path[k]
        step = a_next - a_prev
        x_new = None
        while True:
            a_try = a_prev + step
            ne = normalize(family.equation(a_try))
            radius = max(0.25 * abs(x_prev), 0.05) + 10 * abs(step)
            x_new = _correct(ne, x_prev, radius)
            if x_new is not None:
                break
            if abs(step) <= ALPHA_FLOOR:
                break
            step *= 0.5
        if x_new is None:
            termination = "lost"
            break
        a_prev = a_try
        x_prev = x_new
        jet = _jet_at(ne, x_new)
        mult, stab = classify_jet(jet)
        points.append((a_prev, LimitCycle(x0=x_new, kind="non-constant",
                                          multiplicity=mult, stability=stab,
                                          jet=jet)))
        if abs(jet.d1 - 1.0) <= HYPERBOLIC_TOL:
            termination = "merged"
            break
        if a_prev == a_next:
            k += 1
    return Branch(points=tuple(points), termination=termination,
                  last_alpha=a_prev)


# ---------------------------------------------------------------------------
# fold threshold
# ---------------------------------------------------------------------------

def _count_in(family, alpha: float, window, grid: int):
    ne = normalize(family.equation(alpha))
    cycles = find_cycles(ne, grid=grid)
    lo, hi = window
    kept = [c for c in cycles if c.kind == "non-constant" and lo <= c.x0 <= hi]
    return kept, ne


def saddle_node_threshold(family: RotatedFamily, bracket, window=None,
                          grid: int = 1024):
    """Fold parameter by bisection on the cycle count.

    The two bracket ends must differ by exactly two cycles in the tracked
    window.  Returns (alpha_star, merged cycle); the merged cycle is located
    as the zero of P' - 1 between the last two coexisting cycles, where the
    fold geometry is well conditioned.
    """
    a_lo, a_hi = bracket
    if window is None:
        ne = normalize(family.equation(a_lo))
        window = ne.scan_interval()
    many, _ = _count_in(family, a_lo, window, grid)
    few, _ = _count_in(family, a_hi, window, grid)
    if abs(len(many) - len(few)) != 2:
        raise BadBracketError(
            "cycle counts %d and %d at the bracket ends do not differ by two"
            % (len(many), len(few)))
    if len(many) < len(few):
        a_lo, a_hi = a_hi, a_lo
        many, few = few, many
    rich = len(many)

    last_pair = many
    while abs(a_hi - a_lo) > THRESHOLD_WIDTH:
        mid = 0.5 * (a_lo + a_hi)
        cyc, _ = _count_in(family, mid, window, grid)
        if len(cyc) >= rich:
            a_lo = mid
            last_pair = cyc
        else:
            a_hi = mid
    alpha_star = 0.5 * (a_lo + a_hi)

    # the merging pair are the two cycles closest together on the rich side
    xs = sorted(c.x0 for c in last_pair)
    gaps = [(b - a, a, b) for a, b in zip(xs[:-1], xs[1:])]
    _, xa, xb = min(gaps)
    ne_star = normalize(family.equation(alpha_star))

    def dprime(x):
        return _jet_at(ne_star, x).d1 - 1.0

    pad = 0.25 * (xb - xa)
    lo, hi = xa - pad, xb + pad
    va, vb = dprime(lo), dprime(hi)
    if va * vb < 0:
        x_star = brentq(dprime, lo, hi, xtol=1e-15, rtol=1e-15)
    else:
        x_star = 0.5 * (xa + xb)
    jet = _jet_at(ne_star, x_star)
    mult, stab = classify_jet(jet)
    merged = LimitCycle(x0=x_star, kind="non-constant", multiplicity=mult,
                        stability=stab, jet=jet)
    return alpha_star, merged
