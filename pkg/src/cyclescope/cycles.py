"""Limit-cycle location, counting bounds, and classification.

For two-piece equations the state interval is partitioned by the zeros of
f1*f2; counting the sign changes of f1 + f2 on each open part gives an a
priori bound on cycles there (none / at most one / at most one and
hyperbolic / needs further analysis).  Cycles are then located as fixed
points of the return map by a refining grid scan and classified through the
displacement jet d = P - id.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dcfield

import numpy as np
from scipy.optimize import brentq

from .equation import NormalizedEquation, normalize
from .field import ScalarField, poly_is_zero, real_roots_with_multiplicity
from .flow import SingularIntegrandError, traverse_time
from .poincare import (NotInDomain, PoincareJet, constant_multiplier,
                       derivative_discrete, derivative_integral, displacement_many,
                       knots)

HYPERBOLIC_TOL = 1e-7
TANGENT_TOL = 1e-10
MAX_GRID = 2 ** 16

__all__ = [
    "AnnulusError",
    "InternalConsistencyError",
    "Interval",
    "PartitionReport",
    "LimitCycle",
    "constant_cycles",
    "partition",
    "find_cycles",
    "smoothness_bound",
    "annulus_integral",
    "abel_diagnostics",
    "classify_jet",
]


class AnnulusError(ValueError):
    """f1 + f2 vanishes identically: every solution is periodic."""


class InternalConsistencyError(RuntimeError):
    """Detected cycles exceed a proven bound; indicates a numerical bug."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    sign_changes: int
    verdict: str  # none | at-most-one | at-most-one-hyperbolic | needs-analysis

    def contains(self, x: float) -> bool:
        return self.lo < x < self.hi

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi,
                "sign_changes": self.sign_changes, "verdict": self.verdict}


@dataclass(frozen=True)
class PartitionReport:
    common_zeros: tuple[float, ...]
    intervals: tuple[Interval, ...]

    def to_dict(self) -> dict:
        return {"common_zeros": list(self.common_zeros),
                "intervals": [iv.to_dict() for iv in self.intervals]}


@dataclass(frozen=True)
class LimitCycle:
    x0: float
    kind: str           # constant | non-constant
    multiplicity: int   # 1 | 2 | 3
    stability: str      # stable | unstable | upper-stable-lower-unstable |
                        # upper-unstable-lower-stable
    jet: PoincareJet

    def to_dict(self) -> dict:
        return {"x0": self.x0, "kind": self.kind,
                "multiplicity": self.multiplicity, "stability": self.stability,
                "P1": self.jet.d1, "P2": self.jet.d2, "P3": self.jet.d3}


# ---------------------------------------------------------------------------
# jet classification
# ---------------------------------------------------------------------------

def classify_jet(jet: PoincareJet, tol: float = HYPERBOLIC_TOL):
    """(multiplicity, stability) from the displacement jet at a fixed point."""
    d1 = jet.d1 - 1.0
    d2 = jet.d2
    d3 = jet.d3
    if abs(d1) > tol:
        return 1, ("stable" if d1 < 0 else "unstable")
    if abs(d2) > tol:
        if d2 < 0:
            return 2, "upper-stable-lower-unstable"
        return 2, "upper-unstable-lower-stable"
    return 3, ("stable" if d3 < 0 else "unstable")


def _piece_sum(ne: NormalizedEquation) -> ScalarField:
    total = ne.pieces[0]
    for p in ne.pieces[1:]:
        total = total.add(p)
    return total


def _check_annulus(ne: NormalizedEquation):
    total = _piece_sum(ne)
    scale = max(float(np.max(np.abs(p.num))) for p in ne.pieces)
    if poly_is_zero(total.num, reference=scale):
        raise AnnulusError("f1 + f2 is identically zero: periodic annulus")
    return total


# ---------------------------------------------------------------------------
# constant cycles
# ---------------------------------------------------------------------------

def constant_cycles(eq) -> list[LimitCycle]:
    """Constant limit cycles of a two-piece equation: common zeros of both
    fields, with multiplicity read off f1 + f2 (capped at 3)."""
    ne = normalize(eq) if not isinstance(eq, NormalizedEquation) else eq
    if ne.n != 2:
        raise ValueError("constant cycles are defined for two-piece equations")
    total = _check_annulus(ne)
    f1, f2 = ne.pieces
    lo, hi = ne.state_interval
    z1 = f1.zeros()
    z2 = f2.zeros()
    out = []
    for r1, _ in z1.roots:
        if not (lo <= r1 <= hi):
            continue
        for r2, _ in z2.roots:
            if abs(r1 - r2) <= 1e-7 * (1.0 + abs(r1)):
                lam = 0.5 * (r1 + r2)
                mult = _zero_multiplicity(total, lam)
                jet = constant_multiplier(ne, lam)
                _, stability = classify_jet(jet)
                out.append(LimitCycle(x0=lam, kind="constant",
                                      multiplicity=min(mult, 3), stability=stability,
                                      jet=jet))
                break
    out.sort(key=lambda c: c.x0)
    return out


def _zero_multiplicity(f: ScalarField, lam: float) -> int:
    roots = real_roots_with_multiplicity(np.asarray(f.num, dtype=float))
    for r, m in roots:
        if abs(r - lam) <= 1e-5 * (1.0 + abs(lam)):
            return m
    return 1


# ---------------------------------------------------------------------------
# partition and verdicts
# ---------------------------------------------------------------------------

def partition(eq) -> PartitionReport:
    """Step-1/Step-2 interval report for a two-piece equation."""
    ne = normalize(eq) if not isinstance(eq, NormalizedEquation) else eq
    if ne.n != 2:
        raise ValueError("the partition procedure applies to two-piece equations")
    total = _check_annulus(ne)
    f1, f2 = ne.pieces
    lo, hi = ne.state_interval

    cuts = set()
    commons = []
    z1 = [r for r, _ in f1.zeros().roots if lo < r < hi]
    z2 = [r for r, _ in f2.zeros().roots if lo < r < hi]
    for r in z1 + z2:
        cuts.add(float(r))
    for r1 in z1:
        for r2 in z2:
            if abs(r1 - r2) <= 1e-7 * (1.0 + abs(r1)):
                commons.append(0.5 * (r1 + r2))
    edges = sorted(cuts)
    # merge numerically coincident cut points
    merged = []
    for e in edges:
        if not merged or e - merged[-1] > 1e-9 * (1.0 + abs(e)):
            merged.append(e)
    bounds = [lo] + merged + [hi]

    intervals = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b - a <= 0:
            continue
        rep = total.sign_changes((a, b))
        s = rep.count
        if s == 0:
            verdict = "none"
        elif s == 1:
            # hyperbolic refinement: exactly one zero of f1+f2 in the interval
            zl = total.zeros((_fin(a, b, True), _fin(b, a, False)))
            interior = [r for r, _ in zl.roots if a < r < b]
            verdict = "at-most-one-hyperbolic" if len(interior) == 1 else "at-most-one"
        else:
            verdict = "needs-analysis"
        intervals.append(Interval(a, b, s, verdict))
    return PartitionReport(common_zeros=tuple(sorted(commons)),
                           intervals=tuple(intervals))


def _fin(x: float, other: float, is_lo: bool) -> float:
    if np.isfinite(x):
        return x
    span = max(1.0, abs(other))
    return other - 100 * span if is_lo else other + 100 * span


# ---------------------------------------------------------------------------
# cycle search
# ---------------------------------------------------------------------------

def _jet_at(ne: NormalizedEquation, x0: float) -> PoincareJet:
    try:
        kn = knots(ne, x0)
        if kn.in_V:
            return derivative_discrete(ne, x0, kn)
        return derivative_integral(ne, x0, kn)
    except NotInDomain:
        return derivative_integral(ne, x0)


def _scan_window(ne: NormalizedEquation, iv) -> tuple[float, float]:
    lo, hi = iv
    slo, shi = ne.scan_interval()
    lo = max(lo, slo)
    hi = min(hi, shi)
    return lo, hi


def _disp(ne: NormalizedEquation, x: float) -> float:
    d = displacement_many(ne, [x])[0]
    if not np.isfinite(d):
        raise NotInDomain("displacement undefined at x=%g" % x)
    return d


def _detect_in_window(ne, lo, hi, grid):
    """Fixed points of P in (lo, hi) at one grid resolution.

    Returns sorted x0 list; even-order fixed points come from deep local
    minima of |d| without a sign change.
    """
    pad = 1e-9 * (1.0 + abs(lo) + abs(hi))
    xs = np.linspace(lo + pad, hi - pad, grid)
    d = displacement_many(ne, xs)
    found = []
    finite = np.isfinite(d)
    scale = 1.0 + np.abs(xs)

    for i in range(len(xs) - 1):
        if not (finite[i] and finite[i + 1]):
            continue
        a, b = d[i], d[i + 1]
        if a == 0.0:
            found.append(xs[i])
        elif a * b < 0:
            try:
                root = brentq(lambda x: _disp(ne, x), xs[i], xs[i + 1],
                              xtol=1e-14, rtol=1e-15)
                found.append(root)
            except (ValueError, NotInDomain):
                pass
    if finite[-1] and d[-1] == 0.0:
        found.append(xs[-1])

    # tangential fixed points: local minima of |d| below the tangent tolerance
    ad = np.abs(d)
    for i in range(1, len(xs) - 1):
        if not (finite[i - 1] and finite[i] and finite[i + 1]):
            continue
        if ad[i] <= ad[i - 1] and ad[i] <= ad[i + 1] and \
                0 < ad[i] < TANGENT_TOL * scale[i]:
            if d[i - 1] * d[i + 1] > 0:  # no crossing: even-order contact
                x_t = _polish_tangent(ne, xs[i - 1], xs[i + 1])
                if x_t is not None:
                    found.append(x_t)
    found.sort()
    merged = []
    for x in found:
        if not merged or x - merged[-1] > 1e-8 * (1.0 + abs(x)):
            merged.append(x)
    return merged


def _polish_tangent(ne, lo, hi):
    """Refine an even-order fixed point as the zero of d' = P' - 1."""
    def dprime(x):
        return _jet_at(ne, x).d1 - 1.0
    try:
        va, vb = dprime(lo), dprime(hi)
        if va * vb < 0:
            return brentq(dprime, lo, hi, xtol=1e-14, rtol=1e-15)
    except (ValueError, NotInDomain):
        pass
    # fall back: golden-section on |d|
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c1 = b - gr * (b - a)
    c2 = a + gr * (b - a)
    f1v, f2v = abs(_disp(ne, c1)), abs(_disp(ne, c2))
    for _ in range(120):
        if b - a < 1e-13 * (1.0 + abs(a)):
            break
        if f1v < f2v:
            b, c2, f2v = c2, c1, f1v
            c1 = b - gr * (b - a)
            f1v = abs(_disp(ne, c1))
        else:
            a, c1, f1v = c1, c2, f2v
            c2 = a + gr * (b - a)
            f2v = abs(_disp(ne, c2))
    x = 0.5 * (a + b)
    return x if abs(_disp(ne, x)) < TANGENT_TOL * (1.0 + abs(x)) else None


def find_cycles(eq, grid: int = 1024, tol_hyperbolic: float = HYPERBOLIC_TOL,
                check_bounds: bool = True) -> list[LimitCycle]:
    """All limit cycles found on the state interval.

    Two-piece equations are scanned per partition interval (skipping those
    proved empty); other equations are scanned over the whole interval.
    The grid doubles until the detected count is stable across two
    consecutive refinements.
    """
    if grid < 64:
        raise ValueError("grid must be at least 64")
    ne = normalize(eq) if not isinstance(eq, NormalizedEquation) else eq

    report = None
    constants: list[LimitCycle] = []
    if ne.n == 2:
        report = partition(ne)
        constants = constant_cycles(ne)
        windows = [(iv, _scan_window(ne, (iv.lo, iv.hi)))
                   for iv in report.intervals if iv.verdict != "none"]
    else:
        windows = [(None, _scan_window(ne, ne.state_interval))]

    cycles = list(constants)
    for iv, (lo, hi) in windows:
        if hi - lo <= 0:
            continue
        g = grid
        prev = None
        stable_passes = 0
        while True:
            cur = _detect_in_window(ne, lo, hi, g)
            if prev is not None and len(cur) == len(prev):
                stable_passes += 1
                if stable_passes >= 2:
                    break
            else:
                stable_passes = 0
            prev = cur
            if g >= MAX_GRID:
                break
            g *= 2
        for x0 in cur:
            if any(abs(x0 - c.x0) <= 1e-7 * (1.0 + abs(x0)) for c in constants):
                continue
            jet = _jet_at(ne, x0)
            mult, stability = classify_jet(jet, tol_hyperbolic)
            cycles.append(LimitCycle(x0=x0, kind="non-constant",
                                     multiplicity=mult, stability=stability,
                                     jet=jet))
        if check_bounds and iv is not None:
            count = sum(1 for c in cycles
                        if c.kind == "non-constant" and iv.contains(c.x0))
            bound = 1 if iv.verdict.startswith("at-most-one") else None
            if bound is not None and count > bound:
                raise InternalConsistencyError(
                    "%d cycles detected in (%g, %g) with verdict %s"
                    % (count, iv.lo, iv.hi, iv.verdict))
    cycles.sort(key=lambda c: c.x0)
    return cycles


# ---------------------------------------------------------------------------
# smoothness bound, annulus integral, Abel diagnostics
# ---------------------------------------------------------------------------

def smoothness_bound(eq, k: int):
    """(applicable, k): at most k cycles when every f_i^(k) keeps one sign
    on the state interval, with at least one piece strictly signed."""
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    ne = normalize(eq) if not isinstance(eq, NormalizedEquation) else eq
    window = ne.scan_interval()
    signs = []
    for piece in ne.pieces:
        dk = piece.derivative(k)
        if dk.is_identically_zero:
            signs.append(0)
        else:
            s = dk.sign_on(window)
            if s == 0:
                return False, k  # this derivative changes sign on its own
            signs.append(s)
    strict = [s for s in signs if s != 0]
    if not strict:
        return False, k
    if all(s >= 0 for s in signs) or all(s <= 0 for s in signs):
        return True, k
    return False, k


def annulus_integral(eq, x0: float) -> float:
    """F(x0) = int from x0 to P(x0) of dx/f2: an independent periodicity
    certificate (zero iff x0 is a fixed point of the return map)."""
    ne = normalize(eq) if not isinstance(eq, NormalizedEquation) else eq
    if ne.n != 2:
        raise ValueError("the periodicity integral applies to two-piece equations")
    kn = knots(ne, x0)
    x2 = kn.end
    f2 = ne.pieces[1]
    return traverse_time(f2, x0, x2)


def _cubic_coeffs(piece: ScalarField):
    if not piece.is_polynomial:
        return None
    num = np.zeros(4)
    c = np.asarray(piece.num, dtype=float) / float(piece.den[0])
    if len(c) > 4:
        if np.any(np.abs(c[4:]) > 1e-13 * max(1.0, np.max(np.abs(c)))):
            return None
        c = c[:4]
    num[:len(c)] = c
    if abs(num[0]) > 1e-13 * max(1.0, np.max(np.abs(num))):
        return None  # nonzero constant term: not through the origin
    return num[3], num[2], num[1]  # (a, b, c) of a x^3 + b x^2 + c x


def abel_diagnostics(eq, cycle: LimitCycle, jet: PoincareJet | None = None) -> dict:
    """Determinant diagnostics for a non-constant cycle of a cubic equation.

    Returns A, B, C, G(x0), the orientation alpha, and checks that
    sign(P'-1) = alpha*sign(G).  When P' = 1 the multiplicity is certified
    to be at most 2.
    """
    ne = normalize(eq) if not isinstance(eq, NormalizedEquation) else eq
    if ne.n != 2:
        raise ValueError("diagnostics require a two-piece equation")
    if cycle.kind != "non-constant":
        raise ValueError("diagnostics apply to non-constant cycles")
    co1 = _cubic_coeffs(ne.pieces[0])
    co2 = _cubic_coeffs(ne.pieces[1])
    if co1 is None or co2 is None:
        raise ValueError("pieces must be cubics through the origin")
    a1, b1, c1 = co1
    a2, b2, c2 = co2
    A = a1 * b2 - a2 * b1
    B = c1 * a2 - c2 * a1
    C = c1 * b2 - c2 * b1

    x0 = cycle.x0
    kn = knots(ne, x0)
    x1 = kn.values[1]
    G = A * x0 * x1 - B * (x0 + x1) - C
    pref = x0 * x1 * (x1 - x0) / (ne.pieces[0].eval(x0) * ne.pieces[1].eval(x1))
    alpha = float(np.sign(pref))

    if jet is None:
        jet = cycle.jet
    lhs = float(np.sign(jet.d1 - 1.0)) if abs(jet.d1 - 1.0) > HYPERBOLIC_TOL else 0.0
    rhs = alpha * float(np.sign(G)) if abs(G) > 1e-9 * (1.0 + abs(A) + abs(B) + abs(C)) \
        else 0.0
    consistent = lhs == rhs
    mult_bound = 2 if lhs == 0.0 else 1
    return {"A": A, "B": B, "C": C, "G": G, "alpha": alpha,
            "sign_consistent": consistent, "multiplicity_bound": mult_bound}
