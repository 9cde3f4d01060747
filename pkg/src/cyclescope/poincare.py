"""Return map of a piecewise-autonomous periodic scalar equation.

After normalization to unit period with n equal slots, the return map is the
composition of the per-slot transition maps.  Its first three derivatives at
a point are computed two independent ways: closed-form expressions in the
knot values (the states at the slot boundaries), and quadrature of the
variational integrands along the trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as ncheb

from .equation import NormalizedEquation, PiecewiseEquation, normalize
from .flow import StepStatus, flow_map

IN_V_GUARD = 1e-10

__all__ = [
    "NotInDomain",
    "TrajectoryKnots",
    "PoincareJet",
    "knots",
    "knots_many",
    "derivative_discrete",
    "derivative_integral",
    "constant_multiplier",
    "displacement",
    "displacement_many",
]


class NotInDomain(ValueError):
    """The trajectory leaves the state interval or hits an equilibrium."""


@dataclass(frozen=True)
class TrajectoryKnots:
    """States x_i at the slot boundaries t = i/n, i = 0..n."""
    values: tuple[float, ...]
    in_V: bool

    @property
    def x0(self) -> float:
        return self.values[0]

    @property
    def end(self) -> float:
        return self.values[-1]


@dataclass(frozen=True)
class PoincareJet:
    value: float
    d1: float
    d2: float
    d3: float

    def displacement(self) -> float:
        return self.value  # populated with P(x0) - x0 by callers that need it


def _normalized(eq) -> NormalizedEquation:
    if isinstance(eq, NormalizedEquation):
        return eq
    return normalize(eq)


def knots_many(eq, x0):
    """Knot matrix (len(x0), n+1) and validity mask for a batch of starts.

    A start is valid (mask True) when every slot step returns OK and the
    field magnitude exceeds the guard at both ends of every slot.
    """
    ne = _normalized(eq)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    m = len(x0)
    n = ne.n
    w = ne.slot_width
    vals = np.empty((m, n + 1))
    vals[:, 0] = x0
    ok = np.ones(m, dtype=bool)
    in_v = np.ones(m, dtype=bool)
    lo, hi = ne.state_interval
    cur = x0.copy()
    for i, piece in enumerate(ne.pieces):
        fm = flow_map(piece)
        fa = np.abs(piece.eval_unchecked(cur))
        in_v &= fa > IN_V_GUARD
        nxt, status = fm.step_many(cur, w)
        good = np.array([s is StepStatus.OK or s is StepStatus.EQUILIBRIUM
                         for s in status])
        ok &= good
        ok &= np.isfinite(nxt) & (nxt >= lo - 1e-12) & (nxt <= hi + 1e-12)
        in_v &= np.array([s is StepStatus.OK for s in status])
        fb = np.abs(piece.eval_unchecked(nxt))
        in_v &= fb > IN_V_GUARD
        vals[:, i + 1] = nxt
        cur = nxt
    in_v &= ok
    return vals, ok, in_v


def knots(eq, x0: float) -> TrajectoryKnots:
    vals, ok, in_v = knots_many(eq, [x0])
    if not ok[0]:
        raise NotInDomain(
            "trajectory from x0=%g leaves the state interval or stalls" % x0)
    return TrajectoryKnots(tuple(float(v) for v in vals[0]), bool(in_v[0]))


# ---------------------------------------------------------------------------
# discrete route: closed forms in the knot values
# ---------------------------------------------------------------------------

def derivative_discrete(eq, x0: float, kn: TrajectoryKnots | None = None) -> PoincareJet:
    """P, P', P'', P''' from the knot values alone.

    Requires the trajectory to stay where every active field is nonzero;
    raises NotInDomain otherwise.
    """
    ne = _normalized(eq)
    if kn is None:
        kn = knots(ne, x0)
    if not kn.in_V:
        raise NotInDomain(
            "a field vanishes along the trajectory from x0=%g; "
            "knot formulas need f_i nonzero at both slot ends" % x0)
    xs = kn.values
    n = ne.n

    fa = np.empty(n)   # f_i(x_{i-1})
    fb = np.empty(n)   # f_i(x_i)
    d1a = np.empty(n)
    d1b = np.empty(n)
    d2a = np.empty(n)
    d2b = np.empty(n)
    for i, piece in enumerate(ne.pieces):
        fa[i] = piece.eval(xs[i])
        fb[i] = piece.eval(xs[i + 1])
        d1a[i] = piece.eval(xs[i], order=1)
        d1b[i] = piece.eval(xs[i + 1], order=1)
        d2a[i] = piece.eval(xs[i], order=2)
        d2b[i] = piece.eval(xs[i + 1], order=2)

    ratios = fb / fa                      # per-slot multipliers P'_i
    p1 = float(np.prod(ratios))
    prefix = np.concatenate([[1.0], np.cumprod(ratios)[:-1]])  # prod_{j<i}

    p2 = p1 * float(np.sum((d1b - d1a) / fa * prefix))

    s = (2 * d2b * fb - d1b ** 2 - 2 * d2a * fa + d1a ** 2) / (2 * fa ** 2)
    p3 = p1 * (1.5 * (p2 / p1) ** 2 + float(np.sum(s * prefix ** 2)))

    return PoincareJet(value=kn.end, d1=p1, d2=p2, d3=p3)


# ---------------------------------------------------------------------------
# integral route: variational integrands along the trajectory
# ---------------------------------------------------------------------------

def _slot_trajectory(piece, x_start, x_end, nodes01, width):
    """States at relative times nodes01*width within one slot, vectorized.

    The interior states are bracketed by the slot's knots, so they can be
    solved simultaneously.
    """
    fm = flow_map(piece)
    out = np.empty(len(nodes01))
    out[0] = x_start
    out[-1] = x_end
    inner = nodes01[1:-1] * width
    out[1:-1] = fm.states_between(x_start, x_end, inner)
    return out


def _integral_pass(ne: NormalizedEquation, kn: TrajectoryKnots, nodes: int):
    """One quadrature pass with the given Chebyshev node count per slot."""
    n = ne.n
    w = ne.slot_width
    # Chebyshev points of the second kind on [0,1]
    k = np.arange(nodes + 1)
    s01 = 0.5 * (1.0 - np.cos(np.pi * k / nodes))

    c_end = 0.0          # cumulative int_0^t f_x along the trajectory
    i2 = 0.0             # int f_xx * u
    i3 = 0.0             # int f_xxx * u^2
    for i, piece in enumerate(ne.pieces):
        xt = _slot_trajectory(piece, kn.values[i], kn.values[i + 1], s01, w)
        f1 = piece.eval_unchecked(xt, order=1)
        f2 = piece.eval_unchecked(xt, order=2)
        f3 = piece.eval_unchecked(xt, order=3)
        # u(t) = exp(int_0^t f_x): build the running integral from a fit
        cf1 = ncheb.chebfit(2 * s01 - 1, f1, deg=nodes)
        cint = ncheb.chebint(cf1, lbnd=-1) * (w / 2.0)
        c_rel = ncheb.chebval(2 * s01 - 1, cint)
        u = np.exp(c_end + c_rel)
        cf2 = ncheb.chebfit(2 * s01 - 1, f2 * u, deg=nodes)
        i2 += _cheb_total(cf2) * (w / 2.0)
        cf3 = ncheb.chebfit(2 * s01 - 1, f3 * u * u, deg=nodes)
        i3 += _cheb_total(cf3) * (w / 2.0)
        c_end += c_rel[-1]
    p1 = float(np.exp(c_end))
    p2 = p1 * i2
    p3 = p1 * (1.5 * i2 * i2 + i3)
    return p1, p2, p3


def _cheb_total(coeffs) -> float:
    ci = ncheb.chebint(coeffs, lbnd=-1)
    return float(ncheb.chebval(1.0, ci))


def derivative_integral(eq, x0: float, kn: TrajectoryKnots | None = None,
                        tol: float = 1e-10) -> PoincareJet:
    """P, P', P'', P''' by quadrature of the variational integrands.

    Independent of the knot closed forms: the trajectory is resolved at
    Chebyshev nodes inside each slot and the integrands are integrated from
    spectral fits, with node doubling until two passes agree.
    """
    ne = _normalized(eq)
    if kn is None:
        kn = knots(ne, x0)
    nodes = 32
    prev = _integral_pass(ne, kn, nodes)
    for _ in range(4):
        nodes *= 2
        cur = _integral_pass(ne, kn, nodes)
        scale = max(1.0, abs(cur[0]), abs(cur[1]), abs(cur[2]))
        if max(abs(a - b) for a, b in zip(prev, cur)) <= tol * scale:
            break
        prev = cur
    return PoincareJet(value=kn.end, d1=cur[0], d2=cur[1], d3=cur[2])


# ---------------------------------------------------------------------------
# constant solutions of two-piece equations
# ---------------------------------------------------------------------------

def constant_multiplier(eq, lam: float) -> PoincareJet:
    """Return-map jet at a common zero of both fields of a two-piece equation.

    With a = f1'(lam) the multiplier is exp((f1' + f2')(lam)/2) and the k-th
    derivative is (f1^(k) + f2^(k))(lam) * I_k where
    I_k = (exp((k-1)a/2) - 1)/((k-1)a), with the limit 1/2 as a -> 0.
    """
    ne = _normalized(eq)
    if ne.n != 2:
        raise ValueError("constant multipliers require a two-piece equation")
    f1, f2 = ne.pieces
    scale = max(1.0, abs(f1.eval(lam, order=1)), abs(f2.eval(lam, order=1)))
    if abs(f1.eval(lam)) > 1e-9 * scale or abs(f2.eval(lam)) > 1e-9 * scale:
        raise ValueError("lam=%g is not a common zero of both fields" % lam)
    a = f1.eval(lam, order=1)
    p1 = float(np.exp(0.5 * (a + f2.eval(lam, order=1))))

    def ik(k: int) -> float:
        z = (k - 1) * a
        if abs(z) < 1e-8:
            return 0.5 + z / 8.0
        return float(np.expm1(z / 2.0) / z)

    p2 = (f1.eval(lam, order=2) + f2.eval(lam, order=2)) * ik(2)
    p3 = (f1.eval(lam, order=3) + f2.eval(lam, order=3)) * ik(3)
    return PoincareJet(value=lam, d1=p1, d2=p2, d3=p3)


# ---------------------------------------------------------------------------
# displacement
# ---------------------------------------------------------------------------

def displacement(eq, x0: float) -> float:
    """d(x0) = P(x0) - x0."""
    return knots(eq, x0).end - x0


def displacement_many(eq, x0):
    """Vectorized displacement; NaN where the trajectory is inadmissible."""
    vals, ok, _ = knots_many(eq, x0)
    d = vals[:, -1] - vals[:, 0]
    d[~ok] = np.nan
    return d
