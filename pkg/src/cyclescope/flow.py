"""Per-piece transition maps by inversion of the time integral.

For an autonomous piece dx/dt = f(x) the time to move from a to b is
int_a^b dx/f(x).  The step map solves that integral equation for the end
point with a safeguarded, vectorized Newton iteration.  For rational f the
integral usually has a closed-form antiderivative (partial fractions); when
that construction is ill-conditioned the solver falls back to adaptive
quadrature per evaluation.  An adaptive embedded Runge-Kutta integrator is
provided as an independent oracle for tests only.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import integrate
from scipy.signal import residue

from .field import IdenticallyZeroError, ScalarField, poly_trim

NEAR_ZERO_GUARD = 1e-10
TIME_TOL = 1e-12
BRACKET_TOL = 1e-13
_BIG = 1e12

__all__ = [
    "StepStatus",
    "StepOutcome",
    "FlowMap",
    "SingularIntegrandError",
    "OracleFailure",
    "traverse_time",
    "step_map",
    "rk_flow",
]


class SingularIntegrandError(ValueError):
    """f vanishes on the integration segment."""


class OracleFailure(RuntimeError):
    """The Runge-Kutta oracle could not maintain its error target."""


class StepStatus(Enum):
    OK = "ok"
    EQUILIBRIUM = "equilibrium"
    ESCAPED = "escaped"
    NEAR_ZERO = "near_zero"


@dataclass(frozen=True)
class StepOutcome:
    end_value: float
    status: StepStatus


# ---------------------------------------------------------------------------
# closed-form antiderivative of 1/f for rational f
# ---------------------------------------------------------------------------

class _RationalAntiderivative:
    """Antiderivative of den/num via partial fractions, complex arithmetic.

    Valid up to an additive constant on each interval between real poles;
    differences are only ever taken between points on the same side of every
    real pole, so the constant imaginary offsets of the complex log cancel.
    """

    def __init__(self, num_asc: np.ndarray, den_asc: np.ndarray):
        num = poly_trim(num_asc, 1e-14)
        den = poly_trim(den_asc, 1e-14)
        res, poles, direct = residue(den[::-1], num[::-1])
        powers = np.ones(len(poles), dtype=int)
        for j in range(1, len(poles)):
            if poles[j] == poles[j - 1]:
                powers[j] = powers[j - 1] + 1
        self.poles = np.asarray(poles, dtype=complex)
        self.res = np.asarray(res, dtype=complex)
        self.powers = powers
        # direct part (descending) integrates to a polynomial
        if len(direct):
            self.direct_int = npoly.polyint(np.asarray(direct, dtype=float)[::-1])
        else:
            self.direct_int = None

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        xc = xa[..., None].astype(complex)
        dif = xc - self.poles
        terms = np.empty_like(dif)
        simple = self.powers == 1
        if np.any(simple):
            terms[..., simple] = self.res[simple] * np.log(dif[..., simple])
        if np.any(~simple):
            m = self.powers[~simple]
            terms[..., ~simple] = (self.res[~simple]
                                   * dif[..., ~simple] ** (1 - m) / (1 - m))
        out = terms.sum(axis=-1).real
        if self.direct_int is not None:
            out = out + npoly.polyval(xa, self.direct_int)
        return float(out) if np.isscalar(x) else out


def _quad_time(field: ScalarField, a: float, b: float, tol: float = TIME_TOL) -> float:
    def integrand(x):
        return (npoly.polyval(x, field.den) / npoly.polyval(x, field.num))
    val, _ = integrate.quad(integrand, a, b, epsabs=tol, epsrel=1e-12, limit=200)
    return val


# ---------------------------------------------------------------------------
# flow map
# ---------------------------------------------------------------------------

class FlowMap:
    """Precomputed stepping machinery for one scalar field."""

    def __init__(self, field: ScalarField, guard: float = NEAR_ZERO_GUARD):
        if field.is_identically_zero:
            raise IdenticallyZeroError("cannot flow an identically zero field")
        self.field = field
        self.guard = guard
        zl = field.zeros()
        lo, hi = field.domain
        self.zero_locs = np.array(
            [r for r, _ in zl.roots if lo - 1e-12 <= r <= hi + 1e-12])
        self._tau = None
        self._build_antiderivative()

    # -- time function ------------------------------------------------------

    def _build_antiderivative(self):
        try:
            tau = _RationalAntiderivative(self.field.num, self.field.den)
        except Exception:
            return
        if self._antiderivative_ok(tau):
            self._tau = tau

    def _antiderivative_ok(self, tau) -> bool:
        """Certify tau' == den/num at sample points on each root-free branch."""
        lo, hi = self.field.domain
        bound = self.field.cauchy_bound() + 1.0
        lo = max(lo, -bound)
        hi = min(hi, bound)
        edges = np.sort(np.concatenate([[lo, hi], self.zero_locs]))
        ok = True
        for a, b in zip(edges[:-1], edges[1:]):
            if b - a < 1e-8:
                continue
            xs = np.linspace(a + 0.2 * (b - a), b - 0.2 * (b - a), 3)
            h = 1e-6 * (1.0 + np.abs(xs))
            approx = (tau(xs + h) - tau(xs - h)) / (2 * h)
            exact = (npoly.polyval(xs, self.field.den)
                     / npoly.polyval(xs, self.field.num))
            err = np.abs(approx - exact) / np.maximum(1.0, np.abs(exact))
            # central differences of tau are themselves O(1e-8) accurate
            if np.any(~np.isfinite(approx)) or np.any(err > 1e-4):
                ok = False
        return ok

    def time(self, a, b):
        """Signed time integral int_a^b dx/f, assuming f != 0 in between."""
        if self._tau is not None:
            return self._tau(b) - self._tau(a)
        if np.isscalar(a) and np.isscalar(b):
            return _quad_time(self.field, a, b)
        a = np.broadcast_to(np.asarray(a, float), np.shape(b)).ravel()
        b = np.asarray(b, float).ravel()
        return np.array([_quad_time(self.field, ai, bi) for ai, bi in zip(a, b)])

    # -- vectorized stepping --------------------------------------------------

    def step_many(self, x0, duration: float):
        """End values after flowing each x0 for the given duration.

        Returns (end, status) arrays.  Statuses follow StepStatus values:
        equilibrium starts stay put; trajectories whose |f| falls below the
        guard before the duration is exhausted report near_zero (they are
        converging to an equilibrium and never cross it); trajectories whose
        total traversal time to the domain boundary is shorter than the
        duration report escaped.
        """
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        n = len(x0)
        end = x0.copy()
        status = np.full(n, StepStatus.OK, dtype=object)
        if duration < 0:
            raise ValueError("duration must be non-negative")
        if duration == 0:
            return end, status

        fv = self.field.eval_unchecked(x0)
        fscale = max(1.0, float(np.max(np.abs(self.field.num))))
        eq_mask = np.abs(fv) <= 1e-13 * fscale
        nz_mask = (~eq_mask) & (np.abs(fv) <= self.guard)
        status[eq_mask] = StepStatus.EQUILIBRIUM
        status[nz_mask] = StepStatus.NEAR_ZERO
        active = ~(eq_mask | nz_mask)
        if not np.any(active):
            return end, status

        idx = np.flatnonzero(active)
        xs = x0[idx]
        direc = np.sign(fv[idx])
        lo_dom, hi_dom = self.field.domain

        # nearest zero of f in the direction of motion, else the domain end
        if len(self.zero_locs):
            pos = np.searchsorted(self.zero_locs, xs)
            znext = np.where(pos < len(self.zero_locs),
                             self.zero_locs[np.minimum(pos, len(self.zero_locs) - 1)],
                             np.inf)
            zprev = np.where(pos > 0,
                             self.zero_locs[np.maximum(pos - 1, 0)],
                             -np.inf)
        else:
            znext = np.full(len(xs), np.inf)
            zprev = np.full(len(xs), -np.inf)
        barrier = np.where(direc > 0, znext, zprev)
        wall = np.where(direc > 0, hi_dom, lo_dom)
        has_barrier = np.isfinite(barrier)

        tau0 = np.asarray(self.time(np.full(len(xs), 0.0), xs)) if self._tau is None \
            else self._tau(xs)
        # with the antiderivative, absolute tau values are consistent per branch
        if self._tau is None:
            tau0 = np.zeros(len(xs))  # fall back: times measured from x0
        target = tau0 + duration

        hi_brk = np.empty(len(xs))
        resolved = np.zeros(len(xs), dtype=bool)
        st = np.full(len(xs), StepStatus.OK, dtype=object)
        endv = xs.copy()

        # expand a bracket end toward the barrier / domain wall
        frac = 0.5
        gap0 = np.where(has_barrier, barrier - xs,
                        np.where(np.isfinite(wall), wall - xs,
                                 direc * np.maximum(1.0, np.abs(xs))))
        trial = xs + gap0 * frac
        for _ in range(200):
            open_pts = ~resolved
            if not np.any(open_pts):
                break
            t_trial = self._time_from(tau0, xs, trial, open_pts)
            reached = open_pts & (t_trial >= duration)
            hi_brk[reached] = trial[reached]
            resolved[reached] = True
            open_pts = ~resolved
            if not np.any(open_pts):
                break
            # not enough time yet: move the trial closer to the obstruction
            fvals = self.field.eval_unchecked(trial)
            near = open_pts & has_barrier & (np.abs(fvals) < self.guard)
            endv[near] = trial[near]
            st[near] = StepStatus.NEAR_ZERO
            resolved[near] = True
            open_pts = ~resolved
            with np.errstate(invalid="ignore"):
                nb = open_pts & has_barrier
                trial = np.where(nb, barrier - (barrier - trial) * frac, trial)
                nw = open_pts & ~has_barrier & np.isfinite(wall)
                atwall = nw & (np.abs(wall - trial) <= 1e-14 * (1 + np.abs(wall)))
                endv[atwall] = wall[atwall]
                st[atwall] = StepStatus.ESCAPED
                resolved[atwall] = True
                nw &= ~resolved
                trial = np.where(nw, wall - (wall - trial) * frac, trial)
                ni = open_pts & ~resolved & ~has_barrier & ~np.isfinite(wall)
                giant = ni & (np.abs(trial) >= _BIG)
                endv[giant] = trial[giant]
                st[giant] = StepStatus.ESCAPED
                resolved[giant] = True
                ni &= ~resolved
                trial = np.where(ni, xs + (trial - xs) * 4.0, trial)

        solve = np.flatnonzero(st == StepStatus.OK)
        if len(solve):
            lo_b = xs[solve].copy()
            hi_b = hi_brk[solve].copy()
            xcur = self._newton(xs[solve], lo_b, hi_b, tau0[solve], duration)
            endv[solve] = xcur
            fend = np.abs(self.field.eval_unchecked(xcur))
            below = fend < self.guard
            st[solve[below]] = StepStatus.NEAR_ZERO

        end[idx] = endv
        status[idx] = st
        return end, status

    def _time_from(self, tau0, xs, trial, mask):
        out = np.full(len(xs), -np.inf)
        m = np.flatnonzero(mask)
        if self._tau is not None:
            out[m] = self._tau(trial[m]) - tau0[m]
        else:
            out[m] = [_quad_time(self.field, xs[i], trial[i]) for i in m]
        return out

    def _newton(self, x0, lo_b, hi_b, tau0, duration):
        """Safeguarded Newton for tau(x) = tau0 + duration on [lo_b, hi_b]."""
        lo = np.minimum(lo_b, hi_b)
        hi = np.maximum(lo_b, hi_b)
        x = np.clip(x0 + duration * self.field.eval_unchecked(x0), lo, hi)
        increasing = hi_b >= lo_b  # tau grows toward hi_b along the motion
        # the residual floor accounts for cancellation noise in tau itself
        noise = 8 * np.finfo(float).eps * (np.abs(tau0) + np.abs(duration) + 1.0)
        tol_t = np.maximum(TIME_TOL, noise)
        done = np.zeros(x.shape, dtype=bool)
        for _ in range(100):
            if self._tau is not None:
                resid = self._tau(x) - tau0 - duration
            else:
                resid = np.array([_quad_time(self.field, a, b)
                                  for a, b in zip(x0, x)]) - duration
            fx = self.field.eval_unchecked(x)
            # residual sign tells which side of the root we are on
            high = (resid > 0) == increasing
            hi = np.where(done, hi, np.where(high, np.minimum(hi, x), hi))
            lo = np.where(done, lo, np.where(~high, np.maximum(lo, x), lo))
            step = resid * fx
            xn = x - step
            bad = (xn <= lo) | (xn >= hi) | ~np.isfinite(xn)
            xn = np.where(bad, 0.5 * (lo + hi), xn)
            done |= (np.abs(resid) < tol_t) | \
                    (hi - lo < BRACKET_TOL * (1.0 + np.abs(x))) | \
                    (np.abs(xn - x) < 4 * np.finfo(float).eps * (1.0 + np.abs(x)))
            x = np.where(done, x, xn)
            if np.all(done):
                break
        return x

    def states_between(self, x_start: float, x_end: float, durations):
        """States at several times along one monotone trajectory leg.

        All requested times must lie within the leg from x_start to x_end
        (the end state after the largest duration), so every unknown is
        bracketed by the leg's endpoints.
        """
        durations = np.asarray(durations, dtype=float)
        if x_start == x_end:
            return np.full(durations.shape, x_start)
        m = len(durations)
        lo_b = np.full(m, x_start)
        hi_b = np.full(m, x_end)
        if self._tau is not None:
            # fold the per-node times into the offset; _newton's duration is scalar
            tau0 = float(self._tau(x_start)) + durations
            return self._newton(lo_b.copy(), lo_b, hi_b, tau0, 0.0)
        # fall back: sequential incremental steps through sorted times
        order = np.argsort(durations)
        out = np.empty(m)
        cur = x_start
        prev_t = 0.0
        for j in order:
            cur = self.step(cur, durations[j] - prev_t).end_value
            prev_t = durations[j]
            out[j] = cur
        return out

    def step(self, x0: float, duration: float) -> StepOutcome:
        end, status = self.step_many(np.array([x0]), duration)
        return StepOutcome(float(end[0]), status[0])

    def total_time_to(self, x0: float, x1: float) -> float:
        return float(self.time(x0, x1))


_FLOW_CACHE: dict[int, FlowMap] = {}


def flow_map(field: ScalarField) -> FlowMap:
    key = id(field)
    fm = _FLOW_CACHE.get(key)
    if fm is None or fm.field is not field:
        fm = FlowMap(field)
        _FLOW_CACHE[key] = fm
    return fm


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def traverse_time(field: ScalarField, x_a: float, x_b: float,
                  tol: float = TIME_TOL) -> float:
    """int from x_a to x_b of dx/f(x); f must not vanish on the segment."""
    lo, hi = min(x_a, x_b), max(x_a, x_b)
    if x_a != x_b:
        try:
            zl = field.zeros((lo, hi))
        except IdenticallyZeroError:
            raise SingularIntegrandError("field vanishes identically")
        if len(zl):
            raise SingularIntegrandError(
                "f vanishes at x=%g inside the integration segment" % zl.roots[0][0])
    return _quad_time(field, x_a, x_b, tol)


def step_map(field: ScalarField, x0: float, duration: float) -> StepOutcome:
    """Flow x0 forward for the given duration along dx/dt = f(x)."""
    return flow_map(field).step(x0, duration)


# Cash-Karp 5(4) tableau
_CK_A = [
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
]
_CK_B5 = (37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771)
_CK_B4 = (2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4)


def rk_flow(field: ScalarField, x0: float, duration: float,
            tol: float = 1e-12) -> float:
    """End value by an adaptive embedded Cash-Karp 5(4) integrator.

    Test-only oracle, independent from the quadrature-inversion machinery.
    Raises OracleFailure on step-size underflow (e.g. near a singularity).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    t, x = 0.0, float(x0)
    h = duration if duration > 0 else 0.0
    if duration == 0:
        return x
    fx0 = field.eval_unchecked(x0)
    if fx0 != 0:
        h = min(h, 0.1 / max(abs(fx0), 1e-3))
    lo, hi = field.domain
    while t < duration:
        h = min(h, duration - t)
        if h < 1e-16 * max(duration, 1.0):
            raise OracleFailure("step size underflow at t=%g, x=%g" % (t, x))
        k = []
        failed = False
        for stage in range(6):
            xi = x + h * sum(a * kj for a, kj in zip(_CK_A[stage], k))
            if not np.isfinite(xi) or xi < lo - 1.0 or (np.isfinite(hi) and xi > hi + 1.0):
                failed = True
                break
            k.append(field.eval_unchecked(xi))
        if not failed:
            x5 = x + h * sum(b * kj for b, kj in zip(_CK_B5, k))
            x4 = x + h * sum(b * kj for b, kj in zip(_CK_B4, k))
            err = abs(x5 - x4)
            scale = tol * (1.0 + abs(x))
            if err <= scale:
                t += h
                x = x5
                h *= min(5.0, 0.9 * (scale / max(err, 1e-300)) ** 0.2)
                continue
            h *= max(0.1, 0.9 * (scale / err) ** 0.25)
        else:
            h *= 0.25
    return x
