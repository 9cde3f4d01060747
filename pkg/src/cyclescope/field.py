"""Rational scalar fields with exact derivatives and certified zero analysis.

A field is a rational function f = N/D on an interval, stored as ascending
coefficient arrays.  Derivatives up to order 3 are built symbolically by the
quotient rule; real zeros of the numerator are isolated with multiplicities
through a numeric gcd chain, so double zeros (tangencies) are detected
reliably rather than split into spurious pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

IDENTICALLY_ZERO_TOL = 1e-13
GCD_TOL = 1e-9
ROOT_TOL = 1e-9

__all__ = [
    "ScalarField",
    "ZeroList",
    "SignChangeReport",
    "DomainError",
    "FieldConstructionError",
    "IdenticallyZeroError",
    "poly_cauchy_bound",
    "real_roots_with_multiplicity",
]


class DomainError(ValueError):
    """Evaluation point lies outside the field's domain."""


class FieldConstructionError(ValueError):
    """Invalid numerator/denominator/domain combination."""


class IdenticallyZeroError(ValueError):
    """The numerator is (numerically) the zero polynomial.

    Raised where a zero list or sign-change count would be meaningless;
    callers working with two-piece equations interpret this as the
    periodic-annulus case f1 + f2 == 0.
    """


# ---------------------------------------------------------------------------
# polynomial helpers (ascending coefficient arrays)
# ---------------------------------------------------------------------------

def _as_poly(c) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(c, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise FieldConstructionError("coefficients must be a non-empty 1-d sequence")
    return arr


def poly_trim(c: np.ndarray, rel_tol: float = 0.0) -> np.ndarray:
    """Strip trailing coefficients at or below rel_tol * max|c|."""
    scale = np.max(np.abs(c))
    if scale == 0.0:
        return np.zeros(1)
    cut = rel_tol * scale
    last = len(c) - 1
    while last > 0 and abs(c[last]) <= cut:
        last -= 1
    return c[: last + 1].copy()


def poly_is_zero(c: np.ndarray, tol: float = IDENTICALLY_ZERO_TOL,
                 reference: float = 1.0) -> bool:
    """True if all coefficients are below tol relative to max(1, reference)."""
    scale = float(np.max(np.abs(c)))
    return scale < tol * max(1.0, reference)


def poly_degree(c: np.ndarray) -> int:
    return len(poly_trim(c, IDENTICALLY_ZERO_TOL)) - 1


def poly_cauchy_bound(c: np.ndarray) -> float:
    """Cauchy bound: all real roots lie in [-b, b]."""
    c = poly_trim(c, IDENTICALLY_ZERO_TOL)
    if len(c) == 1:
        return 1.0
    lead = c[-1]
    return 1.0 + float(np.max(np.abs(c[:-1] / lead)))


def _poly_gcd(a: np.ndarray, b: np.ndarray, tol: float = GCD_TOL) -> np.ndarray:
    """Numeric gcd by the Euclidean algorithm on normalized coefficients.

    Remainders whose coefficients all fall below tol (relative to the working
    scale) are treated as zero; the returned gcd is normalized to unit
    leading coefficient.
    """
    a = poly_trim(a / np.max(np.abs(a)), tol)
    b = poly_trim(b / np.max(np.abs(b)), tol)
    if len(a) < len(b):
        a, b = b, a
    while True:
        if len(b) == 1:
            if abs(b[0]) < tol:
                out = a
                break
            return np.array([1.0])
        _, r = npoly.polydiv(a, b)
        r = poly_trim(r, 0.0)
        scale = np.max(np.abs(r))
        if scale < tol:
            out = b
            break
        r = r / scale
        r = poly_trim(r, tol)
        a, b = b, r
    return out / out[-1]


def _real_roots_simple(c: np.ndarray) -> np.ndarray:
    """Real roots of a (numerically square-free) polynomial via companion matrix."""
    c = poly_trim(c, IDENTICALLY_ZERO_TOL)
    if len(c) == 1:
        return np.array([])
    roots = npoly.polyroots(c)
    keep = np.abs(roots.imag) <= 1e-7 * (1.0 + np.abs(roots.real))
    out = np.sort(roots.real[keep])
    # Newton polish on the square-free polynomial (simple roots)
    dc = npoly.polyder(c)
    for _ in range(4):
        fv = npoly.polyval(out, c)
        dv = npoly.polyval(out, dc)
        safe = np.abs(dv) > 0
        step = np.where(safe, fv / np.where(safe, dv, 1.0), 0.0)
        out = out - step
    return out


def real_roots_with_multiplicity(c, tol: float = ROOT_TOL) -> list[tuple[float, int]]:
    """All real roots of the polynomial with multiplicities.

    Multiplicity m is recovered from the gcd chain: a root of p has
    multiplicity 1 + (its multiplicity in gcd(p, p')).  Locations are
    polished with Newton iterations on the (m-1)-th derivative, where the
    root is simple.
    """
    c = _as_poly(c)
    if poly_is_zero(c):
        raise IdenticallyZeroError("zero polynomial has no isolated roots")
    c = poly_trim(c / np.max(np.abs(c)), IDENTICALLY_ZERO_TOL)

    def recurse(p: np.ndarray) -> list[tuple[float, int]]:
        p = poly_trim(p, GCD_TOL)
        if len(p) == 1:
            return []
        dp = npoly.polyder(p)
        g = _poly_gcd(p, dp)
        if len(g) == 1:
            return [(float(r), 1) for r in _real_roots_simple(p)]
        inner = recurse(g)
        sf, _ = npoly.polydiv(p, g)
        out = []
        for r in _real_roots_simple(sf):
            match = [m for (ri, m) in inner if abs(ri - r) <= 1e-5 * (1.0 + abs(r))]
            out.append((float(r), 1 + (match[0] if match else 0)))
        return sorted(out)

    roots = recurse(c)
    # final polish: Newton on the (m-1)-th derivative of the full polynomial
    polished = []
    for r, m in roots:
        p = c
        for _ in range(m - 1):
            p = npoly.polyder(p)
        dp = npoly.polyder(p)
        x = r
        for _ in range(30):
            dv = npoly.polyval(x, dp)
            if dv == 0.0:
                break
            step = npoly.polyval(x, p) / dv
            x -= step
            if abs(step) < tol * (1.0 + abs(x)):
                break
        polished.append((x, m))
    polished.sort()
    return polished


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroList:
    """Real zeros of a field's numerator in a window, with multiplicities."""

    roots: tuple[tuple[float, int], ...]
    certified: bool = True

    @property
    def locations(self) -> np.ndarray:
        return np.array([r for r, _ in self.roots])

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([m for _, m in self.roots], dtype=int)

    def __len__(self) -> int:
        return len(self.roots)


@dataclass(frozen=True)
class SignChangeReport:
    count: int
    crossings: tuple[float, ...]
    touch_points: tuple[float, ...]


@dataclass(frozen=True)
class ScalarField:
    """Rational function N/D on an interval, with exact derivative fields.

    Coefficients are ascending; ``domain`` is a closed-below interval whose
    upper end may be +inf.  The denominator must not vanish anywhere on the
    domain (checked at construction).
    """

    num: np.ndarray
    den: np.ndarray = dc_field(default_factory=lambda: np.array([1.0]))
    domain: tuple[float, float] = (-np.inf, np.inf)

    def __post_init__(self):
        object.__setattr__(self, "num", _as_poly(self.num))
        object.__setattr__(self, "den", _as_poly(self.den))
        lo, hi = float(self.domain[0]), float(self.domain[1])
        if not lo < hi:
            raise FieldConstructionError("empty domain [%g, %g]" % (lo, hi))
        object.__setattr__(self, "domain", (lo, hi))
        if poly_is_zero(self.den):
            raise FieldConstructionError("denominator is identically zero")
        for r, _ in self._den_roots():
            if lo - 1e-12 <= r <= hi + 1e-12:
                raise FieldConstructionError(
                    "denominator vanishes at x=%g inside the domain" % r)
        object.__setattr__(self, "_deriv_cache", {})

    def _den_roots(self):
        if poly_degree(self.den) == 0:
            return []
        return real_roots_with_multiplicity(self.den)

    # -- basic queries ------------------------------------------------------

    @property
    def is_identically_zero(self) -> bool:
        return poly_is_zero(self.num)

    @property
    def is_polynomial(self) -> bool:
        return poly_degree(self.den) == 0

    def cauchy_bound(self) -> float:
        return poly_cauchy_bound(self.num)

    def derivative(self, order: int = 1) -> "ScalarField":
        """Exact derivative field of the given order (quotient rule)."""
        if order == 0:
            return self
        if order < 0 or order > 3:
            raise ValueError("derivative order must be in 0..3")
        cache = self._deriv_cache  # type: ignore[attr-defined]
        if order not in cache:
            base = self.derivative(order - 1)
            dn = npoly.polyder(base.num)
            dd = npoly.polyder(base.den)
            num = npoly.polysub(npoly.polymul(dn, base.den),
                                npoly.polymul(base.num, dd))
            den = npoly.polymul(base.den, base.den)
            cache[order] = ScalarField(poly_trim(num, 0.0), poly_trim(den, 0.0),
                                       self.domain)
        return cache[order]

    def _check_domain(self, x):
        lo, hi = self.domain
        xa = np.asarray(x, dtype=float)
        if np.any(xa < lo - 1e-12) or np.any(xa > hi + 1e-12):
            raise DomainError("x outside domain [%g, %g]" % (lo, hi))

    def eval(self, x, order: int = 0):
        """Value of the order-th derivative of N/D at x (scalar or array)."""
        self._check_domain(x)
        return self.eval_unchecked(x, order)

    def eval_unchecked(self, x, order: int = 0):
        f = self.derivative(order)
        xa = np.asarray(x, dtype=float)
        val = npoly.polyval(xa, f.num) / npoly.polyval(xa, f.den)
        return float(val) if np.isscalar(x) or xa.ndim == 0 else val

    def __call__(self, x, order: int = 0):
        return self.eval(x, order)

    # -- arithmetic ---------------------------------------------------------

    def add(self, other: "ScalarField") -> "ScalarField":
        lo = max(self.domain[0], other.domain[0])
        hi = min(self.domain[1], other.domain[1])
        if not lo < hi:
            raise FieldConstructionError("domains do not overlap")
        if _proportional(self.den, other.den):
            ratio = _lead(other.den) / _lead(self.den)
            num = npoly.polyadd(self.num * ratio, other.num)
            den = other.den
        else:
            num = npoly.polyadd(npoly.polymul(self.num, other.den),
                                npoly.polymul(other.num, self.den))
            den = npoly.polymul(self.den, other.den)
        return ScalarField(poly_trim(num, 0.0), poly_trim(den, 0.0), (lo, hi))

    def scaled(self, factor: float) -> "ScalarField":
        return ScalarField(self.num * float(factor), self.den, self.domain)

    def negated(self) -> "ScalarField":
        return self.scaled(-1.0)

    # -- zero analysis ------------------------------------------------------

    def zeros(self, window: Optional[tuple[float, float]] = None,
              tol: float = ROOT_TOL) -> ZeroList:
        """Real zeros of the numerator in window (closed), with multiplicities.

        Unbounded windows are truncated at the Cauchy root bound of the
        numerator, beyond which no roots exist.  An identically-zero
        numerator raises IdenticallyZeroError.
        """
        if tol <= 0:
            raise ValueError("tol must be positive")
        lo, hi = self._window(window)
        if self.is_identically_zero:
            raise IdenticallyZeroError("field is identically zero on its domain")
        roots = real_roots_with_multiplicity(self.num, tol)
        pad = tol * 10
        kept = tuple((r, m) for r, m in roots
                     if lo - pad * (1 + abs(r)) <= r <= hi + pad * (1 + abs(r)))
        return ZeroList(kept)

    def sign_changes(self, window: Optional[tuple[float, float]] = None) -> SignChangeReport:
        """Strict sign alternations on the open window.

        Odd-multiplicity interior zeros are crossings; even-multiplicity
        ones are touch points and do not count.
        """
        lo, hi = self._window(window)
        if self.is_identically_zero:
            raise IdenticallyZeroError("field is identically zero on the window")
        zl = self.zeros((lo, hi))
        crossings, touches = [], []
        for r, m in zl.roots:
            if r <= lo + 1e-12 * (1 + abs(lo)) or r >= hi - 1e-12 * (1 + abs(hi)):
                continue  # endpoint zeros are not interior alternations
            (crossings if m % 2 == 1 else touches).append(r)
        return SignChangeReport(len(crossings), tuple(crossings), tuple(touches))

    def sign_on(self, window: Optional[tuple[float, float]] = None) -> int:
        """Overall sign on the window: +1, -1, or 0 if it changes sign.

        Isolated even-multiplicity zeros do not spoil a definite sign.
        """
        if self.is_identically_zero:
            return 0
        lo, hi = self._window(window)
        rep = self.sign_changes((lo, hi))
        if rep.count > 0:
            return 0
        zl = self.zeros((lo, hi))
        pts = np.sort(np.concatenate([[lo, hi], zl.locations]))
        mids = 0.5 * (pts[:-1] + pts[1:])
        vals = self.eval_unchecked(mids)
        nz = vals[np.abs(vals) > 0]
        if len(nz) == 0:
            return 0
        return int(np.sign(nz[0]))

    def _window(self, window) -> tuple[float, float]:
        lo, hi = self.domain if window is None else (float(window[0]), float(window[1]))
        dlo, dhi = self.domain
        lo, hi = max(lo, dlo), min(hi, dhi)
        bound = self.cauchy_bound() + 1.0
        if not np.isfinite(lo):
            lo = -bound
        if not np.isfinite(hi):
            hi = bound
        if lo > hi:
            lo = hi = min(max(lo, dlo), dhi)
            hi = lo + 1e-12
        return lo, hi

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        lo, hi = self.domain
        return {
            "num": [float(c) for c in self.num],
            "den": [float(c) for c in self.den],
            "domain": [lo if np.isfinite(lo) else "-inf",
                       hi if np.isfinite(hi) else "inf"],
        }

    @staticmethod
    def from_dict(d: dict) -> "ScalarField":
        def end(v, sign):
            if v in ("inf", "+inf"):
                return np.inf
            if v == "-inf":
                return -np.inf
            return float(v)
        lo, hi = d.get("domain", [-np.inf, np.inf])
        return ScalarField(np.array(d["num"], dtype=float),
                           np.array(d.get("den", [1.0]), dtype=float),
                           (end(lo, -1), end(hi, +1)))


def _lead(c: np.ndarray) -> float:
    return float(poly_trim(c, IDENTICALLY_ZERO_TOL)[-1])


def _proportional(a: np.ndarray, b: np.ndarray, tol: float = 1e-12) -> bool:
    a = poly_trim(a, IDENTICALLY_ZERO_TOL)
    b = poly_trim(b, IDENTICALLY_ZERO_TOL)
    if len(a) != len(b):
        return False
    return bool(np.all(np.abs(a / a[-1] - b / b[-1]) <= tol * max(1.0, np.max(np.abs(a / a[-1])))))


def polynomial_field(coeffs: Sequence[float],
                     domain: tuple[float, float] = (-np.inf, np.inf)) -> ScalarField:
    """Convenience constructor for a purely polynomial field."""
    return ScalarField(np.asarray(coeffs, dtype=float), np.array([1.0]), domain)
