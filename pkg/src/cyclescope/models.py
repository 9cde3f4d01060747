"""Preset application models: seasonal harvesting, cubic two-season
equations, and periodic-release mosquito suppression.

Each builder returns the piecewise equation together with its closed-form
thresholds, so downstream analysis (partition, cycle search, continuation)
can be cross-checked against the analytic predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equation import PiecewiseEquation
from .field import ScalarField, polynomial_field

__all__ = [
    "SpecError",
    "WrongStrategyError",
    "HarvestSpec",
    "AbelSpec",
    "MosquitoSpec",
    "harvesting_model",
    "abel_model",
    "mosquito_long_wait",
    "mosquito_short_wait",
    "cherkas_transform",
    "classify_regime",
    "t_triple_star",
]


class SpecError(ValueError):
    """A model specification violates its hypotheses."""


class WrongStrategyError(SpecError):
    """Waiting period on the wrong side of the sexual lifespan."""


# ---------------------------------------------------------------------------
# harvesting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HarvestSpec:
    """Growth law g, constant yield h on the harvesting season, and the
    season layout 0 < T1 < T (growth on [0, T1), harvesting on [T1, T))."""
    g: ScalarField
    h: float
    T: float
    T1: float

    def __post_init__(self):
        if not (self.T > self.T1 > 0):
            raise SpecError("need T > T1 > 0")
        if self.h < 0:
            raise SpecError("yield h must be non-negative")


def _verify_growth_hypotheses(g: ScalarField):
    """g(0) = g(K) = 0, a unique interior critical point k0 with g' > 0
    below and g' < 0 above.  Returns (k0, K)."""
    if abs(g.eval_unchecked(0.0)) > 1e-12:
        raise SpecError("growth hypothesis violated: g(0) != 0")
    pos = [r for r, _ in g.zeros().roots if r > 1e-12]
    if not pos:
        raise SpecError("growth hypothesis violated: no positive zero K of g")
    K = min(pos)
    gp = g.derivative(1)
    crit = [r for r, _ in gp.zeros().roots if 0 < r < K]
    if len(crit) != 1:
        raise SpecError(
            "growth hypothesis violated: g' must have exactly one zero in "
            "(0, K), found %d" % len(crit))
    k0 = crit[0]
    if abs(gp.eval_unchecked(0.0)) <= 1e-12:
        raise SpecError("growth hypothesis violated: g'(0) = 0, "
                        "g' must be positive on [0, k0)")
    if gp.sign_on((0.0, k0)) != 1:
        raise SpecError("growth hypothesis violated: g' not positive on [0, k0)")
    hi = g.cauchy_bound() + 1.0
    if gp.sign_on((k0, max(hi, K + 1.0))) != -1:
        raise SpecError("growth hypothesis violated: g' not negative beyond k0")
    return k0, K


def harvesting_model(spec: HarvestSpec):
    """Two-piece harvesting equation plus its yield thresholds.

    h* = g(k0) is the fold of the unharvested season's graph; the maximum
    sustainable yield lies in (h*, T/(T-T1) * h*).
    """
    k0, K = _verify_growth_hypotheses(spec.g)
    h_star = float(spec.g.eval_unchecked(k0))
    lo, hi = spec.g.domain
    dom = (lo, hi)
    f1 = ScalarField(num=spec.g.num, den=spec.g.den, domain=dom)
    harvested_num = np.array(spec.g.num, dtype=float).copy()
    # subtract h * den from the numerator: f2 = g - h
    den = np.asarray(spec.g.den, dtype=float)
    pad = max(len(harvested_num), len(den))
    num2 = np.zeros(pad)
    num2[:len(harvested_num)] = harvested_num
    num2[:len(den)] -= spec.h * den
    f2 = ScalarField(num=num2, den=spec.g.den, domain=dom)
    eq = PiecewiseEquation(pieces=(f1, f2),
                           breakpoints=(0.0, spec.T1, spec.T),
                           state_interval=(0.0, np.inf))
    bracket = (h_star, spec.T / (spec.T - spec.T1) * h_star)
    thresholds = {"h_star": h_star, "k0": k0, "K": K, "msy_bracket": bracket}
    return eq, thresholds


# ---------------------------------------------------------------------------
# cubic two-season equations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AbelSpec:
    """Two cubic pieces a_i x^3 + b_i x^2 + c_i x and the season layout."""
    a1: float
    b1: float
    c1: float
    a2: float
    b2: float
    c2: float
    T: float = 1.0
    T1: float = 0.5

    def __post_init__(self):
        if not (self.T > self.T1 > 0):
            raise SpecError("need T > T1 > 0")

    @property
    def determinants(self) -> dict:
        A = self.a1 * self.b2 - self.a2 * self.b1
        B = self.c1 * self.a2 - self.c2 * self.a1
        C = self.c1 * self.b2 - self.c2 * self.b1
        return {"A": A, "B": B, "C": C}


def abel_model(spec: AbelSpec, state_interval=(-np.inf, np.inf)):
    f1 = polynomial_field([0.0, spec.c1, spec.b1, spec.a1])
    f2 = polynomial_field([0.0, spec.c2, spec.b2, spec.a2])
    eq = PiecewiseEquation(pieces=(f1, f2),
                           breakpoints=(0.0, spec.T1, spec.T),
                           state_interval=state_interval)
    return eq, spec.determinants


# ---------------------------------------------------------------------------
# mosquito suppression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MosquitoSpec:
    """Release model parameters: birth rate a, density-independent death mu,
    density-dependent death xi, release amount c, waiting period T and
    sexual lifespan Tbar."""
    a: float
    mu: float
    xi: float
    c: float
    T: float
    Tbar: float

    def __post_init__(self):
        if min(self.a, self.mu, self.xi, self.c, self.T, self.Tbar) <= 0:
            raise SpecError("all parameters must be positive")
        if self.a <= self.mu:
            raise SpecError("need birth rate a > death rate mu")

    @property
    def A(self) -> float:
        return (self.a - self.mu) / self.xi

    @property
    def long_wait(self) -> bool:
        return self.T > self.Tbar

    @property
    def p(self) -> int:
        return int(math.floor(self.Tbar / self.T))

    @property
    def q(self) -> float:
        return self.Tbar - self.p * self.T


def _release_piece(a, mu, xi, ceff, dom) -> ScalarField:
    """w * (a w / (w + ceff) - mu - xi (w + ceff)) as a rational field."""
    # numerator of the bracket over (w + ceff):
    #   -xi w^2 + (a - mu - 2 xi ceff) w - (mu + xi ceff) ceff
    bracket = np.array([-(mu + xi * ceff) * ceff, a - mu - 2 * xi * ceff, -xi])
    num = np.concatenate([[0.0], bracket])   # multiply by w
    return ScalarField(num=num, den=np.array([ceff, 1.0]), domain=dom)


def mosquito_long_wait(spec: MosquitoSpec):
    """Equation for releases outliving a full waiting period (T > Tbar),
    plus the release and waiting-period thresholds."""
    if not spec.long_wait:
        raise WrongStrategyError("long-wait form needs T > Tbar")
    a, mu, xi, c = spec.a, spec.mu, spec.xi, spec.c
    dom = (-c / 2.0, np.inf)
    h1 = _release_piece(a, mu, xi, c, dom)
    h2 = ScalarField(num=np.array([0.0, xi * spec.A, -xi]),
                     den=np.array([1.0]), domain=(-np.inf, np.inf))
    eq = PiecewiseEquation(pieces=(h1, h2),
                           breakpoints=(0.0, spec.Tbar, spec.T),
                           state_interval=(0.0, np.inf))
    g_star = (a - mu) ** 2 / (4 * xi * a)
    c_star = (-a + math.sqrt(a * a + 4 * a * (a - mu))) / (2 * xi)
    t_star = (a + xi * c) / (a - mu) * spec.Tbar
    if not g_star < c_star:
        raise SpecError("internal threshold ordering violated: g* >= c*")
    return eq, {"g_star": g_star, "c_star": c_star, "T_star": t_star}


def _hat_piece(a, mu, xi, ceff):
    """hat h(w) = -xi (w + ceff)^2 - mu (w + ceff) + a w (ascending)."""
    return np.array([-xi * ceff * ceff - mu * ceff,
                     a - mu - 2 * xi * ceff, -xi])


def t_triple_star(spec: MosquitoSpec, grid: int = 4096) -> float:
    """Waiting-period threshold for short-wait releases.

    Zero outside g1* < c < g2*; otherwise the infimum over the positive
    zeros interval of hat h2 of q (1 - (w + pc)/(w + (p+1)c) *
    hat h1(w)/hat h2(w)), located by a dense grid plus golden-section
    refinement.
    """
    a, mu, xi, c, p, q = spec.a, spec.mu, spec.xi, spec.c, spec.p, spec.q
    g1 = (a - mu) ** 2 / (4 * a * (p + 1) * xi)
    g2 = (a - mu) ** 2 / (4 * a * p * xi)
    if not (g1 < c < g2):
        return 0.0
    hat1 = _hat_piece(a, mu, xi, (p + 1) * c)
    hat2 = _hat_piece(a, mu, xi, p * c)
    r = np.sort(np.roots(hat2[::-1]).real)
    l21, l22 = float(r[0]), float(r[1])

    def objective(w):
        v1 = np.polynomial.polynomial.polyval(w, hat1)
        v2 = np.polynomial.polynomial.polyval(w, hat2)
        return q * (1.0 - (w + p * c) / (w + (p + 1) * c) * v1 / v2)

    pad = 1e-8 * (l22 - l21)
    lo, hi = l21 + pad, l22 - pad
    ws = np.linspace(lo, hi, grid)
    vals = objective(ws)
    j = int(np.argmin(vals))
    aa = ws[max(j - 1, 0)]
    bb = ws[min(j + 1, grid - 1)]
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    c1 = bb - gr * (bb - aa)
    c2 = aa + gr * (bb - aa)
    f1v, f2v = objective(c1), objective(c2)
    while bb - aa > 1e-10:
        if f1v < f2v:
            bb, c2, f2v = c2, c1, f1v
            c1 = bb - gr * (bb - aa)
            f1v = objective(c1)
        else:
            aa, c1, f1v = c1, c2, f2v
            c2 = aa + gr * (bb - aa)
            f2v = objective(c2)
    return float(objective(0.5 * (aa + bb)))


def mosquito_short_wait(spec: MosquitoSpec):
    """Equation for releases spanning p full waiting periods plus a remainder
    q (T < Tbar), with the release thresholds and the waiting threshold."""
    if spec.long_wait:
        raise WrongStrategyError("short-wait form needs T < Tbar")
    a, mu, xi, c, p, q = spec.a, spec.mu, spec.xi, spec.c, spec.p, spec.q
    if q <= 0:
        raise SpecError("degenerate layout: Tbar is an exact multiple of T, "
                        "the equation collapses to a single piece")
    dom1 = (-(p + 1) * c / 2.0, np.inf)
    dom2 = (-p * c / 2.0, np.inf)
    h1 = _release_piece(a, mu, xi, (p + 1) * c, dom1)
    h2 = _release_piece(a, mu, xi, p * c, dom2)
    eq = PiecewiseEquation(pieces=(h1, h2),
                           breakpoints=(0.0, q, spec.T),
                           state_interval=(0.0, np.inf))
    g1 = (a - mu) ** 2 / (4 * a * (p + 1) * xi)
    g2 = (a - mu) ** 2 / (4 * a * p * xi)
    return eq, {"g1_star": g1, "g2_star": g2,
                "lambda_star": (a * a - mu * mu) / (4 * a * xi),
                "T_triple_star": t_triple_star(spec)}


def cherkas_transform(spec: MosquitoSpec) -> AbelSpec:
    """Cubic form of the long-wait equation under x = w / (w + c), x in [0, 1).

    First piece -Tbar-season: -(a x^3 - (a + mu) x^2 + (mu + xi c) x);
    second: -xi ((A + c) x - A) x.
    """
    if not spec.long_wait:
        raise WrongStrategyError("the transform applies to the long-wait form")
    a, mu, xi, c = spec.a, spec.mu, spec.xi, spec.c
    A = spec.A
    return AbelSpec(a1=-a, b1=a + mu, c1=-(mu + xi * c),
                    a2=0.0, b2=-xi * (A + c), c2=xi * A,
                    T=spec.T, T1=spec.Tbar)


# ---------------------------------------------------------------------------
# regime classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeVerdict:
    row: str
    column: str
    verdict: str

    def to_dict(self) -> dict:
        return {"row": self.row, "column": self.column, "verdict": self.verdict}


EXACT_TWO = "exact two NC limit cycles + E0 LAS"
AT_MOST_TWO = "at most two NC limit cycles + E0 LAS"
E0_GAS = "E0 GAS"
UNIQUE_GAS_NC = "unique GAS NC limit cycle + E0 US"


def classify_regime(spec: MosquitoSpec) -> RegimeVerdict:
    """Analytic (T, c) cell verdict for either release strategy."""
    if spec.T == spec.Tbar:
        raise WrongStrategyError("T = Tbar sits between the two strategies")
    if spec.long_wait:
        _, th = mosquito_long_wait(spec)
        g_s, c_s, t_s = th["g_star"], th["c_star"], th["T_star"]
        if spec.c <= g_s:
            col = "c <= g*"
        elif spec.c < c_s:
            col = "g* < c < c*"
        else:
            col = "c >= c*"
        if spec.T < t_s:
            row = "Tbar < T < T*"
        elif spec.T == t_s:
            row = "T = T*"
        else:
            row = "T > T*"
        if spec.T > t_s:
            verdict = UNIQUE_GAS_NC
        elif spec.T == t_s:
            verdict = E0_GAS if spec.c >= c_s else UNIQUE_GAS_NC
        else:
            if spec.c <= g_s:
                verdict = EXACT_TWO
            elif spec.c < c_s:
                verdict = AT_MOST_TWO
            else:
                verdict = E0_GAS
        return RegimeVerdict(row=row, column=col, verdict=verdict)

    _, th = mosquito_short_wait(spec)
    g1, g2, t3 = th["g1_star"], th["g2_star"], th["T_triple_star"]
    if spec.c <= g1:
        col = "c <= g1*"
    elif spec.c < g2:
        col = "g1* < c < g2*"
    else:
        col = "c >= g2*"
    if spec.T < t3:
        row = "0 < T < T***"
    elif spec.T == t3:
        row = "T = T***"
    else:
        row = "T*** < T < Tbar"
    if spec.c <= g1:
        verdict = EXACT_TWO
    elif spec.c < g2:
        verdict = E0_GAS if spec.T <= t3 else AT_MOST_TWO
    else:
        verdict = E0_GAS
    return RegimeVerdict(row=row, column=col, verdict=verdict)
