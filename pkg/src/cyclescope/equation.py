"""Piecewise-autonomous periodic equations and their unit-period normal form.

An equation has n autonomous pieces on time slots [T_{i-1}, T_i) covering one
period [0, T].  Normalization rescales piece i by n*(T_i - T_{i-1}) and moves
it to the slot [(i-1)/n, i/n), which leaves the full-period return map
unchanged; every analysis module consumes the normalized form.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .field import (
    IdenticallyZeroError,
    ScalarField,
    ZeroList,
    poly_is_zero,
)

__all__ = [
    "PiecewiseEquation",
    "NormalizedEquation",
    "ValidationError",
    "ValidationReport",
    "normalize",
    "validate",
]


class ValidationError(ValueError):
    """A structural invariant of the equation is violated."""


@dataclass(frozen=True)
class PiecewiseEquation:
    pieces: tuple[ScalarField, ...]
    breakpoints: tuple[float, ...]  # T_0 = 0 < T_1 < ... < T_n = T
    state_interval: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "breakpoints",
                           tuple(float(t) for t in self.breakpoints))
        lo, hi = self.state_interval
        object.__setattr__(self, "state_interval", (float(lo), float(hi)))

    @property
    def n(self) -> int:
        return len(self.pieces)

    @property
    def period(self) -> float:
        return self.breakpoints[-1]

    def to_dict(self) -> dict:
        lo, hi = self.state_interval
        return {
            "period": self.period,
            "breakpoints": list(self.breakpoints),
            "pieces": [p.to_dict() for p in self.pieces],
            "state_interval": [lo if np.isfinite(lo) else "-inf",
                               hi if np.isfinite(hi) else "inf"],
        }

    @staticmethod
    def from_dict(d: dict) -> "PiecewiseEquation":
        def end(v):
            if v in ("inf", "+inf"):
                return np.inf
            if v == "-inf":
                return -np.inf
            return float(v)
        lo, hi = d["state_interval"]
        return PiecewiseEquation(
            tuple(ScalarField.from_dict(p) for p in d["pieces"]),
            tuple(float(t) for t in d["breakpoints"]),
            (end(lo), end(hi)),
        )


@dataclass(frozen=True)
class NormalizedEquation:
    """Unit period, equal slots [(i-1)/n, i/n); piece i is n*(T_i-T_{i-1})*f_i."""

    pieces: tuple[ScalarField, ...]
    scale_factors: tuple[float, ...]
    state_interval: tuple[float, float]

    @property
    def n(self) -> int:
        return len(self.pieces)

    @property
    def slot_width(self) -> float:
        return 1.0 / self.n

    def scan_interval(self, margin: float = 1.0) -> tuple[float, float]:
        """State interval with infinite ends clipped to the Cauchy bound + margin."""
        lo, hi = self.state_interval
        bound = max(p.cauchy_bound() for p in self.pieces) + margin
        if not np.isfinite(lo):
            lo = -bound
        if not np.isfinite(hi):
            hi = bound
        return lo, min(hi, bound) if np.isfinite(hi) else bound

    def piece_sum(self) -> ScalarField:
        total = self.pieces[0]
        for p in self.pieces[1:]:
            total = total.add(p)
        return total


def normalize(eq: PiecewiseEquation | NormalizedEquation) -> NormalizedEquation:
    """Rescale to period 1 with equal slots; return-map values are preserved."""
    if isinstance(eq, NormalizedEquation):
        return eq
    n = eq.n
    widths = np.diff(eq.breakpoints)
    scales = tuple(float(n * w) for w in widths)
    pieces = tuple(p.scaled(s) for p, s in zip(eq.pieces, scales))
    return NormalizedEquation(pieces, scales, eq.state_interval)


@dataclass
class ValidationReport:
    ok: bool
    errors: list[str] = dc_field(default_factory=list)
    warnings: list[str] = dc_field(default_factory=list)
    zero_lists: list[Optional[ZeroList]] = dc_field(default_factory=list)
    annulus: bool = False

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "errors": list(self.errors),
            "warnings": list(self.warnings),
            "annulus": self.annulus,
            "piece_zeros": [
                None if zl is None else [[r, m] for r, m in zl.roots]
                for zl in self.zero_lists
            ],
        }


def validate(eq: PiecewiseEquation) -> ValidationReport:
    """Check structural invariants and report per-piece zero lists.

    For n = 2, an identically-zero piece sum is flagged as a periodic
    annulus (every orbit closes; no limit cycles exist).
    """
    report = ValidationReport(ok=True)
    if len(eq.pieces) < 1:
        report.errors.append("equation needs at least one piece")
    bp = np.asarray(eq.breakpoints)
    if len(bp) != len(eq.pieces) + 1:
        report.errors.append("breakpoints must have length n+1")
    else:
        if abs(bp[0]) > 1e-15:
            report.errors.append("breakpoints must start at 0")
        if np.any(np.diff(bp) <= 0):
            report.errors.append("non-monotone breakpoints")
    lo, hi = eq.state_interval
    if not lo < hi:
        report.errors.append("empty state interval")

    for i, p in enumerate(eq.pieces):
        plo, phi = p.domain
        if plo > lo + 1e-12 or phi < hi - 1e-12:
            report.errors.append(
                "piece %d domain [%g, %g] does not cover the state interval" % (i + 1, plo, phi))
    if report.errors:
        report.ok = False
        return report

    for i, p in enumerate(eq.pieces):
        if p.is_identically_zero:
            report.zero_lists.append(None)
            report.warnings.append("piece %d is identically zero" % (i + 1))
            continue
        try:
            report.zero_lists.append(p.zeros((lo, hi)))
        except IdenticallyZeroError:
            report.zero_lists.append(None)

    if eq.n == 2:
        norm = normalize(eq)
        total = norm.pieces[0].add(norm.pieces[1])
        scale = max(float(np.max(np.abs(p.num))) for p in norm.pieces)
        if poly_is_zero(total.num, reference=scale):
            report.annulus = True
            report.warnings.append(
                "f1 + f2 is identically zero: periodic annulus, no limit cycles")
    return report
