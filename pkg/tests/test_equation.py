import numpy as np
import pytest

from cyclescope import (PiecewiseEquation, normalize, polynomial_field,
                        validate)


def two_piece(f1, f2, T1=0.5, T=1.0, interval=(-5.0, 5.0)):
    return PiecewiseEquation(pieces=(f1, f2), breakpoints=(0.0, T1, T),
                             state_interval=interval)


def test_normalization_scales():
    f = polynomial_field([0.0, 1.0])
    g = polynomial_field([1.0])
    eq = two_piece(f, g, T1=0.5, T=2.0)
    ne = normalize(eq)
    assert ne.scale_factors == pytest.approx((1.0, 3.0))
    assert ne.slot_width == pytest.approx(0.5)
    x = 0.25
    assert ne.pieces[0].eval(x) == pytest.approx(2 * 0.5 * f.eval(x))
    assert ne.pieces[1].eval(x) == pytest.approx(2 * 1.5 * g.eval(x))


def test_normalize_idempotent():
    eq = two_piece(polynomial_field([0.0, 1.0]), polynomial_field([1.0]))
    ne = normalize(eq)
    assert normalize(ne) is ne


def test_bad_breakpoints_flagged():
    f = polynomial_field([1.0])
    eq = PiecewiseEquation(pieces=(f, f), breakpoints=(0.0, 0.7, 0.5),
                           state_interval=(-1.0, 1.0))
    rep = validate(eq)
    assert not rep.ok
    assert any("non-monotone breakpoints" in e for e in rep.errors)


def test_validate_flags_annulus():
    f = polynomial_field([0.0, 1.0])
    eq = two_piece(f, f.scaled(-1.0))
    rep = validate(eq)
    assert rep.annulus
    assert any("annulus" in w for w in rep.warnings)


def test_annulus_detection_respects_durations():
    # f2 = -f1 but unequal durations: the normalized sum is not zero
    f = polynomial_field([0.0, 1.0])
    eq = two_piece(f, f.scaled(-1.0), T1=0.25, T=1.0)
    rep = validate(eq)
    assert not rep.annulus


def test_serialization_round_trip():
    eq = two_piece(polynomial_field([0.0, 1.0, -1.0]),
                   polynomial_field([-0.1, 1.0, -1.0]), T1=1.0, T=2.0,
                   interval=(0.0, np.inf))
    d = eq.to_dict()
    eq2 = PiecewiseEquation.from_dict(d)
    assert eq2.to_dict() == d
    assert eq2.breakpoints == eq.breakpoints


def test_three_piece_normalization():
    fs = tuple(polynomial_field([0.0, float(k + 1)]) for k in range(3))
    eq = PiecewiseEquation(pieces=fs, breakpoints=(0.0, 0.2, 0.5, 1.2),
                           state_interval=(-3.0, 3.0))
    ne = normalize(eq)
    assert ne.n == 3
    assert ne.scale_factors == pytest.approx((0.6, 0.9, 2.1))
