import numpy as np
import pytest

from cyclescope import (PiecewiseEquation, constant_multiplier,
                        derivative_discrete, derivative_integral, displacement,
                        displacement_many, knots, normalize, polynomial_field)


def two_piece(f1, f2, T1=0.5, T=1.0, interval=(-20.0, 20.0)):
    return PiecewiseEquation(pieces=(f1, f2), breakpoints=(0.0, T1, T),
                             state_interval=interval)


def test_annulus_identity_map():
    f = polynomial_field([0.0, 1.0])
    eq = two_piece(f, f.scaled(-1.0))
    jd = derivative_discrete(eq, 2.0)
    ji = derivative_integral(eq, 2.0)
    assert jd.value == pytest.approx(2.0, abs=1e-10)
    assert jd.d1 == pytest.approx(1.0, abs=1e-10)
    assert jd.d2 == pytest.approx(0.0, abs=1e-10)
    assert jd.d3 == pytest.approx(0.0, abs=1e-10)
    assert ji.d1 == pytest.approx(1.0, abs=1e-10)
    assert ji.d2 == pytest.approx(0.0, abs=1e-8)
    assert ji.d3 == pytest.approx(0.0, abs=1e-8)


def test_routes_agree_on_random_cubics():
    rng = np.random.default_rng(2)
    tested = 0
    for _ in range(20):
        c1 = np.concatenate([[0.0], rng.uniform(-1, 1, 3)])
        c2 = np.concatenate([[0.0], rng.uniform(-1, 1, 3)])
        eq = two_piece(polynomial_field(c1), polynomial_field(c2))
        for x0 in (-0.4, 0.2, 0.6):
            try:
                kn = knots(eq, x0)
            except Exception:
                continue
            if not kn.in_V:
                continue
            jd = derivative_discrete(eq, x0, kn)
            ji = derivative_integral(eq, x0, kn)
            scale = max(1.0, abs(ji.d1), abs(ji.d2), abs(ji.d3))
            assert abs(jd.d1 - ji.d1) <= 1e-7 * scale
            assert abs(jd.d2 - ji.d2) <= 1e-7 * scale
            assert abs(jd.d3 - ji.d3) <= 1e-6 * scale
            tested += 1
    assert tested >= 20


def test_return_map_derivative_positive():
    rng = np.random.default_rng(5)
    for _ in range(10):
        c1 = np.concatenate([[0.0], rng.uniform(-1, 1, 3)])
        c2 = np.concatenate([[0.0], rng.uniform(-1, 1, 3)])
        eq = two_piece(polynomial_field(c1), polynomial_field(c2))
        try:
            kn = knots(eq, 0.3)
        except Exception:
            continue
        if kn.in_V:
            assert derivative_discrete(eq, 0.3, kn).d1 > 0


def test_derivative_matches_finite_differences():
    f1 = polynomial_field([0.0, 1.0, -1.0], domain=(0.0, np.inf))
    f2 = polynomial_field([-0.1, 1.0, -1.0], domain=(0.0, np.inf))
    eq = PiecewiseEquation(pieces=(f1, f2), breakpoints=(0.0, 1.0, 2.0),
                           state_interval=(0.0, np.inf))
    x0 = 0.5
    jd = derivative_discrete(eq, x0)
    h = 1e-5
    p_plus = knots(eq, x0 + h).end
    p_minus = knots(eq, x0 - h).end
    fd1 = (p_plus - p_minus) / (2 * h)
    assert jd.d1 == pytest.approx(fd1, rel=1e-6)


def test_constant_multiplier_closed_form():
    # common zero at 0: f1 = x(x-1), f2 = 2x(x-2)
    f1 = polynomial_field([0.0, -1.0, 1.0])
    f2 = polynomial_field([0.0, -4.0, 2.0])
    eq = two_piece(f1, f2)
    jet = constant_multiplier(eq, 0.0)
    a = -1.0
    assert jet.d1 == pytest.approx(np.exp(0.5 * (a + (-4.0))), rel=1e-12)
    # second derivative: (f1'' + f2'')(0) * (e^{a/2} - 1)/a
    i2 = (np.exp(a / 2) - 1) / a
    assert jet.d2 == pytest.approx((2.0 + 4.0) * i2, rel=1e-10)


def test_constant_multiplier_limit_a_zero():
    # f1 = x^2, f2 = -x^2 + x^3: f1' + f2' = 0 at 0, I_k -> 1/2
    f1 = polynomial_field([0.0, 0.0, 1.0])
    f2 = polynomial_field([0.0, 0.0, -1.0, 1.0])
    eq = two_piece(f1, f2)
    jet = constant_multiplier(eq, 0.0)
    assert jet.d1 == pytest.approx(1.0, abs=1e-12)
    assert jet.d2 == pytest.approx(0.0, abs=1e-12)
    # (f1''' + f2''')(0) * I_3 = (0 + 6) * 1/2
    assert jet.d3 == pytest.approx(3.0, abs=1e-7)


def test_constant_multiplier_rejects_non_common_zero():
    f1 = polynomial_field([0.0, 1.0])
    f2 = polynomial_field([1.0, 1.0])
    with pytest.raises(ValueError):
        constant_multiplier(two_piece(f1, f2), 0.0)


def test_displacement_vectorized_matches_scalar():
    f1 = polynomial_field([0.0, 1.0, -1.0], domain=(0.0, np.inf))
    f2 = polynomial_field([-0.1, 1.0, -1.0], domain=(0.0, np.inf))
    eq = PiecewiseEquation(pieces=(f1, f2), breakpoints=(0.0, 1.0, 2.0),
                           state_interval=(0.0, np.inf))
    xs = np.array([0.2, 0.5, 0.9])
    many = displacement_many(eq, xs)
    for x, d in zip(xs, many):
        assert d == pytest.approx(displacement(eq, x), abs=1e-12)
