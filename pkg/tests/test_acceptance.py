"""Acceptance gate: eight end-to-end criteria, one pass/fail line each.

Run with `pytest -s tests/test_acceptance.py` to see the lines as they
complete.  Every criterion is also a normal pytest assertion.
"""

import math
import os
import time
from contextlib import contextmanager

import numpy as np
import pytest

from cyclescope import (AbelSpec, HarvestSpec, MosquitoSpec, PiecewiseEquation,
                        RotatedFamily, ScalarField, abel_model,
                        annulus_integral, constant_multiplier,
                        derivative_discrete, derivative_integral, find_cycles,
                        harvesting_model, knots, mosquito_long_wait,
                        mosquito_short_wait, normalize, partition,
                        polynomial_field, rk_flow, saddle_node_threshold,
                        step_map, t_triple_star)
from cyclescope.cycles import InternalConsistencyError
from cyclescope.flow import StepStatus
from cyclescope.poincare import NotInDomain

SEED = int(os.environ.get("CYCLESCOPE_SEED", "12345"))


@contextmanager
def criterion(num: int, label: str):
    start = time.time()
    try:
        yield
    except Exception:
        print("criterion %d (%s): FAIL after %.1fs" % (num, label,
                                                       time.time() - start))
        raise
    print("criterion %d (%s): PASS in %.1fs" % (num, label,
                                                time.time() - start))


def random_abel(rng, interval=(-30.0, 30.0)):
    c1 = np.concatenate([[0.0], rng.uniform(-1, 1, 3)])
    c2 = np.concatenate([[0.0], rng.uniform(-1, 1, 3)])
    return PiecewiseEquation(pieces=(polynomial_field(c1), polynomial_field(c2)),
                             breakpoints=(0.0, 0.5, 1.0),
                             state_interval=interval)


def harvesting(h):
    spec = HarvestSpec(g=polynomial_field([0.0, 1.0, -1.0], domain=(0.0, np.inf)),
                       h=h, T=2.0, T1=1.0)
    return harvesting_model(spec)[0]


def fd_jet(ne, x0, h):
    """Return-map derivatives from Richardson-extrapolated central stencils.

    Stencils are evaluated on a halving ladder of steps starting at h; each
    consecutive pair is Richardson extrapolated and, per derivative order,
    the most self-consistent pair wins. Step-size selection keeps truncation
    small on stiff samples without letting round-off dominate at tiny steps.
    """
    def P(x):
        return knots(ne, x).end

    def stencils(hh):
        pm2, pm1, pp1, pp2 = P(x0 - 2 * hh), P(x0 - hh), P(x0 + hh), P(x0 + 2 * hh)
        p0 = P(x0)
        d1 = (pp1 - pm1) / (2 * hh)
        d2 = (pp1 - 2 * p0 + pm1) / (hh * hh)
        d3 = (pp2 - 2 * pp1 + 2 * pm1 - pm2) / (2 * hh ** 3)
        return np.array([d1, d2, d3])

    ladder = np.array([stencils(h * 0.5 ** k) for k in range(6)])
    rich = (4 * ladder[1:] - ladder[:-1]) / 3
    gaps = np.abs(np.diff(rich, axis=0))
    pick = np.argmin(gaps, axis=0)
    return rich[pick + 1, np.arange(3)]


# ---------------------------------------------------------------------------
# 1. derivative route agreement
# ---------------------------------------------------------------------------

def test_criterion_1_route_agreement():
    with criterion(1, "derivative route agreement"):
        rng = np.random.default_rng(SEED)
        tested = 0
        for _ in range(100):
            eq = random_abel(rng)
            ne = normalize(eq)
            for x0 in rng.uniform(-0.8, 0.8, 4):
                try:
                    kn = knots(ne, x0)
                except NotInDomain:
                    continue
                if not kn.in_V:
                    continue
                jd = derivative_discrete(ne, x0, kn)
                ji = derivative_integral(ne, x0, kn)
                assert abs(jd.d1 - ji.d1) / max(1, abs(ji.d1)) <= 1e-6
                assert abs(jd.d2 - ji.d2) / max(1, abs(ji.d2)) <= 1e-6
                assert abs(jd.d3 - ji.d3) / max(1, abs(ji.d3)) <= 1e-5
                h = 0.02 * (1.0 + abs(x0))
                try:
                    fd = fd_jet(ne, x0, h)
                except NotInDomain:
                    continue
                assert abs(jd.d1 - fd[0]) / max(1, abs(fd[0])) <= 1e-5
                assert abs(jd.d2 - fd[1]) / max(1, abs(fd[1])) <= 1e-5
                assert abs(jd.d3 - fd[2]) / max(1, abs(fd[2])) <= 1e-5
                tested += 1
        assert tested >= 100


# ---------------------------------------------------------------------------
# 2. harvesting reproduction
# ---------------------------------------------------------------------------

def test_criterion_2_harvesting():
    with criterion(2, "harvesting fold reproduction"):
        low = [c for c in find_cycles(harvesting(0.10)) if c.kind == "non-constant"]
        assert len(low) == 2
        assert low[0].stability == "unstable" and low[1].stability == "stable"
        assert find_cycles(harvesting(0.60)) == []

        fam = RotatedFamily(builder=harvesting, alpha_range=(0.05, 0.6))
        h1, merged1 = saddle_node_threshold(fam, (0.25, 0.5), window=(0.0, 1.0),
                                            grid=1024)
        h2, merged2 = saddle_node_threshold(fam, (0.25, 0.5), window=(0.0, 1.0),
                                            grid=2048)
        assert 0.25 < h1 < 0.5
        assert abs(h1 - h2) <= 1e-7
        assert abs(merged1.jet.d1 - 1.0) <= 1e-7
        assert merged1.jet.d2 < 0


# ---------------------------------------------------------------------------
# 3. Abel bound and sharpness
# ---------------------------------------------------------------------------

def test_criterion_3_abel_bound():
    with criterion(3, "cubic bound and sharpness"):
        spec = AbelSpec(a1=1, b1=-3, c1=2, a2=1, b2=-3, c2=2)
        eq, _ = abel_model(spec, state_interval=(-5.0, 5.0))
        cycles = find_cycles(eq)
        assert len(cycles) == 3
        assert all(c.kind == "constant" and c.multiplicity == 1 for c in cycles)

        rng = np.random.default_rng(SEED + 1)
        for trial in range(1000):
            eq = random_abel(rng)
            try:
                cycles = find_cycles(eq)
            except InternalConsistencyError:
                raise AssertionError("internal consistency alarm at trial %d"
                                     % trial)
            total = sum(c.multiplicity for c in cycles)
            assert total <= 3, (trial, total)


# ---------------------------------------------------------------------------
# 4. mosquito long-wait
# ---------------------------------------------------------------------------

def test_criterion_4_mosquito_long():
    with criterion(4, "long-wait release regimes"):
        base = dict(a=2, mu=1, xi=1, Tbar=1.0)
        _, th = mosquito_long_wait(MosquitoSpec(c=0.5, T=2.0, **base))
        assert th["g_star"] == 0.125
        assert th["c_star"] == pytest.approx(math.sqrt(3) - 1, abs=1e-14)
        assert th["T_star"] == pytest.approx(2.5, abs=1e-14)

        eq, th = mosquito_long_wait(MosquitoSpec(c=0.1, T=1.5, **base))
        cycles = find_cycles(eq)
        nc = [c for c in cycles if c.kind == "non-constant"]
        e0 = [c for c in cycles if c.kind == "constant"][0]
        assert len(nc) == 2
        assert e0.stability == "stable"
        assert e0.jet.d1 == pytest.approx(
            math.exp(1.5 - th["T_star"]), abs=1e-8)

        eq3, _ = mosquito_long_wait(MosquitoSpec(c=0.1, T=3.0, **base))
        cycles3 = find_cycles(eq3)
        nc3 = [c for c in cycles3 if c.kind == "non-constant"]
        e03 = [c for c in cycles3 if c.kind == "constant"][0]
        assert len(nc3) == 1
        assert nc3[0].stability == "stable"
        assert e03.jet.d1 > 1


# ---------------------------------------------------------------------------
# 5. mosquito short-wait
# ---------------------------------------------------------------------------

def _nc_count(eq):
    return len([c for c in find_cycles(eq) if c.kind == "non-constant"])


def test_criterion_5_mosquito_short():
    with criterion(5, "short-wait release regimes"):
        base = dict(a=2, mu=1, xi=1, Tbar=1.0)
        _, th = mosquito_short_wait(MosquitoSpec(c=0.09, T=0.6, **base))
        assert th["g1_star"] == 0.0625
        assert th["g2_star"] == 0.125

        eq_low, _ = mosquito_short_wait(MosquitoSpec(c=0.04, T=0.6, **base))
        assert _nc_count(eq_low) == 2
        eq_high, _ = mosquito_short_wait(MosquitoSpec(c=0.2, T=0.6, **base))
        assert _nc_count(eq_high) == 0

        # spot-check one trajectory against the independent integrator
        ne = normalize(eq_low)
        kn = knots(ne, 0.3)
        w = 0.3
        for piece, target in zip(ne.pieces, kn.values[1:]):
            w = rk_flow(piece, w, 0.5, tol=1e-12)
            assert w == pytest.approx(target, rel=1e-8, abs=1e-8)

        # T*** separates no-cycle and at-most-two regimes at c = 0.09
        for T in (0.3, 0.45, 0.6, 0.75, 0.9):
            spec = MosquitoSpec(c=0.09, T=T, **base)
            t3 = t_triple_star(spec)
            eq, _ = mosquito_short_wait(spec)
            n = _nc_count(eq)
            if T < t3:
                assert n == 0, (T, t3, n)
            elif T > t3:
                assert n <= 2, (T, t3, n)


# ---------------------------------------------------------------------------
# 6. procedure soundness
# ---------------------------------------------------------------------------

def test_criterion_6_procedure_soundness():
    with criterion(6, "count bounds, alternation, periodicity certificate"):
        base = dict(a=2, mu=1, xi=1, Tbar=1.0)
        instances = [
            harvesting(0.10),
            harvesting(0.30),
            mosquito_long_wait(MosquitoSpec(c=0.1, T=1.5, **base))[0],
            mosquito_long_wait(MosquitoSpec(c=0.1, T=3.0, **base))[0],
            mosquito_short_wait(MosquitoSpec(c=0.04, T=0.6, **base))[0],
            mosquito_short_wait(MosquitoSpec(c=0.09, T=0.99, **base))[0],
        ]
        rng = np.random.default_rng(SEED + 2)
        for _ in range(25):
            instances.append(random_abel(rng))
        for eq in instances:
            ne = normalize(eq)
            try:
                rep = partition(ne)
            except Exception:
                continue
            cycles = find_cycles(ne)  # raises the consistency alarm itself
            for iv in rep.intervals:
                inside = [c for c in cycles
                          if c.kind == "non-constant" and iv.contains(c.x0)]
                if iv.verdict == "none":
                    assert inside == []
                elif iv.verdict.startswith("at-most-one"):
                    assert len(inside) <= 1
            hyper = [c for c in cycles if c.multiplicity == 1]
            for a, b in zip(hyper[:-1], hyper[1:]):
                assert a.stability != b.stability
            for c in cycles:
                if c.kind == "non-constant":
                    assert abs(annulus_integral(ne, c.x0)) <= 1e-8


# ---------------------------------------------------------------------------
# 7. normalization
# ---------------------------------------------------------------------------

def _original_return_map(eq, x0):
    """Chain the un-normalized pieces over their true durations."""
    x = x0
    for piece, a, b in zip(eq.pieces, eq.breakpoints[:-1], eq.breakpoints[1:]):
        out = step_map(piece, x, b - a)
        if out.status not in (StepStatus.OK, StepStatus.EQUILIBRIUM):
            return None
        x = out.end_value
    return x


def test_criterion_7_normalization():
    with criterion(7, "period normalization invariance"):
        rng = np.random.default_rng(SEED + 3)
        agreed = 0
        for layout in range(20):
            n = int(rng.integers(2, 5))
            T = float(rng.uniform(0.5, 3.0))
            cuts = np.sort(rng.uniform(0.05, 0.95, n - 1)) * T
            breakpoints = tuple([0.0] + list(cuts) + [T])
            pieces = tuple(
                polynomial_field(np.concatenate([[0.0], rng.uniform(-1, 1, 3)]))
                for _ in range(n))
            eq = PiecewiseEquation(pieces=pieces, breakpoints=breakpoints,
                                   state_interval=(-30.0, 30.0))
            ne = normalize(eq)
            xs = rng.uniform(-0.7, 0.7, 200)
            for x0 in xs:
                direct = _original_return_map(eq, x0)
                if direct is None:
                    continue
                try:
                    via_normalized = knots(ne, x0).end
                except NotInDomain:
                    continue
                assert abs(direct - via_normalized) <= 1e-9 * (1 + abs(direct))
                agreed += 1
        assert agreed >= 1000


# ---------------------------------------------------------------------------
# 8. appendix regression facts
# ---------------------------------------------------------------------------

def test_criterion_8_appendix_facts():
    with criterion(8, "appendix regression facts"):
        base = dict(a=2, mu=1, xi=1, Tbar=1.0)

        # reduced sum G = (h1 + h2)/(2w): same zeros and sign as h1 + h2
        spec = MosquitoSpec(c=0.1, T=1.5, **base)
        eq, th = mosquito_long_wait(spec)
        ne = normalize(eq)
        total = ne.pieces[0].add(ne.pieces[1])
        g_num = np.asarray(total.num, dtype=float)[1:] / 2.0  # drop the w factor
        G = ScalarField(num=g_num, den=total.den, domain=total.domain)
        ws = np.linspace(1e-6, 3.0, 500)
        sv_total = np.sign(total.eval_unchecked(ws))
        sv_G = np.sign(G.eval_unchecked(ws))
        assert np.array_equal(sv_total, sv_G)
        zt = sorted(r for r, _ in total.zeros((1e-9, 10.0)).roots if r > 1e-9)
        zg = sorted(r for r, _ in G.zeros((1e-9, 10.0)).roots if r > 1e-9)
        assert np.allclose(zt, zg, atol=1e-8)

        # at the critical pair (T*, c*), G'(0) vanishes
        a, mu, xi = base["a"], base["mu"], base["xi"]
        c_star = (-a + math.sqrt(a * a + 4 * a * (a - mu))) / (2 * xi)
        spec_c = MosquitoSpec(c=c_star, T=2.0, **base)
        _, th_c = mosquito_long_wait(spec_c)
        t_star = th_c["T_star"]
        eq_c, _ = mosquito_long_wait(MosquitoSpec(c=c_star, T=t_star, **base))
        ne_c = normalize(eq_c)
        tot_c = ne_c.pieces[0].add(ne_c.pieces[1])
        g_c = ScalarField(num=np.asarray(tot_c.num, dtype=float)[1:] / 2.0,
                          den=tot_c.den, domain=tot_c.domain)
        assert abs(g_c.eval(0.0, order=1)) <= 1e-10

        # short-wait (f): with c <= g1*, the zeros mu1, mu2 of h1 + h2 sit
        # between the per-piece zero pairs
        spec_f = MosquitoSpec(c=0.04, T=0.6, **base)
        eq_f, _ = mosquito_short_wait(spec_f)
        ne_f = normalize(eq_f)
        h1, h2 = ne_f.pieces
        l11, l12 = sorted(r for r, _ in h1.zeros((1e-9, 10.0)).roots if r > 1e-9)
        l21, l22 = sorted(r for r, _ in h2.zeros((1e-9, 10.0)).roots if r > 1e-9)
        tot_f = h1.add(h2)
        mus = sorted(r for r, _ in tot_f.zeros((1e-9, 10.0)).roots if r > 1e-9)
        assert len(mus) == 2
        assert l21 < mus[0] < l11
        assert l12 < mus[1] < l22

        # short-wait (g.1): with g1* < c < g2* and T <= T***, h1 + h2 <= 0
        spec_g = MosquitoSpec(c=0.09, T=0.6, **base)
        t3 = t_triple_star(spec_g)
        assert spec_g.T <= t3
        eq_g, _ = mosquito_short_wait(spec_g)
        ne_g = normalize(eq_g)
        tot_g = ne_g.pieces[0].add(ne_g.pieces[1])
        ws = np.linspace(1e-9, 5.0, 4096)
        assert np.all(tot_g.eval_unchecked(ws) <= 1e-12)
