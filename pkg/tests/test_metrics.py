from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cayleylab.algebra import Cyclic, DirectProduct
from cayleylab.families import cyclic, direct_product_marking, selberg, slz_markings, sym3
from cayleylab.marked import FiniteCayley, MarkedGroup
from cayleylab.metrics import (
    TOL, ControlPair, EuclideanSpace, GraphMetric, NoFolnerSetFound, PiecewiseLinear,
    ScaleNonPositive, check_sandwich, choose_folner, folner_ratio, folner_search,
    girth_diameter, lq_norm, lq_product, measure_control_pair, neighbourhood, uniform_scale,
)


# ---------------------------------------------------------------------------
# l_q norms and scaled products

def test_lq_norm_examples():
    assert lq_norm([3, 4], 2) == 5
    assert lq_norm([3, -4], 1) == 7
    assert lq_norm([3, -4], math.inf) == 4
    assert lq_norm([-2.5], 3) == 2.5
    assert lq_norm([1, 1, 1, 1], 4) == pytest.approx(math.sqrt(2))


def test_scale_must_be_positive():
    X = EuclideanSpace(1)
    with pytest.raises(ScaleNonPositive):
        lq_product([X, X], [(0.0,), (0.0,)], [1.0, 0.0], 2)
    with pytest.raises(ValueError):
        lq_product([X], [(0.0,)], [1.0], 0.5)


@pytest.mark.parametrize("q", [1, 2, 3])
def test_uniform_diagonal_is_isometric(q):
    X = EuclideanSpace(2, 2.0)
    n = 4
    P = lq_product([X] * n, [X.origin()] * n, [uniform_scale(n, q)] * n, q)
    assert P.diagonal_is_isometric()
    rnd = random.Random(q)
    for _ in range(50):
        a = (rnd.uniform(-5, 5), rnd.uniform(-5, 5))
        b = (rnd.uniform(-5, 5), rnd.uniform(-5, 5))
        assert P.dist(P.diagonal(a), P.diagonal(b)) == pytest.approx(X.dist(a, b), abs=1e-12)
    assert not lq_product([X] * n, [X.origin()] * n, [1.0] * n, q).diagonal_is_isometric()


def _product_of_cycles(q):
    spaces = [GraphMetric(FiniteCayley(cyclic(m))) for m in (5, 7, 8)]
    scales = [Fraction(1, 2), Fraction(2, 3), Fraction(3)]
    return lq_product(spaces, [0, 0, 0], scales, q)


def test_scaled_product_triangle_inequality_exact():
    pts = list(itertools.product(range(5), range(7), range(8)))
    rnd = random.Random(0)
    sample = rnd.sample(pts, 40)
    P1, P2 = _product_of_cycles(1), _product_of_cycles(2)
    for x, y, z in itertools.combinations(sample, 3):
        for a, b, c in ((x, y, z), (y, z, x), (z, x, y)):
            assert P1.dist_power(a, c) <= P1.dist_power(a, b) + P1.dist_power(b, c)
            # squared form of d(a,c) <= d(a,b) + d(b,c), exact over the rationals
            u, v, w = P2.dist_power(a, c), P2.dist_power(a, b), P2.dist_power(b, c)
            gap = u - v - w
            assert gap <= 0 or gap * gap <= 4 * v * w


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=6),
       st.lists(st.floats(-100, 100), min_size=1, max_size=6),
       st.sampled_from([1, 2, 3, math.inf]))
def test_lq_norm_triangle_and_homogeneity(u, v, q):
    n = min(len(u), len(v))
    u, v = u[:n], v[:n]
    s = [a + b for a, b in zip(u, v)]
    assert lq_norm(s, q) <= lq_norm(u, q) + lq_norm(v, q) + 1e-9 * (1 + lq_norm(u, q) + lq_norm(v, q))
    assert lq_norm([-2 * a for a in u], q) == pytest.approx(2 * lq_norm(u, q), rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------------------
# control pairs

def test_piecewise_linear_evaluation():
    f = PiecewiseLinear(((0.0, 0.0), (2.0, 1.0), (4.0, 5.0)), 0.5)
    assert f(0) == 0 and f(1) == 0.5 and f(3) == 3.0 and f(6) == 6.0
    assert f.proper and not PiecewiseLinear(((0.0, 1.0),), 0.0).proper
    assert f.scaled(2)(3) == 6.0 and f.shifted(1)(3) == 4.0
    with pytest.raises(ValueError):
        PiecewiseLinear(((0.0, 2.0), (1.0, 1.0)), 1.0)
    with pytest.raises(ValueError):
        PiecewiseLinear(((1.0, 0.0),), 1.0)


def test_affine_control_pair():
    cp = ControlPair.affine(2.0, 1.0, 3.0, 1.0)
    assert cp.rho(0) == 0 and cp.rho(0.5) == 0 and cp.rho(2) == 3.0
    assert cp.omega(2) == 7.0
    assert cp.to_json()["omega"]["tail"] == 3.0


def test_sandwich_is_exact_on_integers():
    cp = ControlPair.identity()
    rep = check_sandwich([(0, 1, 2, 2), (0, 2, 3, 3)], cp)
    assert rep.passed and rep.tolerance == 0.0
    rep = check_sandwich([(0, 1, 2, 2), (0, 2, 3, 4)], cp)
    assert not rep.passed and rep.violations == [(0, 2, 3, 4, "omega")]


def test_sandwich_tolerates_float_noise_only():
    cp = ControlPair.identity()
    assert check_sandwich([(0, 1, 1, 1 + TOL / 2)], cp).passed
    assert not check_sandwich([(0, 1, 1, 1 + 10 * TOL)], cp).passed
    rep = check_sandwich([(0, 1, 2, 1.0)], cp)
    assert rep.violations[0][-1] == "rho"


def test_measure_control_pair_on_cycle():
    fc = FiniteCayley(cyclic(10))
    pts = list(range(len(fc)))
    ident = measure_control_pair(pts, fc.dist, lambda x: x, GraphMetric(fc), ControlPair.identity())
    assert ident.passed and ident.pairs == 45
    # doubling lengths breaks the upper bound
    double = measure_control_pair(pts, fc.dist, lambda x: (2.0 * fc.length[x],),
                                  EuclideanSpace(1), ControlPair.identity())
    assert not double.passed
    assert {v[-1] for v in double.violations} <= {"omega", "rho"}


# ---------------------------------------------------------------------------
# Folner sets

def test_neighbourhood_is_distance_thickening():
    fc = FiniteCayley(sym3())
    rnd = random.Random(3)
    for _ in range(20):
        F = rnd.sample(range(len(fc)), 2)
        for R in range(3):
            expect = {y for y in range(len(fc)) if min(fc.dist(y, f) for f in F) <= R}
            assert neighbourhood(fc, F, R) == expect


def test_folner_on_long_cycle():
    fs = folner_search(cyclic(100), 0.2, 4, include_whole=False)
    # a ball of radius r gains 2R = 8 points: first r with 8 / (2r + 1) < 0.2
    r = next(r for r in range(50) if 8 / (2 * r + 1) < 0.2)
    assert fs.parameter == r == 20 and len(fs.elements) == 41
    assert fs.ratio == pytest.approx(8 / 41) and fs.literal_ratio == pytest.approx(49 / 41)


def test_whole_group_is_always_folner():
    fs = folner_search(selberg(5), 0.01, 3)
    assert fs.shape == "whole" and fs.ratio == 0 and fs.literal_ratio == 1


def _normalized_gap(mg):
    fc = FiniteCayley(mg)
    n = len(fc)
    A = np.zeros((n, n))
    G = mg.group
    for i, g in enumerate(fc.elements):
        for s in list(mg.generators) + list(mg.inverses):
            A[i, fc.index[G.mul(s, g)]] += 1
    deg = 2 * mg.k
    ev = np.linalg.eigvalsh(np.eye(n) - A / deg)
    return ev[1], fc


def test_selberg_folner_balls():
    mg = selberg(13)
    # proper balls may be almost everything: B(e, 8) misses only a few elements
    fs = folner_search(mg, 0.01, 2, include_whole=False)
    assert fs.shape == "ball" and fs.parameter == 8
    assert len(fs.elements) == 2175 and fs.ratio < 0.01
    with pytest.raises(NoFolnerSetFound):
        folner_search(mg, 0.01, 2, include_whole=False, max_fraction=0.5)


def test_selberg_ball_ratios_obey_cheeger_bound():
    # |N_1(F) \ F| >= lambda_1 |F| (N - |F|) / N for the normalized gap lambda_1
    lam, fc = _normalized_gap(selberg(13))
    n = len(fc)
    for r in range(fc.diameter):
        F = [i for i in range(n) if fc.length[i] <= r]
        ratio, _ = folner_ratio(fc, F, 1)
        assert ratio >= lam * (n - len(F)) / n - 1e-12
        if 2 * len(F) <= n:
            assert ratio >= lam / 2 > 0.01


def test_coball_shape_and_fallback():
    fs = choose_folner(cyclic(60), 0.3, 2)
    assert fs.shape == "coball"
    n = 60
    assert set(fs.elements) == {i for i in range(n) if fs.cayley.length[i] > fs.parameter}
    assert fs.ratio < 0.3
    # on Z/5 every proper coball is swallowed by its 2-neighbourhood
    whole = choose_folner(cyclic(5), 0.1, 2)
    assert whole.shape == "whole"


def test_bad_folner_arguments():
    with pytest.raises(ValueError):
        folner_search(cyclic(10), 0, 1)
    with pytest.raises(ValueError):
        folner_search(cyclic(10), 0.1, 1, include_whole=False, shape="cube")


# ---------------------------------------------------------------------------
# girth and diameter

def _nx_graph(mg):
    fc = FiniteCayley(mg)
    G = mg.group
    g = nx.Graph()
    g.add_nodes_from(fc.elements)
    for x in fc.elements:
        for s in mg.generators:
            y = G.mul(s, x)
            if y != x:
                g.add_edge(x, y)
    return g


@pytest.mark.parametrize("mg", [
    cyclic(10), cyclic(2), direct_product_marking(cyclic(6), cyclic(6)), selberg(5), sym3(),
    slz_markings(3, 2)[0], MarkedGroup(Cyclic(12), (1, 5)),
    MarkedGroup(DirectProduct([Cyclic(2), Cyclic(2)]), ((1, 0), (0, 1))),
])
def test_girth_diameter_against_networkx(mg):
    g = _nx_graph(mg)
    girth, diam = girth_diameter(mg)
    assert girth == nx.girth(g)
    assert diam == nx.diameter(g)


def test_girth_diameter_examples():
    assert girth_diameter(cyclic(10)) == (10, 5)
    assert girth_diameter(direct_product_marking(cyclic(6), cyclic(6))) == (4, 6)
    assert girth_diameter(cyclic(2)) == (math.inf, 1)


@pytest.mark.parametrize("mg", [selberg(5), sym3(), direct_product_marking(cyclic(3), cyclic(5))])
def test_word_metric_is_vertex_transitive(mg):
    fc = FiniteCayley(mg)
    n = len(fc)
    profile = sorted(fc.length)
    for g in range(n):
        assert sorted(fc.dist(h, g) for h in range(n)) == profile
