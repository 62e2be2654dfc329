from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
import pytest
import scipy.sparse
import scipy.sparse.linalg

from cayleylab.algebra import Cyclic
from cayleylab.families import (
    cyclic, direct_product_marking, selberg, sl_markings, slz_markings, sym3,
)
from cayleylab.marked import FiniteCayley, MarkedGroup
from cayleylab.metrics import ControlPair, PiecewiseLinear
from cayleylab.spectral import (
    TABLE_COLUMNS, Disconnected, SubgroupTrivial, cayley_graph, combinatorial_gap,
    concentration_witness, embedded_expander_search, lambda1, lanczos_smallest,
    poincare_check, poincare_ratio, smallest_positive, spectrum_report, spectrum_table_csv,
    spectrum_table_json, subgroup_marking, _edge_list,
)

SELBERG_LAMBDA1 = {
    3: 0.31698729810778015,
    5: 0.1909830056250515,
    7: 0.2205214970245981,
    11: 0.18147503124600056,
    13: 0.15572776730401502,
}


def dense_laplacians(mg):
    """Normalized and combinatorial Laplacians straight from the multiplication table."""
    fc = FiniteCayley(mg)
    n = len(fc)
    G = mg.group
    A = np.zeros((n, n))
    for i, g in enumerate(fc.elements):
        for s in list(mg.generators) + [G.inv(s) for s in mg.generators]:
            j = fc.index[G.mul(s, g)]
            if j != i:
                A[i, j] += 1
    deg = 2 * mg.k
    return np.eye(n) - A / deg, np.diag(A.sum(axis=1)) - A


# ---------------------------------------------------------------------------
# spectral gaps

def test_small_gaps():
    assert lambda1(cyclic(4)) == pytest.approx(1.0, abs=1e-12)
    assert lambda1(cyclic(3)) == pytest.approx(1.5, abs=1e-12)


@pytest.mark.parametrize("n", [5, 8, 13, 40])
def test_cycle_gap_closed_form(n):
    assert lambda1(cyclic(n)) == pytest.approx(1 - math.cos(2 * math.pi / n), abs=1e-12)


def test_loops_are_dropped_but_kept_in_degree():
    # (Z/5; 1, 0): the identity generator contributes only to the degree, so off the
    # constants I - A/4 has eigenvalues 1 - cos(2 pi j / 5) / 2
    mg = MarkedGroup(Cyclic(5), (1, 0))
    expect = 1 - math.cos(2 * math.pi / 5) / 2
    assert lambda1(mg, method="dense") == pytest.approx(expect, abs=1e-12)
    assert lambda1(mg, method="lanczos") == pytest.approx(expect, abs=1e-8)
    assert combinatorial_gap(mg) == pytest.approx(2 * (1 - math.cos(2 * math.pi / 5)), abs=1e-12)


@pytest.mark.parametrize("p", sorted(SELBERG_LAMBDA1))
def test_selberg_gaps_pinned_and_rederived(p):
    mg = selberg(p)
    val = lambda1(mg)
    assert val == pytest.approx(SELBERG_LAMBDA1[p], abs=1e-8)
    Ln, _ = dense_laplacians(mg)
    assert np.linalg.eigvalsh(Ln)[1] == pytest.approx(val, abs=1e-10)


@pytest.mark.parametrize("p", [5, 7])
def test_lanczos_matches_dense(p):
    mg = selberg(p)
    dense = lambda1(mg, method="dense")
    lz = lambda1(mg, method="lanczos", seed=3)
    assert lz == pytest.approx(dense, abs=1e-8)


def test_lanczos_on_large_group_matches_shift_invert():
    mg = sl_markings(3, 3, 1)[0]
    cg = cayley_graph(mg)
    assert cg.n == 5616
    L = cg.normalized()
    val, how = smallest_positive(L, seed=1)
    assert how == "lanczos"
    ref = scipy.sparse.linalg.eigsh(L.tocsc(), k=3, sigma=-1e-3, which="LM",
                                    return_eigenvectors=False)
    ref = sorted(ref)
    assert ref[0] == pytest.approx(0, abs=1e-9)
    assert val == pytest.approx(ref[1], abs=1e-8)
    assert val == pytest.approx(0.030182417467250883, abs=1e-8)


def test_lanczos_on_diagonal_operator():
    d = np.arange(1.0, 201.0)
    val, steps = lanczos_smallest(lambda x: d * x, 200, deflate=np.eye(200)[0], max_steps=200)
    assert val == pytest.approx(2.0, abs=1e-8)
    assert steps <= 200


def test_disconnected_marking_rejected():
    with pytest.raises(Disconnected):
        cayley_graph(MarkedGroup(Cyclic(6), (2,)))


# ---------------------------------------------------------------------------
# reports

def test_spectrum_table_formats():
    reps = [spectrum_report(selberg(p), "selberg", p) for p in (3, 5)]
    rows = list(csv.reader(io.StringIO(spectrum_table_csv(reps))))
    assert rows[0] == TABLE_COLUMNS
    assert rows[1][:4] == ["selberg", "3", "24", "4"]
    assert float(rows[1][4]) == pytest.approx(SELBERG_LAMBDA1[3], abs=1e-10)
    rec = json.loads(spectrum_table_json(reps))
    assert "convention" in rec and len(rec["rows"]) == 2
    assert rec["rows"][1]["girth"] == 5 and rec["rows"][1]["diameter"] == 6


# ---------------------------------------------------------------------------
# Poincare inequalities

def test_poincare_constant_of_four_cycle():
    rep = poincare_check(cyclic(4), trials=200, seed=0)
    assert rep.exact == pytest.approx(0.5, abs=1e-12) and rep.passed


@pytest.mark.parametrize("mg", [selberg(3), sym3(), direct_product_marking(cyclic(3), cyclic(4))])
def test_poincare_exact_constant_via_pseudoinverse(mg):
    _, Lc = dense_laplacians(mg)
    pinv_top = np.linalg.eigvalsh(np.linalg.pinv(Lc)).max()
    rep = poincare_check(mg, trials=500, seed=1)
    assert rep.exact == pytest.approx(pinv_top, abs=1e-8)
    assert rep.best_ratio <= rep.exact + 1e-9


def test_fiedler_vector_attains_the_constant():
    mg = selberg(5)
    cg = cayley_graph(mg)
    L = cg.combinatorial().toarray()
    vals, vecs = np.linalg.eigh(L)
    f = vecs[:, 1][None, :, None]
    ratio = poincare_ratio(f, _edge_list(cg), 2.0)[0]
    assert ratio == pytest.approx(1 / vals[1], rel=1e-10)


def test_vector_valued_trials_respect_scalar_constant():
    mg = sym3()
    r1 = poincare_check(mg, d=1, trials=2000, seed=5)
    r3 = poincare_check(mg, d=3, trials=2000, seed=5)
    assert r1.C == r3.C
    assert r1.passed and r3.passed
    # random trials approach the constant from below
    assert r3.best_ratio <= r3.C + 1e-9 and r3.best_ratio > 0.5 * r3.C


def test_poincare_needs_constant_off_q2():
    with pytest.raises(ValueError):
        poincare_check(cyclic(5), q=1.0)
    rep = poincare_check(cyclic(5), q=1.0, C=100.0, trials=100)
    assert rep.exact is None and rep.passed


# ---------------------------------------------------------------------------
# embedded expanders

def _all_pairs_lipschitz(ambient, sub, D):
    fcG, fcH = FiniteCayley(ambient), FiniteCayley(sub)
    idx = [fcG.index[h] for h in fcH.elements]
    return all(fcG.dist(idx[a], idx[b]) <= D * fcH.dist(a, b)
               for a in range(len(idx)) for b in range(len(idx)))


def test_embedded_certificate():
    seq = [selberg(p) for p in (3, 5, 7)]
    words = ["s0 s1", "s1^-1"]
    cert = embedded_expander_search(seq, words, labels=[3, 5, 7])
    assert cert.lipschitz == 2 and cert.degree_bound == 4
    assert cert.subgroup_sizes == [24, 120, 336] and cert.sizes_increasing
    assert all(cert.lipschitz_verified)
    for mg, H in zip(seq, cert.subgroups):
        assert _all_pairs_lipschitz(mg, subgroup_marking(mg, words), 2)
    assert cert.inf_lambda1 == min(cert.lambda1) > 0
    json.dumps(cert.to_json())


def test_proper_subgroup_certificate():
    # <s0> in (Z/12; 1, 5) has the full order, <s0^3> a subgroup of order 4
    mg = MarkedGroup(Cyclic(12), (1, 5))
    cert = embedded_expander_search([mg], ["s0^3"])
    assert cert.subgroup_sizes == [4] and cert.lipschitz == 3
    assert cert.lambda1[0] == pytest.approx(1.0, abs=1e-12)
    assert cert.lipschitz_verified == [_all_pairs_lipschitz(mg, subgroup_marking(mg, ["s0^3"]), 3)]


def test_trivial_subgroup_rejected():
    with pytest.raises(SubgroupTrivial):
        subgroup_marking(selberg(5), ["s0 s0^-1"])


def test_concentration_rows_for_fiedler_map():
    seq = [selberg(5)]
    cert = embedded_expander_search(seq, ["s0", "s1"])
    H = cert.subgroups[0]
    fcH = FiniteCayley(H)
    cg = cayley_graph(H, fcH)
    vals, vecs = np.linalg.eigh(cg.combinatorial().toarray())
    fied = {g: vecs[i, 1] for i, g in enumerate(fcH.elements)}
    rep = concentration_witness(cert, lambda k, g: [fied[g]], ControlPair.identity())
    row = rep.observed[0]
    assert row.moment == pytest.approx(row.C * row.energy, rel=1e-9)
    assert row.C == pytest.approx(1 / vals[1], rel=1e-10)
    json.dumps(rep.to_json())


def test_concentration_separation_grows_with_p():
    ps = [5, 7, 11, 13]
    seq = [selberg(p) for p in ps]
    cert = embedded_expander_search(seq, ["s0", "s1"], labels=ps)
    rng = np.random.default_rng(0)
    rep = concentration_witness(cert, lambda k, g: rng.standard_normal(2),
                                ControlPair.identity())
    seps = [r.separation for r in rep.rows]
    assert seps == sorted(seps)
    assert seps == [4, 5, 6, 6]
    # the a priori bound uses the edge count per vertex: 2 generators of order p give 2 edges
    assert all(r.moment_bound == pytest.approx(r.C * 2 * 1) for r in rep.rows)


def test_concentration_flags_expanding_control():
    # a control pair growing faster than the moment allows is ruled out
    cert = embedded_expander_search([selberg(13)], ["s0", "s1"])
    steep = ControlPair(PiecewiseLinear.linear(10.0), PiecewiseLinear.linear(1.0))
    rep = concentration_witness(cert, lambda k, g: [0.0], steep)
    assert rep.violation
    row = rep.rows[0]
    assert row.rho_at_separation == 10.0 * row.separation > 2 * row.radius
