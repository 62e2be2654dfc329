from __future__ import annotations

import copy
import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from cayleylab.algebra import Cyclic, DirectProduct, Integers
from cayleylab.families import cyclic, integers
from cayleylab.fibred import (
    ActionNotTotal, EquivariantEmbedding, RigidMotion, build_from_action, build_from_actions,
    centered_lift, cycle_stages, finite_stage_limit_check, folner_envelope, genuine_to_fibred,
    orbit_control, recover_fragmentary_finite, recover_fragmentary_folner, translation_action,
    verify_fibred, verify_fragmentary,
)
from cayleylab.marked import FiniteCayley, MarkedGroup
from cayleylab.metrics import ControlPair, EuclideanSpace, PiecewiseLinear, folner_search


def cycles(lo, hi):
    return [cyclic(m) for m in range(lo, hi + 1)]


@pytest.fixture(scope="module")
def cycle_fibred():
    return build_from_action(cycles(5, 20), translation_action())


# ---------------------------------------------------------------------------
# rigid motions

_motion = st.builds(
    lambda perm, signs, shift: RigidMotion(tuple(perm), tuple(signs), tuple(shift)),
    st.permutations(range(3)), st.lists(st.sampled_from([1, -1]), min_size=3, max_size=3),
    st.lists(st.integers(-9, 9), min_size=3, max_size=3))
_point = st.lists(st.integers(-20, 20), min_size=3, max_size=3).map(tuple)


@settings(max_examples=200, deadline=None)
@given(_motion, _motion, _point)
def test_rigid_motion_composition(a, b, z):
    assert a.then(b).apply(z) == b.apply(a.apply(z))
    assert a.then(a.inverse()) == RigidMotion.identity(3)
    assert a.inverse().apply(a.apply(z)) == z
    X = EuclideanSpace(3, 2.0)
    w = tuple(c + 1 for c in z)
    assert X.dist(a.apply(z), a.apply(w)) == X.dist(z, w)


def test_block_embedding_acts_on_its_coordinates():
    phi = RigidMotion((1, 0), (1, -1), (5, 7))
    big = phi.block(1, 4)
    assert big.apply((9, 1, 2, 8)) == (9, 2 + 5, -1 + 7, 8)


# ---------------------------------------------------------------------------
# building from a limit action

def test_cycle_embedding_passes(cycle_fibred):
    fe = cycle_fibred
    rep = verify_fibred(fe, ControlPair.identity())
    assert rep.passed and rep.radii_nondecreasing and rep.radii_growing
    assert rep.max_isometry_defect == 0 and rep.max_transition_deviation == 0
    assert fe.radii == [((m - 1) // 2) // 2 for m in range(5, 21)]
    assert fe.notes["convergence_radii"] == [(m - 1) // 2 for m in range(5, 21)]


def test_cycle_trivializations_are_centered_translations(cycle_fibred):
    fe = cycle_fibred
    for idx, m in enumerate(range(5, 21)):
        fc = fe.cayley(idx)
        for g, tg in fe.trivializations[idx].items():
            for x, phi in tg.items():
                diff = centered_lift(fc.elements[x] - fc.elements[g], m)
                assert abs(diff) <= fe.radii[idx]
                assert phi == RigidMotion.translation((diff,))


def test_reflection_breaks_transition_consistency(cycle_fibred):
    fe = copy.deepcopy(cycle_fibred)
    m = 6
    tg = fe.trivializations[m][0]
    x = next(x for x in tg if x != 0)
    tg[x] = RigidMotion.reflection(1).then(tg[x])
    rep = verify_fibred(fe, ControlPair.identity())
    assert rep.isometry
    assert not rep.transition and math.isinf(rep.max_transition_deviation)
    assert all(w[0] == m for w in rep.witnesses["transition"])


def test_shifted_section_breaks_sandwich(cycle_fibred):
    fe = copy.deepcopy(cycle_fibred)
    m = 6
    cp = ControlPair.identity()
    fe.sections[m][1] = (fe.sections[m][1][0] + 2 * cp.omega(1),)
    rep = verify_fibred(fe, cp)
    assert rep.isometry and rep.transition and not rep.sandwich
    assert {w[0] for w in rep.witnesses["sandwich"]} == {m}


def test_genuine_cycle_lift_fails_at_the_wrap():
    mgs = [cyclic(m) for m in (6, 7, 8)]
    maps = []
    for mg in mgs:
        fc = FiniteCayley(mg)
        maps.append([(centered_lift(g, mg.group.n),) for g in fc.elements])
    fe = genuine_to_fibred(mgs, maps, EuclideanSpace(1), ControlPair.identity())
    rep = verify_fibred(fe)
    assert rep.isometry and rep.transition and not rep.sandwich
    # violations are exactly the pairs whose short path crosses the cut at m / 2
    for m_idx, mg in enumerate(mgs):
        n = mg.group.n
        wit = {(x1, x2) for mi, g, x1, x2, d, dm, side in rep.witnesses["sandwich"] if mi == m_idx}
        assert all(side == "omega" for *_, side in rep.witnesses["sandwich"])
        fc = fe.cayley(m_idx)
        crossing = {(x1, x2) for x1 in range(n) for x2 in range(x1 + 1, n)
                    if abs(maps[m_idx][x1][0] - maps[m_idx][x2][0]) > fc.dist(x1, x2)}
        assert {(min(p), max(p)) for p in wit} == crossing
        assert any(fc.dist(*p) == 1 for p in crossing)


def test_skip_first_and_radius_cap():
    fe = build_from_action(cycles(5, 14), translation_action(), skip_first=3, max_radius=2)
    assert fe.radii[:3] == [0, 0, 0]
    assert fe.radii[3:] == [min(((m - 1) // 2) // 2, 2) for m in range(8, 15)]
    assert verify_fibred(fe).passed


def test_partial_action_is_reported():
    def action(n):
        if abs(n) > 1:
            raise KeyError(n)
        return RigidMotion.translation((n,))
    ee = EquivariantEmbedding(integers(), EuclideanSpace(1), action, (0,), ControlPair.identity())
    with pytest.raises(ActionNotTotal):
        build_from_action(cycles(9, 9), ee)


def _two_limits():
    line = EquivariantEmbedding(MarkedGroup(Integers(), (1, 0)), EuclideanSpace(1),
                                lambda n: RigidMotion.translation((n,)), (0,),
                                ControlPair.identity())
    ZZ2 = DirectProduct([Integers(), Cyclic(2)])

    def flip(g):
        n, e = g
        return RigidMotion((0, 1), (1, -1 if e else 1), (n, 0))
    strip = EquivariantEmbedding(MarkedGroup(ZZ2, ((1, 0), (0, 1))), EuclideanSpace(2), flip,
                                 (0, 0.5), ControlPair.identity())
    return line, strip


def test_two_limits_each_act_on_their_block():
    line, strip = _two_limits()
    seq = []
    for m in range(5, 13):
        seq.append(MarkedGroup(Cyclic(m), (1, 0)))
        seq.append(MarkedGroup(DirectProduct([Cyclic(m), Cyclic(2)]), ((1, 0), (0, 1))))
    cp = ControlPair(PiecewiseLinear.linear(1 / math.sqrt(2)), PiecewiseLinear.linear())
    fe = build_from_actions(seq, [line, strip], cp=cp)
    assert fe.space.d == 3
    assert fe.notes["limit_index"] == [0, 1] * 8
    rep = verify_fibred(fe)
    assert rep.passed
    # a diagonal step of the strip has length sqrt(2) for word length 2, below 0.9 * 2
    assert not verify_fibred(fe, ControlPair.affine(0.9, 0, 1, 0)).sandwich


# ---------------------------------------------------------------------------
# recovering fragmentary actions

@pytest.mark.parametrize("q", [1.0, 2.0])
def test_finite_recovery_is_exact(cycle_fibred, q):
    fe = cycle_fibred
    for m in range(len(fe.components)):
        fa = recover_fragmentary_finite(fe, m, q)
        rep = verify_fragmentary(fa)
        assert rep.passed and rep.max_defect == 0 and rep.isometric
        assert orbit_control(fa, ControlPair.identity()).passed


def test_finite_recovery_orbit_distances_are_word_distances(cycle_fibred):
    fe = cycle_fibred
    m = 10
    fa = recover_fragmentary_finite(fe, m, 2.0)
    fc = fa.cayley
    for g in fa.domain:
        for h in fa.domain:
            assert fa.space.dist(fa.orbit(g), fa.orbit(h)) == pytest.approx(fc.dist(g, h), abs=1e-12)


@pytest.fixture(scope="module")
def long_cycle():
    fe = build_from_action([cyclic(100)], translation_action(), max_radius=4)
    F = folner_search(fe.components[0], 0.2, 4, include_whole=False)
    return fe, F


@pytest.mark.parametrize("q", [1.0, 2.0])
@pytest.mark.parametrize("mode", ["chain", "literal"])
def test_folner_recovery_within_declared_bounds(long_cycle, q, mode):
    fe, F = long_cycle
    delta = 0.2
    fa = recover_fragmentary_folner(fe, 0, q, F, delta=delta, mode=mode)
    assert fa.epsilon == pytest.approx(3 * delta ** (1 / q) * 4)
    assert fa.radius == 2
    rep = verify_fragmentary(fa)
    assert rep.passed and rep.max_defect <= fa.epsilon
    assert rep.isometric == (mode == "chain")
    env = folner_envelope(fa)
    assert env.rho(3) == pytest.approx((1 - 2 * delta) * 3)
    assert env.omega(3) == pytest.approx(3 + 2 * delta ** (1 / q) * 4)
    assert orbit_control(fa, env).passed


def test_folner_epsilon_degrades_with_q(long_cycle):
    fe, F = long_cycle
    eps = [recover_fragmentary_folner(fe, 0, q, F, delta=0.2).epsilon for q in (1.0, 2.0, 4.0)]
    assert eps == sorted(eps)


def test_folner_recovery_rejects_unknown_mode(long_cycle):
    fe, F = long_cycle
    with pytest.raises(ValueError):
        recover_fragmentary_folner(fe, 0, 2.0, F, mode="other")


# ---------------------------------------------------------------------------
# finite-stage checks

def test_centered_lift():
    assert [centered_lift(x, 5) for x in range(5)] == [0, 1, 2, -2, -1]
    assert [centered_lift(x, 4) for x in range(4)] == [0, 1, 2, -1]


def test_cycle_stages_stabilize_when_lifted():
    ms = list(range(3, 30))
    gs = list(range(-6, 7))
    stages = cycle_stages(ms, gs)
    pairs = [(a, b, abs(a - b)) for a in gs for b in gs if a < b]
    rep = finite_stage_limit_check(stages, pairs, ControlPair.identity(),
                                   bounds={g: abs(g) for g in gs})
    assert rep.passed and rep.bounded
    for g in gs:
        first_m = max(3, 2 * abs(g) + 1)
        assert rep.point_stabilization[g] == ms.index(first_m)
    for a, b, _ in pairs:
        first_m = max(3, 2 * max(abs(a), abs(b)) + 1)
        assert rep.sandwich_from[(a, b)] <= ms.index(first_m)


def test_drifting_points_are_flagged():
    space = EuclideanSpace(1)
    stages = [{"space": space, "base": (0,), "points": {"a": (m,), "b": (0,)}} for m in range(10)]
    rep = finite_stage_limit_check(stages, [("a", "b", 1)], bounds={"a": 5})
    assert not rep.bounded
    assert rep.non_stabilizing == [("a", "b")]
    assert not rep.passed


# ---------------------------------------------------------------------------
# serialization

def test_reports_serialize(cycle_fibred, long_cycle):
    fe = cycle_fibred
    text = fe.dumps()
    assert text == build_from_action(cycles(5, 20), translation_action()).dumps()
    rec = json.loads(text)
    assert rec["radii"] == fe.radii and rec["space"] == {"d": 1, "q": 2.0}
    json.dumps(verify_fibred(fe).to_json())
    fe2, F = long_cycle
    fa = recover_fragmentary_folner(fe2, 0, 2.0, F)
    json.dumps(verify_fragmentary(fa).to_json())
    stages = cycle_stages(range(3, 12), range(-2, 3))
    json.dumps(finite_stage_limit_check(stages, [(0, 1, 1)]).to_json())
