"""Fibred coarse embeddings in ball form, built from limit actions, and the
fragmentary actions recovered from them.

Fibres are Euclidean l_q^d spaces; every isometry is stored as a signed
permutation followed by a translation, so composition and comparison are
exact whenever the inputs are.  All actions are right actions:
z . alpha(g h) = (z . alpha(g)) . alpha(h).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .marked import FiniteCayley, MarkedGroup, ball, convergence_radius, diagram_iso
from .metrics import (
    TOL, ControlPair, ControlReport, EuclideanSpace, FolnerSet, PiecewiseLinear,
    ScaledProduct, check_sandwich, uniform_scale,
)


class ActionNotTotal(KeyError):
    pass


# ---------------------------------------------------------------------------
# isometries of l_q^d

@dataclass(frozen=True)
class RigidMotion:
    """z -> w with w[i] = signs[i] * z[perm[i]] + shift[i]."""
    perm: tuple
    signs: tuple
    shift: tuple

    @classmethod
    def identity(cls, d: int) -> "RigidMotion":
        return cls(tuple(range(d)), (1,) * d, (0,) * d)

    @classmethod
    def translation(cls, v: Sequence[float]) -> "RigidMotion":
        d = len(v)
        return cls(tuple(range(d)), (1,) * d, tuple(v))

    @classmethod
    def reflection(cls, d: int, axis: int = 0) -> "RigidMotion":
        signs = tuple(-1 if i == axis else 1 for i in range(d))
        return cls(tuple(range(d)), signs, (0,) * d)

    @property
    def d(self) -> int:
        return len(self.perm)

    def apply(self, z: Sequence[float]) -> tuple:
        return tuple(s * z[p] + b for p, s, b in zip(self.perm, self.signs, self.shift))

    def then(self, other: "RigidMotion") -> "RigidMotion":
        """Apply self first, then other."""
        perm, signs, shift = [], [], []
        for i in range(self.d):
            p = other.perm[i]
            perm.append(self.perm[p])
            signs.append(other.signs[i] * self.signs[p])
            shift.append(other.signs[i] * self.shift[p] + other.shift[i])
        return RigidMotion(tuple(perm), tuple(signs), tuple(shift))

    def inverse(self) -> "RigidMotion":
        d = self.d
        perm, signs, shift = [0] * d, [0] * d, [0] * d
        for i, p in enumerate(self.perm):
            perm[p] = i
            signs[p] = self.signs[i]
            shift[p] = -self.signs[i] * self.shift[i]
        return RigidMotion(tuple(perm), tuple(signs), tuple(shift))

    def deviation(self, other: "RigidMotion") -> float:
        """inf if the linear parts differ, else the largest translation gap."""
        if self.perm != other.perm or self.signs != other.signs:
            return math.inf
        return max((abs(a - b) for a, b in zip(self.shift, other.shift)), default=0.0)

    def block(self, offset: int, d: int) -> "RigidMotion":
        """Embed into l_q^d acting on coordinates offset .. offset + self.d - 1."""
        perm = list(range(d))
        signs = [1] * d
        shift = [0] * d
        for i in range(self.d):
            perm[offset + i] = offset + self.perm[i]
            signs[offset + i] = self.signs[i]
            shift[offset + i] = self.shift[i]
        return RigidMotion(tuple(perm), tuple(signs), tuple(shift))

    def to_json(self) -> dict:
        return {"perm": list(self.perm), "signs": list(self.signs), "shift": list(self.shift)}


def is_isometry(phi: RigidMotion, space: EuclideanSpace, samples: Sequence) -> float:
    """Largest distortion |d(phi z, phi w) - d(z, w)| over sample pairs."""
    worst = 0.0
    imgs = [phi.apply(z) for z in samples]
    for a in range(len(samples)):
        for b in range(a + 1, len(samples)):
            worst = max(worst, abs(space.dist(imgs[a], imgs[b]) - space.dist(samples[a], samples[b])))
    return worst


def sample_points(d: int, n: int = 4) -> list[tuple]:
    """Deterministic small sample of l_q^d: origin, unit vectors and a mixed point."""
    pts = [(0.0,) * d]
    for i in range(min(d, n)):
        pts.append(tuple(1.0 if j == i else 0.0 for j in range(d)))
    pts.append(tuple(float((-1) ** j * (j + 2)) for j in range(d)))
    return pts


# ---------------------------------------------------------------------------
# records

@dataclass
class EquivariantEmbedding:
    """Orbit map g -> y . alpha(g) of an isometric right action."""
    mg: MarkedGroup
    space: EuclideanSpace
    action: Callable[[object], RigidMotion]
    base: tuple
    cp: ControlPair

    def orbit(self, g) -> tuple:
        return self.action(g).apply(self.base)


def translation_action(mg: MarkedGroup | None = None) -> EquivariantEmbedding:
    """(Z; 1) acting on the real line by unit translations, base point 0."""
    from .families import integers
    return EquivariantEmbedding(mg or integers(), EuclideanSpace(1, 2.0),
                                lambda n: RigidMotion.translation((n,)), (0,), ControlPair.identity())


@dataclass
class FibredEmbedding:
    """Ball form: per component m a radius R'_m, a section s and, for every
    centre g, trivializations x -> t_{g}(x) on B(g, R'_m)."""
    components: list
    space: EuclideanSpace
    radii: list
    sections: list                 # sections[m][x] = point of M
    trivializations: list          # trivializations[m][g][x] = RigidMotion
    cayleys: list = field(repr=False, default_factory=list)
    labels: list = field(default_factory=list)
    control: ControlPair | None = None
    notes: dict = field(default_factory=dict)

    def cayley(self, m: int) -> FiniteCayley:
        return self.cayleys[m]

    def to_json(self) -> dict:
        out = {
            "components": [mg.name or repr(mg.group) for mg in self.components],
            "labels": [str(l) for l in self.labels],
            "space": {"d": self.space.d, "q": self.space.q},
            "radii": list(self.radii),
            "sections": [[list(p) for p in sec] for sec in self.sections],
            "trivializations": [
                {str(g): {str(x): t.to_json() for x, t in sorted(tg.items())}
                 for g, tg in sorted(tm.items())}
                for tm in self.trivializations
            ],
            "notes": self.notes,
        }
        if self.control is not None:
            out["control"] = self.control.to_json()
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


# ---------------------------------------------------------------------------
# constructions

def genuine_to_fibred(components: Sequence[MarkedGroup], maps: Sequence[Sequence[tuple]],
                      space: EuclideanSpace, cp: ControlPair | None = None) -> FibredEmbedding:
    """Constant fibres, s = f and identity trivializations on whole components.

    maps[m][i] is the image of the i-th element of component m in BFS order.
    """
    fcs = [FiniteCayley(mg) for mg in components]
    triv, radii = [], []
    ident = RigidMotion.identity(space.d)
    for fc in fcs:
        n = len(fc)
        radii.append(fc.diameter)
        triv.append({g: {x: ident for x in range(n)} for g in range(n)})
    return FibredEmbedding(list(components), space, radii, [list(f) for f in maps], triv, fcs,
                           list(range(len(fcs))), cp, {"construction": "genuine"})


def _beta(mg: MarkedGroup, limit: MarkedGroup, R: int) -> dict:
    """Element of B(e, R) in mg -> element of the limit, via the diagram map."""
    b1, b2 = ball(mg, R), ball(limit, R)
    iso = diagram_iso(b1, b2)
    if iso is None:
        raise ValueError(f"no diagram map at radius {R}")
    return {b1.vertices[u]: b2.vertices[v] for u, v in enumerate(iso.mapping)}


def _component(fc: FiniteCayley, Rp: int, motion_of: Callable[[int], RigidMotion]) -> dict:
    """t_g(x) = motion_of(x g^{-1}) for x in B(g, Rp)."""
    triv = {}
    inner = [h for h, d in enumerate(fc.length) if d <= Rp]
    for g in range(len(fc)):
        tg = {}
        for h in inner:
            x = fc.mul_idx(h, g)
            tg[x] = motion_of(h)
        triv[g] = tg
    return triv


def build_from_action(seq: Sequence[MarkedGroup], ee: EquivariantEmbedding, Rmax: int = 40,
                      max_radius: int | None = None, skip_first: int = 0,
                      labels: Sequence | None = None) -> FibredEmbedding:
    """Fibred embedding of the disjoint union of ``seq`` from an action of its limit.

    R_m is the convergence radius to the limit (capped by Rmax), R'_m = floor(R_m / 2)
    (optionally capped by ``max_radius``); s(x) = y and t_g(x) = alpha(beta(x g^{-1})).
    The first ``skip_first`` components form the exceptional set and get R'_m = 0.
    """
    return build_from_actions(seq, [ee], Rmax, max_radius, skip_first, labels)


def build_from_actions(seq: Sequence[MarkedGroup], ees: Sequence[EquivariantEmbedding],
                       Rmax: int = 40, max_radius: int | None = None, skip_first: int = 0,
                       labels: Sequence | None = None, cp: ControlPair | None = None
                       ) -> FibredEmbedding:
    """Several limits: component m uses the limit with the largest convergence
    radius (the smallest index among ties).  The fibre is the l_q sum of the
    limit spaces, each limit acting on its own block."""
    qs = {ee.space.q for ee in ees}
    if len(qs) != 1:
        raise ValueError("all limit spaces must share q")
    q = qs.pop()
    dims = [ee.space.d for ee in ees]
    offsets = [sum(dims[:i]) for i in range(len(dims))]
    D = sum(dims)
    space = EuclideanSpace(D, q)
    base = tuple(c for ee in ees for c in ee.base)
    fcs, radii, sections, triv, chosen, full = [], [], [], [], [], []
    ident = RigidMotion.identity(D)
    for m, mg in enumerate(seq):
        fc = FiniteCayley(mg)
        fcs.append(fc)
        Rs = [convergence_radius(mg, ee.mg, Rmax) for ee in ees]
        R = max(Rs)
        i = Rs.index(R)
        Rp = R // 2
        if max_radius is not None:
            Rp = min(Rp, max_radius)
        if m < skip_first or R < 0:
            Rp = 0
        chosen.append(i)
        full.append(R)
        radii.append(Rp)
        sections.append([base] * len(fc))
        if Rp == 0:
            triv.append({g: {g: ident} for g in range(len(fc))})
            continue
        beta = _beta(mg, ees[i].mg, R)
        cache = {}
        for h, d in enumerate(fc.length):
            if d > R:
                break
            try:
                phi = ees[i].action(beta[fc.elements[h]])
            except Exception as exc:
                raise ActionNotTotal(f"action undefined at {beta[fc.elements[h]]!r}") from exc
            if phi is None:
                raise ActionNotTotal(f"action undefined at {beta[fc.elements[h]]!r}")
            cache[h] = phi.block(offsets[i], D) if len(ees) > 1 else phi
        triv.append(_component(fc, Rp, cache.__getitem__))
    control = cp or ees[0].cp
    notes = {"construction": "limit action", "convergence_radii": full, "limit_index": chosen,
             "skip_first": skip_first}
    return FibredEmbedding(list(seq), space, radii, sections, triv, fcs,
                           list(labels) if labels is not None else list(range(len(seq))),
                           control, notes)


# ---------------------------------------------------------------------------
# verification

@dataclass
class FibredReport:
    isometry: bool
    sandwich: bool
    transition: bool
    radii_nondecreasing: bool
    radii_growing: bool
    max_isometry_defect: float
    max_transition_deviation: float
    witnesses: dict

    @property
    def passed(self) -> bool:
        return self.isometry and self.sandwich and self.transition

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "isometry": self.isometry,
            "sandwich": self.sandwich,
            "transition": self.transition,
            "radii_nondecreasing": self.radii_nondecreasing,
            "radii_growing": self.radii_growing,
            "max_isometry_defect": self.max_isometry_defect,
            "max_transition_deviation": _num(self.max_transition_deviation),
            "witnesses": {k: [list(map(_num, w)) for w in v[:20]] for k, v in self.witnesses.items()},
        }


def _num(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def verify_fibred(fe: FibredEmbedding, cp: ControlPair | None = None,
                  components: Sequence[int] | None = None) -> FibredReport:
    """Check (1) every trivialization is an isometry, (2) the control-pair
    sandwich on every ball and (3) that t_{g1}(x) o t_{g2}(x)^{-1} does not
    depend on x in B(g1, R') n B(g2, R')."""
    cp = cp or fe.control or ControlPair.identity()
    idx = range(len(fe.components)) if components is None else components
    samples = sample_points(fe.space.d)
    wit = {"isometry": [], "sandwich": [], "transition": []}
    iso_defect = 0.0
    trans_dev = 0.0
    for m in idx:
        fc = fe.cayleys[m]
        tm = fe.trivializations[m]
        sec = fe.sections[m]
        seen = {}
        for g, tg in tm.items():
            for x, phi in tg.items():
                if phi not in seen:
                    seen[phi] = is_isometry(phi, fe.space, samples)
                if seen[phi] > TOL:
                    wit["isometry"].append((m, g, x))
                iso_defect = max(iso_defect, seen[phi])
        for g, tg in tm.items():
            xs = sorted(tg)
            imgs = {x: tg[x].apply(sec[x]) for x in xs}

            def pairs():
                for a in range(len(xs)):
                    for b in range(a + 1, len(xs)):
                        x1, x2 = xs[a], xs[b]
                        yield (x1, x2, fc.dist(x1, x2), fe.space.dist(imgs[x1], imgs[x2]))
            rep = check_sandwich(pairs(), cp)
            for x1, x2, d, dm, side in rep.violations:
                wit["sandwich"].append((m, g, x1, x2, d, dm, side))
        keys = {g: set(tg) for g, tg in tm.items()}
        for g1 in tm:
            for g2 in tm:
                if g2 <= g1:
                    continue
                common = keys[g1] & keys[g2]
                if len(common) < 2:
                    continue
                ref = None
                for x in sorted(common):
                    T = tm[g2][x].inverse().then(tm[g1][x])
                    if ref is None:
                        ref = T
                        continue
                    dev = ref.deviation(T)
                    if dev > 0:
                        trans_dev = max(trans_dev, dev)
                        if dev > TOL:
                            wit["transition"].append((m, g1, g2, x, dev))
    radii = [fe.radii[m] for m in idx]
    nondec = all(a <= b for a, b in zip(radii, radii[1:]))
    growing = len(radii) > 1 and radii[-1] > radii[0]
    return FibredReport(not wit["isometry"], not wit["sandwich"], not wit["transition"],
                        nondec, growing, iso_defect, trans_dev, wit)


# ---------------------------------------------------------------------------
# fragmentary actions

@dataclass(frozen=True)
class CoordinateMotion:
    """Isometry of a uniformly scaled l_q product: (z . A)_x = motions[x](z[sources[x]])."""
    sources: tuple
    motions: tuple

    def apply(self, z: Sequence) -> tuple:
        return tuple(phi.apply(z[s]) for s, phi in zip(self.sources, self.motions))

    def is_bijective(self) -> bool:
        return sorted(self.sources) == list(range(len(self.sources)))


@dataclass
class FragmentaryAction:
    cayley: FiniteCayley
    domain: list                   # element indices of B(e, r)
    radius: int
    space: ScaledProduct
    alpha: dict                    # element index -> CoordinateMotion
    base: tuple
    epsilon: float
    q: float
    notes: dict = field(default_factory=dict)

    def orbit(self, g: int) -> tuple:
        return self.alpha[g].apply(self.base)


def _fibre_product(fe: FibredEmbedding, n: int, q: float) -> ScaledProduct:
    r = uniform_scale(n, q)
    origin = fe.space.origin()
    return ScaledProduct((fe.space,) * n, (origin,) * n, (r,) * n, q)


def _domain(fc: FiniteCayley, r: int) -> list[int]:
    return [h for h, d in enumerate(fc.length) if d <= r]


def _transition(tm: dict, x: int, y: int) -> RigidMotion:
    """t_{x,y} = t_x(y) o t_y(y)^{-1}."""
    return tm[y][y].inverse().then(tm[x][y])


def recover_fragmentary_finite(fe: FibredEmbedding, m: int, q: float = 2.0) -> FragmentaryAction:
    """(z . alpha(g))_x = t_{x,gx}(z_{gx}) on the scaled l_q product over G_m,
    with base point y_x = t_x(x)(s(x))."""
    fc = fe.cayleys[m]
    tm = fe.trivializations[m]
    Rp = fe.radii[m]
    n = len(fc)
    dom = _domain(fc, Rp)
    alpha = {}
    for g in dom:
        srcs, mots = [], []
        for x in range(n):
            gx = fc.mul_idx(g, x)
            srcs.append(gx)
            mots.append(_transition(tm, x, gx))
        alpha[g] = CoordinateMotion(tuple(srcs), tuple(mots))
    base = tuple(tm[x][x].apply(fe.sections[m][x]) for x in range(n))
    return FragmentaryAction(fc, dom, Rp, _fibre_product(fe, n, q), alpha, base, 0.0, q,
                             {"construction": "finite", "component": m})


def recover_fragmentary_folner(fe: FibredEmbedding, m: int, q: float, F: FolnerSet,
                               delta: float | None = None, mode: str = "chain",
                               cp: ControlPair | None = None) -> FragmentaryAction:
    """Fragmentary action on the scaled l_q product over a Folner set F.

    For x in F: (z . alpha(g))_x = t_{x,gx}(z_{gx}) when gx is in F.  When gx
    leaves F the literal rule keeps z_x, which is not a bijection of the
    coordinates.  ``mode="chain"`` instead closes each chain u -> gu -> ... -> x
    of the partial map x -> gx on F by feeding z_u to the end x through the
    translation by y_x - y_u; on the base point both rules agree.
    Declared epsilon = 3 delta^{1/q} omega(R'_m); domain B(e, floor(R'_m / 2)).
    """
    if mode not in ("chain", "literal"):
        raise ValueError(f"unknown mode {mode!r}")
    fc = fe.cayleys[m]
    tm = fe.trivializations[m]
    Rp = fe.radii[m]
    cp = cp or fe.control or ControlPair.identity()
    delta = F.epsilon if delta is None else delta
    elems = sorted(F.elements)
    pos = {x: i for i, x in enumerate(elems)}
    base = tuple(tm[x][x].apply(fe.sections[m][x]) for x in elems)
    dom = _domain(fc, Rp // 2)
    alpha = {}
    for g in dom:
        srcs, mots = [None] * len(elems), [None] * len(elems)
        ends = []
        for x in elems:
            gx = fc.mul_idx(g, x)
            if gx in pos:
                srcs[pos[x]] = pos[gx]
                mots[pos[x]] = _transition(tm, x, gx)
            else:
                ends.append(x)
        for x in ends:
            i = pos[x]
            if mode == "literal":
                srcs[i] = i
                mots[i] = RigidMotion.identity(fe.space.d)
                continue
            # walk backwards along u -> gu -> ... -> x to the chain start u
            ginv = fc.inv_idx(g)
            u = x
            while True:
                prev = fc.mul_idx(ginv, u)
                if prev not in pos or prev == x:
                    break
                u = prev
            shift = tuple(a - b for a, b in zip(base[i], base[pos[u]]))
            srcs[i] = pos[u]
            mots[i] = RigidMotion.translation(shift)
        alpha[g] = CoordinateMotion(tuple(srcs), tuple(mots))
    dprime = delta ** (1.0 / q) * cp.omega(Rp)
    notes = {
        "construction": "folner", "component": m, "mode": mode, "delta": delta,
        "delta_prime": dprime, "folner_ratio": F.ratio, "folner_literal_ratio": F.literal_ratio,
        "folner_size": len(elems),
        "envelope": ControlPair(cp.rho.scaled(1 - 2 * delta), cp.omega.shifted(2 * dprime)).to_json(),
    }
    return FragmentaryAction(fc, dom, Rp // 2, _fibre_product(fe, len(elems), q), alpha, base,
                             3 * dprime, q, notes)


@dataclass
class FragmentaryReport:
    max_defect: float
    epsilon: float
    triples: int
    witness: tuple | None
    isometric: bool

    @property
    def passed(self) -> bool:
        return self.max_defect <= self.epsilon + TOL

    def to_json(self) -> dict:
        return {"passed": self.passed, "max_defect": self.max_defect, "epsilon": self.epsilon,
                "triples": self.triples, "witness": list(self.witness) if self.witness else None,
                "isometric": self.isometric}


def verify_fragmentary(fa: FragmentaryAction) -> FragmentaryReport:
    """max d(y . alpha(g1 g2), (y . alpha(g1)) . alpha(g2)) over g1, g2, g1 g2 in the domain."""
    fc = fa.cayley
    dom = set(fa.domain)
    orbit = {g: fa.orbit(g) for g in fa.domain}
    worst, wit, n = 0.0, None, 0
    for g1 in fa.domain:
        for g2 in fa.domain:
            g12 = fc.mul_idx(g1, g2)
            if g12 not in dom:
                continue
            n += 1
            d = fa.space.dist(orbit[g12], fa.alpha[g2].apply(orbit[g1]))
            if d > worst:
                worst, wit = d, (g1, g2)
    iso = all(A.is_bijective() for A in fa.alpha.values())
    return FragmentaryReport(worst, fa.epsilon, n, wit, iso)


def orbit_control(fa: FragmentaryAction, cp: ControlPair) -> ControlReport:
    """Sandwich of the orbit map g -> y . alpha(g) on pairs of domain elements."""
    fc = fa.cayley
    orbit = {g: fa.orbit(g) for g in fa.domain}
    dom = fa.domain

    def pairs():
        for a in range(len(dom)):
            for b in range(a + 1, len(dom)):
                g, h = dom[a], dom[b]
                yield (g, h, fc.dist(g, h), fa.space.dist(orbit[g], orbit[h]))
    return check_sandwich(pairs(), cp)


def folner_envelope(fa: FragmentaryAction) -> ControlPair:
    env = fa.notes["envelope"]

    def pl(d):
        return PiecewiseLinear(tuple(tuple(p) for p in d["points"]), d["tail"])
    return ControlPair(pl(env["rho"]), pl(env["omega"]))


# ---------------------------------------------------------------------------
# finite-stage stand-in for ultralimits

@dataclass
class StageReport:
    bounded: bool
    sup_distance: dict            # label -> sup_m d(y(g)_m, base_m)
    point_stabilization: dict     # label -> first stage index from which d(y(g)_m, base_m) is constant
    pair_stabilization: dict      # (g1, g2) -> first stage index from which the pair distance is constant
    sandwich_from: dict           # (g1, g2) -> first stage index from which the sandwich holds
    non_stabilizing: list

    @property
    def passed(self) -> bool:
        return self.bounded and not self.non_stabilizing

    def to_json(self) -> dict:
        return {
            "passed": self.passed, "bounded": self.bounded,
            "sup_distance": {str(k): v for k, v in self.sup_distance.items()},
            "point_stabilization": {str(k): v for k, v in self.point_stabilization.items()},
            "pair_stabilization": {str(k): v for k, v in self.pair_stabilization.items()},
            "sandwich_from": {str(k): v for k, v in self.sandwich_from.items()},
            "non_stabilizing": [str(p) for p in self.non_stabilizing],
        }


def _tail_start(vals: Sequence[float], tol: float) -> int:
    i = len(vals) - 1
    while i > 0 and abs(vals[i - 1] - vals[-1]) <= tol:
        i -= 1
    return i


def finite_stage_limit_check(stages: Sequence[dict], pairs: Sequence[tuple],
                             cp: ControlPair | None = None, bounds: dict | None = None,
                             min_tail: int = 3, tol: float = TOL) -> StageReport:
    """Stage m supplies {"space", "base", "points": {label: point}}.

    ``pairs`` lists (g1, g2, limit distance).  A pair stabilizes when its
    distance is constant on a tail of at least ``min_tail`` stages.  Bounds,
    when given, cap sup_m d(y(g)_m, base_m) per label.
    """
    labels = sorted({g for st in stages for g in st["points"]}, key=repr)
    sup, pstab = {}, {}
    bounded = True
    for g in labels:
        vals = [st["space"].dist(st["points"][g], st["base"]) for st in stages]
        sup[g] = max(vals)
        pstab[g] = _tail_start(vals, tol)
        if bounds is not None and g in bounds and sup[g] > bounds[g] + tol:
            bounded = False
        if math.isinf(sup[g]):
            bounded = False
    stab, sand, bad = {}, {}, []
    for g1, g2, d in pairs:
        vals = [st["space"].dist(st["points"][g1], st["points"][g2]) for st in stages]
        k = _tail_start(vals, tol)
        stab[(g1, g2)] = k
        if len(vals) - k < min_tail:
            bad.append((g1, g2))
        if cp is not None:
            ok = [cp.rho(d) - tol <= v <= cp.omega(d) + tol for v in vals]
            j = len(ok)
            while j > 0 and ok[j - 1]:
                j -= 1
            sand[(g1, g2)] = j if j < len(ok) else None
    return StageReport(bounded, sup, pstab, stab, sand, bad)


def centered_lift(x: int, m: int) -> int:
    """Representative of x mod m in (-m/2, m/2]."""
    r = x % m
    return r - m if 2 * r > m else r


def cycle_stages(ms: Sequence[int], gs: Sequence[int]) -> list[dict]:
    """y(g)_m = f(beta_m^{-1}(g)) for |g| <= R_m = floor((m-1)/2), else f(e), with f the
    centered cycle lift into the line."""
    space = EuclideanSpace(1, 2.0)
    out = []
    for m in ms:
        Rm = (m - 1) // 2
        pts = {g: ((centered_lift(g, m),) if abs(g) <= Rm else (0,)) for g in gs}
        out.append({"space": space, "base": (0,), "points": pts, "m": m})
    return out
