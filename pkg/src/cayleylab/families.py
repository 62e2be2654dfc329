"""Explicit marking families and their limit markings.

SL markings use sigma = I + E_12, upsilon = I + t E_12, the cyclic shift tau
(1s at (i+1, i) and (1, m)) and sigma' = transpose of sigma.  Limit groups
use the matching elements of the finitary matrix groups extended by Z, with
tau becoming the index shift.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .algebra import (
    Cyclic, DirectProduct, FiniteRing, Group, IntegerRing, Integers, MatrixGroup,
    MatrixShift, Permutations, PolyRing, SymSemidirect, Wreath,
    explicit_ring, make_field, make_zmod,
)
from .marked import FiniteCayley, MarkedGroup, ball, convergence_radius


class EvenRank(ValueError):
    pass


class NoDisjointCenters(RuntimeError):
    pass


class IdentityGenerator(ValueError):
    pass


# ---------------------------------------------------------------------------
# small named groups

def cyclic(m: int) -> MarkedGroup:
    return MarkedGroup(Cyclic(m), (1,), f"(Z/{m}Z;1)")


def integers() -> MarkedGroup:
    return MarkedGroup(Integers(), (1,), "(Z;1)")


def sym3() -> MarkedGroup:
    """Sym(3) marked by a transposition and a 3-cycle."""
    S = Permutations(3)
    return MarkedGroup(S, (S.from_cycles(3, (0, 1)), S.from_cycles(3, (0, 1, 2))), "Sym(3)")


def element_order(G: Group, g, cap: int = 1 << 20) -> int:
    e = G.identity()
    x, k = g, 1
    while x != e:
        x = G.mul(x, g)
        k += 1
        if k > cap:
            raise RuntimeError("element order exceeds cap")
    return k


# ---------------------------------------------------------------------------
# SL markings

def _sl_elements(G: MatrixGroup, t: int) -> dict:
    m, R = G.m, G.ring
    sigma = G.elementary(0, 1, R.one)
    tau = [0] * (m * m)
    for i in range(m - 1):
        tau[(i + 1) * m + i] = R.one
    tau[0 * m + (m - 1)] = R.one
    return {
        "sigma": sigma,
        "sigma_t": G.elementary(1, 0, R.one),
        "upsilon": G.elementary(0, 1, t),
        "tau": tuple(tau),
    }


def sl_ring(p: int, n: int, explicit: bool = False) -> tuple[FiniteRing, int]:
    """Coefficient ring and the element placed in upsilon.

    Fields use their least primitive element; the explicit ring F_p[t]/(t^n - t)
    uses the class of t.
    """
    if explicit:
        R = explicit_ring(p, n)
        return R, R.t
    R = make_field(p, n)
    return R, R.primitive_element


def sl_markings(m: int, p: int, n: int, explicit: bool = False) -> tuple[MarkedGroup, MarkedGroup]:
    """(S_m, T_m) = ((sigma, upsilon, tau), (sigma, sigma', upsilon, tau)) over SL(m, F_{p^n})."""
    if m % 2 == 0:
        raise EvenRank(f"rank {m} is even")
    if m < 3:
        raise ValueError("rank must be at least 3")
    R, t = sl_ring(p, n, explicit)
    G = MatrixGroup(m, R)
    e = _sl_elements(G, t)
    S = MarkedGroup(G, (e["sigma"], e["upsilon"], e["tau"]), f"SL({m},{R!r});S[t={t}]")
    T = MarkedGroup(G, (e["sigma"], e["sigma_t"], e["upsilon"], e["tau"]), f"SL({m},{R!r});T[t={t}]")
    return S, T


def slz_markings(m: int, l: int) -> tuple[MarkedGroup, MarkedGroup]:
    """(P_m, Q_m) = ((sigma, tau), (sigma, sigma', tau)) over SL(m, Z/lZ)."""
    if m % 2 == 0:
        raise EvenRank(f"rank {m} is even")
    if m < 3 or l < 2:
        raise ValueError("need m >= 3 and l >= 2")
    G = MatrixGroup(m, make_zmod(l))
    e = _sl_elements(G, 1)
    P = MarkedGroup(G, (e["sigma"], e["tau"]), f"SL({m},Z/{l}Z);P")
    Q = MarkedGroup(G, (e["sigma"], e["sigma_t"], e["tau"]), f"SL({m},Z/{l}Z);Q")
    return P, Q


def selberg(p: int) -> MarkedGroup:
    if p < 3 or p % 2 == 0:
        raise ValueError("p must be an odd prime")
    G = MatrixGroup(2, make_zmod(p))
    a = G.from_rows([[1, 2], [0, 1]])
    b = G.from_rows([[1, 0], [2, 1]])
    return MarkedGroup(G, (a, b), f"Selberg({p})")


def sl_limit(p: int, transpose: bool = False) -> MarkedGroup:
    """Limit markings: (sigma, upsilon, tau) over N_>(Z, F_p[t]) x| Z, or with sigma'
    over SL(Z, F_p[t]) x| Z."""
    R = PolyRing(p)
    G = MatrixShift(R, "SL" if transpose else "N")
    sigma = G.elementary(0, 1, R.one)
    ups = G.elementary(0, 1, R.t)
    tau = G.shift(1)
    if transpose:
        return MarkedGroup(G, (sigma, G.elementary(1, 0, R.one), ups, tau), f"limit T over {G.name}")
    return MarkedGroup(G, (sigma, ups, tau), f"limit S over {G.name}")


def slz_limit(transpose: bool = False) -> MarkedGroup:
    """Limits of (P_m) and (Q_m) with integer coefficients."""
    R = IntegerRing()
    G = MatrixShift(R, "SL" if transpose else "N")
    sigma = G.elementary(0, 1, 1)
    tau = G.shift(1)
    if transpose:
        return MarkedGroup(G, (sigma, G.elementary(1, 0, 1), tau), f"limit Q over {G.name}")
    return MarkedGroup(G, (sigma, tau), f"limit P over {G.name}")


# ---------------------------------------------------------------------------
# wreath markings and absorption

def standard_wreath_marking(mgG: MarkedGroup, mgH: MarkedGroup) -> MarkedGroup:
    W = Wreath(mgG.group, mgH.group)
    gens = [W.lamp(s) for s in mgG.generators] + [W.shift(t) for t in mgH.generators]
    return MarkedGroup(W, tuple(gens), f"{mgG.name or mgG.group.name} wr {mgH.name or mgH.group.name}")


def _length_table(mgP: MarkedGroup, radius: int) -> dict:
    b = ball(mgP, radius)
    return dict(zip(b.vertices, b.dist)), b


def find_centers(mgP: MarkedGroup, k: int, r: int, search_radius: int | None = None) -> list:
    """Greedy centers x_1 = e, x_2, ... in BFS order with pairwise distance > 2r.

    Closed r-balls around the returned points are pairwise disjoint.
    """
    P = mgP.group
    if P.is_finite:
        fc = FiniteCayley(mgP)
        chosen = [0]
        for v in range(len(fc)):
            if len(chosen) == k:
                break
            if all(fc.dist(v, c) > 2 * r for c in chosen):
                chosen.append(v)
        if len(chosen) < k:
            raise NoDisjointCenters(f"{mgP!r} has no {k} disjoint {r}-balls")
        return [fc.elements[i] for i in chosen]
    R0 = search_radius if search_radius is not None else k * (2 * r + 1)
    length, b = _length_table(mgP, 2 * R0)
    chosen = [P.identity()]
    for v, d in zip(b.vertices, b.dist):
        if len(chosen) == k or d > R0:
            break
        if all(length.get(P.mul(v, P.inv(c)), 2 * R0 + 1) > 2 * r for c in chosen):
            chosen.append(v)
    if len(chosen) < k:
        raise NoDisjointCenters(f"no {k} disjoint {r}-balls within radius {R0}")
    return chosen


def absorption_marking(mgG: MarkedGroup, mgP: MarkedGroup, r: int) -> tuple[MarkedGroup, list]:
    """Lamps g_j placed at greedy centers x_j, followed by the top generators."""
    centers = find_centers(mgP, mgG.k, r)
    W = Wreath(mgG.group, mgP.group)
    gens = [W.lamp(g, x) for g, x in zip(mgG.generators, centers)]
    gens += [W.shift(t) for t in mgP.generators]
    name = f"{mgG.name or mgG.group.name} wr {mgP.name or mgP.group.name} absorbed r={r}"
    return MarkedGroup(W, tuple(gens), name), centers


def cyclic_absorption_radius(k: int, m: int) -> int:
    """r_m = min(R_m, floor(diam(Z/mZ; 1) / 4k)) with R_m the convergence radius to (Z; 1)."""
    R_m = convergence_radius(cyclic(m), integers(), m)
    diam = m // 2
    return min(R_m, diam // (4 * k))


def absorption_cyclic(mgG: MarkedGroup, m: int) -> tuple[MarkedGroup, list, int]:
    r = cyclic_absorption_radius(mgG.k, m)
    mg, centers = absorption_marking(mgG, cyclic(m), r)
    return mg, centers, r


def abelian_base(mgG: MarkedGroup) -> MarkedGroup:
    """C_1 x ... x C_k with C_j cyclic of the order of g_j, marked by unit vectors."""
    orders = [element_order(mgG.group, g) for g in mgG.generators]
    D = DirectProduct([Cyclic(o) for o in orders])
    gens = tuple(D.embed(j, 1 % o) for j, o in enumerate(orders))
    return MarkedGroup(D, gens, "x".join(f"C{o}" for o in orders))


def absorption_limit(mgG: MarkedGroup, mgP: MarkedGroup | None = None) -> MarkedGroup:
    """(C_1 x ... x C_k) wr P with the standard marking (P defaults to (Z; 1))."""
    return standard_wreath_marking(abelian_base(mgG), mgP or integers())


@dataclass
class CommutationReport:
    radius: int
    conjugates_in_ball: int
    pairs_checked: int
    exceptions: list


def conjugate_commutation(mg: MarkedGroup, k: int, r: int,
                          tops: Sequence | None = None) -> CommutationReport:
    """Check that conjugates tau^{-1} s tau of the first k generators commute
    whenever both factors and their product lie in B(e, r)."""
    W = mg.group
    b = ball(mg, r)
    inball = set(b.vertices)
    if tops is None:
        tops = list(W.top.elements())
    conj = []
    for j in range(k):
        s = mg.generators[j]
        for t in tops:
            h = W.shift(t)
            g = W.mul(W.mul(W.inv(h), s), h)
            if g in inball:
                conj.append(g)
    conj = list(dict.fromkeys(conj))
    pairs = 0
    bad = []
    for a, c in itertools.product(conj, repeat=2):
        if W.mul(a, c) not in inball:
            continue
        pairs += 1
        if W.mul(a, c) != W.mul(c, a):
            bad.append((a, c))
    return CommutationReport(r, len(conj), pairs, bad)


# ---------------------------------------------------------------------------
# products

def direct_product_marking(mgG: MarkedGroup, mgH: MarkedGroup) -> MarkedGroup:
    D = DirectProduct([mgG.group, mgH.group])
    eG, eH = mgG.identity, mgH.identity
    gens = tuple((s, eH) for s in mgG.generators) + tuple((eG, t) for t in mgH.generators)
    return MarkedGroup(D, gens, f"{mgG.name or mgG.group.name} x {mgH.name or mgH.group.name}")


def upper_triangular_index(l: int) -> tuple[int, int]:
    """l-th pair (i, j), i <= j, in the order (0,0) < (0,1) < (1,1) < (0,2) < ..."""
    j = 0
    while (j + 1) * (j + 2) // 2 <= l:
        j += 1
    i = l - j * (j + 1) // 2
    return i, j


def upper_triangular_pairs(nG: int, nH: int) -> list[tuple[int, int]]:
    out = []
    for j in range(nH):
        for i in range(min(j + 1, nG)):
            out.append((i, j))
    return out


def upper_triangular_product(seqG: Sequence[MarkedGroup], seqH: Sequence[MarkedGroup]
                             ) -> list[MarkedGroup]:
    """G_i x H_j for i <= j, enumerated by j then i."""
    return [direct_product_marking(seqG[i], seqH[j])
            for i, j in upper_triangular_pairs(len(seqG), len(seqH))]


# ---------------------------------------------------------------------------
# symmetric-group encoding

def sym_encoding(mg: MarkedGroup) -> MarkedGroup:
    """(chi_{s_1}, ..., chi_{s_k}, theta_{s_1}, ..., theta_{s_k}).

    chi_g is the transposition of e and g; theta_g is right multiplication by g.
    Finite groups give Sym(G); infinite ones give Sym<oo(G) x| G.
    """
    e = mg.identity
    for j, s in enumerate(mg.generators):
        if s == e:
            raise IdentityGenerator(f"generator {j} is the identity")
    S = SymSemidirect(mg.group)
    chis = tuple(S.transposition(e, s) for s in mg.generators)
    thetas = tuple(S.translation(s) for s in mg.generators)
    return MarkedGroup(S, chis + thetas, f"Sym-encoding of {mg.name or mg.group.name}")


# ---------------------------------------------------------------------------
# wreath triples over SL(2n+3, F_q)

@dataclass
class WreathTriple:
    n: int
    rank: int
    field: str
    upsilon_entry: int
    R: int
    diameter: int
    r: int
    centers: list
    S: MarkedGroup
    T: MarkedGroup
    U: MarkedGroup
    h: list          # h_i^{-1} s_i h_i = t_i
    kk: list         # k_i^{-1} s_i k_i = u_i
    verified_h: bool
    verified_k: bool
    conjugator_source: str


def conjugator(G: Group, a, b, candidates) -> object | None:
    """First c among candidates with c^{-1} a c = b."""
    for c in candidates:
        if G.mul(G.mul(G.inv(c), a), c) == b:
            return c
    return None


def _explicit_swap(G: MatrixGroup) -> tuple:
    """The matrix e_1 -> e_2, e_2 -> -e_1, fixing the other basis vectors."""
    R = G.ring
    rows = [[R.one if i == j else R.zero for j in range(G.m)] for i in range(G.m)]
    rows[0][0] = rows[1][1] = R.zero
    rows[0][1] = R.neg(R.one)
    rows[1][0] = R.one
    return tuple(x for row in rows for x in row)


def theorem_d_markings(lef_seq: Sequence[MarkedGroup], p: int, l_seq: Sequence[int],
                       Rmax: int = 6, search: bool = False,
                       explicit: bool = False) -> list[WreathTriple]:
    """(S_n, T_n, U_n) over G_n wr SL(2n+3, F_{p^{l_n}}) with conjugator checks.

    ``search`` replaces the explicit conjugator of sigma^{-1} and sigma' by an
    exhaustive scan of the SL group in BFS order.
    """
    if not lef_seq:
        raise ValueError("need at least one input group")
    out = []
    for n, mgG in enumerate(lef_seq):
        m = 2 * n + 3
        k = mgG.k
        S_sl, T_sl = sl_markings(m, p, l_seq[n], explicit)
        SL = S_sl.group
        sigma, ups, tau = S_sl.generators
        sigma_t = T_sl.generators[1]
        R_n = convergence_radius(S_sl, sl_limit(p), Rmax)
        fc = FiniteCayley(S_sl)
        diam = fc.diameter
        r = min(R_n, diam // (4 * k))
        centers = find_centers(S_sl, k, r)
        W = Wreath(mgG.group, SL)
        e_sl = SL.identity()
        sigma_inv = SL.inv(sigma)
        tail_S = [W.shift(sigma), W.shift(sigma_inv), W.shift(ups), W.shift(tau)]
        tail_U = [W.shift(sigma), W.shift(sigma_t), W.shift(ups), W.shift(tau)]
        S = MarkedGroup(W, tuple([W.lamp(g, x) for g, x in zip(mgG.generators, centers)] + tail_S),
                        f"S_{n}")
        T = MarkedGroup(W, tuple([W.lamp(g, e_sl) for g in mgG.generators] + tail_S), f"T_{n}")
        U = MarkedGroup(W, tuple([W.lamp(g, e_sl) for g in mgG.generators] + tail_U), f"U_{n}")
        h = [W.shift(x) for x in centers] + [W.identity()] * 4
        if search:
            c = conjugator(SL, sigma_inv, sigma_t, fc.elements)
            source = "search"
        else:
            c = _explicit_swap(SL)
            source = "explicit"
            if conjugator(SL, sigma_inv, sigma_t, [c]) is None:
                c = conjugator(SL, sigma_inv, sigma_t, fc.elements)
                source = "search"
        kk = list(h[:k]) + [W.identity(), W.shift(c) if c is not None else None,
                            W.identity(), W.identity()]

        def conj_ok(g, s, t):
            return g is not None and W.mul(W.mul(W.inv(g), s), g) == t

        ok_h = all(conj_ok(g, s, t) for g, s, t in zip(h, S.generators, T.generators))
        ok_k = all(conj_ok(g, s, u) for g, s, u in zip(kk, S.generators, U.generators))
        out.append(WreathTriple(n, m, repr(SL.ring), ups[1], R_n, diam, r, centers, S, T, U,
                                h, kk, ok_h, ok_k, source))
    return out


# ---------------------------------------------------------------------------
# symmetric pairs over Sym(K_l)

@dataclass
class SymmetricPair:
    l: int
    rank: int
    cyclic_order: int
    field: str
    K: DirectProduct
    Xi: MarkedGroup
    Omega: MarkedGroup
    I: MarkedGroup
    J: MarkedGroup


def theorem_e_markings(l: int, p: int, n_seq: Mapping[int, int] | Sequence[int],
                       explicit: bool = False) -> SymmetricPair:
    """Xi_l (8 generators) and Omega_l = Xi_l + theta_{b'_1} over Sym(K_l).

    K_l = SL(m, F_{p^{n_m}}) x Z/nZ where (m, n) is the l-th upper triangular
    pair of (odd m >= 3) x (n >= 3).  ``n_seq`` maps m to n_m (a sequence is
    indexed by (m - 3) / 2).
    """
    i, j = upper_triangular_index(l)
    m, n = 2 * i + 3, j + 3
    deg = n_seq[m] if isinstance(n_seq, Mapping) else n_seq[i]
    S_sl, T_sl = sl_markings(m, p, deg, explicit)
    I = direct_product_marking(S_sl, cyclic(n))
    J = direct_product_marking(T_sl, cyclic(n))
    Xi = sym_encoding(I)
    Xi = MarkedGroup(Xi.group, Xi.generators, f"Xi_{l}")
    b1_prime = J.generators[1]
    Omega = MarkedGroup(Xi.group, Xi.generators + (Xi.group.translation(b1_prime),), f"Omega_{l}")
    return SymmetricPair(l, m, n, repr(S_sl.group.ring), I.group, Xi, Omega, I, J)


# ---------------------------------------------------------------------------
# declarative families

@dataclass
class Family:
    name: str
    labels: list
    build: Callable[[int], MarkedGroup]
    limit: MarkedGroup | None = None
    provenance: str = ""
    derived_limit: bool = False
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.labels)

    def member(self, i: int) -> MarkedGroup:
        return self.build(self.labels[i])


def _int_list(v, key: str) -> list[int]:
    if isinstance(v, int):
        return [v]
    if isinstance(v, Mapping):
        step = v.get("step", 1)
        return list(range(v["start"], v["stop"] + 1, step))
    if isinstance(v, (list, tuple)):
        return [int(x) for x in v]
    raise ValueError(f"{key}: expected int, list or {{start, stop}}")


def named_group(text: str) -> MarkedGroup:
    """'sym3', 'Z', 'Z/7', 'selberg/5'."""
    if text == "sym3":
        return sym3()
    if text == "Z":
        return integers()
    if text.startswith("Z/"):
        return cyclic(int(text[2:]))
    if text.startswith("selberg/"):
        return selberg(int(text[8:]))
    raise ValueError(f"unknown group {text!r}")


FAMILY_PARAMS = {
    "cyclic": {"m"},
    "constant": {"group", "count"},
    "selberg": {"p"},
    "sl": {"m", "p", "n", "marking", "explicit"},
    "slz": {"m", "l", "marking"},
    "absorption": {"m", "base"},
    "standard_wreath": {"m", "base"},
    "sym_cyclic": {"m"},
    "selberg_products": {"p"},
    "cyclic_products": {"m"},
}


def build_family(name: str, params: Mapping) -> Family:
    if name not in FAMILY_PARAMS:
        raise ValueError(f"unknown family {name!r}")
    unknown = set(params) - FAMILY_PARAMS[name]
    if unknown:
        raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
    if name == "cyclic":
        return Family(name, _int_list(params["m"], "m"), cyclic, integers(), "cyclic approximations of Z")
    if name == "constant":
        g = named_group(params["group"])
        count = int(params.get("count", 5))
        return Family(name, list(range(count)), lambda _: g, g, "constant sequence")
    if name == "selberg":
        return Family(name, _int_list(params["p"], "p"), selberg, None, "Selberg pairs")
    if name == "sl":
        p = int(params["p"])
        marking = params.get("marking", "S")
        explicit = bool(params.get("explicit", False))
        nmap = params["n"]
        ms = _int_list(params["m"], "m")
        if isinstance(nmap, Mapping):
            nmap = {int(a): int(b) for a, b in nmap.items()}
        elif isinstance(nmap, int):
            nmap = {m: nmap for m in ms}
        else:
            nmap = dict(zip(ms, _int_list(nmap, "n")))
        idx = 0 if marking == "S" else 1

        def build(m):
            return sl_markings(m, p, nmap[m], explicit)[idx]
        return Family(name, ms, build, sl_limit(p, transpose=(marking == "T")),
                      "SL generator systems", derived_limit=True,
                      extra={"n": nmap, "marking": marking, "explicit": explicit})
    if name == "slz":
        l_vals = _int_list(params["l"], "l")
        ms = _int_list(params["m"], "m")
        marking = params.get("marking", "P")
        idx = 0 if marking == "P" else 1
        pairs = list(zip(ms, l_vals)) if len(ms) == len(l_vals) else [(ms[0], l) for l in l_vals]
        return Family(name, pairs, lambda ml: slz_markings(*ml)[idx],
                      slz_limit(transpose=(marking == "Q")), "SL over Z/lZ", derived_limit=True)
    if name in ("absorption", "standard_wreath"):
        base = named_group(params.get("base", "sym3"))
        ms = _int_list(params["m"], "m")
        if name == "absorption":
            return Family(name, ms, lambda m: absorption_cyclic(base, m)[0],
                          absorption_limit(base), "absorption markings", derived_limit=True)
        return Family(name, ms, lambda m: standard_wreath_marking(base, cyclic(m)),
                      standard_wreath_marking(base, integers()), "standard wreath markings")
    if name == "sym_cyclic":
        return Family(name, _int_list(params["m"], "m"), lambda m: sym_encoding(cyclic(m)),
                      sym_encoding(integers()), "symmetric-group encoding of cyclic groups")
    if name == "selberg_products":
        ps = _int_list(params["p"], "p")
        seq = [selberg(p) for p in ps]
        pairs = upper_triangular_pairs(len(ps), len(ps))
        return Family(name, pairs, lambda ij: direct_product_marking(seq[ij[0]], seq[ij[1]]),
                      None, "upper triangular product of Selberg pairs")
    if name == "cyclic_products":
        ms = _int_list(params["m"], "m")
        pairs = upper_triangular_pairs(len(ms), len(ms))
        return Family(name, pairs,
                      lambda ij: direct_product_marking(cyclic(ms[ij[0]]), cyclic(ms[ij[1]])),
                      None, "upper triangular product of cyclic groups")
    raise AssertionError(name)  # pragma: no cover
