"""Laplacian spectra of finite Cayley graphs, Poincare constants, embedded
expanders and concentration witnesses.

Conventions used throughout: the adjacency counts {s x, s^{-1} x : s in S}
with multiplicity, loops are dropped from the adjacency but kept in the
degree 2k, and edge sums run once over unordered edges with multiplicity.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

from .algebra import Group
from .marked import FiniteCayley, MarkedGroup, evaluate_word, parse_word
from .metrics import ControlPair, girth_diameter

DENSE_LIMIT = 5000
EDGE_CONVENTION = "unordered edges once, with multiplicity; loops dropped, kept in degree"


class Disconnected(RuntimeError):
    pass


class SubgroupTrivial(ValueError):
    pass


# ---------------------------------------------------------------------------
# matrices

@dataclass
class CayleyGraph:
    cayley: FiniteCayley
    adjacency: scipy.sparse.csr_matrix     # loops removed
    degree: int

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def combinatorial(self) -> scipy.sparse.csr_matrix:
        rows = np.asarray(self.adjacency.sum(axis=1)).ravel()
        return (scipy.sparse.diags(rows) - self.adjacency).tocsr()

    def normalized(self) -> scipy.sparse.csr_matrix:
        return (scipy.sparse.identity(self.n) - self.adjacency / self.degree).tocsr()


def cayley_graph(mg: MarkedGroup, fc: FiniteCayley | None = None) -> CayleyGraph:
    fc = fc or FiniteCayley(mg)
    if len(fc) != mg.group.order():
        raise Disconnected(f"{mg!r}: BFS reached {len(fc)} of {mg.group.order()} elements")
    G = mg.group
    letters = list(mg.generators) + list(mg.inverses)
    rows, cols = [], []
    for i, g in enumerate(fc.elements):
        for s in letters:
            j = fc.index[G.mul(s, g)]
            if j != i:
                rows.append(i)
                cols.append(j)
    n = len(fc)
    A = scipy.sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return CayleyGraph(fc, A, len(letters))


# ---------------------------------------------------------------------------
# eigensolvers

def lanczos_smallest(matvec: Callable[[np.ndarray], np.ndarray], n: int,
                     deflate: np.ndarray | None = None, max_steps: int = 400,
                     tol: float = 1e-10, seed: int = 0) -> tuple[float, int]:
    """Smallest eigenvalue of a symmetric operator on the complement of ``deflate``.

    Lanczos with full reorthogonalization; stops once the Ritz residual of the
    smallest Ritz value drops below ``tol``.  Returns (value, steps).
    """
    rng = np.random.default_rng(seed)
    u = None
    if deflate is not None:
        u = deflate / np.linalg.norm(deflate)

    def project(x):
        return x - u * (u @ x) if u is not None else x

    q = project(rng.standard_normal(n))
    q /= np.linalg.norm(q)
    Q = np.zeros((min(max_steps, n) + 1, n))
    Q[0] = q
    alpha, beta = [], []
    theta = math.nan
    for j in range(min(max_steps, n)):
        w = project(matvec(Q[j]))
        a = Q[j] @ w
        w -= a * Q[j]
        if j:
            w -= beta[-1] * Q[j - 1]
        for _ in range(2):
            w -= Q[: j + 1].T @ (Q[: j + 1] @ w)
        w = project(w)
        b = np.linalg.norm(w)
        alpha.append(a)
        if j % 5 == 4 or b < tol or j == min(max_steps, n) - 1:
            vals, vecs = scipy.linalg.eigh_tridiagonal(np.array(alpha), np.array(beta))
            theta = vals[0]
            if b * abs(vecs[-1, 0]) < tol or b < tol:
                return float(theta), j + 1
        beta.append(b)
        Q[j + 1] = w / b
    return float(theta), len(alpha)


def smallest_positive(M: scipy.sparse.spmatrix, seed: int = 0, method: str = "auto"
                      ) -> tuple[float, str]:
    """Smallest eigenvalue on the orthogonal complement of the constants."""
    n = M.shape[0]
    if n == 1:
        return math.inf, "trivial"
    if method == "dense" or (method == "auto" and n < DENSE_LIMIT):
        # constants are an eigenvector; with loops their eigenvalue is not 0, so project them out
        D = M.toarray()
        D -= D.mean(axis=0, keepdims=True)
        D -= D.mean(axis=1, keepdims=True)
        vals = scipy.linalg.eigh(D, eigvals_only=True)
        return float(vals[1]), "dense"
    val, _ = lanczos_smallest(lambda x: M @ x, n, np.ones(n), seed=seed)
    return val, "lanczos"


def lambda1(mg: MarkedGroup, method: str = "auto", seed: int = 0,
            graph: CayleyGraph | None = None) -> float:
    """First positive eigenvalue of I - A/deg."""
    cg = graph or cayley_graph(mg)
    return smallest_positive(cg.normalized(), seed, method)[0]


def combinatorial_gap(mg: MarkedGroup, method: str = "auto", seed: int = 0,
                      graph: CayleyGraph | None = None) -> float:
    cg = graph or cayley_graph(mg)
    return smallest_positive(cg.combinatorial(), seed, method)[0]


# ---------------------------------------------------------------------------
# reports

@dataclass
class SpectrumReport:
    family: str
    m: str
    vertices: int
    degree: int
    lambda1: float
    poincare: float
    girth: float
    diameter: int
    method: str
    convention: str = EDGE_CONVENTION

    def row(self) -> list:
        g = "inf" if math.isinf(self.girth) else int(self.girth)
        return [self.family, self.m, self.vertices, self.degree, f"{self.lambda1:.12g}",
                f"{self.poincare:.12g}", g, self.diameter]


TABLE_COLUMNS = ["family", "m", "|V|", "deg", "lambda1", "C_exact", "girth", "diam"]


def spectrum_report(mg: MarkedGroup, family: str = "", m: str = "", method: str = "auto",
                    seed: int = 0) -> SpectrumReport:
    cg = cayley_graph(mg)
    l1, how = smallest_positive(cg.normalized(), seed, method)
    lc, _ = smallest_positive(cg.combinatorial(), seed, method)
    girth, diam = girth_diameter(mg)
    return SpectrumReport(family, str(m), cg.n, cg.degree, l1, 1.0 / lc, girth, diam, how)


def spectrum_table_csv(reports: Sequence[SpectrumReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def spectrum_table_json(reports: Sequence[SpectrumReport]) -> str:
    rows = []
    for r in reports:
        d = asdict(r)
        if math.isinf(d["girth"]):
            d["girth"] = "inf"
        rows.append(d)
    return json.dumps({"convention": EDGE_CONVENTION, "rows": rows}, sort_keys=True, indent=1)


# ---------------------------------------------------------------------------
# Poincare inequalities

@dataclass
class PoincareReport:
    q: float
    d: int
    trials: int
    C: float
    exact: float | None
    best_ratio: float
    passed: bool
    seed: int
    convention: str = EDGE_CONVENTION


def _edge_list(cg: CayleyGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    U = scipy.sparse.triu(cg.adjacency, k=1).tocoo()
    return U.row, U.col, U.data


def poincare_ratio(f: np.ndarray, edges, q: float) -> np.ndarray:
    """Ratios mean_v |f(v) - m(f)|^q / mean_v-normalised edge energy for a batch.

    f has shape (batch, n, d); norms are Euclidean on R^d.
    """
    r, c, w = edges
    mean = f.mean(axis=1, keepdims=True)
    dev = (np.linalg.norm(f - mean, axis=2) ** q).sum(axis=1)
    en = ((np.linalg.norm(f[:, r, :] - f[:, c, :], axis=2) ** q) * w).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(en > 0, dev / en, 0.0)
    return out


def poincare_check(mg: MarkedGroup, q: float = 2.0, d: int = 1, trials: int = 1000,
                   C: float | None = None, seed: int = 0, refine_steps: int = 50,
                   batch: int = 500) -> PoincareReport:
    """Largest observed ratio of the q-moment to the edge energy.

    For q = 2 the optimal constant is 1/lambda_min^+ of the combinatorial
    Laplacian; C defaults to it.  Random Gaussian maps are followed by
    ``refine_steps`` smoothing steps f <- (c I - L) f, which can only raise
    the q = 2 ratio.
    """
    cg = cayley_graph(mg)
    L = cg.combinatorial()
    exact = None
    if q == 2:
        exact = 1.0 / smallest_positive(L, seed)[0]
    if C is None:
        if exact is None:
            raise ValueError("C is required unless q = 2")
        C = exact
    edges = _edge_list(cg)
    rng = np.random.default_rng(seed)
    n = cg.n
    c = 2.0 * cg.degree
    best = 0.0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        f = rng.standard_normal((b, n, d))
        best = max(best, float(poincare_ratio(f, edges, q).max()))
        done += b
    if refine_steps:
        f = rng.standard_normal((1, n, d))
        for _ in range(refine_steps):
            g = f[0]
            g = c * g - L @ g
            g -= g.mean(axis=0)
            g /= np.linalg.norm(g)
            f = g[None]
            best = max(best, float(poincare_ratio(f, edges, q).max()))
    return PoincareReport(q, d, trials, C, exact, best, best <= C + 1e-9, seed)


# ---------------------------------------------------------------------------
# embedded expanders

@dataclass
class EmbeddedExpanderCertificate:
    indices: list
    subgroup_sizes: list
    words: list
    lipschitz: int                 # D = longest word
    degree_bound: int              # 2 l
    lambda1: list
    lipschitz_verified: list
    sizes_increasing: bool
    inf_lambda1: float
    subgroups: list = field(repr=False, default_factory=list)   # marked subgroups
    ambients: list = field(repr=False, default_factory=list)

    def to_json(self) -> dict:
        return {
            "indices": [str(i) for i in self.indices],
            "subgroup_sizes": self.subgroup_sizes,
            "words": self.words,
            "D": self.lipschitz,
            "degree_bound": self.degree_bound,
            "lambda1": self.lambda1,
            "lipschitz_verified": self.lipschitz_verified,
            "sizes_increasing": self.sizes_increasing,
            "inf_lambda1": self.inf_lambda1,
            "convention": EDGE_CONVENTION,
        }


def subgroup_marking(mg: MarkedGroup, words: Sequence) -> MarkedGroup:
    parsed = [parse_word(w) if isinstance(w, str) else list(w) for w in words]
    gens = tuple(evaluate_word(mg, w) for w in parsed)
    if all(g == mg.identity for g in gens):
        raise SubgroupTrivial("every word evaluates to the identity")
    return MarkedGroup(mg.group, gens, f"<{', '.join(map(str, words))}> in {mg.name}")


def lipschitz_holds(ambient: FiniteCayley, sub: FiniteCayley, D: int) -> bool:
    """|h|_Gamma <= D |h|_Lambda for every h in H, which by right invariance is
    d_Gamma(v, w) <= D d_Lambda(v, w) for all v, w in H."""
    return all(ambient.length[ambient.index[h]] <= D * lh
               for h, lh in zip(sub.elements, sub.length))


def embedded_expander_search(seq: Sequence[MarkedGroup], words: Sequence,
                             labels: Sequence | None = None, seed: int = 0
                             ) -> EmbeddedExpanderCertificate:
    if not words:
        raise ValueError("need at least one word")
    parsed = [parse_word(w) if isinstance(w, str) else list(w) for w in words]
    D = max(len(w) for w in parsed)
    sizes, l1s, lips, subs, ambs = [], [], [], [], []
    for mg in seq:
        H = subgroup_marking(mg, words)
        fcH = FiniteCayley(H)
        fcG = FiniteCayley(mg)
        Hmg = MarkedGroup(_Subgroup(mg.group, fcH), H.generators, H.name)
        sizes.append(len(fcH))
        l1s.append(lambda1(Hmg, seed=seed, graph=cayley_graph(Hmg, fcH)))
        lips.append(lipschitz_holds(fcG, fcH, D))
        subs.append(Hmg)
        ambs.append(mg)
    inc = all(a < b for a, b in zip(sizes, sizes[1:]))
    return EmbeddedExpanderCertificate(
        list(labels) if labels is not None else list(range(len(seq))), sizes,
        [str(w) for w in words], D, 2 * len(words), l1s, lips, inc, min(l1s), subs, ambs)


class _Subgroup(Group):
    """Finite subgroup view with the ambient multiplication and BFS-counted order."""

    def __init__(self, ambient, fc: FiniteCayley):
        self.ambient = ambient
        self._n = len(fc)
        self._set = set(fc.elements)
        self.name = f"subgroup of order {self._n} in {ambient.name}"

    def identity(self):
        return self.ambient.identity()

    def mul(self, a, b):
        return self.ambient.mul(a, b)

    def inv(self, a):
        return self.ambient.inv(a)

    def contains(self, a) -> bool:
        return a in self._set

    def order(self) -> int:
        return self._n

    def elements(self):
        return iter(self._set)

    def encode(self, a) -> bytes:
        return self.ambient.encode(a)


# ---------------------------------------------------------------------------
# concentration

@dataclass
class ConcentrationRow:
    index: str
    vertices: int
    moment: float
    energy: float
    C: float
    moment_bound: float
    radius: float
    concentrated: int
    separation: int
    rho_at_separation: float
    violation: bool
    edge_bound_holds: bool


@dataclass
class ConcentrationReport:
    q: float
    rows: list
    observed: list
    convention: str = EDGE_CONVENTION

    @property
    def violation(self) -> bool:
        return any(r.violation for r in self.rows)

    def to_json(self) -> dict:
        return {"q": self.q, "convention": self.convention,
                "a_priori": [asdict(r) for r in self.rows],
                "observed": [asdict(r) for r in self.observed]}


def _separation(ambient: FiniteCayley, count: int) -> int:
    """min s with |B(s)| >= count: any count distinct points contain a pair at distance >= s."""
    sizes = np.bincount(np.asarray(ambient.length))
    total = 0
    for s, k in enumerate(sizes):
        total += int(k)
        if total >= count:
            return s
    return int(len(sizes))


def _witness_row(label, fcG: FiniteCayley, n: int, moment: float, energy: float, C: float,
                 bound: float, q: float, cp: ControlPair, edge_ok: bool) -> ConcentrationRow:
    r = (2.0 * bound) ** (1.0 / q) if bound > 0 else 0.0
    forced = math.ceil(n * (1.0 - bound / r ** q)) if r > 0 else n
    s = _separation(fcG, forced)
    rho = cp.rho(s)
    return ConcentrationRow(str(label), n, moment, energy, C, bound, r, forced, s, rho,
                            rho > 2 * r + 1e-12, edge_ok)


def concentration_witness(cert: EmbeddedExpanderCertificate, f: Callable[[int, object], Sequence[float]],
                          cp: ControlPair, q: float = 2.0, C: Sequence[float] | None = None
                          ) -> ConcentrationReport:
    """Quantitative concentration on each embedded expander.

    f(n, g) is the candidate image of ambient element g at stage n.  Two rows
    per stage: an a priori one, using the moment bound C (#E / #V) omega(D)^q
    valid for any map obeying omega on Lambda-edges, and an observed one,
    using the moment of f itself.  Markov's inequality keeps at least half of
    the vertices within r = (2 M)^{1/q} of the mean; among that many distinct
    vertices two are at ambient distance >= s, so rho(s) > 2 r rules out the
    control pair at this scale.
    """
    rows, obs = [], []
    for k, (H, mg) in enumerate(zip(cert.subgroups, cert.ambients)):
        fcH = FiniteCayley(H)
        fcG = FiniteCayley(mg)
        cg = cayley_graph(H, fcH)
        n = cg.n
        if C is not None:
            Ck = C[k]
        elif q == 2:
            Ck = 1.0 / smallest_positive(cg.combinatorial())[0]
        else:
            raise ValueError("C is required unless q = 2")
        pts = np.array([np.asarray(f(k, g), dtype=float) for g in fcH.elements])
        if pts.ndim == 1:
            pts = pts[:, None]
        r_, c_, w_ = _edge_list(cg)
        moment = float((np.linalg.norm(pts - pts.mean(axis=0), axis=1) ** q).sum() / n)
        steps = np.linalg.norm(pts[r_] - pts[c_], axis=1)
        energy = float(((steps ** q) * w_).sum() / n)
        edges_per_vertex = float(w_.sum()) / n
        omegaD = cp.omega(cert.lipschitz)
        edge_ok = bool(np.all(steps <= omegaD + 1e-9))
        bound = Ck * edges_per_vertex * omegaD ** q
        label = cert.indices[k]
        rows.append(_witness_row(label, fcG, n, moment, energy, Ck, bound, q, cp, edge_ok))
        obs.append(_witness_row(label, fcG, n, moment, energy, Ck, moment, q, cp, edge_ok))
    return ConcentrationReport(q, rows, obs)
