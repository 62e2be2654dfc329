"""Marked groups, Cayley-diagram balls and their isomorphism tests.

Diagram edges go from g to s_j g (left multiplication), so the word metric
d(g, h) = |g h^{-1}| is right-invariant.
"""

from __future__ import annotations

import re
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .algebra import Group

DEFAULT_BALL_CAP = 2_000_000


class BallOverflow(RuntimeError):
    pass


class GenerationFailure(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class MarkedGroup:
    group: Group
    generators: tuple
    name: str = ""
    inverses: tuple = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "inverses", tuple(self.group.inv(s) for s in self.generators))
        if not self.generators:
            raise ValueError("a marking needs at least one generator")

    @property
    def k(self) -> int:
        return len(self.generators)

    @property
    def identity(self):
        return self.group.identity()

    def letter(self, j: int, sign: int = 1):
        return self.generators[j] if sign > 0 else self.inverses[j]

    def __repr__(self) -> str:
        return f"MarkedGroup({self.name or self.group.name}, k={self.k})"


# ---------------------------------------------------------------------------
# words

_LETTER = re.compile(r"s(\d+)(?:\^(-?\d+))?")


def parse_word(text: str) -> list[tuple[int, int]]:
    """Parse "s0 s1^-1 s2^2" into letters (index, +-1)."""
    out = []
    for tok in text.split():
        m = _LETTER.fullmatch(tok)
        if not m:
            raise ValueError(f"bad letter {tok!r}")
        j = int(m.group(1))
        e = int(m.group(2) or 1)
        out.extend([(j, 1 if e > 0 else -1)] * abs(e))
    return out


def evaluate_word(mg: MarkedGroup, word: Sequence[tuple[int, int]] | str):
    """Product a_1 a_2 ... a_n of the letters, left to right."""
    if isinstance(word, str):
        word = parse_word(word)
    g = mg.identity
    for j, sign in word:
        g = mg.group.mul(g, mg.letter(j, sign))
    return g


# ---------------------------------------------------------------------------
# balls

@dataclass
class CayleyBall:
    radius: int
    k: int
    vertices: list
    dist: list[int]
    out: list[list[int]]   # out[j][u] = index of s_j * u, or -1
    inn: list[list[int]]   # inn[j][u] = index of s_j^{-1} * u, or -1
    group: Group | None = None
    complete: bool = False  # True if the ball exhausted a finite group

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def edges(self) -> list[list[tuple[int, int]]]:
        return [[(u, v) for u, v in enumerate(row) if v >= 0] for row in self.out]

    def encodings(self) -> list[str]:
        enc = self.group.encode if self.group is not None else (lambda a: repr(a).encode())
        return [enc(v).decode() for v in self.vertices]

    def active(self, u: int, v: int) -> bool:
        """Edges joining two points of the outer sphere are ignored by default comparisons."""
        return self.dist[u] < self.radius or self.dist[v] < self.radius

    def restrict(self, R: int) -> "CayleyBall":
        """Sub-ball of radius R <= self.radius, vertex order preserved."""
        if R > self.radius:
            raise ValueError("can only shrink a ball")
        keep = [i for i, d in enumerate(self.dist) if d <= R]
        new = {old: i for i, old in enumerate(keep)}
        out = [[new.get(row[u], -1) if row[u] >= 0 else -1 for u in keep] for row in self.out]
        inn = [[new.get(row[u], -1) if row[u] >= 0 else -1 for u in keep] for row in self.inn]
        return CayleyBall(R, self.k, [self.vertices[i] for i in keep],
                          [self.dist[i] for i in keep], out, inn, self.group,
                          self.complete and R >= max(self.dist))


def ball(mg: MarkedGroup, R: int, cap: int = DEFAULT_BALL_CAP) -> CayleyBall:
    """Exact ball B(e, R) of the Cayley diagram, in BFS order.

    Neighbours are explored by color, forward letter before inverse, so a
    vertex's position is fixed by its distance and its first reaching word.
    """
    if R < 0:
        raise ValueError("radius must be nonnegative")
    G = mg.group
    mul = G.mul
    e = G.identity()
    verts = [e]
    index = {e: 0}
    dist = [0]
    letters = []
    for j in range(mg.k):
        letters.append(mg.generators[j])
        letters.append(mg.inverses[j])
    head = 0
    while head < len(verts):
        u = verts[head]
        du = dist[head]
        head += 1
        if du >= R:
            continue
        for s in letters:
            v = mul(s, u)
            if v not in index:
                index[v] = len(verts)
                verts.append(v)
                dist.append(du + 1)
                if len(verts) > cap:
                    raise BallOverflow(f"ball of radius {R} exceeds {cap} vertices")
    out = []
    inn = []
    for j in range(mg.k):
        s, si = mg.generators[j], mg.inverses[j]
        out.append([index.get(mul(s, u), -1) for u in verts])
        inn.append([index.get(mul(si, u), -1) for u in verts])
    complete = all(x >= 0 for row in out for x in row)
    return CayleyBall(R, mg.k, verts, dist, out, inn, G, complete)


def closure(mg: MarkedGroup, cap: int = DEFAULT_BALL_CAP) -> CayleyBall:
    """BFS closure of the generators: the ball whose radius is the diameter."""
    G = mg.group
    mul = G.mul
    e = G.identity()
    verts = [e]
    index = {e: 0}
    dist = [0]
    letters = [x for j in range(mg.k) for x in (mg.generators[j], mg.inverses[j])]
    head = 0
    while head < len(verts):
        u = verts[head]
        du = dist[head]
        head += 1
        for s in letters:
            v = mul(s, u)
            if v not in index:
                index[v] = len(verts)
                verts.append(v)
                dist.append(du + 1)
                if len(verts) > cap:
                    raise BallOverflow(f"closure exceeds {cap} elements")
    R = dist[-1]
    out = [[index[mul(s, u)] for u in verts] for s in mg.generators]
    inn = [[index[mul(s, u)] for u in verts] for s in mg.inverses]
    return CayleyBall(R, mg.k, verts, dist, out, inn, G, True)


def check_generation(mg: MarkedGroup, cap: int = DEFAULT_BALL_CAP) -> int:
    """Size of the generated subgroup; raises if it is not the whole finite group."""
    size = len(closure(mg, cap))
    order = mg.group.order()
    if size != order:
        raise GenerationFailure(f"{mg!r} generates {size} of {order} elements")
    return size


class FiniteCayley:
    """Whole finite group in BFS order with word lengths and distance lookups."""

    def __init__(self, mg: MarkedGroup, cap: int = DEFAULT_BALL_CAP):
        self.mg = mg
        self.ball = closure(mg, cap)
        self.elements = self.ball.vertices
        self.index = {g: i for i, g in enumerate(self.elements)}
        self.length = self.ball.dist
        self.diameter = max(self.length)
        G = mg.group
        self._inv = [self.index[G.inv(g)] for g in self.elements]

    def __len__(self) -> int:
        return len(self.elements)

    def mul_idx(self, a: int, b: int) -> int:
        return self.index[self.mg.group.mul(self.elements[a], self.elements[b])]

    def inv_idx(self, a: int) -> int:
        return self._inv[a]

    def dist(self, a: int, b: int) -> int:
        """d(x, y) = |x y^{-1}|."""
        return self.length[self.mul_idx(a, self._inv[b])]

    def ball_idx(self, g: int, R: int) -> list[int]:
        """B(g, R) = {h g : |h| <= R}, ordered like B(e, R)."""
        out = []
        for h, d in enumerate(self.length):
            if d > R:
                break
            out.append(self.mul_idx(h, g))
        return out


# ---------------------------------------------------------------------------
# isomorphisms

@dataclass
class PartialIso:
    radius: int
    mapping: list[int]
    witness: str = "diagram-iso"


def diagram_iso(b1: CayleyBall, b2: CayleyBall, strict: bool = False) -> PartialIso | None:
    """Root-, color- and orientation-preserving isomorphism of two balls.

    The candidate map is forced: it grows from the root along colored,
    oriented edges.  By default edges joining two vertices of the outer sphere
    are disregarded on both sides (``strict=True`` compares the full induced
    diagrams); this is the comparison under which radius-R agreement of
    (Z/mZ; 1) with (Z; 1) holds exactly for R <= (m - 1) / 2.
    """
    if b1.k != b2.k or b1.radius != b2.radius:
        return None
    n = len(b1)
    if n != len(b2):
        return None
    phi = [-1] * n
    used = [False] * n
    phi[0] = 0
    used[0] = True

    def live(b: CayleyBall, u: int, v: int) -> bool:
        return v >= 0 and (strict or b.active(u, v))

    for u in range(n):
        w = phi[u]
        if w < 0:
            return None
        for tables1, tables2 in ((b1.out, b2.out), (b1.inn, b2.inn)):
            for j in range(b1.k):
                a = tables1[j][u]
                c = tables2[j][w]
                la, lc = live(b1, u, a), live(b2, w, c)
                if la != lc:
                    return None
                if not la:
                    continue
                if phi[a] < 0:
                    if used[c]:
                        return None
                    phi[a] = c
                    used[c] = True
                elif phi[a] != c:
                    return None
    return PartialIso(b1.radius, phi)


def metric_partial_iso(mg1: MarkedGroup, mg2: MarkedGroup, R: int) -> PartialIso | None:
    """Partial isomorphism B_1(e, R) -> B_2(e, R) induced by matching generators.

    The map sends the element reached by a word to the element reached by the
    same word; it must be well defined, bijective, and multiplicative on every
    pair whose product stays in the ball (both directions).
    """
    if mg1.k != mg2.k:
        return None
    b1, b2 = ball(mg1, R), ball(mg2, R)
    if len(b1) != len(b2):
        return None
    phi = diagram_iso(b1, b2, strict=True)
    if phi is None:
        return None
    idx1 = {g: i for i, g in enumerate(b1.vertices)}
    idx2 = {g: i for i, g in enumerate(b2.vertices)}
    m = phi.mapping
    G1, G2 = mg1.group, mg2.group
    for i, a in enumerate(b1.vertices):
        for j, b in enumerate(b1.vertices):
            ab = idx1.get(G1.mul(a, b))
            cd = idx2.get(G2.mul(b2.vertices[m[i]], b2.vertices[m[j]]))
            if (ab is None) != (cd is None):
                return None
            if ab is not None and m[ab] != cd:
                return None
    return PartialIso(R, m, "word-collision")


def convergence_radius(mg1: MarkedGroup, mg2: MarkedGroup, Rmax: int,
                       strict: bool = False, cap: int = DEFAULT_BALL_CAP) -> int:
    """Largest R <= Rmax at which the radius-R balls are diagram-isomorphic.

    Agreement is monotone in R, so the search gallops upward and then bisects.
    Returns -1 if the radius-0 balls already differ.
    """
    if mg1.k != mg2.k:
        raise ValueError("markings of different sizes")

    def ok(R: int) -> bool:
        return diagram_iso(ball(mg1, R, cap), ball(mg2, R, cap), strict) is not None

    if not ok(0):
        return -1
    lo, step = 0, 1
    hi = None
    while hi is None:
        probe = min(lo + step, Rmax)
        if probe == lo:
            return lo
        if ok(probe):
            lo = probe
            if lo == Rmax:
                return Rmax
            step *= 2
        else:
            hi = probe
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# rooted graphs without colors

def rooted_graph(b: CayleyBall, strict: bool = False) -> list[Counter]:
    """Undirected multigraph of a ball: adjacency counters, loops kept."""
    adj = [Counter() for _ in range(len(b))]
    for row in b.out:
        for u, v in enumerate(row):
            if v < 0 or not (strict or b.active(u, v)):
                continue
            adj[u][v] += 1
            if u != v:
                adj[v][u] += 1
    return adj


def _refine(adjs: list[list[Counter]], colors: list[list[int]]) -> list[list[int]]:
    """Color refinement run jointly on several graphs so colors are comparable."""
    while True:
        sigs = [[(col[u], tuple(sorted(_expand(adj[u], col).items()))) for u in range(len(adj))]
                for adj, col in zip(adjs, colors)]
        palette = {s: i for i, s in enumerate(sorted({s for sg in sigs for s in sg}))}
        new = [[palette[s] for s in sg] for sg in sigs]
        # refinement only splits classes; an unchanged count means it is stable
        if len(palette) == len({c for col in colors for c in col}):
            return new
        colors = new


def _expand(counter: Counter, col: list[int]) -> Counter:
    out: Counter = Counter()
    for v, mult in counter.items():
        out[col[v]] += mult
    return out


def rooted_graph_iso(g1: list[Counter] | CayleyBall, g2: list[Counter] | CayleyBall,
                     root1: int = 0, root2: int = 0) -> bool:
    """Rooted isomorphism of uncolored multigraphs (balls lose colors and orientation)."""
    if isinstance(g1, CayleyBall):
        g1 = rooted_graph(g1)
    if isinstance(g2, CayleyBall):
        g2 = rooted_graph(g2)
    n = len(g1)
    if n != len(g2):
        return False

    def bfs_dist(adj, r):
        d = [-1] * len(adj)
        d[r] = 0
        q = deque([r])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if d[v] < 0:
                    d[v] = d[u] + 1
                    q.append(v)
        return d

    c1, c2 = bfs_dist(g1, root1), bfs_dist(g2, root2)
    # the root gets its own color
    c1 = [x + 1 for x in c1]
    c2 = [x + 1 for x in c2]
    c1[root1] = c2[root2] = -1
    return _search(g1, g2, c1, c2)


def _search(g1, g2, c1, c2) -> bool:
    c1, c2 = _refine([g1, g2], [c1, c2])
    if sorted(c1) != sorted(c2):
        return False
    cells: dict[int, list[int]] = {}
    for u, c in enumerate(c1):
        cells.setdefault(c, []).append(u)
    target = None
    for c, members in sorted(cells.items(), key=lambda kv: (len(kv[1]), kv[0])):
        if len(members) > 1:
            target = c
            break
    if target is None:
        # discrete coloring: the bijection is forced
        inv2 = {c: u for u, c in enumerate(c2)}
        phi = [inv2[c] for c in c1]
        return all(Counter({phi[v]: m for v, m in g1[u].items()}) == g2[phi[u]]
                   for u in range(len(g1)))
    u = cells[target][0]
    fresh = max(max(c1), max(c2)) + 1
    for w in [x for x, c in enumerate(c2) if c == target]:
        d1, d2 = list(c1), list(c2)
        d1[u] = fresh
        d2[w] = fresh
        if _search(g1, g2, d1, d2):
            return True
    return False


# ---------------------------------------------------------------------------
# boundary scan

@dataclass
class BoundaryScan:
    radius: int
    classes: list[list[int]]
    candidates: list[int]   # positions in ``classes`` recurring at least ``threshold`` times
    threshold: int


def boundary_scan(seq: Sequence[MarkedGroup], R: int, threshold: int = 2,
                  strict: bool = False) -> BoundaryScan:
    """Group indices by diagram-isomorphism class of their radius-R balls."""
    reps: list[CayleyBall] = []
    classes: list[list[int]] = []
    for i, mg in enumerate(seq):
        b = ball(mg, R)
        for c, rep in enumerate(reps):
            if diagram_iso(b, rep, strict) is not None:
                classes[c].append(i)
                break
        else:
            reps.append(b)
            classes.append([i])
    cand = [c for c, members in enumerate(classes) if len(members) >= threshold]
    return BoundaryScan(R, classes, cand, threshold)


# ---------------------------------------------------------------------------
# exports

def ball_to_json(b: CayleyBall) -> dict:
    return {
        "radius": b.radius,
        "vertices": b.encodings(),
        "distances": list(b.dist),
        "edges": [[list(e) for e in row] for row in b.edges],
    }


def ball_to_dot(b: CayleyBall, name: str = "ball") -> str:
    lines = [f"digraph {name} {{"]
    for i, (enc, d) in enumerate(zip(b.encodings(), b.dist)):
        label = enc.replace("\\", "\\\\").replace('"', '\\"')
        shape = "doublecircle" if i == 0 else "circle"
        lines.append(f'  v{i} [label="{label}", shape={shape}, dist={d}];')
    for j, row in enumerate(b.edges):
        for u, v in row:
            lines.append(f'  v{u} -> v{v} [label="s{j}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def word_ball_oracle(mg: MarkedGroup, R: int) -> set:
    """All products of words of length <= R, by brute-force enumeration."""
    letters = [mg.letter(j, s) for j in range(mg.k) for s in (1, -1)]
    level = {mg.identity}
    seen = set(level)
    for _ in range(R):
        level = {mg.group.mul(a, s) for a in level for s in letters}
        seen |= level
    return seen


def diameter(mg: MarkedGroup) -> int:
    return closure(mg).radius


def elements_at(b: CayleyBall, R: int) -> Iterable:
    return (v for v, d in zip(b.vertices, b.dist) if d <= R)
