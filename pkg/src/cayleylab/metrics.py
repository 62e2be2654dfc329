"""Metric spaces, control pairs, Folner sets and girth/diameter."""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

from .marked import FiniteCayley, MarkedGroup

TOL = 1e-9


class ScaleNonPositive(ValueError):
    pass


class NoFolnerSetFound(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# spaces

def lq_norm(v: Sequence[float], q: float) -> float:
    if len(v) == 1:
        return abs(v[0])
    if q == 1:
        return sum(abs(x) for x in v)
    if q == 2:
        return math.sqrt(sum(x * x for x in v))
    if math.isinf(q):
        return max((abs(x) for x in v), default=0.0)
    return sum(abs(x) ** q for x in v) ** (1.0 / q)


@dataclass(frozen=True)
class EuclideanSpace:
    """R^d with the l_q norm; points are tuples of floats."""
    d: int = 1
    q: float = 2.0

    def dist(self, a, b) -> float:
        return lq_norm([x - y for x, y in zip(a, b)], self.q)

    def origin(self) -> tuple:
        return (0.0,) * self.d


@dataclass(frozen=True)
class GraphMetric:
    """Word metric of a finite marked group on element indices."""
    cayley: FiniteCayley

    def dist(self, a: int, b: int) -> int:
        return self.cayley.dist(a, b)


@dataclass(frozen=True)
class ScaledProduct:
    """(sum_j (r_j d_j(z_j, w_j))^q)^{1/q} over finitely many factors."""
    spaces: tuple
    basepoints: tuple
    scales: tuple
    q: float

    def dist(self, z, w) -> float:
        terms = [r * X.dist(a, b) for X, r, a, b in zip(self.spaces, self.scales, z, w)]
        return lq_norm(terms, self.q)

    def dist_power(self, z, w):
        """d(z, w)^q as a plain sum; exact for rational inputs and integer q."""
        return sum((r * X.dist(a, b)) ** self.q
                   for X, r, a, b in zip(self.spaces, self.scales, z, w))

    def base(self) -> tuple:
        return tuple(self.basepoints)

    def diagonal(self, point) -> tuple:
        """z -> (z, ..., z); isometric when all factors agree and r_j = (1/N)^{1/q}."""
        return (point,) * len(self.spaces)

    def diagonal_is_isometric(self) -> bool:
        n = len(self.spaces)
        if len(set(self.spaces)) != 1:
            return False
        target = (1.0 / n) ** (1.0 / self.q)
        return all(abs(r - target) <= TOL for r in self.scales)


def lq_product(spaces: Sequence, basepoints: Sequence, scales: Sequence[float], q: float
               ) -> ScaledProduct:
    if not (len(spaces) == len(basepoints) == len(scales)):
        raise ValueError("spaces, basepoints and scales must have equal length")
    if q < 1:
        raise ValueError("q must be at least 1")
    for r in scales:
        if not r > 0:
            raise ScaleNonPositive(f"scale {r} is not positive")
    return ScaledProduct(tuple(spaces), tuple(basepoints), tuple(scales), q)


def uniform_scale(n: int, q: float) -> float:
    return (1.0 / n) ** (1.0 / q)


# ---------------------------------------------------------------------------
# control pairs

@dataclass(frozen=True)
class PiecewiseLinear:
    """Non-decreasing piecewise-linear function on [0, oo).

    Breakpoints (x_i, y_i) with x_0 = 0; beyond the last breakpoint the
    function continues with slope ``tail``.
    """
    points: tuple
    tail: float

    def __post_init__(self):
        xs = [p[0] for p in self.points]
        ys = [p[1] for p in self.points]
        if not xs or xs[0] != 0:
            raise ValueError("first breakpoint must be at 0")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(b < a for a, b in zip(ys, ys[1:])) or self.tail < 0:
            raise ValueError("function must be non-decreasing")

    @classmethod
    def linear(cls, slope: float = 1.0, intercept: float = 0.0) -> "PiecewiseLinear":
        return cls(((0.0, intercept),), slope)

    @property
    def proper(self) -> bool:
        return self.tail > 0

    def __call__(self, x: float) -> float:
        xs = [p[0] for p in self.points]
        i = bisect_right(xs, x) - 1
        x0, y0 = self.points[i]
        if i + 1 < len(self.points):
            x1, y1 = self.points[i + 1]
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        return y0 + self.tail * (x - x0)

    def scaled(self, c: float) -> "PiecewiseLinear":
        return PiecewiseLinear(tuple((x, c * y) for x, y in self.points), c * self.tail)

    def shifted(self, c: float) -> "PiecewiseLinear":
        return PiecewiseLinear(tuple((x, y + c) for x, y in self.points), self.tail)

    def to_json(self) -> dict:
        return {"points": [list(p) for p in self.points], "tail": self.tail}


@dataclass(frozen=True)
class ControlPair:
    rho: PiecewiseLinear
    omega: PiecewiseLinear

    @classmethod
    def identity(cls) -> "ControlPair":
        lin = PiecewiseLinear.linear()
        return cls(lin, lin)

    @classmethod
    def affine(cls, a: float, b: float, c: float, d: float) -> "ControlPair":
        """rho(t) = max(a t - b, 0) approximated from 0, omega(t) = c t + d."""
        if b > 0:
            rho = PiecewiseLinear(((0.0, 0.0), (b / a, 0.0)), a)
        else:
            rho = PiecewiseLinear.linear(a)
        return cls(rho, PiecewiseLinear.linear(c, d))

    def loosened(self, rho_factor: float, omega_shift: float) -> "ControlPair":
        return ControlPair(self.rho.scaled(rho_factor), self.omega.shifted(omega_shift))

    def to_json(self) -> dict:
        return {"rho": self.rho.to_json(), "omega": self.omega.to_json()}


@dataclass
class ControlReport:
    passed: bool
    envelopes: dict          # domain distance -> [min image distance, max image distance]
    violations: list         # (i, j, d, image distance, side)
    pairs: int
    tolerance: float

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "pairs": self.pairs,
            "tolerance": self.tolerance,
            "envelopes": {str(k): v for k, v in sorted(self.envelopes.items())},
            "violations": [list(v) for v in self.violations[:20]],
            "violation_count": len(self.violations),
        }


def _is_int(x) -> bool:
    return isinstance(x, int) or (isinstance(x, float) and x.is_integer())


def check_sandwich(pairs, cp: ControlPair, max_witnesses: int = 1000) -> ControlReport:
    """pairs: iterable of (i, j, domain distance, image distance)."""
    env: dict = {}
    bad = []
    n = 0
    exact = True
    for i, j, d, dm in pairs:
        if d is None or math.isinf(d):
            continue
        n += 1
        lo, hi = cp.rho(d), cp.omega(d)
        if exact and not (_is_int(dm) and _is_int(lo) and _is_int(hi)):
            exact = False
        tol = 0.0 if exact else TOL
        if dm < lo - tol:
            if len(bad) < max_witnesses:
                bad.append((i, j, d, dm, "rho"))
        elif dm > hi + tol:
            if len(bad) < max_witnesses:
                bad.append((i, j, d, dm, "omega"))
        e = env.setdefault(d, [dm, dm])
        e[0] = min(e[0], dm)
        e[1] = max(e[1], dm)
    return ControlReport(not bad, env, bad, n, 0.0 if exact else TOL)


def measure_control_pair(points: Sequence[Hashable], domain_dist: Callable, f: Callable,
                         space, cp: ControlPair) -> ControlReport:
    """Empirical envelopes of d_M(f(x), f(y)) against d(x, y) over all pairs."""
    images = [f(x) for x in points]

    def gen():
        for a in range(len(points)):
            for b in range(a + 1, len(points)):
                yield (points[a], points[b], domain_dist(points[a], points[b]),
                       space.dist(images[a], images[b]))
    return check_sandwich(gen(), cp)


# ---------------------------------------------------------------------------
# Folner sets

@dataclass
class FolnerSet:
    elements: list           # element indices in the FiniteCayley order
    epsilon: float
    R: int
    ratio: float             # #(N_R(F) \ F) / #F
    literal_ratio: float     # #N_R(F) / #F, the reading that includes F itself
    shape: str
    parameter: int | None = None
    cayley: FiniteCayley | None = field(default=None, repr=False)


def neighbourhood(fc: FiniteCayley, F: Sequence[int], R: int) -> set[int]:
    """N_R(F) = {y : d(y, F) <= R} = B(e, R) F."""
    out = set()
    for x in F:
        out.update(fc.ball_idx(x, R))
    return out


def folner_ratio(fc: FiniteCayley, F: Sequence[int], R: int) -> tuple[float, float]:
    Fs = set(F)
    N = neighbourhood(fc, Fs, R)
    return len(N - Fs) / len(Fs), len(N) / len(Fs)


def folner_search(mg: MarkedGroup, eps: float, R: int, include_whole: bool = True,
                  shape: str = "ball", max_fraction: float | None = None,
                  fc: FiniteCayley | None = None) -> FolnerSet:
    """First set with #(N_R(F) \\ F)/#F < eps.

    With ``include_whole`` the whole group is tried first (its ratio is 0).
    Otherwise proper balls B(e, r) (shape "ball") or complements of balls
    G \\ B(e, r) (shape "coball") are tried for increasing r, skipping sets
    larger than ``max_fraction`` of the group when that is given.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    fc = fc or FiniteCayley(mg)
    n = len(fc)
    if include_whole:
        F = list(range(n))
        s, lit = folner_ratio(fc, F, R)
        return FolnerSet(F, eps, R, s, lit, "whole", None, fc)
    if shape not in ("ball", "coball"):
        raise ValueError(f"unknown shape {shape!r}")
    for r in range(fc.diameter):
        inside = [i for i in range(n) if fc.length[i] <= r]
        F = inside if shape == "ball" else [i for i in range(n) if fc.length[i] > r]
        if max_fraction is not None and len(F) > max_fraction * n:
            continue
        s, lit = folner_ratio(fc, F, R)
        if s < eps:
            return FolnerSet(F, eps, R, s, lit, shape, r, fc)
    raise NoFolnerSetFound(f"no {shape} in {mg!r} has ratio < {eps} at R = {R}")


def choose_folner(mg: MarkedGroup, eps: float, R: int, shape: str = "coball",
                  fc: FiniteCayley | None = None) -> FolnerSet:
    """Proper Folner set of the given shape if one exists, else the whole group."""
    try:
        return folner_search(mg, eps, R, include_whole=False, shape=shape, fc=fc)
    except NoFolnerSetFound:
        return folner_search(mg, eps, R, include_whole=True, fc=fc)


# ---------------------------------------------------------------------------
# girth and diameter

def simple_neighbours(fc: FiniteCayley) -> list[list[int]]:
    mg = fc.mg
    G = mg.group
    letters = list(mg.generators) + list(mg.inverses)
    out = []
    for i, g in enumerate(fc.elements):
        nb = {fc.index[G.mul(s, g)] for s in letters}
        nb.discard(i)
        out.append(sorted(nb))
    return out


def girth_diameter(mg: MarkedGroup) -> tuple[float, int]:
    """Girth of the simple Cayley graph (inf for a forest) and its diameter.

    Cayley graphs are vertex-transitive, so the shortest cycle through the
    identity is a shortest cycle overall.
    """
    fc = FiniteCayley(mg)
    nbrs = simple_neighbours(fc)
    dist = [-1] * len(fc)
    parent = [-1] * len(fc)
    dist[0] = 0
    best = math.inf
    dq = deque([0])
    while dq:
        u = dq.popleft()
        for v in nbrs[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                parent[v] = u
                dq.append(v)
            elif parent[u] != v:
                best = min(best, dist[u] + dist[v] + 1)
    return best, fc.diameter
