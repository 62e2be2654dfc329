"""Group and ring backends with canonical element forms.

Every element is a plain hashable value (ints and nested tuples), so equal
elements compare and hash equal; ``Group.encode`` turns one into bytes for
export.  Products follow right-action conventions: permutations compose
left-to-right, the wreath top acts on lamp positions by left multiplication,
and Sym-semidirect tops act on the base set by right multiplication.
"""

from __future__ import annotations

import itertools
import math
from functools import cached_property
from typing import Any, Iterable, Iterator, Sequence

INFINITE = math.inf


class AlgebraError(Exception):
    pass


class CompositeModulus(AlgebraError):
    pass


class Reducible(AlgebraError):
    pass


class BackendMismatch(AlgebraError):
    pass


class NotInvertible(AlgebraError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def factorize(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    f = 2
    while f * f <= n:
        while n % f == 0:
            out[f] = out.get(f, 0) + 1
            n //= f
        f += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


# ---------------------------------------------------------------------------
# polynomials over F_p: tuples of coefficients, lowest degree first, trimmed

def poly_trim(a: Sequence[int]) -> tuple[int, ...]:
    a = list(a)
    while a and a[-1] == 0:
        a.pop()
    return tuple(a)


def poly_add(a, b, p: int) -> tuple[int, ...]:
    n = max(len(a), len(b))
    return poly_trim(((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0)) % p
                     for i in range(n))


def poly_neg(a, p: int) -> tuple[int, ...]:
    return tuple((-c) % p for c in a)


def poly_sub(a, b, p: int) -> tuple[int, ...]:
    return poly_add(a, poly_neg(b, p), p)


def poly_mul(a, b, p: int) -> tuple[int, ...]:
    if not a or not b:
        return ()
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return poly_trim(c % p for c in out)


def poly_divmod(a, b, p: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    a = list(a)
    inv_lead = pow(b[-1], p - 2, p)
    q = [0] * max(len(a) - len(b) + 1, 1)
    while len(a) >= len(b) and a:
        c = (a[-1] * inv_lead) % p
        shift = len(a) - len(b)
        q[shift] = c
        for i, y in enumerate(b):
            a[i + shift] = (a[i + shift] - c * y) % p
        a = list(poly_trim(a))
    return poly_trim(q), poly_trim(a)


def monic_polys(p: int, d: int) -> Iterator[tuple[int, ...]]:
    """Monic degree-d polynomials, lower coefficients in lexicographic order
    (highest of them most significant)."""
    for lower in itertools.product(range(p), repeat=d):
        yield tuple(reversed(lower)) + (1,)


def is_irreducible(f: Sequence[int], p: int) -> bool:
    f = poly_trim(f)
    d = len(f) - 1
    if d < 1:
        return False
    if d == 1:
        return True
    # roots first (cheap), then monic trial divisors up to degree d/2
    for x in range(p):
        if sum(c * pow(x, i, p) for i, c in enumerate(f)) % p == 0:
            return False
    for e in range(2, d // 2 + 1):
        for g in monic_polys(p, e):
            if not poly_divmod(f, g, p)[1]:
                return False
    return True


def factor_poly(f: Sequence[int], p: int) -> list[tuple[tuple[int, ...], int]]:
    """Factor a monic polynomial into (irreducible, multiplicity) by trial division."""
    f = poly_trim(f)
    out = []
    e = 1
    while len(f) > 1:
        # no factors of degree < e remain
        if len(f) - 1 < 2 * e:
            out.append((f, 1))
            break
        for g in monic_polys(p, e):
            if not is_irreducible(g, p):
                continue
            mult = 0
            while True:
                q, r = poly_divmod(f, g, p)
                if r:
                    break
                f, mult = q, mult + 1
            if mult:
                out.append((g, mult))
        e += 1
    return out


# ---------------------------------------------------------------------------
# finite rings

def _poly_text(f: Sequence[int]) -> str:
    terms = []
    for i in range(len(f) - 1, -1, -1):
        c = f[i]
        if c == 0:
            continue
        mono = "" if i == 0 else ("t" if i == 1 else f"t^{i}")
        coef = str(c) if (c != 1 or i == 0) else ""
        terms.append(coef + mono)
    return " + ".join(terms) or "0"


class FiniteRing:
    """Z/nZ or F_p[t]/(f).  Elements are ints in [0, size).

    For the polynomial quotient an element c_0 + c_1 t + ... is stored as
    c_0 + c_1 p + c_2 p^2 + ...
    """

    TABLE_LIMIT = 729

    def __init__(self, *, modulus: int | None = None, p: int | None = None,
                 f: Sequence[int] | None = None, field: bool):
        if modulus is not None:
            self.kind = "zmod"
            self.n = modulus
            self.p = modulus
            self.f = None
            self.d = 1
            self.size = modulus
        else:
            self.kind = "poly"
            self.p = p
            self.f = poly_trim(f)
            self.d = len(self.f) - 1
            self.size = p ** self.d
            self.n = None
        self.is_field = field
        self._add = self._mul = None
        if self.kind == "poly" and self.size <= self.TABLE_LIMIT:
            self._build_tables()

    def __repr__(self) -> str:
        if self.kind == "zmod":
            return f"Z/{self.n}Z"
        if self.is_field:
            return f"F_{self.p}^{self.d}[{_poly_text(self.f)}]"
        return f"F_{self.p}[t]/({_poly_text(self.f)})"

    @property
    def zero(self) -> int:
        return 0

    @property
    def one(self) -> int:
        return 1 % self.size

    def to_coeffs(self, a: int) -> tuple[int, ...]:
        if self.kind == "zmod":
            return (a,)
        out = []
        for _ in range(self.d):
            a, c = divmod(a, self.p)
            out.append(c)
        return tuple(out)

    def from_coeffs(self, c: Sequence[int]) -> int:
        if self.kind == "zmod":
            return c[0] % self.n if c else 0
        c = poly_divmod(poly_trim(x % self.p for x in c), self.f, self.p)[1] if len(c) > self.d else c
        return sum((x % self.p) * self.p ** i for i, x in enumerate(c))

    def _slow_add(self, a: int, b: int) -> int:
        ca, cb = self.to_coeffs(a), self.to_coeffs(b)
        return self.from_coeffs([(x + y) % self.p for x, y in zip(ca, cb)])

    def _slow_mul(self, a: int, b: int) -> int:
        prod = poly_mul(poly_trim(self.to_coeffs(a)), poly_trim(self.to_coeffs(b)), self.p)
        return self.from_coeffs(poly_divmod(prod, self.f, self.p)[1])

    def _build_tables(self) -> None:
        q = self.size
        self._add = [[self._slow_add(a, b) for b in range(q)] for a in range(q)]
        self._mul = [[self._slow_mul(a, b) for b in range(q)] for a in range(q)]

    def add(self, a: int, b: int) -> int:
        if self.kind == "zmod":
            return (a + b) % self.n
        if self._add is not None:
            return self._add[a][b]
        return self._slow_add(a, b)

    def neg(self, a: int) -> int:
        if self.kind == "zmod":
            return (-a) % self.n
        return self.from_coeffs([(-x) % self.p for x in self.to_coeffs(a)])

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def mul(self, a: int, b: int) -> int:
        if self.kind == "zmod":
            return (a * b) % self.n
        if self._mul is not None:
            return self._mul[a][b]
        return self._slow_mul(a, b)

    def pow(self, a: int, e: int) -> int:
        r, base = self.one, a
        while e:
            if e & 1:
                r = self.mul(r, base)
            base = self.mul(base, base)
            e >>= 1
        return r

    def is_unit(self, a: int) -> bool:
        if self.kind == "zmod":
            return math.gcd(a, self.n) == 1
        if self.is_field:
            return a != 0
        return any(self.mul(a, b) == self.one for b in range(self.size))

    def inv(self, a: int) -> int:
        if self.kind == "zmod":
            if math.gcd(a, self.n) != 1:
                raise NotInvertible(f"{a} is not a unit mod {self.n}")
            return pow(a, -1, self.n)
        if self.is_field:
            if a == 0:
                raise NotInvertible("0 has no inverse")
            return self.pow(a, self.size - 2)
        for b in range(self.size):
            if self.mul(a, b) == self.one:
                return b
        raise NotInvertible(f"{a} is not a unit")

    def mult_order(self, a: int) -> int:
        if not self.is_unit(a):
            raise NotInvertible(f"{a} is not a unit")
        k, x = 1, a
        while x != self.one:
            x = self.mul(x, a)
            k += 1
        return k

    def element(self, *coeffs: int) -> int:
        """Element c_0 + c_1 t + ... from its coefficients."""
        return self.from_coeffs(coeffs)

    @property
    def t(self) -> int:
        """The class of t (the generator of the polynomial basis)."""
        if self.kind == "zmod":
            raise AlgebraError("Z/nZ has no polynomial generator")
        return self.from_coeffs((0, 1))

    @cached_property
    def primitive_element(self) -> int:
        """Least element (in the integer encoding) of multiplicative order size - 1."""
        if not self.is_field:
            raise AlgebraError("primitive elements are defined for fields only")
        target = self.size - 1
        for a in range(1, self.size):
            if self.mult_order(a) == target:
                return a
        raise AlgebraError("no primitive element found")  # pragma: no cover

    def elements(self) -> range:
        return range(self.size)


def make_field(p: int, d: int = 1, f: Sequence[int] | None = None) -> FiniteRing:
    """F_{p^d} in the polynomial basis F_p[t]/(f).

    Without ``f`` the first monic irreducible of degree d (lower coefficients in
    lexicographic order) is used.
    """
    if not is_prime(p):
        raise CompositeModulus(f"{p} is not prime")
    if d < 1:
        raise ValueError("degree must be positive")
    if f is None:
        f = next(g for g in monic_polys(p, d) if is_irreducible(g, p))
    else:
        f = poly_trim(x % p for x in f)
        if len(f) - 1 != d or f[-1] != 1:
            raise ValueError(f"modulus must be monic of degree {d}")
        if not is_irreducible(f, p):
            raise Reducible(f"{f} is reducible over F_{p}")
    return FiniteRing(p=p, f=f, field=True)


def make_zmod(n: int) -> FiniteRing:
    if n < 2:
        raise ValueError("modulus must be at least 2")
    return FiniteRing(modulus=n, field=is_prime(n))


def make_quotient(p: int, f: Sequence[int]) -> FiniteRing:
    """F_p[t]/(f) for an arbitrary monic f (a field exactly when f is irreducible)."""
    if not is_prime(p):
        raise CompositeModulus(f"{p} is not prime")
    f = poly_trim(x % p for x in f)
    if len(f) < 2 or f[-1] != 1:
        raise ValueError("modulus must be monic of positive degree")
    return FiniteRing(p=p, f=f, field=is_irreducible(f, p))


def explicit_ring(p: int, n: int) -> FiniteRing:
    """The fully explicit ring F_p[t]/(t^n - t)."""
    if n < 2:
        raise ValueError("need n >= 2")
    f = [0] * (n + 1)
    f[n] = 1
    f[1] = (-1) % p
    return make_quotient(p, f)


# ---------------------------------------------------------------------------
# groups

class Group:
    """Abstract group with canonical elements."""

    name = "group"

    def identity(self) -> Any:
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def inv(self, a):
        raise NotImplementedError

    def contains(self, a) -> bool:
        raise NotImplementedError

    def order(self) -> int | float:
        raise NotImplementedError

    @property
    def is_finite(self) -> bool:
        return self.order() != INFINITE

    def elements(self) -> Iterable:
        raise NotImplementedError(f"{self.name} cannot enumerate its elements")

    def encode(self, a) -> bytes:
        return repr(a).encode()

    def pow(self, a, e: int):
        if e < 0:
            a, e = self.inv(a), -e
        r = self.identity()
        while e:
            if e & 1:
                r = self.mul(r, a)
            a = self.mul(a, a)
            e >>= 1
        return r

    def commutator(self, a, b):
        return self.mul(self.mul(self.inv(a), self.inv(b)), self.mul(a, b))

    def __repr__(self) -> str:
        return self.name


def _check(G: Group, *xs) -> None:
    for x in xs:
        if not G.contains(x):
            raise BackendMismatch(f"{x!r} is not an element of {G.name}")


def group_mul(G: Group, a, b):
    _check(G, a, b)
    return G.mul(a, b)


def group_inv(G: Group, a):
    _check(G, a)
    return G.inv(a)


def group_eq(G: Group, a, b) -> bool:
    _check(G, a, b)
    return G.encode(a) == G.encode(b)


def group_identity(G: Group):
    return G.identity()


def group_order(G: Group) -> int | float:
    return G.order()


class Cyclic(Group):
    def __init__(self, n: int):
        if n < 1:
            raise ValueError("order must be positive")
        self.n = n
        self.name = f"Z/{n}Z"

    def identity(self) -> int:
        return 0

    def mul(self, a: int, b: int) -> int:
        return (a + b) % self.n

    def inv(self, a: int) -> int:
        return (-a) % self.n

    def contains(self, a) -> bool:
        return type(a) is int and 0 <= a < self.n

    def order(self) -> int:
        return self.n

    def elements(self) -> range:
        return range(self.n)


class Integers(Group):
    name = "Z"

    def identity(self) -> int:
        return 0

    def mul(self, a: int, b: int) -> int:
        return a + b

    def inv(self, a: int) -> int:
        return -a

    def contains(self, a) -> bool:
        return type(a) is int

    def order(self) -> float:
        return INFINITE


class FreeGroup(Group):
    """Free group on k letters; elements are reduced words of nonzero ints (+-(i+1))."""

    def __init__(self, k: int):
        self.k = k
        self.name = f"F_{k}"

    def identity(self) -> tuple:
        return ()

    def generator(self, i: int) -> tuple:
        return (i + 1,)

    def mul(self, a: tuple, b: tuple) -> tuple:
        i = 0
        while i < len(a) and i < len(b) and a[-1 - i] == -b[i]:
            i += 1
        return a[:len(a) - i] + b[i:]

    def inv(self, a: tuple) -> tuple:
        return tuple(-x for x in reversed(a))

    def contains(self, a) -> bool:
        return (isinstance(a, tuple) and all(type(x) is int and 0 < abs(x) <= self.k for x in a)
                and all(a[i] != -a[i + 1] for i in range(len(a) - 1)))

    def order(self) -> float:
        return INFINITE


class Permutations(Group):
    """Sym(deg) on {0..deg-1}; a product a*b applies a first, then b."""

    def __init__(self, deg: int):
        self.deg = deg
        self.name = f"Sym({deg})"

    def identity(self) -> tuple:
        return tuple(range(self.deg))

    def mul(self, a: tuple, b: tuple) -> tuple:
        return tuple(b[x] for x in a)

    def inv(self, a: tuple) -> tuple:
        out = [0] * self.deg
        for i, x in enumerate(a):
            out[x] = i
        return tuple(out)

    def contains(self, a) -> bool:
        return isinstance(a, tuple) and sorted(a) == list(range(self.deg))

    def order(self) -> int:
        return math.factorial(self.deg)

    def elements(self):
        return itertools.permutations(range(self.deg))

    @staticmethod
    def from_cycles(deg: int, *cycles: Sequence[int]) -> tuple:
        img = list(range(deg))
        for c in cycles:
            for i, x in enumerate(c):
                img[x] = c[(i + 1) % len(c)]
        return tuple(img)


def _det(rows: list[list[int]], ring: FiniteRing) -> int:
    """Division-free determinant by expansion over column subsets."""
    m = len(rows)
    # minors[S] = det of the first |S| rows restricted to columns S
    minors = {0: ring.one}
    for r in range(m):
        nxt = {}
        for S, val in minors.items():
            if val == ring.zero:
                continue
            for c in range(m):
                if S >> c & 1:
                    continue
                a = rows[r][c]
                if a == ring.zero:
                    continue
                # sign: number of chosen columns greater than c
                above = bin(S >> (c + 1)).count("1")
                term = ring.mul(val, a)
                if above % 2:
                    term = ring.neg(term)
                T = S | (1 << c)
                nxt[T] = ring.add(nxt.get(T, ring.zero), term)
        minors = nxt
    return minors.get((1 << m) - 1, ring.zero)


class MatrixGroup(Group):
    """SL(m, R) (or GL(m, R)) over a finite ring; elements are flat row-major tuples."""

    def __init__(self, m: int, ring: FiniteRing, special: bool = True):
        self.m = m
        self.ring = ring
        self.special = special
        self.name = f"{'SL' if special else 'GL'}({m},{ring!r})"

    def identity(self) -> tuple:
        m, one = self.m, self.ring.one
        return tuple(one if i == j else 0 for i in range(m) for j in range(m))

    def from_rows(self, rows: Sequence[Sequence[int]]) -> tuple:
        return tuple(self.ring.from_coeffs((x,)) if self.ring.kind == "zmod" else x
                     for row in rows for x in row)

    def rows(self, a: tuple) -> list[list[int]]:
        m = self.m
        return [list(a[i * m:(i + 1) * m]) for i in range(m)]

    def elementary(self, i: int, j: int, c: int) -> tuple:
        """I + c E_{ij} with 0-based indices."""
        m = self.m
        out = list(self.identity())
        out[i * m + j] = self.ring.add(out[i * m + j], c)
        return tuple(out)

    def mul(self, a: tuple, b: tuple) -> tuple:
        m, R = self.m, self.ring
        add, mul = R.add, R.mul
        out = []
        for i in range(m):
            row = a[i * m:(i + 1) * m]
            for j in range(m):
                s = 0
                for k in range(m):
                    x = row[k]
                    if x:
                        y = b[k * m + j]
                        if y:
                            s = add(s, mul(x, y))
                out.append(s)
        return tuple(out)

    def det(self, a: tuple) -> int:
        return _det(self.rows(a), self.ring)

    def inv(self, a: tuple) -> tuple:
        m, R = self.m, self.ring
        d = self.det(a)
        dinv = R.inv(d)
        rows = self.rows(a)
        out = [0] * (m * m)
        for i in range(m):
            for j in range(m):
                minor = [[rows[r][c] for c in range(m) if c != j] for r in range(m) if r != i]
                cof = _det(minor, R) if minor else R.one
                if (i + j) % 2:
                    cof = R.neg(cof)
                out[j * m + i] = R.mul(cof, dinv)
        return tuple(out)

    def contains(self, a) -> bool:
        return (isinstance(a, tuple) and len(a) == self.m * self.m
                and all(type(x) is int and 0 <= x < self.ring.size for x in a))

    def order(self) -> int:
        return matrix_group_order(self.m, self.ring, self.special)

    def elements(self):
        q, m = self.ring.size, self.m
        for flat in itertools.product(range(q), repeat=m * m):
            d = _det(self.rows(flat), self.ring)
            if (d == self.ring.one) if self.special else self.ring.is_unit(d):
                yield tuple(flat)


def _gl_field_order(m: int, q: int) -> int:
    out = 1
    for i in range(m):
        out *= q ** m - q ** i
    return out


def _sl_field_order(m: int, q: int) -> int:
    out = q ** (m * (m - 1) // 2)
    for i in range(2, m + 1):
        out *= q ** i - 1
    return out


def matrix_group_order(m: int, ring: FiniteRing, special: bool = True) -> int:
    """|SL(m,R)| or |GL(m,R)| for R a finite product of local rings.

    R = Z/nZ splits over prime powers p^k; R = F_p[t]/(f) over powers of the
    irreducible factors of f.  A local factor with residue field F_q and length
    e contributes q^{(e-1) m^2} |GL(m,q)|, or q^{(e-1)(m^2-1)} |SL(m,q)|.
    """
    if ring.kind == "zmod":
        locals_ = [(p, k) for p, k in factorize(ring.n).items()]
    else:
        locals_ = [(ring.p ** (len(g) - 1), e) for g, e in factor_poly(ring.f, ring.p)]
    out = 1
    for q, e in locals_:
        if special:
            out *= q ** ((e - 1) * (m * m - 1)) * _sl_field_order(m, q)
        else:
            out *= q ** ((e - 1) * m * m) * _gl_field_order(m, q)
    return out


class DirectProduct(Group):
    def __init__(self, factors: Sequence[Group]):
        self.factors = tuple(factors)
        self.name = " x ".join(f.name for f in self.factors) or "1"

    def identity(self) -> tuple:
        return tuple(f.identity() for f in self.factors)

    def mul(self, a: tuple, b: tuple) -> tuple:
        return tuple(f.mul(x, y) for f, x, y in zip(self.factors, a, b))

    def inv(self, a: tuple) -> tuple:
        return tuple(f.inv(x) for f, x in zip(self.factors, a))

    def contains(self, a) -> bool:
        return (isinstance(a, tuple) and len(a) == len(self.factors)
                and all(f.contains(x) for f, x in zip(self.factors, a)))

    def order(self) -> int | float:
        return math.prod(f.order() for f in self.factors)

    def elements(self):
        return itertools.product(*(f.elements() for f in self.factors))

    def embed(self, i: int, x) -> tuple:
        e = list(self.identity())
        e[i] = x
        return tuple(e)


class Trivial(Group):
    name = "1"

    def identity(self) -> tuple:
        return ()

    def mul(self, a, b) -> tuple:
        return ()

    def inv(self, a) -> tuple:
        return ()

    def contains(self, a) -> bool:
        return a == ()

    def order(self) -> int:
        return 1

    def elements(self):
        return [()]


class Wreath(Group):
    """Restricted wreath product base wr top.

    Elements are (lamps, h): lamps is a sorted tuple of (position, value) with
    value never the base identity.  (f1,h1)(f2,h2) = (f1 * (h1.f2), h1 h2),
    where (h.f)(x) = f(h^{-1} x): lamps of the right factor move from y to h1 y.
    """

    def __init__(self, base: Group, top: Group):
        self.base = base
        self.top = top
        self.name = f"({base.name}) wr ({top.name})"

    def identity(self) -> tuple:
        return ((), self.top.identity())

    def lamp(self, g, x=None) -> tuple:
        """(g delta_x, e)."""
        x = self.top.identity() if x is None else x
        if g == self.base.identity():
            return self.identity()
        return (((x, g),), self.top.identity())

    def shift(self, h) -> tuple:
        return ((), h)

    def _canon(self, d: dict) -> tuple:
        e = self.base.identity()
        return tuple(sorted((x, g) for x, g in d.items() if g != e))

    def mul(self, a: tuple, b: tuple) -> tuple:
        f1, h1 = a
        f2, h2 = b
        top, base = self.top, self.base
        if not f2:
            return (f1, top.mul(h1, h2))
        d = dict(f1)
        e = base.identity()
        for y, g in f2:
            x = top.mul(h1, y)
            d[x] = base.mul(d.get(x, e), g)
        return (self._canon(d), top.mul(h1, h2))

    def inv(self, a: tuple) -> tuple:
        f, h = a
        hi = self.top.inv(h)
        d = {self.top.mul(hi, x): self.base.inv(g) for x, g in f}
        return (self._canon(d), hi)

    def contains(self, a) -> bool:
        if not (isinstance(a, tuple) and len(a) == 2 and isinstance(a[0], tuple)):
            return False
        f, h = a
        e = self.base.identity()
        pos = [x for x, _ in f]
        return (self.top.contains(h) and len(set(pos)) == len(pos)
                and all(self.top.contains(x) and self.base.contains(g) and g != e for x, g in f)
                and list(f) == sorted(f))

    def order(self) -> int | float:
        nb, nt = self.base.order(), self.top.order()
        if nt == INFINITE:
            return INFINITE
        return nb ** nt * nt

    def elements(self):
        tops = list(self.top.elements())
        bases = list(self.base.elements())
        for vals in itertools.product(bases, repeat=len(tops)):
            d = dict(zip(tops, vals))
            for h in tops:
                yield (self._canon(d), h)


class SymSemidirect(Group):
    """Finitely supported permutations of a group K extended by K acting on the right.

    An element (pairs, h) stands for the permutation x -> pi(x) h of K, where pi
    is the finite partial bijection ``pairs`` (moved points only).  Products
    compose left to right.  For finite K the representation is taken modulo
    the identification with Sym(K): the canonical form is the unique
    representative whose moved set is smaller than |K|/2, and otherwise the one
    minimizing (moved count, index of h).
    """

    def __init__(self, top: Group):
        self.top = top
        self._order = top.order()
        self.quotient = self._order != INFINITE
        self.name = f"Sym({top.name})" if self.quotient else f"Sym<oo({top.name}) x| {top.name}"

    def identity(self) -> tuple:
        return ((), self.top.identity())

    def transposition(self, a, b) -> tuple:
        if a == b:
            return self.identity()
        return (tuple(sorted(((a, b), (b, a)))), self.top.identity())

    def translation(self, h) -> tuple:
        return self._norm((), h)

    def _norm(self, pairs, h) -> tuple:
        pairs = tuple(sorted(pairs))
        if self.quotient and 2 * len(pairs) >= self._order:
            return self._renormalize(pairs, h)
        return (pairs, h)

    def _renormalize(self, pairs, h) -> tuple:
        top = self.top
        elems = list(top.elements())
        pi = dict(pairs)
        sigma = {x: top.mul(pi.get(x, x), h) for x in elems}
        best = None
        for idx, k in enumerate(elems):
            moved = [(x, top.mul(y, top.inv(k))) for x, y in sigma.items()]
            moved = tuple(sorted((x, y) for x, y in moved if x != y))
            key = (len(moved), idx)
            if best is None or key < best[0]:
                best = (key, moved, k)
        return (best[1], best[2])

    def mul(self, a: tuple, b: tuple) -> tuple:
        p1, h1 = a
        p2, h2 = b
        top = self.top
        h1i = top.inv(h1)
        # conjugate pi2 by the translation h1: x -> pi2(x h1) h1^{-1}
        rho = {top.mul(x, h1i): top.mul(y, h1i) for x, y in p2}
        out = {}
        for x, y in p1:
            out[x] = rho.get(y, y)
        for x, y in rho.items():
            if x not in out:
                out[x] = y
        return self._norm(((x, y) for x, y in out.items() if x != y), top.mul(h1, h2))

    def inv(self, a: tuple) -> tuple:
        pairs, h = a
        top = self.top
        out = ((top.mul(y, h), top.mul(x, h)) for x, y in pairs)
        return self._norm(out, top.inv(h))

    def contains(self, a) -> bool:
        if not (isinstance(a, tuple) and len(a) == 2 and isinstance(a[0], tuple)):
            return False
        pairs, h = a
        if not self.top.contains(h):
            return False
        src = [x for x, _ in pairs]
        dst = [y for _, y in pairs]
        return (sorted(src) == sorted(dst) and len(set(src)) == len(src)
                and all(x != y for x, y in pairs) and list(pairs) == sorted(pairs))

    def order(self) -> int | float:
        if self.quotient:
            return math.factorial(self._order)
        return INFINITE

    def as_permutation(self, a: tuple, points: Sequence) -> tuple:
        """Images of ``points`` under the permutation represented by ``a``."""
        pi = dict(a[0])
        return tuple(self.top.mul(pi.get(x, x), a[1]) for x in points)

    def moved_points(self, a: tuple) -> list:
        return [x for x, _ in a[0]]


# ---------------------------------------------------------------------------
# coefficient rings for the infinite matrix limits

class PolyRing:
    """F_p[t] with elements as trimmed coefficient tuples."""

    def __init__(self, p: int):
        if not is_prime(p):
            raise CompositeModulus(f"{p} is not prime")
        self.p = p
        self.name = f"F_{p}[t]"

    zero = ()

    @property
    def one(self) -> tuple:
        return (1,)

    def add(self, a, b):
        return poly_add(a, b, self.p)

    def neg(self, a):
        return poly_neg(a, self.p)

    def mul(self, a, b):
        return poly_mul(a, b, self.p)

    def contains(self, a) -> bool:
        return isinstance(a, tuple) and poly_trim(a) == a and all(
            type(c) is int and 0 <= c < self.p for c in a)

    @property
    def t(self) -> tuple:
        return (0, 1)


class IntegerRing:
    name = "Z"
    zero = 0
    one = 1

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def contains(self, a) -> bool:
        return type(a) is int


class MatrixShift(Group):
    """Finitary Z x Z matrices over a coefficient ring, extended by Z.

    An element (entries, k) is the matrix I + X (X given by its nonzero entries
    ((i, j), c), sorted) composed with the k-th power of the index shift.
    (A, k)(B, l) = (A * shift_k(B), k + l), where shift_k moves entry (i, j) to
    (i + k, j + k).  ``kind`` is "N" (strictly upper unitriangular part) or "SL".
    """

    def __init__(self, coeffs, kind: str = "SL"):
        if kind not in ("N", "SL"):
            raise ValueError("kind must be 'N' or 'SL'")
        self.coeffs = coeffs
        self.kind = kind
        label = "N_>" if kind == "N" else "SL"
        self.name = f"{label}(Z,{coeffs.name}) x| Z"

    def identity(self) -> tuple:
        return ((), 0)

    def elementary(self, i: int, j: int, c) -> tuple:
        if c == self.coeffs.zero:
            return self.identity()
        return ((((i, j), c),), 0)

    def shift(self, k: int = 1) -> tuple:
        return ((), k)

    def _product(self, X: dict, Y: dict) -> dict:
        """X Y for finitary matrices given by their nonzero entries."""
        R = self.coeffs
        rows: dict[int, list] = {}
        for (k, j), c in Y.items():
            rows.setdefault(k, []).append((j, c))
        out: dict = {}
        for (i, k), a in X.items():
            for j, c in rows.get(k, ()):
                out[(i, j)] = R.add(out.get((i, j), R.zero), R.mul(a, c))
        return {key: c for key, c in out.items() if c != R.zero}

    def _matmul(self, X: dict, Y: dict) -> dict:
        """(I + X)(I + Y) - I."""
        R = self.coeffs
        out = dict(X)
        for key, c in Y.items():
            out[key] = R.add(out.get(key, R.zero), c)
        for key, c in self._product(X, Y).items():
            out[key] = R.add(out.get(key, R.zero), c)
        return out

    def _canon(self, d: dict) -> tuple:
        z = self.coeffs.zero
        return tuple(sorted((key, c) for key, c in d.items() if c != z))

    def mul(self, a: tuple, b: tuple) -> tuple:
        X, k = a
        Y, l = b
        Ys = {(i + k, j + k): c for (i, j), c in Y}
        return (self._canon(self._matmul(dict(X), Ys)), k + l)

    def window(self, a: tuple) -> tuple[int, int] | None:
        idx = [i for (ij, _) in a[0] for i in ij]
        return (min(idx), max(idx)) if idx else None

    def _inverse_matrix(self, X: dict) -> dict:
        R = self.coeffs
        if not X:
            return {}
        if all(i < j for i, j in X):
            # nilpotent: (I + X)^{-1} = sum (-X)^n
            negX = {key: R.neg(c) for key, c in X.items()}
            total: dict = {}
            power = dict(negX)
            while power:
                for key, c in power.items():
                    total[key] = R.add(total.get(key, R.zero), c)
                power = self._product(power, negX)
            return {key: c for key, c in total.items() if c != R.zero}
        lo, hi = self.window(((tuple(X.items())), 0))
        n = hi - lo + 1
        rows = [[(R.one if i == j else R.zero) for j in range(n)] for i in range(n)]
        for (i, j), c in X.items():
            rows[i - lo][j - lo] = R.add(rows[i - lo][j - lo], c)
        det = _det(rows, R)
        if det == R.neg(R.one):
            sign = -1
        elif det == R.one:
            sign = 1
        else:
            raise NotInvertible("matrix part does not have determinant +-1")
        out = {}
        for i in range(n):
            for j in range(n):
                minor = [[rows[r][c] for c in range(n) if c != j] for r in range(n) if r != i]
                cof = _det(minor, R) if minor else R.one
                if (i + j) % 2:
                    cof = R.neg(cof)
                if sign < 0:
                    cof = R.neg(cof)
                val = R.add(cof, R.neg(R.one)) if i == j else cof
                if val != R.zero:
                    out[(j + lo, i + lo)] = val
        return out

    def inv(self, a: tuple) -> tuple:
        X, k = a
        Xi = self._inverse_matrix(dict(X))
        return (self._canon({(i - k, j - k): c for (i, j), c in Xi.items()}), -k)

    def det(self, a: tuple):
        R = self.coeffs
        w = self.window(a)
        if w is None:
            return R.one
        lo, hi = w
        n = hi - lo + 1
        rows = [[(R.one if i == j else R.zero) for j in range(n)] for i in range(n)]
        for (i, j), c in a[0]:
            rows[i - lo][j - lo] = R.add(rows[i - lo][j - lo], c)
        return _det(rows, R)

    def contains(self, a) -> bool:
        if not (isinstance(a, tuple) and len(a) == 2 and type(a[1]) is int
                and isinstance(a[0], tuple)):
            return False
        X = a[0]
        keys = [key for key, _ in X]
        if list(X) != sorted(X) or len(set(keys)) != len(keys):
            return False
        if not all(self.coeffs.contains(c) and c != self.coeffs.zero for _, c in X):
            return False
        if self.kind == "N":
            return all(i < j for i, j in keys)
        return True

    def order(self) -> float:
        return INFINITE


def ntri_semidirect(p: int) -> MatrixShift:
    return MatrixShift(PolyRing(p), "N")


def sl_semidirect(p: int) -> MatrixShift:
    return MatrixShift(PolyRing(p), "SL")


def wreath_over_z(base: Group) -> Wreath:
    return Wreath(base, Integers())
