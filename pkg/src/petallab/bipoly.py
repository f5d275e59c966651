"""Sparse bivariate polynomials over complex floats or Gaussian rationals.

One class serves two regimes:

* ``trunc`` set: a truncated jet; products drop total degree > trunc.
* ``trunc`` None: an exact polynomial (resolution needs this).

Coefficients only need ring operations, so ``complex`` and
``GaussianRational`` both work; zero coefficients are never stored.
"""

from __future__ import annotations

from .gaussrat import GaussianRational

__all__ = ["BiPoly"]


def _min_trunc(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


class BiPoly:
    __slots__ = ("c", "trunc")

    def __init__(self, coeffs=None, trunc=None):
        self.trunc = trunc
        c = {}
        if coeffs:
            for (i, j), v in coeffs.items():
                if trunc is not None and i + j > trunc:
                    continue
                if v:
                    c[(i, j)] = v
        self.c = c

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls, trunc=None):
        return cls({}, trunc)

    @classmethod
    def const(cls, v, trunc=None):
        return cls({(0, 0): v}, trunc)

    @classmethod
    def var_x(cls, one=1.0 + 0j, trunc=None):
        return cls({(1, 0): one}, trunc)

    @classmethod
    def var_y(cls, one=1.0 + 0j, trunc=None):
        return cls({(0, 1): one}, trunc)

    @classmethod
    def monomial(cls, i, j, v, trunc=None):
        return cls({(i, j): v}, trunc)

    def copy_with(self, coeffs):
        return BiPoly(coeffs, self.trunc)

    # -- inspection ----------------------------------------------------------
    @property
    def is_zero(self):
        return not self.c

    def order(self):
        """Smallest total degree of a nonzero term; None when zero."""
        if not self.c:
            return None
        return min(i + j for i, j in self.c)

    def degree(self):
        if not self.c:
            return -1
        return max(i + j for i, j in self.c)

    def deg_x(self):
        return max((i for i, _ in self.c), default=-1)

    def deg_y(self):
        return max((j for _, j in self.c), default=-1)

    def coeff(self, i, j):
        return self.c.get((i, j), 0)

    def min_exponents(self):
        """Componentwise minimal exponents; the gcd monomial of the support."""
        if not self.c:
            return None
        return (min(i for i, _ in self.c), min(j for _, j in self.c))

    def terms(self):
        """Deterministically ordered (i, j, coeff) triples."""
        for key in sorted(self.c):
            yield key[0], key[1], self.c[key]

    # -- arithmetic ------------------------------------------------------ory
    def __add__(self, other):
        if not isinstance(other, BiPoly):
            other = BiPoly.const(other)
        t = _min_trunc(self.trunc, other.trunc)
        c = dict(self.c)
        for k, v in other.c.items():
            w = c.get(k, 0) + v
            if w:
                c[k] = w
            else:
                c.pop(k, None)
        return BiPoly(c, t)

    def __sub__(self, other):
        if not isinstance(other, BiPoly):
            other = BiPoly.const(other)
        return self + (-other)

    def __neg__(self):
        return BiPoly({k: -v for k, v in self.c.items()}, self.trunc)

    def scale(self, s):
        if not s:
            return BiPoly.zero(self.trunc)
        return BiPoly({k: v * s for k, v in self.c.items()}, self.trunc)

    def __mul__(self, other):
        if not isinstance(other, BiPoly):
            return self.scale(other)
        t = _min_trunc(self.trunc, other.trunc)
        c = {}
        for (i1, j1), v1 in self.c.items():
            for (i2, j2), v2 in other.c.items():
                i, j = i1 + i2, j1 + j2
                if t is not None and i + j > t:
                    continue
                k = (i, j)
                w = c.get(k, 0) + v1 * v2
                if w:
                    c[k] = w
                else:
                    c.pop(k, None)
        return BiPoly(c, t)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power of a polynomial")
        r = BiPoly.const(self._one_like(), self.trunc)
        b = self
        while n:
            if n & 1:
                r = r * b
            b = b * b
            n >>= 1
        return r

    def _one_like(self):
        for v in self.c.values():
            if isinstance(v, GaussianRational):
                return GaussianRational(1)
            return 1.0 + 0j
        return 1

    def __eq__(self, other):
        if not isinstance(other, BiPoly):
            return NotImplemented
        return self.c.keys() == other.c.keys() and all(
            self.c[k] == other.c[k] for k in self.c
        )

    def __hash__(self):
        return hash(frozenset(self.c.items()))

    # -- calculus and substitution ----------------------------------------
    def diff_x(self):
        return BiPoly(
            {(i - 1, j): v * i for (i, j), v in self.c.items() if i > 0}, self.trunc
        )

    def diff_y(self):
        return BiPoly(
            {(i, j - 1): v * j for (i, j), v in self.c.items() if j > 0}, self.trunc
        )

    def compose(self, px: "BiPoly", py: "BiPoly", trunc=None):
        """Substitute x -> px, y -> py.

        Powers of px, py are cached; the result respects ``trunc`` (or the
        tightest truncation among the inputs).
        """
        t = trunc
        for s in (self.trunc, px.trunc, py.trunc):
            t = _min_trunc(t, s)
        xpow = {0: BiPoly.const(self._one_like(), t)}
        ypow = {0: BiPoly.const(self._one_like(), t)}

        def _pow(cache, base, n):
            if n not in cache:
                half = _pow(cache, base, n // 2)
                cache[n] = half * half * base if n % 2 else half * half
            return cache[n]

        out = BiPoly.zero(t)
        for (i, j), v in sorted(self.c.items()):
            term = _pow(xpow, px, i) * _pow(ypow, py, j) if (i or j) else BiPoly.const(
                self._one_like(), t
            )
            out = out + term.scale(v)
        return out

    def shift(self, ax, ay):
        """Translate the origin: p(x + ax, y + ay)."""
        one = self._one_like()
        px = BiPoly({(1, 0): one, (0, 0): ax}, self.trunc)
        py = BiPoly({(0, 1): one, (0, 0): ay}, self.trunc)
        return self.compose(px, py)

    def truncate(self, order):
        return BiPoly(
            {k: v for k, v in self.c.items() if k[0] + k[1] <= order}, order
        )

    def with_trunc(self, trunc):
        return BiPoly(dict(self.c), trunc)

    # -- evaluation --------------------------------------------------------
    def eval(self, x, y):
        """Evaluate by row-wise Horner over whatever ring the arguments live in."""
        if not self.c:
            return 0 * x
        dy = self.deg_y()
        total = 0
        for i in range(self.deg_x(), -1, -1):
            row = 0
            for j in range(dy, -1, -1):
                v = self.c.get((i, j))
                row = row * y + v if v is not None else row * y
            total = total * x + row
        return total

    def to_float(self):
        return BiPoly({k: complex(v) for k, v in self.c.items()}, self.trunc)

    def map_coeffs(self, fn):
        return BiPoly({k: fn(v) for k, v in self.c.items()}, self.trunc)

    # -- exact structure (resolution support) -------------------------------
    def divisible_by_monomial(self, i0, j0):
        return all(i >= i0 and j >= j0 for i, j in self.c)

    def divide_monomial(self, i0, j0):
        if not self.divisible_by_monomial(i0, j0):
            raise ValueError("not divisible by the requested monomial")
        return BiPoly({(i - i0, j - j0): v for (i, j), v in self.c.items()}, self.trunc)

    def monomial_content(self):
        """Largest (i, j) with x^i y^j dividing every term; (0, 0) if zero."""
        me = self.min_exponents()
        return me if me is not None else (0, 0)

    def sub_y_tx(self):
        """Substitute y -> t*x, reading the result as a poly in (x, t)."""
        c = {}
        for (i, j), v in self.c.items():
            k = (i + j, j)
            w = c.get(k, 0) + v
            if w:
                c[k] = w
            else:
                c.pop(k, None)
        return BiPoly(c, None)

    def sub_x_sy(self):
        """Substitute x -> s*y, reading the result as a poly in (s, y)."""
        c = {}
        for (i, j), v in self.c.items():
            k = (i, i + j)
            w = c.get(k, 0) + v
            if w:
                c[k] = w
            else:
                c.pop(k, None)
        return BiPoly(c, None)

    def swap_vars(self):
        return BiPoly({(j, i): v for (i, j), v in self.c.items()}, self.trunc)

    def __repr__(self):
        if not self.c:
            return "BiPoly(0)"
        parts = [f"({v!r})*x^{i}*y^{j}" for i, j, v in self.terms()]
        return "BiPoly(" + " + ".join(parts) + ")"

    def pretty(self, vx="x", vy="y"):
        if not self.c:
            return "0"
        parts = []
        for i, j, v in self.terms():
            mono = []
            if i:
                mono.append(vx if i == 1 else f"{vx}^{i}")
            if j:
                mono.append(vy if j == 1 else f"{vy}^{j}")
            if isinstance(v, GaussianRational):
                sv = str(v.re) if v.is_rational else f"({v.re}{'+' if v.im >= 0 else ''}{v.im}i)"
            else:
                sv = str(complex(v))
            parts.append("*".join([sv] + mono))
        return " + ".join(parts)
