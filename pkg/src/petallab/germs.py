"""Polynomial germs of (C^2, 0): representation, classification,
normalization, jet inversion and the formal logarithm.

Jets are truncated at a caller-chosen order (default 8).  All algebra
is exact on Gaussian-rational coefficients and floating otherwise; the
resolution machinery requires the exact mode, the dynamics engine does
not care.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from .bipoly import BiPoly
from .errors import (
    InputFormatError,
    NoConvergenceError,
    NotTangentToIdentityError,
    NotUnipotentError,
    ResonantGermError,
    TemplateMismatchError,
)
from .gaussrat import GaussianRational
from .sectors import PetalParams

DEFAULT_ORDER = 8
FLOAT_ZERO_TOL = 1e-12

FORM_CORNER = "corner"
FORM_NONCORNER = "noncorner"
FORM_OTHER = "other"


def _is_exact_poly(p: BiPoly) -> bool:
    return any(isinstance(v, GaussianRational) for v in p.c.values())


class PolyMapGerm:
    """A polynomial self-map of C^2 fixing the origin.

    ``fx`` and ``fy`` are the full components (identity part included).
    ``validity_radius`` is the heuristic ball where iteration is
    trusted; it is a guard, not a certified domain.
    """

    def __init__(self, fx: BiPoly, fy: BiPoly, truncation_order: int = DEFAULT_ORDER,
                 validity_radius: float = 1.0):
        if truncation_order < 1:
            raise ValueError("truncation_order must be >= 1")
        if validity_radius <= 0:
            raise ValueError("validity_radius must be positive")
        self.truncation_order = truncation_order
        self.validity_radius = float(validity_radius)
        self.fx = fx.truncate(truncation_order)
        self.fy = fy.truncate(truncation_order)
        self.exact = _is_exact_poly(self.fx) or _is_exact_poly(self.fy)
        if self.exact:
            self.fx = self.fx.map_coeffs(GaussianRational.coerce)
            self.fy = self.fy.map_coeffs(GaussianRational.coerce)
        if self.fx.coeff(0, 0) or self.fy.coeff(0, 0):
            raise ValueError("germ must fix the origin")
        t, d = self.linear_trace_det()
        if self.exact:
            unipotent = (t == GaussianRational(2)) and (d == GaussianRational(1))
        else:
            unipotent = abs(t - 2.0) < FLOAT_ZERO_TOL and abs(d - 1.0) < FLOAT_ZERO_TOL
        if not unipotent:
            raise NotUnipotentError("linear part must be unipotent (eigenvalues 1, 1)")
        self._dense = None
        self._float_self = None

    # -- structure ---------------------------------------------------------
    def linear_matrix(self):
        return (
            (self.fx.coeff(1, 0), self.fx.coeff(0, 1)),
            (self.fy.coeff(1, 0), self.fy.coeff(0, 1)),
        )

    def linear_trace_det(self):
        (a11, a12), (a21, a22) = self.linear_matrix()
        return a11 + a22, a11 * a22 - a12 * a21

    @property
    def tangent_to_identity(self) -> bool:
        (a11, a12), (a21, a22) = self.linear_matrix()
        if self.exact:
            return (a11 == GaussianRational(1) and a22 == GaussianRational(1)
                    and not a12 and not a21)
        return (abs(a11 - 1) < FLOAT_ZERO_TOL and abs(a22 - 1) < FLOAT_ZERO_TOL
                and abs(a12) < FLOAT_ZERO_TOL and abs(a21) < FLOAT_ZERO_TOL)

    def to_float(self) -> "PolyMapGerm":
        if not self.exact:
            return self
        if self._float_self is None:
            self._float_self = PolyMapGerm(
                self.fx.to_float(), self.fy.to_float(),
                self.truncation_order, self.validity_radius,
            )
        return self._float_self

    def dense_coeffs(self):
        """Trimmed dense (cx, cy) arrays for the orbit kernels."""
        if self._dense is None:
            f = self.to_float()
            dx = max(f.fx.deg_x(), f.fy.deg_x(), 1)
            dy = max(f.fx.deg_y(), f.fy.deg_y(), 1)
            cx = np.zeros((dx + 1, dy + 1), dtype=complex)
            cy = np.zeros((dx + 1, dy + 1), dtype=complex)
            for (i, j), v in f.fx.c.items():
                cx[i, j] = v
            for (i, j), v in f.fy.c.items():
                cy[i, j] = v
            self._dense = (cx, cy)
        return self._dense

    def apply(self, x: complex, y: complex) -> Tuple[complex, complex]:
        """One step; floats go through the active kernel so that stored
        orbits match repeated apply() bitwise."""
        from . import kernels

        cx, cy = self.dense_coeffs()
        return kernels.eval_map(cx, cy, complex(x), complex(y))

    def apply_exact(self, x, y):
        if not self.exact:
            raise TypeError("apply_exact requires an exact germ")
        x = GaussianRational.coerce(x)
        y = GaussianRational.coerce(y)
        return self.fx.eval(x, y), self.fy.eval(x, y)

    def compose(self, other: "PolyMapGerm") -> "PolyMapGerm":
        order = min(self.truncation_order, other.truncation_order)
        gx = self.fx.compose(other.fx, other.fy, trunc=order)
        gy = self.fy.compose(other.fx, other.fy, trunc=order)
        return PolyMapGerm(gx, gy, order, min(self.validity_radius, other.validity_radius))

    def __repr__(self):
        return (f"PolyMapGerm(order={self.truncation_order}, "
                f"exact={self.exact}, fx={self.fx.pretty()}, fy={self.fy.pretty()})")

    # -- interchange ---------------------------------------------------------
    def to_obj(self):
        rows_x, rows_y = [], []
        for comp, rows in ((self.fx, rows_x), (self.fy, rows_y)):
            for i, j, v in comp.terms():
                if self.exact:
                    rows.append([i, j, str(v.re.numerator), str(v.re.denominator),
                                 str(v.im.numerator), str(v.im.denominator)])
                else:
                    z = complex(v)
                    rows.append([i, j, z.real, z.imag])
        mode = "exact" if self.exact else "float"
        return [
            {"component": "x", "monomials": rows_x,
             "truncation_order": self.truncation_order, "coefficient_mode": mode},
            {"component": "y", "monomials": rows_y,
             "truncation_order": self.truncation_order, "coefficient_mode": mode},
        ]

    @classmethod
    def from_obj(cls, obj, validity_radius: float = 1.0) -> "PolyMapGerm":
        if isinstance(obj, dict) and "components" in obj:
            obj = obj["components"]
        if not isinstance(obj, list) or len(obj) != 2:
            raise InputFormatError("germ file must hold a list of two component objects")
        comps = {}
        order = None
        for entry in obj:
            try:
                name = entry["component"]
                mode = entry.get("coefficient_mode", "float")
                rows = entry["monomials"]
                order = int(entry.get("truncation_order", order or DEFAULT_ORDER))
            except (TypeError, KeyError) as exc:
                raise InputFormatError(f"malformed germ component: {exc}") from exc
            if name not in ("x", "y") or name in comps:
                raise InputFormatError(f"bad component tag {name!r}")
            coeffs = {}
            for row in rows:
                try:
                    if mode == "exact":
                        i, j, nr, dr, ni, di = row
                        v = GaussianRational(
                            Fraction(int(nr), int(dr)), Fraction(int(ni), int(di))
                        )
                    else:
                        i, j, re, im = row
                        v = complex(float(re), float(im))
                except (TypeError, ValueError) as exc:
                    raise InputFormatError(f"malformed monomial row {row!r}") from exc
                coeffs[(int(i), int(j))] = v
            comps[name] = BiPoly(coeffs)
        if "x" not in comps or "y" not in comps:
            raise InputFormatError("germ file needs one 'x' and one 'y' component")
        return cls(comps["x"], comps["y"], order, validity_radius)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_obj(), fh, indent=1)

    @classmethod
    def load(cls, path, validity_radius: float = 1.0) -> "PolyMapGerm":
        with open(path) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputFormatError(f"germ file is not valid JSON: {exc}") from exc
        return cls.from_obj(obj, validity_radius)


def germ_from_coeff_maps(coeffs_x, coeffs_y, truncation_order=DEFAULT_ORDER,
                         validity_radius=1.0) -> PolyMapGerm:
    return PolyMapGerm(BiPoly(dict(coeffs_x)), BiPoly(dict(coeffs_y)),
                       truncation_order, validity_radius)


def identity_germ(order=DEFAULT_ORDER) -> PolyMapGerm:
    return germ_from_coeff_maps({(1, 0): 1.0 + 0j}, {(0, 1): 1.0 + 0j}, order)


def corner_germ(M: int, N: int, a, b, order: Optional[int] = None,
                exact: bool = False, validity_radius: float = 1.0) -> PolyMapGerm:
    """Minimal corner-form germ (x + a x^(M+1) y^N, y + b x^M y^(N+1))."""
    if order is None:
        order = max(DEFAULT_ORDER, M + N + 1)
    one = GaussianRational(1) if exact else 1.0 + 0j
    av = GaussianRational.coerce(a) if exact else complex(a)
    bv = GaussianRational.coerce(b) if exact else complex(b)
    fx = BiPoly({(1, 0): one, (M + 1, N): av})
    fy = BiPoly({(0, 1): one, (M, N + 1): bv})
    return PolyMapGerm(fx, fy, order, validity_radius)


@dataclass(frozen=True)
class FormSignature:
    """Lowest-order template data of a tangent-to-the-identity germ."""

    form: str
    M: int = 0
    N: int = 0
    a: complex = 0j
    b: complex = 0j
    c: complex = 0j
    satisfies_attracting_condition: bool = False
    satisfies_repelling_condition: bool = False

    @property
    def resonant(self) -> bool:
        if self.form == FORM_OTHER:
            return False
        return abs(self.a * self.M + self.b * self.N) < 1e-12 * (abs(self.a) + abs(self.b))


def _filtered_coeffs(p: BiPoly, exact: bool):
    if exact:
        return {k: v for k, v in p.c.items() if v}
    return {k: v for k, v in p.c.items() if abs(v) > FLOAT_ZERO_TOL}


def classify_form(F: PolyMapGerm) -> FormSignature:
    """Template-match the lowest-order monomials of F.

    Returns form "other" when neither the corner nor the noncorner
    template fits (this includes the identity germ).
    """
    if not F.tangent_to_identity:
        raise NotTangentToIdentityError("classification needs a tangent-to-identity germ")
    one = GaussianRational(1) if F.exact else 1.0
    fx = F.fx - BiPoly.monomial(1, 0, one)
    fy = F.fy - BiPoly.monomial(0, 1, one)
    fc = _filtered_coeffs(fx, F.exact)
    gc = _filtered_coeffs(fy, F.exact)

    def _mins(c):
        return (min(i for i, _ in c), min(j for _, j in c)) if c else None

    mf, mg = _mins(fc), _mins(gc)

    def _cplx(v):
        return complex(v) if v is not None else 0j

    if mf and mg:
        (i_f, j_f), (i_g, j_g) = mf, mg
        a = _cplx(fc.get((i_f, j_f)))
        b = _cplx(gc.get((i_g, j_g)))
        # corner: f = x^(M+1) y^N [a + ...], g = x^M y^(N+1) [b + ...]
        if (a and b and j_f >= 1 and i_g >= 1
                and i_f == i_g + 1 and j_g == j_f + 1):
            M, N = i_g, j_f
            return _with_conditions(FORM_CORNER, M, N, a, b, 0j)
        # noncorner: f = x^(M+1) [a + ...], g = x^M [c x + b y + ...]
        if j_f == 0 and a and i_f >= 2:
            M = i_f - 1
            if i_g >= M and not gc.get((M, 0)):
                b2 = _cplx(gc.get((M, 1)))
                c2 = _cplx(gc.get((M + 1, 0)))
                if b2:
                    return _with_conditions(FORM_NONCORNER, M, 0, a, b2, c2)
    return FormSignature(form=FORM_OTHER)


def _with_conditions(form, M, N, a, b, c) -> FormSignature:
    if form == FORM_CORNER:
        denom = a * M + b * N
        if abs(denom) > 1e-12 * (abs(a) + abs(b)):
            att = (a / denom).real > 0 and (b / denom).real > 0
            rep = (a / denom).real < 0 or (b / denom).real < 0
        else:
            att = rep = False
    else:
        att = (b / a).real > 0
        rep = (b / a).real < 0
    return FormSignature(form=form, M=M, N=N, a=a, b=b, c=c,
                         satisfies_attracting_condition=att,
                         satisfies_repelling_condition=rep)


@dataclass(frozen=True)
class LinearChange:
    """The diagonal change L(x, y) = (alpha x, beta y) applied by normalize."""

    alpha: complex
    beta: complex

    @property
    def is_identity(self) -> bool:
        return abs(self.alpha - 1) < 1e-12 and abs(self.beta - 1) < 1e-12


def normalize(F: PolyMapGerm, sig: Optional[FormSignature] = None):
    """Rescale so the template coefficients satisfy a*M + b*N = -1.

    Returns (G, LinearChange, PetalParams or None).  The petal data
    needs Re a < 0 and Re b < 0, which is exactly the attracting
    condition; when the input is on the Theorem-B side the germ is
    still normalized but no petal data exists and None is returned.
    Exact germs come back in float mode (the rescale takes roots).
    """
    if sig is None:
        sig = classify_form(F)
    if sig.form == FORM_OTHER:
        raise TemplateMismatchError("normalize needs a corner or noncorner germ")
    Ff = F.to_float()
    M, N = sig.M, sig.N
    denom = sig.a * M + sig.b * N
    if abs(denom) < 1e-12 * (abs(sig.a) + abs(sig.b)):
        raise ResonantGermError("a*M + b*N = 0: rescaling to -1 is impossible")
    t = -1.0 / denom
    if sig.form == FORM_NONCORNER:
        alpha = (-1.0 / (sig.a * M)) ** (1.0 / M)
        beta = 1.0 + 0j
    else:
        alpha = beta = t ** (1.0 / (M + N))
    one = 1.0 + 0j
    lx = BiPoly({(1, 0): alpha}, Ff.truncation_order)
    ly = BiPoly({(0, 1): beta}, Ff.truncation_order)
    gx = Ff.fx.compose(lx, ly).scale(one / alpha)
    gy = Ff.fy.compose(lx, ly).scale(one / beta)
    radius = Ff.validity_radius / max(abs(alpha), abs(beta), 1.0)
    G = PolyMapGerm(gx, gy, Ff.truncation_order, radius)
    new_sig = classify_form(G)
    petal = None
    if new_sig.satisfies_attracting_condition:
        petal = PetalParams.from_normalized(M, N if sig.form == FORM_CORNER else 0,
                                            new_sig.a, new_sig.b)
    return G, LinearChange(alpha, beta), petal


def invert_jet(F: PolyMapGerm, order: Optional[int] = None) -> PolyMapGerm:
    """Compositional inverse through the given bidegree order."""
    if not F.tangent_to_identity:
        raise NotTangentToIdentityError("invert_jet needs a tangent-to-identity germ")
    if order is None:
        order = F.truncation_order
    one = GaussianRational(1) if F.exact else 1.0 + 0j
    idx = BiPoly.monomial(1, 0, one, order)
    idy = BiPoly.monomial(0, 1, one, order)
    px = F.fx.truncate(order) - idx
    py = F.fy.truncate(order) - idy
    gx, gy = idx, idy
    for _ in range(order):
        gx, gy = (idx - px.compose(gx, gy, trunc=order),
                  idy - py.compose(gx, gy, trunc=order))
    return PolyMapGerm(gx, gy, order, F.validity_radius)


@dataclass(frozen=True)
class VectorFieldJet:
    """Truncated formal vector field X = P d/dx + Q d/dy."""

    px: BiPoly
    py: BiPoly
    truncation_order: int

    @property
    def is_zero(self) -> bool:
        return self.px.is_zero and self.py.is_zero

    @property
    def exact(self) -> bool:
        return _is_exact_poly(self.px) or _is_exact_poly(self.py)

    def __neg__(self):
        return VectorFieldJet(-self.px, -self.py, self.truncation_order)

    def derive(self, h: BiPoly) -> BiPoly:
        """Apply X as a derivation to h."""
        return self.px * h.diff_x() + self.py * h.diff_y()

    def monomial_content(self):
        """Largest (i, j) with x^i y^j dividing both components."""
        if self.is_zero:
            return (0, 0)
        big = (10**9, 10**9)
        ix, jx = self.px.monomial_content() if not self.px.is_zero else big
        iy, jy = self.py.monomial_content() if not self.py.is_zero else big
        return (min(ix, iy), min(jx, jy))


def exp_field(X: VectorFieldJet, order: Optional[int] = None) -> PolyMapGerm:
    """Time-1 Lie exponential of X, truncated at the working order."""
    if order is None:
        order = X.truncation_order
    exact = X.exact
    one = GaussianRational(1) if exact else 1.0 + 0j
    comps = []
    kmax = 3 * order + 12
    for coord in (BiPoly.monomial(1, 0, one, order), BiPoly.monomial(0, 1, one, order)):
        total = coord
        term = coord
        fact = 1
        for k in range(1, kmax + 1):
            term = (X.px.truncate(order) * term.diff_x()
                    + X.py.truncate(order) * term.diff_y())
            if term.is_zero:
                break
            fact *= k
            coefficient = (GaussianRational(Fraction(1, fact)) if exact
                           else 1.0 / float(fact))
            total = total + term.scale(coefficient)
        else:
            if not term.is_zero:
                raise NoConvergenceError("Lie series did not terminate; X not nilpotent-graded")
        comps.append(total)
    return PolyMapGerm(comps[0], comps[1], order)


def formal_log(F: PolyMapGerm, order: Optional[int] = None) -> VectorFieldJet:
    """The unique formal vector field whose time-1 flow is F, truncated.

    For tangent-to-the-identity germs the fixed-point sweep gains one
    order per pass; for general unipotent germs nilpotency of the
    linear part still forces termination, and the result is verified
    by re-exponentiation before returning.
    """
    if order is None:
        order = F.truncation_order
    exact = F.exact
    one = GaussianRational(1) if exact else 1.0 + 0j
    idx = BiPoly.monomial(1, 0, one, order)
    idy = BiPoly.monomial(0, 1, one, order)
    fx = F.fx.truncate(order)
    fy = F.fy.truncate(order)
    px = fx - idx
    py = fy - idy
    X = VectorFieldJet(px, py, order)
    for _ in range(3 * order + 12):
        E = exp_field(X, order)
        ex = fx - E.fx
        ey = fy - E.fy
        if ex.is_zero and ey.is_zero:
            break
        if not exact:
            scale = max((abs(v) for p in (ex, ey) for v in p.c.values()), default=0.0)
            if scale < 1e-15:
                break
        X = VectorFieldJet(X.px + ex, X.py + ey, order)
    _verify_log(F, X, order)
    return X


def _verify_log(F, X, order):
    E = exp_field(X, order)
    ex = F.fx.truncate(order) - E.fx
    ey = F.fy.truncate(order) - E.fy
    if F.exact:
        ok = ex.is_zero and ey.is_zero
    else:
        scale = max((abs(v) for p in (ex, ey) for v in p.c.values()), default=0.0)
        ok = scale < 1e-10
    if not ok:
        raise NoConvergenceError("formal_log failed to stabilize at the working order")
