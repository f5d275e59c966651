"""Exact blow-up resolution of plane vector fields and unipotent germs.

Everything here runs over Gaussian rationals: saturation is an exact
bivariate gcd, point classification decides lambda2/lambda1 in Q_{>0}
symbolically (including the quadratic-irrational case), and blow-ups
are polynomial substitutions.  Floating point appears only as a root
*localization* hint; every root is reconstructed and verified exactly,
and leftover factors without Gaussian-rational roots abort loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bipoly import BiPoly
from .errors import (
    DepthExceededError,
    NotSingularError,
    TruncationUnstableError,
    UnsupportedGeometryError,
    UnsupportedPointFieldError,
)
from .gaussrat import GaussianRational, is_square_fraction
from .germs import PolyMapGerm, VectorFieldJet, formal_log

GR = GaussianRational
_ZERO = GR(0)
_ONE = GR(1)

CLASS_NONSINGULAR = "NonSingular"
CLASS_NONDEGENERATE = "Reduced-nondegenerate"
CLASS_SADDLE_NODE = "Reduced-saddle-node"
CLASS_NOT_REDUCED = "NotReduced"
STATUS_DICRITICAL = "Dicritical-transverse"

MODEL_I = "i"
MODEL_II = "ii"
MODEL_III = "iii"


# ---------------------------------------------------------------------------
# univariate exact helpers (coefficient lists over GaussianRational)
# ---------------------------------------------------------------------------

def _utrim(p: List[GR]) -> List[GR]:
    while p and p[-1].is_zero:
        p.pop()
    return p


def _udeg(p: Sequence[GR]) -> int:
    return len(p) - 1


def _umul(p, q):
    if not p or not q:
        return []
    out = [_ZERO] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a.is_zero:
            continue
        for j, b in enumerate(q):
            out[i + j] = out[i + j] + a * b
    return _utrim(out)


def _udivmod(p, q):
    if not q:
        raise ZeroDivisionError("univariate division by zero")
    r = list(p)
    out = [_ZERO] * max(0, len(p) - len(q) + 1)
    dq = _udeg(q)
    lc = q[-1]
    while r and _udeg(r) >= dq:
        c = r[-1] / lc
        k = _udeg(r) - dq
        out[k] = c
        for j, b in enumerate(q):
            r[k + j] = r[k + j] - c * b
        _utrim(r)
    return _utrim(out), r


def _ugcd(p, q):
    a, b = _utrim(list(p)), _utrim(list(q))
    while b:
        a, b = b, _udivmod(a, b)[1]
    if a:
        lc = a[-1]
        a = [c / lc for c in a]
    return a


def _ueval(p, t: GR) -> GR:
    out = _ZERO
    for c in reversed(p):
        out = out * t + c
    return out


# ---------------------------------------------------------------------------
# bivariate exact gcd and division
# ---------------------------------------------------------------------------

def _grevlex_key(ij):
    i, j = ij
    return (i + j, i)


def _leading(poly: BiPoly):
    key = max(poly.c, key=_grevlex_key)
    return key, poly.c[key]


def monic_normalize(poly: BiPoly) -> BiPoly:
    """Scale so the grevlex-leading coefficient is 1 (deterministic)."""
    if poly.is_zero:
        return poly
    _, lc = _leading(poly)
    return poly.map_coeffs(lambda v: v / lc)


def divide_exact(P: BiPoly, f: BiPoly) -> BiPoly:
    """Exact polynomial quotient P / f; raises when f does not divide P."""
    if f.is_zero:
        raise ZeroDivisionError("division by the zero polynomial")
    rem = {k: v for k, v in P.c.items()}
    out = {}
    fkey, flc = _leading(f)
    while rem:
        key = max(rem, key=_grevlex_key)
        i, j = key[0] - fkey[0], key[1] - fkey[1]
        if i < 0 or j < 0:
            raise ValueError("exact division failed: not a multiple")
        c = rem[key] / flc
        out[(i, j)] = c
        for (fi, fj), fv in f.c.items():
            k2 = (fi + i, fj + j)
            w = rem.get(k2, _ZERO) - c * fv
            if w.is_zero:
                rem.pop(k2, None)
            else:
                rem[k2] = w
    return BiPoly(out)


def _to_rec(P: BiPoly) -> List[List[GR]]:
    """Recursive form: list over y-degree of x-coefficient lists."""
    dy = P.deg_y()
    rows: List[List[GR]] = [[] for _ in range(dy + 1)]
    for (i, j), v in P.c.items():
        row = rows[j]
        while len(row) <= i:
            row.append(_ZERO)
        row[i] = v
    return [_utrim(r) for r in rows]


def _from_rec(rows) -> BiPoly:
    c = {}
    for j, row in enumerate(rows):
        for i, v in enumerate(row):
            if not v.is_zero:
                c[(i, j)] = v
    return BiPoly(c)


def _rec_trim(rows):
    while rows and not rows[-1]:
        rows.pop()
    return rows


def _content_y(rows) -> List[GR]:
    cont: List[GR] = []
    for row in rows:
        if row:
            cont = _ugcd(cont, row) if cont else [c / row[-1] for c in row]
    return cont


def _rec_divide_content(rows, cont):
    out = []
    for row in rows:
        if not row:
            out.append([])
        else:
            q, r = _udivmod(row, cont)
            if r:
                raise ValueError("content division failed")
            out.append(q)
    return out


def _rec_mul_scalar_poly(rows, upoly):
    return [_umul(row, upoly) if row else [] for row in rows]


def _rec_sub(a, b):
    out = []
    for j in range(max(len(a), len(b))):
        ra = list(a[j]) if j < len(a) else []
        rb = b[j] if j < len(b) else []
        while len(ra) < len(rb):
            ra.append(_ZERO)
        for i, v in enumerate(rb):
            ra[i] = ra[i] - v
        out.append(_utrim(ra))
    return _rec_trim(out)


def _rec_shift_y(rows, k):
    return [[] for _ in range(k)] + rows


def _pseudo_rem(A, B):
    """Pseudo-remainder of A by B in (Q(i)[x])[y]."""
    A = _rec_trim([list(r) for r in A])
    B = _rec_trim([list(r) for r in B])
    db = len(B) - 1
    lcb = B[-1]
    while _rec_trim(A) and len(A) - 1 >= db:
        da = len(A) - 1
        lca = A[-1]
        A = _rec_mul_scalar_poly(A, lcb)
        sub = _rec_shift_y(_rec_mul_scalar_poly(B, lca), da - db)
        A = _rec_sub(A, sub)
        A = _rec_trim(A)
    return A


def gcd_bivariate(P: BiPoly, Q: BiPoly) -> BiPoly:
    """Exact gcd over Q(i)[x, y], grevlex-monic normalized."""
    if P.is_zero:
        return monic_normalize(Q)
    if Q.is_zero:
        return monic_normalize(P)
    A, B = _to_rec(P), _to_rec(Q)
    contA, contB = _content_y(A), _content_y(B)
    cont = _ugcd(contA, contB)
    A = _rec_divide_content(A, contA)
    B = _rec_divide_content(B, contB)
    # primitive PRS in (Q(i)[x])[y]
    if len(A) < len(B):
        A, B = B, A
    while True:
        B = _rec_trim(B)
        if not B:
            G = A
            break
        if len(B) == 1:
            # gcd of primitive parts divides a unit of (Q(i)[x])[y]
            G = [[_ONE]]
            break
        R = _pseudo_rem(A, B)
        R = _rec_trim(R)
        if R:
            contR = _content_y(R)
            R = _rec_divide_content(R, contR)
        A, B = B, R
    contG = _content_y(G)
    G = _rec_divide_content(G, contG)
    result = _from_rec(G)
    cont_poly = BiPoly({(i, 0): v for i, v in enumerate(cont) if not v.is_zero})
    return monic_normalize(result * cont_poly)


def squarefree_part(f: BiPoly) -> BiPoly:
    if f.is_zero or f.degree() == 0:
        return monic_normalize(f)
    g = gcd_bivariate(gcd_bivariate(f, f.diff_x()), gcd_bivariate(f, f.diff_y()))
    if g.degree() <= 0:
        return monic_normalize(f)
    return monic_normalize(divide_exact(f, g))


def _monomial_split(f: BiPoly) -> Tuple[int, int, BiPoly]:
    """f = x^i y^j * rest with rest not divisible by x or y."""
    if f.is_zero:
        return 0, 0, f
    i0, j0 = f.monomial_content()
    return i0, j0, f.divide_monomial(i0, j0)


def factor_list_for_locus(f: BiPoly) -> List[str]:
    """Human-readable radical factors: axis powers split off, remainder kept whole."""
    sf = squarefree_part(f)
    if sf.is_zero or sf.degree() <= 0:
        return []
    i0, j0, rest = _monomial_split(sf)
    out = []
    if i0:
        out.append("x")
    if j0:
        out.append("y")
    if rest.degree() > 0:
        out.append(rest.pretty())
    return out


# ---------------------------------------------------------------------------
# exact vector fields
# ---------------------------------------------------------------------------

def _exactify(p: BiPoly) -> BiPoly:
    return BiPoly({k: GR.coerce(v) for k, v in p.c.items()}, None)


@dataclass(frozen=True)
class ExactVectorField:
    """X = P d/dx + Q d/dy over Gaussian rationals (plain polynomials)."""

    P: BiPoly
    Q: BiPoly
    truncation_order: Optional[int] = None

    @classmethod
    def from_polys(cls, P: BiPoly, Q: BiPoly, truncation_order=None):
        return cls(_exactify(P), _exactify(Q), truncation_order)

    @classmethod
    def from_jet(cls, jet: VectorFieldJet):
        if not jet.exact:
            raise TypeError("resolution requires exact (Gaussian-rational) coefficients")
        return cls(_exactify(jet.px), _exactify(jet.py), jet.truncation_order)

    @classmethod
    def from_coeff_maps(cls, px, py, truncation_order=None):
        conv = lambda d: BiPoly({k: GR.coerce(v) for k, v in d.items()})
        return cls(conv(px), conv(py), truncation_order)

    @property
    def is_zero(self) -> bool:
        return self.P.is_zero and self.Q.is_zero

    def value_at(self, x: GR, y: GR) -> Tuple[GR, GR]:
        px = self.P.eval(x, y) if not self.P.is_zero else _ZERO
        qy = self.Q.eval(x, y) if not self.Q.is_zero else _ZERO
        return GR.coerce(px * _ONE), GR.coerce(qy * _ONE)

    def shift(self, ax: GR, ay: GR) -> "ExactVectorField":
        return ExactVectorField(self.P.shift(ax, ay), self.Q.shift(ax, ay),
                                self.truncation_order)

    def linear_matrix(self):
        return (
            (GR.coerce(self.P.coeff(1, 0) or 0), GR.coerce(self.P.coeff(0, 1) or 0)),
            (GR.coerce(self.Q.coeff(1, 0) or 0), GR.coerce(self.Q.coeff(0, 1) or 0)),
        )

    def order(self) -> Optional[int]:
        os = [p.order() for p in (self.P, self.Q) if not p.is_zero]
        return min(os) if os else None

    def pretty(self) -> str:
        return f"({self.P.pretty()}) d/dx + ({self.Q.pretty()}) d/dy"


@dataclass(frozen=True)
class SaturationResult:
    f: BiPoly
    saturated: ExactVectorField
    singular_locus: List[str]
    origin_only: bool

    @property
    def f_is_unit(self) -> bool:
        return self.f.degree() == 0 and not self.f.is_zero


def saturate(X: ExactVectorField) -> SaturationResult:
    """X = f * sat X with coprime saturated components; sing X is the
    square-free zero locus of f (or the origin when f is a unit and the
    saturated components both vanish there)."""
    if X.is_zero:
        raise NotSingularError("cannot saturate the zero field")
    f = gcd_bivariate(X.P, X.Q)
    A = divide_exact(X.P, f) if not X.P.is_zero else BiPoly({})
    B = divide_exact(X.Q, f) if not X.Q.is_zero else BiPoly({})
    sat = ExactVectorField(A, B, X.truncation_order)
    if f.degree() == 0:
        a0, b0 = sat.value_at(_ZERO, _ZERO)
        origin_only = a0.is_zero and b0.is_zero
        return SaturationResult(f=monic_normalize(f), saturated=sat,
                                singular_locus=[], origin_only=origin_only)
    return SaturationResult(f=f, saturated=sat,
                            singular_locus=factor_list_for_locus(f),
                            origin_only=False)


def classify_point(X: ExactVectorField, point=( _ZERO, _ZERO)) -> str:
    """Classification of the (saturated) field's germ at a point.

    Reduced means lambda1 != 0 and lambda2/lambda1 not in Q_{>0}; the
    rational-ratio test runs exactly: with T = tr J and D = det J != 0,
    the ratio is a positive rational iff rho = T^2/D is rational with
    rho >= 4 and rho(rho - 4) a rational square.
    """
    px, py = GR.coerce(point[0]), GR.coerce(point[1])
    v1, v2 = X.value_at(px, py)
    if not (v1.is_zero and v2.is_zero):
        return CLASS_NONSINGULAR
    loc = X.shift(px, py) if not (px.is_zero and py.is_zero) else X
    (a11, a12), (a21, a22) = loc.linear_matrix()
    T = a11 + a22
    D = a11 * a22 - a12 * a21
    if D.is_zero:
        return CLASS_NOT_REDUCED if T.is_zero else CLASS_SADDLE_NODE
    rho = (T * T) / D
    if not rho.is_rational:
        return CLASS_NONDEGENERATE
    r = rho.re
    if r >= 4 and is_square_fraction(r * (r - 4)):
        return CLASS_NOT_REDUCED
    return CLASS_NONDEGENERATE


def blow_up(X: ExactVectorField, center=( _ZERO, _ZERO)):
    """Total transform of X under the blow-up at the center.

    Chart t: (x, y) = (x, t x) gives A(x, tx) d/dx + ((B - tA)/x) d/dt;
    chart s: (x, y) = (s y, y) gives ((A - sB)/y) d/ds + B(sy, y) d/dy.
    Division by the exceptional coordinate is exact for singular centers.
    """
    cx, cy = GR.coerce(center[0]), GR.coerce(center[1])
    loc = X.shift(cx, cy) if not (cx.is_zero and cy.is_zero) else X
    # chart t
    a_t = loc.P.sub_y_tx()
    b_t = loc.Q.sub_y_tx()
    t_poly = BiPoly.monomial(0, 1, _ONE)
    num_t = b_t - t_poly * a_t
    ddt = divide_exact(num_t, BiPoly.monomial(1, 0, _ONE)) if not num_t.is_zero else num_t
    chart_t = ExactVectorField(a_t, ddt, X.truncation_order)
    # chart s: swap roles so the working variables are (s, y)
    a_s = loc.P.sub_x_sy()
    b_s = loc.Q.sub_x_sy()
    s_poly_sy = BiPoly.monomial(1, 0, _ONE)
    num_s = a_s - s_poly_sy * b_s
    dds = divide_exact(num_s, BiPoly.monomial(0, 1, _ONE)) if not num_s.is_zero else num_s
    chart_s = ExactVectorField(dds, b_s, X.truncation_order)
    return chart_t, chart_s


# ---------------------------------------------------------------------------
# exact root extraction on the exceptional line
# ---------------------------------------------------------------------------

def _uroots_exact(p: List[GR]) -> List[GR]:
    """All roots of p in Q(i), verified exactly.

    Numeric roots only localize; each candidate is reconstructed with
    growing denominator caps and checked exactly, then divided out.  A
    leftover factor of positive degree has no Gaussian-rational root
    and aborts the resolution (the point field is too small).
    """
    p = _utrim(list(p))
    if not p:
        raise ValueError("zero polynomial has every root")
    roots: List[GR] = []
    work = list(p)
    while _udeg(work) >= 1:
        coeffs = [complex(c) for c in reversed(work)]
        approx = np.roots(coeffs)
        found = None
        for r in approx:
            for cap in (1, 10, 100, 10**4, 10**6, 10**9, 10**12):
                cand = GR(Fraction(r.real).limit_denominator(cap),
                          Fraction(r.imag).limit_denominator(cap))
                if _ueval(work, cand).is_zero:
                    found = cand
                    break
            if found is not None:
                break
        if found is None:
            raise UnsupportedPointFieldError(
                "singular point without Gaussian-rational coordinates "
                f"(leftover factor of degree {_udeg(work)})")
        roots.append(found)
        work, rem = _udivmod(work, [-found, _ONE])
        assert not rem
    seen = []
    for r in roots:
        if r not in seen:
            seen.append(r)
    return seen


def singular_points_on_line(sat: ExactVectorField, axis: str) -> List[GR]:
    """Parameters t with sat singular at (0, t) (axis x) or (t, 0) (axis y)."""
    if axis == "x":
        pa = [GR.coerce(sat.P.coeff(0, j) or 0) for j in range(sat.P.deg_y() + 1)]
        pb = [GR.coerce(sat.Q.coeff(0, j) or 0) for j in range(sat.Q.deg_y() + 1)]
    else:
        pa = [GR.coerce(sat.P.coeff(i, 0) or 0) for i in range(sat.P.deg_x() + 1)]
        pb = [GR.coerce(sat.Q.coeff(i, 0) or 0) for i in range(sat.Q.deg_x() + 1)]
    pa, pb = _utrim(pa), _utrim(pb)
    if not pa and not pb:
        raise UnsupportedGeometryError("saturated field vanishes on the divisor")
    g = _ugcd(pa, pb) if (pa and pb) else (pa or pb)
    if _udeg(g) < 1:
        return []
    return _uroots_exact(g)


# ---------------------------------------------------------------------------
# resolution tree
# ---------------------------------------------------------------------------

@dataclass
class DivisorAxis:
    axis: str           # "x" or "y": the local equation of the component
    comp_id: int        # global component identity across charts
    dicritical: Optional[bool] = None
    transverse_ok: Optional[bool] = None


@dataclass
class NodePoint:
    location: Tuple[GR, GR]
    classification: str
    status: str
    child_ids: Tuple[int, int] = ()
    model: Optional["ReducedModelTag"] = None

    @property
    def is_leaf(self) -> bool:
        return not self.child_ids


@dataclass
class TreeNode:
    node_id: int
    parent_id: Optional[int]
    depth: int
    chart: str                     # "root" | "t" | "s"
    center: Optional[Tuple[GR, GR]]
    total: ExactVectorField
    f: BiPoly
    sat: ExactVectorField
    divisor: List[DivisorAxis]
    points: List[NodePoint] = dataclass_field(default_factory=list)

    def divisor_axis(self, axis: str) -> Optional[DivisorAxis]:
        for d in self.divisor:
            if d.axis == axis:
                return d
        return None


def component_type(node: TreeNode, axis: str) -> Tuple[str, Optional[bool]]:
    """Invariant vs dicritical for the divisor axis in this chart, with
    a transversality verdict for the dicritical case.

    The axis {x=0} is a separatrix of sat iff x divides its d/dx
    component; a dicritical axis is transverse everywhere iff the
    normal part restricted to the axis is a nonvanishing constant.
    """
    sat = node.sat
    if axis == "x":
        invariant = sat.P.is_zero or sat.P.divisible_by_monomial(1, 0)
        restr = [GR.coerce(sat.P.coeff(0, j) or 0) for j in range(sat.P.deg_y() + 1)]
    else:
        invariant = sat.Q.is_zero or sat.Q.divisible_by_monomial(0, 1)
        restr = [GR.coerce(sat.Q.coeff(i, 0) or 0) for i in range(sat.Q.deg_x() + 1)]
    if invariant:
        return "invariant", None
    restr = _utrim(restr)
    transverse = len(restr) == 1
    return "dicritical", transverse


class ResolutionTree:
    def __init__(self):
        self.nodes: List[TreeNode] = []
        self._next_comp = 0

    def new_component(self) -> int:
        cid = self._next_comp
        self._next_comp += 1
        return cid

    def add(self, node: TreeNode) -> TreeNode:
        self.nodes.append(node)
        return node

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    @property
    def depth(self) -> int:
        return max(n.depth for n in self.nodes)

    def leaf_points(self):
        for node in self.nodes:
            for pt in node.points:
                if pt.is_leaf:
                    yield node, pt

    def classified_counts(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for _, pt in self.leaf_points():
            out[pt.status] = out.get(pt.status, 0) + 1
        return out

    # -- export -----------------------------------------------------------
    def to_json_obj(self):
        def gr_str(v: GR):
            return [str(v.re), str(v.im)]

        def poly_obj(p: BiPoly):
            return [[i, j, str(v.re), str(v.im)] for i, j, v in p.terms()]

        nodes = []
        for n in self.nodes:
            nodes.append({
                "id": n.node_id,
                "parent": n.parent_id,
                "depth": n.depth,
                "chart": n.chart,
                "center": None if n.center is None else
                          [gr_str(n.center[0]), gr_str(n.center[1])],
                "field": {"P": poly_obj(n.total.P), "Q": poly_obj(n.total.Q)},
                "f": poly_obj(n.f),
                "sat": {"P": poly_obj(n.sat.P), "Q": poly_obj(n.sat.Q)},
                "divisor": [{"axis": d.axis, "component": d.comp_id,
                             "type": ("dicritical" if d.dicritical else "invariant"),
                             "transverse": d.transverse_ok} for d in n.divisor],
                "points": [{
                    "location": [gr_str(p.location[0]), gr_str(p.location[1])],
                    "classification": p.classification,
                    "status": p.status,
                    "children": list(p.child_ids),
                    "model": None if p.model is None else p.model.to_json_obj(),
                } for p in n.points],
            })
        return {"nodes": nodes, "depth": self.depth}

    def to_dot(self) -> str:
        lines = ["digraph resolution {", "  node [fontname=monospace];"]
        colors = {CLASS_NONDEGENERATE: "palegreen", CLASS_SADDLE_NODE: "khaki",
                  CLASS_NONSINGULAR: "lightblue", STATUS_DICRITICAL: "plum",
                  CLASS_NOT_REDUCED: "salmon"}
        for n in self.nodes:
            label = f"n{n.node_id} {n.chart} d={n.depth}"
            lines.append(f'  n{n.node_id} [shape=box, label="{label}"];')
            if n.parent_id is not None:
                lines.append(f"  n{n.parent_id} -> n{n.node_id};")
            for idx, p in enumerate(n.points):
                pid = f"n{n.node_id}p{idx}"
                loc = f"({complex(p.location[0]):.3g},{complex(p.location[1]):.3g})"
                color = colors.get(p.status, "white")
                lines.append(
                    f'  {pid} [shape=ellipse, style=filled, fillcolor={color}, '
                    f'label="{p.status}\\n{loc}"];')
                lines.append(f"  n{n.node_id} -> {pid};")
                for cid in p.child_ids:
                    lines.append(f"  {pid} -> n{cid};")
        lines.append("}")
        return "\n".join(lines)


def _leaf_status(node: TreeNode, pt_axis_hits: List[DivisorAxis], klass: str) -> str:
    if klass == CLASS_NONSINGULAR and any(d.dicritical for d in pt_axis_hits):
        return STATUS_DICRITICAL
    return klass


def resolve(X: ExactVectorField, max_depth: int = 12) -> ResolutionTree:
    """Blow up every NotReduced saturated singular point until all chart
    points classify as reduced or nonsingular (Seidenberg terminates;
    the depth cap only guards against bugs).

    A singular field whose saturation is nonsingular at the origin
    still receives the first blow-up: the exceptional divisor must
    exist for the transform's divisor geometry to be recorded.
    """
    if X.is_zero:
        raise NotSingularError("the zero field has no resolution")
    sres = saturate(X)
    v1, v2 = X.value_at(_ZERO, _ZERO)
    f0 = sres.f.eval(_ZERO, _ZERO)
    singular_origin = (v1.is_zero and v2.is_zero) or GR.coerce(f0 * _ONE).is_zero
    if not singular_origin:
        raise NotSingularError("the field is not singular at the origin")
    tree = ResolutionTree()
    root = tree.add(TreeNode(node_id=0, parent_id=None, depth=0, chart="root",
                             center=None, total=X, f=sres.f, sat=sres.saturated,
                             divisor=[]))
    work: List[Tuple[TreeNode, Tuple[GR, GR]]] = [(root, (_ZERO, _ZERO))]
    while work:
        node, loc = work.pop()
        klass = classify_point(node.sat, loc)
        hits = [d for d in node.divisor
                if (loc[0].is_zero if d.axis == "x" else loc[1].is_zero)]
        force_first = (node.chart == "root" and klass == CLASS_NONSINGULAR)
        if klass != CLASS_NOT_REDUCED and not force_first:
            node.points.append(NodePoint(location=loc, classification=klass,
                                         status=_leaf_status(node, hits, klass)))
            continue
        if node.depth >= max_depth:
            raise DepthExceededError(
                f"depth cap {max_depth} hit at node {node.node_id}; "
                "either raise the cap or the center choice is wrong")
        chart_t_field, chart_s_field = blow_up(node.total, loc)
        new_comp = tree.new_component()
        children = []
        for chart, total in (("t", chart_t_field), ("s", chart_s_field)):
            sres = saturate(total)
            new_axis = "x" if chart == "t" else "y"
            divisor = [DivisorAxis(axis=new_axis, comp_id=new_comp)]
            # strict transform of the old component through the center
            old_axis = "y" if chart == "t" else "x"
            carried = None
            for d in hits:
                if d.axis == old_axis:
                    carried = DivisorAxis(axis=old_axis, comp_id=d.comp_id)
            if carried is not None:
                divisor.append(carried)
            child = tree.add(TreeNode(
                node_id=len(tree.nodes), parent_id=node.node_id,
                depth=node.depth + 1, chart=chart, center=loc,
                total=total, f=sres.f, sat=sres.saturated, divisor=divisor))
            for d in child.divisor:
                kind, trans = component_type(child, d.axis)
                d.dicritical = kind == "dicritical"
                d.transverse_ok = trans
            children.append(child)
        node.points.append(NodePoint(
            location=loc, classification=klass, status=klass,
            child_ids=(children[0].node_id, children[1].node_id)))
        # new singular points: all of E in chart t, only the far point in chart s
        child_t, child_s = children
        found_t = 0
        for t0 in singular_points_on_line(child_t.sat, "x"):
            work.append((child_t, (_ZERO, t0)))
            found_t += 1
        s_origin = (_ZERO, _ZERO)
        vs1, vs2 = child_s.sat.value_at(*s_origin)
        if vs1.is_zero and vs2.is_zero:
            work.append((child_s, s_origin))
        else:
            # witness the generic divisor point of the far chart
            k = classify_point(child_s.sat, s_origin)
            child_s.points.append(NodePoint(
                location=s_origin, classification=k,
                status=_leaf_status(child_s, child_s.divisor, k)))
        if found_t == 0:
            k = classify_point(child_t.sat, (_ZERO, _ZERO))
            child_t.points.append(NodePoint(
                location=(_ZERO, _ZERO), classification=k,
                status=_leaf_status(child_t, child_t.divisor, k)))
    return tree


def check_chart_compatibility(tree: ResolutionTree) -> bool:
    """On every blow-up the two charts must agree under t = 1/s.

    Push the t-chart field through the transition (s, y) = (1/t, t x):
    d/ds = -t^2 * (dt-component), d/dy = x * (dt) + t * (dx); after the
    substitution x = s y, t = 1/s the Laurent-cleared polynomials must
    match the s-chart field exactly.
    """
    pairs: Dict[Tuple[int, str], List[TreeNode]] = {}
    for n in tree.nodes:
        if n.parent_id is None:
            continue
        key = (n.parent_id, _loc_key(n.center))
        pairs.setdefault(key, []).append(n)
    for group in pairs.values():
        if len(group) != 2:
            return False
        t_node = next(n for n in group if n.chart == "t")
        s_node = next(n for n in group if n.chart == "s")
        F1, F2 = t_node.total.P, t_node.total.Q  # in (x, t)
        G1, G2 = s_node.total.P, s_node.total.Q  # in (s, y)
        # express the transported fields as Laurent polynomials in (s, y)
        minus_F2_over_t2 = _subst_xt_to_sy(F2, extra_t=-2, negate=True)
        x_F2_plus_t_F1 = _laurent_add(
            _subst_xt_to_sy(F2, extra_x=1), _subst_xt_to_sy(F1, extra_t=1))
        if not _laurent_equal(minus_F2_over_t2, G1) or not _laurent_equal(x_F2_plus_t_F1, G2):
            return False
    return True


def _loc_key(loc) -> str:
    if loc is None:
        return "?"
    return f"{loc[0]!r},{loc[1]!r}"


def _subst_xt_to_sy(p: BiPoly, extra_x: int = 0, extra_t: int = 0,
                    negate: bool = False):
    """p(x, t) * x^extra_x * t^extra_t with x = s y, t = 1/s.

    Returns a dict (i, j) -> GR over monomials s^i y^j with i possibly
    negative (Laurent in s).
    """
    out: Dict[Tuple[int, int], GR] = {}
    for (i, j), v in p.c.items():
        ii, jj = i + extra_x, j + extra_t
        key = (ii - jj, ii)  # x^ii t^jj = s^(ii-jj) y^ii
        w = out.get(key, _ZERO) + (-v if negate else v)
        if w.is_zero:
            out.pop(key, None)
        else:
            out[key] = w
    return out


def _laurent_add(a: Dict[Tuple[int, int], GR], b: Dict[Tuple[int, int], GR]):
    out = dict(a)
    for k, v in b.items():
        w = out.get(k, _ZERO) + v
        if w.is_zero:
            out.pop(k, None)
        else:
            out[k] = w
    return out


def _laurent_equal(laurent: Dict[Tuple[int, int], GR], poly: BiPoly) -> bool:
    ref = {k: GR.coerce(v) for k, v in poly.c.items()}
    return laurent == ref


# ---------------------------------------------------------------------------
# reduced-model tagging for unipotent germs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedModelTag:
    model: str
    M: Optional[int] = None
    N: Optional[int] = None
    a: Optional[GR] = None
    b: Optional[GR] = None

    def to_json_obj(self):
        return {"model": self.model, "M": self.M, "N": self.N,
                "a": None if self.a is None else [str(self.a.re), str(self.a.im)],
                "b": None if self.b is None else [str(self.b.re), str(self.b.im)]}

    def key(self):
        return (self.model, self.M, self.N, self.a, self.b)


@dataclass
class ClassifiedModelPoint:
    node_id: int
    location: Tuple[GR, GR]
    status: str
    tag: ReducedModelTag


@dataclass
class BiholoClassification:
    tree: ResolutionTree
    points: List[ClassifiedModelPoint]
    order: int
    divisor_in_singular_locus: Optional[bool]

    def model_counts(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for p in self.points:
            out[p.tag.model] = out.get(p.tag.model, 0) + 1
        return out


def _local_multiplicities(node: TreeNode, loc) -> Tuple[int, int, bool]:
    f_loc = node.f.shift(loc[0], loc[1]) if not (loc[0].is_zero and loc[1].is_zero) else node.f
    mx, my, rest = _monomial_split(f_loc)
    unit_rest = not GR.coerce(rest.coeff(0, 0) or 0).is_zero if not rest.is_zero else False
    return mx, my, unit_rest


def _model_tag_for(node: TreeNode, pt: NodePoint) -> ReducedModelTag:
    loc = pt.location
    mx, my, unit_rest = _local_multiplicities(node, loc)
    if pt.status in (CLASS_NONSINGULAR, STATUS_DICRITICAL):
        if node.f.degree() == 0:
            raise UnsupportedGeometryError(
                "nonsingular saturation with unit f: not a fixed point of the transform")
        if not unit_rest:
            return ReducedModelTag(model=MODEL_I)
        return ReducedModelTag(model=MODEL_I, M=mx, N=my)
    if not unit_rest:
        raise UnsupportedGeometryError(
            "singular locus at a reduced point is not monomial-up-to-unit "
            "in chart coordinates; parameter extraction unsupported")
    sat_loc = node.sat.shift(loc[0], loc[1]) if not (loc[0].is_zero and loc[1].is_zero) else node.sat
    (a11, a12), (a21, a22) = sat_loc.linear_matrix()
    if pt.status == CLASS_SADDLE_NODE:
        return ReducedModelTag(model=MODEL_III, M=mx, N=my)
    # nondegenerate: pair each eigenvalue with its coordinate direction;
    # separatrix branches force the mixed entries tied to them to vanish
    if mx >= 1 and not a12.is_zero:
        raise UnsupportedGeometryError("x-branch of the singular locus is not a separatrix")
    if my >= 1 and not a21.is_zero:
        raise UnsupportedGeometryError("y-branch of the singular locus is not a separatrix")
    a, b = a11, a22
    M, N = mx, my
    if M < 1:
        M, N, a, b = N, M, b, a
    if M < 1:
        raise UnsupportedGeometryError("nondegenerate point without a divisor branch")
    return ReducedModelTag(model=MODEL_II, M=M, N=N, a=a, b=b)


def _tag_tree(tree: ResolutionTree) -> List[ClassifiedModelPoint]:
    out = []
    for node, pt in tree.leaf_points():
        tag = _model_tag_for(node, pt)
        pt.model = tag
        out.append(ClassifiedModelPoint(node_id=node.node_id, location=pt.location,
                                        status=pt.status, tag=tag))
    return out


def _divisor_fixed_check(tree: ResolutionTree) -> bool:
    for node in tree.nodes:
        for d in node.divisor:
            f = node.f
            ok = f.divisible_by_monomial(1, 0) if d.axis == "x" else \
                f.divisible_by_monomial(0, 1)
            if not ok:
                return False
    return True


def classify_biholo_points(F: PolyMapGerm, order: Optional[int] = None,
                           max_depth: int = 12,
                           stability_check: bool = True) -> BiholoClassification:
    """Resolve log F and tag every terminal point with its reduced model.

    Dicritical or nonsingular saturation gives model (i); reduced
    nondegenerate points give model (ii) with (M, N, a, b) read off the
    local normal form; saddle-nodes give model (iii).  A re-run at
    order + 2 guards against truncation artifacts.
    """
    if not F.exact:
        raise TypeError("classification requires exact (Gaussian-rational) germs")
    if order is None:
        order = F.truncation_order
    X = formal_log(F, order)
    if X.is_zero:
        raise NotSingularError("log F = 0: the identity has no resolution data")
    tree = resolve(ExactVectorField.from_jet(X), max_depth=max_depth)
    points = _tag_tree(tree)
    divisor_fixed = None
    if F.tangent_to_identity:
        divisor_fixed = _divisor_fixed_check(tree)
    if stability_check:
        X2 = formal_log(F, min(order + 2, F.truncation_order + 2))
        tree2 = resolve(ExactVectorField.from_jet(X2), max_depth=max_depth)
        points2 = _tag_tree(tree2)
        key1 = sorted(p.tag.key() for p in points)
        key2 = sorted(p.tag.key() for p in points2)
        if key1 != key2:
            raise TruncationUnstableError(
                f"model tags changed between order {order} and {order + 2}; "
                "raise the truncation order")
    return BiholoClassification(tree=tree, points=points, order=order,
                                divisor_in_singular_locus=divisor_fixed)
