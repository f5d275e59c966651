"""Numerical invariant curves y = u(x) on extended attracting sectors
for noncorner germs, via a graph-transform fixed point.

The defining relation is u(F1(x, u(x))) = F2(x, u(x)).  Per sweep,
every grid node solves that relation implicitly by damped Newton
against the previous sweep's interpolant (Jacobi style, so nodes are
independent); sweeps repeat until the sup-change stalls below tol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import GridResolutionError, NoContractionError, NotInDomainError
from .germs import FORM_NONCORNER, PolyMapGerm, classify_form
from .sectors import ATTRACTING_EXTENDED, SectorSpec

_EDGE_FRACTION = 0.98   # angular span kept inside the extended sector
_RADIAL_SAFETY = 0.97   # radial pullback from the sector boundary


def _poly_eval_grid(poly, X, Y):
    """Dense Horner over numpy arrays, rows in x, columns in y."""
    dx = max((i for i, _ in poly.c), default=0)
    dy = max((j for _, j in poly.c), default=0)
    total = np.zeros_like(X)
    for i in range(dx, -1, -1):
        row = np.zeros_like(X)
        for j in range(dy, -1, -1):
            v = poly.c.get((i, j))
            row = row * Y + (complex(v) if v is not None else 0.0)
        total = total * X + row
    return total


def _lagrange_weights(s):
    """Cubic Lagrange weights on the 4-point stencil at offsets 0..3."""
    w0 = -(s - 1) * (s - 2) * (s - 3) / 6.0
    w1 = s * (s - 2) * (s - 3) / 2.0
    w2 = -s * (s - 1) * (s - 3) / 2.0
    w3 = s * (s - 1) * (s - 2) / 6.0
    return w0, w1, w2, w3


@dataclass
class ParabolicCurve:
    """Sampled invariant curve on one extended attracting sector.

    values[i, j] is u at radius index i, angle index j; interpolation
    is cubic in log-radius and (barycentric-form) cubic in the angle.
    """

    sector: SectorSpec
    angles: np.ndarray
    log_rho: np.ndarray
    nodes: np.ndarray
    values: np.ndarray
    residual: float
    bound_constant: float
    sweeps: int
    interp_error: float = math.inf

    @property
    def k(self) -> int:
        return self.sector.component_index

    @property
    def d(self) -> int:
        return self.sector.d

    def boundary_radius(self, phi):
        """Radial extent of the extended sector at deviation phi."""
        eps, th, d = self.sector.epsilon, self.sector.theta, self.sector.d
        a = np.abs(np.asarray(phi)) * d
        core = a <= th
        r = np.where(core, eps, eps * np.cos(np.minimum(a - th, math.pi / 2 - 1e-9)))
        return np.maximum(r, 1e-300) ** (1.0 / d)

    def _query_coords(self, x):
        x = np.asarray(x, dtype=complex)
        w = x * np.exp(-1j * (2.0 * math.pi * self.k / self.d))
        phi = np.angle(np.where(x == 0, 1.0, w))
        rho = np.abs(x) / (_RADIAL_SAFETY * self.boundary_radius(phi))
        return phi, rho

    def in_sector(self, x):
        phi, rho = self._query_coords(x)
        span = self.angles[-1]
        return (np.abs(phi) <= span) & (rho <= 1.0) & (np.abs(np.asarray(x)) > 0)

    def _interp_stencil(self, x):
        """Stencil indices and Lagrange weights for queries x."""
        x = np.asarray(x, dtype=complex)
        phi, rho = self._query_coords(x)
        t = np.log(np.maximum(rho, 1e-300))
        t0, dt = self.log_rho[0], self.log_rho[1] - self.log_rho[0]
        p0, dp = self.angles[0], self.angles[1] - self.angles[0]
        nr, na = self.values.shape
        it = np.clip(np.floor((t - t0) / dt).astype(int) - 1, 0, nr - 4)
        ia = np.clip(np.floor((phi - p0) / dp).astype(int) - 1, 0, na - 4)
        st = (t - (t0 + it * dt)) / dt
        sa = (phi - (p0 + ia * dp)) / dp
        return it, ia, _lagrange_weights(st), _lagrange_weights(sa), phi, rho

    def u_at_arrays(self, x, clamp: bool = False):
        """Interpolated u(x); nan outside the grid unless clamped."""
        x = np.asarray(x, dtype=complex)
        it, ia, wt, wa, phi, rho = self._interp_stencil(x)
        out = np.zeros_like(x)
        for i in range(4):
            row = np.zeros_like(x)
            for j in range(4):
                row = row + wa[j] * self.values[it + i, ia + j]
            out = out + wt[i] * row
        if not clamp:
            good = (np.abs(phi) <= self.angles[-1] + 1e-12) & (rho <= 1.0 + 1e-9)
            out = np.where(good, out, np.nan + 1j * np.nan)
        return out

    def u_at(self, x: complex) -> complex:
        val = self.u_at_arrays(np.array([x]))[0]
        if np.isnan(val):
            raise NotInDomainError(f"x={x!r} is outside the curve's sector grid")
        return complex(val)

    def graph_distance_arrays(self, xs, ys):
        u = self.u_at_arrays(xs)
        return np.where(np.isnan(u), np.inf, np.abs(np.asarray(ys) - u))

    def fitted_bound(self) -> float:
        xl = np.abs(self.nodes * np.log(self.nodes))
        return float(np.max(np.abs(self.values) / np.maximum(xl, 1e-300)))

    def export_rows(self):
        """CSV rows (re_x, im_x, re_u, im_u, residual_at_node)."""
        res = self._node_residuals()
        rows = []
        for idx in np.ndindex(self.values.shape):
            x = self.nodes[idx]
            u = self.values[idx]
            rows.append((x.real, x.imag, u.real, u.imag, float(res[idx])))
        return rows

    def _node_residuals(self, F: Optional[PolyMapGerm] = None):
        F = F if F is not None else self._germ
        x1 = _poly_eval_grid(F.fx, self.nodes, self.values)
        y1 = _poly_eval_grid(F.fy, self.nodes, self.values)
        return np.abs(self.u_at_arrays(x1, clamp=True) - y1)

    _germ: Optional[PolyMapGerm] = None


def graph_transform_curve(F: PolyMapGerm, sector: SectorSpec,
                          grid: Tuple[int, int] = (64, 33), tol: float = 1e-12,
                          max_sweeps: int = 800, rho_min: float = 1.0 / 512.0,
                          newton_iters: int = 3) -> ParabolicCurve:
    """Fixed-point iteration for the invariant graph on the sector.

    F must be a normalized noncorner germ (a on the negative real axis)
    and the sector one extended attracting component with d = M.
    """
    sig = classify_form(F)
    if sig.form != FORM_NONCORNER:
        raise NotInDomainError("graph transform needs a noncorner germ")
    if abs(sig.a.imag) > 1e-9 or sig.a.real >= 0:
        raise NotInDomainError("normalize first: the leading coefficient must lie on R^-")
    if sector.kind != ATTRACTING_EXTENDED:
        raise NotInDomainError("the curve lives on an extended attracting sector")
    if sector.d != sig.M:
        raise NotInDomainError(f"sector d={sector.d} but the germ has M={sig.M}")

    nrad, nphi = grid
    if nrad < 8 or nphi < 5:
        raise GridResolutionError("grid too coarse for cubic interpolation")
    span = _EDGE_FRACTION * (math.pi / 2 + sector.theta) / sector.d
    angles = np.linspace(-span, span, nphi)
    log_rho = np.linspace(math.log(rho_min), 0.0, nrad)
    curve = ParabolicCurve(sector=sector, angles=angles, log_rho=log_rho,
                           nodes=np.zeros((nrad, nphi), complex),
                           values=np.zeros((nrad, nphi), complex),
                           residual=math.inf, bound_constant=math.inf, sweeps=0)
    rb = curve.boundary_radius(angles)  # per-angle boundary
    P, T = np.meshgrid(angles, log_rho)  # T radial, P angular
    R = _RADIAL_SAFETY * rb[None, :] * np.exp(T)
    rot = np.exp(1j * (2.0 * math.pi * sector.component_index / sector.d))
    X = rot * R * np.exp(1j * P)
    curve.nodes = X
    curve._germ = F

    # Newton-Kantorovich on the whole grid: one step linearizes the
    # invariance defect E(u)(x) = u(F1(x, u)) - F2(x, u) and solves the
    # sparse transport system.  Per-node relaxation alone converges only
    # algebraically, because corrections travel one Leau step per sweep.
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    nr, na = X.shape
    ntot = nr * na
    V = np.zeros_like(X)
    h_fd = 1e-7
    sweeps_done = 0
    defect0 = None
    for sweep in range(1, max_sweeps + 1):
        curve.values = V
        X1 = _poly_eval_grid(F.fx, X, V)
        E = curve.u_at_arrays(X1, clamp=True) - _poly_eval_grid(F.fy, X, V)
        defect = float(np.max(np.abs(E)))
        if not math.isfinite(defect):
            raise NoContractionError("graph transform produced non-finite values")
        if defect0 is None:
            defect0 = max(defect, 1e-300)
        if defect > 1e6 * defect0 + 1.0:
            raise NoContractionError("graph transform diverged; shrink the sector")
        sweeps_done = sweep
        if defect < tol:
            break
        if sweep >= 3 and defect > 0.5 * prev_defect and prev_defect > 0.5 * prev_defect2:
            raise GridResolutionError(
                f"Newton defect stalled at {defect:.3e} > tol {tol:g}: "
                f"interpolation error dominates; refine the grid")
        prev_defect2 = prev_defect if sweep >= 2 else defect
        prev_defect = defect
        # diagonal part: d/du(x) through the second slot of F1, F2
        X1h = _poly_eval_grid(F.fx, X, V + h_fd)
        Eh = curve.u_at_arrays(X1h, clamp=True) - _poly_eval_grid(F.fy, X, V + h_fd)
        diag = ((Eh - E) / h_fd).ravel()
        # transport part: dependence of the interpolant on stencil values
        it, ia, wt, wa, _, _ = curve._interp_stencil(X1)
        rows = np.repeat(np.arange(ntot), 16)
        cols = np.empty((ntot, 16), dtype=int)
        vals = np.empty((ntot, 16), dtype=complex)
        itf, iaf = it.ravel(), ia.ravel()
        for i in range(4):
            for j in range(4):
                cols[:, 4 * i + j] = (itf + i) * na + (iaf + j)
                vals[:, 4 * i + j] = (wt[i] * wa[j]).ravel()
        J = sp.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(ntot, ntot))
        J = J + sp.diags(diag)
        delta = spla.spsolve(J.tocsc(), -E.ravel())
        step = delta.reshape(nr, na)
        scale = 1.0
        for _ in range(8):
            Vn = V + scale * step
            curve.values = Vn
            X1n = _poly_eval_grid(F.fx, X, Vn)
            En = curve.u_at_arrays(X1n, clamp=True) - _poly_eval_grid(F.fy, X, Vn)
            if float(np.max(np.abs(En))) < defect:
                V = Vn
                break
            scale *= 0.5
        else:
            raise NoContractionError("Newton step never reduced the defect")
    else:
        raise NoContractionError(
            f"graph transform did not reach defect {tol:g} in {max_sweeps} sweeps")
    # per-node polish: each node solves its implicit relation against the
    # final interpolant by damped Newton seeded at the current value
    for _ in range(newton_iters):
        curve.values = V.copy()
        X1 = _poly_eval_grid(F.fx, X, V)
        G = curve.u_at_arrays(X1, clamp=True) - _poly_eval_grid(F.fy, X, V)
        X1h = _poly_eval_grid(F.fx, X, V + h_fd)
        Gh = curve.u_at_arrays(X1h, clamp=True) - _poly_eval_grid(F.fy, X, V + h_fd)
        deriv = (Gh - G) / h_fd
        deriv = np.where(np.abs(deriv) < 1e-30, 1.0, deriv)
        V = V - G / deriv
    curve.values = V
    curve.sweeps = sweeps_done
    res = curve._node_residuals(F)
    curve.residual = float(np.max(res))
    curve.bound_constant = curve.fitted_bound()
    curve.interp_error = _midpoint_defect(F, curve)
    return curve


def _midpoint_defect(F, curve: ParabolicCurve) -> float:
    """Invariance defect probed at cell midpoints: an a-posteriori
    estimate of the interpolation error carried by the sampled curve."""
    t_mid = (curve.log_rho[:-1] + curve.log_rho[1:]) / 2.0
    a_mid = (curve.angles[:-1] + curve.angles[1:]) / 2.0
    P, T = np.meshgrid(a_mid[::4], t_mid[::4])
    rb = curve.boundary_radius(P)
    rot = np.exp(1j * (2.0 * math.pi * curve.k / curve.d))
    Xm = rot * _RADIAL_SAFETY * rb * np.exp(T) * np.exp(1j * P)
    Um = curve.u_at_arrays(Xm, clamp=True)
    x1 = _poly_eval_grid(F.fx, Xm, Um)
    y1 = _poly_eval_grid(F.fy, Xm, Um)
    return float(np.max(np.abs(curve.u_at_arrays(x1, clamp=True) - y1)))


def sectorial_change(point, curve: ParabolicCurve, direction: str = "forward"):
    """The change of coordinates (x, y) -> (x, y -+ u(x)) straightening
    the curve onto the x-axis (forward) or back (inverse)."""
    x, y = complex(point[0]), complex(point[1])
    u = curve.u_at(x)
    if direction == "forward":
        return (x, y - u)
    if direction == "inverse":
        return (x, y + u)
    raise ValueError("direction must be 'forward' or 'inverse'")


def conjugate_by_curve(F: PolyMapGerm, curve: ParabolicCurve, point):
    """Apply the straightened germ tau o F o tau^{-1} at a point."""
    x, y = complex(point[0]), complex(point[1])
    xi, yi = x, y + curve.u_at(x)
    x1, y1 = F.apply(xi, yi)
    return (x1, y1 - curve.u_at(x1))
