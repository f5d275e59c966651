"""Numerical dynamics: orbits, the invariant function psi, Fatou
coordinates, petal coverage and the saddle-behavior escape analysis.

Orbits of polynomial germs run through the compiled kernel (or its
pure-Python twin); flow maps and exact germs fall back to a generic
step loop.  Everything downstream consumes the same OrbitTrace record.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import (
    ExhaustedSearchError,
    HypothesisNotSatisfiedError,
    InsufficientDataError,
    NoConvergenceError,
    NotInDomainError,
    SlowConvergenceError,
)
from .germs import FORM_CORNER, FORM_OTHER, FormSignature, PolyMapGerm
from .sectors import (
    KIND_D_EXT,
    KIND_D_EXT_REP,
    KIND_U,
    KIND_V,
    DomainSpec,
    PetalParams,
    branch_g_arrays,
    domain_membership,
    domain_membership_arrays,
)

EXIT_MAX_STEPS = "max-steps"
EXIT_LEFT_BALL = "left-validity-ball"
EXIT_LEFT_DOMAIN = "left-domain"
EXIT_CONVERGED = "converged-to-0"
EXIT_DIVERGED = "diverged"

_KERNEL_EXIT = {
    kernels.EXIT_MAX_STEPS: EXIT_MAX_STEPS,
    kernels.EXIT_CONVERGED: EXIT_CONVERGED,
    kernels.EXIT_LEFT_BALL: EXIT_LEFT_BALL,
    kernels.EXIT_NONFINITE: EXIT_DIVERGED,
}

DEFAULT_CONV_TOL = 1e-15
_CHUNK = 16384


# ---------------------------------------------------------------------------
# orbit machinery
# ---------------------------------------------------------------------------

class _OrbitStream:
    """Incrementally extended orbit of a map, kernel-backed when possible."""

    def __init__(self, F, start, max_steps, radius, conv_tol=DEFAULT_CONV_TOL):
        self.F = F
        self.max_steps = max_steps
        self.radius2 = float(radius) ** 2
        self.conv2 = float(conv_tol) ** 2
        self.xs = np.empty(max_steps + 1, dtype=complex)
        self.ys = np.empty(max_steps + 1, dtype=complex)
        self.xs[0] = complex(start[0])
        self.ys[0] = complex(start[1])
        self.n = 0
        self.code: Optional[int] = None  # kernel exit code once stopped
        self._dense = F.dense_coeffs() if isinstance(F, PolyMapGerm) else None
        if self._dense is None and not hasattr(F, "apply"):
            raise TypeError("map must be a PolyMapGerm or expose apply(x, y)")
        # guard checks for the starting point
        x0, y0 = self.xs[0], self.ys[0]
        if not (math.isfinite(x0.real) and math.isfinite(x0.imag)
                and math.isfinite(y0.real) and math.isfinite(y0.imag)):
            self.code = kernels.EXIT_NONFINITE
        else:
            n2 = abs(x0) ** 2 + abs(y0) ** 2
            if n2 > self.radius2:
                self.code = kernels.EXIT_LEFT_BALL
            elif n2 < self.conv2:
                self.code = kernels.EXIT_CONVERGED

    @property
    def finished(self) -> bool:
        return self.code is not None or self.n >= self.max_steps

    def extend(self, want: int) -> int:
        """Grow the orbit by up to ``want`` steps; returns new step count."""
        if self.finished:
            return self.n
        k = min(want, self.max_steps - self.n)
        if self._dense is not None:
            cx, cy = self._dense
            sub_x = self.xs[self.n : self.n + k + 1]
            sub_y = self.ys[self.n : self.n + k + 1]
            steps, code = kernels.run_orbit(
                cx, cy, self.xs[self.n], self.ys[self.n], k,
                self.radius2, self.conv2, sub_x, sub_y,
            )
            self.n += steps
            if code != kernels.EXIT_MAX_STEPS:
                self.code = code
        else:
            x, y = self.xs[self.n], self.ys[self.n]
            for _ in range(k):
                x, y = self.F.apply(x, y)
                self.n += 1
                self.xs[self.n] = x
                self.ys[self.n] = y
                if not (math.isfinite(x.real) and math.isfinite(x.imag)
                        and math.isfinite(y.real) and math.isfinite(y.imag)):
                    self.code = kernels.EXIT_NONFINITE
                    break
                n2 = abs(x) ** 2 + abs(y) ** 2
                if n2 > self.radius2:
                    self.code = kernels.EXIT_LEFT_BALL
                    break
                if n2 < self.conv2:
                    self.code = kernels.EXIT_CONVERGED
                    break
        if self.n >= self.max_steps and self.code is None:
            self.code = kernels.EXIT_MAX_STEPS
        return self.n

    def run_all(self):
        while not self.finished:
            self.extend(_CHUNK)
        return self

    def exit_reason(self) -> str:
        return _KERNEL_EXIT[kernels.EXIT_MAX_STEPS if self.code is None else self.code]


@dataclass
class OrbitTrace:
    """Finite orbit with per-step derived quantities.

    ``z`` is (x^m y^n)^d, the quantity whose Leau dynamics drives all
    petal estimates; membership flags are filled when the matching
    domain specs were supplied.
    """

    xs: np.ndarray
    ys: np.ndarray
    exit_reason: str
    powers: Optional[Tuple[int, int, int]] = None
    s: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    abs_x: Optional[np.ndarray] = None
    abs_y: Optional[np.ndarray] = None
    in_U: Optional[np.ndarray] = None
    in_D: Optional[np.ndarray] = None

    @property
    def steps(self) -> int:
        return len(self.xs) - 1

    def points(self) -> Sequence[Tuple[complex, complex]]:
        return list(zip(self.xs.tolist(), self.ys.tolist()))

    def recompute_derived(self):
        """The derived arrays, recomputed from the stored points."""
        if self.powers is None:
            return None, None
        m, n, d = self.powers
        s = self.xs**m * self.ys**n
        return s, s**d


def _resolve_powers(powers, petal, guard):
    if powers is not None:
        return tuple(powers)
    if petal is not None:
        return petal.powers
    if isinstance(guard, DomainSpec):
        return guard.petal.powers
    return None


def iterate(F, start, max_steps: int = 1000, guard=None,
            powers=None, petal: Optional[PetalParams] = None,
            uspec: Optional[DomainSpec] = None, dspec: Optional[DomainSpec] = None,
            conv_tol: float = DEFAULT_CONV_TOL) -> OrbitTrace:
    """Iterate F from start until a guard fires or max_steps is hit.

    ``guard`` is a radius (defaults to F.validity_radius) or a
    DomainSpec; in the latter case leaving the domain stops the orbit
    with exit reason "left-domain".
    """
    domain_guard = guard if isinstance(guard, DomainSpec) else None
    radius = guard if isinstance(guard, (int, float)) else getattr(F, "validity_radius", 1.0)
    stream = _OrbitStream(F, start, max_steps, radius, conv_tol)
    cut = None  # (index, reason) for domain-guard violation
    if domain_guard is not None:
        while True:
            lo = stream.n
            if stream.finished and lo == 0:
                break
            if lo == 0:
                ok0 = domain_membership((stream.xs[0], stream.ys[0]), domain_guard)
                if not ok0:
                    cut = (0, EXIT_LEFT_DOMAIN)
                    break
            stream.extend(_CHUNK)
            hi = stream.n
            member = domain_membership_arrays(
                stream.xs[lo + 1 : hi + 1], stream.ys[lo + 1 : hi + 1], domain_guard
            )
            bad = np.flatnonzero(~member)
            if bad.size:
                cut = (lo + 1 + int(bad[0]), EXIT_LEFT_DOMAIN)
                break
            if stream.finished:
                break
    else:
        stream.run_all()
    if cut is not None:
        n = cut[0]
        reason = cut[1]
    else:
        n = stream.n
        reason = stream.exit_reason()
    xs = stream.xs[: n + 1].copy()
    ys = stream.ys[: n + 1].copy()
    pw = _resolve_powers(powers, petal, guard)
    trace = OrbitTrace(xs=xs, ys=ys, exit_reason=reason, powers=pw)
    if pw is not None:
        m, nn, d = pw
        trace.s = xs**m * ys**nn
        trace.z = trace.s**d
    trace.abs_x = np.abs(xs)
    trace.abs_y = np.abs(ys)
    if uspec is not None:
        trace.in_U = domain_membership_arrays(xs, ys, uspec)
    if dspec is not None:
        trace.in_D = domain_membership_arrays(xs, ys, dspec)
    return trace


# ---------------------------------------------------------------------------
# attraction diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttractionEstimate:
    limit: complex
    error_bar: float
    ok: bool
    reason: str = ""


def attraction_diagnostic(trace: OrbitTrace, min_steps: int = 50) -> AttractionEstimate:
    """Extrapolate lim j * z_j from a converging petal orbit.

    Fits v_j = L + (alpha log j + beta)/j on a geometric ladder of
    checkpoints; the model matches the known first-order deviation of
    the Leau dynamics.  Flags failure when the sequence is not
    Cauchy-like (e.g. on the fixed set).
    """
    if trace.z is None:
        raise ValueError("trace has no derived z; iterate with petal/powers set")
    n = trace.steps
    if n < min_steps:
        raise InsufficientDataError(f"need at least {min_steps} steps, got {n}")
    z = trace.z
    if np.max(np.abs(z[n // 2 :])) < 1e-300:
        return AttractionEstimate(0j, math.inf, False, "z vanishes along the orbit")
    ladder = []
    j = n
    floor = max(8, min_steps // 2, n // 64)
    while j >= floor and len(ladder) < 8:
        ladder.append(j)
        j //= 2
    ladder.reverse()
    v = np.array([ladder[i] * z[ladder[i]] for i in range(len(ladder))])
    if len(ladder) < 3:
        return AttractionEstimate(complex(v[-1]), abs(v[-1] - v[0]), False, "too few checkpoints")
    if np.min(np.abs(v)) < 1e-12:
        return AttractionEstimate(complex(v[-1]), math.inf, False, "j*z_j not bounded away from 0")
    # the reciprocal z_chart/j = 1/L + (A log j + C)/j is linear in the
    # fitted basis up to O(log j / j^2), so extrapolate there
    w = 1.0 / v
    js = np.array(ladder, dtype=float)
    A = np.column_stack([np.ones_like(js), np.log(js) / js, 1.0 / js])
    sol, *_ = np.linalg.lstsq(A, w, rcond=None)
    resid = w - A @ sol
    rms = float(np.sqrt(np.mean(np.abs(resid) ** 2)))
    half = len(ladder) // 2
    sol2, *_ = np.linalg.lstsq(A[half:], w[half:], rcond=None)
    if sol[0] == 0 or sol2[0] == 0:
        return AttractionEstimate(complex(v[-1]), math.inf, False, "reciprocal fit degenerate")
    limit = 1.0 / sol[0]
    err = abs(limit - 1.0 / sol2[0]) + 2.0 * rms * abs(limit) ** 2
    diffs = np.abs(np.diff(w))
    cauchy = bool(len(diffs) < 2 or diffs[-1] <= 4.0 * np.median(diffs[:-1]) + 1e-14)
    ok = cauchy and math.isfinite(err)
    reason = "" if ok else "sequence is not Cauchy-like"
    return AttractionEstimate(complex(limit), float(err), ok, reason)


# ---------------------------------------------------------------------------
# invariant function psi
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InvariantValue:
    psi: complex
    unit_factor: complex
    tail_bound: float
    steps_used: int


def invariant_function(F, spec: DomainSpec, point, tol: float = 1e-12,
                       max_steps: int = 200_000) -> InvariantValue:
    """psi = lim g(F^j) on the petal, via the convergent factor product.

    The product stops once the current factor deviates from 1 by less
    than tol*(1 - ratio) under a geometric tail model (ratio estimated
    from consecutive deviations); the reported tail bound is the
    geometric-tail estimate at the stopping index.
    """
    if spec.kind != KIND_U:
        spec = spec.with_kind(KIND_U)
    if not domain_membership(point, spec):
        raise NotInDomainError(f"point {point!r} is not in U_{spec.petal.k}")
    petal = spec.petal
    radius = getattr(F, "validity_radius", 1.0)
    stream = _OrbitStream(F, point, max_steps, radius)
    u = 1.0 + 0j
    dev_prev = None
    stopped = None
    tail = math.inf
    devs_window: List[float] = []
    rounding_floor = 8e-16
    while True:
        lo = stream.n
        stream.extend(_CHUNK)
        hi = stream.n
        if hi == lo:
            break
        # chunks overlap at one point, so factor j = g_{j+1}/g_j for j = lo..hi-1
        gs = branch_g_arrays(stream.xs[lo : hi + 1], stream.ys[lo : hi + 1], petal)
        if np.any(np.isnan(gs)):
            raise NoConvergenceError("orbit crossed the branch cut of g")
        factors = gs[1:] / gs[:-1]
        devs = np.abs(factors - 1.0)
        for idx in range(len(factors)):
            dev = float(devs[idx])
            u *= factors[idx]
            if dev <= rounding_floor:
                stopped = lo + idx
                tail = dev
                break
            if dev_prev is not None and dev_prev > 0:
                ratio = dev / dev_prev
                if ratio < 1.0 and dev < tol * (1.0 - ratio):
                    stopped = lo + idx
                    tail = dev * ratio / (1.0 - ratio)
                    break
            devs_window.append(dev)
            if len(devs_window) > 64:
                devs_window.pop(0)
            dev_prev = dev
        if stopped is not None or stream.finished:
            break
    if stopped is None:
        if stream.code in (kernels.EXIT_LEFT_BALL, kernels.EXIT_NONFINITE):
            raise NoConvergenceError(
                f"orbit left the validity ball at step {stream.n} "
                "before the factor product settled")
        # ran out of steps; accept with an honest tail bound when the
        # deviations still trend downward, otherwise reject the model.
        # Per-step ratios drown in rounding noise near the end, so the
        # trend is measured between window halves.
        if len(devs_window) >= 8:
            w = np.array(devs_window)
            half = len(w) // 2
            a = float(np.mean(w[:half]))
            b = float(np.mean(w[half:]))
            if 0.0 < b < a:
                ratio = (b / a) ** (1.0 / half)
                tail = w[-1] * ratio / (1.0 - ratio)
                stopped = stream.n - 1
        if stopped is None:
            raise NoConvergenceError(
                "factor deviations are not decreasing; geometric tail model rejected"
            )
    g0 = branch_g_arrays(np.array([point[0]]), np.array([point[1]]), petal)[0]
    psi = complex(u * g0)
    return InvariantValue(psi=psi, unit_factor=complex(u),
                          tail_bound=float(tail), steps_used=int(stopped) + 1)


# ---------------------------------------------------------------------------
# Fatou coordinates
# ---------------------------------------------------------------------------

BASE_POINT_FLOOR = 8.0  # C0 in the base-point rule |p| = 2 max(R_w, C0)
# betas carry ~1e-9 of accumulated orbit rounding at the default ladder;
# the Richardson error estimate is conservative, hence the 3e-8 default
DEFAULT_BETA_TOL = 3e-8


def _branch_seed(spec: DomainSpec, z: complex, w: complex) -> Tuple[complex, complex]:
    """Exact inverse of (1/(x^m y^n)^d, g) on petal k; Newton seed."""
    pp = spec.petal
    lz = cmath.log(z)
    lw = cmath.log(w)
    phase = 2.0 * math.pi * pp.k / pp.d
    cx = 1j * phase * (pp.q + pp.n * pp.lam)
    cy = -1j * phase * (pp.p + pp.m * pp.lam)
    x = cmath.exp(pp.a * lz - pp.n * lw + cx)
    y = cmath.exp(pp.b * lz + pp.m * lw + cy)
    return x, y


def chart_inverse(F, spec: DomainSpec, z: complex, w: complex,
                  tol: float = 1e-11, max_iter: int = 12,
                  psi_tol: float = 1e-12, psi_max_steps: int = 20_000):
    """Solve phi_k(x, y) = (z, w) by damped Newton.

    The seed inverts the explicit approximation (1/(x^m y^n)^d, g);
    psi is evaluated along orbits, and the Jacobian is taken by complex
    finite differences.  The residual floor is limited by the psi tail.
    """
    if spec.kind != KIND_V:
        spec = spec.with_kind(KIND_V)
    pp = spec.petal
    uspec = spec.with_kind(KIND_U)

    def _value(x, y):
        val_z = 1.0 / (x**pp.m * y**pp.n) ** pp.d
        iv = invariant_function(F, uspec, (x, y), tol=psi_tol, max_steps=psi_max_steps)
        return val_z, iv.psi

    def _residual(x, y):
        vz, vw = _value(x, y)
        return (vz - z) / (1.0 + abs(z)), (vw - w) / (1.0 + abs(w))

    x, y = _branch_seed(spec, z, w)
    if not domain_membership((x, y), uspec):
        raise NotInDomainError(
            f"chart seed for (z={z!r}, w={w!r}) lands outside U_{pp.k}")
    r1, r2 = _residual(x, y)
    for _ in range(max_iter):
        norm = math.hypot(abs(r1), abs(r2))
        if norm < tol:
            break
        h = 1e-7 * (abs(x) + abs(y))
        r1x, r2x = _residual(x + h, y)
        r1y, r2y = _residual(x, y + h)
        j11, j21 = (r1x - r1) / h, (r2x - r2) / h
        j12, j22 = (r1y - r1) / h, (r2y - r2) / h
        det = j11 * j22 - j12 * j21
        if det == 0:
            raise NoConvergenceError("singular Jacobian in chart inversion")
        dx = -(r1 * j22 - r2 * j12) / det
        dy = -(j11 * r2 - j21 * r1) / det
        scale = 1.0
        for _ in range(10):
            xn, yn = x + scale * dx, y + scale * dy
            if domain_membership((xn, yn), uspec):
                n1, n2 = _residual(xn, yn)
                if math.hypot(abs(n1), abs(n2)) < norm:
                    x, y, r1, r2 = xn, yn, n1, n2
                    break
            scale *= 0.5
        else:
            break
    if math.hypot(abs(r1), abs(r2)) > max(tol, 1e3 * psi_tol) * 10:
        raise NoConvergenceError(
            f"chart inversion stalled at residual {math.hypot(abs(r1), abs(r2)):.3e}")
    return x, y


def _richardson(values: np.ndarray, max_cols: int = 4):
    """Ratio-2 Richardson tableau; returns (extrapolated, error_estimate)."""
    rows = [np.asarray(values, dtype=complex)]
    k = 1
    while k <= max_cols and len(rows[-1]) >= 2:
        prev = rows[-1]
        fac = 2.0**k
        rows.append((fac * prev[1:] - prev[:-1]) / (fac - 1.0))
        k += 1
    best = rows[-1][-1]
    err = abs(rows[-1][-1] - rows[-2][-1]) if len(rows) >= 2 else math.inf
    if len(rows[-1]) >= 2:
        err = max(err, abs(rows[-1][-1] - rows[-1][-2]) * 0.5)
    return complex(best), float(err)


class FiberWorkspace:
    """Fatou coordinate computations on one psi-fiber w.

    Holds the base-point orbit so that several beta evaluations on the
    same fiber share it (and their common error cancels in conjugacy
    residuals).

    ``precision_dps`` switches the orbit arithmetic to mpmath with that
    many decimal digits.  Doubles accumulate ~1e-9 of orbit noise at
    the default ladder, which caps the usable Richardson depth; germs
    with a small contraction exponent gamma/d (< 1/4) need the higher
    noise floor to extrapolate at all.
    """

    def __init__(self, F, spec: DomainSpec, w: complex, base: Optional[complex] = None,
                 j0: int = 32, max_steps: int = 1 << 17, tol: float = DEFAULT_BETA_TOL,
                 inverse_kwargs: Optional[dict] = None,
                 precision_dps: Optional[int] = None):
        if spec.kind != KIND_V:
            spec = spec.with_kind(KIND_V)
        self.F = F
        self.spec = spec
        self.w = complex(w)
        self.tol = tol
        self.precision_dps = precision_dps
        pp = spec.petal
        if pp.n >= 1 and self.w == 0:
            raise NotInDomainError("w = 0 is outside the chart range when n >= 1")
        self.radius_w = spec.fiber_radius(self.w)
        if base is None:
            base = 2.0 * max(self.radius_w, BASE_POINT_FLOOR)
        self.base_point = complex(base)
        # checkpoint ladder j0 * 2^i capped by max_steps
        levels = max(3, int(math.floor(math.log2(max_steps / j0))))
        self.checkpoints = np.array([j0 * 2**i for i in range(levels + 1)], dtype=int)
        self.j_max = int(self.checkpoints[-1])
        self._inverse_kwargs = dict(inverse_kwargs or {})
        bx, by = chart_inverse(F, spec, self.base_point, self.w, **self._inverse_kwargs)
        self._base_z = self._orbit_chart_values((bx, by))

    def _orbit_chart_values(self, point):
        """z-chart values 1/(x^m y^n)^d along the orbit at the checkpoints."""
        if self.precision_dps is not None:
            return self._orbit_chart_values_mp(point)
        pp = self.spec.petal
        radius = getattr(self.F, "validity_radius", 1.0)
        stream = _OrbitStream(self.F, point, self.j_max, radius).run_all()
        if stream.n < self.j_max:
            raise NoConvergenceError(
                f"orbit stopped at step {stream.n} ({stream.exit_reason()}) "
                f"before the checkpoint ladder completed")
        s = stream.xs**pp.m * stream.ys**pp.n
        z = 1.0 / s**pp.d
        return z[self.checkpoints]

    def _orbit_chart_values_mp(self, point):
        import mpmath as mp

        pp = self.spec.petal
        if not isinstance(self.F, PolyMapGerm):
            raise TypeError("the high-precision path needs a polynomial germ")
        Ff = self.F.to_float()
        with mp.workdps(self.precision_dps):
            terms_x = [(i, j, mp.mpc(v)) for (i, j), v in sorted(Ff.fx.c.items())]
            terms_y = [(i, j, mp.mpc(v)) for (i, j), v in sorted(Ff.fy.c.items())]
            x = mp.mpc(complex(point[0]))
            y = mp.mpc(complex(point[1]))
            ckpts = set(int(c) for c in self.checkpoints)
            out = []
            for step in range(1, self.j_max + 1):
                xp = {0: mp.mpf(1)}
                yp = {0: mp.mpf(1)}

                def _pw(cache, base, n):
                    if n not in cache:
                        cache[n] = base ** n
                    return cache[n]

                xn = sum(c * _pw(xp, x, i) * _pw(yp, y, j) for i, j, c in terms_x)
                yn = sum(c * _pw(xp, x, i) * _pw(yp, y, j) for i, j, c in terms_y)
                x, y = xn, yn
                if step in ckpts:
                    out.append(1.0 / (x**pp.m * y**pp.n) ** pp.d)
            return out

    def in_fiber_domain(self, z: complex) -> bool:
        return bool(domain_membership_arrays(
            np.array([z]), np.array([self.w]), self.spec)[0])

    def beta_of_point(self, point) -> Tuple[complex, float]:
        """beta at the z-chart value of an ambient point on this fiber."""
        zs = self._orbit_chart_values(point)
        if self.precision_dps is not None:
            return self._richardson_mp(zs)
        return _richardson(zs - self._base_z)

    def _richardson_mp(self, zs) -> Tuple[complex, float]:
        import mpmath as mp

        with mp.workdps(self.precision_dps):
            rows = [[a - b for a, b in zip(zs, self._base_z)]]
            k = 1
            while k <= 4 and len(rows[-1]) >= 2:
                prev = rows[-1]
                fac = mp.mpf(2) ** k
                rows.append([(fac * prev[i + 1] - prev[i]) / (fac - 1)
                             for i in range(len(prev) - 1)])
                k += 1
            best = rows[-1][-1]
            err = abs(rows[-1][-1] - rows[-2][-1])
            if len(rows[-1]) >= 2:
                err = max(err, abs(rows[-1][-1] - rows[-1][-2]) * mp.mpf("0.5"))
            return complex(best), float(err)

    def beta(self, z: complex, check: bool = True) -> Tuple[complex, float]:
        if check and not self.in_fiber_domain(z):
            raise NotInDomainError(f"z={z!r} is outside the fiber domain V_w")
        x, y = chart_inverse(self.F, self.spec, z, self.w, **self._inverse_kwargs)
        return self.beta_of_point((x, y))

    def beta_strict(self, z: complex) -> complex:
        val, err = self.beta(z)
        if err > self.tol * max(1.0, abs(val)):
            raise SlowConvergenceError(
                f"beta error estimate {err:.3e} exceeds tol {self.tol:.3e} "
                f"(relative above unit magnitude); the contraction exponent "
                f"gamma/d may be too small for this budget")
        return val


def fatou_fiber(F, spec: DomainSpec, z: complex, w: complex,
                base: Optional[complex] = None, tol: float = DEFAULT_BETA_TOL,
                j0: int = 32, max_steps: int = 1 << 17) -> complex:
    """The fiberwise Fatou coordinate beta_w(z), base-point normalized.

    beta_w(p) = 0 at the deterministic base point p on the positive
    real axis with |p| = 2 max(R_w, C0); beta_w(f_w(z)) = beta_w(z)+1.
    """
    ws = FiberWorkspace(F, spec, w, base=base, j0=j0, max_steps=max_steps, tol=tol)
    return ws.beta_strict(z)


@dataclass(frozen=True)
class FatouChartValue:
    z: complex
    w: complex
    beta: complex
    base_point: complex
    forward_shift: int = 0
    beta_error: float = 0.0


def fatou_chart(F, spec: DomainSpec, point, extend: bool = True,
                max_forward: int = 200_000, tol: float = DEFAULT_BETA_TOL,
                psi_tol: float = 1e-12,
                workspace: Optional[FiberWorkspace] = None) -> FatouChartValue:
    """Full Fatou chart Phi(phi_k(point)) = (beta, psi).

    When the point is not yet in the pullback of V, the orbit is pushed
    forward until it is and the value is pulled back by the translation
    rule value(p) = value(F^j p) - (j, 0).
    """
    if spec.kind != KIND_V:
        spec = spec.with_kind(KIND_V)
    pp = spec.petal
    uspec = spec.with_kind(KIND_U)
    # walk forward (if allowed) until inside U_k, where psi is defined
    x, y = complex(point[0]), complex(point[1])
    shift = 0
    while not domain_membership((x, y), uspec):
        if not extend:
            raise NotInDomainError("point is outside U_k and extension is disabled")
        if shift >= max_forward:
            raise NotInDomainError("orbit never entered U_k within the forward budget")
        x, y = F.apply(x, y)
        shift += 1
    iv = invariant_function(F, uspec, (x, y), tol=psi_tol)
    w = iv.psi
    ws = workspace if workspace is not None else FiberWorkspace(F, spec, w, tol=tol)
    z_of = lambda xx, yy: 1.0 / (xx**pp.m * yy**pp.n) ** pp.d
    while not ws.in_fiber_domain(z_of(x, y)):
        if not extend:
            raise NotInDomainError("point is outside the pullback of V")
        if shift >= max_forward:
            raise NotInDomainError("orbit never entered the pullback of V")
        x, y = F.apply(x, y)
        shift += 1
    beta, err = ws.beta_of_point((x, y))
    if err > tol * max(1.0, abs(beta)):
        raise SlowConvergenceError(f"beta error estimate {err:.3e} exceeds tol")
    z0 = z_of(complex(point[0]), complex(point[1]))
    return FatouChartValue(z=z0, w=w, beta=beta - shift, base_point=ws.base_point,
                           forward_shift=shift, beta_error=err)


@dataclass(frozen=True)
class ProbeResult:
    j: int
    z: complex
    residual: float


def image_exhaustion_probe(F, spec: DomainSpec, target: Tuple[complex, complex],
                           j_max: int = 512, tol: float = 1e-6,
                           newton_iters: int = 16) -> ProbeResult:
    """Find j with z0 + j in beta_w(V_w), witnessing the exhaustion
    property of the chart image under backward translation.

    Scans increasing j and runs damped Newton on beta_w - (z0 + j)
    seeded at z = z0 + j (beta is asymptotic to the identity).
    """
    z0, w0 = complex(target[0]), complex(target[1])
    if spec.kind != KIND_V:
        spec = spec.with_kind(KIND_V)
    if spec.petal.n >= 1 and w0 == 0:
        raise NotInDomainError("w = 0 is excluded when n >= 1")
    ws = FiberWorkspace(F, spec, w0, max_steps=1 << 14, tol=math.inf)
    theta = spec.theta
    rw = ws.radius_w
    base = ws.base_point

    def _inside(zz, margin=1.05):
        return abs(zz) > margin * rw and abs(cmath.phase(zz)) < 0.92 * theta

    for j in range(j_max + 1):
        t = z0 + j
        # beta(z) = z - p + O(log z), so preimages of t live near t + p
        if not _inside(t + base, margin=1.10):
            continue
        z = t + base
        ok = False
        for _ in range(newton_iters):
            bz, _err = ws.beta(z, check=False)
            res = bz - t
            if abs(res) < tol:
                ok = True
                break
            h = 1e-5 * max(1.0, abs(z))
            bzh, _ = ws.beta(z + h, check=False)
            deriv = (bzh - bz) / h
            if deriv == 0:
                break
            step = -res / deriv
            scale = 1.0
            while scale > 1e-3 and not _inside(z + scale * step):
                scale *= 0.5
            if scale <= 1e-3:
                break
            z = z + scale * step
        if ok and ws.in_fiber_domain(z):
            bz, _ = ws.beta(z, check=False)
            return ProbeResult(j=j, z=z, residual=abs(bz - t))
    raise ExhaustedSearchError(f"no preimage found for {target!r} within j <= {j_max}")


# ---------------------------------------------------------------------------
# sampling and coverage
# ---------------------------------------------------------------------------

def sample_petal_points(spec: DomainSpec, rng: np.random.Generator, count: int,
                        margin: float = 1e-9) -> np.ndarray:
    """Random points of U_k, parametrized along the fibration x^m y^n = s.

    s is drawn in the k-th sector and the fiber coordinate on the
    gamma-annulus it allows; every returned point passes the strict
    membership predicate.
    """
    if spec.kind != KIND_U:
        spec = spec.with_kind(KIND_U)
    pp = spec.petal
    out = np.empty((count, 2), dtype=complex)
    got = 0
    smax = spec.epsilon ** (1.0 / pp.d)
    while got < count:
        rs = smax * (margin + (1.0 - 2 * margin) * rng.random())
        dev = (spec.theta / pp.d) * (1.0 - margin) * (2 * rng.random() - 1.0)
        ang = 2.0 * math.pi * pp.k / pp.d + dev
        L = math.log(rs)
        if pp.n == 0:
            # fiber {x fixed = s^(1/m) on the petal, y on a disc}
            x = cmath.exp((L + 1j * ang) / pp.m)
            ymax = rs**pp.gamma
            y = ymax * math.sqrt(rng.random()) * cmath.exp(2j * math.pi * rng.random())
            if y == 0:
                continue
        else:
            # log-coordinates: x = s^(-d a) e^(-n u), y = s^(-d b) e^(m u)
            da, db = pp.d * pp.a, pp.d * pp.b
            lo = (-da.real * L + da.imag * ang - pp.gamma * L) / pp.n
            hi = (pp.gamma * L + db.real * L - db.imag * ang) / pp.m
            if lo > hi:
                continue
            reu = lo + (hi - lo) * rng.random()
            imu = math.pi * (2 * rng.random() - 1.0)
            u = complex(reu, imu)
            base = L + 1j * ang
            x = cmath.exp(-da * base - pp.n * u)
            y = cmath.exp(-db * base + pp.m * u)
        if domain_membership((x, y), spec):
            out[got, 0] = x
            out[got, 1] = y
            got += 1
    return out


@dataclass
class CoverageReport:
    total: int
    fixed: int
    covered: int
    uncovered: int
    counts: Dict[str, int]
    uncovered_examples: List[Tuple[complex, complex]]
    params: Dict[str, float]

    @property
    def ok(self) -> bool:
        return self.uncovered == 0


def petal_cover_check(F, petal: PetalParams, epsilon: float, theta: float,
                      delta_prime: float, samples: int, rng: np.random.Generator,
                      membership_theta: Optional[float] = None,
                      max_examples: int = 32) -> CoverageReport:
    """Sample the covered neighborhood and classify every point into
    some extended petal (attracting or repelling) or report it uncovered.

    The sampled region is {|x^m y^n|^d < epsilon sin(theta), bounds on
    |x|, |y|}: epsilon*sin(theta) is the inradius of the union of the
    2d extended sectors, so membership of every sample is the honest
    claim.  Passing membership_theta < theta shrinks the sectors only
    (negative control).
    """
    m, n, d = petal.powers
    th_mem = theta if membership_theta is None else membership_theta
    seps = epsilon * math.sin(theta)
    counts: Dict[str, int] = {}
    uncovered_pts: List[Tuple[complex, complex]] = []
    fixed = covered = uncovered = 0

    specs = []
    for k in range(d):
        pk = petal.with_k(k)
        base = DomainSpec(petal=pk, epsilon=epsilon, theta=th_mem,
                          delta=delta_prime, delta_prime=delta_prime, kind=KIND_D_EXT)
        specs.append((f"D~+[{k}]", base))
        specs.append((f"D~-[{k}]", base.with_kind(KIND_D_EXT_REP)))
    for name, _ in specs:
        counts[name] = 0

    batch = max(1024, samples)
    total = 0
    if n == 0:
        xrad = seps ** (1.0 / (d * m))
    else:
        xrad = delta_prime
    while total < samples:
        take = min(batch, samples - total)
        # oversample, then reject outside the |s|^d bound
        xs = xrad * np.sqrt(rng.random(2 * take)) * np.exp(
            2j * np.pi * rng.random(2 * take))
        ys = delta_prime * np.sqrt(rng.random(2 * take)) * np.exp(
            2j * np.pi * rng.random(2 * take))
        s = xs**m * ys**n
        keep = np.abs(s) ** d < seps * (1.0 - 1e-12)
        xs, ys = xs[keep][:take], ys[keep][:take]
        if xs.size == 0:
            continue
        is_fixed = (xs == 0) | ((ys == 0) if n >= 1 else np.zeros(xs.shape, bool))
        assigned = np.zeros(xs.shape, dtype=bool)
        for name, sp in specs:
            mem = domain_membership_arrays(xs, ys, sp) & ~assigned & ~is_fixed
            counts[name] += int(np.count_nonzero(mem))
            assigned |= mem
        fixed += int(np.count_nonzero(is_fixed))
        covered += int(np.count_nonzero(assigned))
        bad = ~assigned & ~is_fixed
        uncovered += int(np.count_nonzero(bad))
        for i in np.flatnonzero(bad)[: max(0, max_examples - len(uncovered_pts))]:
            uncovered_pts.append((complex(xs[i]), complex(ys[i])))
        total += int(xs.size)
    params = {"epsilon": epsilon, "theta": theta, "membership_theta": th_mem,
              "delta_prime": delta_prime, "gamma": petal.gamma,
              "p": petal.p, "q": petal.q, "d": d, "m": m, "n": n}
    return CoverageReport(total=total, fixed=fixed, covered=covered,
                          uncovered=uncovered, counts=counts,
                          uncovered_examples=uncovered_pts, params=params)


# ---------------------------------------------------------------------------
# escape analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EscapeBox:
    """The neighborhood used by the saddle-behavior analysis."""

    epsilon: float
    delta: float


@dataclass(frozen=True)
class EscapeVerdict:
    kind: str  # "escaped" | "bounded" | "curve"
    j: Optional[int] = None
    curve_index: Optional[int] = None
    on_fixed_set: bool = False

    @property
    def escaped(self) -> bool:
        return self.kind == "escaped"


def _sig_powers(sig: FormSignature) -> Tuple[int, int, int]:
    if sig.form == FORM_CORNER:
        d = math.gcd(sig.M, sig.N)
        return sig.M // d, sig.N // d, d
    return 1, 0, sig.M


def escape_hypotheses_hold(sig: FormSignature) -> bool:
    """Theorem-B side (strict reversed inequalities) or the resonant family."""
    if sig.form == FORM_OTHER:
        return False
    if sig.resonant:
        return True
    return sig.satisfies_repelling_condition


def _escape_membership(xs, ys, sig: FormSignature, box: EscapeBox):
    if sig.form == FORM_CORNER:
        m, n, _ = _sig_powers(sig)
        s = xs**m * ys**n
        return (np.abs(s) < box.epsilon) & (np.abs(xs) < box.delta) & (np.abs(ys) < box.delta)
    return (np.abs(xs) < box.epsilon) & (np.abs(ys) < box.delta)


def escape_analysis(F, sig: FormSignature, box: EscapeBox, start,
                    max_steps: int = 200_000, curves=None,
                    curve_tol: float = 1e-6) -> EscapeVerdict:
    """Classify the forward orbit: escape from the box, stay bounded, or
    (noncorner germs) converge to a computed parabolic curve.

    Requires the saddle-side hypotheses (or the resonant flow family);
    the attracting case has no escape dichotomy and is rejected.
    """
    if not escape_hypotheses_hold(sig):
        raise HypothesisNotSatisfiedError(
            "escape analysis needs the reversed strict inequalities or the resonant family")
    x0, y0 = complex(start[0]), complex(start[1])
    on_fixed = (x0 == 0) or (sig.form == FORM_CORNER and y0 == 0)
    if on_fixed:
        return EscapeVerdict(kind="bounded", on_fixed_set=True)
    if not bool(_escape_membership(np.array([x0]), np.array([y0]), sig, box)[0]):
        return EscapeVerdict(kind="escaped", j=0)
    radius = getattr(F, "validity_radius", 1.0)
    guard_radius = max(radius, 4.0 * box.delta)
    stream = _OrbitStream(F, (x0, y0), max_steps, guard_radius)
    hits = 0
    curve_hit: Optional[int] = None
    while True:
        lo = stream.n
        stream.extend(4096)
        hi = stream.n
        if hi > lo:
            xs = stream.xs[lo + 1 : hi + 1]
            ys = stream.ys[lo + 1 : hi + 1]
            mem = _escape_membership(xs, ys, sig, box)
            bad = np.flatnonzero(~mem)
            if bad.size:
                return EscapeVerdict(kind="escaped", j=lo + 1 + int(bad[0]))
            if curves:
                curve_hit = None
                for k, curve in curves.items():
                    dist = curve.graph_distance_arrays(xs, ys)
                    close = np.isfinite(dist) & (dist < curve_tol)
                    if np.count_nonzero(close) == xs.size and xs.size > 0:
                        curve_hit = k
                        hits += 1
                        if hits >= 3:
                            return EscapeVerdict(kind="curve", curve_index=k)
                        break
                else:
                    hits = 0
        if stream.finished:
            break
    if stream.code in (kernels.EXIT_LEFT_BALL, kernels.EXIT_NONFINITE):
        # left the validity ball without leaving the box first: treat as escape
        return EscapeVerdict(kind="escaped", j=stream.n)
    if curve_hit is not None:
        # the orbit ended its budget glued to the sampled graph
        return EscapeVerdict(kind="curve", curve_index=curve_hit)
    return EscapeVerdict(kind="bounded")


def calibrate_escape_box(F, sig: FormSignature, rng: np.random.Generator,
                         delta0: float = 0.3, samples: int = 200,
                         shrink: float = 0.75, max_rounds: int = 24) -> EscapeBox:
    """Largest box (on a shrinking ladder) where the monotone growth of
    the expanding coordinate holds on a calibration sample."""
    if sig.form == FORM_CORNER:
        denom = sig.a * sig.M + sig.b * sig.N
        grow_b = (sig.b / denom).real < 0 if abs(denom) > 0 else False
        nu = abs((sig.b / denom).real if grow_b else (sig.a / denom).real) / 2.0
    else:
        grow_b = True
        nu = abs((sig.b / sig.a).real) / 2.0
    m, n, d = _sig_powers(sig)
    delta = delta0
    for _ in range(max_rounds):
        eps = delta ** (m + n)
        box = EscapeBox(epsilon=eps, delta=delta)
        xs = delta * np.sqrt(rng.random(samples)) * np.exp(2j * np.pi * rng.random(samples))
        ys = delta * np.sqrt(rng.random(samples)) * np.exp(2j * np.pi * rng.random(samples))
        mem = _escape_membership(xs, ys, sig, box)
        # the growth estimate is claimed along orbits whose (x^m y^n)^d has
        # settled near R^+, so calibrate on that sector only
        s = xs**m * ys**n
        sector = np.abs(np.angle(np.where(s == 0, 1.0, s**d))) <= math.pi / 4
        mem &= sector & (s != 0)
        xs, ys = xs[mem], ys[mem]
        ok = True
        for x, y in zip(xs, ys):
            x1, y1 = F.apply(x, y)
            sd = abs(x**m * y**n) ** d
            growth = 1.0 + nu * sd
            lhs, rhs = (abs(y1), abs(y) * growth) if grow_b else (abs(x1), abs(x) * growth)
            if lhs < rhs * (1.0 - 1e-12):
                ok = False
                break
        if ok and xs.size:
            return box
        delta *= shrink
    raise NoConvergenceError("calibration ladder exhausted without a valid box")
