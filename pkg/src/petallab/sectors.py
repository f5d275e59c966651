"""Branch-correct sector arithmetic and membership predicates.

All fractional powers use the principal branch on C minus (-inf, 0];
points whose relevant product lands on the slit raise BranchCutError
instead of being perturbed.  Petal k is handled by rotating into the
principal petal and rotating back, which keeps every function
single-valued and continuous on each component.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from math import gcd
from typing import Optional, Tuple

import numpy as np

from .errors import BranchCutError

TWO_PI = 2.0 * math.pi

ATTRACTING_CORE = "attracting-core"
ATTRACTING_EXTENDED = "attracting-extended"
REPELLING_CORE = "repelling-core"
REPELLING_EXTENDED = "repelling-extended"
_SECTOR_KINDS = (
    ATTRACTING_CORE,
    ATTRACTING_EXTENDED,
    REPELLING_CORE,
    REPELLING_EXTENDED,
)


def principal_log(z: complex) -> complex:
    """Principal logarithm; rejects 0 and the slit (-inf, 0]."""
    z = complex(z)
    if z == 0 or (z.imag == 0.0 and z.real < 0.0):
        raise BranchCutError(f"log undefined on the slit at z={z!r}")
    return cmath.log(z)


def principal_power(z: complex, lam: complex) -> complex:
    """exp(lam * Log z) with Log the principal branch on the slit plane."""
    return cmath.exp(complex(lam) * principal_log(z))


def bezout_exponents(m: int, n: int) -> Tuple[int, int]:
    """Minimal nonnegative (p, q) with q*m - p*n = 1.

    The pair is the deterministic representative used everywhere a
    branch of x^(db) y^(-da) is built; for n = 0 it is (0, 1).
    """
    if m < 1 or n < 0:
        raise ValueError("require m >= 1 and n >= 0")
    if gcd(m, n) != 1:
        raise ValueError(f"m={m} and n={n} are not coprime")
    if n == 0:
        return (0, 1)
    # extended Euclid: u*m + v*n = 1, then (p, q) = (-v + t*m, u + t*n)
    old_r, r = m, n
    old_u, u = 1, 0
    old_v, v = 0, 1
    while r:
        qt = old_r // r
        old_r, r = r, old_r - qt * r
        old_u, u = u, old_u - qt * u
        old_v, v = v, old_v - qt * v
    uu, vv = old_u, old_v
    t = 0
    while uu + t * n < 0 or -vv + t * m < 0:
        t += 1
    while uu + (t - 1) * n >= 0 and -vv + (t - 1) * m >= 0:
        t -= 1
    p, q = -vv + t * m, uu + t * n
    assert q * m - p * n == 1
    return (p, q)


@dataclass(frozen=True)
class SectorSpec:
    """One component of the d-fold sector family in the z = x^m y^n plane."""

    epsilon: float
    theta: float
    d: int
    kind: str = ATTRACTING_CORE
    component_index: int = 0

    def __post_init__(self):
        if not (0.0 < self.theta < math.pi / 2):
            raise ValueError("theta must lie in (0, pi/2)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.d < 1:
            raise ValueError("d must be a positive integer")
        if self.kind not in _SECTOR_KINDS:
            raise ValueError(f"unknown sector kind {self.kind!r}")
        if not (0 <= self.component_index < self.d):
            raise ValueError("component_index out of range")

    @property
    def repelling(self) -> bool:
        return self.kind in (REPELLING_CORE, REPELLING_EXTENDED)

    @property
    def extended(self) -> bool:
        return self.kind in (ATTRACTING_EXTENDED, REPELLING_EXTENDED)

    @property
    def bisector_angle(self) -> float:
        k = self.component_index
        if self.repelling:
            return (2 * k + 1) * math.pi / self.d
        return TWO_PI * k / self.d


def _sector_member_arrays(z, spec: SectorSpec):
    """Vectorized membership; z may be a scalar or ndarray."""
    z = np.asarray(z, dtype=complex)
    w = z * np.exp(-1j * spec.bisector_angle)
    r = np.abs(w)
    out = np.zeros(z.shape, dtype=bool)
    ok = r > 0.0
    argw = np.where(ok, np.angle(np.where(ok, w, 1.0)), 0.0)
    rd = r**spec.d
    eps, th, d = spec.epsilon, spec.theta, spec.d
    core = ok & (rd < eps) & (np.abs(argw) < th / d)
    if not spec.extended:
        return core
    half_open = (math.pi / 2 + th) / d
    in_wedge = ok & (np.abs(argw) < half_open)
    zeta = rd * np.exp(1j * d * argw)
    c1 = 0.5 * eps * cmath.exp(-1j * th)
    c2 = 0.5 * eps * cmath.exp(1j * th)
    discs = (np.abs(zeta - c1) < 0.5 * eps) | (np.abs(zeta - c2) < 0.5 * eps)
    out = core | (in_wedge & discs)
    return out


def sector_membership(z: complex, spec: SectorSpec) -> bool:
    """True iff z lies in the component_index-th component of the named set.

    z = 0 is excluded for every kind.
    """
    return bool(_sector_member_arrays(z, spec))


@dataclass(frozen=True)
class PetalParams:
    """Integer and complex data derived from a normalized germ.

    The normalization is a*M + b*N = -1 with Re a < 0 and Re b < 0; the
    Bezout pair (p, q) and gamma are choices the underlying theory
    leaves open, so they are stored here and echoed by every consumer
    to keep runs comparable.
    """

    M: int
    N: int
    a: complex
    b: complex
    d: int
    m: int
    n: int
    p: int
    q: int
    lam: complex
    gamma: float
    k: int = 0

    ABTOL = 1e-9

    def __post_init__(self):
        if self.M < 1 or self.N < 0:
            raise ValueError("require M >= 1 and N >= 0")
        d = self.M if self.N == 0 else gcd(self.M, self.N)
        if d != self.d or self.m != self.M // d or self.n != self.N // d:
            raise ValueError("inconsistent (d, m, n) for (M, N)")
        if abs(self.a * self.M + self.b * self.N + 1.0) > self.ABTOL:
            raise ValueError("germ is not normalized: a*M + b*N must be -1")
        if self.a.real >= 0 or self.b.real >= 0:
            raise ValueError("normalized petal data needs Re a < 0 and Re b < 0")
        if self.q * self.m - self.p * self.n != 1:
            raise ValueError("Bezout pair must satisfy q*m - p*n = 1")
        if not (0 <= self.k < self.d):
            raise ValueError("petal index k out of range")
        if not (0.0 < self.gamma < self.d):
            raise ValueError("gamma must lie in (0, d)")
        if self.n == 0 and self.gamma >= 1.0:
            raise ValueError("gamma must be < 1 when n = 0")
        if self.a.real + self.gamma / self.d >= 0:
            raise ValueError("gamma too large: Re a + gamma/d must be < 0")
        if self.b.real + self.gamma / self.d >= 0:
            raise ValueError("gamma too large: Re b + gamma/d must be < 0")
        if abs(self.lam - self.d * (self.a * self.p + self.b * self.q)) > self.ABTOL:
            raise ValueError("lambda must equal d*(a*p + b*q)")

    @classmethod
    def from_normalized(
        cls,
        M: int,
        N: int,
        a: complex,
        b: complex,
        k: int = 0,
        gamma: Optional[float] = None,
    ) -> "PetalParams":
        d = M if N == 0 else gcd(M, N)
        m, n = M // d, N // d
        p, q = bezout_exponents(m, n)
        if gamma is None:
            gamma = default_gamma(a, b, d, n)
        lam = d * (a * p + b * q)
        return cls(M=M, N=N, a=complex(a), b=complex(b), d=d, m=m, n=n,
                   p=p, q=q, lam=lam, gamma=gamma, k=k)

    def with_k(self, k: int) -> "PetalParams":
        return PetalParams(M=self.M, N=self.N, a=self.a, b=self.b, d=self.d,
                           m=self.m, n=self.n, p=self.p, q=self.q,
                           lam=self.lam, gamma=self.gamma, k=k)

    @property
    def powers(self) -> Tuple[int, int, int]:
        return (self.m, self.n, self.d)

    @property
    def eps_x(self) -> int:
        """min(1, n): makes the x-constraints vacuous when n = 0."""
        return min(1, self.n)

    def sector(self, epsilon: float, theta: float, kind: str = ATTRACTING_CORE) -> SectorSpec:
        return SectorSpec(epsilon=epsilon, theta=theta, d=self.d,
                          kind=kind, component_index=self.k)


def default_gamma(a: complex, b: complex, d: int, n: int) -> float:
    """Centered choice gamma = min(-Re a, -Re b) * d / 2, clamped to (0, d).

    The margin requirement is only the pair of strict inequalities
    Re a + gamma/d < 0 and Re b + gamma/d < 0; halving the available
    room maximizes the contraction margin of the petal estimates.
    """
    g = min(-a.real, -b.real) * d / 2.0
    cap = float(d) if n >= 1 else 1.0
    if g >= cap:
        g = 0.5 * cap
    return g


KIND_D = "D"
KIND_U = "U"
KIND_D_EXT = "D-ext"
KIND_D_EXT_REP = "D-ext-rep"
KIND_V = "V"
_DOMAIN_KINDS = (KIND_D, KIND_U, KIND_D_EXT, KIND_D_EXT_REP, KIND_V)


@dataclass(frozen=True)
class DomainSpec:
    """Parameters selecting one of the named invariant domains.

    For kind V the membership argument is a chart point (z, w); for all
    other kinds it is an ambient point (x, y).
    """

    petal: PetalParams
    epsilon: float
    theta: float
    delta: float = 0.1
    delta_prime: Optional[float] = None
    r: float = 0.5
    kind: str = KIND_U

    def __post_init__(self):
        if self.kind not in _DOMAIN_KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.epsilon <= 0 or self.delta <= 0:
            raise ValueError("epsilon and delta must be positive")
        if not (0.0 < self.theta < math.pi / 2):
            raise ValueError("theta must lie in (0, pi/2)")
        if self.delta_prime is None:
            object.__setattr__(self, "delta_prime", self.delta)
        if self.delta_prime > self.delta or self.delta_prime <= 0:
            raise ValueError("require 0 < delta_prime <= delta")
        if not (0.0 < self.r < 1.0):
            raise ValueError("require 0 < r < 1")

    def with_kind(self, kind: str) -> "DomainSpec":
        return DomainSpec(petal=self.petal, epsilon=self.epsilon, theta=self.theta,
                          delta=self.delta, delta_prime=self.delta_prime,
                          r=self.r, kind=kind)

    def with_petal(self, petal: PetalParams) -> "DomainSpec":
        return DomainSpec(petal=petal, epsilon=self.epsilon, theta=self.theta,
                          delta=self.delta, delta_prime=self.delta_prime,
                          r=self.r, kind=self.kind)

    def sector(self, kind: str) -> SectorSpec:
        return self.petal.sector(self.epsilon, self.theta, kind)

    # exponents of |z| bounding |w| in the chart domain V
    @property
    def v_upper_exponent(self) -> float:
        pp = self.petal
        return -pp.b.real / pp.m - pp.gamma / (pp.d * pp.m)

    @property
    def v_lower_exponent(self) -> float:
        pp = self.petal
        if pp.n == 0:
            return 0.0
        return pp.a.real / pp.n + pp.gamma / (pp.d * pp.n)

    def fiber_radius(self, w: complex) -> float:
        """R_w: the fiber V_w is {|z| > R_w, |arg z| < theta}."""
        pp = self.petal
        r_out = (abs(w) / self.r) ** (1.0 / self.v_upper_exponent)
        candidates = [1.0 / self.epsilon, r_out]
        if pp.n >= 1:
            candidates.append((self.r * abs(w)) ** (1.0 / self.v_lower_exponent))
        return max(candidates)


def domain_membership_arrays(first, second, spec: DomainSpec):
    """Vectorized membership over paired coordinate arrays.

    For kind V the pair is (z, w); otherwise it is (x, y).  Inequalities
    follow the defining formulas exactly: strict on moduli and argument,
    non-strict on the gamma bounds of U.
    """
    a1 = np.asarray(first, dtype=complex)
    a2 = np.asarray(second, dtype=complex)
    pp = spec.petal
    if spec.kind == KIND_V:
        z, w = a1, a2
        nz = z != 0
        argz = np.where(nz, np.angle(np.where(nz, z, 1.0)), 0.0)
        rz = np.abs(z)
        ok = nz & (rz > 1.0 / spec.epsilon) & (np.abs(argz) < spec.theta)
        ok &= np.abs(w) < spec.r * rz**spec.v_upper_exponent
        if pp.n >= 1:
            ok &= np.abs(w) > rz**spec.v_lower_exponent / spec.r
        return ok

    x, y = a1, a2
    s = x**pp.m * y**pp.n
    ns = s != 0
    rs = np.abs(s)
    if spec.kind == KIND_U:
        rot = np.exp(-1j * (TWO_PI * pp.k / pp.d))
        sarg = np.where(ns, np.angle(np.where(ns, s, 1.0) * rot), 0.0)
        ok = ns & (rs < spec.epsilon ** (1.0 / pp.d)) & (np.abs(sarg) < spec.theta / pp.d)
        g = rs**pp.gamma
        if pp.eps_x:
            ok &= np.abs(x) <= g
        ok &= np.abs(y) <= g
        return ok
    if spec.kind == KIND_D:
        rot = np.exp(-1j * (TWO_PI * pp.k / pp.d))
        sarg = np.where(ns, np.angle(np.where(ns, s, 1.0) * rot), 0.0)
        ok = ns & (rs < spec.epsilon ** (1.0 / pp.d)) & (np.abs(sarg) < spec.theta / pp.d)
        if pp.eps_x:
            ok &= np.abs(x) < spec.delta
        ok &= np.abs(y) < spec.delta
        return ok
    if spec.kind in (KIND_D_EXT, KIND_D_EXT_REP):
        skind = ATTRACTING_EXTENDED if spec.kind == KIND_D_EXT else REPELLING_EXTENDED
        ok = _sector_member_arrays(s, spec.sector(skind))
        if pp.eps_x:
            ok &= np.abs(x) < spec.delta_prime
        ok &= np.abs(y) < spec.delta_prime
        return ok
    raise ValueError(f"unknown domain kind {spec.kind!r}")


def domain_membership(point: Tuple[complex, complex], spec: DomainSpec) -> bool:
    """Scalar membership; see domain_membership_arrays."""
    return bool(domain_membership_arrays(point[0], point[1], spec))


def _branch_phase(petal: PetalParams) -> complex:
    return TWO_PI * petal.k / petal.d


def branch_g(x: complex, y: complex, petal: PetalParams) -> complex:
    """The invariant-function seed g = x^p y^q (x^m y^n)^lam on petal k.

    The fractional power is taken after rotating x^m y^n into the
    principal petal, then rotated back, so g is continuous on the k-th
    component.  On the fixed set (y = 0, or x^m y^n on the slit after
    rotation) the branch is undefined.
    """
    x, y = complex(x), complex(y)
    if y == 0:
        raise BranchCutError("g undefined at y = 0")
    s = x**petal.m * y**petal.n
    phase = _branch_phase(petal)
    srot = s * cmath.exp(-1j * phase)
    val = principal_power(srot, petal.lam) * cmath.exp(1j * phase * petal.lam)
    return x**petal.p * y**petal.q * val


def branch_g_arrays(x, y, petal: PetalParams):
    """Vectorized branch_g; entries violating the branch cut become nan."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    s = x**petal.m * y**petal.n
    phase = _branch_phase(petal)
    srot = s * np.exp(-1j * phase)
    bad = (srot.real <= 0) & (srot.imag == 0)
    srot = np.where(bad, 1.0, srot)
    val = np.exp(petal.lam * np.log(srot)) * np.exp(1j * phase * petal.lam)
    out = x**petal.p * y**petal.q * val
    return np.where(bad, np.nan + 1j * np.nan, out)
