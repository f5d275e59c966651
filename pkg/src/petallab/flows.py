"""Closed-form flows of the model fields x^M y^N (a x d/dx + b y d/dy).

These are exact oracles for the dynamics engine: a truncation of the
time-1 flow is a corner-form germ whose orbits can be cross-checked
against the closed formula at integer times.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple

from .bipoly import BiPoly
from .errors import BranchCutError
from .gaussrat import GaussianRational
from .germs import DEFAULT_ORDER, PolyMapGerm

_RESONANT_TOL = 1e-14


def closed_form_flow(M: int, N: int, a: complex, b: complex,
                     point: Tuple[complex, complex], t) -> Tuple[complex, complex]:
    """Exact time-t flow through ``point``.

    Away from resonance (aM + bN != 0) the flow is
    (x [1 - (aM+bN) x^M y^N t]^(-a/(aM+bN)), y [...]^(-b/(aM+bN)));
    at resonance it degenerates to (x e^(a x^M y^N t), y e^(b x^M y^N t)).
    """
    x, y = complex(point[0]), complex(point[1])
    a, b = complex(a), complex(b)
    s = x**M * y**N
    denom = a * M + b * N
    if abs(denom) <= _RESONANT_TOL * (abs(a) * M + abs(b) * N + 1.0):
        e = s * t
        return x * cmath.exp(a * e), y * cmath.exp(b * e)
    base = 1.0 - denom * s * t
    if base == 0 or (base.imag == 0.0 and base.real < 0.0):
        raise BranchCutError(f"flow base 1-(aM+bN)x^M y^N t = {base!r} lies on the slit")
    lg = cmath.log(base)
    return x * cmath.exp(-(a / denom) * lg), y * cmath.exp(-(b / denom) * lg)


@dataclass(frozen=True)
class FlowMap:
    """The time-1 flow as an iterable map (an exact, non-polynomial germ)."""

    M: int
    N: int
    a: complex
    b: complex
    validity_radius: float = 1.0

    def apply(self, x: complex, y: complex) -> Tuple[complex, complex]:
        return closed_form_flow(self.M, self.N, self.a, self.b, (x, y), 1.0)

    def at_time(self, point, t):
        return closed_form_flow(self.M, self.N, self.a, self.b, point, t)

    @property
    def resonant(self) -> bool:
        denom = self.a * self.M + self.b * self.N
        return abs(denom) <= _RESONANT_TOL * (abs(self.a) * self.M + abs(self.b) * self.N + 1.0)


def _series_coefficients(coef, denom, kmax, exact):
    """c_k of (1 - denom*s)^(-coef/denom), or of e^(coef*s) at resonance."""
    if exact:
        one = GaussianRational(1)
        coef = GaussianRational.coerce(coef)
        denom = GaussianRational.coerce(denom)
    else:
        one = 1.0 + 0j
        coef = complex(coef)
        denom = complex(denom)
    out = [one]
    resonant = (denom.is_zero if exact else abs(denom) == 0.0)
    if resonant:
        for k in range(kmax):
            div = GaussianRational(Fraction(1, k + 1)) if exact else 1.0 / (k + 1)
            out.append(out[-1] * coef * div)
        return out
    tilde = coef / denom
    for k in range(kmax):
        div = GaussianRational(Fraction(1, k + 1)) if exact else 1.0 / (k + 1)
        out.append(out[-1] * denom * (tilde + k) * div)
    return out


def truncated_flow_germ(M: int, N: int, a, b, order: int = DEFAULT_ORDER,
                        exact: bool = False, validity_radius: float = 1.0) -> PolyMapGerm:
    """Jet of the time-1 flow of x^M y^N (a x d/dx + b y d/dy).

    With exact=True the coefficients are Gaussian rationals (a, b must
    be rational-coercible), which feeds the resolution machinery.
    """
    if M < 0 or N < 0 or M + N < 1:
        raise ValueError("need M, N >= 0 with M + N >= 1")
    kmax = max(0, (order - 1) // (M + N))
    if exact:
        denom = GaussianRational.coerce(a) * M + GaussianRational.coerce(b) * N
    else:
        denom = complex(a) * M + complex(b) * N
        if abs(denom) <= _RESONANT_TOL * (abs(complex(a)) * M + abs(complex(b)) * N + 1.0):
            denom = 0.0 + 0j
    ck_x = _series_coefficients(a, denom, kmax, exact)
    ck_y = _series_coefficients(b, denom, kmax, exact)
    cx = {(1, 0): ck_x[0]}
    cy = {(0, 1): ck_y[0]}
    for k in range(1, kmax + 1):
        if 1 + k * (M + N) > order:
            break
        if ck_x[k]:
            cx[(1 + k * M, k * N)] = ck_x[k]
        if ck_y[k]:
            cy[(k * M, 1 + k * N)] = ck_y[k]
    return PolyMapGerm(BiPoly(cx), BiPoly(cy), order, validity_radius)
