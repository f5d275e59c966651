import math

import numpy as np
import pytest

from petallab import dynamics as dyn
from petallab.errors import (
    HypothesisNotSatisfiedError,
    InsufficientDataError,
    NoConvergenceError,
    NotInDomainError,
)
from petallab.flows import FlowMap, truncated_flow_germ
from petallab.germs import classify_form, corner_germ, germ_from_coeff_maps
from petallab.sectors import DomainSpec, KIND_D, KIND_U, domain_membership


# ---------------------------------------------------------------------------
# iterate
# ---------------------------------------------------------------------------

def test_fixed_set_orbit_stationary(ref_germ, ref_petal):
    tr = dyn.iterate(ref_germ, (0.0, 0.07), max_steps=50, petal=ref_petal)
    assert tr.exit_reason == "max-steps"
    assert np.all(tr.xs == 0) and np.all(tr.ys == 0.07)


def test_orbit_attracted_with_unit_limit(ref_germ, ref_petal):
    tr = dyn.iterate(ref_germ, (0.05, 0.05), max_steps=4000, petal=ref_petal)
    n = tr.steps
    assert tr.exit_reason == "max-steps"
    assert abs(tr.z[n]) < abs(tr.z[0])
    est = dyn.attraction_diagnostic(tr)
    assert est.ok and abs(est.limit - 1.0) < 1e-2


def test_start_outside_validity_ball(ref_germ):
    tr = dyn.iterate(ref_germ, (5.0, 5.0), max_steps=50)
    assert tr.exit_reason == "left-validity-ball"
    assert tr.steps == 0


def test_domain_guard_exit(ref_germ, ref_petal):
    spec = DomainSpec(petal=ref_petal, epsilon=1e-2, theta=math.pi / 6,
                      delta=0.2, kind=KIND_D)
    # inside D but drifting: F^{-1}-side start will leave quickly;
    # instead take a point outside D from the start
    tr = dyn.iterate(ref_germ, (0.15, 0.15), max_steps=50, guard=spec)
    assert tr.exit_reason == "left-domain" and tr.steps == 0


def test_trace_recurrence_and_derived_bitwise(ref_germ, ref_petal):
    tr = dyn.iterate(ref_germ, (0.04, 0.03 + 0.01j), max_steps=300, petal=ref_petal)
    for j in (0, 13, 299):
        assert ref_germ.apply(tr.xs[j], tr.ys[j]) == (tr.xs[j + 1], tr.ys[j + 1])
    s2, z2 = tr.recompute_derived()
    assert np.array_equal(tr.s.view(np.uint64), s2.view(np.uint64))
    assert np.array_equal(tr.z.view(np.uint64), z2.view(np.uint64))


def test_membership_flags(ref_germ, ref_petal, ref_uspec):
    dspec = DomainSpec(petal=ref_petal, epsilon=1e-2, theta=math.pi / 6,
                       delta=0.2, kind=KIND_D)
    tr = dyn.iterate(ref_germ, (0.05, 0.05), max_steps=100, petal=ref_petal,
                     uspec=ref_uspec, dspec=dspec)
    assert tr.in_U is not None and tr.in_D is not None
    assert bool(tr.in_D[0]) == domain_membership((0.05, 0.05), dspec)


def test_iterate_flow_map_generic_path():
    fm = FlowMap(1, 1, -0.5, -0.5)
    tr = dyn.iterate(fm, (0.05, 0.05), max_steps=40, powers=(1, 1, 1))
    assert tr.steps == 40
    x40, y40 = fm.at_time((0.05, 0.05), 40)
    assert tr.xs[40] == pytest.approx(x40, rel=1e-12)


# ---------------------------------------------------------------------------
# attraction diagnostic
# ---------------------------------------------------------------------------

def test_attraction_one_dim_leau():
    # 1-D Leau germ embedded as (f(x), y) with f = x - x^2
    F = germ_from_coeff_maps({(1, 0): 1 + 0j, (2, 0): -1 + 0j}, {(0, 1): 1 + 0j})
    for x0 in (0.02, 0.05, 0.09):
        tr = dyn.iterate(F, (x0, 0.0), max_steps=5000, powers=(1, 0, 1))
        est = dyn.attraction_diagnostic(tr)
        assert est.ok and abs(est.limit - 1.0) < 1e-2


def test_attraction_fixed_set_flagged(ref_germ, ref_petal):
    tr = dyn.iterate(ref_germ, (0.0, 0.05), max_steps=200, petal=ref_petal)
    est = dyn.attraction_diagnostic(tr)
    assert not est.ok and "vanishes" in est.reason


def test_attraction_insufficient_data(ref_germ, ref_petal):
    tr = dyn.iterate(ref_germ, (0.05, 0.05), max_steps=30, petal=ref_petal)
    with pytest.raises(InsufficientDataError):
        dyn.attraction_diagnostic(tr)


# ---------------------------------------------------------------------------
# sampling and petal invariance
# ---------------------------------------------------------------------------

def test_sampled_points_lie_in_U(ref_uspec, rng):
    pts = dyn.sample_petal_points(ref_uspec, rng, 300)
    for x, y in pts:
        assert domain_membership((x, y), ref_uspec)


def test_petal_forward_invariance(ref_germ, ref_uspec, rng):
    pts = dyn.sample_petal_points(ref_uspec, rng, 500)
    for x, y in pts:
        assert domain_membership(ref_germ.apply(x, y), ref_uspec)


def test_d_monotone_contraction(ref_germ, ref_petal, rng):
    # |y_1| <= |y_0| and |x_1| <= |x_0| along orbits in D_k
    dspec = DomainSpec(petal=ref_petal, epsilon=1e-2, theta=math.pi / 6,
                       delta=0.05, kind=KIND_D)
    uspec = DomainSpec(petal=ref_petal, epsilon=1e-2, theta=math.pi / 6,
                       kind=KIND_U)
    pts = dyn.sample_petal_points(uspec, rng, 300)
    for x, y in pts:
        if not domain_membership((x, y), dspec):
            continue
        x1, y1 = ref_germ.apply(x, y)
        assert abs(y1) <= abs(y) + 1e-18
        assert abs(x1) <= abs(x) + 1e-18


def test_orbit_absorption_into_U(ref_germ, ref_petal, ref_uspec):
    # a D-tilde start is eventually absorbed into U_k
    dext = DomainSpec(petal=ref_petal, epsilon=1e-2, theta=math.pi / 6,
                      delta=0.02, delta_prime=0.02, kind="D-ext")
    start = (0.018, 0.018)
    assert domain_membership(start, dext)
    tr = dyn.iterate(ref_germ, start, max_steps=3000, petal=ref_petal,
                     uspec=ref_uspec)
    assert np.any(tr.in_U), "orbit never entered U_k"
    first = int(np.flatnonzero(tr.in_U)[0])
    assert np.all(tr.in_U[first:])


# ---------------------------------------------------------------------------
# invariant function
# ---------------------------------------------------------------------------

def test_psi_invariance(ref_germ, ref_uspec, rng):
    pts = dyn.sample_petal_points(ref_uspec, rng, 100)
    worst = 0.0
    for x, y in pts:
        v1 = dyn.invariant_function(ref_germ, ref_uspec, (x, y))
        v2 = dyn.invariant_function(ref_germ, ref_uspec, ref_germ.apply(x, y))
        worst = max(worst, abs(v1.psi - v2.psi))
        assert abs(v1.unit_factor - 1.0) < 0.5
    assert worst < 1e-10


def test_psi_on_exact_flow_is_g(ref_uspec, rng):
    # the exact flow preserves g, so u = 1 and the tail vanishes
    fm = FlowMap(1, 1, -0.5, -0.5)
    pts = dyn.sample_petal_points(ref_uspec, rng, 20)
    from petallab.sectors import branch_g

    for x, y in pts:
        iv = dyn.invariant_function(fm, ref_uspec, (x, y))
        assert abs(iv.unit_factor - 1.0) < 1e-13
        assert iv.tail_bound < 1e-12
        assert iv.psi == pytest.approx(branch_g(x, y, ref_uspec.petal), rel=1e-12)


def test_psi_requires_membership(ref_germ, ref_uspec):
    with pytest.raises(NotInDomainError):
        dyn.invariant_function(ref_germ, ref_uspec, (0.3, 0.3))


def test_psi_tail_model_rejection(ref_uspec):
    # an expanding perturbed germ: the factor deviations grow along the
    # orbit, so the geometric tail model must be rejected
    F = germ_from_coeff_maps(
        {(1, 0): 1 + 0j, (2, 1): 0.5 + 0j, (3, 1): 1.0 + 0j},
        {(0, 1): 1 + 0j, (1, 2): 0.5 + 0j}, 8)
    with pytest.raises(NoConvergenceError):
        dyn.invariant_function(F, ref_uspec, (0.009, 0.009), max_steps=2000)


# ---------------------------------------------------------------------------
# coverage
# ---------------------------------------------------------------------------

def test_cover_check_reference(ref_germ, ref_petal, rng):
    report = dyn.petal_cover_check(ref_germ, ref_petal, epsilon=1e-2,
                                   theta=math.pi / 6, delta_prime=0.05,
                                   samples=3000, rng=rng)
    assert report.total == 3000
    assert report.uncovered == 0
    assert report.covered + report.fixed == report.total
    assert sum(report.counts.values()) == report.covered
    assert report.params["gamma"] == ref_petal.gamma  # choices echoed


def test_cover_check_negative_control(ref_germ, ref_petal, rng):
    # delta' must be large enough that |s| = |x y| reaches past the
    # shrunken sectors' inradius eps*sin(theta/2), else nothing can miss
    report = dyn.petal_cover_check(ref_germ, ref_petal, epsilon=1e-2,
                                   theta=math.pi / 6, delta_prime=0.08,
                                   samples=3000, rng=rng,
                                   membership_theta=math.pi / 12)
    assert report.uncovered > 0
    assert len(report.uncovered_examples) > 0
    # and the full-opening membership covers the same samples
    rng2 = np.random.default_rng(5)
    full = dyn.petal_cover_check(ref_germ, ref_petal, epsilon=1e-2,
                                 theta=math.pi / 6, delta_prime=0.08,
                                 samples=3000, rng=rng2)
    assert full.uncovered == 0


def test_cover_check_fixed_points_classified(ref_germ, ref_petal, rng):
    report = dyn.petal_cover_check(ref_germ, ref_petal, epsilon=1e-2,
                                   theta=math.pi / 6, delta_prime=0.05,
                                   samples=500, rng=rng)
    # continuous sampling misses the axes; fixed-set classification is
    # exercised through the membership arrays directly
    from petallab.sectors import domain_membership_arrays

    spec = DomainSpec(petal=ref_petal, epsilon=1e-2, theta=math.pi / 6,
                      delta=0.05, delta_prime=0.05, kind="D-ext")
    assert not domain_membership_arrays(np.array([0.0 + 0j]),
                                        np.array([0.01 + 0j]), spec)[0]


# ---------------------------------------------------------------------------
# escape analysis
# ---------------------------------------------------------------------------

def test_escape_corner_saddle_side(rng):
    F = corner_germ(1, 1, -2.0, 1.0)
    sig = classify_form(F)
    assert sig.satisfies_repelling_condition
    box = dyn.EscapeBox(epsilon=0.05, delta=0.2)
    for _ in range(50):
        x = 0.1 * math.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random())
        y = 0.1 * math.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random())
        if x == 0 or y == 0 or abs(x * y) >= box.epsilon:
            continue
        verdict = dyn.escape_analysis(F, sig, box, (x, y))
        assert verdict.escaped and verdict.j is not None and verdict.j >= 1


def test_escape_fixed_set_start():
    F = corner_germ(1, 1, -2.0, 1.0)
    sig = classify_form(F)
    box = dyn.EscapeBox(epsilon=0.05, delta=0.2)
    verdict = dyn.escape_analysis(F, sig, box, (0.05, 0.0))
    assert verdict.kind == "bounded" and verdict.on_fixed_set


def test_escape_rejects_attracting(ref_germ):
    sig = classify_form(ref_germ)
    with pytest.raises(HypothesisNotSatisfiedError):
        dyn.escape_analysis(ref_germ, sig, dyn.EscapeBox(0.05, 0.2), (0.05, 0.05))


def test_resonant_oracle_modulus_preserved():
    # time-1 flow with a x y purely imaginary: |x_j| = |x| for all j
    fm = FlowMap(1, 1, 1.0, -1.0)
    sig = classify_form(truncated_flow_germ(1, 1, 1.0, -1.0, order=8))
    assert sig.resonant
    box = dyn.EscapeBox(epsilon=0.05, delta=0.2)
    verdict = dyn.escape_analysis(fm, sig, box, (0.1, 0.1j), max_steps=1000)
    assert verdict.kind == "bounded"
    x, y = 0.1 + 0j, 0.1j
    drift = 0.0
    for _ in range(1000):
        x, y = fm.apply(x, y)
        drift = max(drift, abs(abs(x) - 0.1), abs(abs(y) - 0.1))
    assert drift < 1e-12


def test_escape_calibration(rng):
    F = corner_germ(1, 1, -2.0, 1.0)
    sig = classify_form(F)
    box = dyn.calibrate_escape_box(F, sig, rng)
    assert 0 < box.epsilon and 0 < box.delta <= 0.3


# ---------------------------------------------------------------------------
# oracle equivalence
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("M,N,a,b", [(1, 1, -0.5, -0.5), (2, 1, -0.2, -0.6),
                                     (1, 0, -1.0, -0.5)])
def test_truncated_flow_matches_closed_form(M, N, a, b):
    F = truncated_flow_germ(M, N, a, b, order=10)
    d = math.gcd(M, N) if N else M
    powers = (M // d, N // d, d)
    start = (0.05, 0.04 + 0.01j)
    tr = dyn.iterate(F, start, max_steps=500, powers=powers)
    assert tr.steps == 500
    worst = 0.0
    for j in (1, 5, 50, 200, 500):
        fx, fy = FlowMap(M, N, a, b).at_time(start, j)
        scale = max(abs(fx), abs(fy))
        worst = max(worst, abs(tr.xs[j] - fx) / scale, abs(tr.ys[j] - fy) / scale)
    assert worst < 1e-9
