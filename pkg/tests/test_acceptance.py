"""Acceptance suite: every criterion at its stated tolerance, one
pass/fail line per criterion, with the stated runtime budgets."""

import cmath
import math
import time

import numpy as np
import pytest

from petallab import dynamics as dyn
from petallab.curve import conjugate_by_curve, graph_transform_curve
from petallab.flows import FlowMap, truncated_flow_germ
from petallab.gaussrat import GaussianRational as GR
from petallab.germs import (
    classify_form,
    corner_germ,
    germ_from_coeff_maps,
    normalize,
)
from petallab.resolution import (
    CLASS_NONDEGENERATE,
    CLASS_NONSINGULAR,
    ExactVectorField,
    check_chart_compatibility,
    classify_biholo_points,
    resolve,
)
from petallab.sectors import (
    ATTRACTING_EXTENDED,
    DomainSpec,
    KIND_U,
    KIND_V,
    SectorSpec,
    domain_membership,
)


def _report(num, name, ok, detail, budget, elapsed):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num} [{name}]: {status} ({detail}; "
          f"{elapsed:.2f}s of {budget:.0f}s budget)")


def test_criterion_1_leau_fatou_sanity():
    t0 = time.perf_counter()
    F = germ_from_coeff_maps({(1, 0): 1 + 0j, (2, 0): -1 + 0j}, {(0, 1): 1 + 0j})
    tr = dyn.iterate(F, (0.05, 0.0), max_steps=10_000, powers=(1, 0, 1))
    est = dyn.attraction_diagnostic(tr)
    dev = abs(est.limit - 1.0)
    elapsed = time.perf_counter() - t0
    ok = est.ok and dev < 1e-2 and elapsed < 1.0
    _report(1, "Leau-Fatou 1-D sanity", ok, f"|lim j f^j - 1| = {dev:.2e}",
            1.0, elapsed)
    assert est.ok and dev < 1e-2
    assert elapsed < 1.0


def test_criterion_2_petal_invariance():
    t0 = time.perf_counter()
    F = corner_germ(1, 1, -0.5, -0.5)
    _, _, petal = normalize(F)
    assert petal.gamma == pytest.approx(0.25)
    spec = DomainSpec(petal=petal, epsilon=1e-2, theta=math.pi / 6, kind=KIND_U)
    rng = np.random.default_rng(2)
    pts = dyn.sample_petal_points(spec, rng, 10_000)
    images = np.array([F.apply(x, y) for x, y in pts])
    from petallab.sectors import domain_membership_arrays

    ok_mask = domain_membership_arrays(images[:, 0], images[:, 1], spec)
    violations = int(np.count_nonzero(~ok_mask))
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 5.0
    _report(2, "petal invariance F(U_0) in U_0", ok,
            f"{violations} violations in 10^4 samples", 5.0, elapsed)
    assert violations == 0
    assert elapsed < 5.0


def test_criterion_3_invariant_function():
    t0 = time.perf_counter()
    F = corner_germ(1, 1, -0.5, -0.5)
    _, _, petal = normalize(F)
    spec = DomainSpec(petal=petal, epsilon=1e-2, theta=math.pi / 6, kind=KIND_U)
    rng = np.random.default_rng(3)
    pts = dyn.sample_petal_points(spec, rng, 100)
    worst = 0.0
    worst_u = 0.0
    for x, y in pts:
        v1 = dyn.invariant_function(F, spec, (x, y))
        v2 = dyn.invariant_function(F, spec, F.apply(x, y))
        worst = max(worst, abs(v1.psi - v2.psi))
        worst_u = max(worst_u, abs(v1.unit_factor - 1.0))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and worst_u < 0.5 and elapsed < 10.0
    _report(3, "invariant function psi", ok,
            f"max |psi(Fp)-psi(p)| = {worst:.2e}, max |u-1| = {worst_u:.2e}",
            10.0, elapsed)
    assert worst < 1e-10
    assert worst_u < 0.5
    assert elapsed < 10.0


def test_criterion_4_fatou_conjugacy():
    t0 = time.perf_counter()
    F = corner_germ(1, 1, -0.5, -0.5)
    _, _, petal = normalize(F)
    spec = DomainSpec(petal=petal, epsilon=1 / 32, theta=math.pi / 6, r=0.7,
                      kind=KIND_V)
    rng = np.random.default_rng(4)
    worst_fiber = 0.0
    worst_chart = 0.0
    count = 0
    while count < 50:
        z = rng.uniform(40, 250) * cmath.exp(
            1j * rng.uniform(-0.8, 0.8) * spec.theta)
        hi = spec.r * abs(z) ** spec.v_upper_exponent
        lo = abs(z) ** spec.v_lower_exponent / spec.r
        if lo >= hi:
            continue
        w = math.sqrt(lo * hi) * cmath.exp(2j * math.pi * rng.random())
        if not domain_membership((z, w), spec):
            continue
        count += 1
        x, y = dyn.chart_inverse(F, spec, z, w)
        # fiberwise conjugacy beta_w(f_w(z)) = beta_w(z) + 1
        ws = dyn.FiberWorkspace(F, spec, w=w)
        b0, _ = ws.beta_of_point((x, y))
        b1, _ = ws.beta_of_point(F.apply(x, y))
        worst_fiber = max(worst_fiber, abs(b1 - b0 - 1.0))
        # full chart residual through the public operation
        cv = dyn.fatou_chart(F, spec, (x, y))
        cv1 = dyn.fatou_chart(F, spec, F.apply(x, y))
        worst_chart = max(worst_chart,
                          abs(cv1.beta - cv.beta - 1.0) + abs(cv1.w - cv.w))
    elapsed = time.perf_counter() - t0
    ok = worst_fiber < 1e-8 and worst_chart < 1e-8 and elapsed < 60.0
    _report(4, "Fatou conjugacy", ok,
            f"fiber residual {worst_fiber:.2e}, chart residual {worst_chart:.2e}",
            60.0, elapsed)
    assert worst_fiber < 1e-8
    assert worst_chart < 1e-8
    assert elapsed < 60.0


def test_criterion_5_flower_coverage():
    t0 = time.perf_counter()
    F = corner_germ(1, 1, -0.5, -0.5)
    _, _, petal = normalize(F)
    rng = np.random.default_rng(5)
    report = dyn.petal_cover_check(F, petal, epsilon=1e-2, theta=math.pi / 6,
                                   delta_prime=0.08, samples=10_000, rng=rng)
    rng2 = np.random.default_rng(6)
    control = dyn.petal_cover_check(F, petal, epsilon=1e-2, theta=math.pi / 6,
                                    delta_prime=0.08, samples=10_000, rng=rng2,
                                    membership_theta=math.pi / 12)
    elapsed = time.perf_counter() - t0
    ok = report.uncovered == 0 and control.uncovered > 0 and elapsed < 10.0
    _report(5, "flower coverage", ok,
            f"{report.uncovered} uncovered of {report.total}; "
            f"negative control misses {control.uncovered}", 10.0, elapsed)
    assert report.uncovered == 0
    assert control.uncovered > 0
    assert elapsed < 10.0


def test_criterion_6_escape_dichotomy():
    t0 = time.perf_counter()
    F = corner_germ(1, 1, -2.0, 1.0)
    sig = classify_form(F)
    box = dyn.EscapeBox(epsilon=0.05, delta=0.2)
    rng = np.random.default_rng(7)
    escapes = 0
    tested = 0
    while tested < 1000:
        x = box.delta * math.sqrt(rng.random()) * cmath.exp(2j * math.pi * rng.random())
        y = box.delta * math.sqrt(rng.random()) * cmath.exp(2j * math.pi * rng.random())
        if x == 0 or y == 0 or abs(x * y) >= box.epsilon:
            continue
        tested += 1
        verdict = dyn.escape_analysis(F, sig, box, (x, y), max_steps=10**6)
        if verdict.escaped and verdict.j is not None:
            escapes += 1
    # resonant oracle: time-1 flow with a x y purely imaginary
    fm = FlowMap(1, 1, 1.0, -1.0)
    x, y = 0.1 + 0j, 0.1j
    drift = 0.0
    for _ in range(1000):
        x, y = fm.apply(x, y)
        drift = max(drift, abs(abs(x) - 0.1))
    elapsed = time.perf_counter() - t0
    ok = escapes == 1000 and drift < 1e-12 and elapsed < 30.0
    _report(6, "escape dichotomy", ok,
            f"{escapes}/1000 escaped; resonant modulus drift {drift:.2e}",
            30.0, elapsed)
    assert escapes == 1000
    assert drift < 1e-12
    assert elapsed < 30.0


def test_criterion_7_oracle_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for (M, N, a, b) in ((1, 1, -0.5, -0.5), (2, 1, -0.25, -0.5),
                         (1, 0, -1.0, -0.5)):
        F = truncated_flow_germ(M, N, a, b, order=10)
        fm = FlowMap(M, N, a, b)
        d = math.gcd(M, N) if N else M
        powers = (M // d, N // d, d)
        for start in ((0.05, 0.05), (0.03 + 0.02j, 0.04 - 0.01j)):
            tr = dyn.iterate(F, start, max_steps=1000, powers=powers)
            assert tr.steps == 1000
            for j in range(1, 1001):
                fx, fy = fm.at_time(start, j)
                scale = max(abs(fx), abs(fy))
                worst = max(worst, abs(tr.xs[j] - fx) / scale,
                            abs(tr.ys[j] - fy) / scale)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and elapsed < 5.0
    _report(7, "oracle equivalence", ok, f"max relative error {worst:.2e}",
            5.0, elapsed)
    assert worst < 1e-9
    assert elapsed < 5.0


def test_criterion_8_resolution_correctness():
    t0 = time.perf_counter()
    # (a) y d/dx
    tree_a = resolve(ExactVectorField.from_coeff_maps({(0, 1): 1}, {}))
    counts_a = tree_a.classified_counts()
    ok_a = (tree_a.depth == 1
            and counts_a.get(CLASS_NONDEGENERATE) == 1
            and counts_a.get(CLASS_NONSINGULAR) == 1)
    # (b) y d/dx + x^2 d/dy
    tree_b = resolve(ExactVectorField.from_coeff_maps({(0, 1): 1}, {(2, 0): 1}))
    ok_b = tree_b.depth <= 4 and all(
        pt.status != "NotReduced" for _, pt in tree_b.leaf_points())
    # (c) chart-overlap polynomial identities, exact, at every node
    ok_c = check_chart_compatibility(tree_a) and check_chart_compatibility(tree_b)
    # (d) truncated flow of x (x d/dx - y d/dy)
    F = truncated_flow_germ(1, 0, 1, -1, order=8, exact=True)
    cls = classify_biholo_points(F)
    tags = [p.tag for p in cls.points if p.tag.model == "ii"]
    ok_d = (cls.model_counts() == {"ii": 1}
            and (tags[0].M, tags[0].N) == (1, 0)
            and tags[0].a == GR(1) and tags[0].b == GR(-1))
    elapsed = time.perf_counter() - t0
    ok = ok_a and ok_b and ok_c and ok_d and elapsed < 10.0
    _report(8, "resolution correctness", ok,
            f"a={ok_a} b={ok_b} c={ok_c} d={ok_d}", 10.0, elapsed)
    assert ok_a and ok_b and ok_c and ok_d
    assert elapsed < 10.0


def test_criterion_9_parabolic_curve():
    t0 = time.perf_counter()
    F = germ_from_coeff_maps({(1, 0): 1 + 0j, (2, 0): -1 + 0j},
                             {(0, 1): 1 + 0j, (1, 1): -1 + 0j, (2, 0): 1 + 0j}, 8)
    sig = classify_form(F)
    sector = SectorSpec(epsilon=0.1, theta=math.pi / 4, d=sig.M,
                        kind=ATTRACTING_EXTENDED, component_index=0)
    curve = graph_transform_curve(F, sector, grid=(64, 33), tol=1e-12)
    # lowest-order template of the straightened germ: corner with N = 0
    b_est = []
    a_est = []
    for t in (3e-3, 1e-3, 3e-4):
        p = (t, 1e-4 + 0j)
        x1, y1 = conjugate_by_curve(F, curve, p)
        b_est.append((y1 - p[1]) / (t**sig.M * p[1]))
        a_est.append((x1 - p[0]) / p[0] ** (sig.M + 1))
    template_ok = (abs(b_est[-1] - sig.b) < 0.01 and abs(a_est[-1] - sig.a) < 0.01
                   and abs(b_est[-1] - sig.b) < abs(b_est[0] - sig.b))
    elapsed = time.perf_counter() - t0
    ok = curve.residual < 1e-8 and template_ok and elapsed < 30.0
    _report(9, "parabolic curve", ok,
            f"residual {curve.residual:.2e}, lowest-order (a, b) = "
            f"({a_est[-1]:.4f}, {b_est[-1]:.4f})", 30.0, elapsed)
    assert curve.residual < 1e-8
    assert template_ok
    assert elapsed < 30.0
