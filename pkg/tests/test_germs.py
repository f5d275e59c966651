import json
import math
from fractions import Fraction

import numpy as np
import pytest

from petallab.bipoly import BiPoly
from petallab.errors import (
    InputFormatError,
    NotTangentToIdentityError,
    NotUnipotentError,
    ResonantGermError,
    TemplateMismatchError,
)
from petallab.gaussrat import GaussianRational as GR
from petallab.germs import (
    FORM_CORNER,
    FORM_NONCORNER,
    FORM_OTHER,
    PolyMapGerm,
    classify_form,
    corner_germ,
    exp_field,
    formal_log,
    germ_from_coeff_maps,
    identity_germ,
    invert_jet,
    normalize,
)


def _rand_corner_germ(rng, order=6, exact=False):
    M, N = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    if exact:
        a = GR(Fraction(int(rng.integers(-9, -1)), 4))
        b = GR(Fraction(int(rng.integers(-9, -1)), 4))
    else:
        a = complex(rng.uniform(-2, -0.2), rng.uniform(-1, 1))
        b = complex(rng.uniform(-2, -0.2), rng.uniform(-1, 1))
    F = corner_germ(M, N, a, b, order=order, exact=exact)
    return F, M, N, a, b


# ---------------------------------------------------------------------------
# construction and interchange
# ---------------------------------------------------------------------------

def test_rejects_nonunipotent():
    with pytest.raises(NotUnipotentError):
        germ_from_coeff_maps({(1, 0): 2.0 + 0j}, {(0, 1): 1.0 + 0j})


def test_rejects_affine():
    with pytest.raises(ValueError):
        germ_from_coeff_maps({(0, 0): 1.0, (1, 0): 1.0}, {(0, 1): 1.0})


def test_unipotent_non_tangent_allowed():
    F = germ_from_coeff_maps({(1, 0): 1.0 + 0j, (0, 1): 1.0 + 0j},
                             {(0, 1): 1.0 + 0j})
    assert not F.tangent_to_identity


def test_json_round_trip_float(tmp_path, ref_germ):
    path = tmp_path / "g.json"
    ref_germ.save(path)
    G = PolyMapGerm.load(path)
    assert G.fx == ref_germ.fx and G.fy == ref_germ.fy
    obj = json.load(open(path))
    assert {e["component"] for e in obj} == {"x", "y"}
    assert all(e["coefficient_mode"] == "float" for e in obj)


def test_json_round_trip_exact(tmp_path):
    F = corner_germ(2, 1, GR(Fraction(-1, 3)), GR(Fraction(-1, 3)), exact=True)
    path = tmp_path / "g.json"
    F.save(path)
    G = PolyMapGerm.load(path)
    assert G.exact
    assert G.fx == F.fx and G.fy == F.fy
    rows = json.load(open(path))[0]["monomials"]
    assert all(isinstance(r[2], str) for r in rows)  # exact mode: strings


def test_json_malformed(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(InputFormatError):
        PolyMapGerm.load(path)
    path.write_text(json.dumps([{"component": "x", "monomials": []}]))
    with pytest.raises(InputFormatError):
        PolyMapGerm.load(path)


def test_apply_matches_eval(ref_germ):
    x, y = 0.07 + 0.01j, 0.05 - 0.02j
    fx = ref_germ.fx.eval(x, y)
    fy = ref_germ.fy.eval(x, y)
    ax, ay = ref_germ.apply(x, y)
    assert ax == pytest.approx(fx, rel=1e-15)
    assert ay == pytest.approx(fy, rel=1e-15)


# ---------------------------------------------------------------------------
# classify_form
# ---------------------------------------------------------------------------

def test_classify_reference_corner(ref_germ):
    sig = classify_form(ref_germ)
    assert sig.form == FORM_CORNER
    assert (sig.M, sig.N) == (1, 1)
    assert sig.a == pytest.approx(-0.5) and sig.b == pytest.approx(-0.5)
    # condition: Re(a/(aM+bN)) = Re(1/2) > 0 on both coefficients
    assert sig.satisfies_attracting_condition
    assert not sig.satisfies_repelling_condition


def test_classify_noncorner():
    F = germ_from_coeff_maps({(1, 0): 1 + 0j, (2, 0): -1 + 0j},
                             {(0, 1): 1 + 0j, (1, 1): -1 + 0j, (3, 0): 1 + 0j})
    sig = classify_form(F)
    assert sig.form == FORM_NONCORNER
    assert (sig.M, sig.a, sig.b, sig.c) == (1, -1, -1, 0)
    assert sig.satisfies_attracting_condition  # Re(b/a) = 1 > 0


def test_classify_corner_with_higher_N():
    # brute-force template scan oracle: the minimal monomials are
    # (2, 2) in the first component and (1, 3) in the second
    F = germ_from_coeff_maps({(1, 0): 1 + 0j, (2, 2): 1 + 0j},
                             {(0, 1): 1 + 0j, (1, 3): 1 + 0j})
    fxt = {k for k, v in F.fx.c.items() if k != (1, 0)}
    fyt = {k for k, v in F.fy.c.items() if k != (0, 1)}
    assert min(fxt) == (2, 2) and min(fyt) == (1, 3)
    sig = classify_form(F)
    assert sig.form == FORM_CORNER
    assert (sig.M, sig.N, sig.a, sig.b) == (1, 2, 1, 1)


def test_classify_identity_is_other():
    assert classify_form(identity_germ()).form == FORM_OTHER


def test_classify_embedded_one_dim_is_other():
    F = germ_from_coeff_maps({(1, 0): 1 + 0j, (2, 0): -1 + 0j}, {(0, 1): 1 + 0j})
    assert classify_form(F).form == FORM_OTHER  # b = 0 fails ab != 0


def test_classify_requires_tangent():
    F = germ_from_coeff_maps({(1, 0): 1 + 0j, (0, 1): 1 + 0j}, {(0, 1): 1 + 0j})
    with pytest.raises(NotTangentToIdentityError):
        classify_form(F)


# ---------------------------------------------------------------------------
# normalize
# ---------------------------------------------------------------------------

def test_normalize_reference_noop(ref_germ):
    G, change, petal = normalize(ref_germ)
    assert change.is_identity
    assert petal is not None and petal.gamma > 0


def test_normalize_scales_to_minus_one():
    F = corner_germ(1, 1, -1.0, -1.0)
    G, change, petal = normalize(F)
    sig = classify_form(G)
    assert sig.a == pytest.approx(-0.5, abs=1e-12)
    assert sig.b == pytest.approx(-0.5, abs=1e-12)
    assert change.alpha == pytest.approx(change.beta)
    assert abs(change.alpha) == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_normalize_noncorner_rotates_a_real():
    F = germ_from_coeff_maps({(1, 0): 1 + 0j, (2, 0): 1j},
                             {(0, 1): 1 + 0j, (1, 1): 0.5 + 0.5j})
    G, change, petal = normalize(F)
    sig = classify_form(G)
    assert sig.form == FORM_NONCORNER
    assert sig.a.imag == pytest.approx(0.0, abs=1e-12)
    assert sig.a.real == pytest.approx(-1.0, abs=1e-12)  # a = -1/M with M = 1


def test_normalize_idempotent(rng):
    for _ in range(5):
        F, *_ = _rand_corner_germ(rng)
        G, _, _ = normalize(F)
        G2, change2, _ = normalize(G)
        assert abs(change2.alpha - 1) < 1e-9 and abs(change2.beta - 1) < 1e-9


def test_normalize_resonant_errors():
    F = corner_germ(1, 1, 1.0, -1.0)  # aM + bN = 0
    with pytest.raises(ResonantGermError):
        normalize(F)


def test_normalize_rejects_other():
    with pytest.raises(TemplateMismatchError):
        normalize(identity_germ())



# ---------------------------------------------------------------------------
# invert_jet
# ---------------------------------------------------------------------------

def test_invert_identity():
    F = identity_germ()
    G = invert_jet(F)
    assert G.fx == F.fx and G.fy == F.fy


def test_invert_reference_leading_sign(ref_germ):
    G = invert_jet(ref_germ)
    assert G.fx.coeff(2, 1) == pytest.approx(0.5)
    assert G.fy.coeff(1, 2) == pytest.approx(0.5)


def test_invert_random_corner_germs(rng):
    for _ in range(20):
        F, M, N, a, b = _rand_corner_germ(rng)
        G = invert_jet(F)
        sig = classify_form(G)
        assert (sig.M, sig.N) == (M, N)
        assert sig.a == pytest.approx(-a, rel=1e-10)
        assert sig.b == pytest.approx(-b, rel=1e-10)
        H = F.compose(G)
        resid = dict(H.fx.c)
        resid.pop((1, 0), None)
        worst = max([abs(v) for v in resid.values()] +
                    [abs(H.fx.coeff(1, 0) - 1.0)], default=0.0)
        assert worst < 1e-12
        H2 = G.compose(F)
        resid2 = dict(H2.fy.c)
        resid2.pop((0, 1), None)
        worst2 = max([abs(v) for v in resid2.values()] +
                     [abs(H2.fy.coeff(0, 1) - 1.0)], default=0.0)
        assert worst2 < 1e-12


# ---------------------------------------------------------------------------
# formal_log / exp_field
# ---------------------------------------------------------------------------

def test_log_vertical_shear_exact():
    F = germ_from_coeff_maps({(1, 0): GR(1)}, {(0, 1): GR(1), (2, 0): GR(1)})
    X = formal_log(F)
    assert X.px.is_zero
    assert X.py == BiPoly({(2, 0): GR(1)})  # exactly x^2 d/dy


def test_log_one_dim_third_coefficient():
    # hand oracle: exp(a d/dx) with a = x^2 + c3 x^3 + ... gives
    # x + x^2 + (c3 + 1) x^3 + O(4), so matching x + x^2 forces c3 = -1
    F = germ_from_coeff_maps({(1, 0): GR(1), (2, 0): GR(1)}, {(0, 1): GR(1)})
    X = formal_log(F)
    assert X.px.coeff(2, 0) == GR(1)
    assert X.px.coeff(3, 0) == GR(-1)
    assert X.py.is_zero


def test_log_identity_zero():
    X = formal_log(identity_germ())
    assert X.is_zero


def test_exp_log_round_trip_random(rng):
    for _ in range(6):
        order = 6
        cx = {(1, 0): 1 + 0j}
        cy = {(0, 1): 1 + 0j}
        for _k in range(4):
            i, j = int(rng.integers(0, 4)), int(rng.integers(0, 4))
            if i + j < 2 or i + j > order:
                continue
            cx[(i, j)] = complex(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5))
            i, j = int(rng.integers(0, 4)), int(rng.integers(0, 4))
            if i + j < 2 or i + j > order:
                continue
            cy[(i, j)] = complex(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5))
        F = germ_from_coeff_maps(cx, cy, order)
        X = formal_log(F)
        E = exp_field(X, order)
        dx = F.fx - E.fx
        dy = F.fy - E.fy
        worst = max([abs(v) for v in dx.c.values()] +
                    [abs(v) for v in dy.c.values()], default=0.0)
        assert worst < 1e-12


def test_log_of_inverse_is_negative(rng):
    F, *_ = _rand_corner_germ(rng, exact=True)
    X = formal_log(F)
    Xi = formal_log(invert_jet(F))
    assert (X.px + Xi.px).is_zero
    assert (X.py + Xi.py).is_zero


def test_log_of_unipotent_shear():
    # DF(0) = [[1, 1], [0, 1]]: log must reproduce F by re-exponentiation
    F = germ_from_coeff_maps({(1, 0): GR(1), (0, 1): GR(1)}, {(0, 1): GR(1)}, 6)
    X = formal_log(F)
    E = exp_field(X, 6)
    assert E.fx == F.fx and E.fy == F.fy


def test_corner_log_monomial_content(rng):
    # the common monomial factor of log F matches the fixed set x^M y^N
    for _ in range(5):
        F, M, N, a, b = _rand_corner_germ(rng, exact=True)
        X = formal_log(F)
        assert X.monomial_content() == (M, N)
