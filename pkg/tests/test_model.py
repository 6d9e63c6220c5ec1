import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fqrt_fluid.errors import InvalidParameters
from fqrt_fluid.model import (BoundarySub, FluidState, ModelParams, Region, RegionTag,
                              boundary_sub, canonical_params, classify, drift_gap, drift_pair,
                              ftsp_rates, isolation_quantities, queue_bounds, validate_params)

from _draws import boundary_state, random_params

P = canonical_params()


def test_canonical_validates():
    rep = validate_params(P)
    assert rep.ok
    assert rep.isolation.qa1 == pytest.approx(1.0, abs=1e-15)
    assert rep.isolation.qa2 == 0.0
    assert rep.isolation.sa2 == pytest.approx(0.1, abs=1e-15)
    assert rep.assumption_margin == pytest.approx(0.3 * 1.0 - 0.8 * 0.1, abs=1e-15)


def test_assumption_equality_passes():
    p = P.with_(lambda1=1.0, lambda2=1.0)
    rep = validate_params(p)
    assert rep.isolation.qa1 == 0.0 and rep.isolation.sa2 == 0.0
    assert rep.assumption_a


def test_isolation_with_both_classes_queueing():
    p = P.with_(lambda1=13.0, lambda2=1.5, mu11=10.0, mu12=0.8, mu22=1.0, theta1=2.0,
                theta2=0.2)
    iso = isolation_quantities(p)
    assert iso.qa1 == pytest.approx(1.5)
    assert iso.qa2 == pytest.approx(2.5)


def test_assumption_violation_is_reported_not_raised():
    rep = validate_params(P.with_(kappa=5.0))
    assert not rep.assumption_a
    assert "assumption A fails" in rep.messages[0]


@pytest.mark.parametrize("field", ["lambda1", "mu22", "theta2", "m1"])
def test_zero_rate_names_the_field(field):
    with pytest.raises(InvalidParameters, match=field):
        validate_params(P.with_(**{field: 0.0}))


@pytest.mark.parametrize("change", [{"lambda1": -1.0}, {"theta1": math.nan},
                                    {"mu11": math.inf}, {"ratio_num": 0},
                                    {"ratio_num": 8, "ratio_den": 10}, {"m2": "1"}])
def test_construction_rejects(change):
    with pytest.raises(InvalidParameters):
        P.with_(**change)


def test_json_round_trip():
    assert ModelParams.from_json(P.to_json()) == P
    data = P.to_dict()
    data["extra"] = 1
    with pytest.raises(InvalidParameters, match="extra"):
        ModelParams.from_dict(data)
    del data["extra"], data["theta1"]
    with pytest.raises(InvalidParameters, match="theta1"):
        ModelParams.from_dict(data)


def test_ftsp_rates_reference_state():
    r = ftsp_rates(FluidState(0.4, 0.5, 0.25), P)
    assert r.lam_k_plus == 1.3 == r.lam_k_minus
    assert r.lam_j_plus == pytest.approx(0.15)
    assert r.mu_k_plus == pytest.approx(2.07)
    assert r.mu_j_plus == 0.9 == r.mu_j_minus
    assert r.lam_j_minus == pytest.approx(1.10)
    assert r.mu_k_minus == pytest.approx(1.12)


def test_ftsp_rates_empty_queues():
    r = ftsp_rates(FluidState(0.0, 0.0, 0.0), P)
    assert r.mu_k_plus == P.mu11 * P.m1 + P.mu22 * P.m2
    assert r.lam_j_plus == 0.0


def test_drift_reference_state():
    d = drift_pair(FluidState(0.4, 0.5, 0.25), P)
    assert d.delta_plus == pytest.approx(-6.85, abs=1e-12)
    assert d.delta_minus == pytest.approx(1.70, abs=1e-12)
    assert d.gap == pytest.approx(9 * (0.8 * 0.25 + 0.75), abs=1e-12)


def test_drift_at_star_values():
    d = drift_pair(FluidState(11 / 30, 11 / 24, 0.2375), P)
    assert d.delta_plus == pytest.approx(-6.8625, abs=1e-12)
    assert d.delta_minus == pytest.approx(1.71, abs=1e-12)


def test_gap_at_endpoints():
    assert drift_pair(FluidState(0.4, 0.5, 0.0), P).gap == pytest.approx(9 * P.mu22 * P.m2)
    assert drift_pair(FluidState(0.4, 0.5, 1.0), P).gap == pytest.approx(9 * P.mu12 * P.m2)


@pytest.mark.parametrize("x,label", [((0.4, 0.5, 0.25), "A"), ((1, 0, 0), "SPlus"),
                                     ((0, 1, 0), "SMinus")])
def test_classify_examples(x, label):
    assert classify(FluidState(*x), P).label == label


def test_queue_bounds():
    b1, b2 = queue_bounds(FluidState(0, 0, 0), P)
    assert (b1, b2) == pytest.approx((1.3 / 0.3, 3.0))
    assert queue_bounds(FluidState(10, 0, 0), P) == pytest.approx((10.0, 3.0))
    fixed = FluidState(1.3 / 0.3, 3.0, 0)
    assert queue_bounds(fixed, P) == (fixed.q1, fixed.q2)


def test_region_labels_round_trip():
    for reg in [Region(RegionTag.SPlus), Region(RegionTag.SMinus)] + [
            Region(RegionTag.Boundary, s) for s in BoundarySub]:
        assert Region.from_label(reg.label) == reg


params_st = st.integers(0, 2 ** 32 - 1).map(lambda s: random_params(np.random.default_rng(s)))


@settings(max_examples=200)
@given(params_st, st.floats(0, 10), st.floats(0, 10), st.floats(0, 1))
def test_gap_identity(p, q1, q2, frac):
    x = FluidState(q1, q2, frac * p.m2)
    d = drift_pair(x, p)
    assert d.gap == pytest.approx(drift_gap(x, p), rel=1e-12)


@given(params_st)
def test_isolation_complementarity(p):
    iso = isolation_quantities(p)
    assert iso.qa1 * iso.sa1 == 0.0
    assert iso.qa2 * iso.sa2 == 0.0


@settings(max_examples=200)
@given(params_st, st.floats(0, 10), st.floats(0, 10), st.floats(0, 1))
def test_classify_agrees_with_exact_sign(p, q1, q2, frac):
    x = FluidState(q1, q2, frac * p.m2)
    exact = Fraction(q1) * p.k - Fraction(q2) * p.j - Fraction(p.kappa) * p.k
    tol = 1e-9 * max(1.0, q1, p.r * q2)
    reg = classify(x, p)
    if exact / p.k > 10 * tol:
        assert reg.tag is RegionTag.SPlus
    elif exact / p.k < -10 * tol:
        assert reg.tag is RegionTag.SMinus


@settings(max_examples=200)
@given(st.integers(0, 2 ** 32 - 1))
def test_boundary_subtags_exhaustive(seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng)
    x = boundary_state(rng, p)
    reg = classify(x, p)
    assert reg.on_boundary
    d = drift_pair(x, p)
    tol = 1e-9 * d.gap
    # exactly one of the five sign patterns
    hits = [d.delta_plus > tol,
            abs(d.delta_plus) <= tol,
            d.delta_plus < -tol and d.delta_minus > tol,
            abs(d.delta_minus) <= tol,
            d.delta_minus < -tol]
    assert sum(hits) == 1
    assert reg.sub is boundary_sub(d)
