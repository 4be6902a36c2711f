import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manifold_flows.autoform import (
    AutomorphicField,
    EquilibriumPoleError,
    RationalMap,
    ThetaConfig,
    ThetaOverflowError,
    covariance_residual,
    eval_field,
    eval_theta,
    example_field,
    example_h1,
    example_h2,
    term_covariance_check,
    term_covariance_residuals,
)
from manifold_flows.group import GroupPresentation, enumerate_ball, example_domain, example_presentation
from manifold_flows.moebius import MoebiusMap, PoleError, apply
from manifold_flows.quaternion import HPoint, Quaternion, inv, mul, pow_int

S3 = math.sqrt(3)
G = example_presentation()


def identity_ball():
    return enumerate_ball(G, 0)


def fixed_points(n=10, seed=0):
    rng = np.random.default_rng(seed)
    D = example_domain()
    pts = []
    while len(pts) < n:
        x, y, r = rng.uniform(0, 3), rng.uniform(0, S3), rng.uniform(0.5, 2.0)
        if D.contains(np.array([x, y, r]), 0.0):
            pts.append(HPoint(x, y, r))
    return pts


def scalar_theta(ball, H, m, p, modified):
    """Reference sum with the scalar quaternion type, term by term."""
    total = Quaternion()
    q = p.quaternion
    k = 2 * m - 2 if modified else 2 * m
    for _, T in ball:
        den = Quaternion.coerce(T.c) * q + Quaternion.coerce(T.d)
        factor = pow_int(den, -k)
        if modified:
            factor = mul(factor, Quaternion.coerce(1 / T.det))
        total = total + mul(factor, H(apply(T, p)))
    return total


def qclose(a, b, tol):
    return np.allclose(a.to_array(), b.to_array(), atol=tol, rtol=0)


def test_weight_must_be_at_least_two():
    with pytest.raises(ValueError):
        ThetaConfig(1, example_h1(), identity_ball())
    with pytest.raises(ValueError):
        AutomorphicField(example_h1(), example_h2(), identity_ball(), m=1)


def test_identity_ball_returns_h():
    p = HPoint(0.4, -0.3, 1.7)
    H = RationalMap(((1, 2, 0, 0), (0, 0, 1, 0)), ((3, 0, 0, 0), (1, 0, 0, 0)))
    for m in (2, 3, 5):
        for modified in (False, True):
            assert eval_theta(ThetaConfig(m, H, identity_ball(), modified), p) == H(p)


def test_identity_ball_field():
    p = HPoint(0.4, -0.3, 1.7)
    H2 = RationalMap(((1, 0, 0, 0), (0, 1, 0, 0)))
    F = AutomorphicField(example_h1(), H2, identity_ball())
    assert qclose(eval_field(F, p), mul(example_h1()(p), inv(H2(p))), 1e-15)


def test_three_term_sum():
    G2 = GroupPresentation((MoebiusMap(1, 0, 0, 2),), ("T2",))
    ball = enumerate_ball(G2, 1)
    assert len(ball) == 3
    value = eval_theta(ThetaConfig(2, RationalMap.constant(1.0), ball), HPoint(0.2, 0.1, 1.0))
    assert value == Quaternion(1 + 1 / 16 + 16)


def test_modified_identity_example():
    value = eval_theta(ThetaConfig(2, example_h1(), identity_ball(), modified=True), HPoint(0, 0, 1))
    assert qclose(value, Quaternion(0.5, S3 / 2, 6.0, 0.0), 1e-15)


def test_field_regression_anchor():
    F = example_field(radius=4)
    value = eval_field(F, HPoint(1, 0, 1))
    expected = Quaternion(1.022902497058313, 0.0584030251302065, 1.3371900228041322, 0.0)
    assert qclose(value, expected, 1e-12)


@pytest.mark.parametrize("modified", [False, True])
def test_theta_matches_scalar_reference(modified):
    ball = enumerate_ball(G, 3)
    for p in fixed_points(4):
        ref = scalar_theta(ball, example_h1(), 2, p, modified)
        got = eval_theta(ThetaConfig(2, example_h1(), ball, modified), p)
        assert qclose(got, ref, 1e-10 * max(1.0, ref.norm()))


def test_equilibrium_pole():
    H2 = RationalMap(((0, 0, -1, 0), (1, 0, 0, 0)))  # p - j, zero at j
    F = AutomorphicField(example_h1(), H2, identity_ball())
    with pytest.raises(EquilibriumPoleError):
        eval_field(F, HPoint(0, 0, 1))


def test_h_pole_reports_word():
    H = RationalMap(((1, 0, 0, 0),), ((0, 0, -0.5, 0), (1, 0, 0, 0)))  # pole at j/2
    ball = enumerate_ball(GroupPresentation((MoebiusMap(1, 0, 0, 2),), ("T2",)), 1)
    with pytest.raises(PoleError) as info:
        eval_theta(ThetaConfig(2, H, ball), HPoint(0, 0, 1))
    assert info.value.word is not None and len(info.value.word) == 1


def test_overflow():
    ball = enumerate_ball(GroupPresentation((MoebiusMap(1, 0, 0, 1e-10),), ("S",)), 1)
    with pytest.raises(ThetaOverflowError):
        eval_theta(ThetaConfig(16, RationalMap.constant(1.0), ball), HPoint(0, 0, 1))


def test_rational_map_json_round_trip():
    H = RationalMap(((1, 2, 0, 0), (0, 0, 1, 0)), ((3, 0, 0, 0), (1, 0, 0, 0)))
    assert RationalMap.from_json(H.to_json()) == H
    with pytest.raises(ValueError):
        RationalMap(((1, 0, 0, 0),), ((0, 0, 0, 0),))


def test_term_covariance_examples():
    F = example_field(radius=1)
    p = HPoint(1.3, 0.4, 0.8)
    assert term_covariance_check(GroupPresentation((MoebiusMap.identity(),), ("I",)), F, G.word(""), 0, p) == 0.0
    assert term_covariance_check(G, F, G.word("T5"), 1, p) < 1e-10
    F3 = AutomorphicField(example_h1(), example_h2(), F.ball, m=3)
    assert term_covariance_check(G, F3, G.word("T5"), 1, p) < 1e-10


@pytest.mark.parametrize("modified", [False, True])
def test_term_covariance_whole_ball(modified):
    F = example_field(radius=3)
    res = term_covariance_residuals(G, F, F.ball.maps, fixed_points(10, seed=3), modified=modified)
    assert res.shape == (5, len(F.ball), 10)
    assert res.max() < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.2, 3), st.integers(2, 4))
def test_term_covariance_random_points(x, y, r, m):
    F = AutomorphicField(example_h1(), example_h2(), enumerate_ball(G, 2), m)
    assert term_covariance_residuals(G, F, F.ball.maps, [HPoint(x, y, r)]).max() < 1e-10


def test_covariance_identity_is_zero():
    assert covariance_residual(example_field(radius=2), MoebiusMap.identity(), HPoint(1, 0.5, 1)) == 0.0


def max_residual(F, T, pts):
    return max(covariance_residual(F, T, p) for p in pts)


def test_t2_residual_trend():
    pts = fixed_points()
    T2 = G.generators[1]
    worst = [max_residual(example_field(N), T2, pts) for N in (2, 4, 6)]
    assert worst[0] >= worst[1] >= worst[2]


def test_t5_residual_trend():
    # stated expectation for T5; the truncated sums do not satisfy it
    pts = fixed_points()
    T5 = G.generators[4]
    worst = [max_residual(example_field(N), T5, pts) for N in (2, 4, 6)]
    assert worst[0] >= worst[1] >= worst[2], worst


def test_evaluation_is_deterministic():
    p = HPoint(1.1, 0.3, 0.9)
    serial = eval_field(example_field(radius=4), p)
    again = eval_field(example_field(radius=4), p)
    threaded = eval_field(example_field(radius=4, workers=4), p)
    assert serial == again == threaded
