import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from manifold_flows.moebius import (
    INFINITY,
    MoebiusMap,
    PoleError,
    TransformClass,
    apply,
    apply_array,
    classify,
    compose,
    derivative_factor,
    expanded_action,
    inverse,
    jacobian,
)
from manifold_flows.quaternion import DomainError, HPoint, Quaternion, mul

coef = st.floats(min_value=-3, max_value=3, allow_nan=False)
cplx = st.tuples(coef, coef).map(lambda t: complex(*t))
points = st.tuples(coef, coef, st.floats(min_value=0.05, max_value=4)).map(lambda t: HPoint(*t))


@st.composite
def maps(draw, real=False):
    entry = coef if real else cplx
    a, b, c, d = (draw(entry) for _ in range(4))
    det = a * d - b * c
    assume(abs(det) > 0.1)
    if real and det < 0:
        a, b = -a, -b
    return MoebiusMap(a, b, c, d)


def qclose(p, q, tol=1e-12):
    pa = p.quaternion if isinstance(p, HPoint) else Quaternion.coerce(p)
    qa = q.quaternion if isinstance(q, HPoint) else Quaternion.coerce(q)
    return np.allclose(pa.to_array(), qa.to_array(), atol=tol, rtol=0)


T2 = MoebiusMap(1, 0, 0, 2)
T5 = MoebiusMap.translation(2)
T5_INV = MoebiusMap(1, -2, 0, 1)
FLIP = MoebiusMap(0, -1, 1, 0)


def test_apply_examples():
    assert qclose(apply(T5, HPoint(0, 0, 1)), HPoint(2, 0, 1))
    assert qclose(apply(FLIP, HPoint(0, 0, 1)), HPoint(0, 0, 1))
    assert qclose(apply(T2, HPoint(1, 0, 1)), HPoint(0.5, 0, 0.5))


def test_apply_infinity():
    assert apply(T5, INFINITY) is INFINITY
    assert qclose(apply(FLIP, INFINITY), HPoint(0, 0, 0))
    assert apply(FLIP, HPoint(0, 0, 0)) is INFINITY


def test_singular_map_rejected():
    with pytest.raises(DomainError):
        MoebiusMap(1, 2, 2, 4)


def test_compose_examples():
    assert compose(T5, T5).is_scalar_multiple_of(MoebiusMap.translation(4))
    T1 = compose(T2, T5_INV)
    np.testing.assert_allclose(T1.matrix(), [[1, -2], [0, 2]])
    assert compose(T1, inverse(T1)).is_identity()


def test_inverse_examples():
    assert inverse(T5).is_scalar_multiple_of(MoebiusMap.translation(-2))
    assert inverse(T2).is_scalar_multiple_of(MoebiusMap(2, 0, 0, 1))
    assert inverse(MoebiusMap(1, -2, 0, 2)).is_scalar_multiple_of(MoebiusMap(2, 2, 0, 1))
    M = MoebiusMap(1 + 1j, 2, 0.5j, 3)
    assert compose(M, M.matrix_inverse()).is_scalar_multiple_of(MoebiusMap.identity(), 1e-12)
    np.testing.assert_allclose(compose(M, M.matrix_inverse()).matrix(), np.eye(2), atol=1e-14)


def test_classify_examples():
    assert classify(MoebiusMap(1, 2, 0, 1)) is TransformClass.PARABOLIC
    assert classify(T2) is TransformClass.HYPERBOLIC
    assert abs(T2.normalize().trace - 3 / math.sqrt(2)) < 1e-12
    assert classify(FLIP) is TransformClass.ELLIPTIC
    assert classify(MoebiusMap.identity()) is TransformClass.IDENTITY
    assert classify(MoebiusMap(2j, 0, 0, 1)) is TransformClass.LOXODROMIC


def test_derivative_factor_examples():
    p = HPoint(0.3, -0.7, 1.2)
    assert qclose(derivative_factor(T5, p), Quaternion(1.0))
    assert qclose(derivative_factor(T2, p), Quaternion(0.5))
    # det = 0*0 - (-1)(1) = 1 and j^-2 = -1
    assert qclose(derivative_factor(FLIP, HPoint(0, 0, 1)), Quaternion(-1.0))
    with pytest.raises(PoleError):
        derivative_factor(FLIP, Quaternion(0.0))


def test_json_round_trip():
    M = MoebiusMap(1 + 2j, -0.5, 0.25j, 3)
    data = json.loads(json.dumps(M.to_json()))
    assert MoebiusMap.from_json(data) == M


@given(maps(), maps(), points)
def test_homomorphism(A, B, p):
    lhs = apply(compose(A, B), p)
    rhs = apply(A, apply(B, p))
    scale = max(1.0, lhs.quaternion.norm())
    assert qclose(lhs, rhs, 1e-10 * scale)


@given(maps(), points)
def test_height_positive(T, p):
    assert apply(T, p).r > 0


@given(maps(), points)
def test_expanded_formula_agrees_for_det_one(T, p):
    N = T.normalize()
    a = apply(N, p)
    b = expanded_action(N, p)
    assert qclose(a, b, 1e-10 * max(1.0, a.quaternion.norm()))


@given(maps(), cplx)
def test_classify_scalar_invariant(T, s):
    assume(abs(s) > 0.1)
    assert classify(T) is classify(T.scaled(s))


@given(maps(), points)
def test_vectorised_action(T, p):
    np.testing.assert_allclose(apply_array(T, p.to_array()), apply(T, p).to_array(), atol=1e-10, rtol=1e-10)


@settings(max_examples=50)
@given(maps(), points)
def test_jacobian_finite_difference(T, p):
    x = p.to_array()
    Jm = jacobian(T, x)
    h = 1e-6 * max(1.0, p.r)
    fd = np.column_stack([(T.apply_point(x + h * e) - T.apply_point(x - h * e)) / (2 * h) for e in np.eye(3)])
    assert np.allclose(Jm, fd, rtol=1e-5, atol=1e-5 * np.max(np.abs(fd)))


affine = st.tuples(cplx, cplx, cplx).filter(lambda t: abs(t[0]) > 0.1 and abs(t[2]) > 0.1).map(
    lambda t: MoebiusMap(t[0], t[1], 0, t[2]))


@given(affine, affine, points)
def test_chain_rule_affine(A, B, p):
    lhs = derivative_factor(compose(A, B), p)
    rhs = mul(derivative_factor(A, apply(B, p)), derivative_factor(B, p))
    assert qclose(lhs, rhs, 1e-10 * max(1.0, lhs.norm()))


@given(maps(real=True), maps(real=True), points)
def test_chain_rule_real(A, B, p):
    lhs = derivative_factor(compose(A, B), p)
    rhs = mul(derivative_factor(A, apply(B, p)), derivative_factor(B, p))
    assert qclose(lhs, rhs, 1e-9 * max(1.0, lhs.norm()))
