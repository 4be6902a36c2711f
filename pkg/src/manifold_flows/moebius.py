"""Möbius transformations acting on upper half-space by quaternion arithmetic.

A map is stored as its complex 2x2 matrix ``((a, b), (c, d))`` and acts by
``p -> (a p + b)(c p + d)^-1`` with the inverse multiplied on the right.
When ``ad - bc`` is not a positive real the matrix is first rescaled to
determinant one; rescaling by a positive real commutes with everything, so
for the common case the stored coefficients are used as they are.
"""

from __future__ import annotations

import cmath
import enum
from dataclasses import dataclass
from typing import Union

import numpy as np

from .quaternion import (
    DEFAULT_TOL,
    DomainError,
    HPoint,
    Quaternion,
    Tolerance,
    cmul_left,
    complex_to_q,
    mul,
    points_to_q,
    pow_int,
    qinv,
    qmul,
)


class PoleError(ArithmeticError):
    """A denominator ``c p + d`` (or similar) vanished."""

    def __init__(self, message, word=None, point=None):
        super().__init__(message)
        self.word = word
        self.point = point


class _Infinity:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"

    def __reduce__(self):
        return (_Infinity, ())


INFINITY = _Infinity()

PointLike = Union[HPoint, Quaternion, _Infinity]


class TransformClass(enum.Enum):
    IDENTITY = "identity"
    PARABOLIC = "parabolic"
    HYPERBOLIC = "hyperbolic"
    ELLIPTIC = "elliptic"
    LOXODROMIC = "loxodromic"


@dataclass(frozen=True)
class MoebiusMap:
    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        for name in "abcd":
            object.__setattr__(self, name, complex(getattr(self, name)))
        if self.det == 0:
            raise DomainError("Möbius map with ad - bc = 0")

    @classmethod
    def from_matrix(cls, m) -> "MoebiusMap":
        m = np.asarray(m, dtype=complex)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @classmethod
    def identity(cls) -> "MoebiusMap":
        return cls(1, 0, 0, 1)

    @classmethod
    def translation(cls, t: complex) -> "MoebiusMap":
        return cls(1, t, 0, 1)

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    @property
    def trace(self) -> complex:
        return self.a + self.d

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    def scaled(self, s: complex) -> "MoebiusMap":
        return MoebiusMap(s * self.a, s * self.b, s * self.c, s * self.d)

    def normalize(self) -> "MoebiusMap":
        """Equivalent map with determinant one (sign is not fixed here)."""
        return self.scaled(1 / cmath.sqrt(self.det))

    def acting(self) -> "MoebiusMap":
        """The representative actually used for the quaternion action."""
        det = self.det
        if det.imag == 0.0 and det.real > 0.0:
            return self
        return self.normalize()

    def __matmul__(self, other: "MoebiusMap") -> "MoebiusMap":
        return compose(self, other)

    def __call__(self, p):
        return apply(self, p)

    def inverse(self) -> "MoebiusMap":
        return inverse(self)

    def matrix_inverse(self) -> "MoebiusMap":
        """The true inverse matrix (adjugate divided by the determinant)."""
        det = self.det
        return MoebiusMap(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def is_scalar_multiple_of(self, other: "MoebiusMap", tol: float = 1e-9) -> bool:
        m1 = self.matrix().ravel()
        m2 = other.matrix().ravel()
        k = int(np.argmax(np.abs(m2)))
        if abs(m1[k]) == 0:
            return False
        s = m1[k] / m2[k]
        scale = max(np.max(np.abs(m1)), 1e-300)
        return bool(np.max(np.abs(m1 - s * m2)) <= tol * scale)

    def is_identity(self, tol: float = 1e-9) -> bool:
        return self.is_scalar_multiple_of(MoebiusMap.identity(), tol)

    # array-level interface shared with Euclidean isometries -----------------

    def apply_point(self, x) -> np.ndarray:
        """Act on an ``(x, y, r)`` array (interior points only)."""
        return apply_array(self, np.asarray(x, dtype=float))

    def jacobian(self, x) -> np.ndarray:
        return jacobian(self, x)

    def is_inverse_of(self, other, tol: float = 1e-9) -> bool:
        if not isinstance(other, MoebiusMap):
            return False
        return compose(self, other).is_identity(tol)

    def to_json(self) -> list:
        return [[z.real, z.imag] for z in (self.a, self.b, self.c, self.d)]

    @classmethod
    def from_json(cls, data) -> "MoebiusMap":
        if len(data) != 4:
            raise ValueError("a Möbius map needs four [re, im] pairs")
        return cls(*(complex(float(re), float(im)) for re, im in data))


def _as_quaternion(p) -> Quaternion:
    if isinstance(p, HPoint):
        return p.quaternion
    return Quaternion.coerce(p)


def apply(T: MoebiusMap, p: PointLike):
    """Image of ``p`` (an :class:`HPoint`, quaternion or ``INFINITY``)."""
    M = T.acting()
    if p is INFINITY:
        if M.c == 0:
            return INFINITY
        return HPoint.from_quaternion(Quaternion.coerce(M.a / M.c))
    was_point = isinstance(p, HPoint)
    q = _as_quaternion(p)
    den = Quaternion.coerce(M.c) * q + Quaternion.coerce(M.d)
    if den.norm2() == 0.0:
        return INFINITY
    num = Quaternion.coerce(M.a) * q + Quaternion.coerce(M.b)
    image = num / den
    if was_point:
        return HPoint.from_quaternion(image)
    return image


def apply_array(T: MoebiusMap, pts: np.ndarray) -> np.ndarray:
    """Vectorised action on ``(..., 3)`` arrays of interior points."""
    M = T.acting()
    q = points_to_q(pts)
    den = cmul_left(M.c, q) + complex_to_q(M.d)
    num = cmul_left(M.a, q) + complex_to_q(M.b)
    return qmul(num, qinv(den))[..., :3]


def compose(T1: MoebiusMap, T2: MoebiusMap) -> MoebiusMap:
    """Matrix product; acts as ``T1`` after ``T2``."""
    return MoebiusMap(
        T1.a * T2.a + T1.b * T2.c,
        T1.a * T2.b + T1.b * T2.d,
        T1.c * T2.a + T1.d * T2.c,
        T1.c * T2.b + T1.d * T2.d,
    )


def inverse(T: MoebiusMap) -> MoebiusMap:
    """Adjugate matrix ``((d, -b), (-c, a))``; inverse up to the scalar det."""
    return MoebiusMap(T.d, -T.b, -T.c, T.a)


def classify(T: MoebiusMap, tol: float = 1e-9) -> TransformClass:
    N = T.normalize()
    if abs(N.b) <= tol and abs(N.c) <= tol and abs(N.a - N.d) <= tol:
        return TransformClass.IDENTITY
    tr = N.trace
    if abs(tr.imag) > tol:
        return TransformClass.LOXODROMIC
    size = abs(tr.real)
    if abs(size - 2.0) <= tol:
        return TransformClass.PARABOLIC
    if size > 2.0:
        return TransformClass.HYPERBOLIC
    return TransformClass.ELLIPTIC


def derivative_factor(T: MoebiusMap, p) -> Quaternion:
    """``(ad - bc) (c p + d)^-2``, the multiplier in the covariance law."""
    q = _as_quaternion(p)
    den = Quaternion.coerce(T.c) * q + Quaternion.coerce(T.d)
    if den.norm2() == 0.0:
        raise PoleError(f"c p + d vanishes at {p}", point=p)
    return mul(Quaternion.coerce(T.det), pow_int(den, -2))


def jacobian(T: MoebiusMap, x) -> np.ndarray:
    """True 3x3 differential of the action at the interior point ``x``.

    From ``dT(v) = (a v - T(p) c v)(c p + d)^-1``.  Column ``i`` is the
    image of the ``i``-th coordinate direction.
    """
    M = T.acting()
    q = points_to_q(np.asarray(x, dtype=float))
    den = cmul_left(M.c, q) + complex_to_q(M.d)
    den_inv = qinv(den)
    image = qmul(cmul_left(M.a, q) + complex_to_q(M.b), den_inv)
    basis = np.eye(4)[:3]
    cols = qmul(cmul_left(M.a, basis) - qmul(image, cmul_left(M.c, basis)), den_inv)
    return cols[:, :3].T


def expanded_action(T: MoebiusMap, p: HPoint) -> HPoint:
    """Coordinate formula for the action of a determinant-one map.

    Used as an independent cross-check of :func:`apply`.  Only valid when
    ``ad - bc = 1``.
    """
    z, r = p.z, p.r
    a, b, c, d = T.a, T.b, T.c, T.d
    n2 = abs(c * z + d) ** 2 + abs(c) ** 2 * r * r
    w = ((a * z + b) * (c * z + d).conjugate() + a * c.conjugate() * r * r) / n2
    return HPoint(w.real, w.imag, r / n2)


def isclose_points(p, q, tol: Tolerance = DEFAULT_TOL) -> bool:
    if p is INFINITY or q is INFINITY:
        return p is q
    return _as_quaternion(p).isclose(_as_quaternion(q), tol)
