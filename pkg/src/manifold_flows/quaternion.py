"""Hamilton quaternions and points of upper half-space.

Two layers live here.  :class:`Quaternion` is a small immutable value type
used wherever a single number is handled.  The ``q*`` functions operate on
float arrays of shape ``(..., 4)`` holding ``(w, x, y, z)`` components and are
what the theta-series and flow code use for bulk evaluation.

Complex numbers embed as ``w + x i`` (``y = z = 0``) and a point
``p = x + y i + r j`` of upper half-space embeds as the quaternion
``(x, y, r, 0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np


class DomainError(ValueError):
    """Raised when an operation is undefined at its argument (e.g. 1/0)."""


@dataclass(frozen=True)
class Tolerance:
    abs: float = 1e-12
    rel: float = 1e-9

    def close(self, a: float, b: float) -> bool:
        return abs(a - b) <= max(self.abs, self.rel * max(abs(a), abs(b)))


DEFAULT_TOL = Tolerance()

Number = Union[int, float, complex]


@dataclass(frozen=True)
class Quaternion:
    """The quaternion ``w + x i + y j + z k``."""

    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def coerce(cls, value) -> "Quaternion":
        if isinstance(value, Quaternion):
            return value
        if isinstance(value, HPoint):
            return value.quaternion
        if isinstance(value, (int, float, np.floating, np.integer)):
            return cls(float(value))
        if isinstance(value, (complex, np.complexfloating)):
            return cls(float(value.real), float(value.imag))
        arr = np.asarray(value, dtype=float)
        if arr.shape == (4,):
            return cls(*(float(v) for v in arr))
        raise TypeError(f"cannot interpret {value!r} as a quaternion")

    @classmethod
    def from_array(cls, arr) -> "Quaternion":
        w, x, y, z = (float(v) for v in np.asarray(arr, dtype=float).reshape(4))
        return cls(w, x, y, z)

    def to_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w, self.x, self.y, self.z)

    def __iter__(self):
        return iter(self.as_tuple())

    def __add__(self, other):
        o = Quaternion.coerce(other)
        return Quaternion(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)

    __radd__ = __add__

    def __sub__(self, other):
        o = Quaternion.coerce(other)
        return Quaternion(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)

    def __rsub__(self, other):
        return Quaternion.coerce(other) - self

    def __neg__(self):
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Quaternion(self.w * other, self.x * other, self.y * other, self.z * other)
        return mul(self, Quaternion.coerce(other))

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return self * other
        return mul(Quaternion.coerce(other), self)

    def __truediv__(self, other):
        # right division: self * other^-1
        if isinstance(other, (int, float)):
            if other == 0:
                raise DomainError("division by zero")
            return Quaternion(self.w / other, self.x / other, self.y / other, self.z / other)
        return mul(self, inv(Quaternion.coerce(other)))

    def __pow__(self, k: int):
        return pow_int(self, k)

    def conj(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm2(self) -> float:
        return self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z

    def norm(self) -> float:
        return math.sqrt(self.norm2())

    def inv(self) -> "Quaternion":
        return inv(self)

    def is_zero(self) -> bool:
        return self.w == 0 and self.x == 0 and self.y == 0 and self.z == 0

    def isclose(self, other, tol: Tolerance = DEFAULT_TOL) -> bool:
        o = Quaternion.coerce(other)
        diff = (self - o).norm()
        return diff <= max(tol.abs, tol.rel * max(self.norm(), o.norm()))


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def mul(q1: Quaternion, q2: Quaternion) -> Quaternion:
    """Hamilton product ``q1 * q2``."""
    a1, b1, c1, d1 = q1.w, q1.x, q1.y, q1.z
    a2, b2, c2, d2 = q2.w, q2.x, q2.y, q2.z
    return Quaternion(
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    )


def inv(q: Quaternion) -> Quaternion:
    n2 = q.norm2()
    if n2 == 0.0:
        raise DomainError("zero quaternion has no inverse")
    return Quaternion(q.w / n2, -q.x / n2, -q.y / n2, -q.z / n2)


def pow_int(q: Quaternion, k: int) -> Quaternion:
    """Integer power by repeated squaring; negative ``k`` inverts first."""
    k = int(k)
    if k < 0:
        q = inv(q)
        k = -k
    result = ONE
    base = q
    while k:
        if k & 1:
            result = mul(result, base)
        k >>= 1
        if k:
            base = mul(base, base)
    return result


@dataclass(frozen=True)
class HPoint:
    """A point ``x + y i + r j`` of closed upper half-space (``r >= 0``)."""

    x: float
    y: float
    r: float

    @classmethod
    def from_quaternion(cls, q: Quaternion, tol: Tolerance = DEFAULT_TOL) -> "HPoint":
        scale = max(1.0, q.norm())
        if abs(q.z) > max(tol.abs, tol.rel * scale):
            raise DomainError(f"quaternion {q} has a nonzero k-component")
        return cls(q.w, q.x, q.y)

    @classmethod
    def from_array(cls, arr) -> "HPoint":
        x, y, r = (float(v) for v in np.asarray(arr, dtype=float).reshape(3))
        return cls(x, y, r)

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @property
    def quaternion(self) -> Quaternion:
        return Quaternion(self.x, self.y, self.r, 0.0)

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.r])

    def is_interior(self) -> bool:
        return self.r > 0

    def is_boundary(self) -> bool:
        return self.r == 0


# --- array kernel -----------------------------------------------------------


def qarray(w=0.0, x=0.0, y=0.0, z=0.0) -> np.ndarray:
    w, x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (w, x, y, z)))
    return np.stack([w, x, y, z], axis=-1)


def complex_to_q(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    out = np.zeros(c.shape + (4,))
    out[..., 0] = c.real
    out[..., 1] = c.imag
    return out


def points_to_q(pts) -> np.ndarray:
    """``(..., 3)`` points ``(x, y, r)`` to ``(..., 4)`` quaternions."""
    pts = np.asarray(pts, dtype=float)
    out = np.zeros(pts.shape[:-1] + (4,))
    out[..., :3] = pts
    return out


def qmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a1, b1, c1, d1 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    a2, b2, c2, d2 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ],
        axis=-1,
    )


def cmul_left(c: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``c * q`` for complex ``c`` (shape ``(...)``) and quaternions ``q``."""
    c = np.asarray(c, dtype=complex)
    cr, ci = c.real, c.imag
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack([cr * w - ci * x, cr * x + ci * w, cr * y - ci * z, cr * z + ci * y], axis=-1)


def qconj(q: np.ndarray) -> np.ndarray:
    out = -q
    out[..., 0] = q[..., 0]
    return out


def qnorm2(q: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", q, q)


def qinv(q: np.ndarray) -> np.ndarray:
    n2 = qnorm2(q)
    if np.any(n2 == 0.0):
        raise DomainError("zero quaternion has no inverse")
    return qconj(q) / n2[..., None]


def qpow(q: np.ndarray, k: int) -> np.ndarray:
    k = int(k)
    if k < 0:
        q = qinv(q)
        k = -k
    result = np.zeros_like(q)
    result[..., 0] = 1.0
    base = q
    while k:
        if k & 1:
            result = qmul(result, base)
        k >>= 1
        if k:
            base = qmul(base, base)
    return result
