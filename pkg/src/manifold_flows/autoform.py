"""Theta series, the modified theta series and automorphic vector fields.

For a truncated group (a :class:`~manifold_flows.group.WordBall`) the
classical series of weight ``m`` is

    theta(p) = sum_i (c_i p + d_i)^(-2m) H(T_i p)

and the modified series used for vector fields is

    theta~(p) = sum_i (c_i p + d_i)^(-(2m-2)) (a_i d_i - b_i c_i)^-1 H(T_i p).

Each term is formed left to right in quaternion arithmetic.  The field is
``F = theta~_1 theta_2^-1`` (division on the right) and transforms as
``F(T p) = (ad - bc)(c p + d)^-2 F(p)`` up to truncation error.

Sums are reduced with :func:`math.fsum` over terms laid out in canonical
word order, so the result does not depend on how the terms were computed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .group import GroupPresentation, GroupWord, WordBall
from .moebius import MoebiusMap, PoleError, apply, compose, derivative_factor
from .quaternion import (
    HPoint,
    Quaternion,
    cmul_left,
    complex_to_q,
    points_to_q,
    qinv,
    qmul,
    qnorm2,
    qpow,
)

OVERFLOW_LIMIT = 1e300
POLE_TOL = 1e-14


class ThetaOverflowError(OverflowError):
    def __init__(self, message, word=None):
        super().__init__(message)
        self.word = word


class EquilibriumPoleError(PoleError):
    """The denominator series vanishes, so the field has a pole."""


def _coerce_coeffs(coeffs) -> np.ndarray:
    out = []
    for c in coeffs:
        out.append(Quaternion.coerce(c).to_array())
    arr = np.array(out, dtype=float).reshape(-1, 4)
    if arr.shape[0] == 0:
        raise ValueError("a polynomial needs at least one coefficient")
    return arr


@dataclass(frozen=True)
class RationalMap:
    """``H(p) = num(p) den(p)^-1`` with coefficients multiplying from the left.

    ``numerator[k]`` is the coefficient of ``p^k``.
    """

    numerator: tuple
    denominator: tuple = ((1.0, 0.0, 0.0, 0.0),)

    def __post_init__(self):
        num = _coerce_coeffs(self.numerator)
        den = _coerce_coeffs(self.denominator)
        if not np.any(den):
            raise ValueError("denominator is identically zero")
        object.__setattr__(self, "numerator", tuple(map(tuple, num)))
        object.__setattr__(self, "denominator", tuple(map(tuple, den)))

    @classmethod
    def constant(cls, value=1.0) -> "RationalMap":
        return cls((value,))

    @classmethod
    def polynomial(cls, *coeffs) -> "RationalMap":
        return cls(tuple(coeffs))

    @staticmethod
    def _horner(coeffs: np.ndarray, q: np.ndarray) -> np.ndarray:
        acc = np.broadcast_to(coeffs[-1], q.shape).copy()
        for c in coeffs[-2::-1]:
            acc = qmul(acc, q) + c
        return acc

    def eval_array(self, q: np.ndarray, words=None) -> np.ndarray:
        num = self._horner(np.array(self.numerator), q)
        if len(self.denominator) == 1 and self.denominator[0] == (1.0, 0.0, 0.0, 0.0):
            return num
        den = self._horner(np.array(self.denominator), q)
        n2 = qnorm2(den)
        bad = n2 <= POLE_TOL ** 2 * (1.0 + qnorm2(q))
        if np.any(bad):
            i = int(np.flatnonzero(np.ravel(bad))[0])
            word = words[i] if words is not None else None
            raise PoleError(f"H has a pole at the image under word {word}", word=word)
        return qmul(num, qinv(den))

    def __call__(self, p) -> Quaternion:
        q = p.quaternion if isinstance(p, HPoint) else Quaternion.coerce(p)
        return Quaternion.from_array(self.eval_array(q.to_array()[None, :])[0])

    def to_json(self) -> dict:
        return {"numerator": [list(c) for c in self.numerator],
                "denominator": [list(c) for c in self.denominator]}

    @classmethod
    def from_json(cls, data) -> "RationalMap":
        return cls(tuple(tuple(c) for c in data["numerator"]),
                   tuple(tuple(c) for c in data.get("denominator", [[1, 0, 0, 0]])))


def example_h1() -> RationalMap:
    """``H1(p) = p + 1/2 + (sqrt3/2) i + 5 j`` from the worked example."""
    return RationalMap.polynomial((0.5, math.sqrt(3) / 2, 5.0, 0.0), 1.0)


def example_h2() -> RationalMap:
    return RationalMap.constant(1.0)


@dataclass(frozen=True)
class ThetaConfig:
    m: int
    H: RationalMap
    ball: WordBall
    modified: bool = False

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"weight m must be >= 2 for an invariant field (got m={self.m})")

    @property
    def exponent(self) -> int:
        return 2 * self.m - 2 if self.modified else 2 * self.m


def _term_array(a, b, c, d, q, H: RationalMap, exponent: int, modified: bool, words=None):
    """Terms for matrices ``(a, b, c, d)`` at quaternion points ``q``.

    All arrays broadcast against each other; returns ``(..., 4)``.
    """
    a, b, c, d = (np.asarray(v, dtype=complex) for v in (a, b, c, d))
    det = a * d - b * c
    den = cmul_left(c, q) + complex_to_q(d)
    n2 = qnorm2(den)
    bad = n2 <= POLE_TOL ** 2
    if np.any(bad):
        i = int(np.flatnonzero(np.ravel(bad))[0])
        word = words[i] if words is not None and i < len(words) else None
        raise PoleError(f"c p + d vanishes for word {word}", word=word)
    # acting representative for T_i(p): rescale when det is not positive real
    s = np.where((det.imag == 0) & (det.real > 0), 1.0 + 0j, 1 / np.sqrt(det.astype(complex)))
    act_den = cmul_left(s * c, q) + complex_to_q(s * d)
    image = qmul(cmul_left(s * a, q) + complex_to_q(s * b), qinv(act_den))
    h = H.eval_array(image, words)
    factor = qpow(den, -exponent)
    if modified:
        factor = qmul(factor, complex_to_q(np.broadcast_to(1 / det, factor.shape[:-1])))
    return qmul(factor, h)


def _fsum_rows(terms: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(terms[:, k]) for k in range(4)])


def theta_terms(cfg: ThetaConfig, p, workers: Optional[int] = None) -> np.ndarray:
    """All series terms at ``p`` as an ``(n, 4)`` array in canonical order."""
    hp = p if isinstance(p, HPoint) else HPoint.from_quaternion(Quaternion.coerce(p))
    if not hp.is_interior():
        raise ValueError("theta series are evaluated at interior points only")
    q = hp.quaternion.to_array()
    a, b, c, d = cfg.ball.coefficients()
    words = cfg.ball.words
    n = len(a)

    def chunk(lo, hi):
        # overflow is detected and reported below, not warned about here
        with np.errstate(over="ignore", invalid="ignore"):
            return _term_array(a[lo:hi], b[lo:hi], c[lo:hi], d[lo:hi], q[None, :], cfg.H,
                               cfg.exponent, cfg.modified, words[lo:hi])

    if workers and workers > 1 and n > 1:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda lh: chunk(*lh), zip(bounds[:-1], bounds[1:])))
        terms = np.concatenate(parts, axis=0)
    else:
        terms = chunk(0, n)
    mags = np.sqrt(qnorm2(terms))
    if not np.all(np.isfinite(mags)) or np.any(mags > OVERFLOW_LIMIT):
        i = int(np.flatnonzero(~np.isfinite(mags) | (mags > OVERFLOW_LIMIT))[0])
        raise ThetaOverflowError(f"theta term for word {words[i]} exceeds {OVERFLOW_LIMIT:g}",
                                 word=words[i])
    return terms


def eval_theta(cfg: ThetaConfig, p, workers: Optional[int] = None) -> Quaternion:
    return Quaternion.from_array(_fsum_rows(theta_terms(cfg, p, workers)))


@dataclass(frozen=True)
class AutomorphicField:
    """``F = theta~_1 / theta_2`` over a shared word ball and weight."""

    h1: RationalMap
    h2: RationalMap
    ball: WordBall
    m: int = 2
    workers: Optional[int] = None

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"weight m must be >= 2 for an invariant field (got m={self.m})")

    @property
    def theta1(self) -> ThetaConfig:
        return ThetaConfig(self.m, self.h1, self.ball, modified=True)

    @property
    def theta2(self) -> ThetaConfig:
        return ThetaConfig(self.m, self.h2, self.ball, modified=False)

    def __call__(self, p) -> Quaternion:
        return eval_field(self, p)

    def velocity(self, x) -> np.ndarray:
        """``(x, y, r)`` components of the field at an array point."""
        return eval_field(self, HPoint.from_array(x)).to_array()[:3]


def eval_field(F: AutomorphicField, p) -> Quaternion:
    t1 = theta_terms(F.theta1, p, F.workers)
    t2 = theta_terms(F.theta2, p, F.workers)
    num = _fsum_rows(t1)
    den = _fsum_rows(t2)
    scale = math.fsum(np.sqrt(qnorm2(t2)))
    if math.sqrt(float(den @ den)) <= 1e-12 * scale or not np.any(den):
        raise EquilibriumPoleError(f"theta_2 vanishes at {p}: the field has a pole there", point=p)
    return Quaternion.from_array(qmul(num, qinv(den)))


def term(F: AutomorphicField, T: MoebiusMap, p, modified: bool = True) -> Quaternion:
    """Single series term for the matrix ``T`` at ``p``."""
    H = F.h1 if modified else F.h2
    k = 2 * F.m - 2 if modified else 2 * F.m
    q = (p if isinstance(p, HPoint) else HPoint.from_quaternion(Quaternion.coerce(p))).quaternion
    out = _term_array(T.a, T.b, T.c, T.d, q.to_array(), H, k, modified)
    return Quaternion.from_array(out)


def _rel(diff: np.ndarray, ref: np.ndarray) -> np.ndarray:
    nd = np.sqrt(qnorm2(diff))
    nr = np.sqrt(qnorm2(ref))
    return nd / np.maximum(nr, 1e-300)


def term_covariance_check(G: GroupPresentation, F: AutomorphicField, w: GroupWord, j: int, p,
                          modified: bool = True) -> float:
    """Relative residual of the per-term identity

        term_w(T_j p) = (c_j p + d_j)^k (a_j d_j - b_j c_j) term_{w T_j}(p)

    with ``k = 2m - 2`` (``2m`` and no determinant for the classical series).
    The identity is exact, independent of truncation.
    """
    res = term_covariance_residuals(G, F, [G.word_map(w)], [p], gens=[j], modified=modified)
    return float(res.max())


def term_covariance_residuals(G: GroupPresentation, F: AutomorphicField, maps: Sequence[MoebiusMap],
                              points, gens: Optional[Sequence[int]] = None,
                              modified: bool = True) -> np.ndarray:
    """Vectorised :func:`term_covariance_check`.

    Returns residuals of shape ``(len(gens), len(maps), len(points))``.
    """
    gens = list(range(len(G.generators))) if gens is None else list(gens)
    H = F.h1 if modified else F.h2
    k = 2 * F.m - 2 if modified else 2 * F.m
    pts = np.array([
        (pt if isinstance(pt, HPoint) else HPoint.from_quaternion(Quaternion.coerce(pt))).to_array()
        for pt in points
    ])
    q = points_to_q(pts)[None, :, :]
    W = np.array([[T.a, T.b, T.c, T.d] for T in maps], dtype=complex)
    out = np.empty((len(gens), len(maps), len(pts)))
    for gi, j in enumerate(gens):
        Tj = G.generators[j]
        qj = points_to_q(Tj.apply_point(pts))[None, :, :]
        lhs = _term_array(W[:, 0, None], W[:, 1, None], W[:, 2, None], W[:, 3, None], qj, H, k, modified)
        WT = np.array([[M.a, M.b, M.c, M.d] for M in (compose(T, Tj) for T in maps)], dtype=complex)
        rhs_term = _term_array(WT[:, 0, None], WT[:, 1, None], WT[:, 2, None], WT[:, 3, None], q, H, k,
                               modified)
        cpd = cmul_left(Tj.c, points_to_q(pts)) + complex_to_q(Tj.d)
        mult = qpow(cpd, k)
        if modified:
            mult = qmul(mult, complex_to_q(np.full(len(pts), Tj.det)))
        rhs = qmul(np.broadcast_to(mult[None, :, :], rhs_term.shape), rhs_term)
        out[gi] = _rel(lhs - rhs, lhs)
    return out


def covariance_residual(F: AutomorphicField, T: MoebiusMap, p) -> float:
    """``|F(T p) - (ad-bc)(cp+d)^-2 F(p)| / (1 + |F(p)|)``.

    With a truncated ball this measures truncation error; it is exactly zero
    only in the limit.
    """
    hp = p if isinstance(p, HPoint) else HPoint.from_quaternion(Quaternion.coerce(p))
    Fp = eval_field(F, hp)
    FTp = eval_field(F, apply(T, hp))
    moved = derivative_factor(T, hp) * Fp
    return (FTp - moved).norm() / (1.0 + Fp.norm())


def example_field(radius: int = 6, m: int = 2, workers: Optional[int] = None) -> AutomorphicField:
    from .group import enumerate_ball, example_presentation

    ball = enumerate_ball(example_presentation(), radius)
    return AutomorphicField(example_h1(), example_h2(), ball, m, workers)
