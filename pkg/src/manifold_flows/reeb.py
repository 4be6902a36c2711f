"""Planar and toral systems built around the Reeb foliation of the solid torus.

Coordinates on a torus are angles ``(u, v)``.  The solid torus is
``D^2 x S^1`` with a point written ``(x, y, phi)``; a Reeb leaf is the graph
``phi = profile(r)`` over the open unit disk, wrapped mod ``2 pi``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import root

TWO_PI = 2.0 * math.pi


class ZeroOnCircleError(ValueError):
    pass


class ClearanceError(ValueError):
    pass


class GluingError(ValueError):
    pass


@dataclass(frozen=True)
class PlanarField:
    """``evaluator(u, v) -> (du, dv)``; arrays broadcast elementwise."""

    evaluator: Callable
    periodic: bool = False
    name: str = ""

    def __call__(self, u, v) -> np.ndarray:
        du, dv = self.evaluator(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        return np.stack(np.broadcast_arrays(du, dv), axis=-1)

    def reversed(self) -> "PlanarField":
        ev = self.evaluator
        return PlanarField(lambda u, v: tuple(-np.asarray(c) for c in ev(u, v)), self.periodic,
                           f"reversed {self.name}".strip())

    def sample_grid(self, n: int = 32, box=((0.0, TWO_PI), (0.0, TWO_PI))):
        """Field on an ``n x n`` grid (endpoint excluded): ``(U, V, values)``."""
        us = np.linspace(box[0][0], box[0][1], n, endpoint=False)
        vs = np.linspace(box[1][0], box[1][1], n, endpoint=False)
        U, V = np.meshgrid(us, vs, indexing="ij")
        return U, V, self(U, V)


def torus_field() -> PlanarField:
    """Gradient of ``cos u + cos v``: a sink, a source and two saddles."""
    return PlanarField(lambda u, v: (-np.sin(u), -np.sin(v)), periodic=True, name="torus")


def find_equilibria(fld: PlanarField, box=((0.0, TWO_PI), (0.0, TWO_PI)), grid: int = 48,
                    tol: float = 1e-10) -> list[tuple[float, float]]:
    """Zeros of the field: grid candidates refined by a root solver.

    Periodic fields have their roots reduced into ``[0, 2 pi)^2``.
    """
    (u0, u1), (v0, v1) = box
    U, V, F = fld.sample_grid(grid, box)
    mag = np.linalg.norm(F, axis=-1)
    du, dv = (u1 - u0) / grid, (v1 - v0) / grid
    # local minima of |F| on the grid (with wrap for periodic fields)
    cand = []
    for i in range(grid):
        for j in range(grid):
            nb = []
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    ii, jj = i + di, j + dj
                    if fld.periodic:
                        ii, jj = ii % grid, jj % grid
                    elif not (0 <= ii < grid and 0 <= jj < grid):
                        continue
                    nb.append(mag[ii, jj])
            if mag[i, j] <= min(nb) and mag[i, j] < 2.0 * max(du, dv) * (1.0 + mag.max()):
                cand.append((U[i, j], V[i, j]))
    found: list[tuple[float, float]] = []
    for c in cand:
        sol = root(lambda z: fld(z[0], z[1]), np.array(c), tol=1e-14)
        z = sol.x
        if not sol.success or np.linalg.norm(fld(z[0], z[1])) > tol:
            continue
        if fld.periodic:
            z = np.mod(z, TWO_PI)
            z[np.abs(z - TWO_PI) < 1e-9] = 0.0
        elif not (u0 <= z[0] <= u1 and v0 <= z[1] <= v1):
            continue
        z[np.abs(z) < 1e-12] = 0.0
        if all(_dist(z, f, fld.periodic) > 1e-6 for f in found):
            found.append((float(z[0]), float(z[1])))
    return sorted(found)


def _dist(a, b, periodic: bool) -> float:
    d = np.abs(np.asarray(a) - np.asarray(b))
    if periodic:
        d = np.minimum(d, TWO_PI - d)
    return float(np.linalg.norm(d))


def equilibrium_index(fld: PlanarField, e, radius: float, samples: int = 720) -> int:
    """Winding number of the field along the circle of ``radius`` about ``e``.

    The sample count is doubled until no angle jump exceeds ``pi/4``.
    """
    samples = max(int(samples), 720)
    for _ in range(8):
        th = np.linspace(0.0, TWO_PI, samples, endpoint=False)
        F = fld(e[0] + radius * np.cos(th), e[1] + radius * np.sin(th))
        mag = np.linalg.norm(F, axis=-1)
        if np.any(mag <= 1e-14 * max(1.0, float(mag.max()))):
            raise ZeroOnCircleError(f"field vanishes on the circle of radius {radius} about {tuple(e)}")
        ang = np.arctan2(F[:, 1], F[:, 0])
        jumps = np.diff(np.concatenate([ang, ang[:1]]))
        jumps = (jumps + math.pi) % TWO_PI - math.pi
        if np.max(np.abs(jumps)) <= math.pi / 4:
            total = float(np.sum(jumps)) / TWO_PI
            return int(round(total))
        samples *= 2
    raise ZeroOnCircleError("winding number did not resolve; field too wild on the circle")


def index_report(fld: PlanarField, equilibria, radii=(0.05, 0.1, 0.2)) -> list[dict]:
    out = []
    for e in equilibria:
        idx = [equilibrium_index(fld, e, r) for r in radii]
        out.append({"point": tuple(map(float, e)), "indices": idx})
    return out


# --- Reeb leaf --------------------------------------------------------------


def reeb_profile(r):
    return np.tan(0.5 * math.pi * np.asarray(r, dtype=float) ** 2)


def reeb_profile_derivative(r):
    r = np.asarray(r, dtype=float)
    return math.pi * r / np.cos(0.5 * math.pi * r * r) ** 2


def reeb_profile_inverse(h):
    return np.sqrt(2.0 * np.arctan(np.asarray(h, dtype=float)) / math.pi)


@dataclass(frozen=True)
class LeafChart:
    """The leaf ``phi = profile(r)`` over the open unit disk.

    The cutting disk ``phi = 0`` meets the leaf at the centre and at the
    circles ``r_k = profile^-1(2 pi k)``: one disk and infinitely many
    cylinders (annuli ``r_k < r < r_{k+1}``).
    """

    profile: Callable = reeb_profile
    derivative: Callable = reeb_profile_derivative
    inverse: Callable = reeb_profile_inverse

    def cut_radius(self, k: int) -> float:
        return float(self.inverse(TWO_PI * k))

    def torus_coords(self, x, y):
        """Chart ``(r, alpha) -> (alpha, profile(r))`` onto the torus, mod ``2 pi``."""
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        r = np.hypot(x, y)
        return np.mod(np.arctan2(y, x), TWO_PI), np.mod(self.profile(r), TWO_PI)


def leaf_embed(chart: LeafChart, u, v) -> np.ndarray:
    """Point ``(x, y, phi)`` of ``D^2 x S^1`` for leaf coordinates ``(u, v)``
    in the open unit disk."""
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    r = np.hypot(u, v)
    if np.any(r >= 1.0):
        raise ValueError("leaf coordinates must lie in the open unit disk")
    return np.stack(np.broadcast_arrays(u, v, np.mod(chart.profile(r), TWO_PI)), axis=-1)


def _smooth_step(s):
    """C-infinity step: 0 for ``s <= 0``, 1 for ``s >= 1``."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class LeafSystem:
    """Planar system on a Reeb leaf (leaf coordinates in the unit disk)."""

    base: PlanarField
    chart: LeafChart
    bands: int = 5
    blend_fraction: float = 0.1

    @property
    def field(self) -> PlanarField:
        return PlanarField(self._eval, periodic=False, name="leaf")

    @property
    def blend_interval(self) -> tuple[float, float]:
        r1, r2 = self.chart.cut_radius(1), self.chart.cut_radius(2)
        return r1 - self.blend_fraction * (r2 - r1), r1

    def pullback(self, x, y):
        """Torus field pulled back through the chart (valid for ``0 < r < 1``)."""
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        r = np.hypot(x, y)
        alpha = np.arctan2(y, x)
        F = self.base(alpha, self.chart.profile(r))
        dalpha = F[..., 0]
        dr = F[..., 1] / self.chart.derivative(r)
        c, s = np.cos(alpha), np.sin(alpha)
        return dr * c - r * s * dalpha, dr * s + r * c * dalpha

    def _eval(self, x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        r = np.hypot(x, y)
        if np.any(r >= 1.0):
            raise ValueError("leaf coordinates must lie in the open unit disk")
        lo, hi = self.blend_interval
        w = _smooth_step((r - lo) / (hi - lo))
        safe = np.where(r > 0.5 * lo, 1.0, 0.0)
        px, py = self.pullback(np.where(safe > 0, x, lo), np.where(safe > 0, y, 0.0))
        return (1 - w) * x + w * px, (1 - w) * y + w * py

    def band_equilibria(self, k: int) -> list[tuple[tuple[float, float], str]]:
        """The four equilibria of band ``k`` (``r_k <= r < r_{k+1}``) with
        their torus type, as leaf coordinates."""
        out = []
        for phi, names in ((0.0, ("sink", "saddle")), (math.pi, ("saddle", "source"))):
            r = float(self.chart.inverse(TWO_PI * k + phi))
            for alpha, kind in zip((0.0, math.pi), names):
                out.append(((r * math.cos(alpha), r * math.sin(alpha)), kind))
        return out

    def equilibria(self) -> list[tuple[tuple[float, float], str]]:
        """Origin source followed by the equilibria of the first ``bands`` bands."""
        eqs = [((0.0, 0.0), "source")]
        for k in range(1, self.bands + 1):
            eqs.extend(self.band_equilibria(k))
        return eqs

    def band_clearance(self, k: int) -> float:
        """Half the smallest distance between equilibria near band ``k``."""
        pts = [p for p, _ in self.band_equilibria(k) + self.band_equilibria(k + 1)]
        d = min(math.dist(a, b) for i, a in enumerate(pts) for b in pts[i + 1:])
        return 0.5 * d


def leaf_system(base: PlanarField, chart: Optional[LeafChart] = None, bands: int = 5) -> LeafSystem:
    """Copies of ``base`` on every cylinder of the leaf plus a source at the origin.

    Inside the first cut circle the field is the radial source ``(x, y)``,
    blended smoothly into the pulled back torus field just inside ``r_1``.
    """
    return LeafSystem(base, chart or LeafChart(), bands)


# --- connected sum ------------------------------------------------------------


@dataclass
class Neck:
    """Annulus ``[0, 1] x S^1`` joining the circle of radius ``rho`` about
    ``p1`` on torus 1 (``s = 0``) to the one about ``p2`` on torus 2
    (``s = 1``); the angle is reversed on the torus-2 side."""

    sys1: PlanarField
    sys2: PlanarField
    p1: tuple[float, float]
    p2: tuple[float, float]
    rho: float

    def end_vectors(self, beta, side: int):
        """``(ds, dbeta)`` of the torus field on the gluing circle."""
        beta = np.asarray(beta, dtype=float)
        if side == 1:
            c, fld, sgn = self.p1, self.sys1, -1.0
            b = beta
        else:
            c, fld, sgn = self.p2, self.sys2, 1.0
            b = -beta
        F = fld(c[0] + self.rho * np.cos(b), c[1] + self.rho * np.sin(b))
        radial = F[..., 0] * np.cos(b) + F[..., 1] * np.sin(b)
        angular = (-F[..., 0] * np.sin(b) + F[..., 1] * np.cos(b)) / self.rho
        # s runs inward on torus 1 and outward on torus 2
        return sgn * radial, angular if side == 1 else -angular

    def __call__(self, s, beta):
        s = np.asarray(s, dtype=float)
        w = _smooth_step(s)
        ds1, db1 = self.end_vectors(beta, 1)
        ds2, db2 = self.end_vectors(beta, 2)
        return (1 - w) * ds1 + w * ds2, (1 - w) * db1 + w * db2


@dataclass
class GenusTwoSystem:
    sys1: PlanarField
    sys2: PlanarField
    removed1: tuple[float, float]
    removed2: tuple[float, float]
    rho: float
    neck: Neck
    singular_line: dict = field(default_factory=dict)

    def equilibria(self) -> list[tuple[int, tuple[float, float]]]:
        """``(piece, point)`` for every equilibrium outside the removed disks."""
        out = []
        for piece, fld, c in ((1, self.sys1, self.removed1), (2, self.sys2, self.removed2)):
            for e in find_equilibria(fld):
                if _dist(e, c, fld.periodic) > self.rho:
                    out.append((piece, e))
        return out

    def indices(self, radius: float = 0.1) -> list[int]:
        fields = {1: self.sys1, 2: self.sys2}
        return [equilibrium_index(fields[p], e, radius) for p, e in self.equilibria()]

    def index_sum(self, radius: float = 0.1) -> int:
        return int(sum(self.indices(radius)))

    def neck_flux_sign(self, n: int = 360) -> tuple[float, float]:
        """Smallest ``ds`` at each end of the neck (positive: flows 1 -> 2)."""
        beta = np.linspace(0.0, TWO_PI, n, endpoint=False)
        return float(np.min(self.neck.end_vectors(beta, 1)[0])), float(np.min(self.neck.end_vectors(beta, 2)[0]))


def connected_sum_field(sys1: PlanarField, sys2: PlanarField, rho: float = 0.5,
                        sink=None, source=None) -> GenusTwoSystem:
    """Genus-2 system: remove a disk about the sink of ``sys1`` and about the
    source of ``sys2`` and join them by a neck carrying the flow across.

    ``sys2`` is normally ``sys1.reversed()``; then both removed points are
    ``(0, 0)`` for :func:`torus_field`.
    """
    if not rho > 0:
        raise ClearanceError("neck radius must be positive")
    eq1, eq2 = find_equilibria(sys1), find_equilibria(sys2)
    sink = sink if sink is not None else _classify_pick(sys1, eq1, "sink")
    source = source if source is not None else _classify_pick(sys2, eq2, "source")
    for fld, eqs, c in ((sys1, eq1, sink), (sys2, eq2, source)):
        others = [_dist(e, c, fld.periodic) for e in eqs if _dist(e, c, fld.periodic) > 1e-9]
        clearance = min(others) if others else math.inf
        if rho >= clearance:
            raise ClearanceError(f"neck radius {rho} exceeds the clearance {clearance:.6g} at {c}")
    neck = Neck(sys1, sys2, tuple(sink), tuple(source), rho)
    line = {
        "description": "leaf ray alpha = 0 from the leaf origin of each solid torus to the removed point",
        "torus1": {"leaf_origin": (0.0, 0.0, 0.0), "boundary_point": tuple(map(float, sink))},
        "torus2": {"leaf_origin": (0.0, 0.0, 0.0), "boundary_point": tuple(map(float, source))},
    }
    return GenusTwoSystem(sys1, sys2, tuple(sink), tuple(source), rho, neck, line)


def _classify_pick(fld: PlanarField, eqs, kind: str):
    h = 1e-6
    for e in eqs:
        J = np.empty((2, 2))
        for i in range(2):
            d = np.zeros(2)
            d[i] = h
            J[:, i] = (fld(*(np.array(e) + d)) - fld(*(np.array(e) - d))) / (2 * h)
        ev = np.linalg.eigvals(J).real
        if kind == "sink" and np.all(ev < 0) or kind == "source" and np.all(ev > 0):
            return e
    raise ClearanceError(f"no {kind} found")


def invariant_line_residual(system: LeafSystem, n: int = 200) -> float:
    """Largest normal component of the leaf field along the ray ``alpha = 0``."""
    r = np.linspace(0.0, 0.999, n)
    F = system.field(r, np.zeros_like(r))
    return float(np.max(np.abs(F[..., 1])))


# --- Heegaard gluing --------------------------------------------------------


def _check_unimodular(M) -> np.ndarray:
    M = np.asarray(M)
    if M.shape != (2, 2) or not np.all(np.equal(np.round(M), M)):
        raise GluingError(f"gluing matrix must be an integer 2x2 matrix, got {M.tolist()}")
    det = round(float(np.linalg.det(M)))
    if abs(det) != 1:
        raise GluingError(f"gluing matrix has determinant {det}, not +-1")
    return M.astype(float)


@dataclass(frozen=True)
class HeegaardGluing:
    """``psi`` per torus piece (one for genus 1, two for genus 2)."""

    genus: int
    psi: tuple

    def __post_init__(self):
        if self.genus not in (1, 2):
            raise GluingError(f"genus {self.genus} is not supported (only 1 and 2)")
        mats = self.psi if self.genus == 2 else (self.psi,)
        if len(mats) != self.genus:
            raise GluingError("genus 2 needs one matrix per torus piece")
        for M in mats:
            _check_unimodular(M)

    def matrices(self) -> list[np.ndarray]:
        mats = self.psi if self.genus == 2 else (self.psi,)
        return [np.asarray(M, dtype=float) for M in mats]


def homotopy_matrix(psi, t: float) -> np.ndarray:
    """``(1 - t) I + t psi^-1`` on angle coordinates."""
    A = np.round(np.linalg.inv(_check_unimodular(psi)))
    return np.eye(2) + t * (A - np.eye(2))


def pushforward(fld: PlanarField, psi) -> PlanarField:
    """``(psi^-1)_* X = psi^* X``: the field ``y -> psi^-1 X(psi y)``."""
    M = _check_unimodular(psi)
    A = np.round(np.linalg.inv(M))

    def ev(u, v):
        y0 = M[0, 0] * u + M[0, 1] * v
        y1 = M[1, 0] * u + M[1, 1] * v
        F = fld(y0, y1)
        return A[0, 0] * F[..., 0] + A[0, 1] * F[..., 1], A[1, 0] * F[..., 0] + A[1, 1] * F[..., 1]

    return PlanarField(ev, fld.periodic, f"twisted {fld.name}".strip())


def pullback(fld: PlanarField, psi) -> PlanarField:
    """``psi^* X``, computed with a general linear solve (independent of
    :func:`pushforward`)."""
    M = _check_unimodular(psi)

    def ev(u, v):
        pts = np.stack(np.broadcast_arrays(u, v), axis=-1)
        F = fld(*np.moveaxis(pts @ M.T, -1, 0))
        out = np.linalg.solve(M, F.reshape(-1, 2).T).T.reshape(F.shape)
        return out[..., 0], out[..., 1]

    return PlanarField(ev, fld.periodic, f"pullback {fld.name}".strip())


@dataclass
class CollarSample:
    t: float
    points: np.ndarray  # (n, n, 2) angles mod 2 pi
    vectors: np.ndarray  # (n, n, 2)


@dataclass
class HeegaardResult:
    gluing: HeegaardGluing
    collar: list[list[CollarSample]]  # per piece, per t
    boundary_residual: float

    def at(self, piece: int, t: float) -> CollarSample:
        for c in self.collar[piece]:
            if c.t == t:
                return c
        raise KeyError(t)


def collar_sample(X2: PlanarField, psi, t: float, n: int = 32) -> CollarSample:
    """Push the sampled ``X2`` forward by the homotopy matrix at parameter ``t``."""
    U, V, F = X2.sample_grid(n)
    M = homotopy_matrix(psi, t)
    pts = np.stack([U, V], axis=-1)
    if np.array_equal(M, np.eye(2)):
        return CollarSample(t, pts, F)
    return CollarSample(t, np.mod(pts @ M.T, TWO_PI), F @ M.T)


def heegaard_glue(X1, X2, gluing: HeegaardGluing, ts: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
                  n: int = 32) -> HeegaardResult:
    """Twist ``X2`` across the collar and compare the result with ``X1`` at
    the boundary.

    For genus 2, ``X1`` and ``X2`` are pairs of fields, one per torus piece
    of the connected-sum charts.
    """
    mats = gluing.matrices()
    X1s = list(X1) if gluing.genus == 2 else [X1]
    X2s = list(X2) if gluing.genus == 2 else [X2]
    if len(X1s) != gluing.genus or len(X2s) != gluing.genus:
        raise GluingError("need one boundary field per torus piece")
    collar, worst = [], 0.0
    for f1, f2, M in zip(X1s, X2s, mats):
        collar.append([collar_sample(f2, M, float(t), n) for t in ts])
        U, V, F1 = f1.sample_grid(n)
        F2 = pushforward(f2, M)(U, V)
        worst = max(worst, float(np.max(np.linalg.norm(F2 - F1, axis=-1) / (1.0 + np.linalg.norm(F1, axis=-1)))))
    return HeegaardResult(gluing, collar, worst)


def write_grid_csv(fld: PlanarField, path, n: int = 32, box=((0.0, TWO_PI), (0.0, TWO_PI))):
    U, V, F = fld.sample_grid(n, box)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", "du", "dv"])
        for u, v, f in zip(U.ravel(), V.ravel(), F.reshape(-1, 2)):
            w.writerow([repr(float(u)), repr(float(v)), repr(float(f[0])), repr(float(f[1]))])
