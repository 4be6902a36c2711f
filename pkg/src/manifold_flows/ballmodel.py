"""Two regular ideal tetrahedra in the Poincare ball and their face pairing.

Vertices of ``T1`` are labelled ``a b c d`` and face ``X`` is the face
opposite vertex ``x``.  ``T2`` is a labelled copy with primed labels.  A
pairing sends each face ``X'`` of ``T2`` to face ``X`` of ``T1`` together with
a bijection of the three vertices involved.

When ``T2`` sits at the same coordinates as ``T1``, the gluing across face
``X`` is reflection in ``X`` after the tetrahedral symmetry ``sigma``; it is
orientation preserving exactly when ``sigma`` is odd.  For even vertex maps
``T2`` is taken as the mirror image ``-T1`` instead, so that every pairing
is again a Moebius map of the ball.

Pairing isometries are built on the boundary sphere as the Moebius map
through three point correspondences and extended to the ball by
conjugating the upper half-space action with the Cayley transform.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .moebius import MoebiusMap

LABELS = ("a", "b", "c", "d")
FACES = ("A", "B", "C", "D")

_S3 = 1.0 / math.sqrt(3.0)
REGULAR_VERTICES = np.array(
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
) * _S3


class InvalidPairingError(ValueError):
    pass


def face_of(vertex: str) -> str:
    return vertex.upper()


def face_vertices(face: str) -> tuple[str, ...]:
    """The three vertices of ``face`` (everything but the opposite vertex)."""
    return tuple(v for v in LABELS if v != face.lower())


@dataclass(frozen=True)
class IdealTetrahedron:
    name: str
    vertices: dict  # label -> unit vector
    prime: str = ""

    def __post_init__(self):
        pts = np.array([self.vertices[v] for v in LABELS], dtype=float)
        if not np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12):
            raise ValueError("ideal vertices must lie on the unit sphere")
        gram = pts @ pts.T
        off = gram[~np.eye(4, dtype=bool)]
        if np.min(np.abs(off - 1.0)) < 1e-12:
            raise ValueError("vertices must be distinct")
        if np.ptp(off) > 1e-9:
            raise ValueError("tetrahedron is not regular")

    def vertex(self, label: str) -> np.ndarray:
        return np.asarray(self.vertices[label.rstrip("'")], dtype=float)

    @property
    def faces(self) -> dict[str, tuple[str, ...]]:
        return {f + self.prime: tuple(v + self.prime for v in face_vertices(f)) for f in FACES}

    @property
    def edges(self) -> list[str]:
        return [edge_name(u, v, self.prime) for u, v in itertools.combinations(LABELS, 2)]

    def face_sphere(self, face: str) -> tuple[np.ndarray, float]:
        """Centre and radius of the sphere (orthogonal to the unit sphere)
        carrying ``face``."""
        pts = np.array([self.vertex(v) for v in face_vertices(face.rstrip("'"))])
        # centre c with c . w = 1 for each vertex w (orthogonality + incidence)
        c = np.linalg.solve(pts, np.ones(3))
        return c, math.sqrt(c @ c - 1.0)

    def sample_face(self, face: str, n: int, rng: np.random.Generator) -> np.ndarray:
        """Points of the face, drawn in the Klein model and converted to
        Poincare coordinates."""
        pts = np.array([self.vertex(v) for v in face_vertices(face.rstrip("'"))])
        w = rng.dirichlet(np.ones(3), size=n)
        w = 0.05 + 0.85 * w  # keep away from the ideal vertices
        w /= w.sum(axis=1, keepdims=True)
        k = w @ pts
        s = np.sqrt(np.maximum(0.0, 1.0 - np.sum(k * k, axis=1)))
        return k / (1.0 + s)[:, None]

    def to_json(self) -> dict:
        return {"name": self.name, "vertices": {v + self.prime: list(map(float, self.vertices[v]))
                                                for v in LABELS}}


def edge_name(u: str, v: str, prime: str = "") -> str:
    u, v = sorted((u.rstrip("'"), v.rstrip("'")))
    return f"{u}{prime}{v}{prime}"


def regular_tetrahedron(name: str = "T1", prime: str = "", mirror: bool = False) -> IdealTetrahedron:
    sign = -1.0 if mirror else 1.0
    return IdealTetrahedron(name, {v: tuple(sign * REGULAR_VERTICES[i]) for i, v in enumerate(LABELS)}, prime)


@dataclass(frozen=True)
class FacePairing:
    """``table[X] = {u: sigma(u)}`` sends face ``X'`` of ``T2`` to face ``X``
    of ``T1``, vertex ``u'`` going to ``sigma(u)``.  Keys are unprimed."""

    table: dict

    def __post_init__(self):
        if sorted(self.table) != list(FACES):
            raise InvalidPairingError("every face of T2 needs exactly one partner face of T1")
        for f, sigma in self.table.items():
            verts = face_vertices(f)
            if sorted(sigma) != sorted(verts) or sorted(sigma.values()) != sorted(verts):
                raise InvalidPairingError(f"face {f}': vertex map {sigma} is not a bijection of {verts}")

    def perm(self, face: str) -> dict[str, str]:
        """Full vertex permutation for ``face`` (opposite vertex fixed)."""
        p = dict(self.table[face])
        p[face.lower()] = face.lower()
        return p

    def is_odd(self, face: str) -> bool:
        return _parity([LABELS.index(self.perm(face)[v]) for v in LABELS]) == 1

    @property
    def orientable(self) -> bool:
        """All vertex maps of one parity (then ``T2`` can be oriented to match)."""
        return len({self.is_odd(f) for f in FACES}) == 1

    @property
    def mirrored(self) -> bool:
        """Whether ``T2`` must be the mirror image of ``T1``."""
        return self.orientable and not self.is_odd("A")

    def to_json(self) -> dict:
        return {f + "'": [f, {u + "'": s for u, s in sorted(sig.items())}] for f, sig in sorted(self.table.items())}

    @classmethod
    def from_json(cls, data) -> "FacePairing":
        table = {}
        for src, (dst, sigma) in data.items():
            if src.rstrip("'") != dst:
                raise InvalidPairingError(f"face {src} must be paired with {src.rstrip(chr(39))}")
            table[dst] = {u.rstrip("'"): s for u, s in sigma.items()}
        return cls(table)

    @classmethod
    def from_perms(cls, perms: dict) -> "FacePairing":
        """From ``{face: 'bcd'->image string}``, e.g. ``{'A': 'bdc'}`` maps
        ``b'c'd'`` to ``b d c``."""
        table = {}
        for f, img in perms.items():
            verts = face_vertices(f)
            table[f] = dict(zip(verts, img))
        return cls(table)


def _parity(perm) -> int:
    """0 for even permutations of ``range(n)``, 1 for odd."""
    perm = list(perm)
    seen, parity = set(), 0
    for i in range(len(perm)):
        if i in seen:
            continue
        j, length = i, 0
        while j not in seen:
            seen.add(j)
            j = perm[j]
            length += 1
        parity ^= (length - 1) & 1
    return parity


# 2 edge classes of 6 and first homology Z (the odd-parity gluings with two
# classes of 6 give the sister manifold, first homology Z + Z/5)
FIGURE_EIGHT_PERMS = {"A": "cdb", "B": "cda", "C": "bda", "D": "bca"}


def figure_eight_pairing() -> FacePairing:
    return FacePairing.from_perms(FIGURE_EIGHT_PERMS)


def build_complex(pairing: Optional[FacePairing] = None):
    """``(T1, T2, pairing)`` for the figure-eight gluing (or a user table)."""
    pairing = pairing or figure_eight_pairing()
    return regular_tetrahedron("T1"), regular_tetrahedron("T2", "'", pairing.mirrored), pairing


# --- edge cycles ------------------------------------------------------------


@dataclass
class EdgeClass:
    edges: list[str]
    faces: list[str]  # faces crossed in order, primed for T2 -> T1 crossings
    relation: dict = field(default_factory=dict)  # face -> signed exponent

    def __len__(self):
        return len(self.edges)


def edge_cycles(pairing: FacePairing) -> list[EdgeClass]:
    """Edge classes of the glued complex, following identifications around
    each edge until the cycle closes."""
    visited: set[str] = set()
    classes = []
    for u, v in itertools.combinations(LABELS, 2):
        start = edge_name(u, v)
        if start in visited:
            continue
        # walk: oriented edge (u, v) of T1, leave through one adjacent face
        other = [w for w in LABELS if w not in (u, v)]
        edge, tet, exit_face = (u, v), 1, other[0].upper()
        edges, faces, rel = [], [], {}
        for _ in range(25):
            name = edge_name(*edge, "" if tet == 1 else "'")
            if name in visited:
                if name == start and tet == 1:
                    if edge != (u, v):
                        raise InvalidPairingError(f"edge class of {start} closes with reversed orientation")
                    break
                raise InvalidPairingError(f"edge cycle through {start} does not close")
            visited.add(name)
            edges.append(name)
            if tet == 1:
                # T1 face X -> T2 face X' via sigma_X^-1
                inv = {s: t for t, s in pairing.perm(exit_face).items()}
                new = (inv[edge[0]], inv[edge[1]])
                faces.append(exit_face)
                rel[exit_face] = rel.get(exit_face, 0) - 1
            else:
                sigma = pairing.perm(exit_face)
                new = (sigma[edge[0]], sigma[edge[1]])
                faces.append(exit_face + "'")
                rel[exit_face] = rel.get(exit_face, 0) + 1
            entry_face = exit_face
            edge, tet = new, 3 - tet
            rest = [w for w in LABELS if w not in edge]
            exit_face = (rest[0] if rest[0].upper() != entry_face else rest[1]).upper()
        else:
            raise InvalidPairingError(f"edge cycle through {start} does not close")
        classes.append(EdgeClass(edges, faces, rel))
    covered = sorted(e for c in classes for e in c.edges)
    if len(covered) != 12 or len(set(covered)) != 12:
        raise InvalidPairingError("edge classes do not partition the 12 edges")
    return classes


# --- dihedral angles --------------------------------------------------------


def dihedral_angle(tet: IdealTetrahedron, f1: str, f2: str) -> float:
    """Interior angle between two faces, from their orthogonal spheres."""
    c1, r1 = tet.face_sphere(f1)
    c2, r2 = tet.face_sphere(f2)
    d = np.linalg.norm(c1 - c2)
    # angle between the outward sphere normals at a common point
    cos_between = (r1 * r1 + r2 * r2 - d * d) / (2 * r1 * r2)
    return math.pi - math.acos(max(-1.0, min(1.0, cos_between)))


@dataclass
class DihedralReport:
    sums: list[float]
    lengths: list[int]
    tol: float = 1e-6

    @property
    def passed(self) -> list[bool]:
        return [abs(s - 2 * math.pi) <= self.tol for s in self.sums]

    @property
    def ok(self) -> bool:
        return all(self.passed)

    def lines(self) -> list[str]:
        out = []
        for i, (n, s, ok) in enumerate(zip(self.lengths, self.sums, self.passed)):
            out.append(f"class {i}: {n} edges, angle sum {s:.12f} ({s / math.pi:.6f} pi) "
                       f"{'ok' if ok else 'NOT 2pi'}")
        return out


def dihedral_check(cycles, tet: Optional[IdealTetrahedron] = None, tol: float = 1e-6) -> DihedralReport:
    """Sum the dihedral angles around each edge class (length list or classes)."""
    tet = tet or regular_tetrahedron()
    sums, lengths = [], []
    for cyc in cycles:
        if isinstance(cyc, EdgeClass):
            total = 0.0
            for e in cyc.edges:
                u, v = e.replace("'", "")
                w1, w2 = (w for w in LABELS if w not in (u, v))
                total += dihedral_angle(tet, w1.upper(), w2.upper())
            n = len(cyc)
        else:
            n = int(cyc)
            total = n * dihedral_angle(tet, "A", "B")
        sums.append(total)
        lengths.append(n)
    return DihedralReport(sums, lengths, tol)


# --- pairing isometries -----------------------------------------------------


_E3 = np.array([0.0, 0.0, 1.0])
_FLIP = np.diag([1.0, 1.0, -1.0])


def _inversion(x):
    v = np.asarray(x, dtype=float) - _E3
    return _E3 + 2.0 * v / np.sum(v * v, axis=-1, keepdims=True)


def _inversion_jacobian(x):
    v = np.asarray(x, dtype=float) - _E3
    n2 = v @ v
    return 2.0 / n2 * (np.eye(3) - 2.0 * np.outer(v, v) / n2)


def ball_to_halfspace(x) -> np.ndarray:
    """Cayley transform ``B^3 -> U^3`` extending stereographic projection."""
    return _inversion(x) @ _FLIP


def halfspace_to_ball(y) -> np.ndarray:
    return _inversion(np.asarray(y, dtype=float) @ _FLIP)


def stereographic(v) -> complex:
    v = np.asarray(v, dtype=float)
    return complex(v[0], v[1]) / (1.0 - v[2])


def three_point_map(z, w) -> MoebiusMap:
    """Moebius map of the Riemann sphere sending ``z[i]`` to ``w[i]``."""

    def to_standard(p1, p2, p3):
        # sends p1, p2, p3 to 0, 1, infinity
        return np.array([[p2 - p3, -p1 * (p2 - p3)], [p2 - p1, -p3 * (p2 - p1)]], dtype=complex)

    A = to_standard(*z)
    B = to_standard(*w)
    return MoebiusMap.from_matrix(np.linalg.inv(B) @ A)


@dataclass(frozen=True)
class BallIsometry:
    """Isometry of the ball conjugate to a Moebius map of upper half-space."""

    moebius: MoebiusMap

    def apply_point(self, x) -> np.ndarray:
        return halfspace_to_ball(self.moebius.apply_point(ball_to_halfspace(x)))

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = ball_to_halfspace(x)
        J1 = _FLIP @ _inversion_jacobian(x)
        J2 = self.moebius.jacobian(y)
        z = self.moebius.apply_point(y)
        J3 = _inversion_jacobian(z @ _FLIP) @ _FLIP
        return J3 @ J2 @ J1

    def apply_boundary(self, v) -> np.ndarray:
        """Action on a point of the unit sphere, via the Riemann sphere."""
        z = stereographic(v)
        M = self.moebius
        w = (M.a * z + M.b) / (M.c * z + M.d)
        d = 1.0 + abs(w) ** 2
        return np.array([2 * w.real / d, 2 * w.imag / d, (abs(w) ** 2 - 1.0) / d])

    def inverse(self) -> "BallIsometry":
        return BallIsometry(self.moebius.matrix_inverse())


def pairing_isometries(T1: IdealTetrahedron, T2: IdealTetrahedron,
                       pairing: FacePairing) -> dict[str, BallIsometry]:
    """``face -> g`` with ``g`` carrying face ``X'`` of ``T2`` onto ``X`` of ``T1``."""
    out = {}
    for f in FACES:
        sigma = pairing.table[f]
        src = [stereographic(T2.vertex(u)) for u in face_vertices(f)]
        dst = [stereographic(T1.vertex(sigma[u])) for u in face_vertices(f)]
        out[f] = BallIsometry(three_point_map(src, dst))
    return out


def vertex_map_residual(T1, T2, pairing, isometries=None) -> float:
    """Largest distance between ``g(u')`` and the labelled target vertex."""
    isometries = isometries or pairing_isometries(T1, T2, pairing)
    worst = 0.0
    for f, g in isometries.items():
        for u, s in pairing.table[f].items():
            worst = max(worst, float(np.linalg.norm(g.apply_boundary(T2.vertex(u)) - T1.vertex(s))))
    return worst


def match_fields(F1: Callable, F2: Callable, T1: IdealTetrahedron, T2: IdealTetrahedron,
                 pairing: FacePairing, n_samples: int = 50, seed: int = 0) -> float:
    """Largest relative mismatch ``|Dg F2(q) - F1(g q)| / (1 + |F1(g q)|)``
    over sampled points ``q`` of the faces of ``T2``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for f, g in pairing_isometries(T1, T2, pairing).items():
        for q in T2.sample_face(f, n_samples, rng):
            gq = g.apply_point(q)
            carried = g.jacobian(q) @ np.asarray(F2(q), dtype=float)
            target = np.asarray(F1(gq), dtype=float)
            worst = max(worst, float(np.linalg.norm(carried - target) / (1.0 + np.linalg.norm(target))))
    return worst


def pullback_field(F1: Callable, T1, T2, pairing: FacePairing) -> Callable:
    """A field on ``T2`` whose restriction to each face is the pullback of
    ``F1`` through that face's pairing isometry (nearest face wins)."""
    isos = pairing_isometries(T1, T2, pairing)
    spheres = {f: T2.face_sphere(f) for f in FACES}

    def F2(q):
        q = np.asarray(q, dtype=float)
        f = min(FACES, key=lambda f: abs(np.linalg.norm(q - spheres[f][0]) - spheres[f][1]))
        g = isos[f]
        return np.linalg.solve(g.jacobian(q), np.asarray(F1(g.apply_point(q)), dtype=float))

    return F2


def edge_relation_matrix(classes: list[EdgeClass]) -> np.ndarray:
    """Rows: abelianised edge relations in the face-pairing generators, plus
    the row killing generator ``A`` (dual spanning tree)."""
    rows = [[c.relation.get(f, 0) for f in FACES] for c in classes]
    rows.append([1, 0, 0, 0])
    return np.array(rows, dtype=int)


def enumerate_pairings(orientable: bool = True):
    """All face pairings ``X' -> X``; only same-parity ones when ``orientable``."""
    opts = [["".join(img) for img in itertools.permutations(face_vertices(f))] for f in FACES]
    for combo in itertools.product(*opts):
        pr = FacePairing.from_perms(dict(zip(FACES, combo)))
        if not orientable or pr.orientable:
            yield pr
