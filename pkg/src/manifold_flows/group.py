"""Group words, truncated word balls, fundamental domains and side pairings."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .moebius import MoebiusMap, compose
from .quaternion import HPoint

Letter = tuple[int, int]


def letter_key(letter: Letter) -> tuple[int, int]:
    # generator index first, then +1 before -1
    return (letter[0], 0 if letter[1] > 0 else 1)


@dataclass(frozen=True)
class GroupWord:
    letters: tuple[Letter, ...] = ()

    def __post_init__(self):
        letters = tuple((int(g), int(e)) for g, e in self.letters)
        for g, e in letters:
            if e not in (1, -1):
                raise ValueError(f"exponent must be +1 or -1, got {e}")
        object.__setattr__(self, "letters", letters)

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def sort_key(self):
        return (len(self.letters), tuple(letter_key(l) for l in self.letters))

    def is_reduced(self) -> bool:
        return all(
            not (u[0] == v[0] and u[1] == -v[1]) for u, v in zip(self.letters, self.letters[1:])
        )

    def inverse(self) -> "GroupWord":
        return GroupWord(tuple((g, -e) for g, e in reversed(self.letters)))

    def __add__(self, other: "GroupWord") -> "GroupWord":
        return GroupWord(self.letters + other.letters)

    def label(self, names: Optional[Sequence[str]] = None) -> str:
        if not self.letters:
            return "I"
        parts = []
        for g, e in self.letters:
            name = names[g] if names else f"g{g}"
            parts.append(name if e == 1 else f"{name}^-1")
        return ".".join(parts)

    @classmethod
    def parse(cls, text: str, names: Sequence[str]) -> "GroupWord":
        text = text.strip()
        if text in ("", "I"):
            return cls()
        letters = []
        for part in text.split("."):
            e = 1
            if part.endswith("^-1"):
                part, e = part[:-3], -1
            letters.append((list(names).index(part), e))
        return cls(tuple(letters))


IDENTITY_WORD = GroupWord()


@dataclass(frozen=True)
class GroupPresentation:
    generators: tuple[MoebiusMap, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        gens = tuple(self.generators)
        names = tuple(self.names) or tuple(f"T{i + 1}" for i in range(len(gens)))
        if len(names) != len(gens):
            raise ValueError("one name per generator is required")
        if len(set(names)) != len(names):
            raise ValueError("generator names must be unique")
        for g in gens:
            if g.det == 0:
                raise ValueError("generator with zero determinant")
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "names", names)

    @property
    def labels(self) -> list[str]:
        out = []
        for n in self.names:
            out += [n, f"{n}^-1"]
        return out

    def letters(self) -> list[Letter]:
        return sorted(
            ((g, e) for g in range(len(self.generators)) for e in (1, -1)), key=letter_key
        )

    def letter_map(self, letter: Letter) -> MoebiusMap:
        g, e = letter
        T = self.generators[g]
        return T if e == 1 else T.matrix_inverse()

    def word_map(self, word: GroupWord) -> MoebiusMap:
        M = MoebiusMap.identity()
        for letter in word:
            M = compose(M, self.letter_map(letter))
        return M

    def word(self, text: str) -> GroupWord:
        return GroupWord.parse(text, self.names)


def canonical_key(T: MoebiusMap, tol: float = 1e-9) -> tuple:
    """Hashable key identifying ``T`` up to a nonzero complex scalar."""
    N = T.normalize()
    entries = [N.a, N.b, N.c, N.d]
    snapped = []
    for z in entries:
        re = 0.0 if abs(z.real) <= tol else z.real
        im = 0.0 if abs(z.imag) <= tol else z.imag
        snapped.append(complex(re, im))
    lead = next(z for z in snapped if z != 0)
    arg = cmath.phase(lead)
    if not (0.0 <= arg < math.pi):
        snapped = [-z for z in snapped]
    digits = max(0, int(round(-math.log10(tol))))
    out = []
    for z in snapped:
        out += [round(z.real, digits) + 0.0, round(z.imag, digits) + 0.0]
    return tuple(out)


@dataclass
class WordBall:
    """All group elements of word length at most ``radius``."""

    presentation: GroupPresentation
    radius: int
    words: list[GroupWord]
    maps: list[MoebiusMap]
    merges: int = 0
    _coeffs: Optional[tuple[np.ndarray, ...]] = field(default=None, repr=False)

    def __len__(self):
        return len(self.words)

    def __iter__(self):
        return iter(zip(self.words, self.maps))

    @property
    def entries(self) -> list[tuple[GroupWord, MoebiusMap]]:
        return list(zip(self.words, self.maps))

    def coefficients(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Arrays ``a, b, c, d`` in canonical order."""
        if self._coeffs is None:
            arr = np.array([[T.a, T.b, T.c, T.d] for T in self.maps], dtype=complex)
            self._coeffs = (arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])
        return self._coeffs

    def subset(self, indices: Sequence[int]) -> "WordBall":
        idx = sorted(set(indices))
        return WordBall(
            self.presentation, self.radius, [self.words[i] for i in idx], [self.maps[i] for i in idx]
        )

    def label(self, i: int) -> str:
        return self.words[i].label(self.presentation.names)


def enumerate_ball(G: GroupPresentation, N: int, tol: float = 1e-9) -> WordBall:
    """Breadth-first enumeration of reduced words of length ``<= N``.

    Words whose matrices agree up to scalar are merged, keeping the first in
    canonical (length, then lexicographic) order.  Only stored words are
    extended, so the ball is prefix closed.
    """
    if N < 0:
        raise ValueError("ball radius must be non-negative")
    words = [IDENTITY_WORD]
    maps = [MoebiusMap.identity()]
    seen = {canonical_key(maps[0], tol)}
    merges = 0
    frontier = [0]
    letters = G.letters()
    letter_maps = {l: G.letter_map(l) for l in letters}
    for _ in range(N):
        nxt = []
        for idx in frontier:
            w, M = words[idx], maps[idx]
            last = w.letters[-1] if w.letters else None
            for l in letters:
                if last is not None and l[0] == last[0] and l[1] == -last[1]:
                    continue
                T = compose(M, letter_maps[l])
                key = canonical_key(T, tol)
                if key in seen:
                    merges += 1
                    continue
                seen.add(key)
                words.append(GroupWord(w.letters + (l,)))
                maps.append(T)
                nxt.append(len(words) - 1)
        frontier = nxt
    return WordBall(G, N, words, maps, merges)


# --- fundamental domains ----------------------------------------------------


@dataclass(frozen=True)
class HalfSpace:
    """``normal . x <= offset``; the bounding plane is ``normal . x = offset``."""

    normal: tuple[float, float, float]
    offset: float

    def value(self, x: np.ndarray) -> np.ndarray:
        """Signed violation; positive outside."""
        n = np.asarray(self.normal, dtype=float)
        return np.asarray(x, dtype=float) @ n - self.offset

    def project(self, x: np.ndarray) -> np.ndarray:
        n = np.asarray(self.normal, dtype=float)
        return x - np.outer(self.value(x), n) / (n @ n)


@dataclass(frozen=True)
class Hemisphere:
    """Sphere centred on the boundary plane ``r = 0``.

    ``outside=True`` keeps points with ``|x - centre| >= radius``.
    """

    center: tuple[float, float]
    radius: float
    outside: bool = True

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        c = np.array([self.center[0], self.center[1], 0.0])
        dist = np.linalg.norm(x - c, axis=-1)
        return (self.radius - dist) if self.outside else (dist - self.radius)

    def project(self, x: np.ndarray) -> np.ndarray:
        c = np.array([self.center[0], self.center[1], 0.0])
        v = x - c
        n = np.linalg.norm(v, axis=-1, keepdims=True)
        return c + self.radius * v / n


@dataclass(frozen=True)
class EuclideanIsometry:
    """``x -> A x + b`` on Euclidean 3-space."""

    A: tuple
    b: tuple

    @classmethod
    def translation(cls, t) -> "EuclideanIsometry":
        return cls(tuple(map(tuple, np.eye(3))), tuple(float(v) for v in t))

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.A, dtype=float)

    @property
    def offset(self) -> np.ndarray:
        return np.asarray(self.b, dtype=float)

    def apply_point(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.matrix.T + self.offset

    def jacobian(self, x=None) -> np.ndarray:
        return self.matrix

    def inverse(self) -> "EuclideanIsometry":
        Ainv = np.linalg.inv(self.matrix)
        return EuclideanIsometry(tuple(map(tuple, Ainv)), tuple(-Ainv @ self.offset))

    def is_inverse_of(self, other, tol: float = 1e-9) -> bool:
        if not isinstance(other, EuclideanIsometry):
            return False
        A = self.matrix @ other.matrix
        b = self.matrix @ other.offset + self.offset
        return bool(np.allclose(A, np.eye(3), atol=tol) and np.allclose(b, 0.0, atol=tol))

    def to_json(self) -> dict:
        return {"A": [list(r) for r in self.A], "b": list(self.b)}


@dataclass(frozen=True)
class Side:
    """A labelled face with its partner and the map ``tau`` carrying the
    partner face onto this one."""

    label: str
    constraint: object
    partner: str
    tau: object
    word: Optional[GroupWord] = None


@dataclass
class FundamentalDomain:
    """Intersection of side constraints and optional truncation bounds.

    ``bounds`` are constraints that limit the region (for integration or
    display) without being paired sides.  ``sample_box`` is an axis-aligned
    box used only when sampling face points.
    """

    sides: dict[str, Side]
    bounds: list = field(default_factory=list)
    sample_box: tuple = ((-1.0, 1.0), (-1.0, 1.0), (0.0, 1.0))
    upper_half_space: bool = False
    name: str = ""

    def constraints(self) -> list:
        return [s.constraint for s in self.sides.values()] + list(self.bounds)

    def side_values(self, x) -> dict[str, np.ndarray]:
        return {label: s.constraint.value(x) for label, s in self.sides.items()}

    def max_violation(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        vals = [c.value(x) for c in self.constraints()]
        if self.upper_half_space:
            vals.append(-x[..., 2])
        return np.max(np.stack(vals), axis=0)

    def contains(self, x, tol: float = 1e-9) -> bool:
        """Membership in the closure, with slack ``tol``."""
        return bool(self.max_violation(x) <= tol)

    def exit_map(self, label: str):
        """Map applied to a point leaving through side ``label``."""
        return self.sides[self.sides[label].partner].tau

    def sample_face(self, label: str, n: int, rng: np.random.Generator, tol: float = 1e-9,
                    max_tries: int = 200) -> np.ndarray:
        """Up to ``n`` points of the closed face, by rejection sampling."""
        side = self.sides[label]
        lo = np.array([b[0] for b in self.sample_box], dtype=float)
        hi = np.array([b[1] for b in self.sample_box], dtype=float)
        found = []
        for _ in range(max_tries):
            cand = side.constraint.project(rng.uniform(lo, hi, size=(4 * n, 3)))
            if self.upper_half_space:
                cand = cand[cand[:, 2] > 0]
            ok = self.max_violation(cand) <= tol
            found.extend(cand[ok])
            if len(found) >= n:
                break
        return np.array(found[:n]).reshape(-1, 3)


@dataclass
class Violation:
    condition: int
    side: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    checked_points: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self) -> list[str]:
        if self.ok:
            return [f"side pairing valid ({self.checked_points} face points checked)"]
        return [f"condition {v.condition} [{v.side}]: {v.message}" for v in self.violations]


def validate_side_pairing(D: FundamentalDomain, n_samples: int = 100, seed: int = 0,
                          tol: float = 1e-9) -> ValidationReport:
    """Check the three side-pairing conditions on sampled face points.

    1. ``tau_S`` maps sampled points of the partner face ``S'`` into ``S``;
    2. ``tau_{S'}`` is the inverse of ``tau_S``;
    3. the partner relation is a fixed-point free involution on sides.
    """
    report = ValidationReport()
    rng = np.random.default_rng(seed)
    for label, side in D.sides.items():
        if side.partner not in D.sides:
            report.violations.append(Violation(3, label, f"partner {side.partner!r} is not a side"))
            continue
        partner = D.sides[side.partner]
        if partner.partner != label:
            report.violations.append(
                Violation(3, label, f"partner of {side.partner!r} is {partner.partner!r}")
            )
        if side.partner == label:
            report.violations.append(Violation(3, label, "side is paired with itself"))

        if not side.tau.is_inverse_of(partner.tau, tol):
            report.violations.append(
                Violation(2, label, f"tau_{side.partner} is not the inverse of tau_{label}")
            )

        pts = D.sample_face(side.partner, n_samples, rng, tol)
        if len(pts) == 0:
            report.violations.append(Violation(1, label, f"could not sample face {side.partner!r}"))
            continue
        report.checked_points += len(pts)
        images = np.array([side.tau.apply_point(p) for p in pts])
        on_face = np.abs(side.constraint.value(images)) <= tol * (1 + np.abs(images).max(axis=1))
        inside = D.max_violation(images) <= tol * (1 + np.abs(images).max(axis=1))
        bad = int(np.sum(~(on_face & inside)))
        if bad:
            report.violations.append(
                Violation(1, label, f"{bad}/{len(pts)} images of {side.partner!r} miss the face")
            )
    return report


class NotFoundError(LookupError):
    pass


def locate(p: HPoint, D: FundamentalDomain, ball: WordBall, tol: float = 1e-9):
    """Find ``(w, p0)`` in the ball with ``p0`` in the closed domain and
    ``w(p0) = p``; the first word in canonical order wins."""
    if not p.is_interior():
        raise ValueError("locate needs an interior point")
    x = p.to_array()
    for word, T in ball:
        p0 = T.matrix_inverse().apply_point(x)
        if D.contains(p0, tol):
            return word, HPoint.from_array(p0)
    raise NotFoundError(f"no element of the radius-{ball.radius} ball maps {p} into the domain")


# --- library domains --------------------------------------------------------


def box_domain(half_widths=(0.5, 0.5, 0.5), center=(0.0, 0.0, 0.0), name="box") -> FundamentalDomain:
    """Axis-aligned box with opposite faces paired by translations."""
    sides = {}
    c = np.asarray(center, dtype=float)
    for axis, h in enumerate(half_widths):
        e = np.zeros(3)
        e[axis] = 1.0
        lo, hi = f"x{axis + 1}-", f"x{axis + 1}+"
        shift = EuclideanIsometry.translation(2 * h * e)
        sides[hi] = Side(hi, HalfSpace(tuple(e), float(c[axis] + h)), lo, shift)
        sides[lo] = Side(lo, HalfSpace(tuple(-e), float(-(c[axis] - h))), hi, shift.inverse())
    box = tuple((float(c[i] - h), float(c[i] + h)) for i, h in enumerate(half_widths))
    return FundamentalDomain(sides, sample_box=box, name=name)


def unit_cube_domain() -> FundamentalDomain:
    """The open unit cube ``(0, 1)^3`` paired into the cubical 3-torus."""
    return box_domain((0.5, 0.5, 0.5), (0.5, 0.5, 0.5), name="unit-cube")


def example_presentation() -> GroupPresentation:
    """The five generators of the worked upper half-space example."""
    s3 = math.sqrt(3.0)
    return GroupPresentation(
        (
            MoebiusMap(1, -2, 0, 2),
            MoebiusMap(1, 0, 0, 2),
            MoebiusMap(1, complex(-1, -s3), 0, 2),
            MoebiusMap(1, complex(3, s3), 0, 2),
            MoebiusMap(1, 2, 0, 1),
        ),
        ("T1", "T2", "T3", "T4", "T5"),
    )


def example_domain(r_bounds=(1e-6, 1e6)) -> FundamentalDomain:
    """Two ideal tetrahedra over the rhombus ``0, 2, 3+sqrt3 i, 1+sqrt3 i``.

    Together they form the vertical prism over the rhombus; opposite vertical
    faces are paired by translations, ``T5`` in the real direction and the
    group element ``(T2 T3^-1)^2`` (translation by ``1 + sqrt3 i``) in the
    other.  ``r_bounds`` truncate the cusp for integration only.
    """
    G = example_presentation()
    s3 = math.sqrt(3.0)
    t5 = G.generators[4]
    w_u = G.word("T2.T3^-1.T2.T3^-1")
    t_u = G.word_map(w_u)
    # normals point out of the prism
    left = HalfSpace((-s3 / 2, 0.5, 0.0), 0.0)
    right = HalfSpace((s3 / 2, -0.5, 0.0), s3)
    bottom = HalfSpace((0.0, -1.0, 0.0), 0.0)
    top = HalfSpace((0.0, 1.0, 0.0), s3)
    sides = {
        "R": Side("R", right, "L", t5, G.word("T5")),
        "L": Side("L", left, "R", t5.matrix_inverse(), G.word("T5^-1")),
        "U": Side("U", top, "D", t_u, w_u),
        "D": Side("D", bottom, "U", t_u.matrix_inverse(), w_u.inverse()),
    }
    bounds = [
        HalfSpace((0.0, 0.0, -1.0), -float(r_bounds[0])),
        HalfSpace((0.0, 0.0, 1.0), float(r_bounds[1])),
    ]
    return FundamentalDomain(
        sides, bounds, sample_box=((0.0, 3.0), (0.0, s3), (0.05, 3.0)), upper_half_space=True,
        name="example-prism",
    )


def domain_from_words(G: GroupPresentation, faces: Iterable[tuple[str, object, str, str]],
                      bounds=(), sample_box=((0, 1), (0, 1), (0.05, 1)), name="") -> FundamentalDomain:
    """Build an upper half-space domain from ``(label, constraint, partner, word)``."""
    sides = {}
    for label, constraint, partner, word_text in faces:
        w = G.word(word_text)
        sides[label] = Side(label, constraint, partner, G.word_map(w), w)
    return FundamentalDomain(sides, list(bounds), sample_box, upper_half_space=True, name=name)
