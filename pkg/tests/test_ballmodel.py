import itertools
import json
import math

import numpy as np
import pytest
from sympy import Matrix, ZZ
from sympy.matrices.normalforms import smith_normal_form

from manifold_flows.ballmodel import (
    FACES,
    LABELS,
    FacePairing,
    InvalidPairingError,
    ball_to_halfspace,
    build_complex,
    dihedral_angle,
    dihedral_check,
    edge_cycles,
    edge_relation_matrix,
    enumerate_pairings,
    face_vertices,
    figure_eight_pairing,
    halfspace_to_ball,
    match_fields,
    pairing_isometries,
    pullback_field,
    regular_tetrahedron,
    vertex_map_residual,
)


def first_homology(classes):
    """(free rank, torsion coefficients) from the Smith normal form."""
    S = smith_normal_form(Matrix(edge_relation_matrix(classes).tolist()), domain=ZZ)
    diag = [abs(S[i, i]) for i in range(min(S.shape)) if S[i, i] != 0]
    return 4 - len(diag), tuple(sorted(d for d in diag if d != 1))


def test_vertices_regular():
    T1, T2, pairing = build_complex()
    for T in (T1, T2):
        pts = np.array([T.vertex(v) for v in LABELS])
        np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-15)
        for i, j in itertools.combinations(range(4), 2):
            assert abs(pts[i] @ pts[j] + 1 / 3) < 1e-15
    assert T1.edges == ["ab", "ac", "ad", "bc", "bd", "cd"]
    assert T2.edges[0] == "a'b'"


def test_pairing_is_face_bijection():
    _, T2, pairing = build_complex()
    assert sorted(pairing.table) == list(FACES)
    data = pairing.to_json()
    assert sorted(data) == ["A'", "B'", "C'", "D'"]
    assert [v[0] for _, v in sorted(data.items())] == list(FACES)
    assert FacePairing.from_json(json.loads(json.dumps(data))) == pairing
    with pytest.raises(InvalidPairingError):
        FacePairing.from_json({"A'": ["B", {"b'": "a", "c'": "c", "d'": "d"}]})


def test_bad_vertex_map_rejected():
    with pytest.raises(InvalidPairingError):
        FacePairing.from_perms({"A": "bbd", "B": "acd", "C": "abd", "D": "abc"})
    with pytest.raises(InvalidPairingError):
        FacePairing.from_perms({"A": "bcd", "B": "acd", "C": "abd"})


def test_figure_eight_edge_classes():
    classes = edge_cycles(figure_eight_pairing())
    assert sorted(len(c) for c in classes) == [6, 6]
    covered = sorted(e for c in classes for e in c.edges)
    assert len(covered) == 12 and len(set(covered)) == 12
    for c in classes:
        # classes alternate between the two tetrahedra
        assert sum("'" in e for e in c.edges) == 3


def test_figure_eight_homology():
    assert first_homology(edge_cycles(figure_eight_pairing())) == (1, ())


def test_search_oracle():
    # exhaustive search over orientable gluings with two classes of six
    found = {}
    for pr in enumerate_pairings(orientable=True):
        try:
            classes = edge_cycles(pr)
        except InvalidPairingError:
            continue
        if sorted(len(c) for c in classes) == [6, 6]:
            found[json.dumps(pr.to_json(), sort_keys=True)] = (first_homology(classes), pr.mirrored)
    assert len(found) == 12
    kinds = sorted(set(found.values()))
    assert kinds == [((1, ()), True), ((1, (5,)), False)]
    key = json.dumps(figure_eight_pairing().to_json(), sort_keys=True)
    assert found[key] == ((1, ()), True)


def test_scrambled_pairing_flagged():
    scrambled = FacePairing.from_perms({"A": "bcd", "B": "acd", "C": "abd", "D": "abc"})
    classes = edge_cycles(scrambled)
    assert sorted(len(c) for c in classes) != [6, 6]
    report = dihedral_check(classes)
    assert not report.ok


def test_dihedral_angle_geometry():
    T = regular_tetrahedron()
    for f1, f2 in itertools.combinations(FACES, 2):
        assert abs(dihedral_angle(T, f1, f2) - math.pi / 3) < 1e-9
    c, r = T.face_sphere("A")
    assert abs(r - math.sqrt(8)) < 1e-12
    # the face sphere is orthogonal to the unit sphere
    assert abs(c @ c - 1 - r * r) < 1e-12


def test_dihedral_sums():
    report = dihedral_check(edge_cycles(figure_eight_pairing()))
    assert report.ok
    for s in report.sums:
        assert abs(s - 2 * math.pi) < 1e-6
    short = dihedral_check([5])
    assert short.passed == [False]
    assert abs(short.sums[0] - 5 * math.pi / 3) < 1e-9
    assert "NOT 2pi" in short.lines()[0]


def test_pairing_isometries_map_vertices():
    T1, T2, pairing = build_complex()
    assert vertex_map_residual(T1, T2, pairing) < 1e-9
    for f, g in pairing_isometries(T1, T2, pairing).items():
        for u in face_vertices(f):
            target = T1.vertex(pairing.table[f][u])
            np.testing.assert_allclose(g.apply_boundary(T2.vertex(u)), target, atol=1e-9)
        # the whole face lands on the partner face sphere
        c, r = T1.face_sphere(f)
        pts = T2.sample_face(f, 20, np.random.default_rng(1))
        images = np.array([g.apply_point(q) for q in pts])
        np.testing.assert_allclose(np.linalg.norm(images - c, axis=1), r, atol=1e-9)
        assert np.all(np.linalg.norm(images, axis=1) < 1)


def test_cayley_round_trip():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(20, 3))
    x *= (0.95 * rng.random((20, 1))) / np.linalg.norm(x, axis=1, keepdims=True)
    for p in x:
        y = ball_to_halfspace(p)
        assert y[2] > 0
        np.testing.assert_allclose(halfspace_to_ball(y), p, atol=1e-12)


def test_match_zero_fields():
    T1, T2, pairing = build_complex()
    zero = lambda q: np.zeros(3)
    assert match_fields(zero, zero, T1, T2, pairing) == 0.0


def test_match_pullback_field():
    T1, T2, pairing = build_complex()
    F1 = lambda q: np.array([np.sin(q[1]) + q[2], q[0] * q[2] - 0.3, np.cos(q[0] + q[1])])
    F2 = pullback_field(F1, T1, T2, pairing)
    assert match_fields(F1, F2, T1, T2, pairing) < 1e-9


def test_match_independent_fields():
    T1, T2, pairing = build_complex()
    F1 = lambda q: np.array([1.0, 0.0, 0.0])
    F2 = lambda q: np.array([0.0, q[0], 1.0])
    assert match_fields(F1, F2, T1, T2, pairing) > 0.1
