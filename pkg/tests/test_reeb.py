import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manifold_flows.reeb import (
    TWO_PI,
    ClearanceError,
    GluingError,
    HeegaardGluing,
    LeafChart,
    PlanarField,
    ZeroOnCircleError,
    collar_sample,
    connected_sum_field,
    equilibrium_index,
    find_equilibria,
    heegaard_glue,
    homotopy_matrix,
    index_report,
    invariant_line_residual,
    leaf_embed,
    leaf_system,
    pullback,
    pushforward,
    reeb_profile,
    reeb_profile_inverse,
    torus_field,
    write_grid_csv,
)

PI = math.pi
SWAP = ((0, 1), (1, 0))


def test_torus_field_values():
    f = torus_field()
    np.testing.assert_array_equal(f(0.0, 0.0), (-0.0, -0.0))
    np.testing.assert_allclose(f(PI / 2, 0.0), (-1.0, 0.0))


@settings(max_examples=30)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_torus_field_periodic(u, v):
    f = torus_field()
    np.testing.assert_allclose(f(u + TWO_PI, v), f(u, v), atol=1e-12)
    np.testing.assert_allclose(f(u, v + TWO_PI), f(u, v), atol=1e-12)


def test_torus_equilibria():
    eqs = find_equilibria(torus_field())
    assert len(eqs) == 4
    expected = [(0.0, 0.0), (0.0, PI), (PI, 0.0), (PI, PI)]
    np.testing.assert_allclose(eqs, expected, atol=1e-10)


def test_torus_indices():
    f = torus_field()
    report = index_report(f, [(0.0, 0.0), (PI, PI), (0.0, PI), (PI, 0.0)])
    assert [r["indices"] for r in report] == [[1, 1, 1], [1, 1, 1], [-1, -1, -1], [-1, -1, -1]]
    assert all(isinstance(i, int) for r in report for i in r["indices"])
    assert sum(r["indices"][0] for r in report) == 0


def test_index_of_regular_point_is_zero():
    assert equilibrium_index(torus_field(), (1.0, 2.0), 0.1) == 0


def test_zero_on_circle():
    with pytest.raises(ZeroOnCircleError):
        equilibrium_index(torus_field(), (0.0, 0.0), PI)


def test_rotating_field_index():
    # z -> z^2 has index 2, z -> conj(z)^3 has index -3
    sq = PlanarField(lambda u, v: (u * u - v * v, 2 * u * v))
    cube = PlanarField(lambda u, v: (u ** 3 - 3 * u * v * v, -(3 * u * u * v - v ** 3)))
    assert equilibrium_index(sq, (0, 0), 0.3) == 2
    assert equilibrium_index(cube, (0, 0), 0.3) == -3


def test_profile():
    assert reeb_profile(0.0) == 0.0
    r = np.linspace(0, 0.99, 200)
    assert np.all(np.diff(reeb_profile(r)) > 0)
    assert reeb_profile(0.9999) > 1e3
    chart = LeafChart()
    # r_k solves tan(pi r^2 / 2) = 2 pi k
    for k in (1, 2, 3):
        assert abs(chart.cut_radius(k) - math.sqrt(2 * math.atan(2 * PI * k) / PI)) < 1e-15
    assert abs(chart.cut_radius(1) - 0.9484310958452637) < 1e-12
    np.testing.assert_allclose(reeb_profile_inverse(reeb_profile(r)), r, atol=1e-12)


def test_leaf_embed():
    chart = LeafChart()
    np.testing.assert_array_equal(leaf_embed(chart, 0.0, 0.0), (0.0, 0.0, 0.0))
    # the k-th cut circle lies on the cutting disk phi = 0
    for k in (1, 2, 3):
        rk = chart.cut_radius(k)
        a = np.linspace(0, TWO_PI, 12)
        pts = leaf_embed(chart, rk * np.cos(a), rk * np.sin(a))
        phi = np.minimum(pts[:, 2], TWO_PI - pts[:, 2])
        assert np.max(phi) < 1e-9
        np.testing.assert_allclose(np.hypot(pts[:, 0], pts[:, 1]), rk)
    with pytest.raises(ValueError):
        leaf_embed(chart, 1.0, 0.0)


def test_leaf_origin_is_source():
    L = leaf_system(torus_field())
    f = L.field
    np.testing.assert_array_equal(f(0.0, 0.0), (0.0, 0.0))
    assert equilibrium_index(f, (0.0, 0.0), 0.05) == 1
    assert find_equilibria(f, box=((-0.5, 0.5), (-0.5, 0.5))) == [(0.0, 0.0)]


@pytest.mark.parametrize("k", [1, 2, 3])
def test_band_indices(k):
    L = leaf_system(torus_field())
    c = L.band_clearance(k)
    kinds = {"sink": 1, "source": 1, "saddle": -1}
    for p, kind in L.band_equilibria(k):
        np.testing.assert_allclose(L.field(*p), (0, 0), atol=1e-9)
        for s in (0.1, 0.2, 0.4):
            assert equilibrium_index(L.field, p, s * c) == kinds[kind]
    assert sorted(kinds[kind] for _, kind in L.band_equilibria(k)) == [-1, -1, 1, 1]


def test_blend_is_continuous():
    L = leaf_system(torus_field())
    lo, hi = L.blend_interval
    for r in (lo, hi, L.chart.cut_radius(2)):
        for a in (0.3, 2.0):
            c, s = math.cos(a), math.sin(a)
            inner = L.field((r - 1e-9) * c, (r - 1e-9) * s)
            outer = L.field((r + 1e-9) * c, (r + 1e-9) * s)
            assert np.max(np.abs(inner - outer)) < 1e-6


@settings(max_examples=30)
@given(st.floats(0.9485, 0.99), st.floats(0, TWO_PI))
def test_band_reproduces_torus_field(r, alpha):
    L = leaf_system(torus_field())
    x, y = r * math.cos(alpha), r * math.sin(alpha)
    dx, dy = L.field(x, y)
    # push the leaf velocity through the chart (r, alpha) -> (alpha, profile(r))
    dr = (x * dx + y * dy) / r
    dalpha = (x * dy - y * dx) / (r * r)
    dphi = L.chart.derivative(r) * dr
    expected = torus_field()(alpha, reeb_profile(r))
    scale = 1.0 + np.linalg.norm(expected)
    assert abs(dalpha - expected[0]) < 1e-6 * scale
    assert abs(dphi - expected[1]) < 1e-6 * scale


def test_invariant_ray():
    assert invariant_line_residual(leaf_system(torus_field())) < 1e-12


def test_connected_sum_indices():
    f = torus_field()
    G2 = connected_sum_field(f, f.reversed(), rho=0.5)
    assert G2.removed1 == (0.0, 0.0) and G2.removed2 == (0.0, 0.0)
    assert len(G2.equilibria()) == 6
    assert G2.index_sum() == -2
    for radius in (0.05, 0.1, 0.2):
        assert G2.index_sum(radius) == -2
    d1, d2 = G2.neck_flux_sign()
    assert d1 > 0 and d2 > 0
    assert "leaf ray" in G2.singular_line["description"]


def test_neck_is_smooth_blend():
    f = torus_field()
    G2 = connected_sum_field(f, f.reversed(), rho=0.5)
    beta = np.linspace(0, TWO_PI, 50)
    ds0, _ = G2.neck(0.0, beta)
    ds1, _ = G2.neck(1.0, beta)
    np.testing.assert_allclose(ds0, G2.neck.end_vectors(beta, 1)[0])
    np.testing.assert_allclose(ds1, G2.neck.end_vectors(beta, 2)[0])
    ds_mid, _ = G2.neck(0.5, beta)
    assert np.all(ds_mid > 0)


def test_connected_sum_clearance():
    f = torus_field()
    with pytest.raises(ClearanceError):
        connected_sum_field(f, f.reversed(), rho=3.2)
    with pytest.raises(ClearanceError):
        connected_sum_field(f, f.reversed(), rho=0.0)


def test_heegaard_identity_bit_exact():
    X2 = torus_field()
    res = heegaard_glue(X2, X2, HeegaardGluing(1, ((1, 0), (0, 1))))
    _, _, F = X2.sample_grid(32)
    for c in res.collar[0]:
        assert np.array_equal(c.vectors, F)
    assert res.boundary_residual == 0.0


def test_heegaard_swap_constant_field():
    const = PlanarField(lambda u, v: (np.ones_like(u), np.zeros_like(v)), periodic=True)
    twisted = pushforward(const, SWAP)
    np.testing.assert_array_equal(twisted(0.3, 1.2), (0.0, 1.0))
    c = collar_sample(const, SWAP, 1.0, n=4)
    np.testing.assert_array_equal(c.vectors[..., 0], 0.0)
    np.testing.assert_array_equal(c.vectors[..., 1], 1.0)


@pytest.mark.parametrize("psi", [SWAP, ((1, 1), (0, 1)), ((2, 1), (1, 1)), ((0, -1), (1, 0))])
def test_heegaard_pullback_round_trip(psi):
    X2 = PlanarField(lambda u, v: (np.sin(u + 2 * v), np.cos(u) - 0.5 * np.sin(v)), periodic=True)
    X1 = pullback(X2, psi)
    res = heegaard_glue(X1, X2, HeegaardGluing(1, psi))
    assert res.boundary_residual < 1e-9
    _, _, F = X2.sample_grid(32)
    assert np.array_equal(res.at(0, 0.0).vectors, F)


def test_homotopy_endpoints():
    np.testing.assert_array_equal(homotopy_matrix(SWAP, 0.0), np.eye(2))
    np.testing.assert_array_equal(homotopy_matrix(((1, 1), (0, 1)), 1.0), [[1, -1], [0, 1]])


def test_heegaard_genus_two():
    f = torus_field()
    g = HeegaardGluing(2, (SWAP, ((1, 0), (0, 1))))
    res = heegaard_glue((pullback(f, SWAP), f), (f, f), g)
    assert len(res.collar) == 2
    assert res.boundary_residual < 1e-9


def test_gluing_errors():
    with pytest.raises(GluingError):
        HeegaardGluing(1, ((2, 0), (0, 1)))
    with pytest.raises(GluingError):
        HeegaardGluing(1, ((0.5, 0), (0, 2)))
    with pytest.raises(GluingError):
        HeegaardGluing(3, (SWAP, SWAP, SWAP))
    with pytest.raises(GluingError):
        HeegaardGluing(2, (SWAP,))


def test_grid_csv(tmp_path):
    path = tmp_path / "grid.csv"
    write_grid_csv(torus_field(), path, n=4)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["u", "v", "du", "dv"]
    assert len(rows) == 17
