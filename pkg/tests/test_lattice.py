import numpy as np
import pytest
from numpy.testing import assert_allclose

from floquet_bands.errors import GeometryError, PathError
from floquet_bands.lattice import (
    Lattice,
    ResonatorLayout,
    dual_lattice,
    hexagonal_lattice,
    square_lattice,
    standard_layout,
    symmetry_path,
    window_path,
)


@pytest.mark.parametrize(
    "l1, l2, q1, q2",
    [
        ((1, 0), (0, 1), (2 * np.pi, 0), (0, 2 * np.pi)),
        ((1, 1 / np.sqrt(3)), (1, -1 / np.sqrt(3)), (np.pi, np.sqrt(3) * np.pi), (np.pi, -np.sqrt(3) * np.pi)),
        ((2, 0), (0, 1), (np.pi, 0), (0, 2 * np.pi)),
    ],
)
def test_dual_lattice_examples(l1, l2, q1, q2):
    a, b = dual_lattice(Lattice(l1, l2))
    assert_allclose(a, q1, atol=1e-12)
    assert_allclose(b, q2, atol=1e-12)


def test_dual_orthogonality_random():
    rng = np.random.default_rng(1)
    for _ in range(20):
        l1, l2 = rng.normal(size=(2, 2))
        lat = Lattice(l1, l2)
        q1, q2 = dual_lattice(lat)
        G = np.array([[np.dot(l, q) for q in (q1, q2)] for l in (l1, l2)])
        assert_allclose(G, 2 * np.pi * np.eye(2), atol=1e-12)


def test_degenerate_lattice_rejected():
    with pytest.raises(GeometryError):
        Lattice((1, 1), (2, 2))


def test_cell_volume():
    assert square_lattice().cell_volume == pytest.approx(1.0)
    assert hexagonal_lattice(1.5).cell_volume == pytest.approx(2 * 1.5**2 / np.sqrt(3))


def test_square3_layout():
    lay = standard_layout("square3", 0.1)
    assert lay.N == 3
    c = np.asarray(lay.centers)
    d = np.linalg.norm(c[:, None] - c[None, :], axis=-1)
    assert np.all(d[np.triu_indices(3, 1)] > 0.2)
    assert_allclose(lay.volumes, np.pi * 0.01)


def test_square3_large_radius_overlaps():
    with pytest.raises(GeometryError):
        standard_layout("square3", 0.4)


def test_honeycomb_first_center():
    R = 0.12
    lay = standard_layout("honeycomb6", R)
    assert_allclose(lay.centers[0], (1 + 3 * R, 0.0), atol=1e-15)
    assert lay.N == 6


def test_overlap_across_cells_detected():
    # the second disk sits in the neighbouring cell, on top of a translate of the first
    with pytest.raises(GeometryError, match="overlap"):
        ResonatorLayout(square_lattice(), ((0.5, 0.5), (1.45, 0.5)), (0.1, 0.1))


def test_fingerprint_stable():
    assert standard_layout("square3").fingerprint() == standard_layout("square3").fingerprint()
    assert standard_layout("square3").fingerprint() != standard_layout("square3", 0.09).fingerprint()


def test_chain_path_grid():
    p = symmetry_path("chain", 11)
    assert_allclose(p.points[:, 0], np.linspace(-np.pi, np.pi, 11), atol=1e-15)
    assert p.points[0, 0] == -np.pi and p.points[-1, 0] == np.pi


def test_square_path_vertices_and_mirror():
    p = symmetry_path("square", 9)
    pts = [tuple(x) for x in p.points]
    assert (np.pi, np.pi) in pts and (np.pi, 0.0) in pts
    assert p.is_antisymmetric()
    fwd, bwd = p.halves()
    assert_allclose(p.points[bwd], -p.points[fwd], atol=1e-15)
    # equal spacing within each segment
    seg = np.diff(p.s[:9])
    assert_allclose(seg, seg[0], rtol=1e-12)


def test_honeycomb_path_visits_both_valleys():
    lat = hexagonal_lattice(1.5)
    q1, q2 = dual_lattice(lat)
    K = (2 * q1 + q2) / 3
    p = symmetry_path("honeycomb", 5, lat)
    assert np.min(np.linalg.norm(p.points - K, axis=1)) < 1e-12
    assert np.min(np.linalg.norm(p.points + K, axis=1)) < 1e-12


def test_mirror_index_errors_on_plain_segment():
    from floquet_bands.lattice import line_path

    p = line_path((0.1, 0.0), (1.0, 0.0), 5)
    with pytest.raises(PathError):
        p.mirror_index(0)


def test_window_path_antisymmetric():
    p = window_path((1.2, 0.3), 0.1, 7, direction=(1, 1))
    assert p.is_antisymmetric()
    assert len(p) == 14
