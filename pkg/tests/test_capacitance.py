import numpy as np
import pytest
from numpy.testing import assert_allclose

from floquet_bands.capacitance import (
    GreenParams,
    QuasiperiodicGreen,
    _kernel_matrix,
    assemble_single_layer,
    boundary_nodes,
    capacitance_field,
    capacitance_matrix,
    check_capacitance,
    green_alpha_zero,
    kernel_tables,
    load_capacitance,
    save_capacitance,
    spectral_green_sum,
)
from floquet_bands.errors import ParseError, SingularQuasimomentumError, ValidationError
from floquet_bands.lattice import ResonatorLayout, square_lattice, symmetry_path


def test_green_singular_at_gamma():
    with pytest.raises(SingularQuasimomentumError):
        green_alpha_zero((0.1, 0.2), (0.3, 0.4), (0.0, 0.0))


def test_green_conjugation():
    rng = np.random.default_rng(3)
    for _ in range(5):
        x, y = rng.uniform(0, 1, size=(2, 2))
        a = rng.uniform(-np.pi, np.pi, 2)
        assert green_alpha_zero(x, y, a) == pytest.approx(np.conj(green_alpha_zero(x, y, -a)), abs=1e-13)


@pytest.mark.parametrize("Q", [8, 12])
def test_green_truncation_refinement(Q):
    rng = np.random.default_rng(4)
    for _ in range(5):
        x = rng.uniform(0, 1, 2)
        y = x + rng.uniform(0.05, 0.4) * np.array([1.0, 0.3])
        a = rng.uniform(-np.pi, np.pi, 2)
        g1 = green_alpha_zero(x, y, a, GreenParams(truncation=Q))
        g2 = green_alpha_zero(x, y, a, GreenParams(truncation=Q + 4))
        assert abs(g1 - g2) <= 1e-6 * abs(g2)


def test_ewald_matches_plain_series():
    # the plain series converges like 1/Q; a large truncation agrees to a few 1e-4
    x, y, a = np.array([0.2, 0.3]), np.array([0.6, 0.45]), np.array([0.7, -1.1])
    g = green_alpha_zero(x, y, a)
    s = spectral_green_sum(x, y, a, square_lattice(), 200)
    assert abs(g - s) < 2e-3 * abs(g)


def test_green_quasiperiodic():
    a = np.array([0.4, 1.3])
    G = QuasiperiodicGreen(square_lattice(), a)
    r = np.array([[0.3, 0.2]])
    shifted = G(r + np.array([[1.0, 0.0]]))
    assert_allclose(shifted, np.exp(1j * a[0]) * G(r), atol=1e-12)


def test_green_solves_laplace_off_singularity():
    G = QuasiperiodicGreen(square_lattice(), (0.8, -0.3))
    r0 = np.array([0.31, 0.27])
    h = 1e-3
    st = np.array([r0, r0 + [h, 0], r0 - [h, 0], r0 + [0, h], r0 - [0, h]])
    v = G(st)
    lap = (v[1:].sum() - 4 * v[0]) / h**2
    assert abs(lap) < 1e-4


def test_single_layer_size(square3):
    A = assemble_single_layer(square3, (1.0, 0.5))
    assert A.shape == (192, 192)


def test_single_layer_condition(square3):
    A = assemble_single_layer(square3, (np.pi, np.pi))
    assert np.linalg.cond(A) < 1e8


def test_cached_kernel_matches_direct(square3):
    p = GreenParams()
    a = np.array([0.9, -2.1])
    K_fast = kernel_tables(square3, p).kernel(a)
    K_ref = _kernel_matrix(square3, QuasiperiodicGreen(square3.lattice, a, p), p.quadrature_points)
    assert_allclose(K_fast, K_ref, atol=1e-12 * np.max(np.abs(K_ref)))


def test_single_layer_constant_density(square3):
    # S[1] at a boundary node against a fine independent quadrature of the Green's function
    a = np.array([1.1, 0.4])
    M = 64
    A = assemble_single_layer(square3, a)
    val = (A @ np.ones(3 * M))[5]
    x, _, _ = boundary_nodes(square3, M)
    xs = x[5]
    G = QuasiperiodicGreen(square3.lattice, a)
    ref = 0.0
    Mf = 4096
    for c, R in zip(square3.centers, square3.radii):
        th = 2 * np.pi * (np.arange(Mf) + 0.25) / Mf
        y = np.asarray(c) + R * np.column_stack([np.cos(th), np.sin(th)])
        ref += np.sum(G(xs[None, :] - y)) * 2 * np.pi * R / Mf
    assert abs(val - ref) <= 1e-5 * abs(ref)


def test_capacitance_symmetries(square3):
    a = np.array([0.7, 2.2])
    C = capacitance_matrix(square3, a)
    Cm = capacitance_matrix(square3, -a)
    assert C.hermitian_defect <= 1e-8
    assert_allclose(Cm.entries, C.entries.T, atol=1e-8 * np.linalg.norm(C.entries))
    # physical sign: positive definite away from Gamma
    assert np.all(np.linalg.eigvalsh(C.entries) > 0)


def test_capacitance_single_disk_real():
    lay = ResonatorLayout(square_lattice(), ((0.5, 0.5),), (0.1,))
    C = capacitance_matrix(lay, (1.0, 2.0)).entries
    assert C.shape == (1, 1)
    assert abs(C[0, 0].imag) < 1e-14 and C[0, 0].real > 0


def test_capacitance_refinement(square3):
    a = (1.3, -0.6)
    C64 = capacitance_matrix(square3, a, GreenParams(quadrature_points=64)).entries
    C128 = capacitance_matrix(square3, a, GreenParams(quadrature_points=128)).entries
    assert np.max(np.abs(C64 - C128)) <= 1e-6 * np.linalg.norm(C128)


def test_dilute_single_disk_limit():
    # for a small disk the capacitance approaches 2 pi / (log(1/R) + O(1)) -> check the log scaling
    vals = []
    for R in (0.02, 0.01):
        lay = ResonatorLayout(square_lattice(), ((0.5, 0.5),), (R,))
        vals.append(capacitance_matrix(lay, (np.pi, np.pi)).entries[0, 0].real)
    d = 2 * np.pi / vals[1] - 2 * np.pi / vals[0]
    assert d == pytest.approx(np.log(2.0), rel=1e-3)


def test_field_flags_gamma(square3):
    path = symmetry_path("square", 5)
    field = capacitance_field(square3, path)
    assert field[0] is None and field[-1] is None
    assert field[1] is not None
    for j in range(len(path)):
        k = path.mirror_index(j)
        if field[j] is not None:
            assert_allclose(field[k].entries, field[j].entries.conj(), atol=1e-8)


def test_field_order_independent(square3):
    pts = np.array([[0.3, 0.1], [1.0, 2.0], [-0.5, 0.7]])
    f1 = capacitance_field(square3, pts)
    f2 = capacitance_field(square3, pts[::-1])[::-1]
    for a, b in zip(f1, f2):
        assert np.array_equal(a.entries, b.entries)


def test_save_load_roundtrip(tmp_path, square3):
    field = capacitance_field(square3, np.array([[0.3, 0.1], [1.0, 2.0]]))
    p = tmp_path / "c.txt"
    save_capacitance(p, field)
    assert p.read_text().startswith("N 3 D 2\n")
    back = load_capacitance(p)
    for a, b in zip(field, back):
        assert np.array_equal(a.entries, b.entries)
        assert a.alpha == b.alpha


def test_load_rejects_non_hermitian(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("N 2 D 2\nalpha 0.1 0.2\n1 0 1 0\n0 0 1 0\n")
    with pytest.raises(ValidationError):
        load_capacitance(p)


def test_load_reports_line(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("N 2 D 2\nalpha 0.1 0.2\n1 0 1\n0 0 1 0\n")
    with pytest.raises(ParseError, match="line 3"):
        load_capacitance(p)


def test_check_capacitance_shape():
    with pytest.raises(ValidationError):
        check_capacitance(np.ones((2, 3)))
