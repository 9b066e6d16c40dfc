import numpy as np
import pytest
from numpy.testing import assert_allclose

from floquet_bands.errors import ModulationError
from floquet_bands.modulation import (
    CouplingParams,
    TimeMatrix,
    assemble_m,
    cosine_profile,
    eps_expansion,
    fourier_profile,
)

from conftest import random_hermitian_field


def _setup(phases, eps=0.3, N=None, omega=0.3):
    N = len(phases) if N is None else N
    C = random_hermitian_field(N, seed=2)((0.7, 0.2))
    cp = CouplingParams(tuple(np.full(N, np.pi * 0.01)), delta=1e-3)
    return C, cp, cosine_profile(N, omega, eps, phases)


def test_static_profile_is_one():
    p = cosine_profile(3, 0.2, 0.0, (0, 1, 2))
    t = np.linspace(0, p.period, 17)
    assert_allclose(p.rho_inv(t), 1.0)
    assert_allclose(p.kappa_inv(t), 1.0)


def test_trimer_first_harmonic():
    eps = 0.2
    p = cosine_profile(3, 0.3, eps, (0, np.pi / 2, np.pi))
    H = p.rho_shape.shape[1] // 2
    assert_allclose(p.rho_inv_coeffs[:, H + 1], (eps / 2) * np.array([1, 1j, -1]), atol=1e-15)


def test_honeycomb_pairing():
    ph = (0, 2 * np.pi / 3, 4 * np.pi / 3) * 2
    p = cosine_profile(6, 0.2, 0.5, ph)
    t = np.linspace(0, p.period, 31)
    r = p.rho_inv(t)
    for i in range(3):
        assert_allclose(r[:, i], r[:, i + 3])


def test_positivity_enforced():
    with pytest.raises(ModulationError):
        cosine_profile(2, 0.2, 1.0, (0, 0))
    with pytest.raises(ModulationError):
        fourier_profile(0.2, 0.9, [{0: 1.0, 1: 0.6, -1: 0.6}, {0: 1.0}])


def test_reality_enforced():
    with pytest.raises(ModulationError):
        fourier_profile(0.2, 0.1, [{0: 1.0, 1: 0.5j, -1: 0.5j}])


def test_coupling_subwavelength_regime():
    with pytest.raises(ModulationError):
        CouplingParams((1.0,), delta=0.1)


def test_static_matrix():
    C, cp, _ = _setup((0, 1, 2))
    tm = assemble_m(cosine_profile(3, 0.3, 0.0, (0, 1, 2)), C, cp)
    M0 = cp.prefactor * np.diag(1 / np.asarray(cp.volumes)) @ C
    assert_allclose(tm(1.234), M0, rtol=1e-15)


def test_cosine_closed_form():
    C, cp, p = _setup((0, np.pi / 2, np.pi), eps=0.4)
    tm = assemble_m(p, C, cp)
    K = cp.prefactor / cp.volumes[0]
    for t in np.linspace(0, p.period, 7):
        rho = 1.0 / (1 + 0.4 * np.cos(p.omega * t + np.array(p.phases)))
        ref = K * rho[:, None] * C / rho[None, :]
        assert_allclose(tm(t), ref, rtol=1e-13, atol=1e-16)


def test_diagonal_time_independent():
    C, cp, p = _setup((0, np.pi / 2, np.pi), eps=0.5)
    tm = assemble_m(p, C, cp)
    d = np.array([np.diag(tm(t)) for t in np.linspace(0, p.period, 40)])
    assert_allclose(d, np.broadcast_to(d[0], d.shape), rtol=1e-14)


def test_vectorized_evaluation():
    C, cp, p = _setup((0, 1, 2), eps=0.3)
    tm = assemble_m(p, C, cp)
    t = np.linspace(0, 10, 5)
    assert_allclose(tm(t), np.array([tm(x) for x in t]))


def test_fourier_reconstruction_cosine():
    C, cp, p = _setup((0, 1.1, 2.5), eps=0.6)
    tm = assemble_m(p, C, cp)
    t = np.linspace(0, p.period, 13)
    assert_allclose(tm.reconstruct(t), tm(t), atol=1e-13 * np.max(np.abs(tm(0.0))))


def test_fourier_reconstruction_numeric_with_kappa():
    C = random_hermitian_field(2, seed=5)((0.3, 0.1))
    cp = CouplingParams((0.03, 0.03))
    p = fourier_profile(0.4, 0.3, [{0: 1, 1: 0.5, -1: 0.5}, {0: 1, 2: 0.25j, -2: -0.25j}],
                        [{0: 1, 1: 0.3, -1: 0.3}, {0: 1}])
    tm = assemble_m(p, C, cp)
    t = np.linspace(0, p.period, 9)
    assert_allclose(tm.reconstruct(t), tm(t), atol=1e-12 * np.max(np.abs(tm(t))))


def test_w3_against_finite_difference():
    p = fourier_profile(0.5, 0.3, [{0: 1}], [{0: 1, 1: 0.4, -1: 0.4}])
    tm = TimeMatrix(p, np.eye(1), CouplingParams((1.0,)))
    t, h = 0.7, 1e-4

    def kappa(x):
        return 1.0 / p.kappa_inv(x)[..., 0]

    def g(x):  # kappa' / kappa^{3/2}
        return (kappa(x + h) - kappa(x - h)) / (2 * h) / kappa(x) ** 1.5

    ref = 0.5 * np.sqrt(kappa(t)) * (g(t + h) - g(t - h)) / (2 * h)
    assert tm.w3(t)[0] == pytest.approx(ref, rel=1e-5)


def test_expansion_equal_phases_zero():
    C, cp, p = _setup((0.4, 0.4, 0.4))
    ex = eps_expansion(assemble_m(p, C, cp))
    for v in ex.M1.values():
        assert np.max(np.abs(v)) == 0


def test_expansion_two_resonators_closed_form():
    C, cp, p = _setup((0, np.pi / 2))
    ex = eps_expansion(assemble_m(p, C, cp))
    K = cp.prefactor / cp.volumes[0]
    assert ex.M1[1][0, 1] == pytest.approx(K * C[0, 1] * (1j - 1) / 2, rel=1e-14)
    assert np.max(np.abs(ex.M1[0])) == 0


def test_expansion_analytic_vs_numeric():
    C, cp, p = _setup((0, np.pi / 2, np.pi))
    tm = assemble_m(p, C, cp)
    a = eps_expansion(tm, "analytic")
    n = eps_expansion(tm, "numeric")
    assert n.error_estimate < 1e-8
    scale = np.max(np.abs(a.M1[1]))
    for k in (-1, 0, 1):
        assert_allclose(n.M1[k], a.M1[k], atol=1e-8 * scale)
    extra = [k for k in n.M1 if abs(k) > 1]
    assert not extra


def test_analytic_path_rejects_other_families():
    C = np.eye(1)
    p = fourier_profile(0.5, 0.3, [{0: 1, 2: 0.3, -2: 0.3}])
    with pytest.raises(ModulationError):
        eps_expansion(TimeMatrix(p, C, CouplingParams((1.0,))), "analytic")
