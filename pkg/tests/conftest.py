import numpy as np
import pytest

from floquet_bands.capacitance import capacitance_matrix
from floquet_bands.lattice import standard_layout
from floquet_bands.modulation import CouplingParams

TRIMER_PHASES = (0.0, np.pi / 2, np.pi)
HONEYCOMB_PHASES = (0.0, 2 * np.pi / 3, 4 * np.pi / 3) * 2


@pytest.fixture(scope="session")
def square3():
    return standard_layout("square3")


@pytest.fixture(scope="session")
def honeycomb6():
    return standard_layout("honeycomb6")


@pytest.fixture(scope="session")
def trimer_coupling(square3):
    return CouplingParams.for_layout(square3)


@pytest.fixture(scope="session")
def cap3(square3):
    return lambda a: capacitance_matrix(square3, a)


def random_hermitian_field(N, seed=0):
    """Synthetic capacitance provider: C(alpha) Hermitian positive definite with C(-alpha) = C(alpha)^T."""
    rng = np.random.default_rng(seed)
    S = rng.normal(size=(N, N))
    S = S + S.T
    B = rng.normal(size=(N, N))
    B = 1j * (B - B.T)  # Hermitian, purely imaginary
    base = np.eye(N) * (2.0 * N)

    def C(alpha):
        a = np.asarray(alpha, dtype=float)
        # real part even and imaginary part odd in alpha
        return base + 0.3 * (np.cos(a[0]) * S + np.sin(a[0] + 0.5 * a[1]) * B) / N

    return C


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
