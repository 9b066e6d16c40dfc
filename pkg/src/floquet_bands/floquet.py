"""Monodromy matrices, quasifrequencies and folding into the time-Brillouin zone."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import linear_sum_assignment

from .errors import FlowDegeneracyError, StiffnessError

__all__ = [
    "FirstOrderSystem",
    "MonodromyMatrix",
    "QuasifrequencySet",
    "first_order_system",
    "monodromy",
    "quasifrequencies",
    "folding_number",
    "fold",
    "bottleneck_distance",
    "mirror_pair_residual",
    "reciprocity_distance",
]


class FirstOrderSystem:
    """``y' = A(t) y`` with ``A(t) = [[0, I], [-M(t), 0]]`` and period ``T``.

    ``matrix`` may also be supplied directly (any 2n x 2n periodic generator), which is how
    constant-coefficient and Hill-type test systems are built.
    """

    def __init__(self, m_eval=None, period: float = None, size: int = None, matrix=None):
        if period is None or not period > 0:
            raise ValueError("period must be positive")
        self.period = float(period)
        if matrix is not None:
            self._matrix = matrix
            self.size = int(size if size is not None else np.shape(matrix(0.0))[0])
            self.m_eval = None
            return
        if m_eval is None:
            raise ValueError("need either m_eval or matrix")
        self.m_eval = m_eval
        n = int(size if size is not None else np.shape(m_eval(0.0))[0])
        self.size = 2 * n
        self._n = n
        self._buf_eye = np.eye(n)
        self._matrix = self._block

    def _block(self, t):
        n = self._n
        out = np.zeros((2 * n, 2 * n), dtype=complex)
        out[:n, n:] = self._buf_eye
        out[n:, :n] = -np.asarray(self.m_eval(t))
        return out

    def __call__(self, t):
        return self._matrix(t)

    @classmethod
    def constant(cls, A, period: float) -> FirstOrderSystem:
        A = np.array(A, dtype=complex)
        return cls(period=period, size=A.shape[0], matrix=lambda t: A)


def first_order_system(tm) -> FirstOrderSystem:
    """Block first-order system of a :class:`~floquet_bands.modulation.TimeMatrix`."""
    return FirstOrderSystem(tm, tm.period, tm.N)


@dataclass
class MonodromyMatrix:
    X: np.ndarray
    period: float
    nfev: int = 0
    steps: int = 0
    det_defect: float = 0.0  # |det X(T) - exp(int tr A)|, a cheap global error indicator
    rtol: float = 1e-10
    atol: float = 1e-12


def monodromy(system: FirstOrderSystem, rtol: float = 1e-10, atol: float = 1e-12) -> MonodromyMatrix:
    """Fundamental matrix at ``t = T`` with ``X(0) = I``, integrated with DOP853."""
    if not (rtol > 0 and atol > 0):
        raise ValueError("tolerances must be positive")
    n = system.size
    T = system.period

    def rhs(t, y):
        return (system(t) @ y.reshape(n, n)).ravel()

    y0 = np.eye(n, dtype=complex).ravel()
    sol = solve_ivp(rhs, (0.0, T), y0, method="DOP853", rtol=rtol, atol=atol, t_eval=[T])
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        raise StiffnessError(f"integration over one period failed at t={sol.t[-1] if sol.t.size else 0:.6g}: {sol.message}")
    X = sol.y[:, -1].reshape(n, n)
    # trace of A over one period by the trapezoid rule on a fine grid (exactly 0 for block systems)
    tgrid = np.linspace(0.0, T, 65)
    tr = np.array([np.trace(system(t)) for t in tgrid])
    liouville = np.exp(np.trapezoid(tr, tgrid))
    defect = float(abs(np.linalg.det(X) - liouville))
    return MonodromyMatrix(X, T, int(sol.nfev), int(sol.nfev // 12), defect, rtol, atol)


def fold(omega, Omega: float):
    """Fold real part(s) into ``[-Omega/2, Omega/2)``; imaginary parts untouched."""
    w = np.asarray(omega)
    re = np.real(w)
    folded = re - Omega * np.floor((re + 0.5 * Omega) / Omega)
    folded = np.where(folded >= 0.5 * Omega, folded - Omega, folded)
    folded = np.where(folded < -0.5 * Omega, folded + Omega, folded)
    if np.iscomplexobj(w):
        return folded + 1j * np.imag(w)
    return folded


def folding_number(omega_a: float, Omega: float) -> tuple[float, int]:
    """``omega_a = omega0 + m * Omega`` with ``omega0`` in ``[-Omega/2, Omega/2)``."""
    if not Omega > 0:
        raise ValueError("Omega must be positive")
    m = int(np.floor((omega_a + 0.5 * Omega) / Omega))
    w0 = omega_a - m * Omega
    if w0 >= 0.5 * Omega:
        m += 1
        w0 -= Omega
    elif w0 < -0.5 * Omega:
        m -= 1
        w0 += Omega
    return float(w0), m


@dataclass
class QuasifrequencySet:
    alpha: np.ndarray
    Omega: float
    values: np.ndarray = field(repr=False)
    multipliers: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        order = np.lexsort((v.imag, v.real))
        self.values = v[order]
        if self.multipliers is not None:
            self.multipliers = np.asarray(self.multipliers)[order]

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def __len__(self):
        return len(self.values)


def quasifrequencies(mono: MonodromyMatrix, Omega: float, alpha=(0.0, 0.0)) -> QuasifrequencySet:
    """``omega = -i Log(lambda) / T`` for each eigenvalue of ``X(T)``, folded to ``[-Omega/2, Omega/2)``."""
    lam = np.linalg.eigvals(mono.X)
    scale = max(np.max(np.abs(lam)), 1.0)
    if np.min(np.abs(lam)) <= 1e-14 * scale:
        raise FlowDegeneracyError("monodromy matrix has a zero eigenvalue; the integration is not trustworthy")
    T = mono.period
    omega = (np.angle(lam) - 1j * np.log(np.abs(lam))) / T
    return QuasifrequencySet(alpha, Omega, fold(omega, Omega), lam)


def _pair_distance(a, b, period):
    d = np.subtract.outer(a, b)
    if period is None:
        return np.abs(d)
    re = np.real(d)
    re = np.abs(re - period * np.round(re / period))
    return np.hypot(re, np.imag(d)) if np.iscomplexobj(d) else re


def bottleneck_distance(a, b, period: float | None = None) -> float:
    """Smallest achievable maximum distance over all one-to-one pairings of two multisets.

    With ``period`` given, real parts are compared on the circle of that circumference.
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"multisets of different sizes {a.size} and {b.size}")
    if a.size == 0:
        return 0.0
    D = _pair_distance(a, b, period)
    cand = np.unique(D)
    lo, hi = 0, cand.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        cost = (D > cand[mid]).astype(float)
        r, c = linear_sum_assignment(cost)
        if cost[r, c].sum() == 0:
            hi = mid
        else:
            lo = mid + 1
    return float(cand[lo])


def mirror_pair_residual(qs_alpha: QuasifrequencySet, qs_minus: QuasifrequencySet) -> float:
    """Distance between the set at ``-alpha`` and ``{-conj(omega)}`` of the set at ``alpha``."""
    target = fold(-np.conj(qs_alpha.values), qs_alpha.Omega)
    return bottleneck_distance(qs_minus.values, target, qs_alpha.Omega)


def reciprocity_distance(qs_alpha: QuasifrequencySet, qs_minus: QuasifrequencySet) -> float:
    """Distance between the real-part multisets at ``alpha`` and ``-alpha``."""
    return bottleneck_distance(qs_alpha.real, qs_minus.real, qs_alpha.Omega)
