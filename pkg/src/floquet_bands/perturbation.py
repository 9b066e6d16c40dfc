"""Asymptotic Floquet analysis around degenerate points of the folded static spectrum.

Conventions
-----------
``Ã0 = [[0, I], [-M0, 0]]`` is diagonalised as ``S Ã0 S^{-1} = A0``. Slot ``2i`` carries the
eigenvalue ``+i sqrt(mu_i)`` and slot ``2i+1`` carries ``-i sqrt(mu_i)``, with ``mu_i`` the
eigenvalues of ``M0`` in ascending order. Floquet exponents are ``f = i omega``; the folded
static matrix is ``F0 = A0 - i Omega diag(m)`` with ``m`` the folding numbers.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import logm
from scipy.optimize import brentq

from .errors import (
    AssumptionViolationError,
    BranchError,
    InsufficientHarmonicsError,
    NearResonanceError,
    NotDiagonalizableError,
    SingularQuasimomentumError,
    UnsupportedMultiplicityError,
)
from .floquet import fold, folding_number, monodromy

__all__ = [
    "StaticDiagonalization",
    "DegeneratePoint",
    "PerturbationResult",
    "static_diagonalization",
    "unfolded_frequencies",
    "a1_coefficients",
    "find_degeneracies",
    "f1_block",
    "p_value",
    "extract_f",
    "effective_hamiltonian",
    "p0_residual",
    "resonant_f1_entries",
]


def _block(M):
    n = M.shape[0]
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    out[:n, n:] = np.eye(n)
    out[n:, :n] = -M
    return out


def _sorted_mu(M0):
    mu, V = np.linalg.eig(np.asarray(M0, dtype=complex))
    order = np.argsort(mu.real)
    return mu[order], V[:, order]


def unfolded_frequencies(M0) -> np.ndarray:
    """Static frequencies in slot order: ``(+sqrt(mu_0), -sqrt(mu_0), +sqrt(mu_1), ...)``."""
    mu, _ = _sorted_mu(M0)
    w = np.sqrt(mu.real.clip(min=0.0))
    out = np.empty(2 * len(w))
    out[0::2] = w
    out[1::2] = -w
    return out


@dataclass
class StaticDiagonalization:
    A0: np.ndarray
    S: np.ndarray
    Sinv: np.ndarray
    folding_numbers: np.ndarray
    Omega: float
    omega_a: np.ndarray  # unfolded static frequencies per slot

    @property
    def F0(self) -> np.ndarray:
        return self.A0 - 1j * self.Omega * np.diag(self.folding_numbers)

    @property
    def folded(self) -> np.ndarray:
        """Folded static quasifrequencies per slot."""
        return self.omega_a - self.Omega * self.folding_numbers

    @property
    def size(self) -> int:
        return self.A0.shape[0]


def static_diagonalization(M0, Omega: float, degenerate=None, tol: float = 1e-6) -> StaticDiagonalization:
    """Diagonalise ``Ã0`` with unit-norm eigenvector columns whose first nonzero entry is real positive.

    ``degenerate`` names slot pairs that are allowed to share a folded value (together with their
    negated partners); any other pair of distinct slots congruent modulo ``Omega`` (within
    ``tol``) violates the non-resonance assumption.
    """
    M0 = np.asarray(M0, dtype=complex)
    n = M0.shape[0]
    mu, V = _sorted_mu(M0)
    if np.any(mu.real <= 0):
        raise NotDiagonalizableError("M0 must have positive eigenvalues (zero eigenvalue makes Ã0 defective)")
    lam = 1j * np.sqrt(mu.real)
    W = np.zeros((2 * n, 2 * n), dtype=complex)
    A0 = np.zeros(2 * n, dtype=complex)
    for i in range(n):
        for s, sign in enumerate((1.0, -1.0)):
            col = np.concatenate([V[:, i], sign * lam[i] * V[:, i]])
            W[:, 2 * i + s] = col
            A0[2 * i + s] = sign * lam[i]
    for j in range(2 * n):
        col = W[:, j] / np.linalg.norm(W[:, j])
        k = np.flatnonzero(np.abs(col) > 1e-14 * np.max(np.abs(col)))[0]
        W[:, j] = col * np.exp(-1j * np.angle(col[k]))
    cond = np.linalg.cond(W)
    if not np.isfinite(cond) or cond > 1e10:
        raise NotDiagonalizableError(f"Ã0 is (numerically) defective: eigenvector condition number {cond:.3g}")
    Sinv = W
    S = np.linalg.inv(W)
    omega_a = A0.imag.copy()
    m = np.array([folding_number(w, Omega)[1] for w in omega_a])
    diag = StaticDiagonalization(np.diag(A0), S, Sinv, m, float(Omega), omega_a)
    allowed = set()
    for a, b in degenerate or ():
        allowed.add(tuple(sorted((a, b))))
        # the static spectrum is symmetric under omega -> -omega, so the negated pair collides too
        allowed.add(tuple(sorted((a ^ 1, b ^ 1))))
    folded = diag.folded
    for a in range(2 * n):
        for b in range(a + 1, 2 * n):
            if (a, b) in allowed:
                continue
            d = abs(folded[a] - folded[b])
            d = min(d, Omega - d)
            if d <= tol and abs(omega_a[a] - omega_a[b]) > tol:
                raise AssumptionViolationError(
                    f"slots {a} and {b} are congruent modulo Omega (folded values {folded[a]:.9g}, {folded[b]:.9g})"
                )
    return diag


def a1_coefficients(diag: StaticDiagonalization, M1: dict) -> dict[int, np.ndarray]:
    """Fourier coefficients of ``A1 = S Ã1 S^{-1}`` with ``Ã1 = [[0, 0], [-M1, 0]]``."""
    n = diag.size // 2
    out = {}
    for k, m1 in M1.items():
        At = np.zeros((2 * n, 2 * n), dtype=complex)
        At[n:, :n] = -np.asarray(m1)
        out[int(k)] = diag.S @ At @ diag.Sinv
    return out


@dataclass
class DegeneratePoint:
    alpha: np.ndarray
    omega0: float  # folded static quasifrequency
    indices: tuple[int, int]
    folding_numbers: tuple[int, int]
    multiplicity: int = 2
    gap: float = 0.0  # residual |folded_l - folded_k| after refinement

    @property
    def f0(self) -> complex:
        """Degenerate eigenvalue of ``F0`` (Floquet exponent ``i omega0``)."""
        return 1j * self.omega0

    def mirrored(self) -> DegeneratePoint:
        return DegeneratePoint(-np.asarray(self.alpha), self.omega0, self.indices, self.folding_numbers,
                               self.multiplicity, self.gap)


def _pair_gaps(M0, Omega, kmax):
    w = unfolded_frequencies(M0)
    out = {}
    for a in range(len(w)):
        for b in range(a + 1, len(w)):
            for k in range(-kmax, kmax + 1):
                if k != 0:
                    out[(a, b, k)] = w[a] - w[b] - k * Omega
    return out


def find_degeneracies(m0_provider, Omega: float, alphas, tol: float = 1e-6, refine_tol: float = 1e-8,
                      flagged=None, m0_samples=None, mirror: bool = True) -> list[DegeneratePoint]:
    """Locate folding-induced collisions of static bands along a sampled path.

    For each pair of slots and each nonzero integer ``k`` the function
    ``omega_a - omega_b - k Omega`` is scanned for sign changes between consecutive samples and
    the root is refined with Brent's method. Crossings with equal folding numbers are never
    reported. With ``mirror`` the ``-alpha`` partner of every point is appended.
    """
    pts = np.asarray(getattr(alphas, "points", alphas), dtype=float)
    K = len(pts)
    flagged = np.zeros(K, bool) if flagged is None else np.asarray(flagged, bool)
    if m0_samples is None:
        m0_samples = []
        for j in range(K):
            try:
                m0_samples.append(None if flagged[j] else m0_provider(pts[j]))
            except SingularQuasimomentumError:
                m0_samples.append(None)
    wmax = max(np.max(np.abs(unfolded_frequencies(M))) for M in m0_samples if M is not None)
    kmax = int(np.ceil(2 * wmax / Omega)) + 1
    gaps = [None if M is None else _pair_gaps(M, Omega, kmax) for M in m0_samples]
    found = []
    for j in range(K - 1):
        if gaps[j] is None or gaps[j + 1] is None:
            continue
        for key, g0 in gaps[j].items():
            g1 = gaps[j + 1][key]
            if g0 == 0.0 and j > 0:
                continue  # counted as the right end of the previous segment
            if g0 * g1 > 0 or (g0 != 0 and g1 == 0):
                continue
            a, b, k = key
            p0, p1 = pts[j], pts[j + 1]

            def g(tau, a=a, b=b, k=k, p0=p0, p1=p1):
                w = unfolded_frequencies(m0_provider(p0 + tau * (p1 - p0)))
                return w[a] - w[b] - k * Omega

            if g0 == 0.0:
                tau = 0.0
            else:
                tau = brentq(g, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            alpha = p0 + tau * (p1 - p0)
            M0 = m0_provider(alpha)
            w = unfolded_frequencies(M0)
            resid = abs(w[a] - w[b] - k * Omega)
            if resid > refine_tol:
                continue  # a jump (e.g. sorted-band exchange), not a crossing
            folded = np.array([folding_number(x, Omega)[0] for x in w])
            ms = [folding_number(x, Omega)[1] for x in w]
            if ms[a] == ms[b]:
                continue
            d = np.abs(folded - folded[a])
            d = np.minimum(d, Omega - d)
            mult = int(np.sum(d <= tol))
            found.append(DegeneratePoint(alpha, float(folded[a]), (a, b), (ms[a], ms[b]), mult, float(resid)))
    # dedupe: the same crossing can be bracketed twice around a sample hit exactly
    uniq = []
    for p in found:
        if not any(q.indices == p.indices and np.linalg.norm(q.alpha - p.alpha) < 1e-7 for q in uniq):
            uniq.append(p)
    if mirror:
        extra = []
        for p in uniq:
            if not any(q.indices == p.indices and np.linalg.norm(q.alpha + p.alpha) < 1e-7 for q in uniq + extra):
                extra.append(p.mirrored())
        uniq.extend(extra)
    return uniq


def f1_block(diag: StaticDiagonalization, A1: dict, indices) -> np.ndarray:
    """``[[ (A1^(0))_ll, (A1^(m_l-m_k))_lk ], [ (A1^(m_k-m_l))_kl, (A1^(0))_kk ]]``."""
    l, k = indices
    ml, mk = int(diag.folding_numbers[l]), int(diag.folding_numbers[k])
    need = (0, ml - mk, mk - ml)
    for n in need:
        if n not in A1:
            raise InsufficientHarmonicsError(f"Fourier order {n} missing from A1 coefficients")
    return np.array([[A1[0][l, l], A1[ml - mk][l, k]], [A1[mk - ml][k, l], A1[0][k, k]]])


@dataclass
class PerturbationResult:
    alpha: np.ndarray
    omega0: float
    indices: tuple[int, int]
    folding_numbers: tuple[int, int]
    F1: np.ndarray = field(repr=False)
    p: complex = 0j
    r: complex = 0j
    second_order_shift: complex | None = None

    @property
    def f0(self) -> complex:
        return 1j * self.omega0

    def predicted_edges(self, eps: float) -> tuple[complex, complex]:
        """Perturbed Floquet exponents ``f0 +- eps r`` to first order."""
        return (self.f0 + eps * self.r, self.f0 - eps * self.r)

    def predicted_omegas(self, eps: float) -> tuple[complex, complex]:
        """The same edges as quasifrequencies ``omega = -i f``."""
        a, b = self.predicted_edges(eps)
        return (-1j * a, -1j * b)

    def predicted_splitting(self, eps: float) -> float:
        return 2.0 * abs(eps) * abs(self.r)


def p_value(diag: StaticDiagonalization, A1: dict, point: DegeneratePoint) -> PerturbationResult:
    """First-order rate ``p = (F1)_lk (F1)_kl`` and ``r = sqrt(p)`` at a double degenerate point."""
    if point.multiplicity > 2:
        raise UnsupportedMultiplicityError(f"degenerate point of multiplicity {point.multiplicity}")
    F1 = f1_block(diag, A1, point.indices)
    p = complex(F1[0, 1] * F1[1, 0])
    r = complex(np.sqrt(p))
    return PerturbationResult(np.asarray(point.alpha), point.omega0, tuple(point.indices),
                              tuple(point.folding_numbers), F1, p, r)


@dataclass
class FloquetExpansion:
    F0: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    residual: float
    h: float
    degree: int


def extract_f(family, eps_grid, diag: StaticDiagonalization, degree: int = 2, rtol: float = 1e-10,
              atol: float = 1e-12, jobs: int = 1) -> FloquetExpansion:
    """Fit ``F_eps = Log(X_eps(T))/T`` (in the diagonalising basis) by a polynomial in ``eps``.

    ``family`` maps ``eps`` to a :class:`FirstOrderSystem`. The logarithm's branch cut is placed
    midway in the widest gap between the static multipliers, so exponents on the zone edge may
    come out shifted by ``i Omega`` relative to ``diag.F0`` (pairs sharing a folded value shift
    together). Eigenvalues that drift by more than ``Omega/4`` raise :class:`BranchError`. ``degree`` 2 is the plain quadratic model; higher degrees reduce the bias
    of the fitted ``F1``/``F2`` from the neglected powers of ``eps``.
    """
    eps_grid = np.asarray(sorted(eps_grid), dtype=float)
    if not np.allclose(eps_grid, -eps_grid[::-1], atol=1e-15):
        raise ValueError("eps grid must be symmetric around 0")
    if len(eps_grid) < degree + 1:
        raise ValueError("eps grid too small for the requested degree")
    Omega = diag.Omega
    T = 2.0 * np.pi / Omega
    # rotate the logarithm's branch cut into the widest gap between static multipliers, so
    # exponents sitting on the zone edge do not flip sides as eps varies
    args = np.sort(np.mod(np.diag(diag.F0).imag * T, 2.0 * np.pi))
    gaps = np.diff(np.concatenate([args, [args[0] + 2.0 * np.pi]]))
    g = int(np.argmax(gaps))
    cut = args[g] + 0.5 * gaps[g]
    theta = cut - np.pi  # principal log of exp(-i theta) Y puts the cut at arg = cut

    def one(eps):
        sysm = family(eps)
        X = monodromy(sysm, rtol, atol).X
        Y = diag.S @ X @ diag.Sinv
        F = (logm(np.exp(-1j * theta) * Y) + 1j * theta * np.eye(len(Y))) / sysm.period
        return F

    def check(F, F_ref, eps):
        ev = np.linalg.eigvals(F).imag
        dist = np.abs(np.subtract.outer(ev, np.diag(F_ref).imag)).min(axis=1)
        if np.max(dist) > 0.25 * Omega:
            raise BranchError(f"logarithm branch jumped at eps={eps:g}; shift Omega or the eps grid")

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(jobs) as ex:
            Fs = list(ex.map(one, eps_grid))
    else:
        Fs = [one(e) for e in eps_grid]
    Fs = np.array(Fs)
    ref = Fs[int(np.argmin(np.abs(eps_grid)))]
    for e, F in zip(eps_grid, Fs):
        check(F, ref, e)
    V = np.vander(eps_grid, degree + 1, increasing=True)
    shape = Fs.shape[1:]
    coef, *_ = np.linalg.lstsq(V, Fs.reshape(len(eps_grid), -1), rcond=None)
    fit = V @ coef
    residual = float(np.max(np.abs(fit - Fs.reshape(len(eps_grid), -1))))
    coef = coef.reshape((degree + 1,) + shape)
    F2 = coef[2] if degree >= 2 else np.zeros(shape, complex)
    h = float(np.min(np.abs(eps_grid[eps_grid != 0]))) if np.any(eps_grid != 0) else 0.0
    return FloquetExpansion(coef[0], coef[1], F2, residual, h, degree)


class EffectiveHamiltonian:
    """``H(eps) = f0 I + eps P F1 P + eps^2 P (F1 G F1 + F2) P`` on the slots ``indices``."""

    def __init__(self, F0, F1, F2, indices, tol: float = 1e-10):
        F0 = np.asarray(F0)
        idx = list(indices)
        d = np.diag(F0)
        self.f0 = complex(np.mean(d[idx]))
        others = [j for j in range(F0.shape[0]) if j not in idx]
        denom = self.f0 - d[others]
        if np.any(np.abs(denom) < tol):
            j = others[int(np.argmin(np.abs(denom)))]
            raise NearResonanceError(f"f0 - (F0)_jj = {denom.min():.3g} for non-degenerate slot {j}")
        G = np.zeros_like(F0, dtype=complex)
        G[others, others] = 1.0 / denom
        F1 = np.asarray(F1)
        F2 = np.asarray(F2)
        self.indices = tuple(idx)
        self.H1 = F1[np.ix_(idx, idx)]
        self.H2 = (F1 @ G @ F1 + F2)[np.ix_(idx, idx)]

    def __call__(self, eps: float) -> np.ndarray:
        r = len(self.indices)
        return self.f0 * np.eye(r) + eps * self.H1 + eps**2 * self.H2

    def eigenvalues(self, eps: float) -> np.ndarray:
        return np.linalg.eigvals(self(eps))


def effective_hamiltonian(F0, F1, F2, indices, tol: float = 1e-10) -> EffectiveHamiltonian:
    return EffectiveHamiltonian(F0, F1, F2, indices, tol)


def p0_residual(diag: StaticDiagonalization, times) -> float:
    """Max residual of ``p0(t) = sum_k exp(i Omega m_k t) e_(kk)`` in ``p0' = (1 (x) A0 - F0^T (x) 1) p0``."""
    n = diag.size
    L = np.kron(np.eye(n), diag.A0) - np.kron(diag.F0.T, np.eye(n))
    m = diag.folding_numbers
    idx = np.arange(n) * n + np.arange(n)  # column-major position of E_kk
    worst = 0.0
    for t in np.atleast_1d(times):
        p0 = np.zeros(n * n, complex)
        p0[idx] = np.exp(1j * diag.Omega * m * t)
        dp0 = np.zeros(n * n, complex)
        dp0[idx] = 1j * diag.Omega * m * np.exp(1j * diag.Omega * m * t)
        scale = max(np.linalg.norm(L @ p0), np.linalg.norm(dp0), 1.0)
        worst = max(worst, float(np.linalg.norm(dp0 - L @ p0) / scale))
    return worst


def resonant_f1_entries(diag: StaticDiagonalization, A1: dict, tol: float = 1e-9) -> dict[tuple[int, int], complex]:
    """Entries of ``F1`` forced by the order-one vectorised system (verification harness).

    For every Fourier index ``m`` the operator ``i Omega m - (1 (x) A0 - F0^T (x) 1)`` is diagonal;
    at each vanishing entry the right-hand side must vanish too, which pins ``(F1)_jl``.
    """
    n = diag.size
    L = np.kron(np.eye(n), diag.A0) - np.kron(diag.F0.T, np.eye(n))
    Ldiag = np.diag(L)
    m = diag.folding_numbers
    e = [np.eye(n * n)[:, k * n + k] for k in range(n)]
    out = {}
    for mm in sorted(set(int(x) for x in m)):
        lhs = 1j * diag.Omega * mm - Ldiag
        b = np.zeros(n * n, complex)
        for k in range(n):
            key = mm - int(m[k])
            if key in A1:
                b += np.kron(np.eye(n), A1[key]) @ e[k]
        D = np.diag((m == mm).astype(float))
        coef = np.diag(np.kron(np.eye(n), D))  # F1 enters as vec(D_m F1) = (1 (x) D_m) vec(F1)
        for pos in np.flatnonzero(np.abs(lhs) <= tol * max(1.0, diag.Omega)):
            if coef[pos] != 0:
                row, col = pos % n, pos // n
                out[(row, col)] = complex(b[pos] / coef[pos])
    return out
