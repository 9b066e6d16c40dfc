"""Time-periodic material modulations and the governing matrix ``M(t)``.

The second-order system is ``phi'' + M(t) phi = 0`` with

    M(t) = (delta kappa_r / rho_r) W1(t) C W2(t) + W3(t),
    W1 = diag(sqrt(kappa_i) rho_i / |D_i|),  W2 = diag(sqrt(kappa_i) / rho_i),
    W3 = diag(sqrt(kappa_i)/2 * d/dt(kappa_i' / kappa_i^{3/2})).

Modulations are finite Fourier series of ``1/rho_i`` and ``1/kappa_i``. A profile stores
unit-amplitude shapes; the amplitude ``epsilon`` scales every non-constant harmonic, so the
same profile object also describes the whole family ``epsilon -> M_epsilon(t)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ModulationError

__all__ = [
    "ModulationProfile",
    "CouplingParams",
    "TimeMatrix",
    "cosine_profile",
    "fourier_profile",
    "assemble_m",
    "eps_expansion",
]

POSITIVITY_GRID = 1024


def _as_table(coeffs, N, name):
    """Normalise per-resonator coefficient maps ``{n: c_n}`` into an ``(N, 2H+1)`` array."""
    if len(coeffs) != N:
        raise ModulationError(f"{name}: expected {N} coefficient tables, got {len(coeffs)}")
    H = 0
    for tab in coeffs:
        if tab:
            H = max(H, max(abs(int(n)) for n in tab))
    out = np.zeros((N, 2 * H + 1), dtype=complex)
    for i, tab in enumerate(coeffs):
        for n, c in tab.items():
            out[i, int(n) + H] += complex(c)
    return out


@dataclass(frozen=True)
class ModulationProfile:
    """Per-resonator modulation of ``1/rho_i`` and ``1/kappa_i``.

    ``rho_shape[i, H + n]`` is the unit-amplitude Fourier coefficient of ``1/rho_i`` at
    harmonic ``n``; the effective coefficients are ``c_0`` and ``epsilon * c_n`` (n != 0).
    """

    N: int
    omega: float
    epsilon: float
    rho_shape: np.ndarray = field(repr=False)
    kappa_shape: np.ndarray = field(repr=False)
    phases: tuple[float, ...] | None = None
    family: str = "fourier"

    def __post_init__(self):
        if not self.omega > 0:
            raise ModulationError("modulation frequency must be positive")
        if not -1.0 < self.epsilon < 1.0:
            raise ModulationError(f"epsilon={self.epsilon} outside (-1, 1)")
        for name, tab in (("rho", self.rho_shape), ("kappa", self.kappa_shape)):
            if tab.ndim != 2 or tab.shape[0] != self.N or tab.shape[1] % 2 != 1:
                raise ModulationError(f"{name} table has shape {tab.shape}")
            H = tab.shape[1] // 2
            if not np.allclose(tab[:, ::-1], tab.conj(), atol=1e-14, rtol=0):
                raise ModulationError(f"1/{name}_i(t) is not real: c(-n) != conj(c(n))")
            del H
        t = np.linspace(0.0, self.period, POSITIVITY_GRID, endpoint=False)
        if np.min(self.rho_inv(t)) <= 0:
            raise ModulationError("1/rho_i(t) must stay positive; reduce epsilon")
        if np.min(self.kappa_inv(t)) <= 0:
            raise ModulationError("1/kappa_i(t) must stay positive; reduce epsilon")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    @property
    def kappa_constant(self) -> bool:
        H = self.kappa_shape.shape[1] // 2
        rest = np.delete(self.kappa_shape, H, axis=1)
        return bool(np.all(rest == 0))

    def _effective(self, shape):
        H = shape.shape[1] // 2
        out = self.epsilon * shape
        out[:, H] = shape[:, H]
        return out

    @property
    def rho_inv_coeffs(self) -> np.ndarray:
        """Effective Fourier coefficients of ``1/rho_i``, shape ``(N, 2H+1)``."""
        return self._effective(self.rho_shape)

    @property
    def kappa_inv_coeffs(self) -> np.ndarray:
        return self._effective(self.kappa_shape)

    def _series(self, coeffs, t, deriv=0):
        t = np.asarray(t, dtype=float)
        H = coeffs.shape[1] // 2
        n = np.arange(-H, H + 1)
        ph = np.exp(1j * self.omega * np.multiply.outer(t, n))
        fac = (1j * self.omega * n) ** deriv
        return np.real(ph @ (coeffs * fac).T)

    def rho_inv(self, t, deriv: int = 0):
        """``d^k/dt^k (1/rho_i)(t)``; shape ``t.shape + (N,)``."""
        return self._series(self.rho_inv_coeffs, t, deriv)

    def kappa_inv(self, t, deriv: int = 0):
        return self._series(self.kappa_inv_coeffs, t, deriv)

    def with_epsilon(self, epsilon: float) -> ModulationProfile:
        return replace(self, epsilon=float(epsilon))


def cosine_profile(N: int, omega: float, epsilon: float, phases) -> ModulationProfile:
    """``rho_i(t) = 1 / (1 + epsilon cos(omega t + phi_i))`` with constant ``kappa_i``."""
    phases = tuple(float(p) for p in phases)
    if len(phases) != N:
        raise ModulationError(f"need {N} phases, got {len(phases)}")
    if not 0.0 <= epsilon < 1.0:
        raise ModulationError(f"epsilon must lie in [0, 1) for positivity, got {epsilon}")
    rho = np.zeros((N, 3), dtype=complex)
    rho[:, 1] = 1.0
    rho[:, 2] = 0.5 * np.exp(1j * np.asarray(phases))
    rho[:, 0] = np.conj(rho[:, 2])
    kappa = np.ones((N, 1), dtype=complex)
    return ModulationProfile(N, float(omega), float(epsilon), rho, kappa, phases, "cosine")


def fourier_profile(omega: float, epsilon: float, rho_inv, kappa_inv=None) -> ModulationProfile:
    """Profile from explicit per-resonator coefficient maps ``[{n: c_n}, ...]`` (unit amplitude)."""
    N = len(rho_inv)
    if kappa_inv is None:
        kappa_inv = [{0: 1.0} for _ in range(N)]
    if not 0.0 <= epsilon < 1.0:
        raise ModulationError(f"epsilon must lie in [0, 1), got {epsilon}")
    rho = _as_table(rho_inv, N, "rho_inv")
    kappa = _as_table(kappa_inv, N, "kappa_inv")
    return ModulationProfile(N, float(omega), float(epsilon), rho, kappa, None, "fourier")


@dataclass(frozen=True)
class CouplingParams:
    """Physical scales: contrast ``delta``, ``kappa_r``, ``rho_r`` and resonator areas."""

    volumes: tuple[float, ...]
    delta: float = 1e-3
    kappa_r: float = 1.0
    rho_r: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "volumes", tuple(float(v) for v in self.volumes))
        if not 0 < self.delta <= 1e-2:
            raise ModulationError(f"delta={self.delta} outside the subwavelength regime (0, 1e-2]")
        if not (self.kappa_r > 0 and self.rho_r > 0):
            raise ModulationError("kappa_r and rho_r must be positive")
        if not self.volumes or any(not v > 0 for v in self.volumes):
            raise ModulationError("resonator volumes must be positive")

    @classmethod
    def for_layout(cls, layout, **kw) -> CouplingParams:
        return cls(tuple(layout.volumes), **kw)

    @property
    def prefactor(self) -> float:
        return self.delta * self.kappa_r / self.rho_r


class TimeMatrix:
    """``M(t)`` over one period, with its Fourier coefficients ``M = sum_n M^(n) e^{i n Omega t}``."""

    def __init__(self, profile: ModulationProfile, C, coupling: CouplingParams):
        C = np.asarray(getattr(C, "entries", C), dtype=complex)
        N = profile.N
        if C.shape != (N, N):
            raise ModulationError(f"capacitance matrix shape {C.shape} does not match N={N}")
        if len(coupling.volumes) != N:
            raise ModulationError(f"{len(coupling.volumes)} volumes for N={N} resonators")
        self.profile = profile
        self.C = C
        self.coupling = coupling
        self.omega = profile.omega
        self.period = profile.period
        self.N = N
        self._inv_vol = 1.0 / np.asarray(coupling.volumes)
        self._static = bool(profile.epsilon == 0.0)
        self.fourier_coeffs = self._fourier()

    def __call__(self, t):
        """``M(t)``; scalar ``t`` gives ``(N, N)``, array ``t`` gives ``t.shape + (N, N)``."""
        t_arr = np.asarray(t, dtype=float)
        if self._static:
            M0 = self.coupling.prefactor * self._inv_vol[:, None] * self.C
            return np.broadcast_to(M0, t_arr.shape + M0.shape).copy()
        p = self.profile
        rho = 1.0 / p.rho_inv(t_arr)
        if p.kappa_constant:
            sk = np.sqrt(1.0 / p.kappa_inv(t_arr))
            w1 = sk * rho * self._inv_vol
            w2 = sk / rho
            return self.coupling.prefactor * w1[..., :, None] * self.C * w2[..., None, :]
        u = p.kappa_inv(t_arr)
        du = p.kappa_inv(t_arr, 1)
        ddu = p.kappa_inv(t_arr, 2)
        sk = np.sqrt(1.0 / u)
        w1 = sk * rho * self._inv_vol
        w2 = sk / rho
        w3 = 0.5 * (-ddu / u + 0.5 * (du / u) ** 2)
        out = self.coupling.prefactor * w1[..., :, None] * self.C * w2[..., None, :]
        idx = np.arange(self.N)
        out[..., idx, idx] += w3
        return out

    def w3(self, t):
        """Diagonal of ``W3(t)``, computed from the exact derivatives of the ``1/kappa`` series."""
        p = self.profile
        u = p.kappa_inv(t)
        return 0.5 * (-p.kappa_inv(t, 2) / u + 0.5 * (p.kappa_inv(t, 1) / u) ** 2)

    def _fourier(self) -> dict[int, np.ndarray]:
        if self._static:
            return {0: self(0.0)}
        p = self.profile
        if p.family == "cosine" and p.kappa_constant:
            return self._cosine_fourier()
        return self._numeric_fourier()

    def _cosine_fourier(self) -> dict[int, np.ndarray]:
        # rho_i(t) = 1/(1 + eps cos(x_i)) = sum_n a^{|n|} e^{i n x_i} / sqrt(1 - eps^2), a = -(1 - sqrt(1-eps^2))/eps
        p = self.profile
        eps = p.epsilon
        s = np.sqrt(1.0 - eps * eps)
        a = -(1.0 - s) / eps
        nmax = 2
        if abs(a) > 0:
            nmax = int(np.ceil(np.log(1e-18) / np.log(abs(a)))) + 2
        nmax = max(nmax, 2)
        phi = np.asarray(p.phases)
        n = np.arange(-nmax - 1, nmax + 2)
        rho_c = (a ** np.abs(n))[None, :] * np.exp(1j * np.outer(phi, n)) / s  # (N, len(n))
        off = nmax + 1
        base = self.coupling.prefactor * self._inv_vol[:, None] * self.C
        up = 0.5 * eps * np.exp(1j * phi)  # coefficient of e^{+i Omega t} in 1/rho_j
        dn = np.conj(up)
        out = {}
        for m in range(-nmax, nmax + 1):
            # (rho_i * (1/rho_j))^(m) = rho_i^(m) + up_j rho_i^(m-1) + dn_j rho_i^(m+1)
            r0 = rho_c[:, m + off][:, None]
            rm = rho_c[:, m - 1 + off][:, None]
            rp = rho_c[:, m + 1 + off][:, None]
            coef = r0 + up[None, :] * rm + dn[None, :] * rp
            out[m] = base * coef
        return out

    def _numeric_fourier(self, grid: int = 1024) -> dict[int, np.ndarray]:
        t = np.arange(grid) * self.period / grid
        vals = self(t)
        coeffs = np.fft.fft(vals, axis=0) / grid
        scale = max(np.max(np.abs(coeffs)), 1e-300)
        out = {}
        for m in range(-(grid // 2) + 1, grid // 2):
            c = coeffs[m % grid]
            if m == 0 or np.max(np.abs(c)) > 1e-17 * scale:
                out[m] = c
        return out

    def reconstruct(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (self.N, self.N), dtype=complex)
        for m, c in self.fourier_coeffs.items():
            out += np.exp(1j * m * self.omega * t)[..., None, None] * c
        return out

    def with_epsilon(self, epsilon: float) -> TimeMatrix:
        return TimeMatrix(self.profile.with_epsilon(epsilon), self.C, self.coupling)


def assemble_m(profile: ModulationProfile, C, coupling: CouplingParams) -> TimeMatrix:
    return TimeMatrix(profile, C, coupling)


@dataclass
class EpsExpansion:
    M0: np.ndarray
    M1: dict[int, np.ndarray]
    error_estimate: float = 0.0
    method: str = "analytic"

    def padded(self, nmax: int) -> dict[int, np.ndarray]:
        """``M1`` with explicit zero matrices for every absent order ``|n| <= nmax``.

        Both expansion paths capture the full support of ``M1``, so absent orders are zero.
        """
        z = np.zeros_like(self.M0, dtype=complex)
        out = {n: z for n in range(-nmax, nmax + 1)}
        out.update(self.M1)
        return out


def eps_expansion(tm: TimeMatrix, method: str = "auto", h: float = 1e-4) -> EpsExpansion:
    """First-order expansion ``M_eps(t) = M0 + eps * sum_n M1^(n) e^{i n Omega t} + O(eps^2)``.

    The analytic path covers the cosine family with constant ``kappa``; otherwise central
    differences at ``eps = +-h`` and ``+-h/2`` are Richardson-combined.
    """
    p = tm.profile
    if method == "auto":
        method = "analytic" if (p.family == "cosine" and p.kappa_constant) else "numeric"
    base = tm.coupling.prefactor * tm._inv_vol[:, None] * tm.C
    if method == "analytic":
        if p.family != "cosine" or not p.kappa_constant:
            raise ModulationError("analytic expansion only covers the cosine family with constant kappa")
        e = np.exp(1j * np.asarray(p.phases))
        M1p = base * 0.5 * (e[None, :] - e[:, None])
        M1m = base * 0.5 * (np.conj(e)[None, :] - np.conj(e)[:, None])
        return EpsExpansion(tm.with_epsilon(0.0)(0.0), {-1: M1m, 0: np.zeros_like(base), 1: M1p}, 0.0, "analytic")
    if method != "numeric":
        raise ValueError(f"unknown method {method!r}")

    def central(step):
        plus = tm.with_epsilon(step)._numeric_fourier()
        minus = tm.with_epsilon(-step)._numeric_fourier()
        keys = set(plus) | set(minus)
        z = np.zeros_like(base)
        return {m: (plus.get(m, z) - minus.get(m, z)) / (2 * step) for m in keys}

    d1 = central(h)
    d2 = central(h / 2)
    keys = sorted(set(d1) | set(d2))
    z = np.zeros_like(base)
    rich = {m: (4 * d2.get(m, z) - d1.get(m, z)) / 3 for m in keys}
    scale = max(max(np.max(np.abs(v)) for v in rich.values()), 1e-300)
    err = max(np.max(np.abs(rich[m] - d2.get(m, z))) for m in keys) / scale
    if err > 1e-8:
        raise ModulationError(f"numeric epsilon-expansion truncation error {err:.2e} exceeds 1e-8")
    M1 = {m: v for m, v in rich.items() if np.max(np.abs(v)) > 1e-9 * scale or m in (-1, 0, 1)}
    M1.setdefault(0, z.copy())
    return EpsExpansion(tm.with_epsilon(0.0)(0.0), M1, float(err), "numeric")
