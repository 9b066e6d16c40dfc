"""Quasiperiodic capacitance matrices of disk resonators.

The static (k = 0) alpha-quasiperiodic Green's function

    G(x, y) = -1/|Y| * sum_q exp(i(alpha+q).(x-y)) / |alpha+q|^2

is evaluated with an Ewald split: a Gaussian-damped dual-lattice sum plus a
real-space image sum of exponential integrals. The split isolates the
logarithmic singularity ``log|x-y| / (2 pi)`` analytically, which lets the
single-layer operator on each circle be discretised with Kress' product
quadrature for the log kernel and the trapezoid rule for the smooth rest.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as la
from scipy.special import exp1

from .errors import NumericalError, ParseError, SingularQuasimomentumError, ValidationError
from .lattice import BrillouinPath, Lattice, ResonatorLayout, dual_lattice

__all__ = [
    "GreenParams",
    "CapacitanceMatrix",
    "QuasiperiodicGreen",
    "green_alpha_zero",
    "spectral_green_sum",
    "assemble_single_layer",
    "capacitance_matrix",
    "capacitance_field",
    "distance_to_dual_lattice",
    "KernelTables",
    "kernel_tables",
    "save_capacitance",
    "load_capacitance",
    "export_abs_csv",
]

EULER_GAMMA = 0.5772156649015329
# exp(-40) ~ 4e-18: terms beyond this are below double precision of an O(1) result
_EWALD_CUTOFF = 40.0
SINGULAR_ALPHA_TOL = 1e-10
FLAG_TOL = 1e-6


@dataclass(frozen=True)
class GreenParams:
    """Discretisation parameters.

    truncation: dual-lattice points with ``|q| <= truncation * max(|q1|, |q2|)`` enter the
        spectral sum.
    quadrature_points: nodes per resonator boundary.
    ewald_eta: splitting parameter; ``None`` picks ``sqrt(pi / |Y|)``.
    """

    truncation: int = 12
    quadrature_points: int = 64
    ewald_eta: float | None = None

    def __post_init__(self):
        if int(self.truncation) != self.truncation or self.truncation < 4:
            raise ValueError("truncation must be an integer >= 4")
        if int(self.quadrature_points) != self.quadrature_points or self.quadrature_points < 16:
            raise ValueError("quadrature_points must be an integer >= 16")
        if self.quadrature_points % 2:
            raise ValueError("quadrature_points must be even")
        if self.ewald_eta is not None and not self.ewald_eta > 0:
            raise ValueError("ewald_eta must be positive")


@dataclass(frozen=True)
class CapacitanceMatrix:
    alpha: tuple[float, float]
    entries: np.ndarray = field(repr=False)
    layout_hash: str = ""
    hermitian_defect: float = 0.0
    flagged: bool = False

    @property
    def N(self) -> int:
        return self.entries.shape[0]


def _ein(x):
    """Entire exponential integral ``Ein(x) = E1(x) + gamma + log(x)`` for ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 0.5
    xs = x[small]
    term = xs.copy()
    acc = xs.copy()
    for k in range(2, 24):
        term = -term * xs * (k - 1) / (k * k)
        acc += term
    out[small] = acc
    xl = x[~small]
    out[~small] = exp1(xl) + EULER_GAMMA + np.log(xl)
    return out


class QuasiperiodicGreen:
    """Static quasiperiodic Green's function of one lattice at one quasimomentum."""

    def __init__(self, lattice: Lattice, alpha, params: GreenParams = GreenParams()):
        self.lattice = lattice
        self.alpha = np.asarray(alpha, dtype=float).reshape(2)
        self.params = params
        self.volume = lattice.cell_volume
        self.eta = params.ewald_eta if params.ewald_eta is not None else math.sqrt(math.pi / self.volume)

        q1, q2 = dual_lattice(lattice)
        qmax = params.truncation * max(np.linalg.norm(q1), np.linalg.norm(q2))
        qs = _lattice_ball(q1, q2, qmax)
        k = self.alpha[None, :] + qs
        knorm2 = np.einsum("ij,ij->i", k, k)
        if np.any(np.sqrt(knorm2) < SINGULAR_ALPHA_TOL):
            raise SingularQuasimomentumError(
                f"alpha={tuple(self.alpha)} lies on the dual lattice; the static Green's function does not exist"
            )
        damp = knorm2 / (4.0 * self.eta**2)
        keep = damp <= _EWALD_CUTOFF
        self.k = k[keep]
        self.spectral_weight = -np.exp(-damp[keep]) / (knorm2[keep] * self.volume)

        l1 = np.asarray(lattice.l1)
        l2 = np.asarray(lattice.l2)
        reach = math.sqrt(_EWALD_CUTOFF) / self.eta
        lmin = _shortest_height(l1, l2)
        nmax = int(math.ceil((reach + 2.0 * (np.linalg.norm(l1) + np.linalg.norm(l2))) / lmin)) + 1
        rng = np.arange(-nmax, nmax + 1)
        n1, n2 = np.meshgrid(rng, rng, indexing="ij")
        images = n1.ravel()[:, None] * l1[None, :] + n2.ravel()[:, None] * l2[None, :]
        self.images = images
        self.image_phase = np.exp(1j * images @ self.alpha)
        self.is_origin = (n1.ravel() == 0) & (n2.ravel() == 0)
        self._reach2 = reach**2

    def _spectral(self, r):
        phase = np.exp(1j * (r @ self.k.T))
        return phase @ self.spectral_weight

    def _real(self, r, regular):
        out = np.zeros(r.shape[0], dtype=complex)
        eta2 = self.eta**2
        rmax = float(np.max(np.linalg.norm(r, axis=1))) if len(r) else 0.0
        near = np.linalg.norm(self.images, axis=1) <= rmax + math.sqrt(self._reach2)
        for n, ph, origin in zip(self.images[near], self.image_phase[near], self.is_origin[near]):
            d = r - n[None, :]
            d2 = np.einsum("ij,ij->i", d, d)
            if origin and regular:
                out += (EULER_GAMMA + math.log(eta2) - _ein(eta2 * d2)) / (4.0 * math.pi)
                continue
            mask = d2 <= self._reach2
            if not np.any(mask):
                continue
            val = np.zeros(r.shape[0])
            val[mask] = exp1(eta2 * d2[mask])
            out -= ph * val / (4.0 * math.pi)
        return out

    def __call__(self, r):
        """``G`` at separations ``r = x - y`` (shape ``(..., 2)``); singular where ``r`` is a lattice point."""
        r = np.asarray(r, dtype=float)
        shape = r.shape[:-1]
        flat = r.reshape(-1, 2)
        val = self._spectral(flat) + self._real(flat, regular=False)
        return val.reshape(shape)

    def regular_part(self, r):
        """``G(r) - log|r| / (2 pi)``, smooth near ``r = 0`` (finite limit at ``r = 0``)."""
        r = np.asarray(r, dtype=float)
        shape = r.shape[:-1]
        flat = r.reshape(-1, 2)
        val = self._spectral(flat) + self._real(flat, regular=True)
        return val.reshape(shape)


def _shortest_height(l1, l2):
    area = abs(l1[0] * l2[1] - l1[1] * l2[0])
    return area / max(np.linalg.norm(l1), np.linalg.norm(l2))


def _lattice_ball(q1, q2, radius):
    h = _shortest_height(q1, q2)
    nmax = int(math.ceil(radius / h)) + 1
    rng = np.arange(-nmax, nmax + 1)
    n1, n2 = np.meshgrid(rng, rng, indexing="ij")
    pts = n1.ravel()[:, None] * q1[None, :] + n2.ravel()[:, None] * q2[None, :]
    return pts[np.linalg.norm(pts, axis=1) <= radius * (1 + 1e-12)]


def green_alpha_zero(x, y, alpha, params: GreenParams = GreenParams(), lattice: Lattice | None = None) -> complex:
    """Static quasiperiodic Green's function ``G^{alpha,0}(x, y)`` (unit square lattice by default)."""
    from .lattice import square_lattice

    lat = lattice if lattice is not None else square_lattice()
    g = QuasiperiodicGreen(lat, alpha, params)
    r = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return complex(g(r[None, :])[0])


def spectral_green_sum(x, y, alpha, lattice: Lattice, truncation: int) -> complex:
    """Plain truncated dual-lattice series, without acceleration.

    Converges slowly (conditionally); kept as an independent reference for the Ewald path.
    """
    q1, q2 = dual_lattice(lattice)
    qmax = truncation * max(np.linalg.norm(q1), np.linalg.norm(q2))
    k = np.asarray(alpha, dtype=float)[None, :] + _lattice_ball(q1, q2, qmax)
    k2 = np.einsum("ij,ij->i", k, k)
    if np.any(np.sqrt(k2) < SINGULAR_ALPHA_TOL):
        raise SingularQuasimomentumError("alpha lies on the dual lattice")
    r = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return complex(-np.sum(np.exp(1j * k @ r) / k2) / lattice.cell_volume)


def boundary_nodes(layout: ResonatorLayout, M: int):
    """Midpoint nodes ``theta_a = 2 pi (a + 1/2) / M`` on every circle.

    Returns node coordinates ``(N*M, 2)``, arclength weights ``(N*M,)`` and the angles.
    """
    theta = 2.0 * np.pi * (np.arange(M) + 0.5) / M
    u = np.column_stack([np.cos(theta), np.sin(theta)])
    pts = []
    wts = []
    for c, R in zip(layout.centers, layout.radii):
        pts.append(np.asarray(c)[None, :] + R * u)
        wts.append(np.full(M, 2.0 * np.pi * R / M))
    return np.vstack(pts), np.concatenate(wts), theta


def kress_log_weights(M: int) -> np.ndarray:
    """Weights ``W[a, b]`` with ``int log|2 sin((t_a - s)/2)| f(s) ds ~ sum_b W[a, b] f(t_b)``."""
    n = M // 2
    d = 2.0 * np.pi * (np.arange(M)[:, None] - np.arange(M)[None, :]) / M
    m = np.arange(1, n)
    acc = -(2.0 * np.pi / n) * np.tensordot(np.cos(d[..., None] * m), 1.0 / m, axes=([-1], [0]))
    acc -= (np.pi / n**2) * np.cos(n * d)
    return 0.5 * acc


def _kernel_matrix(layout: ResonatorLayout, green: QuasiperiodicGreen, M: int) -> np.ndarray:
    """Hermitian kernel matrix ``K`` such that the single-layer operator is ``K @ diag(w)``.

    Direct (uncached) evaluation; :class:`KernelTables` produces the same matrix faster.
    """
    N = layout.N
    theta = 2.0 * np.pi * (np.arange(M) + 0.5) / M
    u = np.column_stack([np.cos(theta), np.sin(theta)])
    centers = np.asarray(layout.centers)
    radii = np.asarray(layout.radii)
    K = np.empty((N * M, N * M), dtype=complex)
    logw = kress_log_weights(M)
    for i in range(N):
        R = radii[i]
        diff = R * (u[:, None, :] - u[None, :, :])
        reg = green.regular_part(diff.reshape(-1, 2)).reshape(M, M)
        block = reg + _log_block(R, M, logw)
        K[i * M:(i + 1) * M, i * M:(i + 1) * M] = 0.5 * (block + block.conj().T)
        xi = centers[i][None, :] + R * u
        for j in range(i + 1, N):
            xj = centers[j][None, :] + radii[j] * u
            diff = xi[:, None, :] - xj[None, :, :]
            blk = green(diff.reshape(-1, 2)).reshape(M, M)
            K[i * M:(i + 1) * M, j * M:(j + 1) * M] = blk
            K[j * M:(j + 1) * M, i * M:(i + 1) * M] = blk.conj().T
    return K


def _log_block(R, M, logw):
    # log|x_a - x_b| = log R + log|2 sin((t_a - t_b)/2)|, integrated against R dt and
    # divided by the node weight so the block stays a matrix of kernel values
    w = 2.0 * np.pi * R / M
    return (np.log(R) * (2.0 * np.pi / M) + logw) * (R / (2.0 * np.pi)) / w


def _reduce_alpha(alpha, lattice: Lattice):
    """Representative of ``alpha`` modulo the dual lattice, closest to the origin."""
    q1, q2 = dual_lattice(lattice)
    Q = np.column_stack([q1, q2])
    frac = np.linalg.solve(Q, alpha)
    base = np.floor(frac)
    best = None
    for d1 in (-1, 0, 1, 2):
        for d2 in (-1, 0, 1, 2):
            cand = alpha - Q @ (base + np.array([d1, d2]))
            if best is None or np.linalg.norm(cand) < np.linalg.norm(best) - 1e-12:
                best = cand
    return best


class KernelTables:
    """Alpha-independent pieces of the Ewald kernel for one layout.

    The real-space terms ``E1(eta^2 |r - n|^2)`` and the spectral phases ``exp(i q.r)`` do not
    depend on ``alpha``; caching them reduces each new quasimomentum to two matrix-vector products.
    Since ``G`` is invariant under ``alpha -> alpha + q``, ``alpha`` is first reduced to the
    representative closest to the origin so one finite set of ``q`` serves every quasimomentum.
    """

    def __init__(self, layout: ResonatorLayout, params: GreenParams = GreenParams()):
        self.layout = layout
        self.params = params
        lattice = layout.lattice
        M = params.quadrature_points
        N = layout.N
        self.M = M
        self.volume = lattice.cell_volume
        self.eta = params.ewald_eta if params.ewald_eta is not None else math.sqrt(math.pi / self.volume)
        eta2 = self.eta**2
        theta = 2.0 * np.pi * (np.arange(M) + 0.5) / M
        u = np.column_stack([np.cos(theta), np.sin(theta)])
        centers = np.asarray(layout.centers)
        radii = np.asarray(layout.radii)
        seps, regular, blocks = [], [], []
        for i in range(N):
            seps.append((radii[i] * (u[:, None, :] - u[None, :, :])).reshape(-1, 2))
            regular.append(np.ones(M * M, bool))
            blocks.append((i, i))
            xi = centers[i][None, :] + radii[i] * u
            for j in range(i + 1, N):
                xj = centers[j][None, :] + radii[j] * u
                seps.append((xi[:, None, :] - xj[None, :, :]).reshape(-1, 2))
                regular.append(np.zeros(M * M, bool))
                blocks.append((i, j))
        r = np.vstack(seps)
        regular = np.concatenate(regular)
        self.blocks = blocks
        self.r = r

        # spectral part: every q that can carry a non-negligible weight for a reduced alpha
        q1, q2 = dual_lattice(lattice)
        Q = np.column_stack([q1, q2])
        corner = max(np.linalg.norm(Q @ np.array(c)) for c in ((1, 0), (0, 1), (1, 1), (1, -1)))
        kcut = 2.0 * self.eta * math.sqrt(_EWALD_CUTOFF)
        qmax = min(kcut + corner, params.truncation * max(np.linalg.norm(q1), np.linalg.norm(q2)))
        self.q = _lattice_ball(q1, q2, qmax)
        self.q_phase = np.exp(1j * (r @ self.q.T))

        # real-space part
        reach = math.sqrt(_EWALD_CUTOFF) / self.eta
        rmax = float(np.max(np.linalg.norm(r, axis=1)))
        lmin = _shortest_height(np.asarray(lattice.l1), np.asarray(lattice.l2))
        nmax = int(math.ceil((rmax + reach) / lmin)) + 1
        rng = np.arange(-nmax, nmax + 1)
        n1, n2 = np.meshgrid(rng, rng, indexing="ij")
        images = n1.ravel()[:, None] * np.asarray(lattice.l1)[None, :] + n2.ravel()[:, None] * np.asarray(lattice.l2)[None, :]
        origin = (n1.ravel() == 0) & (n2.ravel() == 0)
        keep = (np.linalg.norm(images, axis=1) <= rmax + reach) & ~origin
        self.images = images[keep]
        table = np.zeros((r.shape[0], len(self.images)))
        for col, n in enumerate(self.images):
            d = r - n[None, :]
            d2 = np.einsum("ij,ij->i", d, d)
            mask = d2 <= reach**2
            table[mask, col] = -exp1(eta2 * d2[mask]) / (4.0 * math.pi)
        self.image_table = table
        d2 = np.einsum("ij,ij->i", r, r)
        base = np.empty(r.shape[0])
        base[regular] = (EULER_GAMMA + math.log(eta2) - _ein(eta2 * d2[regular])) / (4.0 * math.pi)
        base[~regular] = -exp1(eta2 * d2[~regular]) / (4.0 * math.pi)
        self.base = base
        self.log_blocks = [_log_block(R, M, kress_log_weights(M)) for R in radii]

    def kernel(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float).reshape(2)
        a = _reduce_alpha(alpha, self.layout.lattice)
        k = a[None, :] + self.q
        k2 = np.einsum("ij,ij->i", k, k)
        if np.min(np.sqrt(k2)) < SINGULAR_ALPHA_TOL:
            raise SingularQuasimomentumError(
                f"alpha={tuple(alpha)} lies on the dual lattice; the static Green's function does not exist"
            )
        wq = -np.exp(-k2 / (4.0 * self.eta**2)) / (k2 * self.volume)
        spec = np.exp(1j * (self.r @ a)) * (self.q_phase @ wq)
        real = self.base + self.image_table @ np.exp(1j * (self.images @ a))
        vals = spec + real
        M = self.M
        N = self.layout.N
        K = np.empty((N * M, N * M), dtype=complex)
        for b, (i, j) in enumerate(self.blocks):
            blk = vals[b * M * M:(b + 1) * M * M].reshape(M, M)
            if i == j:
                blk = blk + self.log_blocks[i]
                K[i * M:(i + 1) * M, i * M:(i + 1) * M] = 0.5 * (blk + blk.conj().T)
            else:
                K[i * M:(i + 1) * M, j * M:(j + 1) * M] = blk
                K[j * M:(j + 1) * M, i * M:(i + 1) * M] = blk.conj().T
        return K


@lru_cache(maxsize=4)
def kernel_tables(layout: ResonatorLayout, params: GreenParams) -> KernelTables:
    return KernelTables(layout, params)


def assemble_single_layer(layout: ResonatorLayout, alpha, params: GreenParams = GreenParams()) -> np.ndarray:
    """Nystrom matrix of the static single-layer operator on ``dD`` (size ``N*M`` square).

    Applying it to nodal density values returns the potential at the nodes.
    """
    M = params.quadrature_points
    K = kernel_tables(layout, params).kernel(alpha)
    _, w, _ = boundary_nodes(layout, M)
    return K * w[None, :]


def capacitance_matrix(layout: ResonatorLayout, alpha, params: GreenParams = GreenParams()) -> CapacitanceMatrix:
    """``C_ij = -int_{dD_i} psi_j``, with ``S[psi_j] = indicator of dD_j``; returned Hermitian-symmetrised."""
    M = params.quadrature_points
    N = layout.N
    K = kernel_tables(layout, params).kernel(alpha)
    _, w, _ = boundary_nodes(layout, M)
    A = K * w[None, :]
    E = np.zeros((N * M, N))
    for i in range(N):
        E[i * M:(i + 1) * M, i] = 1.0
    try:
        lu, piv = la.lu_factor(A, check_finite=True)
    except (la.LinAlgError, ValueError) as exc:
        raise NumericalError(f"single-layer factorisation failed at alpha={tuple(alpha)}") from exc
    anorm = np.linalg.norm(A, 1)
    rcond, info = la.lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or not rcond > 1e-15:
        cond = math.inf if rcond == 0 else 1.0 / rcond
        raise NumericalError(f"single-layer matrix is numerically singular at alpha={tuple(alpha)}", condition=cond)
    psi = la.lu_solve((lu, piv), E)
    C = -(E * w[:, None]).T @ psi
    norm = np.linalg.norm(C)
    defect = float(np.linalg.norm(C - C.conj().T) / norm) if norm > 0 else 0.0
    C = 0.5 * (C + C.conj().T)
    return CapacitanceMatrix(tuple(float(a) for a in np.asarray(alpha).reshape(2)), C, layout.fingerprint(), defect)


def distance_to_dual_lattice(alpha, lattice: Lattice) -> float:
    q1, q2 = dual_lattice(lattice)
    Q = np.column_stack([q1, q2])
    frac = np.linalg.solve(Q, np.asarray(alpha, dtype=float))
    base = np.floor(frac)
    best = math.inf
    for d1 in (0, 1):
        for d2 in (0, 1):
            q = Q @ (base + np.array([d1, d2]))
            best = min(best, float(np.linalg.norm(np.asarray(alpha) - q)))
    return best


def _field_worker(args):
    layout, alpha, params = args
    return capacitance_matrix(layout, alpha, params)


def capacitance_field(
    layout: ResonatorLayout,
    path: BrillouinPath | np.ndarray,
    params: GreenParams = GreenParams(),
    jobs: int = 1,
) -> list[CapacitanceMatrix | None]:
    """Capacitance matrices along a path; samples within ``1e-6`` of the dual lattice come back ``None``."""
    points = path.points if isinstance(path, BrillouinPath) else np.asarray(path, dtype=float)
    todo = [j for j, a in enumerate(points) if distance_to_dual_lattice(a, layout.lattice) > FLAG_TOL]
    out: list[CapacitanceMatrix | None] = [None] * len(points)
    args = [(layout, points[j], params) for j in todo]
    try:
        if jobs > 1 and len(args) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                results = list(ex.map(_field_worker, args))
        else:
            results = [_field_worker(a) for a in args]
    except Exception as exc:  # pragma: no cover - re-raised with context
        raise type(exc)(f"capacitance field failed: {exc}") from exc
    for j, res in zip(todo, results):
        out[j] = res
    return out


def check_capacitance(C: np.ndarray, tol: float = 1e-8) -> float:
    """Relative Hermiticity residual; raises ``ValidationError`` above ``tol``."""
    C = np.asarray(C)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValidationError(f"capacitance matrix must be square, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValidationError("capacitance matrix has non-finite entries")
    norm = np.linalg.norm(C)
    res = float(np.linalg.norm(C - C.conj().T) / norm) if norm > 0 else 0.0
    if res > tol:
        raise ValidationError(f"capacitance matrix is not Hermitian (relative residual {res:.3e})")
    return res


def save_capacitance(path, field: list[CapacitanceMatrix]) -> None:
    """Write the matrix-field text format (``N <N> D 2`` header, ``alpha`` lines, interleaved re/im rows)."""
    field = [c for c in field if c is not None]
    if not field:
        raise ValueError("empty capacitance field")
    N = field[0].N
    lines = [f"N {N} D 2"]
    for c in field:
        if c.N != N:
            raise ValueError("inconsistent matrix sizes in field")
        lines.append(f"alpha {c.alpha[0]!r} {c.alpha[1]!r}")
        for row in c.entries:
            vals = []
            for z in row:
                vals.append(repr(float(z.real)))
                vals.append(repr(float(z.imag)))
            lines.append(" ".join(vals))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_capacitance(path, tol: float = 1e-8) -> list[CapacitanceMatrix]:
    """Parse and validate a matrix-field file."""
    with open(path, encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    rows = [(i + 1, ln.split()) for i, ln in enumerate(raw) if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ParseError("empty file", line=1)
    lineno, head = rows[0]
    if len(head) != 4 or head[0] != "N" or head[2] != "D":
        raise ParseError("expected header 'N <N> D <dim>'", line=lineno)
    try:
        N = int(head[1])
        dim = int(head[3])
    except ValueError:
        raise ParseError("non-integer N or D in header", line=lineno) from None
    if N < 1:
        raise ParseError("N must be positive", line=lineno)
    if dim != 2:
        raise ParseError(f"only D 2 is supported, got D {dim}", line=lineno)
    out = []
    k = 1
    while k < len(rows):
        lineno, tok = rows[k]
        if len(tok) != 3 or tok[0] != "alpha":
            raise ParseError("expected 'alpha <a1> <a2>'", line=lineno)
        try:
            alpha = (float(tok[1]), float(tok[2]))
        except ValueError:
            raise ParseError("non-numeric alpha", line=lineno) from None
        if len(rows) - (k + 1) < N:
            raise ParseError("truncated matrix block", line=lineno)
        C = np.empty((N, N), dtype=complex)
        for i in range(N):
            lineno, vals = rows[k + 1 + i]
            if len(vals) != 2 * N:
                raise ParseError(f"expected {2 * N} numbers, got {len(vals)}", line=lineno)
            try:
                nums = np.array([float(v) for v in vals])
            except ValueError:
                raise ParseError("non-numeric matrix entry", line=lineno) from None
            C[i] = nums[0::2] + 1j * nums[1::2]
        try:
            check_capacitance(C, tol)
        except ValidationError as exc:
            raise ValidationError(f"block at line {rows[k][0]}: {exc}") from None
        out.append(CapacitanceMatrix(alpha, C, "file"))
        k += N + 1
    return out


def export_abs_csv(path, field: list[CapacitanceMatrix | None], points) -> None:
    """Diagnostics CSV of ``|C_ij|`` per sample; flagged samples get empty cells."""
    points = np.asarray(points)
    N = next(c.N for c in field if c is not None)
    cols = [f"abs_C{i + 1}{j + 1}" for i in range(N) for j in range(N)]
    lines = ["index,alpha1,alpha2,flagged,hermitian_defect," + ",".join(cols)]
    for j, (a, c) in enumerate(zip(points, field)):
        if c is None:
            lines.append(f"{j},{a[0]!r},{a[1]!r},1,," + ",".join("" for _ in cols))
        else:
            vals = ",".join(repr(float(v)) for v in np.abs(c.entries).ravel())
            lines.append(f"{j},{a[0]!r},{a[1]!r},0,{c.hermitian_defect!r},{vals}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
