"""Periodic lattices, disk-resonator layouts and Brillouin-zone paths.

All geometry is dimensionless. Only two-dimensional lattices are supported.
"""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

TWO_PI = 2.0 * np.pi

__all__ = [
    "Lattice",
    "ResonatorLayout",
    "BrillouinPath",
    "dual_lattice",
    "square_lattice",
    "hexagonal_lattice",
    "standard_layout",
    "symmetry_path",
    "line_path",
    "window_path",
]


@dataclass(frozen=True)
class Lattice:
    """Bravais lattice spanned by ``l1`` and ``l2``."""

    l1: tuple[float, float]
    l2: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "l1", tuple(float(v) for v in self.l1))
        object.__setattr__(self, "l2", tuple(float(v) for v in self.l2))
        if len(self.l1) != 2 or len(self.l2) != 2:
            raise GeometryError("only two-dimensional lattices are supported")
        det = self.l1[0] * self.l2[1] - self.l1[1] * self.l2[0]
        scale = np.hypot(*self.l1) * np.hypot(*self.l2)
        if not np.isfinite(det) or abs(det) <= 1e-12 * max(scale, 1e-300):
            raise GeometryError(f"lattice vectors {self.l1}, {self.l2} are linearly dependent")

    @property
    def dimension(self) -> int:
        return 2

    @property
    def matrix(self) -> np.ndarray:
        """Lattice vectors as the columns of a 2x2 matrix."""
        return np.column_stack([self.l1, self.l2])

    @property
    def cell_volume(self) -> float:
        return float(abs(np.linalg.det(self.matrix)))

    def dual(self) -> tuple[np.ndarray, np.ndarray]:
        return dual_lattice(self)

    def points(self, radius: int) -> np.ndarray:
        """Lattice points ``n1*l1 + n2*l2`` with ``|n1|, |n2| <= radius``."""
        rng = np.arange(-radius, radius + 1)
        n1, n2 = np.meshgrid(rng, rng, indexing="ij")
        coeffs = np.column_stack([n1.ravel(), n2.ravel()]).astype(float)
        return coeffs @ self.matrix.T

    def to_fractional(self, x) -> np.ndarray:
        return np.linalg.solve(self.matrix, np.asarray(x, dtype=float).T).T

    def to_cartesian(self, frac) -> np.ndarray:
        return np.asarray(frac, dtype=float) @ self.matrix.T


def square_lattice(a: float = 1.0) -> Lattice:
    return Lattice((a, 0.0), (0.0, a))


def hexagonal_lattice(scale: float = 1.5) -> Lattice:
    """Hexagonal lattice ``scale*(1, +-1/sqrt(3))``; ``scale=1.5`` gives nearest-neighbour spacing 1."""
    s3 = 1.0 / np.sqrt(3.0)
    return Lattice((scale, scale * s3), (scale, -scale * s3))


def dual_lattice(lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    """Dual vectors ``q1, q2`` with ``l_i . q_j = 2 pi delta_ij``."""
    L = lattice.matrix
    try:
        Q = TWO_PI * np.linalg.inv(L).T
    except np.linalg.LinAlgError as exc:
        raise GeometryError("singular lattice matrix") from exc
    return Q[:, 0].copy(), Q[:, 1].copy()


@dataclass(frozen=True)
class ResonatorLayout:
    """Disjoint disks ``D_i`` inside one unit cell of ``lattice``."""

    lattice: Lattice
    centers: tuple[tuple[float, float], ...]
    radii: tuple[float, ...]
    kind: str = "custom"

    def __post_init__(self):
        centers = tuple(tuple(float(v) for v in c) for c in self.centers)
        radii = tuple(float(r) for r in self.radii)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)
        if len(centers) == 0:
            raise GeometryError("layout needs at least one resonator")
        if len(centers) != len(radii):
            raise GeometryError(f"{len(centers)} centers but {len(radii)} radii")
        if any(len(c) != 2 for c in centers):
            raise GeometryError("centers must be 2-vectors")
        if any(not (r > 0) for r in radii):
            raise GeometryError("radii must be positive")
        self._check_disjoint()
        self._check_inside_tile()

    @property
    def N(self) -> int:
        return len(self.radii)

    @property
    def volumes(self) -> np.ndarray:
        """Disk areas ``pi R_i^2``."""
        return np.pi * np.asarray(self.radii) ** 2

    def _check_disjoint(self):
        c = np.asarray(self.centers)
        r = np.asarray(self.radii)
        shifts = self.lattice.points(1)
        for i, j in itertools.combinations_with_replacement(range(self.N), 2):
            d = np.linalg.norm(c[i] - c[j] - shifts, axis=1)
            if i == j:
                d = d[np.any(shifts != 0, axis=1)]
            if np.min(d) <= r[i] + r[j]:
                if i == j:
                    raise GeometryError(f"resonator {i} overlaps its own periodic image")
                raise GeometryError(
                    f"resonators {i} and {j} overlap (distance {np.min(d):.6g} <= {r[i] + r[j]:.6g})"
                )

    def _check_inside_tile(self):
        L = self.lattice.matrix
        # distance from a point in fractional coords to the edges of the unit parallelogram
        normals = []
        for k in range(2):
            other = L[:, 1 - k]
            n = np.array([-other[1], other[0]])
            n /= np.linalg.norm(n)
            height = abs(L[:, k] @ n)
            normals.append((n, height))
        for i, (ci, ri) in enumerate(zip(self.centers, self.radii)):
            frac = np.linalg.solve(L, np.asarray(ci))
            frac -= np.floor(frac)
            for k in range(2):
                _, height = normals[k]
                dist_low = frac[k] * height
                dist_high = (1.0 - frac[k]) * height
                if min(dist_low, dist_high) < ri:
                    raise GeometryError(f"resonator {i} is not contained in a single period tile")

    def fingerprint(self) -> str:
        """Short stable identifier of the geometry."""
        payload = repr((self.lattice.l1, self.lattice.l2, self.centers, self.radii)).encode()
        return hashlib.sha1(payload).hexdigest()[:12]


SQUARE3_CENTERS = ((0.24, 0.65), (0.5, 0.2), (0.76, 0.65))


def honeycomb_centers(R: float) -> tuple[tuple[float, float], ...]:
    """Two trimers anchored at (1,0) and (2,0), each disk offset ``3R`` from its anchor."""
    a1 = np.array([1.0, 0.0])
    a2 = np.array([2.0, 0.0])

    def unit(theta):
        return np.array([np.cos(theta), np.sin(theta)])

    pts = [
        a1 + 3 * R * np.array([1.0, 0.0]),
        a1 + 3 * R * unit(2 * np.pi / 3),
        a1 + 3 * R * unit(4 * np.pi / 3),
        a2 + 3 * R * unit(np.pi / 3),
        a2 - 3 * R * np.array([1.0, 0.0]),
        a2 + 3 * R * unit(5 * np.pi / 3),
    ]
    return tuple(tuple(p) for p in pts)


def standard_layout(kind: str, radius: float | None = None) -> ResonatorLayout:
    """Named layouts: ``square3``, ``chain3`` (square3 geometry) and ``honeycomb6``.

    For ``honeycomb6`` the radius doubles as the trimer offset parameter ``R``.
    """
    if kind in ("square3", "chain3"):
        r = 0.1 if radius is None else radius
        return ResonatorLayout(square_lattice(), SQUARE3_CENTERS, (r,) * 3, kind=kind)
    if kind == "honeycomb6":
        R = 0.12 if radius is None else radius
        return ResonatorLayout(hexagonal_lattice(1.5), honeycomb_centers(R), (R,) * 6, kind=kind)
    raise GeometryError(f"unknown layout kind {kind!r}")


@dataclass(frozen=True)
class BrillouinPath:
    """Piecewise-linear path through the Brillouin zone.

    ``points`` has one row per sample, ``s`` is the cumulative arclength. Paths built by
    :func:`symmetry_path` are antisymmetric: ``points[K-1-j] == -points[j]``.
    """

    vertices: tuple[tuple[str, tuple[float, float]], ...]
    samples_per_segment: int
    points: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    vertex_index: tuple[int, ...] = ()

    def __len__(self):
        return len(self.points)

    def mirror_index(self, j: int) -> int:
        """Index of the sample at ``-alpha``; raises if the path is not antisymmetric."""
        from .errors import PathError

        k = len(self.points) - 1 - j
        if not np.allclose(self.points[k], -self.points[j], atol=1e-12):
            raise PathError(f"sample {j} has no mirrored partner")
        return k

    def is_antisymmetric(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.points[::-1], -self.points, atol=atol))

    def halves(self) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays for the forward half and its mirrored counterpart (same order)."""
        K = len(self.points)
        fwd = np.arange((K + 1) // 2)
        return fwd, K - 1 - fwd


def _build_path(vertices, samples_per_segment):
    if samples_per_segment < 2:
        raise ValueError("samples_per_segment must be >= 2")
    pts = []
    vidx = [0]
    for (_, a), (_, b) in zip(vertices[:-1], vertices[1:]):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        t = np.linspace(0.0, 1.0, samples_per_segment)
        seg = a[None, :] + t[:, None] * (b - a)[None, :]
        seg[0] = a
        seg[-1] = b
        if pts:
            seg = seg[1:]
        pts.extend(seg)
        vidx.append(len(pts) - 1)
    points = np.array(pts)
    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(steps)])
    verts = tuple((lbl, tuple(float(v) for v in p)) for lbl, p in vertices)
    return BrillouinPath(verts, samples_per_segment, points, s, tuple(vidx))


def symmetry_path(kind: str, samples_per_segment: int, lattice: Lattice | None = None) -> BrillouinPath:
    """High-symmetry path with its mirrored half appended.

    square:    G -> M -> X -> G -> -X -> -M -> G
    honeycomb: G -> M -> K -> G -> -K -> -M -> G
    chain:     alpha = (a1, 0), a1 from -pi to pi in one segment
    """
    if kind == "chain":
        if samples_per_segment < 2:
            raise ValueError("samples_per_segment must be >= 2")
        return _build_path((("-X", (-np.pi, 0.0)), ("X", (np.pi, 0.0))), samples_per_segment)
    if kind == "square":
        G = (0.0, 0.0)
        M = (np.pi, np.pi)
        X = (np.pi, 0.0)
        verts = (("G", G), ("M", M), ("X", X), ("G", G), ("-X", (-X[0], -X[1])), ("-M", (-M[0], -M[1])), ("G", G))
        return _build_path(verts, samples_per_segment)
    if kind == "honeycomb":
        lat = lattice if lattice is not None else hexagonal_lattice(1.5)
        q1, q2 = dual_lattice(lat)
        M = q1 / 2
        K = (2 * q1 + q2) / 3
        G = np.zeros(2)
        verts = (("G", G), ("M", M), ("K", K), ("G", G), ("-K", -K), ("-M", -M), ("G", G))
        return _build_path(verts, samples_per_segment)
    raise ValueError(f"unknown path kind {kind!r}")


def line_path(start, stop, samples: int) -> BrillouinPath:
    """Straight segment from ``start`` to ``stop``."""
    return _build_path((("A", tuple(start)), ("B", tuple(stop))), samples)


def window_path(center, half_width: float, samples: int, direction=(1.0, 0.0)) -> BrillouinPath:
    """Short segment through ``center`` followed by its mirror image, for local gap studies.

    The first half runs from ``center - w d`` to ``center + w d``; the second half is the
    negated first half in reverse order, so the result is antisymmetric.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    c = np.asarray(center, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    a, b = c - half_width * d, c + half_width * d
    t = np.linspace(0.0, 1.0, samples)
    first = a[None, :] + t[:, None] * (b - a)[None, :]
    points = np.vstack([first, -first[::-1]])
    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(steps)])
    verts = (("A", tuple(map(float, a))), ("B", tuple(map(float, b))), ("-B", tuple(map(float, -b))), ("-A", tuple(map(float, -a))))
    return BrillouinPath(verts, samples, points, s, (0, samples - 1, samples, 2 * samples - 1))
