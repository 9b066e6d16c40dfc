"""Band diagrams along Brillouin paths, reciprocity and unidirectional band gaps."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .capacitance import CapacitanceMatrix
from .errors import FloquetBandsError, PathError, SingularQuasimomentumError
from .floquet import (
    QuasifrequencySet,
    first_order_system,
    fold,
    mirror_pair_residual,
    monodromy,
    quasifrequencies,
    reciprocity_distance,
)
from .lattice import BrillouinPath
from .modulation import CouplingParams, ModulationProfile, TimeMatrix, assemble_m, eps_expansion
from .perturbation import a1_coefficients, extract_f, find_degeneracies, p_value, static_diagonalization

__all__ = [
    "BandDiagram",
    "ReciprocityReport",
    "GapReport",
    "SweepResult",
    "resolve_capacitance",
    "compute_bands",
    "reciprocity_report",
    "gap_analysis",
    "epsilon_sweep",
    "track_branches",
    "write_bands_csv",
    "RateRow",
    "rate_table",
]


@dataclass
class BandDiagram:
    path: BrillouinPath
    Omega: float
    epsilon: float
    per_sample: list[QuasifrequencySet] = field(repr=False)
    flagged: np.ndarray = field(repr=False, default=None)
    metadata: dict = field(default_factory=dict)

    def values(self) -> np.ndarray:
        """``(K, 2N)`` complex array of folded quasifrequencies."""
        return np.array([q.values for q in self.per_sample])


def _entries(c):
    return np.asarray(getattr(c, "entries", c), dtype=complex)


def resolve_capacitance(c_provider, path: BrillouinPath):
    """Capacitance matrices along ``path`` with singular samples filled in from their neighbours.

    ``c_provider`` is either a callable ``alpha -> C`` or a sequence aligned with the path whose
    singular entries are ``None`` or flagged :class:`CapacitanceMatrix` objects. Filled samples
    take the arclength-weighted average of the nearest regular neighbours on either side.
    """
    K = len(path)
    mats = [None] * K
    flagged = np.zeros(K, bool)
    for j in range(K):
        if callable(c_provider):
            try:
                c = c_provider(path.points[j])
            except SingularQuasimomentumError:
                c = None
        else:
            c = c_provider[j]
        if c is None or getattr(c, "flagged", False):
            flagged[j] = True
        else:
            mats[j] = _entries(c)
    good = np.flatnonzero(~flagged)
    if good.size == 0:
        raise FloquetBandsError("every path sample is singular")
    s = path.s
    for j in np.flatnonzero(flagged):
        left = good[good < j]
        right = good[good > j]
        if left.size and right.size:
            a, b = left[-1], right[0]
            w = (s[j] - s[a]) / (s[b] - s[a]) if s[b] > s[a] else 0.5
            mats[j] = (1 - w) * mats[a] + w * mats[b]
        else:
            mats[j] = mats[(left if left.size else right)[-1 if left.size else 0]]
    return mats, flagged


def _sample_worker(args):
    C, profile, coupling, alpha, rtol, atol = args
    tm = TimeMatrix(profile, C, coupling)
    mono = monodromy(first_order_system(tm), rtol, atol)
    return quasifrequencies(mono, profile.omega, alpha)


def compute_bands(c_provider, profile: ModulationProfile, coupling: CouplingParams, path: BrillouinPath,
                  epsilon: float | None = None, rtol: float = 1e-10, atol: float = 1e-12, jobs: int = 1,
                  metadata: dict | None = None) -> BandDiagram:
    """Quasifrequencies at every path sample: ``M(t) -> first-order system -> monodromy -> log``."""
    if epsilon is not None:
        profile = profile.with_epsilon(epsilon)
    mats, flagged = resolve_capacitance(c_provider, path)
    if mats[0].shape != (profile.N, profile.N):
        raise FloquetBandsError(f"capacitance size {mats[0].shape} does not match N={profile.N}")
    tasks = [(mats[j], profile, coupling, path.points[j], rtol, atol) for j in range(len(path))]
    per = []
    try:
        if jobs > 1:
            with ProcessPoolExecutor(jobs) as ex:
                per = list(ex.map(_sample_worker, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
        else:
            per = [_sample_worker(t) for t in tasks]
    except FloquetBandsError as exc:
        raise type(exc)(f"{exc} (after {len(per)} samples)") from exc
    meta = dict(metadata or {})
    meta.setdefault("rtol", rtol)
    meta.setdefault("atol", atol)
    return BandDiagram(path, profile.omega, profile.epsilon, per, flagged, meta)


@dataclass
class ReciprocityReport:
    max_set_distance: float
    worst_alpha: tuple[float, float]
    per_sample_distances: np.ndarray = field(repr=False)
    max_mirror_residual: float = 0.0  # omega <-> -conj(omega) pairing defect

    def to_dict(self) -> dict:
        return {
            "maxSetDistance": self.max_set_distance,
            "worstAlpha": list(self.worst_alpha),
            "maxMirrorResidual": self.max_mirror_residual,
            "perSampleDistances": [float(x) for x in self.per_sample_distances],
        }


def reciprocity_report(diagram: BandDiagram) -> ReciprocityReport:
    """Real-part set distance between every sample and its mirrored partner ``-alpha``."""
    path = diagram.path
    if not path.is_antisymmetric():
        raise PathError("path lacks mirrored samples; build it with symmetry_path")
    fwd, bwd = path.halves()
    dist = np.zeros(len(fwd))
    mres = 0.0
    for n, (j, k) in enumerate(zip(fwd, bwd)):
        a, b = diagram.per_sample[j], diagram.per_sample[k]
        dist[n] = reciprocity_distance(a, b)
        mres = max(mres, mirror_pair_residual(a, b))
    w = int(np.argmax(dist))
    alpha = tuple(float(x) for x in path.points[fwd[w]])
    return ReciprocityReport(float(dist[w]), alpha, dist, float(mres))


def _merge(intervals):
    out = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [tuple(x) for x in out]


def _match(prev, cur, Omega):
    D = np.abs(fold(np.subtract.outer(prev, cur), Omega))
    _, c = linear_sum_assignment(D)
    return cur[c]


def _coverage(values, Omega):
    """Union of the arcs swept by every band between consecutive samples (real parts)."""
    half = 0.5 * Omega
    arcs = []
    steps = []
    prev = values[0]
    for cur in values[1:]:
        cur = _match(prev, cur, Omega)
        d = fold(cur - prev, Omega)
        steps.extend(np.abs(d))
        for a, dd in zip(prev, d):
            lo, hi = (a, a + dd) if dd >= 0 else (a + dd, a)
            if lo < -half:
                arcs.append((lo + Omega, half))
                arcs.append((-half, hi))
            elif hi > half:
                arcs.append((lo, half))
                arcs.append((-half, hi - Omega))
            else:
                arcs.append((lo, hi))
        prev = cur
    if len(values) == 1:
        arcs = [(v, v) for v in values[0]]
    return _merge(arcs), np.asarray(steps)


def _complement(covered, Omega):
    half = 0.5 * Omega
    gaps = []
    x = -half
    for lo, hi in covered:
        if lo > x:
            gaps.append((x, lo))
        x = max(x, hi)
    if x < half:
        gaps.append((x, half))
    return gaps


def _difference(a, b):
    """Parts of interval list ``a`` not covered by interval list ``b``."""
    out = []
    for lo, hi in a:
        pieces = [(lo, hi)]
        for blo, bhi in b:
            nxt = []
            for plo, phi in pieces:
                if bhi <= plo or blo >= phi:
                    nxt.append((plo, phi))
                    continue
                if blo > plo:
                    nxt.append((plo, blo))
                if bhi < phi:
                    nxt.append((bhi, phi))
            pieces = nxt
        out.extend(pieces)
    return out


@dataclass
class GapReport:
    gaps_forward: list
    gaps_backward: list
    unidirectional: list
    resolution: float
    sub_resolution: int = 0

    def to_dict(self) -> dict:
        conv = lambda L: [[float(a), float(b)] for a, b in L]  # noqa: E731
        return {
            "gapsForward": conv(self.gaps_forward),
            "gapsBackward": conv(self.gaps_backward),
            "unidirectional": conv(self.unidirectional),
            "resolution": self.resolution,
            "subResolution": self.sub_resolution,
        }


def gap_analysis(diagram: BandDiagram, suppress_factor: float = 2.0) -> GapReport:
    """Band gaps over the forward half-path and over its mirror, and their symmetric difference.

    Bands are followed between consecutive samples by optimal assignment on the circle and
    every step is taken to sweep the arc between its end values. Gaps and unidirectional pieces
    narrower than ``suppress_factor`` times the median band step are dropped and counted in
    ``sub_resolution``.
    """
    path = diagram.path
    if not path.is_antisymmetric():
        raise PathError("gap analysis needs a mirrored path")
    vals = np.real(diagram.values())
    fwd, bwd = path.halves()
    Omega = diagram.Omega
    cov_f, steps_f = _coverage(vals[fwd], Omega)
    cov_b, steps_b = _coverage(vals[bwd], Omega)
    steps = np.concatenate([steps_f, steps_b])
    resolution = suppress_factor * float(np.median(steps)) if steps.size else 0.0
    suppressed = 0

    def keep(L):
        nonlocal suppressed
        out = []
        for lo, hi in L:
            if hi - lo > resolution:
                out.append((lo, hi))
            else:
                suppressed += 1
        return out

    gf = keep(_complement(cov_f, Omega))
    gb = keep(_complement(cov_b, Omega))
    uni = keep(_merge(_difference(gf, gb) + _difference(gb, gf)))
    return GapReport(gf, gb, uni, resolution, suppressed)


def track_branches(sets, Omega: float, start_idx) -> np.ndarray:
    """Follow selected quasifrequencies through a sequence of sets by successive assignment.

    Returns an array ``(len(sets), len(start_idx))`` of tracked complex values.
    """
    cur = np.asarray(sets[0])[list(start_idx)]
    out = [cur.copy()]
    for s in sets[1:]:
        s = np.asarray(s)
        D = np.abs(fold(np.subtract.outer(cur, s), Omega))
        r, c = linear_sum_assignment(D)
        nxt = np.empty_like(cur)
        nxt[r] = s[c]
        cur = nxt
        out.append(cur.copy())
    return np.array(out)


@dataclass
class SweepResult:
    epsilon: np.ndarray
    splitting: np.ndarray  # nan where censored
    shift: np.ndarray
    censored: np.ndarray
    split_exponent: float
    shift_exponent: float
    running_exponent: np.ndarray
    omega0: float
    reference: complex


def _loglog_slope(x, y):
    m = (x > 0) & np.isfinite(y) & (y > 0)
    if m.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[m]), np.log(y[m]), 1)[0])


def epsilon_sweep(C, profile: ModulationProfile, coupling: CouplingParams, alpha, eps_grid, omega0: float,
                  reference: float | None = None, rtol: float = 1e-10, atol: float = 1e-12,
                  max_step: float = 0.01, censor: float = 1e-9, fit_range=(0.01, 0.1)) -> SweepResult:
    """Splitting of the degenerate pair at ``omega0`` and shift of a non-degenerate band versus ``eps``.

    Branches are continued from ``eps = 0`` with steps no larger than ``max_step``. ``reference``
    selects the non-degenerate band (folded static value); by default the most isolated one.
    """
    C = _entries(C)
    eps_grid = np.asarray(eps_grid, dtype=float)
    if np.any(eps_grid < 0):
        raise ValueError("eps grid must be non-negative")
    Omega = profile.omega
    top = float(eps_grid.max())
    nstep = max(1, int(math.ceil(top / max_step)))
    fine = np.unique(np.concatenate([np.linspace(0.0, top, nstep + 1), eps_grid]))

    def qs(e):
        tm = TimeMatrix(profile.with_epsilon(e), C, coupling)
        return quasifrequencies(monodromy(first_order_system(tm), rtol, atol), Omega, alpha).values

    sets = [qs(e) for e in fine]
    v0 = sets[0]
    d = np.abs(fold(v0 - omega0, Omega))
    pair = list(np.argsort(d)[:2])
    if reference is None:
        # the most isolated static value: farthest from every other one on the circle
        D = np.abs(fold(np.subtract.outer(v0, v0), Omega))
        np.fill_diagonal(D, np.inf)
        iso = D.min(axis=1)
        iso[pair] = -1.0
        ref = int(np.argmax(iso))
    else:
        ref = int(np.argmin(np.abs(fold(v0 - reference, Omega))))
    tracked = track_branches(sets, Omega, pair + [ref])
    idx = [int(np.flatnonzero(np.isclose(fine, e, rtol=0, atol=1e-15))[0]) for e in eps_grid]
    split = np.abs(fold(tracked[idx, 0] - tracked[idx, 1], Omega))
    shift = np.abs(fold(tracked[idx, 2] - tracked[0, 2], Omega))
    censored = (eps_grid > 0) & (split < censor)
    split = np.where(censored, np.nan, split)
    lo, hi = fit_range
    sel = (eps_grid >= lo - 1e-15) & (eps_grid <= hi + 1e-15)
    running = np.full(len(eps_grid), np.nan)
    for n in range(len(eps_grid)):
        running[n] = _loglog_slope(eps_grid[: n + 1], split[: n + 1])
    return SweepResult(eps_grid, split, shift, censored, _loglog_slope(eps_grid[sel], split[sel]),
                       _loglog_slope(eps_grid[sel], shift[sel]), running, float(omega0), complex(v0[ref]))


def _fmt(x) -> str:
    return repr(float(x))


def write_bands_csv(diagram: BandDiagram, fp, layout_kind: str = "custom"):
    """Plot-ready CSV: one row per (sample, band)."""
    fp.write(f"# omega={_fmt(diagram.Omega)} epsilon={_fmt(diagram.epsilon)} layout={layout_kind}\n")
    fp.write("s,alpha1,alpha2,band_index,re_omega,im_omega\n")
    for j, q in enumerate(diagram.per_sample):
        a1, a2 = diagram.path.points[j]
        s = diagram.path.s[j]
        for b, w in enumerate(q.values):
            fp.write(f"{_fmt(s)},{_fmt(a1)},{_fmt(a2)},{b},{_fmt(w.real)},{_fmt(w.imag)}\n")


def write_json(obj, fp):
    json.dump(obj, fp, indent=2, sort_keys=True)
    fp.write("\n")


@dataclass
class RateRow:
    """One degenerate point and its mirror: analytic rates and the monodromy cross-checks."""

    Omega: float
    alpha: np.ndarray
    omega0: float
    indices: tuple[int, int]
    folding_numbers: tuple[int, int]
    r_alpha: complex
    r_minus: complex
    fit_alpha: complex  # sqrt((F1)_lk (F1)_kl) from the fitted monodromy logarithm
    fit_minus: complex
    split_alpha: float  # splitting / (2 eps) at eps_split
    split_minus: float
    active: bool = True

    def to_dict(self) -> dict:
        c = lambda z: [float(np.real(z)), float(np.imag(z))]  # noqa: E731
        return {
            "Omega": self.Omega,
            "alphaDeg": [float(a) for a in self.alpha],
            "omega0": self.omega0,
            "indices": list(self.indices),
            "foldingNumbers": list(self.folding_numbers),
            "r_alpha": c(self.r_alpha),
            "r_minus_alpha": c(self.r_minus),
            "abs_r_alpha": abs(self.r_alpha),
            "abs_r_minus_alpha": abs(self.r_minus),
            "fit_abs_r_alpha": abs(self.fit_alpha),
            "fit_abs_r_minus_alpha": abs(self.fit_minus),
            "split_rate_alpha": self.split_alpha,
            "split_rate_minus_alpha": self.split_minus,
            "crossMethodResidual": self.cross_method_residual(),
            "active": self.active,
        }

    def cross_method_residual(self) -> float:
        """Largest relative mismatch between the analytic and fitted ``|r|`` over the pair."""
        out = 0.0
        for r, f in ((self.r_alpha, self.fit_alpha), (self.r_minus, self.fit_minus)):
            out = max(out, abs(abs(r) - abs(f)) / max(abs(r), 1e-300))
        return out


def _one_rate(C, profile, coupling, point, eps_fit, eps_split, rtol, atol):
    tm = assemble_m(profile.with_epsilon(0.0), C, coupling)
    ex = eps_expansion(tm)
    diag = static_diagonalization(ex.M0, profile.omega, degenerate=[point.indices])
    A1 = a1_coefficients(diag, ex.padded(int(np.max(np.abs(diag.folding_numbers))) * 2 + 2))
    res = p_value(diag, A1, point)

    def family(e):
        return first_order_system(TimeMatrix(profile.with_epsilon(e), C, coupling))

    h = eps_fit
    fx = extract_f(family, [-2 * h, -h, 0.0, h, 2 * h], diag, rtol=rtol, atol=atol)
    lk, kl = point.indices
    fit = complex(np.sqrt(fx.F1[lk, kl] * fx.F1[kl, lk]))
    sw = epsilon_sweep(C, profile, coupling, point.alpha, [0.0, eps_split], point.omega0,
                       rtol=rtol, atol=atol, max_step=eps_split / 2, fit_range=(eps_split, eps_split))
    split = float(sw.splitting[1]) / (2 * eps_split) if np.isfinite(sw.splitting[1]) else 0.0
    return res.r, fit, split


def rate_table(c_provider, profile: ModulationProfile, coupling: CouplingParams, path: BrillouinPath,
               eps_fit: float = 0.01, eps_split: float = 0.02, rtol: float = 1e-10, atol: float = 1e-12,
               active_tol: float = 1e-3) -> list[RateRow]:
    """Degenerate points on the forward half of ``path`` with rates at ``alpha`` and ``-alpha``.

    Points whose rates are below ``active_tol`` times the largest rate in the table are marked
    inactive: for them the analytic value is zero to rounding and relative comparisons carry
    no information.
    """
    if not path.is_antisymmetric():
        raise PathError("rate table needs a mirrored path")
    fwd, _ = path.halves()
    pts = path.points[fwd]
    inv_vol = 1.0 / np.asarray(coupling.volumes)

    def m0(a):
        return coupling.prefactor * inv_vol[:, None] * _entries(c_provider(a))

    points = find_degeneracies(m0, profile.omega, pts, mirror=False)
    rows = []
    for pt in points:
        C_a = _entries(c_provider(pt.alpha))
        C_m = _entries(c_provider(-pt.alpha))
        ra, fa, sa = _one_rate(C_a, profile, coupling, pt, eps_fit, eps_split, rtol, atol)
        rm, fm, sm = _one_rate(C_m, profile, coupling, pt.mirrored(), eps_fit, eps_split, rtol, atol)
        rows.append(RateRow(profile.omega, np.asarray(pt.alpha), pt.omega0, tuple(pt.indices),
                            tuple(pt.folding_numbers), ra, rm, fa, fm, sa, sm))
    if rows:
        top = max(max(abs(r.r_alpha), abs(r.r_minus)) for r in rows)
        for r in rows:
            r.active = max(abs(r.r_alpha), abs(r.r_minus)) >= active_tol * top
    return rows
