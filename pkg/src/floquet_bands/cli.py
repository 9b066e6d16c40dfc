"""``floquet-bands`` command-line front end.

Every run is driven by one TOML file. Recognised tables and their defaults:

=============  ==========================================================================
[layout]       kind = "square3" | "honeycomb6" | "chain3"; radius (optional);
               or lattice = [[..],[..]], centers = [[x, y], ...], radii = [...]
[green]        truncation = 12, quadrature_points = 64
[coupling]     delta = 1e-3, kappa_r = 1.0, rho_r = 1.0
[modulation]   family = "cosine" | "fourier"; omega; epsilon = 0.0;
               phases = [...] (numbers or strings such as "pi/2", "2pi/3");
               fourier: rho_inv = [{"0" = 1.0, "1" = 0.5, "-1" = 0.5}, ...], kappa_inv (optional)
[path]         kind = "chain" | "square" | "honeycomb" | "window"; samples = 51;
               window: center = [a1, a2], half_width, direction = [1, 0]
[integrator]   rtol = 1e-10, atol = 1e-12
[bands]        report = [] (any of "gaps", "reciprocity")
[perturb]      omegas = [omega]; eps_fit = 0.01; eps_split = 0.02
[sweep]        alpha = [a1, a2]; omega0 (optional, else nearest degeneracy);
               epsilons = [0, 0.01, 0.02, 0.04, 0.08]; fit_range = [0.01, 0.08]
[output]       directory = "out"; name (optional stem, defaults to the config name)
=============  ==========================================================================
"""
from __future__ import annotations

import argparse
import math
import re
import sys
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .bands import (
    compute_bands,
    epsilon_sweep,
    gap_analysis,
    rate_table,
    reciprocity_report,
    resolve_capacitance,
    write_bands_csv,
    write_json,
)
from .capacitance import (
    GreenParams,
    capacitance_field,
    capacitance_matrix,
    export_abs_csv,
    save_capacitance,
)
from .errors import ConfigError, FloquetBandsError
from .floquet import fold
from .lattice import Lattice, ResonatorLayout, standard_layout, symmetry_path, window_path
from .modulation import CouplingParams, cosine_profile, fourier_profile
from .perturbation import find_degeneracies

SCHEMA = {
    "layout": {"kind", "radius", "lattice", "centers", "radii"},
    "green": {"truncation", "quadrature_points"},
    "coupling": {"delta", "kappa_r", "rho_r"},
    "modulation": {"family", "omega", "epsilon", "phases", "rho_inv", "kappa_inv"},
    "path": {"kind", "samples", "center", "half_width", "direction"},
    "integrator": {"rtol", "atol"},
    "bands": {"report"},
    "perturb": {"omegas", "eps_fit", "eps_split"},
    "sweep": {"alpha", "omega0", "epsilons", "fit_range"},
    "output": {"directory", "name"},
}

_PI_RE = re.compile(r"^\s*([+-]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_angle(x) -> float:
    """Numbers pass through; strings like ``"pi"``, ``"-pi/2"``, ``"2pi/3"``, ``"0.5*pi"`` are evaluated."""
    if isinstance(x, bool):
        raise ConfigError(f"invalid angle {x!r}")
    if isinstance(x, (int, float)):
        return float(x)
    if isinstance(x, str):
        try:
            return float(x)
        except ValueError:
            pass
        m = _PI_RE.match(x)
        if m:
            coef = m.group(1)
            c = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
            d = float(m.group(2)) if m.group(2) else 1.0
            return c * math.pi / d
    raise ConfigError(f"cannot parse angle {x!r}; use a number or a form like '2pi/3'")


def load_config(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            cfg = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for key, val in cfg.items():
        if key not in SCHEMA:
            raise ConfigError(f"{path}: unknown table [{key}]; expected one of {sorted(SCHEMA)}")
        if not isinstance(val, dict):
            raise ConfigError(f"{path}: [{key}] must be a table")
        extra = set(val) - SCHEMA[key]
        if extra:
            raise ConfigError(f"{path}: unknown key(s) {sorted(extra)} in [{key}]; allowed: {sorted(SCHEMA[key])}")
    cfg.setdefault("output", {}).setdefault("name", path.stem)
    return cfg


def _need(cfg, table, key):
    try:
        return cfg[table][key]
    except KeyError:
        raise ConfigError(f"missing required key '{key}' in [{table}]") from None


def build_layout(cfg) -> tuple[ResonatorLayout, str]:
    lay = cfg.get("layout", {})
    if "kind" in lay:
        if {"lattice", "centers", "radii"} & set(lay):
            raise ConfigError("[layout]: give either 'kind' or explicit lattice/centers/radii, not both")
        return standard_layout(lay["kind"], lay.get("radius")), lay["kind"]
    for k in ("lattice", "centers", "radii"):
        if k not in lay:
            raise ConfigError(f"[layout]: explicit layouts need '{k}'")
    l1, l2 = (tuple(map(float, v)) for v in lay["lattice"])
    centers = tuple(tuple(map(float, c)) for c in lay["centers"])
    return ResonatorLayout(Lattice(l1, l2), centers, tuple(map(float, lay["radii"]))), "custom"


def build_green(cfg) -> GreenParams:
    g = cfg.get("green", {})
    try:
        return GreenParams(**g)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[green]: {exc}") from None


def build_coupling(cfg, layout) -> CouplingParams:
    return CouplingParams.for_layout(layout, **cfg.get("coupling", {}))


def build_profile(cfg, N, omega=None, epsilon=None):
    m = cfg.get("modulation", {})
    family = m.get("family", "cosine")
    om = float(omega if omega is not None else _need(cfg, "modulation", "omega"))
    eps = float(epsilon if epsilon is not None else m.get("epsilon", 0.0))
    if family == "cosine":
        phases = [parse_angle(p) for p in m.get("phases", [0.0] * N)]
        if len(phases) != N:
            raise ConfigError(f"[modulation]: {len(phases)} phases for N={N} resonators")
        return cosine_profile(N, om, eps, phases)
    if family == "fourier":
        def table(key):
            rows = m.get(key)
            if rows is None:
                return None
            if len(rows) != N:
                raise ConfigError(f"[modulation]: '{key}' needs {N} rows")
            return [{int(k): float(v) for k, v in row.items()} for row in rows]

        return fourier_profile(om, eps, table("rho_inv"), table("kappa_inv"))
    raise ConfigError(f"[modulation]: unknown family {family!r}")


def build_path(cfg, lattice):
    p = cfg.get("path", {})
    kind = p.get("kind", "square")
    samples = int(p.get("samples", 51))
    if kind == "window":
        return window_path(_need(cfg, "path", "center"), float(_need(cfg, "path", "half_width")), samples,
                           p.get("direction", (1.0, 0.0)))
    try:
        return symmetry_path(kind, samples, lattice if kind == "honeycomb" else None)
    except ValueError as exc:
        raise ConfigError(f"[path]: {exc}") from None


def _tol(cfg):
    i = cfg.get("integrator", {})
    return float(i.get("rtol", 1e-10)), float(i.get("atol", 1e-12))


def _outdir(cfg, args):
    d = Path(args.out if args.out else cfg["output"].get("directory", "out"))
    d.mkdir(parents=True, exist_ok=True)
    return d, cfg["output"]["name"]


def _provider(layout, green):
    return lambda a: capacitance_matrix(layout, a, green)


def cmd_capacitance(cfg, args) -> int:
    layout, kind = build_layout(cfg)
    green = build_green(cfg)
    path = build_path(cfg, layout.lattice)
    field = capacitance_field(layout, path, green, jobs=args.jobs)
    out, stem = _outdir(cfg, args)
    save_capacitance(out / f"{stem}_capacitance.txt", field)
    export_abs_csv(out / f"{stem}_capacitance_diag.csv", field, path.points)
    herm = max((c.hermitian_defect for c in field if c is not None), default=0.0)
    conj = 0.0
    for j in range(len(path)):
        try:
            k = path.mirror_index(j)
        except FloquetBandsError:
            break
        a, b = field[j], field[k]
        if a is not None and b is not None:
            conj = max(conj, float(np.linalg.norm(b.entries - a.entries.T) / np.linalg.norm(a.entries)))
    nflag = sum(c is None for c in field)
    print(f"layout={kind} N={layout.N} samples={len(path)} flagged={nflag}")
    print(f"hermiticity residual (before symmetrisation) = {herm:.3e}")
    print(f"conjugation residual |C(-a) - C(a)^T| / |C(a)| = {conj:.3e}")
    return 0 if herm <= 1e-8 and conj <= 1e-8 else 3


def cmd_bands(cfg, args) -> int:
    layout, kind = build_layout(cfg)
    green = build_green(cfg)
    coupling = build_coupling(cfg, layout)
    prof = build_profile(cfg, layout.N, args.omega, args.epsilon)
    path = build_path(cfg, layout.lattice)
    rtol, atol = _tol(cfg)
    field = capacitance_field(layout, path, green, jobs=args.jobs)
    diagram = compute_bands(field, prof, coupling, path, rtol=rtol, atol=atol, jobs=args.jobs,
                            metadata={"layout": kind})
    out, stem = _outdir(cfg, args)
    with open(out / f"{stem}_bands.csv", "w", encoding="utf-8") as fh:
        write_bands_csv(diagram, fh, kind)
    reports = args.report if args.report is not None else cfg.get("bands", {}).get("report", [])
    if isinstance(reports, str):
        reports = [r for r in reports.split(",") if r]
    code = 0
    for rep in reports:
        if rep == "reciprocity":
            rr = reciprocity_report(diagram)
            with open(out / f"{stem}_reciprocity.json", "w", encoding="utf-8") as fh:
                write_json(rr.to_dict(), fh)
            print(f"maxSetDistance={rr.max_set_distance:.3e} at alpha={rr.worst_alpha}; "
                  f"mirror residual={rr.max_mirror_residual:.3e}")
            if rr.max_mirror_residual > 1e-8:
                code = 3
        elif rep == "gaps":
            gr = gap_analysis(diagram)
            with open(out / f"{stem}_gaps.json", "w", encoding="utf-8") as fh:
                write_json(gr.to_dict(), fh)
            print(f"gaps forward={len(gr.gaps_forward)} backward={len(gr.gaps_backward)} "
                  f"unidirectional={len(gr.unidirectional)} subResolution={gr.sub_resolution}")
        else:
            raise ConfigError(f"unknown report {rep!r}; choose from gaps, reciprocity")
    print(f"wrote {len(path)} samples x {2 * layout.N} bands to {out / (stem + '_bands.csv')}")
    return code


def cmd_perturb(cfg, args) -> int:
    layout, kind = build_layout(cfg)
    green = build_green(cfg)
    coupling = build_coupling(cfg, layout)
    path = build_path(cfg, layout.lattice)
    rtol, atol = _tol(cfg)
    pt = cfg.get("perturb", {})
    omegas = [args.omega] if args.omega is not None else pt.get("omegas") or [_need(cfg, "modulation", "omega")]
    provider = _provider(layout, green)
    rows = []
    for om in omegas:
        prof = build_profile(cfg, layout.N, om, 0.0)
        for r in rate_table(provider, prof, coupling, path, float(pt.get("eps_fit", 0.01)),
                            float(pt.get("eps_split", 0.02)), rtol, atol):
            rows.append(r.to_dict())
    out, stem = _outdir(cfg, args)
    doc = {"layout": kind, "rows": rows}
    if not rows:
        doc["note"] = "no degenerate points found on the forward half of the path"
        print(doc["note"])
    with open(out / f"{stem}_perturb.json", "w", encoding="utf-8") as fh:
        write_json(doc, fh)
    print(f"{'Omega':>6} {'alpha_deg':>20} {'|r_a|':>9} {'|r_-a|':>9} {'resid':>8}")
    for r in rows:
        if r["active"]:
            a = r["alphaDeg"]
            print(f"{r['Omega']:6.3f} ({a[0]:+8.4f},{a[1]:+8.4f}) {r['abs_r_alpha']:9.5f} "
                  f"{r['abs_r_minus_alpha']:9.5f} {r['crossMethodResidual']:8.1e}")
    return 0


def cmd_sweep(cfg, args) -> int:
    layout, kind = build_layout(cfg)
    green = build_green(cfg)
    coupling = build_coupling(cfg, layout)
    rtol, atol = _tol(cfg)
    sw = cfg.get("sweep", {})
    alpha = np.asarray(_need(cfg, "sweep", "alpha"), dtype=float)
    prof = build_profile(cfg, layout.N, args.omega, 0.0)
    C = capacitance_matrix(layout, alpha, green)
    omega0 = sw.get("omega0")
    if omega0 is None:
        inv_vol = 1.0 / np.asarray(coupling.volumes)
        pts = find_degeneracies(lambda a: coupling.prefactor * inv_vol[:, None] * capacitance_matrix(layout, a, green).entries,
                                prof.omega, [alpha - [1e-3, 0], alpha + [1e-3, 0]], mirror=False)
        if not pts:
            raise ConfigError("[sweep]: no degenerate point within 1e-3 of alpha; give omega0 explicitly")
        omega0 = pts[0].omega0
    eps = [float(e) for e in sw.get("epsilons", [0.0, 0.01, 0.02, 0.04, 0.08])]
    fr = tuple(sw.get("fit_range", (min(e for e in eps if e > 0), max(eps))))
    res = epsilon_sweep(C, prof, coupling, alpha, eps, float(omega0), rtol=rtol, atol=atol, fit_range=fr)
    out, stem = _outdir(cfg, args)
    lines = [f"# omega={prof.omega!r} alpha={float(alpha[0])!r},{float(alpha[1])!r} omega0={float(omega0)!r} layout={kind}",
             "epsilon,splitting,shift,fit_exponent_running"]
    for n, e in enumerate(res.epsilon.tolist()):
        split = res.splitting[n]
        if res.censored[n]:
            s = "NA"
        elif e == 0.0:
            s = "0.0"  # degenerate by construction; the residual is the root-finder tolerance
        else:
            s = repr(float(split))
        sh = "0.0" if e == 0.0 else repr(float(res.shift[n]))
        run = "NA" if not np.isfinite(res.running_exponent[n]) else repr(float(res.running_exponent[n]))
        lines.append(f"{e!r},{s},{sh},{run}")
    lines.append(f"# splitting_exponent={float(res.split_exponent)!r}")
    lines.append(f"# shift_exponent={float(res.shift_exponent)!r}")
    with open(out / f"{stem}_sweep.csv", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"splitting exponent {res.split_exponent:.4f}, shift exponent {res.shift_exponent:.4f} "
          f"(reference band {fold(res.reference, prof.omega).real:+.5f})")
    return 0


COMMANDS = {"capacitance": cmd_capacitance, "bands": cmd_bands, "perturb": cmd_perturb, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="floquet-bands", description="Subwavelength band structures of time-modulated resonator lattices.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="TOML run configuration")
    ap.add_argument("--out", help="output directory (overrides [output].directory)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for per-sample work")
    ap.add_argument("--epsilon", type=float, help="override [modulation].epsilon")
    ap.add_argument("--omega", type=float, help="override [modulation].omega")
    ap.add_argument("--report", type=lambda s: [r for r in s.split(",") if r], help="comma list: gaps,reciprocity")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (FloquetBandsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
