"""Command-line entry point: ``nemfilm <command> [options]``.

Every command resolves its parameters from built-in defaults, then an
optional ``--config`` JSON file, then explicit flags (flags win). The
resolved parameters are written to ``<out>/config.json`` together with the
CSV/JSON outputs and a ``schema.json`` describing the CSV columns, so a run
can be repeated with ``--config <out>/config.json``.

Exit codes: 0 success, 1 a check or solver failed, 2 invalid configuration
or violated precondition.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from nemfilm import film3d, frustum, reduced, remnant
from nemfilm.elastic import (
    AnchoringParams,
    ElasticConstants,
    coercivity_margin,
    f_e,
    in_coercive_region,
    ldg_for_modulus,
)
from nemfilm.errors import BracketError, NemfilmError
from nemfilm.surface import SURFACE_PARAMS, make_surface

DEFAULTS: dict[str, dict] = {
    "remnant-check": {"n_cases": 1000, "M2": None, "M3": None, "scale": 1.0, "tol": 1e-8, "seed": 0},
    "frustum-sweep": {
        "phi_min": 0.2,
        "phi_max": 1.5,
        "phi_step": 0.05,
        "k_list": [0, -1, -2, -3],
        "n": 256,
        "bracket": [0.3, 1.5],
        "critical_tol": 1e-3,
        "jobs": 1,
        "seed": 0,
    },
    "minimize": {
        "surface": "frustum",
        "surface_params": {"phi0": 1.5, "s0": 1.0, "L": 1.0},
        "k": 0,
        "ns": 128,
        "ntheta": 256,
        "delta": 0.05,
        "beta": -1.0 / 3.0,
        "noise": 0.05,
        "gtol": 1e-8,
        "max_iter": 1_000_000,
        "seed": 0,
    },
    "gamma-rate": {
        "surface": "cylinder",
        "surface_params": {"R": 1.0, "s0": 0.0, "L": 1.0},
        "M2": 0.0,
        "M3": 0.0,
        "alpha0": 0.0,
        "gamma0": 0.0,
        "delta": 1.0,
        "beta": -1.0 / 3.0,
        "eps": [0.1, 0.05, 0.025, 0.0125],
        "ns": 64,
        "ntheta": 128,
        "nt": 16,
        "min_order": 0.9,
        "seed": 0,
    },
    "coercivity-map": {
        "M2_min": -1.0,
        "M2_max": 3.0,
        "M3_min": -1.5,
        "M3_max": 2.5,
        "n": 41,
        "tol": 1e-9,
        "seed": 0,
    },
}

SCHEMAS: dict[str, dict] = {
    "remnant-check": {
        "file": "cases.csv",
        "columns": {
            "case": "case index",
            "M2": "elastic ratio L2/L1",
            "M3": "elastic ratio L3/L1",
            "G_gap": "Frobenius distance between closed-form and brute-force minimizers",
            "value_gap": "absolute difference of the two reduced densities",
        },
    },
    "frustum-sweep": {
        "file": "sweep.csv",
        "columns": {
            "phi0": "complement of the cone opening angle (rad); critical angle on the summary row",
            "k": "sector (winding of p); 'critical' on the summary row",
            "energy": "minimum of the per-circle energy over the sector",
            "el_residual": "max residual of psi'' - sin^2(phi0)/4 sin(2 psi)",
            "n_iters": "Newton iterations of the best start",
        },
    },
    "minimize": {
        "file": "field.csv",
        "columns": {
            "s": "arclength along the profile",
            "theta": "azimuth (rad)",
            "p1": "first frame coordinate of Q",
            "p2": "second frame coordinate of Q",
            "psi": "director angle from T, 0.5 atan2(p2, p1)",
        },
    },
    "gamma-rate": {
        "file": "rate.csv",
        "columns": {
            "eps": "shell half-thickness",
            "F_eps": "3D energy of the recovery field",
            "F0": "limit energy of the surface field",
            "gap": "|F_eps - F0|",
            "fitted_order": "log-log slope of gap vs eps (last row only)",
        },
    },
    "coercivity-map": {
        "file": "coercivity.csv",
        "columns": {
            "M2": "elastic ratio L2/L1",
            "M3": "elastic ratio L3/L1",
            "margin": "smallest eigenvalue of the elastic form on admissible gradients",
            "in_region": "1 if -1 < M3 < 2 and M2 > -3/5 - M3/10",
            "consistent": "1 if the sign of margin agrees with in_region (ties within tol count)",
        },
    },
}


class ConfigError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _surface_params(text: str) -> dict:
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        k, _, v = item.partition("=")
        out[k.strip()] = float(v)
    return out


def _epilog(cmd: str) -> str:
    cols = SCHEMAS[cmd]["columns"]
    lines = [f"output {SCHEMAS[cmd]['file']} columns:"]
    lines += [f"  {k}: {v}" for k, v in cols.items()]
    if cmd in ("minimize", "gamma-rate"):
        lines.append("surfaces (--surface-params as key=value,...):")
        lines += [f"  {k}: {v}" for k, v in SURFACE_PARAMS.items()]
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nemfilm", description="Thin nematic film numerics.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(
            name, help=help_, epilog=_epilog(name), formatter_class=argparse.RawDescriptionHelpFormatter
        )
        p.add_argument("--config", type=Path, help="JSON file with parameters (flags override)")
        p.add_argument("--out", type=Path, default=Path("nemfilm-out") / name, help="output directory")
        p.add_argument("--seed", type=int)
        return p

    p = add("remnant-check", "compare closed-form and brute-force remnant minimizers")
    p.add_argument("--n-cases", type=int)
    p.add_argument("--M2", type=float, help="fix M2 (default: sample the coercive region)")
    p.add_argument("--M3", type=float)
    p.add_argument("--scale", type=float)
    p.add_argument("--tol", type=float)

    p = add("frustum-sweep", "sector minima of the frustum energy over a grid of phi0")
    p.add_argument("--phi-min", type=float)
    p.add_argument("--phi-max", type=float)
    p.add_argument("--phi-step", type=float)
    p.add_argument("--k-list", type=_ints)
    p.add_argument("--n", type=int, help="grid points on the circle")
    p.add_argument("--bracket", type=_floats)
    p.add_argument("--critical-tol", type=float)
    p.add_argument("--jobs", type=int)

    p = add("minimize", "descent on the reduced surface energy")
    p.add_argument("--surface", choices=sorted(SURFACE_PARAMS))
    p.add_argument("--surface-params", type=_surface_params)
    p.add_argument("--k", type=int, help="winding of the initial p")
    p.add_argument("--ns", type=int)
    p.add_argument("--ntheta", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--gtol", type=float)
    p.add_argument("--max-iter", type=int)

    p = add("gamma-rate", "convergence of the 3D energy of recovery fields")
    p.add_argument("--surface", choices=sorted(SURFACE_PARAMS))
    p.add_argument("--surface-params", type=_surface_params)
    p.add_argument("--M2", type=float)
    p.add_argument("--M3", type=float)
    p.add_argument("--alpha0", type=float)
    p.add_argument("--gamma0", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--eps", type=_floats)
    p.add_argument("--ns", type=int)
    p.add_argument("--ntheta", type=int)
    p.add_argument("--nt", type=int)
    p.add_argument("--min-order", type=float)

    p = add("coercivity-map", "elastic-form margin over a grid of (M2, M3)")
    p.add_argument("--M2-min", type=float)
    p.add_argument("--M2-max", type=float)
    p.add_argument("--M3-min", type=float)
    p.add_argument("--M3-max", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--tol", type=float)
    return ap


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[args.command])
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=float), encoding="utf-8")


def _random_coercive(rng: np.random.Generator) -> ElasticConstants:
    M3 = rng.uniform(-0.95, 1.95)
    M2 = rng.uniform(-0.6 - 0.1 * M3 + 0.02, 4.0)
    return ElasticConstants(M2, M3)


def cmd_remnant_check(cfg: dict, out: Path) -> int:
    fixed = cfg["M2"] is not None or cfg["M3"] is not None
    if fixed:
        c = ElasticConstants(cfg["M2"] or 0.0, cfg["M3"] or 0.0)
        if not c.coercive:
            raise ConfigError(f"(M2, M3) = ({c.M2}, {c.M3}) outside coercive region")
    if cfg["n_cases"] < 1:
        raise ConfigError("n_cases must be positive")
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    for i in range(cfg["n_cases"]):
        cc = c if fixed else _random_coercive(rng)
        inp = remnant.random_input(rng, cc, cfg["scale"])
        Gc = remnant.closed_form_G(inp)
        Gb, mb = remnant.brute_force_G(inp)
        vc = remnant.f_e0(inp, "closed")
        vb = float(f_e(inp.gradM_Q, cc)) + mb
        rows.append((i, cc.M2, cc.M3, float(np.linalg.norm(Gc - Gb)), abs(vc - vb)))
    _write_csv(out / "cases.csv", SCHEMAS["remnant-check"]["columns"].keys(), rows)
    gap = max(max(r[3], r[4]) for r in rows)
    ok = gap <= cfg["tol"]
    _write_json(out / "report.json", {"n_cases": len(rows), "max_abs_gap": gap, "pass": ok})
    print(f"remnant-check: {len(rows)} cases, max gap {gap:.3e} -> {'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_frustum_sweep(cfg: dict, out: Path) -> int:
    lo, hi, step = cfg["phi_min"], cfg["phi_max"], cfg["phi_step"]
    if not (0 < lo <= hi <= math.pi / 2 + 1e-12) or step <= 0:
        raise ConfigError("need 0 < phi_min <= phi_max <= pi/2 and phi_step > 0")
    if not cfg["k_list"]:
        raise ConfigError("k_list must be nonempty")
    phis = np.round(np.arange(lo, hi + 0.5 * step, step), 12)
    phis = phis[phis <= math.pi / 2]
    opts = {"seed": cfg["seed"]}
    rows = frustum.sweep(phis, cfg["k_list"], n=cfg["n"], jobs=cfg["jobs"], **opts)
    table = [(r.phi0, r.k, r.energy, r.el_residual, r.n_iters) for r in rows]
    failed = [r for r in rows if not r.converged]
    summary = {"n_rows": len(rows), "n_failed": len(failed)}
    try:
        crit = frustum.critical_angle(cfg["bracket"], cfg["critical_tol"], n=cfg["n"], **opts)
        summary["critical_angle"] = crit
        table.append((crit, "critical", "", "", ""))
    except BracketError as exc:
        summary["critical_angle"] = None
        summary["bracket_error"] = str(exc)
    _write_csv(out / "sweep.csv", SCHEMAS["frustum-sweep"]["columns"].keys(), table)
    _write_json(out / "summary.json", summary)
    print(f"frustum-sweep: {len(rows)} rows, {len(failed)} failed, critical angle {summary['critical_angle']}")
    return 1 if failed or summary["critical_angle"] is None else 0


def cmd_minimize(cfg: dict, out: Path) -> int:
    surf = make_surface(cfg["surface"], **cfg["surface_params"])
    ldg = ldg_for_modulus(1.0, cfg["beta"], cfg["delta"])
    rc = reduced.ReducedConfig(
        surf,
        beta=cfg["beta"],
        ldg=ldg,
        gtol=cfg["gtol"],
        max_iter=cfg["max_iter"],
        ns=cfg["ns"],
        ntheta=cfg["ntheta"],
    )
    rng = np.random.default_rng(cfg["seed"])
    init = reduced.PField.winding(surf, cfg["k"], cfg["ns"], cfg["ntheta"], noise=cfg["noise"], rng=rng)
    field, energy, rep = reduced.gradient_flow_minimize(init, rc)
    mid = cfg["ns"] // 2
    try:
        k = reduced.winding_number(field, mid)
    except NemfilmError:
        k = None
    reduced.write_field_csv(out / "field.csv", field)
    reduced.write_metadata(out / "report.json", rc, rep, {"energy": energy, "winding_mid_ring": k})
    print(f"minimize: energy {energy:.10g}, winding {k}, {rep.status} after {rep.n_iters} steps")
    return 0 if rep.converged else 1


def cmd_gamma_rate(cfg: dict, out: Path) -> int:
    surf = make_surface(cfg["surface"], **cfg["surface_params"])
    c = ElasticConstants(cfg["M2"], cfg["M3"])
    if not c.coercive:
        raise ConfigError(f"(M2, M3) = ({c.M2}, {c.M3}) outside coercive region")
    params = film3d.FilmParams(
        c,
        ldg_for_modulus(1.0, cfg["beta"], cfg["delta"]),
        AnchoringParams(alpha0=cfg["alpha0"], gamma0=cfg["gamma0"], beta=cfg["beta"]),
    )
    s0 = surf.s0
    Q0 = film3d.SurfaceField.from_director_angle(
        surf,
        cfg["ns"],
        cfg["ntheta"],
        lambda s, th: 0.4 * np.sin(th) + 0.3 * (s - s0),
        beta=cfg["beta"],
    )
    res = film3d.gamma_rate(Q0, params, cfg["eps"], nt=cfg["nt"])
    film3d.write_rate_csv(out / "rate.csv", res)
    ok = res.monotone and res.order >= cfg["min_order"]
    film3d.write_rate_json(out / "report.json", res, {"pass": ok})
    print(f"gamma-rate: fitted order {res.order:.3f}, monotone {res.monotone} -> {'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_coercivity_map(cfg: dict, out: Path) -> int:
    if cfg["n"] < 2:
        raise ConfigError("n must be at least 2")
    M2s = np.linspace(cfg["M2_min"], cfg["M2_max"], cfg["n"])
    M3s = np.linspace(cfg["M3_min"], cfg["M3_max"], cfg["n"])
    rows = []
    bad = 0
    for M3 in M3s:
        for M2 in M2s:
            m = coercivity_margin(ElasticConstants(M2, M3))
            inside = bool(in_coercive_region(M2, M3))
            ok = abs(m) <= cfg["tol"] or (m > 0) == inside
            bad += not ok
            rows.append((M2, M3, m, int(inside), int(ok)))
    _write_csv(out / "coercivity.csv", SCHEMAS["coercivity-map"]["columns"].keys(), rows)
    _write_json(out / "report.json", {"n_points": len(rows), "n_inconsistent": bad, "pass": bad == 0})
    print(f"coercivity-map: {len(rows)} points, {bad} inconsistent")
    return 0 if bad == 0 else 1


COMMANDS = {
    "remnant-check": cmd_remnant_check,
    "frustum-sweep": cmd_frustum_sweep,
    "minimize": cmd_minimize,
    "gamma-rate": cmd_gamma_rate,
    "coercivity-map": cmd_coercivity_map,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "config.json", cfg)
        _write_json(out / "schema.json", SCHEMAS[args.command])
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, NemfilmError, TypeError) as exc:
        print(f"nemfilm {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
