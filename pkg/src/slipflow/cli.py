"""Command line entry points.

Subcommands: verify, korn, basis, simulate, uniqueness, symmetry,
regularity, decay.  Every run writes a machine-readable JSON summary (and
CSV tables where applicable) into the output directory and exits 0 exactly
when all checks pass.

Config files are JSON or flat ``key=value`` lines with dotted keys, e.g.::

    grid.cells = 12
    potential.p = 2.5
    u0 = ["sin(pi*x1)*cos(pi*x2/2)", "sin(pi*x2)"]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .constitutive import PPotential, PowerLaw, certify_bounds
from .domain import Grid, VelocityField, korn_ratio, leray_project, save_snapshot
from .experiments import (
    default_config,
    run_decay,
    run_regularity,
    run_symmetry,
    run_uniqueness,
    _merge,
)
from .solver import SimConfig, simulate
from .stokes import solve_eigen


def load_config_file(path) -> dict:
    """JSON, or flat key=value lines with dotted keys and JSON-parsed values."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = parsed
    return out


def _write_json(out_dir: Path, name: str, payload: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(json.dumps(payload, indent=2, default=float))


def _seed_of(args) -> int:
    return 0 if args.seed is None else args.seed


def _cmd_verify(args) -> int:
    pp = PPotential(PowerLaw(args.law), p=args.p, delta=args.delta, mu=args.mu)
    cert = certify_bounds(
        pp,
        samples=args.samples,
        magnitude_range=(args.mag_lo, args.mag_hi),
        dim=args.dim,
        seed=_seed_of(args),
    )
    out = Path(args.out)
    _write_json(out, "verify_certificate.json", cert.to_dict())
    print(
        f"verify: law={pp.law.value} p={pp.p} violations={cert.violations} "
        f"gamma1={cert.gamma1_est:.4g} gamma2={cert.gamma2_est:.4g}"
    )
    return 0 if cert.passed else 1


def random_divfree_field(grid: Grid, rng, margin_cells: int = 3) -> VelocityField:
    """Compactly supported, discretely divergence-free 2D field.

    A random band-limited stream function under a boundary window, then one
    Leray projection to kill the residual discrete divergence.
    """
    x1, x2 = grid.coords()
    r = grid.radius
    win1 = np.clip((r - np.abs(x1)) / (margin_cells * grid.h), 0.0, 1.0)
    win2_hi = np.clip((r - x2) / (margin_cells * grid.h), 0.0, 1.0)
    win2_lo = np.clip(x2 / (margin_cells * grid.h), 0.0, 1.0) if grid.half_space else np.clip(
        (r - np.abs(x2)) / (margin_cells * grid.h), 0.0, 1.0
    )
    bump = (np.sin(0.5 * np.pi * win1) ** 2) * (
        np.sin(0.5 * np.pi * win2_hi) ** 2
    ) * (np.sin(0.5 * np.pi * win2_lo) ** 2)
    psi = np.zeros(np.broadcast_shapes(x1.shape, x2.shape))
    for _ in range(3):
        k1, k2 = rng.integers(1, 4, size=2)
        phase1, phase2 = rng.uniform(0, 2 * np.pi, size=2)
        amp = rng.uniform(0.5, 1.0)
        psi = psi + amp * np.sin(k1 * np.pi * x1 / r + phase1) * np.sin(
            k2 * np.pi * x2 / r + phase2
        )
    psi = (psi * bump) + np.zeros(grid.shape)
    field = VelocityField(
        grid,
        np.stack(
            [
                np.gradient(psi, grid.h, axis=1, edge_order=2),
                -np.gradient(psi, grid.h, axis=0, edge_order=2),
            ]
        ),
    )
    return leray_project(field)


def _cmd_korn(args) -> int:
    rng = np.random.default_rng(_seed_of(args))
    rows = []
    ok = True
    for cells in args.cells:
        grid = Grid(dim=2, radius=args.radius, cells=cells, half_space=True)
        ratios = np.array(
            [korn_ratio(random_divfree_field(grid, rng), args.p) for _ in range(args.fields)]
        )
        rows.append((grid.h, ratios.mean(), ratios.min(), ratios.max()))
        if args.p == 2.0 and cells == max(args.cells):
            ok = bool(np.all(np.abs(ratios - np.sqrt(2)) <= 0.01 * np.sqrt(2)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        out / "korn_ratios.csv",
        np.array(rows),
        delimiter=",",
        header="h,ratio_mean,ratio_min,ratio_max",
        comments="",
    )
    _write_json(
        out,
        "korn_summary.json",
        {
            "p": args.p,
            "radius": args.radius,
            "fields": args.fields,
            "rows": [list(map(float, r)) for r in rows],
            "passed": ok,
        },
    )
    for h, mean, lo, hi in rows:
        print(f"korn: h={h:.5f} mean={mean:.6f} min={lo:.6f} max={hi:.6f}")
    return 0 if ok else 1


def _cmd_basis(args) -> int:
    grid = Grid(dim=args.dim, radius=args.radius, cells=args.cells, half_space=True)
    basis = solve_eigen(grid, args.modes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        out / "eigenvalues.csv",
        np.column_stack([np.arange(1, args.modes + 1), basis.eigenvalues]),
        delimiter=",",
        header="mode,lambda",
        comments="",
    )
    if args.snapshots:
        for i in range(args.modes):
            save_snapshot(
                out / f"mode_{i + 1:02d}",
                grid,
                {"a": basis.fields[i], "p": basis.pressures[i]},
            )
    ascending = bool(np.all(np.diff(basis.eigenvalues) >= -1e-12))
    positive = bool(np.all(basis.eigenvalues > 0))
    _write_json(
        out,
        "basis_summary.json",
        {
            "grid": {"dim": grid.dim, "radius": grid.radius, "cells": grid.cells},
            "modes": args.modes,
            "eigenvalues": basis.eigenvalues.tolist(),
            "ascending": ascending,
            "positive": positive,
            "passed": ascending and positive,
        },
    )
    print(f"basis: {args.modes} modes, lambda_1={basis.eigenvalues[0]:.6f}")
    return 0 if (ascending and positive) else 1


def _cmd_simulate(args) -> int:
    base = default_config("simulate")
    if args.config:
        base = _merge(base, load_config_file(args.config))
    if args.seed is not None:
        base["seed"] = args.seed
    cfg = SimConfig.from_dict({k: v for k, v in base.items() if k != "experiment"})
    result = simulate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = list(result.ledger.rows())
    np.savetxt(
        out / "ledger.csv",
        np.array(rows) if rows else np.zeros((0, 5)),
        delimiter=",",
        header="t,energy,dissipation,work,transport",
        comments="",
    )
    u_final = result.system.reconstruct(result.coefficients[-1])
    save_snapshot(out / "final_state", cfg.grid, {"u": u_final.data})
    _write_json(out, "simulate_summary.json", {**result.summary, "config": cfg.to_dict()})
    print(
        f"simulate: steps={result.summary['steps']} "
        f"energy {result.summary['initial_energy']:.4g} -> {result.summary['final_energy']:.4g} "
        f"bound_ok={result.summary['bound_ok']}"
    )
    return 0 if result.passed else 1


def _cmd_uniqueness(args) -> int:
    override = load_config_file(args.config) if args.config else {}
    cfg_dict = _merge(default_config("uniqueness"), override)
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    cfg = SimConfig.from_dict({k: v for k, v in cfg_dict.items() if k != "experiment"})
    report = run_uniqueness(cfg, perturbation=args.perturbation)
    return _finish_experiment(report, args, "uniqueness")


def _finish_experiment(report, args, name) -> int:
    report.write(args.out)
    for c in report.checks:
        mark = "ok " if c.passed else "BAD"
        print(f"  [{mark}] {c.name}: {c.value:.3e} ({c.mode} {c.threshold:.3e})")
    print(f"{name}: {'PASS' if report.passed else 'FAIL'} ({report.runtime_s:.1f}s)")
    return 0 if report.passed else 1


def _experiment_cmd(runner, name):
    def cmd(args) -> int:
        override = load_config_file(args.config) if args.config else None
        if args.seed is not None:
            override = _merge(override or {}, {"seed": args.seed})
        report = runner(override)
        return _finish_experiment(report, args, name)

    return cmd


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="slipflow_out", help="output directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--config", default=None, help="config file (JSON or key=value)")

    parser = argparse.ArgumentParser(
        prog="slipflow",
        description="Numerical laboratory for slip-condition power-law flow",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="certify a constitutive law")
    p.add_argument("--law", choices=[l.value for l in PowerLaw], default="power-b")
    p.add_argument("--p", type=float, default=2.5)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--mag-lo", type=float, default=1e-3)
    p.add_argument("--mag-hi", type=float, default=1e3)
    p.add_argument("--dim", type=int, choices=(2, 3), default=3)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("korn", parents=[common], help="Korn ratio sweep")
    p.add_argument("--cells", type=int, nargs="+", default=[16, 32])
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--fields", type=int, default=20)
    p.add_argument("--p", type=float, default=2.0)
    p.set_defaults(func=_cmd_korn)

    p = sub.add_parser("basis", parents=[common], help="slip Stokes eigenbasis")
    p.add_argument("--dim", type=int, choices=(2, 3), default=2)
    p.add_argument("--cells", type=int, default=12)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--modes", type=int, default=10)
    p.add_argument("--snapshots", action="store_true")
    p.set_defaults(func=_cmd_basis)

    p = sub.add_parser("simulate", parents=[common], help="one Galerkin evolution")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("uniqueness", parents=[common], help="twin-run contraction")
    p.add_argument("--perturbation", type=float, default=1e-3)
    p.set_defaults(func=_cmd_uniqueness)

    for name, runner in (
        ("symmetry", run_symmetry),
        ("regularity", run_regularity),
        ("decay", run_decay),
    ):
        p = sub.add_parser(name, parents=[common], help=f"{name} experiment")
        p.set_defaults(func=_experiment_cmd(runner, name))

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
