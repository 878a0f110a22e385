"""Command-line harness: reference runs, restrict-lift experiments, spectra,
and GMRES iteration sweeps.

Exit codes: 0 success, 2 argument/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .cr import (
    CRConfig,
    GMRESParams,
    lift_macro,
    lift_report_rows,
    restrict_lift_error,
)
from .diagnostics import cr_jacobian_spectrum, projector_spectrum
from .errors import KliftError
from .kinetic import equilibrium_field, restrict
from .moments import BasisKind, build_moment_basis, naive_projector
from .scenario import Scenario, config_hash, load_scenario
from .snapshots import read_snapshot, write_snapshot

EXIT_OK = 0
EXIT_ARG = 2
EXIT_NUMERICAL = 3

CONSERVED_MOMENTS = 3  # density, momentum, energy


def _comment_block(scenario: Scenario, extra: dict | None = None) -> list[str]:
    lines = [f"# config_hash = {config_hash(scenario)}"]
    lines.append(f"# mass_rescaled = {scenario.mass_rescaled}")
    for key, val in (extra or {}).items():
        lines.append(f"# {key} = {val}")
    return lines


def _write_csv(path, comments, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in comments:
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _cr_config(scenario: Scenario, order: int | None, solver: str | None) -> CRConfig:
    return CRConfig(
        order_m=scenario.order_m if order is None else order,
        solver=scenario.solver if solver is None else solver,
        picard_tol=scenario.picard_tol,
        newton_tol=scenario.newton_tol,
        gmres=GMRESParams(tol=scenario.gmres_tol, max_iters=scenario.gmres_max_iters),
    )


def _check_snapshot_matches(scenario: Scenario, field) -> None:
    if field.grid.n_cells != scenario.n_cells or field.vgrid.n_velocities != scenario.n_velocities:
        raise ValueError(
            f"snapshot grid {field.grid.n_cells}x{field.vgrid.n_velocities} does not match "
            f"config grid {scenario.n_cells}x{scenario.n_velocities}"
        )
    if not np.isclose(field.grid.dx, scenario.grid.dx, rtol=1e-12):
        raise ValueError("snapshot dx does not match the config domain")


# ---- subcommands ------------------------------------------------------------


def cmd_run_reference(args) -> int:
    scenario = load_scenario(args.config)
    steps = scenario.reference_steps if args.steps is None else args.steps
    if steps < 0:
        raise ValueError("steps must be nonnegative")

    field = scenario.initial_field()
    stepper = scenario.make_stepper(warm_start=True)
    dv, dx = field.vgrid.dv, field.grid.dx
    v = field.vgrid.velocities
    print(f"# scenario hash {config_hash(scenario)}: N={scenario.n_cells} "
          f"Nv={scenario.n_velocities} dt={scenario.dt:.6e} s, {steps} steps")

    values = field.values
    tmp_path = str(args.out) + ".partial"
    try:
        for k in range(steps):
            values = stepper.step(values)
            if (k + 1) % 100 == 0 or k + 1 == steps:
                phys = values / field.scale
                mass = dv * dx * phys.sum()
                momentum = dv * dx * (phys * v).sum()
                energy = dv * dx * (phys * 0.5 * v * v).sum()
                print(f"step {k + 1:6d}  mass {mass:.9e}  momentum {momentum:.6e}  "
                      f"energy {energy:.6e}")
        out_field = field.with_values(values, time=steps * scenario.dt)
        write_snapshot(tmp_path, out_field)
        os.replace(tmp_path, args.out)
    finally:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_lift(args) -> int:
    scenario = load_scenario(args.config)
    reference = read_snapshot(args.reference)
    _check_snapshot_matches(scenario, reference)
    gas = scenario.gas
    cfg = _cr_config(scenario, args.order, args.solver)

    macro = restrict(reference, gas)
    stepper = scenario.make_stepper(warm_start=False)
    basis = build_moment_basis(BasisKind.MONOMIAL, reference.vgrid, CONSERVED_MOMENTS)

    feq_field = equilibrium_field(
        macro, reference.grid, reference.vgrid, gas,
        scale=reference.scale, time=reference.time,
    )
    eq_err = restrict_lift_error(reference, feq_field)

    prefix = args.out
    comments = _comment_block(scenario, {"order_m": cfg.order_m, "solver": cfg.solver})
    try:
        lifted, report = lift_macro(
            stepper, basis, macro, gas, cfg,
            grid=reference.grid, vgrid=reference.vgrid,
            scale=reference.scale, time=reference.time,
        )
    except KliftError as exc:
        history = getattr(exc, "history", [])
        _write_csv(
            f"{prefix}_report.csv", comments,
            ("iter", "residual", "drift", "seconds"),
            [(i, r, "", "") for i, r in enumerate(history, start=1)],
        )
        raise

    lift_err = restrict_lift_error(reference, lifted)
    write_snapshot(f"{prefix}_lifted.snap", lifted)
    _write_csv(
        f"{prefix}_norms.csv", comments,
        ("label", "two_norm", "spectral_norm"),
        [
            ("equilibrium", eq_err.two_norm, eq_err.spectral_norm),
            (f"cr_m{cfg.order_m}", lift_err.two_norm, lift_err.spectral_norm),
        ],
    )
    _write_csv(
        f"{prefix}_cells.csv", comments,
        ("cell", "abs_sum_equilibrium", "abs_sum_lifted"),
        [(j, eq_err.cell_abs_sums[j], lift_err.cell_abs_sums[j])
         for j in range(reference.grid.n_cells)],
    )
    rel_rows = []
    for j in range(reference.grid.n_cells):
        for i in range(reference.vgrid.n_velocities):
            if lift_err.exact_zero[j, i]:
                rel_rows.append((j, i, "", 1))
            else:
                rel_rows.append((j, i, np.log10(lift_err.relative_error[j, i]), 0))
    _write_csv(
        f"{prefix}_relerr.csv",
        comments + ["# log10_rel_err empty where the difference is exactly zero"],
        ("cell", "velocity_index", "log10_rel_err", "exact_zero"),
        rel_rows,
    )
    _write_csv(
        f"{prefix}_report.csv", comments,
        ("iter", "residual", "drift", "seconds"),
        lift_report_rows(report),
    )
    print(f"|f_eq - f_c| = {eq_err.two_norm:.6e}")
    print(f"|f(m={cfg.order_m}) - f_c| = {lift_err.two_norm:.6e} "
          f"({report.solver}, {report.iterations} iterations, "
          f"{report.gmres_iterations} GMRES iterations)")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    scenario = load_scenario(args.config)
    if args.n is not None:
        scenario = scenario.with_overrides(n_cells=args.n)
    basis = build_moment_basis(BasisKind.MONOMIAL, scenario.vgrid, CONSERVED_MOMENTS)

    if args.operator in ("qr-projector", "naive-projector"):
        which = "qr" if args.operator == "qr-projector" else "naive"
        report = projector_spectrum(basis, which)
    else:
        if scenario.n_cells > 200:
            raise ValueError("CR-Jacobian spectra need --n <= 200 (dense eigensolve)")
        cfg = _cr_config(scenario, args.order, None)
        stepper = scenario.make_stepper(warm_start=False)
        f0 = scenario.initial_field().values
        naive_P = naive_projector(basis)[0] if args.operator == "cr-naive" else None
        report = cr_jacobian_spectrum(
            stepper, basis, f0, cfg, naive_P=naive_P, threads=args.threads
        )

    comments = _comment_block(
        scenario,
        {"operator": report.operator, "spectral_radius": report.spectral_radius,
         **report.params},
    )
    _write_csv(
        args.out, comments, ("re", "im"),
        [(ev.real, ev.imag) for ev in report.eigenvalues],
    )
    print(f"{report.operator}: {report.eigenvalues.size} eigenvalues, "
          f"spectral radius {report.spectral_radius:.6e}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.config)
    grid_sizes = [int(s) for s in args.grid_sizes.split(",")]
    orders = [int(s) for s in args.orders.split(",")]
    steps = args.steps

    rows = []
    for n in grid_sizes:
        scen = scenario.with_overrides(n_cells=n)
        gas = scen.gas
        stepper = scen.make_stepper(warm_start=True)
        field = scen.initial_field()
        values = field.values
        for _ in range(steps):
            values = stepper.step(values)
        reference = field.with_values(values, time=steps * scen.dt)
        macro = restrict(reference, gas)
        basis = build_moment_basis(BasisKind.MONOMIAL, scen.vgrid, CONSERVED_MOMENTS)
        for m in orders:
            cfg = _cr_config(scen, m, "newton")
            lift_stepper = scen.make_stepper(warm_start=False)
            try:
                _, report = lift_macro(
                    lift_stepper, basis, macro, gas, cfg,
                    grid=scen.grid, vgrid=scen.vgrid, scale=scen.scale,
                )
                rows.append((n, m, report.gmres_iterations, report.iterations, 1))
                print(f"N={n} m={m}: {report.gmres_iterations} GMRES iterations, "
                      f"{report.iterations} Newton iterations")
            except KliftError as exc:
                rows.append((n, m, "", len(getattr(exc, "history", [])), 0))
                print(f"N={n} m={m}: FAILED ({exc})")

    comments = _comment_block(scenario, {"reference_steps": steps})
    _write_csv(
        args.out, comments,
        ("N", "m", "gmres_iterations", "newton_iterations", "converged"),
        rows,
    )
    return EXIT_OK


def cmd_restrict(args) -> int:
    scenario = load_scenario(args.config)
    field = read_snapshot(args.snapshot)
    macro = restrict(field, scenario.gas)
    comments = _comment_block(scenario)
    x = field.grid.centers
    _write_csv(
        args.out, comments,
        ("cell", "x", "number_density", "velocity", "temperature"),
        [
            (j, x[j], macro.number_density[j], macro.velocity[j], macro.temperature[j])
            for j in range(field.grid.n_cells)
        ],
    )
    print(f"wrote {args.out}")
    return EXIT_OK


# ---- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="klift",
        description="Discrete-velocity BGK solver with constrained-runs lifting",
    )
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads for Jacobian column assembly")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized test utilities")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-reference", help="run the reference time integration")
    p.add_argument("--config", required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run_reference)

    p = sub.add_parser("lift", help="restrict a reference snapshot and lift it back")
    p.add_argument("--config", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--solver", choices=("picard", "newton"), default=None)
    p.add_argument("--out", required=True, help="output file prefix")
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("spectrum", help="projector or CR-Jacobian spectrum")
    p.add_argument("--config", required=True)
    p.add_argument("--operator", required=True,
                   choices=("qr-projector", "naive-projector", "cr-qr", "cr-naive"))
    p.add_argument("--n", type=int, default=None, help="override grid.N")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("sweep", help="GMRES iteration counts over N and m")
    p.add_argument("--config", required=True)
    p.add_argument("--grid-sizes", required=True, help="comma-separated N values")
    p.add_argument("--orders", required=True, help="comma-separated m values")
    p.add_argument("--steps", type=int, default=200,
                   help="reference steps before each restrict-lift")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("restrict", help="export macroscopic fields of a snapshot")
    p.add_argument("--config", required=True)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_restrict)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARG
    except KliftError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
