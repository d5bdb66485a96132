"""Command-line driver: condition sweeps and field solves with CSV/VTK output."""

from __future__ import annotations

import argparse
import io
import math
import sys
from pathlib import Path

import numpy as np

from .circuit import _rc_matrix, rc_condition_closed_form
from .fem import PRESETS, build_toy_capacitor, displacement_field, load_config, write_vtk
from .numkit import NoConvergence, NumkitError, SingularMatrix, dense_cond_exact
from .stabilize import (VARIANT_TAGS, IncompatibleSource, ScalingVariant, SingularBlock,
                        recover_solution, scale_system, scaled_condest, solve_scaled)
from .timestep import EulerStepper, TransientConfig, euler_system, step

CLOSED_FORM_VARIANTS = ("orig", "i", "iii")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(v)
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.10e}"


def write_csv(out, header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    text = buf.getvalue()
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _grid(lo, hi, points):
    if lo <= 0 or hi <= 0:
        raise ValueError("log grid bounds must be positive")
    if points < 1:
        raise ValueError("need at least one grid point")
    if points == 1:
        return np.array([lo])
    return np.logspace(math.log10(lo), math.log10(hi), points)


def _variants(text, omega0, exact_blocks):
    tags = [t.strip() for t in text.split(",") if t.strip()]
    return [ScalingVariant(t, omega0=omega0, exact_blocks=exact_blocks) for t in tags]


def _warn(msg):
    print(f"eqstab: {msg}", file=sys.stderr)


def cmd_circuit_sweep(args) -> int:
    tags = [ScalingVariant(t).tag for t in args.variant.split(",")]
    bad = [t for t in tags if t not in CLOSED_FORM_VARIANTS]
    if bad:
        raise ValueError(f"circuit-sweep supports {', '.join(CLOSED_FORM_VARIANTS)}; got {bad}")
    f = list(_grid(args.fmin, args.fmax, args.points))
    if args.include_static:
        f.insert(0, 0.0)
    norm = "inf" if args.norm == "inf" else 1
    rows = []
    for fk in f:
        w = 2 * math.pi * fk
        row = [fk]
        for t in tags:
            if w == 0 and t == "orig":
                row.append(math.inf)
                continue
            k = rc_condition_closed_form(args.R, args.C, w, t, norm).kappa
            # independent numeric cross-check on the assembled 2x2 matrix
            if math.isfinite(k) and w > 0:
                try:
                    kn = dense_cond_exact(_rc_matrix(args.R, args.C, w, t), norm)
                except (SingularMatrix, ValueError):
                    kn = math.inf
                if not math.isclose(k, kn, rel_tol=1e-6):
                    _warn(f"f={fk:.3e} Hz variant {t}: closed form {k:.6e} vs numeric {kn:.6e}")
            row.append(k)
        rows.append(row)
    write_csv(args.out, ["f_Hz"] + [f"kappa_{t}" for t in tags], rows)
    return 0


def _problem(args):
    cfg = load_config(args.config)
    return cfg, build_toy_capacitor(cfg, divisions=args.mesh)


def cmd_field_sweep(args) -> int:
    cfg, prob = _problem(args)
    variants = _variants(args.variant, args.omega0, args.exact_blocks)
    grid = _grid(args.min, args.max, args.points)
    header_axis = "dt_s" if args.axis == "dt" else "f_Hz"
    rows = []
    if args.axis == "dt":
        for dt in list(grid) + ([math.inf] if args.include_static else []):
            row = [dt]
            for v in variants:
                row.append(_safe_kappa(lambda: euler_system(prob.sys, v, dt).scaled,
                                       f"dt={dt:.3e} s variant {v.tag}"))
            rows.append(row)
    else:
        f = list(grid)
        if args.include_static:
            f.insert(0, 0.0)
        for fk in f:
            row = [fk]
            for v in variants:
                row.append(_safe_kappa(lambda: scale_system(prob.sys, v, 2 * math.pi * fk),
                                       f"f={fk:.3e} Hz variant {v.tag}"))
            rows.append(row)
    write_csv(args.out, [header_axis] + [f"kappa_{v.tag}" for v in variants], rows)
    return 0


def _safe_kappa(build, where):
    try:
        return scaled_condest(build())
    except (IncompatibleSource, SingularBlock, NumkitError, ValueError) as exc:
        _warn(f"{where}: {exc}")
        return math.nan


def _probe_nodes(mesh, probes):
    coords = mesh.coordinates
    if not probes:
        probes = [tuple(0.5 * (c[-1] + c[0]) for c in (mesh.x, mesh.y, mesh.z))]
    ids = []
    for p in probes:
        ids.append(int(np.argmin(np.sum((coords - np.asarray(p)) ** 2, axis=1))))
    return ids


def _parse_probe(text):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("probe must be x,y,z")
    return tuple(parts)


def cmd_solve(args) -> int:
    cfg, prob = _problem(args)
    variant = ScalingVariant(args.variant, omega0=args.omega0, exact_blocks=args.exact_blocks)
    mesh, mats = prob.mesh, prob.materials
    try:
        if args.mode == "freq":
            f = cfg.f if args.f is None else args.f
            scaled = scale_system(prob.sys, variant, 2 * math.pi * f)
            xi, its = solve_scaled(scaled, args.solver, tol=args.tol, maxit=args.maxit,
                                   ilu=args.ilu)
            rec = recover_solution(xi, scaled.recovery)
            if not rec.defined:
                raise IncompatibleSource(
                    f"variant {variant.tag} cannot recover the insulator potential at 0 Hz; "
                    "use ii, iv, v or vi for static solves")
            phi = prob.nodal(rec.block_vector())
            res = np.linalg.norm(scaled.A @ xi - scaled.rhs) / max(np.linalg.norm(scaled.rhs),
                                                                    np.finfo(float).tiny)
            D = displacement_field(mesh, mats, phi)
            label = f"f={f:g} Hz"
        else:
            phi, D, its, res = _transient(args, cfg, prob, variant)
            label = f"dt={args.dt:g} s t_end={args.t_end:g} s"
    except SingularMatrix as exc:
        _warn(f"singular system ({exc}); the original formulation breaks down at 0 Hz, "
              "pick a stabilized variant")
        return 2
    except SingularBlock as exc:
        _warn(str(exc))
        return 2
    except IncompatibleSource as exc:
        _warn(str(exc))
        return 2
    except NoConvergence as exc:
        _warn(f"{exc}; try --solver lu or --ilu")
        return 3
    if args.vtk:
        write_vtk(args.vtk, mesh, point_data={"phi": phi}, cell_data={"D_abs": D})
    print(f"{label} variant={variant.tag} solver={args.solver} dofs={prob.ndof} "
          f"min|D|={D.min():.6e} max|D|={D.max():.6e} iterations={its} residual={res:.3e}")
    return 0


def _transient(args, cfg, prob, variant):
    tc = TransientConfig(dt=args.dt, t_end=args.t_end, variant=variant, solver=args.solver,
                         tol=args.tol, maxit=args.maxit, ilu=args.ilu)
    stepper = EulerStepper(prob.sys, tc)
    profile = prob.bc.values
    bc = lambda t: profile * math.sin(cfg.omega * t)
    probes = _probe_nodes(prob.mesh, args.probe)
    rows = []

    def sample(st):
        phi = prob.nodal(st.phi, st.g).real
        D = displacement_field(prob.mesh, prob.materials, phi)
        rows.append([st.t] + [phi[i] for i in probes] + [D.max(), D.min()])
        return phi, D

    state = stepper.initial_state(bc(tc.t0))
    phi, D = sample(state)
    its_total = 0
    for k in range(1, tc.n_steps + 1):
        state = step(state, stepper, bc(tc.t0 + k * tc.dt))
        its_total += state.iterations
        phi, D = sample(state)
    if args.out:
        write_csv(args.out, ["t"] + [f"probe_phi{j}" for j in range(len(probes))]
                  + ["max_D", "min_D"], rows)
    return phi, D, its_total, state.residual


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eqstab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common_variant(sp, default):
        sp.add_argument("--variant", default=default,
                        help=f"comma-separated list from {', '.join(VARIANT_TAGS)}")
        sp.add_argument("--omega0", type=float, default=0.0,
                        help="expansion point of variant vi in rad/s (1/s in the time domain)")
        sp.add_argument("--exact-blocks", action="store_true",
                        help="exact LU instead of ILU(0) inside the v/vi block preconditioners")

    c = sub.add_parser("circuit-sweep", help="closed-form condition numbers of the RC loop")
    c.add_argument("--R", type=float, default=1.0)
    c.add_argument("--C", type=float, default=1e-12)
    c.add_argument("--fmin", type=float, default=1e-20)
    c.add_argument("--fmax", type=float, default=1e40)
    c.add_argument("--points", type=int, default=61)
    c.add_argument("--variant", default="orig,i,iii")
    c.add_argument("--norm", choices=("1", "inf"), default="1")
    c.add_argument("--include-static", action="store_true")
    c.add_argument("--out")
    c.set_defaults(func=cmd_circuit_sweep)

    def field_common(sp):
        sp.add_argument("--config", default="toy-capacitor",
                        help=f"preset ({', '.join(PRESETS)}) or key=value file")
        sp.add_argument("--mesh", help="element divisions NxNxN (multiples of 11 for the preset)")

    f = sub.add_parser("field-sweep", help="condition estimates of the field problem")
    field_common(f)
    f.add_argument("--axis", choices=("dt", "frequency"), default="dt")
    f.add_argument("--min", type=float, default=1e-10)
    f.add_argument("--max", type=float, default=1e10)
    f.add_argument("--points", type=int, default=21)
    f.add_argument("--norm", choices=("inf",), default="inf",
                   help="field sweeps estimate the infinity-norm condition number")
    f.add_argument("--include-static", action="store_true")
    f.add_argument("--out")
    common_variant(f, "orig,i,ii,iii,iv")
    f.set_defaults(func=cmd_field_sweep)

    s = sub.add_parser("solve", help="frequency-domain or transient field solve")
    field_common(s)
    s.add_argument("--mode", choices=("freq", "transient"), default="freq")
    s.add_argument("--f", type=float, help="frequency in Hz (default: config value)")
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--t-end", type=float, default=5e-3)
    s.add_argument("--solver", choices=("lu", "bicgstab"), default="lu")
    s.add_argument("--ilu", action="store_true", help="ILU(0) preconditioning for bicgstab")
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--maxit", type=int, default=5000)
    s.add_argument("--probe", type=_parse_probe, action="append",
                   help="x,y,z of a potential probe for the transient CSV (repeatable)")
    s.add_argument("--out", help="transient time-series CSV")
    s.add_argument("--vtk", help="write phi and |D| to a legacy VTK file")
    common_variant(s, "iv")
    s.set_defaults(func=cmd_solve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        _warn(str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
