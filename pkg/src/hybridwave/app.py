"""Command-line driver: cavity runs, convergence studies, spectra and
constants reports.

Configuration is a flat INI file (key = value under a [run] section) or
command-line flags; flags override the file.  Every command writes a CSV
with a header row and full-precision scientific values, plus a short text
summary on stdout.
"""

import argparse
import configparser
import csv
import os
import sys

import numpy as np

from . import stability as stab
from .dg import Discretization, discrete_energy
from .mesh import read_gmsh, structured_hybrid_mesh, uniform_cube_mesh
from .refelem import ELEMENT_TYPES
from .stability import (analytic_trace_constant, assign_mrab_levels,
                        computed_trace_constant, hex_exact_trace,
                        local_timesteps, markov_constant, spectral_bounds)
from .timeint import mrab_run, single_rate_run

__all__ = [
    "cavity_solution",
    "cavity_fields",
    "l2_error",
    "RunConfig",
    "solve_run",
    "convergence_study",
    "spectra_report",
    "constants_report",
    "main",
]

SQRT3 = np.sqrt(3.0)


def cavity_solution(x, y, z, tau):
    """Resonant cavity eigenmode of the unit cube with p = 0 walls and
    rho = kappa = 1.

    p = sin(pi x) sin(pi y) sin(pi z) cos(sqrt(3) pi tau); the velocity
    follows from integrating rho du/dtau = -grad p in time from u(0) = 0.
    """
    sx, cx = np.sin(np.pi * x), np.cos(np.pi * x)
    sy, cy = np.sin(np.pi * y), np.cos(np.pi * y)
    sz, cz = np.sin(np.pi * z), np.cos(np.pi * z)
    p = sx * sy * sz * np.cos(SQRT3 * np.pi * tau)
    amp = -np.sin(SQRT3 * np.pi * tau) / SQRT3
    u1 = amp * cx * sy * sz
    u2 = amp * sx * cy * sz
    u3 = amp * sx * sy * cz
    return p, u1, u2, u3


def cavity_fields(x, tau):
    """Vectorized (..., 4) field array for projection and error norms."""
    p, u1, u2, u3 = cavity_solution(x[..., 0], x[..., 1], x[..., 2], tau)
    return np.stack([p, u1, u2, u3], axis=-1)


def l2_error(state, disc, tau, exact=cavity_fields):
    """L2 error of a discrete state against an analytic solution."""
    return disc.l2_error(state, exact, tau)


class RunConfig:
    """Run settings for the solver commands.

    mesh is either 'hybrid:n', '<type>:n' for the structured generators,
    or a path to a GMSH v2.2 file.
    """

    def __init__(self, mesh="hybrid:2", N=2, formulation="GL", cfl=0.5,
                 n_levels=1, T_final=0.3, outdir=".", materials=None):
        if not 1 <= N <= 7:
            raise ValueError("solver runs support N in 1..7")
        self.mesh = mesh
        self.N = N
        self.formulation = formulation
        self.cfl = cfl
        self.n_levels = n_levels
        self.T_final = T_final
        self.outdir = outdir
        self.materials = materials or {}

    @classmethod
    def from_file(cls, path, **overrides):
        cp = configparser.ConfigParser()
        with open(path) as fh:
            cp.read_file(fh)
        run = cp["run"] if cp.has_section("run") else cp["DEFAULT"]
        kw = {}
        for key, cast in [("mesh", str), ("N", int), ("formulation", str),
                          ("cfl", float), ("n_levels", int),
                          ("T_final", float), ("outdir", str)]:
            if key in run:
                kw[key] = cast(run[key])
        materials = {}
        if cp.has_section("materials"):
            for gid, val in cp["materials"].items():
                rho, kappa = (float(v) for v in val.split(","))
                materials[int(gid)] = (rho, kappa)
        kw["materials"] = materials
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)


def build_mesh(spec):
    if os.path.exists(spec) or spec.endswith(".msh"):
        return read_gmsh(spec)
    kind, _, n = spec.partition(":")
    n = int(n or 2)
    if kind == "hybrid":
        return structured_hybrid_mesh(n)
    if kind in ELEMENT_TYPES:
        return uniform_cube_mesh(kind, n)
    raise ValueError(f"unknown mesh spec {spec!r}")


def _write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17e}" if isinstance(v, float) else v
                        for v in row])
    return path


def solve_run(config, exact=cavity_fields, verbose=True):
    """Cavity run from projected initial data; returns the final errors.

    n_levels = 1 advances with single-rate AB3 at the minimum local
    timestep; more levels run the multi-rate driver.
    """
    mesh = build_mesh(config.mesh)
    if config.materials:
        mesh.set_materials(config.materials)
    disc = Discretization(mesh, config.N, config.formulation)
    state = disc.project(exact, 0.0)
    dt_local = local_timesteps(disc, config.cfl)
    energies = []

    def track(tau, st):
        energies.append((tau, discrete_energy(st, disc)))

    if config.n_levels <= 1:
        dt = min(float(v.min()) for v in dt_local.values())
        state = single_rate_run(disc, state, dt, config.T_final,
                                callback=track)
        driver = None
    else:
        plan = assign_mrab_levels(dt_local, config.n_levels, mesh,
                                  cfl=config.cfl)
        state, driver = mrab_run(disc, plan, state, config.T_final,
                                 callback=track)
    err = disc.l2_error(state, exact, config.T_final)
    if verbose:
        print(f"mesh={config.mesh} N={config.N} {config.formulation}: "
              f"L2 error p={err['p']:.6e} u={err['u']:.6e} "
              f"total={err['total']:.6e}")
    return {"errors": err, "energies": energies, "disc": disc,
            "driver": driver, "state": state}


def convergence_study(config, resolutions, mesh_kind=None, exact=cavity_fields,
                      outfile=None, verbose=True):
    """Errors over a refinement sequence and the least-squares rate.

    resolutions are cells per axis (h = 1/n assumed halving); returns
    (errors, rate).
    """
    if len(resolutions) < 2:
        raise ValueError("need at least two resolutions")
    kind = mesh_kind or config.mesh.split(":")[0]
    errs = []
    for n in resolutions:
        cfg = RunConfig(mesh=f"{kind}:{n}", N=config.N,
                        formulation=config.formulation, cfl=config.cfl,
                        n_levels=config.n_levels, T_final=config.T_final,
                        outdir=config.outdir)
        out = solve_run(cfg, exact=exact, verbose=verbose)
        errs.append(out["errors"]["total"])
    hs = 1.0 / np.asarray(resolutions, dtype=float)
    rate = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    if verbose:
        print(f"{kind} N={config.N} {config.formulation}: rate {rate:.3f}")
    if outfile:
        rows = [(int(n), float(1.0 / n), float(e))
                for n, e in zip(resolutions, errs)]
        rows.append(("rate", "", rate))
        _write_csv(outfile, ["n", "h", "l2_error"], rows)
    return np.array(errs), rate


def spectra_report(config, outfile=None, dof_budget=20000, dense_budget=4000,
                   verbose=True):
    """Eigenvalue summary of M^-1 A with the bound chain of the real part.

    Dense spectra are dumped when the problem is small enough; otherwise
    only the extremal quantities are computed iteratively.
    """
    mesh = build_mesh(config.mesh)
    disc = Discretization(mesh, config.N, config.formulation)
    A, M = disc.assemble_global(dof_budget=dof_budget)
    bounds = spectral_bounds(disc)
    out = {
        "rho_A": stab.spectral_radius(A, M),
        "rho_As": stab.spectral_radius(A, M, part="sym"),
        "rho_Ak": stab.spectral_radius(A, M, part="skew"),
        "max_re": stab.max_real_eig(A, M),
        "bound_elementwise": bounds["re_elementwise"],
        "bound_computed": bounds["re_computed"],
        "bound_analytic": bounds["re_analytic"],
        "bound_im": bounds["im_bound"],
    }
    eigs = None
    if disc.n_dof <= dense_budget:
        import scipy.linalg as la
        eigs = la.eig(np.linalg.solve(M.toarray(), A.toarray()),
                      right=False)
        out["max_re"] = float(eigs.real.max())
        out["rho_A"] = float(np.abs(eigs).max())
    if verbose:
        print(f"spectra {config.mesh} N={config.N} {config.formulation}:")
        for k, v in out.items():
            print(f"  {k} = {v:.6e}")
    if outfile:
        rows = [(k, float(v)) for k, v in out.items()]
        if eigs is not None:
            rows += [("eig", f"{ev.real:.17e}{ev.imag:+.17e}j")
                     for ev in eigs]
        _write_csv(outfile, ["quantity", "value"], rows)
    return out


def constants_report(max_N=9, outfile=None, verbose=True):
    """Reproduce the computed trace, SEM-trace and Markov constant tables
    together with the analytic face-based column."""
    rows = []
    for t in ELEMENT_TYPES:
        for N in range(1, max_N + 1):
            rows.append((t, N,
                         float(computed_trace_constant(t, N, "full")),
                         float(computed_trace_constant(t, N, "SEM")),
                         float(markov_constant(t, N)),
                         float(analytic_trace_constant(t, N))))
    header = ["elem_type", "N", "C_T_computed", "C_SEM_computed", "C_M",
              "C_T_analytic"]
    if verbose:
        print(",".join(header))
        for r in rows:
            print(f"{r[0]},{r[1]},{r[2]:.2f},{r[3]:.2f},{r[4]:.2f},{r[5]:.2f}")
    if outfile:
        _write_csv(outfile, header, rows)
    return rows


def timestep_plan_report(config, outfile=None, verbose=True):
    """Local timesteps and multi-rate level assignment for a mesh."""
    mesh = build_mesh(config.mesh)
    disc = Discretization(mesh, config.N, config.formulation)
    dt_local = local_timesteps(disc, config.cfl)
    plan = assign_mrab_levels(dt_local, config.n_levels, mesh,
                              cfl=config.cfl)
    rows = []
    for t in disc.types:
        for k in range(disc.n_elems[t]):
            rows.append((t, k, float(dt_local[t][k]),
                         int(plan.levels[t][k]),
                         float(plan.dt_of(t)[k])))
    if verbose:
        occupancy = {lev: sum(int((plan.levels[t] == lev).sum())
                              for t in disc.types)
                     for lev in range(1, plan.n_levels + 1)}
        print(f"dt_min = {plan.dt_min:.6e}, levels: {occupancy}")
    if outfile:
        _write_csv(outfile, ["elem_type", "k", "dt_local", "level", "dt_level"],
                   rows)
    return plan


def _add_common(p):
    p.add_argument("--config", help="INI config file")
    p.add_argument("--mesh", help="mesh spec: hybrid:n, hex:n, ... or .msh path")
    p.add_argument("--order", "-N", type=int, dest="N")
    p.add_argument("--formulation", choices=["SEM", "GL"])
    p.add_argument("--cfl", type=float)
    p.add_argument("--levels", type=int, dest="n_levels")
    p.add_argument("--t-final", type=float, dest="T_final")
    p.add_argument("--outdir", default=None)
    p.add_argument("--output", help="CSV output path")


def _config_from_args(args):
    over = {k: getattr(args, k, None)
            for k in ["mesh", "N", "formulation", "cfl", "n_levels",
                      "T_final", "outdir"]}
    if args.config:
        return RunConfig.from_file(args.config, **over)
    return RunConfig(**{k: v for k, v in over.items() if v is not None})


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="hybridwave",
        description="High-order DG acoustic wave solver on hybrid meshes")
    sub = ap.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="cavity run with error report")
    _add_common(ps)

    pc = sub.add_parser("converge", help="refinement study")
    _add_common(pc)
    pc.add_argument("--resolutions", default="2,4,8",
                    help="comma-separated cells per axis")

    pp = sub.add_parser("spectra", help="eigenvalues and bounds")
    _add_common(pp)

    pk = sub.add_parser("constants", help="trace/Markov constant tables")
    pk.add_argument("--max-N", type=int, default=9, dest="max_N")
    pk.add_argument("--output", help="CSV output path")

    pt = sub.add_parser("timestep-plan", help="local dt and MRAB levels")
    _add_common(pt)

    args = ap.parse_args(argv)
    if args.command == "constants":
        constants_report(args.max_N, outfile=args.output)
        return 0
    config = _config_from_args(args)
    out = args.output or os.path.join(config.outdir or ".",
                                      f"{args.command}.csv")
    if args.command == "solve":
        res = solve_run(config)
        err = res["errors"]
        _write_csv(out, ["field", "l2_error"],
                   [("p", err["p"]), ("u", err["u"]), ("total", err["total"])])
    elif args.command == "converge":
        res = [int(v) for v in args.resolutions.split(",")]
        convergence_study(config, res, outfile=out)
    elif args.command == "spectra":
        spectra_report(config, outfile=out)
    elif args.command == "timestep-plan":
        timestep_plan_report(config, outfile=out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
