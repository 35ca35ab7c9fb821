"""Command-line front end: `generate`, `solve`, `verify`.

Exit codes: 0 success, 2 validation error, 3 solver failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import Problem, build_problem, load_config
from .errors import AirgapFeError, SolverError
from .mesh import Mesh, save_mesh
from .postproc import write_csv, write_vtk
from .solver import solve_static, solve_transient
from .verify import run_all

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4


def _provenance(config_hash: str) -> str:
    return f"airgapfe {__version__} config sha256:{config_hash}"


def _merged_mesh(problem: Problem) -> tuple[Mesh, np.ndarray, np.ndarray]:
    """Both subdomain meshes in one container for a single VTK file."""
    m_st, m_rt = problem.sub_st.mesh, problem.sub_rt.mesh
    offset = m_st.num_nodes
    merged = Mesh(
        nodes=np.vstack([m_st.nodes, m_rt.nodes]),
        triangles=np.vstack([m_st.triangles, m_rt.triangles + offset]),
        region_tags=np.concatenate([m_st.region_tags, m_rt.region_tags]),
    )
    return merged, np.arange(offset), offset + np.arange(m_rt.num_nodes)


def cmd_generate(args) -> int:
    config = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for side in (config.stator, config.rotor):
        mesh = side.build_mesh(config.base_dir)
        save_mesh(mesh, out / f"{side.name}.mesh")
        print(f"wrote {out / (side.name + '.mesh')} "
              f"({mesh.num_nodes} nodes, {mesh.num_triangles} triangles)")
    return EXIT_OK


def cmd_solve(args) -> int:
    config = load_config(args.config)
    problem = build_problem(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prov = _provenance(problem.config_hash)
    sc = problem.solver
    maxit = sc.maxit or None
    merged, idx_st, idx_rt = _merged_mesh(problem)

    if sc.mode == "static":
        rho = problem.operator.geometry.rho_rt
        motion = problem.profile.state_at(problem.profile.t[0], rho)
        u_st, u_rt, sample, stats = solve_static(
            problem.sub_st, problem.sub_rt, problem.operator, motion=motion,
            tol=sc.tol, maxiter=maxit, sweeps=sc.sweeps,
            interior=sc.interior)
        samples = [sample]
        u_all = np.empty(merged.num_nodes)
        u_all[idx_st], u_all[idx_rt] = u_st, u_rt
        write_vtk(merged, u_all, out / problem.output.vtk, provenance=prov)
        print(f"static solve converged in {stats.iterations} iterations "
              f"(residual {stats.final_residual:.3e})")
    else:
        n_steps = max(1, round(sc.t_end / sc.dt))
        result = solve_transient(
            problem.sub_st, problem.sub_rt, problem.operator,
            problem.profile, dt=sc.dt, n_steps=n_steps, theta=sc.theta,
            tol=sc.tol, maxiter=maxit, sweeps=sc.sweeps,
            interior=sc.interior, snapshot_every=args.snapshot_every)
        samples = result.samples
        for i, (t, u_st, u_rt) in enumerate(result.snapshots):
            u_all = np.empty(merged.num_nodes)
            u_all[idx_st], u_all[idx_rt] = u_st, u_rt
            write_vtk(merged, u_all,
                      out / f"snapshot_{i:04d}.vtk",
                      provenance=f"{prov} t={t:.17g}")
        u_all = np.empty(merged.num_nodes)
        u_all[idx_st], u_all[idx_rt] = result.u_st, result.u_rt
        write_vtk(merged, u_all, out / problem.output.vtk, provenance=prov)
        print(f"transient solve: {n_steps} steps, "
              f"{result.total_iterations} total iterations")

    write_csv(samples, out / problem.output.csv, provenance=prov)
    print(f"wrote {out / problem.output.csv}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.config:
        config = load_config(args.config)
        build_problem(config)  # full validation before the checks
        print(f"config {config.config_hash} validated")
    report = run_all(fast=args.fast)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify_report.json").write_text(report.to_json() + "\n")
    for check in report.checks:
        print(f"{'PASS' if check.passed else 'FAIL'}  {check.name}  "
              f"{check.measured}")
    if not report.passed:
        print("verification FAILED")
        return EXIT_VERIFY
    print("verification passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airgapfe",
        description="2D FE machine simulator with a spectral air-gap "
                    "coupling (rotation, skew and eccentricity without "
                    "remeshing)")
    parser.add_argument("--version", action="version",
                        version=f"airgapfe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write mesh files from the "
                                            "generator specs in the config")
    p_gen.add_argument("--config", required=True)
    p_gen.add_argument("--out", default=".")
    p_gen.set_defaults(func=cmd_generate)

    p_solve = sub.add_parser("solve", help="run a static or transient solve")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", default=".")
    p_solve.add_argument("--snapshot-every", type=int, default=0,
                         metavar="K", help="write a VTK snapshot every K "
                                           "transient steps")
    p_solve.set_defaults(func=cmd_solve)

    p_ver = sub.add_parser("verify", help="run the oracle self-checks")
    p_ver.add_argument("--config", default=None,
                       help="optional config to validate before the checks")
    p_ver.add_argument("--out", default=".")
    p_ver.add_argument("--fast", action="store_true",
                       help="skip the timing probe and use coarser grids")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except AirgapFeError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
