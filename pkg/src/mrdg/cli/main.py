"""Command line interface.

    mrdg run <problem|config.ini> [key=value ...]
    mrdg convergence <problem> --k 1,2,3 --meshes 20,40,80,160 [--out table.csv]
    mrdg catalog
    mrdg mesh gen|check ...

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .. import mesh as meshmod
from ..basis import BasisError, DGSpace
from ..dg_core import SemiDiscreteOperator
from ..limiter import LimiterConfig, MRConfig
from ..mesh import MeshError, check_mesh, read_mesh, write_mesh
from ..physics import AdmissibilityError
from ..time_march import StepController, march
from ..verify import convergence_study, write_convergence_csv
from .catalog import catalog, get_problem
from .config import ConfigError, load_config
from .runner import run, setup_run

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _cmd_run(args):
    target = args.target
    overrides = list(args.overrides)
    if os.path.exists(target):
        cfg = load_config(target, overrides)
    else:
        cfg = load_config(None, [f"problem={target}"] + overrides)
    result = run(cfg)
    stats = result.stats
    print(f"completed {cfg.problem}: {stats.steps} steps to t={stats.time:.6g}, "
          f"outputs in {result.directory}")
    if result.errors:
        print("  errors: " + ", ".join(f"{k}={v:.4g}"
                                       for k, v in result.errors.items()))
    return 0


def _cmd_catalog(args):
    for name in catalog():
        p = get_problem(name)
        print(f"{name:20s} {p.dim}D  T={p.end_time:<8g} {p.description}")
    return 0


def _cmd_convergence(args):
    problem = get_problem(args.problem)
    if problem.exact is None:
        raise ConfigError(f"{args.problem} has no exact solution")
    ks = [int(s) for s in args.k.split(",")]
    ns = [int(s) for s in args.meshes.split(",")]
    dt_laws = {1: (0.3, 1.0), 2: (0.15, 1.0), 3: (0.25, 4.0 / 3.0),
               4: (0.3, 5.0 / 3.0), 5: (0.5, 2.0), 6: (0.4, 7.0 / 3.0)}
    reports = []
    for k in ks:
        def run_one(n, k=k):
            cfg = load_config(None, [
                f"problem={args.problem}", f"degree={k}", f"mesh_n={n}",
                f"dt_law_c={dt_laws[k][0]}", f"dt_law_q={dt_laws[k][1]}",
                "n_frames=0", f"output_dir={args.out_dir}"])
            setup = setup_run(cfg)
            from ..limiter import apply_limiter_pass
            apply_limiter_pass(setup.space, setup.field, setup.physics,
                               setup.packed, setup.limiter_cfg)
            march(setup.space, setup.field, setup.op, setup.packed,
                  setup.limiter_cfg, setup.controller)
            exact = setup.problem.exact(setup.controller.time)
            return setup.space, setup.field, exact
        rep = convergence_study(run_one, ns, k)
        reports.append(rep)
        print(f"k={k}: Linf(center) orders "
              + " ".join(f"{o:.2f}" for o in rep.orders()))
    out = args.out or os.path.join(args.out_dir, f"convergence_{args.problem}.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    write_convergence_csv(out, reports)
    print(f"table written to {out}")
    return 0


def _cmd_mesh(args):
    if args.mesh_cmd == "check":
        mesh = read_mesh(args.path)
        check_mesh(mesh)
        kinds = "intervals" if mesh.dim == 1 else \
            f"{int(np.sum(mesh.elem_nv == 3))} triangles, " \
            f"{int(np.sum(mesh.elem_nv == 4))} quads"
        print(f"ok: {mesh.dim}D mesh, {mesh.n_elements} elements ({kinds}), "
              f"{mesh.n_faces} faces, {len(mesh.boundary_faces)} boundary")
        return 0
    # gen
    if args.problem:
        problem = get_problem(args.problem)
        mesh = problem.mesh_builder(kind=args.kind, nx=args.nx or None,
                                    ny=args.ny or None, edge=args.edge or None,
                                    n=args.n or None)
    else:
        rect = tuple(float(s) for s in args.domain.split(","))
        if args.kind == "tri":
            mesh = meshmod.generate_quasi_uniform_triangles(args.edge, rect)
        else:
            mesh = meshmod.generate_structured_quads(args.nx, args.ny, rect)
    write_mesh(mesh, args.out)
    print(f"wrote {mesh.n_elements} elements to {args.out}")
    return 0


def make_parser():
    ap = argparse.ArgumentParser(prog="mrdg",
                                 description="RKDG solver with a "
                                             "multi-resolution limiter")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="run a catalog problem or config file")
    p_run.add_argument("target", help="problem name or path to a config file")
    p_run.add_argument("overrides", nargs="*",
                       help="key=value overrides, e.g. degree=3 mesh_n=400")
    p_run.set_defaults(fn=_cmd_run)

    p_cat = sub.add_parser("catalog", help="list preconfigured problems")
    p_cat.set_defaults(fn=_cmd_catalog)

    p_conv = sub.add_parser("convergence", help="mesh-refinement error table")
    p_conv.add_argument("problem")
    p_conv.add_argument("--k", default="1,2,3")
    p_conv.add_argument("--meshes", default="20,40,80,160")
    p_conv.add_argument("--out", default="")
    p_conv.add_argument("--out-dir", default=os.environ.get("MRDG_OUTPUT_DIR",
                                                            "runs"))
    p_conv.set_defaults(fn=_cmd_convergence)

    p_mesh = sub.add_parser("mesh", help="generate or validate mesh files")
    msub = p_mesh.add_subparsers(dest="mesh_cmd", required=True)
    p_gen = msub.add_parser("gen")
    p_gen.add_argument("--problem", default="",
                       help="use a catalog problem's domain")
    p_gen.add_argument("--kind", default="quad", choices=("quad", "tri"))
    p_gen.add_argument("--domain", default="0,1,0,1",
                       help="x0,x1,y0,y1 for rectangle domains")
    p_gen.add_argument("--nx", type=int, default=10)
    p_gen.add_argument("--ny", type=int, default=10)
    p_gen.add_argument("--n", type=int, default=0)
    p_gen.add_argument("--edge", type=float, default=0.1)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(fn=_cmd_mesh)
    p_chk = msub.add_parser("check")
    p_chk.add_argument("path")
    p_chk.set_defaults(fn=_cmd_mesh)

    return ap


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, MeshError, BasisError, KeyError, ValueError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (AdmissibilityError, ArithmeticError, RuntimeError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
