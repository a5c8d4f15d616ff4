"""Run orchestration: setup -> projection -> march -> frames and manifest."""

from __future__ import annotations

import os
import time as _time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .. import __version__
from ..basis import DGSpace, ModalField
from ..dg_core import SemiDiscreteOperator, woodward_colella_corner_fix
from ..limiter import LimiterConfig, MRConfig, apply_limiter_pass
from ..mesh import build_indicator_stencils, pack_stencils, read_mesh
from ..physics import AdmissibilityError
from ..time_march import RunStats, StepController, march
from ..verify import error_norms
from .catalog import get_problem
from .config import ConfigError, RunConfig, config_dict
from .output import FrameOutput, component_names, write_frame, write_manifest


@dataclass
class RunSetup:
    problem: object
    config: RunConfig
    mesh: object
    space: DGSpace
    physics: object
    field: ModalField
    op: SemiDiscreteOperator
    packed: object
    limiter_cfg: LimiterConfig
    controller: StepController
    stage_hook: object = None


@dataclass
class RunResult:
    directory: str
    stats: RunStats
    field: ModalField
    setup: RunSetup
    frames: list = dc_field(default_factory=list)
    errors: dict | None = None
    history: list = dc_field(default_factory=list)


def limiter_config_from(cfg: RunConfig) -> LimiterConfig:
    return LimiterConfig(
        scheme=cfg.limiter,
        mr=MRConfig(c_k=cfg.c_k, characteristic=cfg.characteristic),
        kxrcf_threshold=cfg.kxrcf_threshold,
        fs_threshold=cfg.fs_threshold,
        tvb_m=cfg.tvb_m,
        positivity=cfg.positivity)


def build_mesh(problem, cfg: RunConfig):
    if cfg.mesh_kind == "file":
        if not cfg.mesh_file:
            raise ConfigError("mesh_kind=file needs mesh_file")
        return read_mesh(cfg.mesh_file)
    spec = dict(problem.default_mesh)
    if problem.dim == 1:
        n = cfg.mesh_n or problem.default_n
        return problem.mesh_builder(n=n)
    kind = cfg.mesh_kind or spec.get("kind", "quad")
    return problem.mesh_builder(
        kind=kind,
        nx=cfg.mesh_nx or spec.get("nx"),
        ny=cfg.mesh_ny or spec.get("ny"),
        edge=cfg.mesh_edge or spec.get("edge"))


def setup_run(cfg: RunConfig) -> RunSetup:
    problem = get_problem(cfg.problem)
    cfg.validate(problem.dim)
    mesh = build_mesh(problem, cfg)
    physics = problem.make_physics()
    space = DGSpace(mesh, cfg.degree)

    lam = cfg.scale_factor
    if lam != 1.0:
        initial = lambda pts: lam * problem.initial(pts)
    else:
        initial = problem.initial
    field = space.l2_project(initial, n_comp=physics.n_comp)

    bcs = problem.boundary(physics) if problem.boundary else {}
    op = SemiDiscreteOperator(space, physics, bcs, alpha_mode=cfg.alpha_mode)
    packed = pack_stencils(mesh, build_indicator_stencils(mesh))
    limiter_cfg = limiter_config_from(cfg)

    end_time = cfg.end_time if cfg.end_time is not None else problem.end_time
    dt_law = None
    if cfg.dt_law_c is not None:
        dt_law = (cfg.dt_law_c, cfg.dt_law_q)
    controller = StepController(end_time=end_time, cfl=cfg.cfl, dt_law=dt_law)

    stage_hook = None
    if problem.corner_fix and cfg.corner_fix:
        h = float(np.min(mesh.length_scales())) * 2.0
        stage_hook = woodward_colella_corner_fix(
            space, physics, problem.corner_fix["corner"],
            problem.corner_fix["upstream"], 2.0 * h)

    return RunSetup(problem=problem, config=cfg, mesh=mesh, space=space,
                    physics=physics, field=field, op=op, packed=packed,
                    limiter_cfg=limiter_cfg, controller=controller,
                    stage_hook=stage_hook)


def run(cfg: RunConfig, quiet=True) -> RunResult:
    """Execute a configured run and write frames, outputs and a manifest.

    Any failure is recorded in the manifest as a machine-readable error
    record before the exception is re-raised.
    """
    t_wall = _time.time()
    setup = setup_run(cfg)
    outdir = os.path.join(cfg.output_dir, cfg.problem and
                          f"{cfg.problem}_k{cfg.degree}_{cfg.limiter}" or "run")
    os.makedirs(outdir, exist_ok=True)
    manifest_path = os.path.join(outdir, "manifest.json")
    manifest = {
        "version": __version__,
        "config": config_dict(cfg),
        "problem": cfg.problem,
        "status": "running",
    }
    write_manifest(manifest_path, manifest)

    result = RunResult(directory=outdir, stats=RunStats(), field=setup.field,
                       setup=setup)
    record_history = cfg.record_history
    if record_history is None:
        record_history = setup.mesh.dim == 1

    try:
        # initial limiting makes extreme initial data admissible at the nodes
        rep = apply_limiter_pass(setup.space, setup.field, setup.physics,
                                 setup.packed, setup.limiter_cfg)
        names = component_names(setup.physics)

        frame_times = []
        if cfg.n_frames > 0:
            frame_times = list(np.linspace(0.0, setup.controller.end_time,
                                           cfg.n_frames + 1)[1:-1])
        emitted = [0]

        def emit(field, t, decisions):
            frame = FrameOutput(
                time=t, centroids=setup.mesh.centroids,
                averages=field.cell_averages().copy(),
                order_code=decisions.astype(int),
                component_names=names,
                coefficients=field.data.copy() if cfg.save_coefficients else None)
            base = os.path.join(outdir, f"frame_{emitted[0]:04d}")
            for fmt in ("csv", "vtk"):
                result.frames.extend(write_frame(
                    frame, base, fmt, mesh=setup.mesh,
                    paper_order_codes=cfg.paper_order_codes))
            emitted[0] += 1

        emit(setup.field, 0.0, rep.decisions)

        def on_step(field, t, stats):
            if record_history:
                result.history.append((t, stats.last_report.decisions.copy()))
            while frame_times and t >= frame_times[0] - 1e-12:
                frame_times.pop(0)
                emit(field, t, stats.last_report.decisions)

        stats = march(setup.space, setup.field, setup.op, setup.packed,
                      setup.limiter_cfg, setup.controller, on_step=on_step,
                      stage_hook=setup.stage_hook,
                      record_decisions=False)
        result.stats = stats
        final_dec = stats.last_report.decisions if stats.last_report is not None \
            else rep.decisions
        emit(setup.field, setup.controller.time, final_dec)

        exact = setup.problem.exact(setup.controller.time) \
            if setup.problem.exact else None
        if exact is not None and cfg.scale_factor == 1.0:
            result.errors = error_norms(setup.space, setup.field, exact)
            with open(os.path.join(outdir, "errors.csv"), "w") as fh:
                fh.write("norm,value\n")
                for k, v in result.errors.items():
                    fh.write(f"{k},{v:.17g}\n")

        if record_history and result.history:
            with open(os.path.join(outdir, "history.csv"), "w") as fh:
                fh.write("t," + ",".join(f"cell{i}" for i in
                                         range(setup.mesh.n_elements)) + "\n")
                for t, dec in result.history:
                    fh.write(f"{t:.17g}," + ",".join(str(int(d)) for d in dec)
                             + "\n")

        manifest.update({
            "status": "completed",
            "steps": stats.steps,
            "final_time": setup.controller.time,
            "wall_seconds": _time.time() - t_wall,
            "min_density": stats.min_density,
            "min_pressure": stats.min_pressure,
            "errors": result.errors,
        })
        write_manifest(manifest_path, manifest)
    except Exception as err:
        manifest.update({
            "status": "failed",
            "error": {"type": type(err).__name__, "message": str(err)},
            "wall_seconds": _time.time() - t_wall,
        })
        write_manifest(manifest_path, manifest)
        raise
    return result
