"""SSP-RK3 time integration with CFL step control and per-stage limiting."""

from __future__ import annotations

import ctypes
import ctypes.util
from dataclasses import dataclass, field as dc_field

import numpy as np

from .basis import DGSpace, ModalField
from .limiter import LimiterConfig, LimiterReport, apply_limiter_pass
from .dg_core import SemiDiscreteOperator
from .physics import AdmissibilityError

CFL_DEFAULTS = {0: 0.5, 1: 0.3, 2: 0.15, 3: 0.1, 4: 0.06, 5: 0.05, 6: 0.04}

_ALLOCATOR_TUNED = False


def _tune_allocator():
    """Keep large freed blocks on the glibc heap instead of unmapping them.

    The stage loop allocates many multi-megabyte temporaries; without this
    every one triggers mmap/munmap plus kernel page zeroing.  Results are
    unaffected; non-glibc platforms are silently skipped.
    """
    global _ALLOCATOR_TUNED
    if _ALLOCATOR_TUNED:
        return
    _ALLOCATOR_TUNED = True
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c") or "libc.so.6")
        m_trim, m_mmap = -1, -3
        libc.mallopt(m_mmap, 1 << 30)
        libc.mallopt(m_trim, 1 << 30)
    except (OSError, AttributeError):
        pass


@dataclass
class StepController:
    """Time-step policy: CFL-based, or an explicit dt = c h^q law."""

    end_time: float
    cfl: float | None = None
    dt_law: tuple | None = None       # (c, q): dt = c * h^q with h = min cell scale
    time: float = 0.0

    def cfl_for(self, degree):
        return self.cfl if self.cfl is not None else CFL_DEFAULTS[degree]


def compute_dt(field: ModalField, controller: StepController, alpha: float):
    """Stable step from the CFL rule (or dt law), clipped to land on T."""
    mesh = field.space.mesh
    remaining = controller.end_time - controller.time
    if remaining <= 0:
        return 0.0
    if controller.dt_law is not None:
        c, q = controller.dt_law
        dt = c * float(np.min(mesh.length_scales())) ** q
    elif alpha <= 0:
        dt = remaining
    else:
        scale = float(np.min(mesh.length_scales()))
        dt = controller.cfl_for(field.space.degree) * scale / alpha
    return min(dt, remaining)


def ssp_rk3_step(u, dt, rhs, post_stage=None, t=0.0):
    """One step of the three-stage third-order SSP scheme.

    ``u`` is any ndarray; ``rhs(u, t)`` its time derivative; ``post_stage``
    (if given) may modify each stage state in place, which is where the
    limiter pass runs.
    """
    u1 = rhs(u, t)
    u1 *= dt
    u1 += u
    if post_stage is not None:
        post_stage(u1, 0)
    u2 = rhs(u1, t + dt)
    u2 *= dt
    u2 += u1
    u2 *= 0.25
    u2 += 0.75 * u
    if post_stage is not None:
        post_stage(u2, 1)
    un = rhs(u2, t + 0.5 * dt)
    un *= dt
    un += u2
    un *= 2.0 / 3.0
    un += u / 3.0
    if post_stage is not None:
        post_stage(un, 2)
    return un


@dataclass
class RunStats:
    steps: int = 0
    stages: int = 0
    time: float = 0.0
    min_density: float = np.inf
    min_pressure: float = np.inf
    slope_limited_ever: int = 0
    non_full_stages: int = 0
    last_report: LimiterReport | None = None
    decision_history: list = dc_field(default_factory=list)


def march(space: DGSpace, field: ModalField, op: SemiDiscreteOperator,
          packed, limiter_cfg: LimiterConfig, controller: StepController,
          on_step=None, record_decisions=False, stage_hook=None,
          max_steps=10_000_000) -> RunStats:
    """Advance to the controller's end time, limiting after every stage.

    ``on_step(field, t, stats)`` fires after each completed step;
    ``stage_hook(data)`` runs after each stage's limiter pass (used by the
    forward-step corner fix).  The initial field is assumed limited.
    """
    _tune_allocator()
    stats = RunStats()
    physics = op.physics

    def post_stage(data, stage_idx):
        f = ModalField(space, data)
        rep = apply_limiter_pass(space, f, physics, packed, limiter_cfg)
        if stage_hook is not None:
            stage_hook(data)
        stats.stages += 1
        stats.min_density = min(stats.min_density, rep.min_density)
        stats.min_pressure = min(stats.min_pressure, rep.min_pressure)
        n_slope = int(np.sum(rep.decisions == -1))
        stats.slope_limited_ever += n_slope
        stats.non_full_stages += int(np.sum(rep.decisions != space.degree))
        stats.last_report = rep
        if record_decisions:
            stats.decision_history.append(rep.decisions.copy())

    while controller.time < controller.end_time - 1e-14 * max(1.0, controller.end_time):
        alpha = op.global_alpha(field.data)
        dt = compute_dt(field, controller, alpha)
        if dt <= 0:
            break
        t = controller.time
        field.data = ssp_rk3_step(field.data, dt, op.residual, post_stage, t)
        controller.time = t + dt
        stats.steps += 1
        stats.time = controller.time
        if on_step is not None:
            on_step(field, controller.time, stats)
        if stats.steps >= max_steps:
            raise RuntimeError(f"exceeded {max_steps} steps before reaching T")
    return stats
