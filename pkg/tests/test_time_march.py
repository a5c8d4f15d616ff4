import numpy as np
import pytest

from mrdg import mesh as M
from mrdg.basis import DGSpace
from mrdg.dg_core import SemiDiscreteOperator
from mrdg.limiter import LimiterConfig
from mrdg.mesh import build_indicator_stencils, pack_stencils
from mrdg.physics import LinearAdvection
from mrdg.time_march import (CFL_DEFAULTS, StepController, compute_dt, march,
                             ssp_rk3_step)


def advection_setup(n=40, k=2, end_time=2.0, dt_law=None, cfl=None):
    mesh = M.interval_mesh(n, -1.0, 1.0, periodic=True)
    sp = DGSpace(mesh, k)
    fld = sp.l2_project(lambda x: np.sin(np.pi * x[..., :1]))
    op = SemiDiscreteOperator(sp, LinearAdvection((1.0,)), {})
    packed = pack_stencils(mesh, build_indicator_stencils(mesh))
    ctl = StepController(end_time=end_time, cfl=cfl, dt_law=dt_law)
    return mesh, sp, fld, op, packed, ctl


def test_ssp_rk3_scalar_ode_hand_value():
    u1 = ssp_rk3_step(np.array(1.0), 0.1, lambda v, t: -v)
    assert float(u1) == pytest.approx(0.90483333333333333, abs=1e-15)


def test_ssp_rk3_constant_field_unchanged():
    mesh, sp, fld, op, packed, ctl = advection_setup()
    fld.data[:] = 0.0
    fld.data[:, 0, 0] = 2.0
    out = ssp_rk3_step(fld.data, 1e-3, op.residual)
    assert np.array_equal(out, fld.data)


def test_ssp_rk3_one_step_error_fourth_order():
    errs = []
    for dt in (0.1, 0.05):
        u = ssp_rk3_step(np.array(1.0), dt, lambda v, t: -v)
        errs.append(abs(float(u) - np.exp(-dt)))
    ratio = errs[0] / errs[1]
    assert ratio == pytest.approx(16.0, abs=1.0)


def test_compute_dt_cfl():
    mesh = M.interval_mesh(100, 0.0, 1.0, periodic=True)
    sp = DGSpace(mesh, 1)
    fld = sp.l2_project(lambda x: x[..., :1])
    ctl = StepController(end_time=10.0, cfl=0.3)
    assert compute_dt(fld, ctl, alpha=1.0) == pytest.approx(0.003, rel=1e-12)


def test_compute_dt_law_value():
    # dt = 0.25 h^{4/3} at h = 0.1
    mesh = M.interval_mesh(20, -1.0, 1.0, periodic=True)
    sp = DGSpace(mesh, 3)
    fld = sp.l2_project(lambda x: x[..., :1])
    ctl = StepController(end_time=10.0, dt_law=(0.25, 4.0 / 3.0))
    dt = compute_dt(fld, ctl, alpha=1.0)
    assert dt == pytest.approx(0.25 * 0.1 ** (4.0 / 3.0), rel=1e-12)
    assert dt == pytest.approx(0.0116040, rel=1e-4)


def test_compute_dt_lands_exactly_on_T():
    mesh = M.interval_mesh(10, 0.0, 1.0, periodic=True)
    sp = DGSpace(mesh, 1)
    fld = sp.l2_project(lambda x: x[..., :1])
    ctl = StepController(end_time=1.0, cfl=0.3)
    ctl.time = 1.0 - 1e-9
    assert compute_dt(fld, ctl, alpha=1.0) == pytest.approx(1e-9, rel=1e-6)


def test_compute_dt_zero_alpha():
    mesh = M.interval_mesh(10, 0.0, 1.0, periodic=True)
    sp = DGSpace(mesh, 1)
    fld = sp.zeros(1)
    ctl = StepController(end_time=0.5, cfl=0.3)
    assert compute_dt(fld, ctl, alpha=0.0) == 0.5


def test_cfl_defaults_table():
    assert [CFL_DEFAULTS[k] for k in range(1, 7)] == \
        [0.3, 0.15, 0.1, 0.06, 0.05, 0.04]


def test_periodic_advection_third_order():
    mesh, sp, fld, op, packed, ctl = advection_setup(n=40, k=2,
                                                     dt_law=(0.15, 1.0))
    stats = march(sp, fld, op, packed, LimiterConfig(scheme="mr"), ctl)
    cc = sp.cell_center_values(fld)[:, 0]
    err40 = np.abs(cc - np.sin(np.pi * mesh.centroids[:, 0])).max()
    mesh2, sp2, f2, op2, packed2, ctl2 = advection_setup(n=80, k=2,
                                                         dt_law=(0.15, 1.0))
    march(sp2, f2, op2, packed2, LimiterConfig(scheme="mr"), ctl2)
    cc2 = sp2.cell_center_values(f2)[:, 0]
    err80 = np.abs(cc2 - np.sin(np.pi * mesh2.centroids[:, 0])).max()
    assert np.log2(err40 / err80) == pytest.approx(3.0, abs=0.35)
    assert stats.time == pytest.approx(2.0, abs=1e-13)


def test_global_conservation_over_run():
    mesh, sp, fld, op, packed, ctl = advection_setup(n=50, k=2, end_time=0.8)
    total0 = float(np.sum(fld.data[:, 0, 0] * mesh.measures))
    march(sp, fld, op, packed, LimiterConfig(scheme="mr"), ctl)
    total1 = float(np.sum(fld.data[:, 0, 0] * mesh.measures))
    ref = max(abs(total0), np.abs(fld.data[:, 0, 0]).max() * mesh.measures.sum())
    assert abs(total1 - total0) <= 1e-11 * ref


def test_bitwise_reproducible_runs():
    outs = []
    for _ in range(2):
        mesh, sp, fld, op, packed, ctl = advection_setup(n=30, k=2,
                                                         end_time=0.5)
        march(sp, fld, op, packed, LimiterConfig(scheme="mr"), ctl)
        outs.append(fld.data.copy())
    assert np.array_equal(outs[0], outs[1])
