import numpy as np
import pytest

from mrdg import mesh as M
from mrdg.basis import DGSpace, ModalField
from mrdg.dg_core import (SemiDiscreteOperator, assemble_residual, dirichlet,
                          ghost_state, moving_shock, nonreflective, reflective)
from mrdg.physics import AdmissibilityError, Euler, LinearAdvection

SQRT3 = np.sqrt(3.0)


def make_free_stream(mesh, state):
    sp = DGSpace(mesh, 2)
    f = sp.l2_project(lambda x: np.broadcast_to(state, x.shape[:-1] + (len(state),)))
    return sp, f


def residual_scale(op, field, state):
    alpha = op.global_alpha(field.data)
    return alpha * np.abs(state).max() / field.space.mesh.length_scales().min()


@pytest.mark.parametrize("kind", ["interval", "tri", "quad"])
def test_free_stream_preservation(kind):
    if kind == "interval":
        mesh = M.interval_mesh(20, -1.0, 1.0, periodic=True)
        ph = Euler(dim=1)
        state = ph.conservative(1.3, [0.4], 2.0)
        bcs = {}
    else:
        if kind == "tri":
            mesh = M.generate_quasi_uniform_triangles(0.25, (0.0, 1.5, 0.0, 1.0))
        else:
            mesh = M.generate_structured_quads(6, 4, (0.0, 1.5, 0.0, 1.0))
        ph = Euler(dim=2)
        state = ph.conservative(1.3, [0.4, -0.2], 2.0)
        bcs = {t: dirichlet(state) for t in mesh.tag_names}
    sp = DGSpace(mesh, 2)
    fld = sp.l2_project(lambda x: np.broadcast_to(state, x.shape[:-1] + (len(state),)))
    op = SemiDiscreteOperator(sp, ph, bcs)
    res = op.residual(fld.data, 0.0)
    assert np.abs(res).max() < 1e-12 * residual_scale(op, fld, state)


def test_polynomial_advection_residual_oracle():
    # residual of the projected degree-k polynomial equals the projection
    # of its exact spatial derivative away from the periodic wrap
    mesh = M.interval_mesh(20, -1.0, 1.0, periodic=True)
    sp = DGSpace(mesh, 2)
    ph = LinearAdvection((1.0,))
    op = SemiDiscreteOperator(sp, ph, {})
    fld = sp.l2_project(lambda x: x[..., :1] ** 2)
    res = op.residual(fld.data, 0.0)
    want = sp.l2_project(lambda x: -2.0 * x[..., :1])
    err = np.abs(res[1:-1] - want.data[1:-1]).max()
    assert err < 1e-12


def test_conservation_telescoping():
    mesh = M.interval_mesh(40, -1.0, 1.0, periodic=True)
    sp = DGSpace(mesh, 2)
    ph = LinearAdvection((1.0,))
    op = SemiDiscreteOperator(sp, ph, {})
    fld = sp.l2_project(lambda x: np.sin(np.pi * x[..., :1]) + 0.3)
    res = op.residual(fld.data, 0.0)
    total = np.sum(res[:, 0, 0] * mesh.measures)
    assert abs(total) < 1e-12


def test_residual_linearity_advection():
    mesh = M.interval_mesh(25, -1.0, 1.0, periodic=True)
    sp = DGSpace(mesh, 2)
    op = SemiDiscreteOperator(sp, LinearAdvection((1.0,)), {})
    f1 = sp.l2_project(lambda x: np.sin(np.pi * x[..., :1]))
    lam, sig = 3.5, 0.7
    f2 = ModalField(sp, lam * f1.data.copy())
    f2.data[:, 0, 0] += sig
    r1 = op.residual(f1.data, 0.0)
    r2 = op.residual(f2.data, 0.0)
    scale = np.abs(r1).max()
    assert np.abs(r2 - lam * r1).max() < 1e-11 * max(scale, 1.0)


def test_reflective_ghost_mirrors_normal_velocity():
    ph = Euler(dim=2)
    U = ph.conservative(1.0, [1.0, 2.0], 1.0)[None, None, :]
    g = ghost_state(reflective(), U, np.zeros((1, 1, 2)),
                    np.array([[0.0, 1.0]]), 0.0, 2)
    rho, vel, p = ph.primitive(g[0, 0])
    assert rho == pytest.approx(1.0)
    assert vel[0] == pytest.approx(1.0)
    assert vel[1] == pytest.approx(-2.0)
    assert p == pytest.approx(1.0, rel=1e-12)


def test_nonreflective_ghost_is_identity():
    ph = Euler(dim=1)
    U = ph.conservative(0.7, [0.1], 0.5)[None, None, :]
    g = ghost_state(nonreflective(), U, np.zeros((1, 1, 1)),
                    np.array([[1.0]]), 0.0, 1)
    assert np.array_equal(g, U)


def test_moving_shock_front_position():
    # oblique Mach 10 front: x on y=1 at time t sits at 1/6 + (1 + 20 t)/sqrt(3)
    ph = Euler(dim=2)
    pre = ph.conservative(1.4, [0.0, 0.0], 1.0)
    post = ph.conservative(8.0, [8.25 * SQRT3 / 2, -8.25 / 2], 116.5)
    bc = moving_shock(pre, post, [1.0 / 6.0, 0.0], [SQRT3 / 2, -0.5], 10.0)
    t = 0.2
    xs = 1.0 / 6.0 + (1.0 + 20.0 * t) / SQRT3
    pts = np.array([[[xs - 1e-6, 1.0]], [[xs + 1e-6, 1.0]]])
    interior = np.broadcast_to(pre, (2, 1, 4))
    g = ghost_state(bc, interior, pts, np.array([[0.0, 1.0], [0.0, 1.0]]), t, 2)
    assert np.allclose(g[0, 0], post)
    assert np.allclose(g[1, 0], pre)


def test_moving_shock_ghost_time_dependence():
    ph = Euler(dim=2)
    pre = ph.conservative(1.4, [0.0, 0.0], 1.0)
    post = ph.conservative(8.0, [8.25, 0.0], 116.5)
    bc = moving_shock(pre, post, [0.05, 0.0], [1.0, 0.0], 10.0)
    pts = np.array([[[1.0, 2.0]]])
    interior = np.broadcast_to(pre, (1, 1, 4))
    early = ghost_state(bc, interior, pts, np.array([[0.0, 1.0]]), 0.01, 2)
    late = ghost_state(bc, interior, pts, np.array([[0.0, 1.0]]), 0.2, 2)
    assert np.allclose(early[0, 0], pre)
    assert np.allclose(late[0, 0], post)


def test_inadmissible_quadrature_state_is_reported():
    mesh = M.interval_mesh(10, 0.0, 1.0, periodic=True)
    sp = DGSpace(mesh, 1)
    ph = Euler(dim=1)
    fld = sp.l2_project(lambda x: np.broadcast_to(
        ph.conservative(1.0, [0.0], 1.0), x.shape[:-1] + (3,)))
    # wreck one cell so a face node goes negative in density
    fld.data[4, 0, 1] = 50.0
    op = SemiDiscreteOperator(sp, ph, {})
    with pytest.raises(AdmissibilityError):
        op.residual(fld.data, 0.0)


def test_assemble_residual_helper_matches_operator():
    mesh = M.interval_mesh(12, 0.0, 1.0, periodic=True)
    sp = DGSpace(mesh, 2)
    ph = LinearAdvection((1.0,))
    fld = sp.l2_project(lambda x: np.cos(2 * np.pi * x[..., :1]))
    direct = assemble_residual(sp, fld, ph, {}, 0.0)
    op = SemiDiscreteOperator(sp, ph, {})
    assert np.array_equal(direct, op.residual(fld.data, 0.0))


def test_missing_boundary_condition_rejected():
    mesh = M.generate_structured_quads(3, 3, (0.0, 1.0, 0.0, 1.0))
    sp = DGSpace(mesh, 1)
    with pytest.raises(ValueError, match="boundary"):
        SemiDiscreteOperator(sp, Euler(dim=2), {"left": nonreflective()})
