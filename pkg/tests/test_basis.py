import numpy as np
import pytest
from hypothesis import given, strategies as st

from mrdg import mesh as M
from mrdg.basis import (DGSpace, MAX_DEGREE, BasisError, exact_cell_averages,
                        monomial_exponents, eval_monomials)


def spaces_for(kind, degree):
    if kind == "interval":
        mesh = M.interval_mesh(7, -1.0, 1.3, periodic=True)
    elif kind == "tri":
        mesh = M.generate_quasi_uniform_triangles(0.34, (0.0, 1.0, 0.0, 1.0))
    else:
        mesh = M.generate_structured_quads(3, 3, (0.0, 1.0, 0.0, 2.0))
    return DGSpace(mesh, degree)


@pytest.mark.parametrize("kind", ["interval", "tri", "quad"])
def test_orthonormality(kind):
    kmax = 6 if kind == "interval" else 3
    for k in range(kmax + 1):
        sp = spaces_for(kind, k)
        for g in sp.groups:
            gram = np.einsum("gqm,gqn,gq->gmn", g.phi, g.phi, g.wn)
            assert np.abs(gram - np.eye(sp.n_modes)).max() < 1e-12


def test_mode0_is_unit_constant():
    for kind in ("interval", "tri", "quad"):
        sp = spaces_for(kind, 2)
        for g in sp.groups:
            assert np.all(g.coeff[:, 0, 0] == 1.0)
            assert np.all(g.coeff[:, 0, 1:] == 0.0)


@pytest.mark.parametrize("kind", ["interval", "tri", "quad"])
def test_quadrature_exactness_volume(kind):
    # all monomials of total degree <= 2k integrate exactly
    kmax = 4 if kind == "interval" else 3
    for k in range(1, kmax + 1):
        sp = spaces_for(kind, k)
        mesh = sp.mesh
        expo, _ = monomial_exponents(mesh.dim, 2 * k)
        for g in sp.groups:
            vals = eval_monomials(expo, g.nodes)
            got = np.einsum("gqm,gq->gm", vals, g.w)
            for m, e in enumerate(expo):
                exact = _exact_poly_integral(mesh, g.ids, e)
                scale = np.abs(exact).max() + np.abs(got[:, m]).max() + 1e-30
                assert np.abs(got[:, m] - exact).max() < 1e-13 * scale


def _exact_poly_integral(mesh, ids, expo):
    """Monomial integral over each element by corner-based triangulation."""
    out = np.zeros(len(ids))
    for i, e in enumerate(ids):
        pts = mesh.element_vertices(e)
        if mesh.dim == 1:
            a, b = pts[0, 0], pts[1, 0]
            p = expo[0]
            out[i] = (b ** (p + 1) - a ** (p + 1)) / (p + 1)
            continue
        # split polygon into triangles and use a high-order reference rule
        from mrdg.basis import triangle_rule
        bary, w = triangle_rule(6)
        acc = 0.0
        for t in range(len(pts) - 2):
            tri = np.array([pts[0], pts[t + 1], pts[t + 2]])
            u, v = tri[1] - tri[0], tri[2] - tri[0]
            area = 0.5 * abs(u[0] * v[1] - u[1] * v[0])
            nodes = bary @ tri
            acc += area * np.sum(w * nodes[:, 0] ** expo[0]
                                 * nodes[:, 1] ** expo[1])
        out[i] = acc
    return out


def test_face_quadrature_exactness():
    # face rules integrate 1D polynomials of degree <= 2k+1 along each face
    for kind in ("tri", "quad"):
        for k in (1, 2, 3):
            sp = spaces_for(kind, k)
            mesh = sp.mesh
            a = mesh.vertices[mesh.face_verts[:, 0]]
            b = mesh.vertices[mesh.face_verts[:, 1]]
            for p in range(2 * k + 2):
                # integrate s^p with s the arc-length parameter in [0, 1]
                t = np.linalg.norm(sp.face_nodes - a[:, None, :], axis=2) \
                    / mesh.face_measure[:, None]
                got = np.sum(sp.face_w * t ** p, axis=1)
                exact = mesh.face_measure / (p + 1)
                assert np.abs(got - exact).max() < 1e-13 * exact.max()


def test_positive_weights():
    for kind in ("interval", "tri", "quad"):
        for k in range(0, 4):
            sp = spaces_for(kind, k)
            for g in sp.groups:
                assert np.all(g.w > 0)
                assert np.allclose(g.w.sum(axis=1), sp.mesh.measures[g.ids],
                                   rtol=1e-13)


def test_evaluate_constant_mode():
    sp = spaces_for("tri", 2)
    f = sp.zeros(1)
    f.data[:, 0, 0] = 3.25
    pts = sp.mesh.centroids[4] + np.array([[0.0, 0.0], [0.01, -0.02]])
    vals = sp.evaluate(f, 4, pts)
    assert np.abs(vals - 3.25).max() < 1e-14


def test_evaluate_linear_1d_center():
    mesh = M.interval_mesh(1, 0.0, 1.0, periodic=False)
    sp = DGSpace(mesh, 1)
    f = sp.l2_project(lambda x: x[..., :1])
    assert sp.evaluate(f, 0, [0.5])[0] == pytest.approx(0.5, abs=1e-14)


def test_quadrature_roundtrip_oracle(rng):
    # value at quadrature nodes integrates back to the coefficients
    sp = spaces_for("quad", 2)
    f = sp.zeros(1)
    f.data[:, 0, :] = rng.normal(size=f.data[:, 0, :].shape)
    for g in sp.groups:
        vals = np.einsum("gqm,gm->gq", g.phi, f.data[g.ids, 0])
        back = np.einsum("gq,gqm,gq->gm", vals, g.phi, g.wn)
        assert np.abs(back - f.data[g.ids, 0]).max() < 1e-12


def test_project_constant():
    mesh = M.interval_mesh(20, -1.0, 1.0, periodic=True)
    sp = DGSpace(mesh, 2)
    f = sp.l2_project(lambda x: np.full(x.shape[:-1] + (1,), 1.4))
    assert np.abs(f.data[:, 0, 0] - 1.4).max() < 1e-14
    assert np.abs(f.data[:, 0, 1:]).max() < 1e-14


def test_projection_refinement_order():
    # max pointwise error of the k=2 projection of sin(pi x) decays as h^3
    errs = []
    for n in (20, 40, 80):
        mesh = M.interval_mesh(n, -1.0, 1.0, periodic=True)
        sp = DGSpace(mesh, 2)
        f = sp.l2_project(lambda x: np.sin(np.pi * x[..., :1]))
        worst = 0.0
        g = sp.groups[0]
        xs = np.linspace(-0.5, 0.5, 9)
        for e in range(0, mesh.n_elements, 3):
            pts = (mesh.centroids[e, 0] + xs * mesh.measures[e])[:, None]
            vals = sp.evaluate(f, e, pts)[:, 0]
            worst = max(worst, np.abs(vals - np.sin(np.pi * pts[:, 0])).max())
        errs.append(worst)
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert orders[-1] == pytest.approx(3.0, abs=0.4)


def test_projection_reproduces_linear_on_triangle():
    sp = spaces_for("tri", 1)
    f = sp.l2_project(lambda x: (2 * x[..., 0] + 3 * x[..., 1])[..., None])
    pts = sp.mesh.centroids[3] + np.array([[0.0, 0.0], [0.02, 0.01]])
    vals = sp.evaluate(f, 3, pts)[:, 0]
    exact = 2 * pts[:, 0] + 3 * pts[:, 1]
    assert np.abs(vals - exact).max() < 1e-12


def test_kth_derivative_sum_hand_values():
    mesh = M.generate_quasi_uniform_triangles(0.5, (0.0, 1.0, 0.0, 1.0))
    sp1 = DGSpace(mesh, 1)
    f = sp1.l2_project(lambda x: (2 * x[..., 0] + 3 * x[..., 1])[..., None])
    assert sp1.kth_derivative_sum(f, 0, 1)[0] == pytest.approx(5.0, abs=1e-12)

    sp2 = DGSpace(mesh, 2)
    fxy = sp2.l2_project(lambda x: (x[..., 0] * x[..., 1])[..., None])
    assert sp2.kth_derivative_sum(fxy, 2, 2)[0] == pytest.approx(1.0, abs=1e-12)

    m1 = M.interval_mesh(20, -1.0, 1.0, periodic=True)
    s2 = DGSpace(m1, 2)
    xc = m1.centroids[4, 0]
    fq = s2.l2_project(lambda x: (3 * (x[..., 0] - xc) ** 2)[..., None])
    assert s2.kth_derivative_sum(fq, 4, 2)[0] == pytest.approx(3.0, abs=1e-12)


@given(lam=st.floats(min_value=-1e6, max_value=1e6).filter(lambda v: v != 0))
def test_derivative_sum_absolutely_homogeneous(lam):
    mesh = M.generate_structured_quads(3, 3, (0.0, 1.0, 0.0, 1.0))
    sp = DGSpace(mesh, 2)
    base = sp.l2_project(lambda x: (np.sin(x[..., 0]) + x[..., 1] ** 2)[..., None])
    scaled = base.copy()
    scaled.data *= lam
    a = sp.kth_derivative_sum(base, 4, 2)[0]
    b = sp.kth_derivative_sum(scaled, 4, 2)[0]
    assert b == pytest.approx(abs(lam) * a, rel=1e-12)


def test_truncate_to_degree():
    sp = spaces_for("tri", 2)
    f = sp.l2_project(lambda x: np.sin(x[..., :1] + x[..., 1:2]))
    t1 = sp.truncate_to_degree(f.data, 1)
    assert np.all(t1[:, :, sp.mode_degrees > 1] == 0.0)
    assert np.array_equal(t1[:, :, sp.mode_degrees <= 1],
                          f.data[:, :, sp.mode_degrees <= 1])
    # idempotence and bitwise mean preservation
    t1b = sp.truncate_to_degree(t1, 1)
    assert np.array_equal(t1, t1b)
    t0 = sp.truncate_to_degree(f.data, 0)
    assert np.array_equal(t0[:, :, 0], f.data[:, :, 0])
    vals = sp.evaluate(
        type(f)(sp, t0), 2,
        sp.mesh.centroids[2] + np.array([[0.01, 0.0], [0.0, 0.015]]))
    assert np.abs(vals - t0[2, 0, 0]).max() < 1e-14


def test_degree_limits():
    mesh1 = M.interval_mesh(4, 0.0, 1.0)
    with pytest.raises(BasisError):
        DGSpace(mesh1, 7)
    mesh2 = M.generate_structured_quads(2, 2, (0.0, 1.0, 0.0, 1.0))
    with pytest.raises(BasisError):
        DGSpace(mesh2, 4)


def test_exact_cell_averages_sine():
    mesh = M.interval_mesh(20, -1.0, 1.0, periodic=True)
    av = exact_cell_averages(mesh, lambda x: np.sin(np.pi * x[..., :1]))[:, 0]
    h = 0.1
    xc = mesh.centroids[:, 0]
    truth = (np.cos(np.pi * (xc - h / 2)) - np.cos(np.pi * (xc + h / 2))) / (np.pi * h)
    assert np.abs(av - truth).max() < 1e-13
