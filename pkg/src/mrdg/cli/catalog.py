"""Preconfigured benchmark problems with their initial and boundary data.

Each entry carries the physics, the initial condition as a vectorized
function of points, boundary conditions per mesh tag, a mesh builder and
the standard final time.  1D domains are periodic where the problem says
so; the 2D cases tag boundaries geometrically.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .. import mesh as meshmod
from ..dg_core import dirichlet, moving_shock, nonreflective, reflective
from ..physics import Euler, LinearAdvection
from ..verify import (BURGERS_BREAK_TIME, exact_advection, exact_burgers_euler,
                      exact_riemann)

SQRT3 = np.sqrt(3.0)


@dataclass
class ProblemSpec:
    name: str
    dim: int
    make_physics: object
    initial: object                     # points (n, D) -> states (n, M)
    end_time: float
    mesh_builder: object                # (kind, nx, ny, edge, n) -> Mesh
    boundary: object = None             # physics -> {tag: BoundaryCondition}
    default_n: int = 200
    default_mesh: dict = dc_field(default_factory=dict)
    exact: object = None                # t -> (points -> states) or None
    bounds: tuple | None = None         # initial-data bounds of the scalar
    corner_fix: dict | None = None
    description: str = ""


def _interval_builder(a, b, periodic, tags=("left", "right")):
    def build(kind=None, nx=None, ny=None, edge=None, n=None):
        return meshmod.interval_mesh(int(n), a, b, periodic=periodic, tags=tags)
    return build


# -- 1D advection ------------------------------------------------------------


def _sine_ic(x):
    return np.sin(np.pi * x[..., :1])


def jiang_shu_profile(x):
    """Gaussians, square wave, sharp triangle and half ellipse on [-1, 1]."""
    x = np.asarray(x, dtype=float)
    z, delta, alpha, a = -0.7, 0.005, 10.0, 0.5
    beta = np.log(2.0) / (36.0 * delta ** 2)

    def G(y, c):
        return np.exp(-beta * (y - c) ** 2)

    def F(y, c):
        return np.sqrt(np.maximum(1.0 - alpha ** 2 * (y - c) ** 2, 0.0))

    u = np.zeros_like(x)
    m = (x >= -0.8) & (x <= -0.6)
    u[m] = (G(x[m], z - delta) + G(x[m], z + delta) + 4 * G(x[m], z)) / 6.0
    m = (x >= -0.4) & (x <= -0.2)
    u[m] = 1.0
    m = (x >= 0.0) & (x <= 0.2)
    u[m] = 1.0 - np.abs(10.0 * (x[m] - 0.1))
    m = (x >= 0.4) & (x <= 0.6)
    u[m] = (F(x[m], a - delta) + F(x[m], a + delta) + 4 * F(x[m], a)) / 6.0
    return u


def _jiangshu_ic(x):
    return jiang_shu_profile(x[..., 0])[..., None]


# -- 1D Euler ----------------------------------------------------------------


def _euler_burgers_ic(x):
    ph = Euler(dim=1, gamma=3.0)
    rho = 1.0 + 0.2 * np.sin(np.pi * x[..., 0])
    return ph.conservative(rho, np.sqrt(3.0) * rho, rho ** 3.0)


def _riemann_ic(left, right, x0, gamma):
    ph = Euler(dim=1, gamma=gamma)

    def ic(x):
        is_left = x[..., 0] < x0
        rho = np.where(is_left, left[0], right[0])
        u = np.where(is_left, left[1], right[1])
        p = np.where(is_left, left[2], right[2])
        return ph.conservative(rho, u, p)

    return ic


def _shu_osher_ic(x):
    ph = Euler(dim=1)
    left = x[..., 0] < -4.0
    rho = np.where(left, 27.0 / 7.0, 1.0 + 0.2 * np.sin(5.0 * np.pi * x[..., 0]))
    u = np.where(left, 4.0 * np.sqrt(35.0) / 9.0, 0.0)
    p = np.where(left, 31.0 / 3.0, 1.0)
    return ph.conservative(rho, u, p)


def _blast_ic(x):
    ph = Euler(dim=1)
    xx = x[..., 0]
    p = np.where(xx < 0.1, 1000.0, np.where(xx < 0.9, 0.01, 100.0))
    return ph.conservative(np.ones_like(xx), np.zeros_like(xx), p)


# -- 2D Euler ----------------------------------------------------------------

DMR_PRE = (1.4, 0.0, 0.0, 1.0)
DMR_POST_INCLINED = (8.0, 8.25 * SQRT3 / 2.0, -8.25 * 0.5, 116.5)
DMR_POST_NORMAL = (8.0, 8.25, 0.0, 116.5)
STEP_INFLOW = (1.4, 3.0, 0.0, 1.0)


def _prim2cons(ph, prim):
    rho, u, v, p = prim
    return ph.conservative(rho, [u, v], p)


def _dmr_inclined_ic(x):
    ph = Euler(dim=2)
    behind = x[..., 0] < 1.0 / 6.0 + x[..., 1] / SQRT3
    post = _prim2cons(ph, DMR_POST_INCLINED)
    pre = _prim2cons(ph, DMR_PRE)
    return np.where(behind[..., None], post, pre)


def _dmr_standard_ic(x):
    ph = Euler(dim=2)
    behind = x[..., 0] < 0.05
    return np.where(behind[..., None], _prim2cons(ph, DMR_POST_NORMAL),
                    _prim2cons(ph, DMR_PRE))


def _step_ic(x):
    ph = Euler(dim=2)
    return np.broadcast_to(_prim2cons(ph, STEP_INFLOW),
                           x.shape[:-1] + (4,)).copy()


def _rect_builder(rect, default_nx, default_ny, tagger=None):
    def build(kind="quad", nx=None, ny=None, edge=None, n=None):
        nx = int(nx or default_nx)
        ny = int(ny or default_ny)
        if kind == "tri":
            h = edge if edge else (rect[1] - rect[0]) / nx
            return meshmod.generate_quasi_uniform_triangles(h, rect, tagger=tagger)
        return meshmod.generate_structured_quads(nx, ny, rect, tagger=tagger)
    return build


def _dmr_inclined_tagger(mid, normal):
    if abs(mid[0]) < 1e-9 and normal[0] < -0.5:
        return "left"
    if abs(mid[0] - 4.0) < 1e-9 and normal[0] > 0.5:
        return "right"
    if abs(mid[1] - 1.0) < 1e-9:
        return "top"
    if mid[0] <= 1.0 / 6.0:
        return "bottom_out"
    return "wall"


def _dmr_inclined_bcs(ph):
    post = _prim2cons(ph, DMR_POST_INCLINED)
    pre = _prim2cons(ph, DMR_PRE)
    # the bottom left of the shock foot stays exactly post-shock for all
    # t <= 0.2 (the post-shock flow is supersonic, nothing travels left),
    # so imposing the post-shock state is the transparent condition there;
    # plain zero-order extrapolation destabilizes the wall/outflow corner
    return {
        "left": dirichlet(post),
        "right": nonreflective(),
        "bottom_out": dirichlet(post),
        "wall": reflective(),
        "top": moving_shock(pre, post, [1.0 / 6.0, 0.0],
                            [SQRT3 / 2.0, -0.5], 10.0),
    }


def _dmr_standard_blocks(nx, ny):
    def bottom(x):
        return np.where(x <= 0.1, 0.0, (x - 0.1) / SQRT3)
    return [meshmod.Block(0.0, 2.5, bottom, 2.0, nx, ny, breakpoints=(0.1,))]


def _dmr_standard_tagger(mid, normal):
    if abs(mid[0]) < 1e-9 and normal[0] < -0.5:
        return "left"
    if abs(mid[0] - 2.5) < 1e-9 and normal[0] > 0.5:
        return "right"
    if abs(mid[1] - 2.0) < 1e-9:
        return "top"
    return "wall"


def _dmr_standard_builder(kind="quad", nx=None, ny=None, edge=None, n=None):
    nx = int(nx or 600)
    ny = int(ny or 480)
    if edge:
        nx = max(2, int(round(2.5 / edge)))
        ny = max(2, int(round(2.0 / edge)))
    blocks = _dmr_standard_blocks(nx, ny)
    if kind == "tri":
        return meshmod.generate_quasi_uniform_triangles(
            2.5 / nx, blocks, tagger=_dmr_standard_tagger)
    return meshmod.generate_structured_quads(nx, ny, blocks,
                                             tagger=_dmr_standard_tagger)


def _dmr_standard_bcs(ph):
    post = _prim2cons(ph, DMR_POST_NORMAL)
    pre = _prim2cons(ph, DMR_PRE)
    return {
        "left": dirichlet(post),
        "right": nonreflective(),
        "wall": reflective(),
        "top": moving_shock(pre, post, [0.05, 0.0], [1.0, 0.0], 10.0),
    }


CORNER_TOP_Y = 1.0 / SQRT3


def _corner_blocks(edge):
    nx1 = max(2, int(round(1.2 / edge)))
    ny1 = max(2, int(round((2.0 - CORNER_TOP_Y) / edge)))
    nx2 = max(2, int(round(1.6 / edge)))
    ny3 = max(2, int(round(CORNER_TOP_Y / edge)))

    def ramp(x):
        return np.where(x <= 0.2, 0.0, (x - 0.2) / SQRT3)

    return [
        meshmod.Block(0.0, 1.2, ramp, 2.0, nx1, ny1, breakpoints=(0.2,)),
        meshmod.Block(1.2, 2.8, CORNER_TOP_Y, 2.0, nx2, ny1),
        meshmod.Block(1.2, 2.8, 0.0, CORNER_TOP_Y, nx2, ny3),
    ]


def _corner_tagger(mid, normal):
    if abs(mid[0]) < 1e-9 and normal[0] < -0.5:
        return "left"
    if abs(mid[0] - 2.8) < 1e-9 and normal[0] > 0.5:
        return "right"
    return "wall"


def _corner_builder(kind="quad", nx=None, ny=None, edge=None, n=None):
    h = edge or 1.0 / 160.0
    blocks = _corner_blocks(h)
    if kind == "tri":
        return meshmod.generate_quasi_uniform_triangles(h, blocks,
                                                        tagger=_corner_tagger)
    return meshmod.generate_structured_quads(0, 0, blocks, tagger=_corner_tagger)


def _corner_bcs(ph):
    post = _prim2cons(ph, DMR_POST_INCLINED)
    return {
        "left": dirichlet(post),
        "right": nonreflective(),
        "wall": reflective(),
    }


def _step_blocks(edge):
    nxl = max(2, int(round(0.6 / edge)))
    nyb = max(1, int(round(0.2 / edge)))
    nyt = max(2, int(round(0.8 / edge)))
    nxr = max(2, int(round(2.4 / edge)))
    return [
        meshmod.Block(0.0, 0.6, 0.0, 0.2, nxl, nyb),
        meshmod.Block(0.0, 0.6, 0.2, 1.0, nxl, nyt),
        meshmod.Block(0.6, 3.0, 0.2, 1.0, nxr, nyt),
    ]


def _step_tagger(mid, normal):
    if abs(mid[0]) < 1e-9 and normal[0] < -0.5:
        return "left"
    if abs(mid[0] - 3.0) < 1e-9 and normal[0] > 0.5:
        return "right"
    return "wall"


def _step_builder(kind="quad", nx=None, ny=None, edge=None, n=None):
    h = edge or 1.0 / 160.0
    blocks = _step_blocks(h)
    if kind == "tri":
        return meshmod.generate_quasi_uniform_triangles(h, blocks,
                                                        tagger=_step_tagger)
    return meshmod.generate_structured_quads(0, 0, blocks, tagger=_step_tagger)


def _step_bcs(ph):
    return {
        "left": dirichlet(_prim2cons(ph, STEP_INFLOW)),
        "right": nonreflective(),
        "wall": reflective(),
    }


# ---------------------------------------------------------------------------


def _build_catalog():
    problems = {}

    def add(p):
        problems[p.name] = p

    sine_exact = lambda t: (lambda pts: exact_advection(
        lambda y: np.sin(np.pi * y), t, (-1.0, 1.0))(pts[..., 0])[..., None])
    add(ProblemSpec(
        name="advection_sine", dim=1,
        make_physics=lambda: LinearAdvection((1.0,)),
        initial=_sine_ic, end_time=2.0,
        mesh_builder=_interval_builder(-1.0, 1.0, periodic=True),
        default_n=20, exact=sine_exact, bounds=(-1.0, 1.0),
        description="smooth sine transported one period"))

    js_exact = lambda t: (lambda pts: exact_advection(
        jiang_shu_profile, t, (-1.0, 1.0))(pts[..., 0])[..., None])
    add(ProblemSpec(
        name="advection_jiangshu", dim=1,
        make_physics=lambda: LinearAdvection((1.0,)),
        initial=_jiangshu_ic, end_time=20.0,
        mesh_builder=_interval_builder(-1.0, 1.0, periodic=True),
        default_n=200, exact=js_exact, bounds=(0.0, 1.0),
        description="Gaussians, square, triangle and half-ellipse profile"))

    burgers_exact = lambda t: (lambda pts: Euler(dim=1, gamma=3.0).conservative(
        *exact_burgers_euler(pts[..., 0], t)))
    add(ProblemSpec(
        name="euler_burgers", dim=1,
        make_physics=lambda: Euler(dim=1, gamma=3.0),
        initial=_euler_burgers_ic, end_time=0.5,
        mesh_builder=_interval_builder(-1.0, 1.0, periodic=True),
        default_n=100,
        exact=lambda t: burgers_exact(t) if t < BURGERS_BREAK_TIME else None,
        description="smooth gamma=3 flow driven by a scalar Burgers solution"))

    lax_left = (0.445, 0.698, 3.528)
    lax_right = (0.5, 0.0, 0.571)

    def lax_exact(t):
        if t <= 0:
            return None

        def fn(pts):
            rho, u, p = exact_riemann(lax_left, lax_right, 1.4, pts[..., 0] / t)
            return Euler(dim=1).conservative(rho, u, p)
        return fn

    add(ProblemSpec(
        name="lax", dim=1, make_physics=lambda: Euler(dim=1),
        initial=_riemann_ic(lax_left, lax_right, 0.0, 1.4), end_time=1.3,
        mesh_builder=_interval_builder(-5.0, 5.0, periodic=False),
        boundary=lambda ph: {"left": nonreflective(), "right": nonreflective()},
        default_n=200, exact=lax_exact,
        description="Lax shock tube"))

    add(ProblemSpec(
        name="double_rarefaction", dim=1, make_physics=lambda: Euler(dim=1),
        initial=_riemann_ic((7.0, -1.0, 0.2), (7.0, 1.0, 0.2), 0.0, 1.4),
        end_time=0.6,
        mesh_builder=_interval_builder(-1.0, 1.0, periodic=False),
        boundary=lambda ph: {"left": nonreflective(), "right": nonreflective()},
        default_n=200,
        description="near-vacuum double rarefaction"))

    add(ProblemSpec(
        name="leblanc", dim=1, make_physics=lambda: Euler(dim=1, gamma=5.0 / 3.0),
        initial=_riemann_ic((1.0, 0.0, 0.2 / 3.0),
                            (1e-3, 0.0, (2.0 / 3.0) * 1e-10), 0.0, 5.0 / 3.0),
        end_time=6.0,
        mesh_builder=_interval_builder(-3.0, 6.0, periodic=False),
        boundary=lambda ph: {"left": nonreflective(), "right": nonreflective()},
        default_n=600,
        description="LeBlanc extreme shock tube, gamma = 5/3"))

    add(ProblemSpec(
        name="shu_osher", dim=1, make_physics=lambda: Euler(dim=1),
        initial=_shu_osher_ic, end_time=1.8,
        mesh_builder=_interval_builder(-5.0, 5.0, periodic=False),
        boundary=lambda ph: {
            "left": dirichlet(ph.conservative(27.0 / 7.0,
                                              4.0 * np.sqrt(35.0) / 9.0,
                                              31.0 / 3.0)),
            "right": nonreflective()},
        default_n=200,
        description="shock / entropy-wave interaction"))

    add(ProblemSpec(
        name="blast_waves", dim=1, make_physics=lambda: Euler(dim=1),
        initial=_blast_ic, end_time=0.038,
        mesh_builder=_interval_builder(0.0, 1.0, periodic=False),
        boundary=lambda ph: {"left": reflective(), "right": reflective()},
        default_n=250,
        description="interacting blast waves between reflecting walls"))

    add(ProblemSpec(
        name="dmr_inclined", dim=2, make_physics=lambda: Euler(dim=2),
        initial=_dmr_inclined_ic, end_time=0.2,
        mesh_builder=_rect_builder((0.0, 4.0, 0.0, 1.0), 960, 240,
                                   tagger=_dmr_inclined_tagger),
        boundary=_dmr_inclined_bcs,
        default_mesh={"kind": "quad", "nx": 960, "ny": 240},
        description="double Mach reflection, 60-degree oblique shock frame"))

    add(ProblemSpec(
        name="dmr_standard", dim=2, make_physics=lambda: Euler(dim=2),
        initial=_dmr_standard_ic, end_time=0.2,
        mesh_builder=_dmr_standard_builder,
        boundary=_dmr_standard_bcs,
        default_mesh={"kind": "quad", "nx": 600, "ny": 480},
        description="double Mach reflection over a 30-degree wedge"))

    add(ProblemSpec(
        name="corner_diffraction", dim=2, make_physics=lambda: Euler(dim=2),
        initial=_dmr_inclined_ic, end_time=0.24,
        mesh_builder=_corner_builder,
        boundary=_corner_bcs,
        default_mesh={"kind": "quad", "edge": 1.0 / 160.0},
        description="Mach 10 shock diffracting around a sharp corner"))

    add(ProblemSpec(
        name="forward_step", dim=2, make_physics=lambda: Euler(dim=2),
        initial=_step_ic, end_time=4.0,
        mesh_builder=_step_builder,
        boundary=_step_bcs,
        default_mesh={"kind": "quad", "edge": 1.0 / 160.0},
        corner_fix={"corner": (0.6, 0.2), "upstream": (0.59, 0.19)},
        description="Mach 3 flow over a forward-facing step"))

    return problems


_CATALOG = _build_catalog()


def catalog():
    """Names of the preconfigured benchmark problems."""
    return sorted(_CATALOG)


def get_problem(name) -> ProblemSpec:
    if name not in _CATALOG:
        raise KeyError(f"unknown problem {name!r}; see `catalog`")
    return _CATALOG[name]
