"""Shock-capturing limiters applied after every Runge-Kutta stage.

The multi-resolution (MR) limiter compares scaled derivative magnitudes of
the local polynomial, degree by degree from the top down, against a
baseline built from neighboring cell averages.  Degrees that exceed the
baseline are zeroed; if even the linear part fails, the cell is rebuilt
with a minmod slope in characteristic variables.  Decisions depend only on
frozen cell averages, so the pass is order-independent and exactly
invariant under u -> lambda*u + sigma.

KXRCF and FS troubled-cell indicators, the classical TVB detector and the
Zhang-Shu positivity limiter are provided for comparison runs; all share
the same slope reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels
from .basis import DGSpace, ModalField
from .mesh import (IndicatorStencil, PackedStencils, build_indicator_stencils,
                   pack_stencils)
from .physics import AdmissibilityError, Euler

SLOPE_LIMITED = -1


@dataclass
class MRConfig:
    """Threshold and variable selection for the multi-resolution limiter."""

    c_k: float = 3.0
    indicator_component: int = 0
    characteristic: str = "gradient"      # 'gradient' | 'componentwise'

    def __post_init__(self):
        if self.c_k <= 0:
            raise ValueError("c_k must be positive")


@dataclass
class LimiterConfig:
    scheme: str = "mr"                    # mr | kxrcf | fs | tvb | none
    mr: MRConfig = dc_field(default_factory=MRConfig)
    kxrcf_threshold: float = 1.0
    fs_threshold: float = 0.1
    tvb_m: float = 0.0
    positivity: bool = True
    positivity_eps: float = 1e-13


@dataclass
class LimiterDecision:
    """Per-cell outcome: retained degree (k..0) or SLOPE_LIMITED."""

    element: int
    outcome: int
    is0: float
    tested: list


@dataclass
class LimiterReport:
    decisions: np.ndarray                 # (n_e,) int8: retained degree or -1
    is0: np.ndarray | None = None
    tested: np.ndarray | None = None      # (n_e, k) IS^r actually tested, NaN else
    indicator: np.ndarray | None = None   # per-cell value for kxrcf/fs
    min_density: float = np.inf
    min_pressure: float = np.inf

    def cell(self, e) -> LimiterDecision:
        tested = [] if self.tested is None else \
            [v for v in self.tested[e][::-1] if np.isfinite(v)]
        is0 = np.nan if self.is0 is None else float(self.is0[e])
        return LimiterDecision(e, int(self.decisions[e]), is0, tested)


def minmod(*args):
    """Smallest-magnitude argument when all agree in sign, else zero."""
    a = np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in args])
    a = np.stack(a, axis=0)
    pos = np.all(a > 0, axis=0)
    neg = np.all(a < 0, axis=0)
    m = np.min(np.abs(a), axis=0)
    return np.where(pos, m, np.where(neg, -m, 0.0))


def _masked_minmod(cand, valid, axis):
    """minmod over ``axis`` with a validity mask; no candidates -> 0.

    Uses min/max only: if the masked minimum is positive all candidates are
    positive and it is also the smallest magnitude; symmetrically for the
    maximum; anything else (mixed signs, zeros, empty) yields 0.
    """
    lo = np.min(np.where(valid, cand, np.inf), axis=axis)
    hi = np.max(np.where(valid, cand, -np.inf), axis=axis)
    out = np.where(lo > 0, lo, np.where(hi < 0, hi, 0.0))
    return np.where(np.isfinite(out), out, 0.0)


# ---------------------------------------------------------------------------
# indicators


def baseline_indicator(stencil: IndicatorStencil, averages):
    """IS^0 of one cell: min over substencils of the max average jump."""
    averages = np.asarray(averages, dtype=float)
    q0 = averages[stencil.element]
    best = np.inf
    for members, dropped in zip(stencil.substencils, stencil.dropped):
        if dropped or not members:
            continue
        best = min(best, max(abs(q0 - averages[m]) for m in members))
    return best


def baseline_indicator_all(packed: PackedStencils, q):
    """Vectorized IS^0 for every cell from the packed stencils."""
    if _kernels.HAVE_NUMBA:
        return _kernels.baseline_is0(packed.members, packed.sub_valid,
                                     np.ascontiguousarray(q))
    qm = q[np.maximum(packed.members, 0)]
    diff = np.abs(q[:, None, None] - qm)
    diff = np.where(packed.members >= 0, diff, -np.inf)
    is_l = diff.max(axis=2)
    is_l = np.where(packed.sub_valid, is_l, np.inf)
    return is_l.min(axis=1)


def derivative_indicator(space: DGSpace, field: ModalField, element: int,
                         degree: int, component: int = 0):
    """Scaled derivative magnitude IS^r of the (already truncated) polynomial."""
    g = space.groups[space._elem_group[element]]
    pos = space._elem_pos[element]
    a = field.data[element, component] @ g.coeff[pos]
    return float(np.sum(np.abs(a[g.deg_slots[degree]])))


def _derivative_indicator_all(space, data, component, degree, cells=None):
    """IS^degree for every cell (or a subset) from the current coefficients."""
    if cells is None:
        cells = np.arange(len(data))
    if _kernels.HAVE_NUMBA:
        return _kernels.deriv_sum_range(
            data, space.coeff_all, component,
            int(space.deg_lo[degree]), int(space.deg_hi[degree]),
            np.asarray(cells, dtype=np.int64))
    out = np.empty(len(cells))
    gsel = space._elem_group[cells]
    for gi, g in enumerate(space.groups):
        m = gsel == gi
        if not np.any(m):
            continue
        pos = space._elem_pos[cells[m]]
        mats = g.coeff[np.ix_(pos, np.arange(space.n_modes), g.deg_slots[degree])]
        a = np.matmul(data[cells[m], component][:, None, :], mats)[:, 0, :]
        out[m] = np.sum(np.abs(a), axis=1)
    return out


# ---------------------------------------------------------------------------
# slope reconstruction


def _pair_candidates(space, avgs, cells, packed):
    """Linear slope candidates per cyclic neighbor pair of each cell.

    Returns (slopes (n, P, M, D), valid (n, P)).  The 2x2 centroid-offset
    system is solved per pair; collinear centroids drop the candidate.
    """
    M = avgs.shape[1]
    pn = packed.pair_nbrs[cells]
    n, P = pn.shape[:2]
    safe = np.maximum(pn, 0)
    db = avgs[safe] - avgs[cells][:, None, None, :]             # (n, P, 2, M)
    inv = packed.pair_inv[cells]
    good = packed.pair_good[cells]
    slopes = np.empty((n, P, M, 2))
    slopes[..., 0] = inv[..., 0, 0, None] * db[:, :, 0] \
        + inv[..., 0, 1, None] * db[:, :, 1]
    slopes[..., 1] = inv[..., 1, 0, None] * db[:, :, 0] \
        + inv[..., 1, 1, None] * db[:, :, 1]
    return slopes, good


def minmod_reconstruct(space, avgs, cells, packed, physics=None,
                       characteristic="gradient", pre_lin=None):
    """Minmod linear rebuild of the given cells from neighbor averages.

    Returns physical slopes (n, M, D).  For Euler the minmod acts on
    characteristic variables: per one-sided difference in 1D, in the
    density-gradient direction in 2D (componentwise fallback when the
    gradient is degenerate).
    """
    mesh = space.mesh
    D = mesh.dim
    M = avgs.shape[1]
    n = len(cells)
    if n == 0:
        return np.zeros((0, M, D))

    # exactly-flat neighborhoods (constant-region truncation-noise cells)
    # reconstruct to zero slopes; skip all candidate and transform work
    nbv = packed.neighbors[cells]
    ndiff = avgs[np.maximum(nbv, 0)] - avgs[cells][:, None, :]
    ndiff = np.where((nbv >= 0)[..., None], ndiff, 0.0)
    rough = np.nonzero(np.any(ndiff != 0.0, axis=(1, 2)))[0]
    if len(rough) < n:
        out = np.zeros((n, M, D))
        if len(rough):
            out[rough] = minmod_reconstruct(
                space, avgs, cells[rough], packed, physics, characteristic,
                None if pre_lin is None else pre_lin[rough])
        return out

    if D == 1:
        nb = packed.neighbors[cells]
        off = packed.nbr_off[cells][..., 0]
        have = nb >= 0
        safe = np.maximum(nb, 0)
        dx = mesh.centroids[safe, 0] - off - mesh.centroids[cells, 0][:, None]
        du = avgs[safe] - avgs[cells][:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = du / dx[..., None]
        cand = np.where(have[..., None], cand, 0.0)             # (n, 2, M)
        valid = np.repeat(have[:, :, None], M, axis=2)
    else:
        slopes, good = _pair_candidates(space, avgs, cells, packed)
        cand = slopes.transpose(0, 1, 3, 2)                     # (n, P, D, M)
        valid = np.repeat(good[:, :, None, None], D, axis=2)
        valid = np.repeat(valid, M, axis=3)

    out = np.zeros((n, M, D))
    # cells whose candidates all vanish (flat neighborhoods) keep zero slopes
    live = np.nonzero(np.any(cand != 0.0, axis=tuple(range(1, cand.ndim))))[0]
    if len(live) == 0:
        return out
    cand = cand[live]
    valid = valid[live]

    use_char = physics is not None and M > 1 and characteristic != "componentwise"
    if use_char:
        means = avgs[cells[live]]
        if D == 1:
            ndir = np.ones((len(live), 1))
            L, R = physics.eigenvector_pair(means, ndir)
            cw = np.matmul(cand, L.transpose(0, 2, 1))          # (n, 2, M) char
            lim = _masked_minmod(cw, valid, axis=1)             # (n, M)
            out[live, :, 0] = np.matmul(lim[:, None, :],
                                        R.transpose(0, 2, 1))[:, 0]
            return out
        grad = pre_lin[live] if pre_lin is not None else np.zeros((len(live), D))
        gn = np.linalg.norm(grad, axis=1)
        rho = means[:, 0]
        ok = gn > 1e-12 * (np.abs(rho) + 1e-300)
        ndir = np.where(ok[:, None], grad / np.maximum(gn, 1e-300)[:, None],
                        np.array([1.0, 0.0]))
        L, R = physics.eigenvector_pair(means, ndir)
        eye = np.eye(M)
        L = np.where(ok[:, None, None], L, eye)
        R = np.where(ok[:, None, None], R, eye)
        nl, P = cand.shape[:2]
        cw = np.matmul(cand.reshape(nl, P * D, M),
                       L.transpose(0, 2, 1)).reshape(nl, P, D, M)
        lim = _masked_minmod(cw, valid, axis=1)                 # (n, D, M)
        out[live] = np.matmul(lim, R.transpose(0, 2, 1)).transpose(0, 2, 1)
        return out

    lim = _masked_minmod(cand, valid, axis=1)
    if D == 1:
        out[live, :, 0] = lim
    else:
        out[live] = lim.transpose(0, 2, 1)                      # (n, D, M)->(n, M, D)
    return out


def rebuild_cells(space, data, avgs, cells, packed, physics, characteristic,
                  pre_lin):
    """Minmod-rebuild the given cells in place (means untouched).

    Dispatches to the fused kernel for 2D Euler; every caller (vectorized
    pass and per-cell reference) goes through here so the results are
    bitwise independent of how cells are batched.
    """
    if len(cells) == 0:
        return
    M = data.shape[1]
    if (_kernels.HAVE_NUMBA and space.dim == 2 and isinstance(physics, Euler)
            and M == 4):
        grads = pre_lin if pre_lin is not None else np.zeros((len(cells), 2))
        char_flag = 1 if characteristic != "componentwise" else 0
        _kernels.mr_rebuild_2d_euler(
            np.asarray(cells, dtype=np.int64), data,
            np.ascontiguousarray(avgs), packed.pair_nbrs, packed.pair_inv,
            packed.pair_good, grads, space.lin_map_all, physics.gamma,
            char_flag)
        return
    slopes = minmod_reconstruct(space, avgs, cells, packed,
                                physics if M > 1 else None,
                                characteristic, pre_lin)
    _write_linear(space, data, cells, slopes)


def _write_linear(space, data, cells, slopes):
    """Replace cells with mean + slope.(x - centroid); mean bits untouched."""
    D = space.dim
    data[np.ix_(cells, np.arange(data.shape[1]),
                np.nonzero(space.mode_degrees >= 1)[0])] = 0.0
    if space.degree < 1:
        return
    live = np.nonzero(np.any(slopes != 0.0, axis=(1, 2)))[0]
    if len(live) == 0:
        return
    cells = cells[live]
    slopes = slopes[live]
    for gi, g in enumerate(space.groups):
        sel = space._elem_group[cells] == gi
        if not np.any(sel):
            continue
        pos = space._elem_pos[cells[sel]]
        lm = g.lin_map[pos]                                     # (s, D, D)
        modal = np.matmul(lm[:, None], slopes[sel][..., None])[..., 0]
        data[cells[sel], :, 1:1 + D] = modal


# ---------------------------------------------------------------------------
# troubled-cell indicators for comparison limiters


def kxrcf_indicator(space, field: ModalField, physics, component=0):
    """Inflow-boundary jump indicator, one value per cell.

    Uses face-quadrature traces; the norm of the local solution is the max
    of |p_0| over the cell's own face nodes.  Cells without inflow faces
    (or without interior inflow neighbors) score zero.
    """
    mesh = space.mesh
    data = field.data
    uL = np.matmul(space.phi_face_L, data[mesh.face_left].transpose(0, 2, 1))
    uR = np.zeros_like(uL)
    interior = space._interior_faces
    uR[interior] = np.matmul(space.phi_face_R[interior],
                             data[mesh.face_right[interior]].transpose(0, 2, 1))

    means = field.cell_averages()
    vel = physics.velocity_at(means)                            # (n_e, D)
    n_e = mesh.n_elements
    num = np.zeros(n_e)
    inflow_len = np.zeros(n_e)
    norm = np.zeros(n_e)
    interior_set = mesh.face_right >= 0
    for slot in range(mesh.elem_faces.shape[1]):
        f = mesh.elem_faces[:, slot]
        ok = f >= 0
        ff = np.maximum(f, 0)
        side = space.elem_face_side[:, slot].astype(float)
        nrm = mesh.face_normal[ff] * side[:, None]
        own = np.where((side > 0)[:, None], uL[ff, :, component],
                       uR[ff, :, component])
        other = np.where((side > 0)[:, None], uR[ff, :, component],
                         uL[ff, :, component])
        norm = np.maximum(norm, np.where(ok, np.abs(own).max(axis=1), 0.0))
        is_in = ok & interior_set[ff] & (np.einsum("ed,ed->e", vel, nrm) < 0)
        jump = np.einsum("eq,eq->e", own - other, space.face_w[ff])
        num += np.where(is_in, jump, 0.0)
        inflow_len += np.where(is_in, mesh.face_measure[ff], 0.0)
    h = mesh.measures ** (1.0 / mesh.dim)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.abs(num) / (h ** ((space.degree + 1) / 2.0) * inflow_len * norm)
    out[inflow_len == 0] = 0.0
    return np.nan_to_num(out, nan=0.0, posinf=np.inf)


def fs_indicator(space, field: ModalField, component=0):
    """Neighbor-extrapolation average-difference indicator, per cell.

    Each neighbor polynomial is integrated over the target cell; the summed
    average offsets are scaled by the largest neighborhood average.  An
    all-zero neighborhood scores zero.
    """
    mesh = space.mesh
    data = field.data
    n_e = mesh.n_elements
    num = np.zeros(n_e)
    avg = field.cell_averages()[:, component]
    den = np.abs(avg).copy()
    for g in space.groups:
        ids = g.ids
        for slot in range(mesh.elem_neighbors.shape[1]):
            nb = mesh.elem_neighbors[ids, slot]
            ok = nb >= 0
            if not np.any(ok):
                continue
            sub = ids[ok]
            nbs = nb[ok]
            # neighbor polynomial sampled at our volume nodes, in its frame
            pts = g.nodes[ok] + mesh.neighbor_offset[ids, slot][ok][:, None, :]
            phi_n = space._eval_basis_at(nbs, pts)
            vals = np.einsum("sqm,sm->sq", phi_n, data[nbs, component])
            nbr_avg_on_cell = np.einsum("sq,sq->s", vals, g.wn[ok])
            num[sub] += np.abs(nbr_avg_on_cell - avg[sub])
            den[sub] = np.maximum(den[sub], np.abs(avg[nbs]))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return np.nan_to_num(out, nan=0.0, posinf=np.inf)


def _tvb_troubled(space, field: ModalField, physics, m_const):
    """Classical TVB detection on interface traces (1D only)."""
    mesh = space.mesh
    if mesh.dim != 1:
        raise ValueError("the TVB limiter is only provided in 1D")
    data = field.data
    avg = field.cell_averages()
    nb = mesh.elem_neighbors
    have = nb >= 0
    safe = np.maximum(nb, 0)
    dminus = np.where(have[:, 0, None], avg - avg[safe[:, 0]], 0.0)
    dplus = np.where(have[:, 1, None], avg[safe[:, 1]] - avg, 0.0)
    # own traces at the two interfaces
    g = space.groups[0]
    nq = g.n_q
    adm = space.adm_phi[0]
    left_tr = np.einsum("em,ecm->ec", adm[:, nq, :], data)
    right_tr = np.einsum("em,ecm->ec", adm[:, nq + 1, :], data)
    ul = avg - left_tr
    ur = right_tr - avg
    M = data.shape[1]
    if M > 1:
        ndir = np.ones((mesh.n_elements, 1))
        L = physics.left_eigenvectors(avg, ndir)
        tr = lambda v: np.einsum("nij,nj->ni", L, v)
        ul, ur, dminus, dplus = tr(ul), tr(ur), tr(dminus), tr(dplus)
    tol = m_const * mesh.measures[:, None] ** 2
    mod_l = np.where(np.abs(ul) <= tol, ul, minmod(ul, dminus, dplus))
    mod_r = np.where(np.abs(ur) <= tol, ur, minmod(ur, dminus, dplus))
    scale = np.abs(ul) + np.abs(ur) + 1e-300
    changed = (np.abs(mod_l - ul) > 1e-13 * scale) \
        | (np.abs(mod_r - ur) > 1e-13 * scale)
    return np.any(changed, axis=1)


# ---------------------------------------------------------------------------
# positivity


def positivity_limit(space, field: ModalField, physics, eps=1e-13):
    """Zhang-Shu scaling so density and pressure exceed eps at all
    volume and face quadrature nodes.  Cell means are never modified.

    Returns (min_density, min_pressure) after limiting.  Raises
    AdmissibilityError if a cell *mean* is already inadmissible, which is a
    scheme failure rather than something limiting can repair.
    """
    if not isinstance(physics, Euler):
        return np.inf, np.inf
    gamma = physics.gamma
    D = space.dim
    data = field.data
    # solve a few ulps above eps so the scaled minima land at >= eps even
    # after rounding; the margin scales with the state magnitudes involved
    ulp = np.finfo(float).eps
    min_rho = np.inf
    min_p = np.inf

    def node_pressure(vv):
        return (gamma - 1) * (vv[..., -1] - 0.5 * np.sum(
            vv[..., 1:1 + D] ** 2, axis=-1) / np.maximum(vv[..., 0], 1e-300))

    data_t = space.transposed_coeffs(data)
    for gi, g in enumerate(space.groups):
        adm = space.adm_phi[gi]
        coeffs = data if g.full else data[g.ids]
        vals = np.matmul(adm, data_t if g.full else data_t[g.ids])
        mean = coeffs[:, :, 0]
        rho_bar = mean[:, 0]
        p_bar = (gamma - 1) * (mean[:, -1]
                               - 0.5 * np.sum(mean[:, 1:1 + D] ** 2, axis=1) / rho_bar)
        bad = (rho_bar <= eps) | (p_bar <= eps)
        if np.any(bad):
            e = int(g.ids[np.nonzero(bad)[0][0]])
            raise AdmissibilityError(
                f"inadmissible cell mean in element {e}: the scheme has failed",
                element=e, state=data[e, :, 0])

        if _kernels.HAVE_NUMBA:
            rho_min, p_min = _kernels.admissibility_scan(vals, gamma)
        else:
            rho_min = vals[:, :, 0].min(axis=1)
            p_min = node_pressure(vals).min(axis=1)
        t_rho = eps + 16.0 * ulp * np.abs(rho_bar)
        pscale = np.abs(p_bar) + (gamma - 1) * (np.abs(mean[:, -1])
                                                + np.abs(p_bar) / (gamma - 1))
        t_p = eps + 64.0 * ulp * pscale
        ok_cells = (rho_min >= t_rho) & (p_min >= t_p)
        if np.any(ok_cells):
            min_rho = min(min_rho, float(rho_min[ok_cells].min()))
            min_p = min(min_p, float(p_min[ok_cells].min()))
        sel = np.nonzero(~ok_cells)[0]
        if len(sel) == 0:
            continue

        # density scaling on the violating subset
        ids = g.ids[sel]
        vv = vals[sel]
        rb = rho_bar[sel]
        target = t_p[sel][:, None]
        need1 = rho_min[sel] < t_rho[sel]
        if np.any(need1):
            theta1 = (rb[need1] - t_rho[sel][need1]) \
                / (rb[need1] - rho_min[sel][need1])
            data[ids[need1], 0, 1:] *= theta1[:, None]
            dev = vv[need1, :, 0] - rb[need1, None]
            vv[need1, :, 0] = rb[need1, None] + theta1[:, None] * dev

        # pressure: smallest root of the concave quadratic along the segment
        # from the admissible mean to each node value
        mom_bar = mean[sel, 1:1 + D]
        e_bar = mean[sel, -1]
        drho = vv[:, :, 0] - rb[:, None]
        dmom = vv[:, :, 1:1 + D] - mom_bar[:, None, :]
        de = vv[:, :, -1] - e_bar[:, None]
        a = (gamma - 1) * (drho * de - 0.5 * np.sum(dmom * dmom, axis=2))
        b = (gamma - 1) * (rb[:, None] * de + drho * e_bar[:, None]
                           - np.einsum("gd,gnd->gn", mom_bar, dmom)) \
            - target * drho
        c0 = ((gamma - 1) * (rb * e_bar - 0.5 * np.sum(mom_bar ** 2, axis=1))
              - target[:, 0] * rb)[:, None]
        viol = node_pressure(vv) < target
        theta2 = np.ones(len(sel))
        if np.any(viol):
            with np.errstate(divide="ignore", invalid="ignore"):
                lin = -c0 / np.where(np.abs(b) > 0, b, 1.0)
                disc = np.maximum(b * b - 4.0 * a * c0, 0.0)
                sq = np.sqrt(disc)
                qq = -0.5 * (b + np.where(b >= 0, sq, -sq))
                r1 = qq / np.where(np.abs(a) > 0, a, np.inf)
                r2 = c0 / np.where(np.abs(qq) > 0, qq, np.inf)
            roots = np.stack([lin, r1, r2], axis=0)
            ok = (roots > 0) & (roots <= 1.0) & np.isfinite(roots)
            best = np.min(np.where(ok, roots, np.inf), axis=0)
            best = np.where(np.isfinite(best), best, 0.0)
            theta2 = np.where(viol, best, 1.0).min(axis=1)
            shrink = np.nonzero(theta2 < 1.0)[0]
            data[ids[shrink], :, 1:] *= theta2[shrink, None, None]
        # verify; concavity of rho*e_int along the segment makes any further
        # shrink admissible, so a few safety contractions always land
        for _ in range(40):
            vv = np.matmul(adm[sel], data[ids].transpose(0, 2, 1))
            pp = node_pressure(vv)
            still = (pp.min(axis=1) < eps) | (vv[:, :, 0].min(axis=1) < eps)
            if not np.any(still):
                break
            data[ids[still], :, 1:] *= 0.999
        min_rho = min(min_rho, float(vv[:, :, 0].min()))
        min_p = min(min_p, float(pp.min()))
    return min_rho, min_p


# ---------------------------------------------------------------------------
# single-cell reference path (also the contract for the vectorized pass)


def mr_limit_cell(space, field: ModalField, element: int,
                  stencil: IndicatorStencil, config: MRConfig, physics=None,
                  packed=None):
    """MR-limit one cell against frozen averages; returns (coeffs, decision).

    Reference (per-cell) form of the vectorized pass: iterates the
    derivative indicator on the progressively truncated polynomial from
    degree k down, falling back to the minmod rebuild when degree 1 fails.
    """
    k = space.degree
    comp = config.indicator_component if field.n_comp > 1 else 0
    avgs = field.cell_averages()
    is0 = baseline_indicator(stencil, avgs[:, comp])
    g = space.groups[space._elem_group[element]]
    pos = space._elem_pos[element]
    work = field.data[element].copy()
    tested = []
    for r in range(k, 0, -1):
        isr = float(np.sum(np.abs((work[comp] @ g.coeff[pos])[g.deg_slots[r]])))
        tested.append(isr)
        if isr <= config.c_k * is0:
            return work, LimiterDecision(element, r, is0, tested)
        work[:, space.mode_degrees == r] = 0.0
    if k == 0:
        return work, LimiterDecision(element, 0, is0, tested)
    if packed is None:
        packed = pack_stencils(space.mesh, build_indicator_stencils(space.mesh))
    cells = np.array([element])
    pre_lin = None
    if space.dim == 2 and physics is not None:
        pre_lin = (g.grad_map[pos]
                   @ field.data[element, comp, 1:1 + space.dim])[None, :]
    scratch = np.zeros((space.mesh.n_elements, field.n_comp, space.n_modes))
    scratch[element] = work
    rebuild_cells(space, scratch, avgs, cells, packed, physics,
                  config.characteristic, pre_lin)
    return scratch[element], LimiterDecision(element, SLOPE_LIMITED, is0, tested)


# ---------------------------------------------------------------------------
# full pass


def apply_limiter_pass(space, field: ModalField, physics, packed: PackedStencils,
                       config: LimiterConfig) -> LimiterReport:
    """Limit every cell in place from frozen pre-pass averages, then apply
    the positivity limiter (Euler only).  Decisions are independent of cell
    visitation order because only frozen data is read.
    """
    k = space.degree
    data = field.data
    n_e = space.mesh.n_elements
    M = data.shape[1]
    comp = config.mr.indicator_component if M > 1 else 0
    avgs = field.cell_averages().copy()
    decisions = np.full(n_e, k, dtype=np.int8)
    report = LimiterReport(decisions=decisions)

    pre_lin = None
    if space.dim == 2 and k >= 1 and M > 1:
        pre_lin = np.empty((n_e, 2))
        for g in space.groups:
            pre_lin[g.ids] = np.einsum("gij,gj->gi", g.grad_map,
                                       data[g.ids, comp, 1:3])

    if config.scheme == "mr" and k >= 1:
        is0 = baseline_indicator_all(packed, avgs[:, comp])
        tested = np.full((n_e, k), np.nan)
        active = np.ones(n_e, dtype=bool)
        thresh = config.mr.c_k * is0
        act_idx = np.arange(n_e)
        for r in range(k, 0, -1):
            isr = _derivative_indicator_all(space, data, comp, r,
                                            None if r == k else act_idx)
            tested[act_idx, r - 1] = isr
            keep = isr <= thresh[act_idx]
            decisions[act_idx[keep]] = r
            act_idx = act_idx[~keep]
            if len(act_idx) == 0:
                break
            if _kernels.HAVE_NUMBA:
                _kernels.zero_mode_range(data, act_idx, int(space.deg_lo[r]),
                                         int(space.deg_hi[r]))
            else:
                data[np.ix_(act_idx, np.arange(M),
                            np.nonzero(space.mode_degrees == r)[0])] = 0.0
        slope_cells = act_idx
        decisions[slope_cells] = SLOPE_LIMITED
        if len(slope_cells):
            pl = pre_lin[slope_cells] if pre_lin is not None else None
            rebuild_cells(space, data, avgs, slope_cells, packed, physics,
                          config.mr.characteristic, pl)
        report.is0 = is0
        report.tested = tested
    elif config.scheme in ("kxrcf", "fs", "tvb") and k >= 1:
        if config.scheme == "kxrcf":
            ind = kxrcf_indicator(space, field, physics, comp)
            troubled = ind > config.kxrcf_threshold
        elif config.scheme == "fs":
            ind = fs_indicator(space, field, comp)
            troubled = ind > config.fs_threshold
        else:
            troubled = _tvb_troubled(space, field, physics, config.tvb_m)
            ind = troubled.astype(float)
        cells = np.nonzero(troubled)[0]
        decisions[cells] = SLOPE_LIMITED
        if len(cells):
            pl = pre_lin[cells] if pre_lin is not None else None
            rebuild_cells(space, data, avgs, cells, packed, physics,
                          config.mr.characteristic, pl)
        report.indicator = ind
    # scheme 'none': decisions stay at k

    if config.positivity and isinstance(physics, Euler):
        report.min_density, report.min_pressure = positivity_limit(
            space, field, physics, config.positivity_eps)
    return report
