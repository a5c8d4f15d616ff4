"""Semi-discrete DG operator: volume/surface quadrature and boundary ghosts.

The residual r[e, c, m] approximates d(coefficient)/dt:

    r = ( volume integral of f(u_h) . grad(v_m)
          - surface integral of fhat . n v_m ) / |K_e|

with the Lax-Friedrichs numerical flux on faces.  Each face flux is
computed once and scattered to both sides through a presorted reduceat
plan, so results are independent of scheduling and discretely conservative.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels
from .basis import DGSpace, ModalField
from .physics import AdmissibilityError, Euler


@dataclass
class BoundaryCondition:
    """Exterior-state rule for one boundary tag.

    kind: 'dirichlet' | 'nonreflective' | 'reflective' | 'moving_shock'.
    ``state`` is the conservative inflow state for dirichlet;
    moving-shock carries pre/post states and a planar front
    (point, unit normal, speed): post-shock where (x-x0).n < s t.
    """

    kind: str
    state: np.ndarray | None = None
    pre_state: np.ndarray | None = None
    post_state: np.ndarray | None = None
    front_point: np.ndarray | None = None
    front_normal: np.ndarray | None = None
    front_speed: float = 0.0


def dirichlet(state):
    return BoundaryCondition("dirichlet", state=np.asarray(state, dtype=float))


def nonreflective():
    return BoundaryCondition("nonreflective")


def reflective():
    return BoundaryCondition("reflective")


def moving_shock(pre_state, post_state, point, normal, speed):
    n = np.asarray(normal, dtype=float)
    return BoundaryCondition(
        "moving_shock", pre_state=np.asarray(pre_state, dtype=float),
        post_state=np.asarray(post_state, dtype=float),
        front_point=np.asarray(point, dtype=float),
        front_normal=n / np.linalg.norm(n), front_speed=float(speed))


def ghost_state(bc: BoundaryCondition, interior, nodes, normals, t, dim):
    """Exterior trace states for one boundary face group.

    interior (f, q, M); nodes (f, q, D); normals (f, D).
    """
    if bc.kind == "nonreflective":
        return interior.copy()
    if bc.kind == "dirichlet":
        return np.broadcast_to(bc.state, interior.shape).copy()
    if bc.kind == "reflective":
        out = interior.copy()
        mom = interior[..., 1:1 + dim]
        mn = np.einsum("fqd,fd->fq", mom, normals)
        out[..., 1:1 + dim] = mom - 2.0 * mn[..., None] * normals[:, None, :]
        return out
    if bc.kind == "moving_shock":
        s = np.einsum("fqd,d->fq", nodes - bc.front_point, bc.front_normal)
        behind = s < bc.front_speed * t
        return np.where(behind[..., None], bc.post_state, bc.pre_state)
    raise ValueError(f"unknown boundary kind {bc.kind!r}")


def _euler_primitive(u, gamma, check, what):
    """Velocity and pressure with a single admissibility scan."""
    D = u.shape[-1] - 2
    rho = u[..., 0]
    inv = 1.0 / rho
    vel = u[..., 1:1 + D] * inv[..., None]
    ke = u[..., 1] * vel[..., 0]
    for d in range(1, D):
        ke = ke + u[..., 1 + d] * vel[..., d]
    p = (gamma - 1.0) * (u[..., -1] - 0.5 * ke)
    if check:
        bad = ~((rho > 0) & (p > 0))
        if np.any(bad):
            idx = tuple(b[0] for b in np.nonzero(bad))
            raise AdmissibilityError(
                f"inadmissible state at {what} (element-row {idx[0]}, "
                f"node {idx[-1]})", element=int(idx[0]),
                node=int(idx[-1]) if len(idx) > 1 else 0, state=u[idx])
    return vel, p


def _euler_node_flux(u, gamma, check, what):
    """Primitive recovery, admissibility check and full flux in one pass.

    u (..., M) -> (flux (..., M, D), velocity, pressure).  Shared by the
    volume term and the wave-speed bound so the primitive variables are
    computed exactly once per node set.
    """
    D = u.shape[-1] - 2
    vel, p = _euler_primitive(u, gamma, check, what)
    flux = np.empty(u.shape + (D,))
    Ep = u[..., -1] + p
    for d in range(D):
        q = vel[..., d]
        flux[..., 0, d] = u[..., 1 + d]
        for j in range(D):
            flux[..., 1 + j, d] = u[..., 1 + j] * q
        flux[..., 1 + d, d] += p
        flux[..., -1, d] = Ep * q
    return flux, vel, p


def _euler_directional_flux(u, vel, p, n):
    """f(u).n on face nodes; n is (n_f, D) broadcast over the node axis."""
    D = u.shape[-1] - 2
    q = vel[..., 0] * n[:, None, 0]
    for d in range(1, D):
        q = q + vel[..., d] * n[:, None, d]
    out = np.empty_like(u)
    out[..., 0] = u[..., 0] * q
    for j in range(D):
        out[..., 1 + j] = u[..., 1 + j] * q + p * n[:, None, j]
    out[..., -1] = (u[..., -1] + p) * q
    return out


class SemiDiscreteOperator:
    """Binds a space, a physics model and boundary conditions.

    ``alpha_mode`` selects the Lax-Friedrichs dissipation speed: 'global'
    (one speed per stage, from cell averages and boundary data) or 'local'
    (per face, from the two traces).
    """

    def __init__(self, space: DGSpace, physics, bcs=None, alpha_mode="global"):
        self.space = space
        self.physics = physics
        self.alpha_mode = alpha_mode
        mesh = space.mesh
        self.bc_groups = []
        bcs = bcs or {}
        bfaces = mesh.boundary_faces
        for tag_id, name in enumerate(mesh.tag_names):
            faces = bfaces[mesh.face_tag[bfaces] == tag_id]
            if len(faces) == 0:
                continue
            if name not in bcs:
                raise ValueError(f"no boundary condition for tag {name!r}")
            self.bc_groups.append((bcs[name], faces))
        tagged = {f for _, faces in self.bc_groups for f in faces}
        missing = [f for f in bfaces if f not in tagged]
        if missing:
            raise ValueError(f"{len(missing)} boundary faces carry no condition")
        self._bc_alpha = 0.0
        for bc, _ in self.bc_groups:
            for st in (bc.state, bc.pre_state, bc.post_state):
                if st is not None:
                    self._bc_alpha = max(self._bc_alpha,
                                         float(physics.max_signal(st)))
        self._scr = {}

    def _scratch(self, key, shape):
        buf = self._scr.get(key)
        if buf is None or buf.shape != shape:
            buf = np.empty(shape)
            self._scr[key] = buf
        return buf

    # -- helpers --------------------------------------------------------------

    def _check_admissible(self, u, what):
        ok = self.physics.admissible(u)
        if not np.all(ok):
            bad = np.nonzero(~ok)
            e, q = int(bad[0][0]), int(bad[1][0]) if len(bad) > 1 else 0
            raise AdmissibilityError(
                f"inadmissible state at {what} (element-row {e}, node {q})",
                element=e, node=q, state=np.asarray(u)[tuple(b[0] for b in bad)])

    def global_alpha(self, data):
        means = data[:, :, 0]
        speeds = self.physics.max_signal(means)
        return max(float(np.max(speeds)), self._bc_alpha)

    def boundary_traces(self, uB, t):
        """Exterior states for every boundary face, grouped by condition."""
        mesh = self.space.mesh
        out = {}
        for bc, faces in self.bc_groups:
            out_faces = ghost_state(
                bc, uB[faces], self.space.face_nodes[faces],
                mesh.face_normal[faces], t, mesh.dim)
            out[id(bc)] = (faces, out_faces)
        return out

    # -- main entry ------------------------------------------------------------

    def residual(self, data, t, check=True):
        """du/dt coefficients for the full coefficient array (n_e, M, n_modes)."""
        space, physics, mesh = self.space, self.physics, self.space.mesh
        res = np.empty_like(data)
        euler = isinstance(physics, Euler)

        # one batched evaluation covers volume nodes and all face traces;
        # fluxes are taken relative to each element's own mean flux so cells
        # in exactly-constant regions assemble a bitwise-zero residual
        u_all = space.evaluate_all_nodes(data)
        use_kernels = euler and _kernels.HAVE_NUMBA
        means = np.ascontiguousarray(data[:, :, 0])
        fbar = None if use_kernels else physics.flux(means)      # (n_e, c, D)

        for gi, g in enumerate(space.groups):
            u = u_all[:, :g.n_q] if g.full else u_all[g.ids, :g.n_q]
            nc = data.shape[1]
            if use_kernels:
                f2 = self._scratch(("volflux", gi),
                                   (len(u), nc, g.n_q * mesh.dim))
                bad = _kernels.euler_flux_packed_dev(
                    u, means if g.full else means[g.ids], physics.gamma, f2)
                if bad >= 0:
                    be, bq = divmod(int(bad), g.n_q)
                    e = int(g.ids[be])
                    raise AdmissibilityError(
                        f"inadmissible state at volume quadrature "
                        f"(element {e}, node {bq})", element=e, node=int(bq),
                        state=u[be, bq])
            else:
                if euler:
                    f, _, _ = _euler_node_flux(u, physics.gamma, check,
                                               f"volume quadrature ({g.kind})")
                else:
                    f = physics.flux(u)                           # (g, q, c, D)
                f = f - (fbar[:, None] if g.full else fbar[g.ids][:, None])
                gq, nq, nc, D = f.shape
                f2 = f.transpose(0, 2, 1, 3).reshape(gq, nc, nq * D)
            if g.full:
                np.matmul(f2, g.gradw, out=res)
            else:
                res[g.ids] = np.matmul(f2, g.gradw)

        # face traces, gathered from the element node values
        fl, fr = mesh.face_left, mesh.face_right
        interior = space._interior_faces
        if _kernels.HAVE_NUMBA:
            uL = self._scratch("uL", (mesh.n_faces, space.n_fq, data.shape[1]))
            uR = self._scratch("uR", uL.shape)
            _kernels.gather_traces(u_all, fl, space.face_gather_L, uL)
            _kernels.gather_traces_subset(u_all, interior, fr,
                                          space.face_gather_R, uR)
        else:
            uL = u_all[fl[:, None], space.face_gather_L]
            uR = np.empty_like(uL)
            uR[interior] = u_all[fr[interior, None],
                                 space.face_gather_R[interior]]
        for bc, faces in self.bc_groups:
            uR[faces] = ghost_state(bc, uL[faces], space.face_nodes[faces],
                                    mesh.face_normal[faces], t, mesh.dim)

        n = mesh.face_normal
        if use_kernels and self.alpha_mode == "global":
            alpha = self.global_alpha(data)
            fhat = self._scratch("fhat", uL.shape)
            bad = _kernels.euler_lf_faces(uL, uR, n, alpha,
                                          physics.gamma, fhat)
            if bad >= 0:
                code, side = divmod(int(bad), 2)
                bf, bq = divmod(code, space.n_fq)
                e = int(fl[bf] if side == 0 else fr[bf])
                raise AdmissibilityError(
                    f"inadmissible face trace (face {bf}, node {bq})",
                    element=e, node=int(bq),
                    state=(uL if side == 0 else uR)[bf, bq])
        elif euler:
            velL, pL = _euler_primitive(uL, physics.gamma, check,
                                        "face trace (left)")
            velR, pR = _euler_primitive(uR, physics.gamma, check,
                                        "face trace (right)")
            if self.alpha_mode == "global":
                alpha = self.global_alpha(data)
            else:
                g_ = physics.gamma
                sL = np.linalg.norm(velL, axis=-1) + np.sqrt(g_ * pL / uL[..., 0])
                sR = np.linalg.norm(velR, axis=-1) + np.sqrt(g_ * pR / uR[..., 0])
                alpha = np.maximum(sL, sR).max(axis=1)[:, None, None]
            fhat = _euler_directional_flux(uL, velL, pL, n)
            fhat += _euler_directional_flux(uR, velR, pR, n)
            fhat -= alpha * (uR - uL)
            fhat *= 0.5
        else:
            if check:
                self._check_admissible(uL, "face trace (left)")
                self._check_admissible(uR, "face trace (right)")
            if self.alpha_mode == "global":
                alpha = self.global_alpha(data)
            else:
                alpha = np.maximum(physics.max_signal(uL),
                                   physics.max_signal(uR)).max(axis=1)[:, None, None]
            fhat = np.einsum("fqcd,fd->fqc", physics.flux(uL) + physics.flux(uR), n)
            fhat -= alpha * (uR - uL)
            fhat *= 0.5

        # each face flux is shared bitwise by both sides; subtracting the
        # element's own mean flux through each face keeps constant regions
        # bitwise zero while the exact value is unchanged (closed normals)
        n_e = mesh.n_elements
        nc = data.shape[1]
        if use_kernels:
            fh = self._scratch("fh", (n_e, nc, space.elem_phiw.shape[1]))
            _kernels.gather_faces_dev_euler(fhat, space.elem_face_idx, means,
                                            space.elem_slot_fnormal,
                                            physics.gamma, fh)
            res += np.matmul(fh, space.elem_phiw)
        else:
            fh = fhat[space.elem_face_idx]                # (n_e, S, Q, c)
            if euler:
                S = space.elem_slot_fnormal.shape[1]
                mm = np.repeat(means[:, None, :], S, axis=1)[:, :, None, :]
                mvel, mp = _euler_primitive(mm, physics.gamma, False, "")
                fbar_face = _euler_directional_flux(
                    mm.reshape(n_e * S, 1, nc),
                    mvel.reshape(n_e * S, 1, -1), mp.reshape(n_e * S, 1),
                    space.elem_slot_fnormal.reshape(n_e * S, -1))
                fbar_face = fbar_face.reshape(n_e, S, 1, nc)
            else:
                fbar_face = np.einsum("ecd,esd->esc", fbar,
                                      space.elem_slot_fnormal)[:, :, None, :]
            fh = fh - fbar_face
            fh = fh.reshape(n_e, -1, fhat.shape[2])
            res += np.matmul(fh.transpose(0, 2, 1), space.elem_phiw)

        if check and not np.all(np.isfinite(res)):
            bad = int(np.nonzero(~np.isfinite(res))[0][0])
            raise AdmissibilityError(f"non-finite residual in element {bad}",
                                     element=bad)
        return res


def assemble_residual(space, field: ModalField, physics, bcs, t=0.0,
                      alpha_mode="global"):
    """One-shot residual assembly; returns a coefficient-shaped array."""
    op = SemiDiscreteOperator(space, physics, bcs, alpha_mode=alpha_mode)
    return op.residual(field.data, t)


def woodward_colella_corner_fix(space, physics, corner, upstream_point, width):
    """Entropy reset near a step corner, applied to cell means each stage.

    Cells within ``width`` right of and above ``corner`` get their density
    and velocity magnitude reset to preserve the entropy and speed of the
    cell at ``upstream_point`` (diagonally upstream of the corner), keeping
    their own pressure and flow direction.
    """
    mesh = space.mesh
    cx, cy = corner
    sel = np.nonzero(
        (mesh.centroids[:, 0] > cx) & (mesh.centroids[:, 0] <= cx + width)
        & (mesh.centroids[:, 1] > cy) & (mesh.centroids[:, 1] <= cy + width))[0]
    ref = mesh.locate(upstream_point)
    gamma = physics.gamma

    def hook(data):
        means = data[sel, :, 0]
        rho_r, vel_r, p_r = physics.primitive(data[ref, :, 0])
        s_ref = p_r / rho_r ** gamma
        speed_ref = float(np.linalg.norm(vel_r))
        rho, vel, p = physics.primitive(means)
        rho_new = (p / s_ref) ** (1.0 / gamma)
        speed = np.linalg.norm(vel, axis=-1)
        scale = np.where(speed > 1e-12, speed_ref / np.maximum(speed, 1e-300), 0.0)
        vel_new = vel * scale[:, None]
        data[sel, :, 0] = physics.conservative(rho_new, vel_new, p)

    return hook
