"""Orthonormal modal bases and quadrature on intervals, triangles and quads.

Each element carries its own modal basis: monomials in centroid-centered,
measure-scaled coordinates, orthonormalized against the element's volume
quadrature under the measure-normalized inner product (1/|K|) \\int_K f g dV.
Mode 0 is the constant 1, so the mode-0 coefficient *is* the cell average.
On quadrilaterals the space is total-degree P^k, matching triangles, which
keeps degree truncation and the derivative indicator uniform across kinds.

All per-element tables are batched numpy arrays grouped by element kind so
residual assembly and limiting stay fully vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh

MAX_DEGREE = {1: 6, 2: 3}


class BasisError(Exception):
    pass


# ---------------------------------------------------------------------------
# quadrature rules

def gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


#: symmetric positive-weight triangle rules, barycentric orbits, weights sum to 1
_TRI_ORBITS = {
    1: [((1 / 3, 1 / 3, 1 / 3), 1.0)],
    2: [((2 / 3, 1 / 6, 1 / 6), 1 / 3)],
    4: [
        ((0.108103018168070, 0.445948490915965, 0.445948490915965), 0.223381589678011),
        ((0.816847572980459, 0.091576213509771, 0.091576213509771), 0.109951743655322),
    ],
    6: [
        ((0.873821971016996, 0.063089014491502, 0.063089014491502), 0.050844906370207),
        ((0.501426509658179, 0.249286745170910, 0.249286745170910), 0.116786275726379),
        ((0.636502499121399, 0.310352451033785, 0.053145049844816), 0.082851075618374),
    ],
}


def triangle_rule(degree):
    """Barycentric nodes and weights (weights sum to 1) exact to ``degree``."""
    for d in sorted(_TRI_ORBITS):
        if d >= degree:
            break
    else:
        raise BasisError(f"no triangle rule of degree {degree}")
    bary, wts = [], []
    for pt, w in _TRI_ORBITS[d]:
        perms = {p for p in
                 [(pt[0], pt[1], pt[2]), (pt[1], pt[2], pt[0]), (pt[2], pt[0], pt[1]),
                  (pt[0], pt[2], pt[1]), (pt[2], pt[1], pt[0]), (pt[1], pt[0], pt[2])]}
        for p in sorted(perms):
            bary.append(p)
            wts.append(w)
    return np.array(bary), np.array(wts)


def monomial_exponents(dim, degree):
    """Total-degree graded monomial exponents; returns (exponents, degrees)."""
    if dim == 1:
        expo = np.arange(degree + 1)[:, None]
    else:
        expo = np.array([(d - j, j) for d in range(degree + 1) for j in range(d + 1)],
                        dtype=np.int64)
    return expo, expo.sum(axis=1)


def eval_monomials(expo, pts):
    """pts (..., D) -> (..., n_mono)."""
    pts = np.asarray(pts, dtype=float)
    out = np.ones(pts.shape[:-1] + (len(expo),))
    for m, e in enumerate(expo):
        for d, p in enumerate(e):
            if p:
                out[..., m] = out[..., m] * pts[..., d] ** p
    return out


def eval_monomial_grads(expo, pts):
    """pts (..., D) -> (..., n_mono, D) local-coordinate gradients."""
    pts = np.asarray(pts, dtype=float)
    D = pts.shape[-1]
    out = np.zeros(pts.shape[:-1] + (len(expo), D))
    for m, e in enumerate(expo):
        for d in range(D):
            if e[d] == 0:
                continue
            g = np.full(pts.shape[:-1], float(e[d]))
            for dd in range(D):
                p = e[dd] - (1 if dd == d else 0)
                if p:
                    g = g * pts[..., dd] ** p
            out[..., m, d] = g
    return out


# ---------------------------------------------------------------------------
# element groups


@dataclass
class ElementGroup:
    """Batched basis tables for all elements of one kind."""

    kind: str
    ids: np.ndarray            # global element ids (sorted)
    scale: np.ndarray          # (g,) measure**(1/D)
    coeff: np.ndarray          # (g, n_modes, n_mono) modes = coeff @ monomials
    nodes: np.ndarray          # (g, n_q, D) physical volume nodes
    w: np.ndarray              # (g, n_q) physical weights, sum = |K|
    wn: np.ndarray             # (g, n_q) measure-normalized weights
    phi: np.ndarray            # (g, n_q, n_modes)
    gradw: np.ndarray          # (g, n_q*D, n_modes)  physical grad * weight
    lin_map: np.ndarray        # (g, D, D) physical slope -> linear-mode coeffs
    grad_map: np.ndarray       # (g, D, D) linear-mode coeffs -> physical gradient
    deg_slots: list            # deg_slots[r] = monomial slot indices of degree r
    full: bool = False         # ids cover every element in order

    @property
    def n_q(self):
        return self.phi.shape[1]


@dataclass
class ModalField:
    """Per-cell modal coefficients, one row per conservative component."""

    space: "DGSpace"
    data: np.ndarray           # (n_e, n_comp, n_modes)

    @property
    def n_comp(self):
        return self.data.shape[1]

    def copy(self):
        return ModalField(self.space, self.data.copy())

    def cell_averages(self):
        """Mode 0 is the unit constant, so this is exact."""
        return self.data[:, :, 0]


class DGSpace:
    """Mesh + degree + all precomputed basis/quadrature tables."""

    def __init__(self, mesh: Mesh, degree: int):
        if degree < 0 or degree > MAX_DEGREE[mesh.dim]:
            raise BasisError(
                f"degree {degree} unsupported in {mesh.dim}D "
                f"(max {MAX_DEGREE[mesh.dim]})")
        self.mesh = mesh
        self.degree = degree
        self.dim = mesh.dim
        self.expo, self.mode_degrees = monomial_exponents(mesh.dim, degree)
        self.n_modes = len(self.expo)
        self._scr = {}
        self.deg_modes = [np.nonzero(self.mode_degrees == r)[0]
                          for r in range(degree + 1)]
        self.groups = self._build_groups()
        self._elem_group = np.zeros(mesh.n_elements, dtype=np.int64)
        self._elem_pos = np.zeros(mesh.n_elements, dtype=np.int64)
        for gi, g in enumerate(self.groups):
            self._elem_group[g.ids] = gi
            self._elem_pos[g.ids] = np.arange(len(g.ids))
        self._build_face_tables()
        self._build_admissibility_tables()
        self.centroid_phi = np.zeros((mesh.n_elements, self.n_modes))
        n_e = mesh.n_elements
        D = mesh.dim
        self.coeff_all = np.zeros((n_e, self.n_modes, self.n_modes))
        self.lin_map_all = np.zeros((n_e, D, D))
        self.grad_map_all = np.zeros((n_e, D, D))
        for g in self.groups:
            self.centroid_phi[g.ids] = g.coeff[:, :, 0]
            self.coeff_all[g.ids] = g.coeff
            self.lin_map_all[g.ids] = g.lin_map
            self.grad_map_all[g.ids] = g.grad_map
        # graded ordering makes each degree's modes/monomials contiguous
        self.deg_lo = np.zeros(degree + 1, dtype=np.int64)
        self.deg_hi = np.zeros(degree + 1, dtype=np.int64)
        for r in range(degree + 1):
            idx = np.nonzero(self.mode_degrees == r)[0]
            self.deg_lo[r], self.deg_hi[r] = idx[0], idx[-1] + 1

    # -- construction -------------------------------------------------------

    def _volume_rule(self, kind, affine=False):
        k = self.degree
        if kind == "interval":
            x, w = gauss_legendre(k + 1)
            return 0.5 * x[:, None], 0.5 * w     # on [-1/2, 1/2], weights sum 1
        if kind == "tri":
            bary, w = triangle_rule(max(2 * k, 1))
            ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
            return bary @ ref, w
        # quad tensor Gauss; one extra point covers bilinear (trapezoid) maps,
        # parallelograms have a constant Jacobian and get the minimal rule
        n1 = k + 1 if affine else k + 2
        x, w = gauss_legendre(n1)
        X, Y = np.meshgrid(x, x, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        W = np.outer(w, w).ravel() / 4.0
        return 0.5 * pts, W                       # reference square [-1/2,1/2]^2

    def _physical_nodes(self, kind, offsets, refpts, refw):
        """Map reference nodes through centroid-centered corners.

        ``offsets`` are corner coordinates relative to the element centroid,
        which keeps Jacobians and node offsets free of large-coordinate
        cancellation on fine meshes far from the origin.  Returns
        (node offsets from centroid, physical weights).
        """
        g = len(offsets)
        nq = len(refpts)
        if kind == "interval":
            x0 = offsets[:, 0, 0]
            x1 = offsets[:, 1, 0]
            h = (x1 - x0)[:, None]
            mid = 0.5 * (x0 + x1)[:, None]
            nodes = (mid + h * refpts[:, 0][None, :])[:, :, None]
            w = h * refw[None, :]
            return nodes, w
        if kind == "tri":
            v0 = offsets[:, 0][:, None, :]
            e1 = (offsets[:, 1] - offsets[:, 0])[:, None, :]
            e2 = (offsets[:, 2] - offsets[:, 0])[:, None, :]
            nodes = v0 + refpts[None, :, 0, None] * e1 + refpts[None, :, 1, None] * e2
            area = 0.5 * np.abs(e1[:, 0, 0] * e2[:, 0, 1] - e1[:, 0, 1] * e2[:, 0, 0])
            w = refw[None, :] * area[:, None]
            return nodes, w
        # bilinear quad map from [-1/2,1/2]^2
        xi = refpts[:, 0][None, :]
        eta = refpts[:, 1][None, :]
        n0 = (0.5 - xi) * (0.5 - eta)
        n1 = (0.5 + xi) * (0.5 - eta)
        n2 = (0.5 + xi) * (0.5 + eta)
        n3 = (0.5 - xi) * (0.5 + eta)
        nodes = np.zeros((g, nq, 2))
        for d in range(2):
            nodes[:, :, d] = (n0 * offsets[:, 0, d, None] + n1 * offsets[:, 1, d, None]
                              + n2 * offsets[:, 2, d, None] + n3 * offsets[:, 3, d, None])
        dxi = np.zeros((g, nq, 2))
        deta = np.zeros((g, nq, 2))
        for d in range(2):
            dxi[:, :, d] = (-(0.5 - eta) * offsets[:, 0, d, None]
                            + (0.5 - eta) * offsets[:, 1, d, None]
                            + (0.5 + eta) * offsets[:, 2, d, None]
                            - (0.5 + eta) * offsets[:, 3, d, None])
            deta[:, :, d] = (-(0.5 - xi) * offsets[:, 0, d, None]
                             - (0.5 + xi) * offsets[:, 1, d, None]
                             + (0.5 + xi) * offsets[:, 2, d, None]
                             + (0.5 - xi) * offsets[:, 3, d, None])
        jac = dxi[:, :, 0] * deta[:, :, 1] - dxi[:, :, 1] * deta[:, :, 0]
        if np.any(jac <= 0):
            raise BasisError("quad element with non-positive Jacobian")
        return nodes, refw[None, :] * jac

    def _build_groups(self):
        mesh = self.mesh
        groups = []
        if mesh.dim == 1:
            kinds = {"interval": np.arange(mesh.n_elements)}
        else:
            kinds = {}
            tri = np.nonzero(mesh.elem_nv == 3)[0]
            quad = np.nonzero(mesh.elem_nv == 4)[0]
            if len(tri):
                kinds["tri"] = tri
            if len(quad):
                kinds["quad"] = quad
        for kind, ids in kinds.items():
            nv = {"interval": 2, "tri": 3, "quad": 4}[kind]
            elems_pts = mesh.vertices[mesh.elem_verts[ids][:, :nv]]
            offsets = elems_pts - mesh.centroids[ids][:, None, :]
            affine = False
            if kind == "quad":
                skew = offsets[:, 0] - offsets[:, 1] + offsets[:, 2] - offsets[:, 3]
                scale0 = np.abs(offsets).max()
                affine = bool(np.abs(skew).max() < 1e-12 * scale0)
            refpts, refw = self._volume_rule(kind, affine=affine)
            node_off, w = self._physical_nodes(kind, offsets, refpts, refw)
            nodes = mesh.centroids[ids][:, None, :] + node_off
            meas = mesh.measures[ids]
            scale = meas ** (1.0 / mesh.dim)
            wn = w / meas[:, None]
            local = node_off / scale[:, None, None]
            mono = eval_monomials(self.expo, local)
            coeff = self._orthonormalize(mono, wn)
            phi = np.matmul(mono, coeff.transpose(0, 2, 1))
            mono_grad = eval_monomial_grads(self.expo, local)
            grad_phi = np.einsum("gqnd,gmn->gqmd", mono_grad, coeff)
            grad_phi /= scale[:, None, None, None]
            gradw = (grad_phi * w[:, :, None, None]).transpose(0, 1, 3, 2)
            gradw /= meas[:, None, None, None]
            gq, nq, D, nm = gradw.shape
            gradw = gradw.reshape(gq, nq * D, nm)

            D = mesh.dim
            lin_map = np.zeros((gq, D, D))
            grad_map = np.zeros((gq, D, D))
            if self.degree >= 1:
                cinv = np.linalg.inv(coeff)           # (g, n_mono, n_modes)
                for i in range(D):
                    for j in range(D):
                        lin_map[:, i, j] = cinv[:, 1 + j, 1 + i] * scale
                        grad_map[:, i, j] = coeff[:, 1 + j, 1 + i] / scale
            deg_slots = [np.nonzero(self.expo.sum(axis=1) == r)[0]
                         for r in range(self.degree + 1)]
            groups.append(ElementGroup(
                kind=kind, ids=ids, scale=scale, coeff=coeff, nodes=nodes,
                w=w, wn=wn, phi=phi, gradw=gradw, lin_map=lin_map,
                grad_map=grad_map, deg_slots=deg_slots,
                full=len(ids) == mesh.n_elements))
        return groups

    @staticmethod
    def _orthonormalize(mono, wn):
        """Two-pass Cholesky orthonormalization; mode 0 forced to the constant 1."""
        G = np.einsum("gqm,gqn,gq->gmn", mono, mono, wn)
        G[:, 0, 0] = 1.0
        nm = G.shape[1]
        eye = np.eye(nm)
        L = np.linalg.cholesky(G)
        C1 = np.linalg.solve(L, np.broadcast_to(eye, G.shape))
        G2 = C1 @ G @ C1.transpose(0, 2, 1)
        G2[:, 0, 0] = 1.0
        L2 = np.linalg.cholesky(G2)
        C = np.linalg.solve(L2, np.broadcast_to(eye, G.shape)) @ C1
        C[:, 0, :] = 0.0
        C[:, 0, 0] = 1.0
        return C

    def _face_rule(self):
        if self.dim == 1:
            return np.zeros((1, 0)), np.ones(1)
        x, w = gauss_legendre(self.degree + 1)
        return x[:, None], 0.5 * w               # parametric on [0,1] later

    def _build_face_tables(self):
        mesh = self.mesh
        refx, refw = self._face_rule()
        nfq = len(refw)
        n_f = mesh.n_faces
        if self.dim == 1:
            nodes = mesh.face_midpoint[:, None, :].copy()
            wf = np.ones((n_f, 1))
        else:
            a = mesh.vertices[mesh.face_verts[:, 0]]
            b = mesh.vertices[mesh.face_verts[:, 1]]
            t = 0.5 * (1 + refx[:, 0])           # in [0,1]
            nodes = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
            wf = refw[None, :] * mesh.face_measure[:, None]
        self.face_nodes = nodes
        self.face_w = wf
        self.n_fq = nfq
        self.phi_face_L = self._eval_basis_at(mesh.face_left, nodes)
        right = np.maximum(mesh.face_right, 0)
        shifted = nodes + mesh.face_offset[:, None, :]
        self.phi_face_R = self._eval_basis_at(right, shifted)
        self.phi_face_R[mesh.face_right < 0] = 0.0
        self.phiw_face_L = self.phi_face_L * wf[:, :, None]
        self.phiw_face_R = self.phi_face_R * wf[:, :, None]
        self._interior_faces = np.nonzero(mesh.face_right >= 0)[0]
        side = np.zeros_like(mesh.elem_faces)
        for e in range(mesh.n_elements):
            for i, f in enumerate(mesh.elem_faces[e]):
                if f >= 0:
                    side[e, i] = 1 if mesh.face_left[f] == e else -1
        self.elem_face_side = side
        # per-element surface-contribution tables: own-side trace basis at
        # each face slot's nodes, weighted and signed so the surface term is
        # one batched matmul over the gathered face fluxes
        n_e = mesh.n_elements
        max_nf = mesh.elem_faces.shape[1]
        self.elem_face_idx = np.maximum(mesh.elem_faces, 0)
        phiw_own = np.zeros((n_e, max_nf, nfq, self.n_modes))
        for slot in range(max_nf):
            f = mesh.elem_faces[:, slot]
            ok = f >= 0
            ff = f[ok]
            is_left = (side[:, slot] > 0)[ok]
            tab = np.where(is_left[:, None, None], self.phiw_face_L[ff],
                           -self.phiw_face_R[ff])
            phiw_own[ok, slot] = -tab
        phiw_own /= mesh.measures[:, None, None, None]
        self.elem_phiw = phiw_own.reshape(n_e, max_nf * nfq, self.n_modes)
        # stored face normals per slot (as used in the face flux, i.e. the
        # left element's outward normal), for the free-stream-exact
        # deviation form of the residual
        fnorm = np.zeros((n_e, max_nf, mesh.dim))
        ok = mesh.elem_faces >= 0
        fnorm[ok] = mesh.face_normal[mesh.elem_faces[ok]]
        self.elem_slot_fnormal = fnorm

    def _eval_basis_at(self, elems, pts):
        """Evaluate each element's modes at its own row of points.

        elems (n,), pts (n, q, D) -> (n, q, n_modes).
        """
        elems = np.asarray(elems)
        out = np.empty((len(elems), pts.shape[1], self.n_modes))
        for gi, g in enumerate(self.groups):
            m = self._elem_group[elems] == gi
            if not np.any(m):
                continue
            pos = self._elem_pos[elems[m]]
            ids = g.ids[pos]
            local = (pts[m] - self.mesh.centroids[ids][:, None, :])
            local /= g.scale[pos][:, None, None]
            mono = eval_monomials(self.expo, local)
            out[m] = np.matmul(mono, g.coeff[pos].transpose(0, 2, 1))
        return out

    def _build_admissibility_tables(self):
        """Per element: basis at the union of volume and own-side face nodes.

        Also builds gather maps so face traces can be read straight out of
        the per-element node evaluation (one batched matmul per stage).
        """
        mesh = self.mesh
        self.adm_phi = []
        for g in self.groups:
            tabs = [g.phi]
            faces = mesh.elem_faces[g.ids]
            for slot in range(faces.shape[1]):
                f = faces[:, slot]
                ok = f >= 0
                tab = np.zeros((len(g.ids), self.n_fq, self.n_modes))
                ff = f[ok]
                own_left = mesh.face_left[ff] == g.ids[ok]
                tab_ok = np.where(own_left[:, None, None],
                                  self.phi_face_L[ff], self.phi_face_R[ff])
                tab[ok] = tab_ok
                tabs.append(tab)
            self.adm_phi.append(np.concatenate(tabs, axis=1))
        self.n_adm_max = max(t.shape[1] for t in self.adm_phi)
        vol_nq = np.zeros(mesh.n_elements, dtype=np.int64)
        for gi, g in enumerate(self.groups):
            vol_nq[g.ids] = g.n_q
        slot_of = {}
        for e in range(mesh.n_elements):
            for s, f in enumerate(mesh.elem_faces[e]):
                if f >= 0:
                    slot_of[(e, f)] = s
        nfq = self.n_fq
        qr = np.arange(nfq)
        n_f = mesh.n_faces
        self.face_gather_L = np.zeros((n_f, nfq), dtype=np.int64)
        self.face_gather_R = np.zeros((n_f, nfq), dtype=np.int64)
        for f in range(n_f):
            le = mesh.face_left[f]
            self.face_gather_L[f] = vol_nq[le] + slot_of[(le, f)] * nfq + qr
            re = mesh.face_right[f]
            if re >= 0:
                self.face_gather_R[f] = vol_nq[re] + slot_of[(re, f)] * nfq + qr

    def transposed_coeffs(self, data):
        """Contiguous (n_e, n_modes, M) copy; feeds the batched matmuls."""
        buf = self._scr.get(("dataT", data.shape))
        if buf is None:
            buf = np.empty((data.shape[0], data.shape[2], data.shape[1]))
            self._scr[("dataT", data.shape)] = buf
        np.copyto(buf, data.transpose(0, 2, 1))
        return buf

    def evaluate_all_nodes(self, data, out=None, data_t=None):
        """State values at every element's volume and face nodes.

        Returns (n_e, n_adm_max, M); rows beyond an element's own node
        count are unspecified for mixed-kind meshes.
        """
        n_e, M = data.shape[0], data.shape[1]
        if out is None:
            out = np.empty((n_e, self.n_adm_max, M))
        if data_t is None:
            data_t = self.transposed_coeffs(data)
        for gi, g in enumerate(self.groups):
            coeffs_t = data_t if g.full else data_t[g.ids]
            tab = self.adm_phi[gi]
            if g.full and tab.shape[1] == self.n_adm_max:
                np.matmul(tab, coeffs_t, out=out)
            else:
                out[g.ids, :tab.shape[1]] = np.matmul(tab, coeffs_t)
        return out

    # -- operations ---------------------------------------------------------

    def zeros(self, n_comp) -> ModalField:
        return ModalField(self, np.zeros((self.mesh.n_elements, n_comp, self.n_modes)))

    def l2_project(self, fn, n_comp=None) -> ModalField:
        """Quadrature L2 projection; exact whenever fn is in P^k."""
        sample = np.atleast_1d(np.asarray(fn(self.mesh.centroids[:1]), dtype=float))
        if n_comp is None:
            n_comp = sample.shape[-1] if sample.ndim > 1 else 1
        out = self.zeros(n_comp)
        for g in self.groups:
            vals = np.asarray(fn(g.nodes.reshape(-1, self.dim)), dtype=float)
            vals = vals.reshape(len(g.ids), g.n_q, n_comp)
            out.data[g.ids] = np.einsum("gqc,gqm,gq->gcm", vals, g.phi, g.wn)
        return out

    def evaluate(self, field: ModalField, element: int, points) -> np.ndarray:
        """Point values of the DG polynomial; extrapolation is permitted."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        phi = self._eval_basis_at(np.array([element]), pts[None, :, :])[0]
        vals = phi @ field.data[element].T
        return vals if np.ndim(points) > 1 else vals[0]

    def cell_center_values(self, field: ModalField) -> np.ndarray:
        return np.einsum("em,ecm->ec", self.centroid_phi, field.data)

    def local_monomial_coeffs(self, coeffs_elem, element):
        g = self.groups[self._elem_group[element]]
        pos = self._elem_pos[element]
        return np.asarray(coeffs_elem) @ g.coeff[pos]

    def kth_derivative_sum(self, field: ModalField, element: int, degree: int):
        """Multinomial-weighted absolute k-th derivatives, one per component.

        Returns sum_l 1/((k-l)! l!) |d^k p / dx^{k-l} dy^l| in 2D and
        (1/k!) |d^k p/dx^k| in 1D, evaluated at the centroid; constant (hence
        exact) once the polynomial is truncated to the requested degree.
        """
        if degree > self.degree:
            raise BasisError("derivative degree exceeds field degree")
        g = self.groups[self._elem_group[element]]
        pos = self._elem_pos[element]
        a = field.data[element] @ g.coeff[pos]       # (n_comp, n_mono)
        slots = g.deg_slots[degree]
        return np.sum(np.abs(a[:, slots]), axis=1) / g.scale[pos] ** degree

    def truncate_to_degree(self, coeffs, r):
        """Zero all modes of total degree > r; mode 0 is untouched bitwise."""
        out = np.array(coeffs, copy=True)
        out[..., self.mode_degrees > r] = 0.0
        return out


def exact_cell_averages(mesh: Mesh, fn, degree=8, n_comp=None):
    """Cell averages of ``fn`` by a quadrature of at least the given degree."""
    k = min(MAX_DEGREE[mesh.dim], max(1, (degree + 1) // 2))
    space = DGSpace(mesh, k)
    sample = np.atleast_2d(np.asarray(fn(mesh.centroids[:1]), dtype=float))
    if n_comp is None:
        n_comp = sample.shape[-1]
    out = np.zeros((mesh.n_elements, n_comp))
    for g in space.groups:
        vals = np.asarray(fn(g.nodes.reshape(-1, mesh.dim)), dtype=float)
        vals = vals.reshape(len(g.ids), g.n_q, n_comp)
        out[g.ids] = np.einsum("gqc,gq->gc", vals, g.wn)
    return out
