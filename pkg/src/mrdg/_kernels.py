"""Optional numba kernels for the per-stage hot loops.

Each kernel is a single fused memory pass replacing a chain of numpy
ufuncs; results are IEEE-identical op-for-op (no fastmath, no fma
contraction) and serial, so bitwise reproducibility and the limiter's
scale-invariance arguments are unaffected.  Everything degrades to the
numpy paths when numba is unavailable.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit, prange
    HAVE_NUMBA = True
except ImportError:                                   # pragma: no cover
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def euler_flux_packed_dev(u, means, gamma, out):
    """Euler flux relative to each element's mean flux, packed (E, M, Q*D).

    Nodes whose state equals the cell mean bitwise produce exact zeros, so
    constant regions have bitwise-zero volume residuals.  Returns the first
    inadmissible flattened (e*Q + q) index, or -1.
    """
    E, Q, M = u.shape
    D = M - 2
    gm1 = gamma - 1.0
    sentinel = E * Q
    bad = sentinel
    fbar = np.empty((M, D))
    for e in range(E):
        local_bad = sentinel
        rho = means[e, 0]
        ke = 0.0
        for d in range(D):
            ke += means[e, 1 + d] * means[e, 1 + d]
        denom = rho if rho > 0.0 else 1.0
        p = gm1 * (means[e, M - 1] - 0.5 * ke / denom)
        ep = means[e, M - 1] + p
        for d in range(D):
            vd = means[e, 1 + d] / denom
            fbar[0, d] = means[e, 1 + d]
            for j in range(D):
                fbar[1 + j, d] = means[e, 1 + j] * vd
            fbar[1 + d, d] += p
            fbar[M - 1, d] = ep * vd
        for q in range(Q):
            rho = u[e, q, 0]
            ke = 0.0
            for d in range(D):
                ke += u[e, q, 1 + d] * u[e, q, 1 + d]
            denom = rho if rho > 0.0 else 1.0
            p = gm1 * (u[e, q, M - 1] - 0.5 * ke / denom)
            if rho <= 0.0 or p <= 0.0:
                code = e * Q + q
                if code < local_bad:
                    local_bad = code
            ep = u[e, q, M - 1] + p
            for d in range(D):
                vd = u[e, q, 1 + d] / denom
                qd = q * D + d
                out[e, 0, qd] = u[e, q, 1 + d] - fbar[0, d]
                for j in range(D):
                    if j == d:
                        out[e, 1 + j, qd] = (u[e, q, 1 + j] * vd + p) \
                            - fbar[1 + j, d]
                    else:
                        out[e, 1 + j, qd] = u[e, q, 1 + j] * vd - fbar[1 + j, d]
                out[e, M - 1, qd] = ep * vd - fbar[M - 1, d]
        bad = min(bad, local_bad)
    return bad if bad < sentinel else -1


@njit(cache=True)
def gather_faces_dev_euler(fhat, elem_face_idx, means, slot_normals, gamma,
                           out):
    """Gather face fluxes per element, minus the element's own mean flux
    through each face normal (computed with the same arithmetic as the
    Lax-Friedrichs kernel reduces to on equal states, so constant regions
    cancel bitwise).  out[e, c, s*Q + q].
    """
    E, S = elem_face_idx.shape
    F, Q, M = fhat.shape
    D = M - 2
    gm1 = gamma - 1.0
    fbar = np.empty(M)
    for e in range(E):
        rho = means[e, 0]
        ke = 0.0
        for d in range(D):
            ke += means[e, 1 + d] * means[e, 1 + d]
        denom = rho if rho > 0.0 else 1.0
        p = gm1 * (means[e, M - 1] - 0.5 * ke / denom)
        for s in range(S):
            f = elem_face_idx[e, s]
            qn = 0.0
            for d in range(D):
                qn += means[e, 1 + d] * slot_normals[e, s, d]
            ql = qn / denom
            fbar[0] = means[e, 0] * ql
            for j in range(D):
                fbar[1 + j] = means[e, 1 + j] * ql + p * slot_normals[e, s, j]
            fbar[M - 1] = (means[e, M - 1] + p) * ql
            for q in range(Q):
                for c in range(M):
                    out[e, c, s * Q + q] = fhat[f, q, c] - fbar[c]
    return out


@njit(cache=True)
def euler_flux_packed(u, gamma, out):
    """Full Euler flux written straight into the (E, M, Q*D) layout the
    volume matmul consumes.  Returns the first inadmissible flattened
    (e*Q + q) index, or -1."""
    E, Q, M = u.shape
    D = M - 2
    gm1 = gamma - 1.0
    sentinel = E * Q
    bad = sentinel
    for e in range(E):
        local_bad = sentinel
        for q in range(Q):
            rho = u[e, q, 0]
            ke = 0.0
            for d in range(D):
                ke += u[e, q, 1 + d] * u[e, q, 1 + d]
            denom = rho if rho > 0.0 else 1.0
            p = gm1 * (u[e, q, M - 1] - 0.5 * ke / denom)
            if rho <= 0.0 or p <= 0.0:
                code = e * Q + q
                if code < local_bad:
                    local_bad = code
            ep = u[e, q, M - 1] + p
            for d in range(D):
                vd = u[e, q, 1 + d] / denom
                qd = q * D + d
                out[e, 0, qd] = u[e, q, 1 + d]
                for j in range(D):
                    out[e, 1 + j, qd] = u[e, q, 1 + j] * vd
                out[e, 1 + d, qd] += p
                out[e, M - 1, qd] = ep * vd
        bad = min(bad, local_bad)
    return bad if bad < sentinel else -1


@njit(cache=True)
def euler_lf_faces(uL, uR, normals, alpha, gamma, out):
    """Lax-Friedrichs face flux 0.5 (f(uL)+f(uR)).n - 0.5 alpha (uR-uL).

    Returns the first inadmissible flattened (f*Q + q)*2 + side index,
    or -1."""
    F, Q, M = uL.shape
    D = M - 2
    gm1 = gamma - 1.0
    sentinel = F * Q * 2
    bad = sentinel
    for f in range(F):
        local_bad = sentinel
        for q in range(Q):
            rl = uL[f, q, 0]
            rr = uR[f, q, 0]
            kel = 0.0
            ker = 0.0
            qnl = 0.0
            qnr = 0.0
            for d in range(D):
                kel += uL[f, q, 1 + d] * uL[f, q, 1 + d]
                ker += uR[f, q, 1 + d] * uR[f, q, 1 + d]
                qnl += uL[f, q, 1 + d] * normals[f, d]
                qnr += uR[f, q, 1 + d] * normals[f, d]
            dl = rl if rl > 0.0 else 1.0
            dr = rr if rr > 0.0 else 1.0
            pl = gm1 * (uL[f, q, M - 1] - 0.5 * kel / dl)
            pr = gm1 * (uR[f, q, M - 1] - 0.5 * ker / dr)
            if rl <= 0.0 or pl <= 0.0:
                code = (f * Q + q) * 2
                if code < local_bad:
                    local_bad = code
            if rr <= 0.0 or pr <= 0.0:
                code = (f * Q + q) * 2 + 1
                if code < local_bad:
                    local_bad = code
            ql = qnl / dl
            qr = qnr / dr
            out[f, q, 0] = 0.5 * (uL[f, q, 0] * ql + uR[f, q, 0] * qr
                                  - alpha * (uR[f, q, 0] - uL[f, q, 0]))
            for j in range(D):
                fl = uL[f, q, 1 + j] * ql + pl * normals[f, j]
                fr = uR[f, q, 1 + j] * qr + pr * normals[f, j]
                out[f, q, 1 + j] = 0.5 * (fl + fr - alpha * (uR[f, q, 1 + j]
                                                             - uL[f, q, 1 + j]))
            fl = (uL[f, q, M - 1] + pl) * ql
            fr = (uR[f, q, M - 1] + pr) * qr
            out[f, q, M - 1] = 0.5 * (fl + fr - alpha * (uR[f, q, M - 1]
                                                         - uL[f, q, M - 1]))
        bad = min(bad, local_bad)
    return bad if bad < sentinel else -1


@njit(cache=True)
def admissibility_scan(vals, gamma):
    """Per-cell minima of density and pressure over the node axis."""
    E, N, M = vals.shape
    D = M - 2
    gm1 = gamma - 1.0
    rho_min = np.empty(E)
    p_min = np.empty(E)
    for e in range(E):
        rm = np.inf
        pm = np.inf
        for n in range(N):
            rho = vals[e, n, 0]
            if rho < rm:
                rm = rho
            ke = 0.0
            for d in range(D):
                ke += vals[e, n, 1 + d] * vals[e, n, 1 + d]
            denom = rho if rho > 1e-300 else 1e-300
            p = gm1 * (vals[e, n, M - 1] - 0.5 * ke / denom)
            if p < pm:
                pm = p
        rho_min[e] = rm
        p_min[e] = pm
    return rho_min, p_min


@njit(cache=True)
def baseline_is0(members, valid, q):
    """min over substencils of the max |q0 - q_member| (the MR baseline)."""
    E, S, Mm = members.shape
    out = np.empty(E)
    for e in range(E):
        q0 = q[e]
        best = np.inf
        for s in range(S):
            if not valid[e, s]:
                continue
            worst = 0.0
            for m in range(Mm):
                idx = members[e, s, m]
                if idx >= 0:
                    d = abs(q0 - q[idx])
                    if d > worst:
                        worst = d
            if worst < best:
                best = worst
        out[e] = best
    return out


@njit(cache=True)
def deriv_sum_range(data, coeff_all, comp, lo, hi, cells):
    """IS^r core: L1 norm of the degree-r local monomial coefficients."""
    n = len(cells)
    nm = data.shape[2]
    out = np.empty(n)
    for i in range(n):
        e = cells[i]
        acc = 0.0
        for s in range(lo, hi):
            a = 0.0
            for m in range(nm):
                a += data[e, comp, m] * coeff_all[e, m, s]
            acc += abs(a)
        out[i] = acc
    return out


@njit(cache=True)
def zero_mode_range(data, cells, lo, hi):
    M = data.shape[1]
    for i in range(len(cells)):
        e = cells[i]
        for c in range(M):
            for m in range(lo, hi):
                data[e, c, m] = 0.0


@njit(cache=True)
def mr_rebuild_2d_euler(cells, data, avgs, pair_nbrs, pair_inv, pair_good,
                        grads, lin_map, gamma, characteristic):
    """Fused minmod rebuild for 2D Euler slope-limited cells.

    Per cell: slope candidates from the precomputed pair systems, one
    characteristic decomposition in the density-gradient direction
    (componentwise when the gradient degenerates or characteristic == 0),
    minmod per field and slope axis, and the linear-mode write-back.
    Mean coefficients are never touched.
    """
    n = len(cells)
    P = pair_nbrs.shape[1]
    M = data.shape[1]
    nm = data.shape[2]
    gm1 = gamma - 1.0
    cand = np.empty((P, 2, M))
    char = np.empty((P, 2, M))
    lim = np.empty((2, M))
    phys = np.empty((M, 2))
    L = np.empty((M, M))
    R = np.empty((M, M))
    for i in range(n):
        e = cells[i]
        # zero all modes above the mean; the rebuild fills the linear ones
        for c in range(M):
            for m in range(1, nm):
                data[e, c, m] = 0.0
        nonzero = False
        for p in range(P):
            if not pair_good[e, p]:
                continue
            na = pair_nbrs[e, p, 0]
            nb = pair_nbrs[e, p, 1]
            for c in range(M):
                dba = avgs[na, c] - avgs[e, c]
                dbb = avgs[nb, c] - avgs[e, c]
                a1 = pair_inv[e, p, 0, 0] * dba + pair_inv[e, p, 0, 1] * dbb
                a2 = pair_inv[e, p, 1, 0] * dba + pair_inv[e, p, 1, 1] * dbb
                cand[p, 0, c] = a1
                cand[p, 1, c] = a2
                if a1 != 0.0 or a2 != 0.0:
                    nonzero = True
        if not nonzero:
            continue

        use_char = characteristic == 1
        if use_char:
            gx = grads[i, 0]
            gy = grads[i, 1]
            gn = np.sqrt(gx * gx + gy * gy)
            rho = avgs[e, 0]
            if gn > 1e-12 * (abs(rho) + 1e-300):
                nx = gx / gn
                ny = gy / gn
                mx = avgs[e, 1]
                my = avgs[e, 2]
                en = avgs[e, 3]
                u = mx / rho
                v = my / rho
                ke = 0.5 * (u * u + v * v)
                p_ = gm1 * (en - rho * ke)
                c2 = gamma * p_ / rho
                c_ = np.sqrt(c2)
                H = (en + p_) / rho
                q = u * nx + v * ny
                tx = -ny
                ty = nx
                w = u * tx + v * ty
                b1 = gm1 / c2
                b2 = b1 * ke
                qc = q / c_
                L[0, 0] = 0.5 * (b2 + qc)
                L[0, 1] = -0.5 * (b1 * u + nx / c_)
                L[0, 2] = -0.5 * (b1 * v + ny / c_)
                L[0, 3] = 0.5 * b1
                L[1, 0] = 1.0 - b2
                L[1, 1] = b1 * u
                L[1, 2] = b1 * v
                L[1, 3] = -b1
                L[2, 0] = -w
                L[2, 1] = tx
                L[2, 2] = ty
                L[2, 3] = 0.0
                L[3, 0] = 0.5 * (b2 - qc)
                L[3, 1] = -0.5 * (b1 * u - nx / c_)
                L[3, 2] = -0.5 * (b1 * v - ny / c_)
                L[3, 3] = 0.5 * b1
                R[0, 0] = 1.0
                R[1, 0] = u - c_ * nx
                R[2, 0] = v - c_ * ny
                R[3, 0] = H - c_ * q
                R[0, 1] = 1.0
                R[1, 1] = u
                R[2, 1] = v
                R[3, 1] = ke
                R[0, 2] = 0.0
                R[1, 2] = tx
                R[2, 2] = ty
                R[3, 2] = w
                R[0, 3] = 1.0
                R[1, 3] = u + c_ * nx
                R[2, 3] = v + c_ * ny
                R[3, 3] = H + c_ * q
            else:
                use_char = False

        if use_char:
            for p in range(P):
                if not pair_good[e, p]:
                    continue
                for d in range(2):
                    for c in range(M):
                        acc = 0.0
                        for j in range(M):
                            acc += L[c, j] * cand[p, d, j]
                        char[p, d, c] = acc
            src = char
        else:
            src = cand

        for d in range(2):
            for c in range(M):
                lo = np.inf
                hi = -np.inf
                for p in range(P):
                    if not pair_good[e, p]:
                        continue
                    vv = src[p, d, c]
                    if vv < lo:
                        lo = vv
                    if vv > hi:
                        hi = vv
                if lo > 0.0 and np.isfinite(lo):
                    lim[d, c] = lo
                elif hi < 0.0 and np.isfinite(hi):
                    lim[d, c] = hi
                else:
                    lim[d, c] = 0.0

        if use_char:
            for c in range(M):
                for d in range(2):
                    acc = 0.0
                    for j in range(M):
                        acc += R[c, j] * lim[d, j]
                    phys[c, d] = acc
        else:
            for c in range(M):
                phys[c, 0] = lim[0, c]
                phys[c, 1] = lim[1, c]

        for c in range(M):
            data[e, c, 1] = lin_map[e, 0, 0] * phys[c, 0] \
                + lin_map[e, 0, 1] * phys[c, 1]
            data[e, c, 2] = lin_map[e, 1, 0] * phys[c, 0] \
                + lin_map[e, 1, 1] * phys[c, 1]


@njit(cache=True)
def gather_faces(fhat, elem_face_idx, out):
    """out[e, c, s*Q + q] = fhat[elem_face_idx[e, s], q, c]."""
    E, S = elem_face_idx.shape
    F, Q, M = fhat.shape
    for e in range(E):
        for s in range(S):
            f = elem_face_idx[e, s]
            for q in range(Q):
                for c in range(M):
                    out[e, c, s * Q + q] = fhat[f, q, c]
    return out


@njit(cache=True)
def gather_traces(u_all, owners, gidx, out):
    """out[f, q, :] = u_all[owners[f], gidx[f, q], :]."""
    F, Q = gidx.shape
    M = u_all.shape[2]
    for f in range(F):
        e = owners[f]
        for q in range(Q):
            g = gidx[f, q]
            for c in range(M):
                out[f, q, c] = u_all[e, g, c]
    return out


@njit(cache=True)
def gather_traces_subset(u_all, faces, owners, gidx, out):
    """Like gather_traces but only for the listed faces."""
    Q = gidx.shape[1]
    M = u_all.shape[2]
    for i in range(len(faces)):
        f = faces[i]
        e = owners[f]
        for q in range(Q):
            g = gidx[f, q]
            for c in range(M):
                out[f, q, c] = u_all[e, g, c]
    return out
