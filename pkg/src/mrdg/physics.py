"""Conservation-law models: linear advection and compressible Euler (1D/2D).

States are conservative vectors on the trailing axis, so every function
broadcasts over arbitrary leading (element, node) axes.  Euler components
are ordered (rho, rho*u[, rho*v], E) with E the total energy per volume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class AdmissibilityError(Exception):
    """Non-physical state (rho <= 0 or p <= 0) encountered."""

    def __init__(self, msg, element=None, node=None, state=None):
        super().__init__(msg)
        self.element = element
        self.node = node
        self.state = state


@dataclass
class LinearAdvection:
    """u_t + div(a u) = 0 with constant velocity ``a``."""

    velocity: tuple = (1.0,)

    @property
    def dim(self):
        return len(self.velocity)

    n_comp = 1

    def flux(self, u):
        a = np.asarray(self.velocity)
        return u[..., None] * a          # (..., 1, D)

    def directional_flux(self, u, n):
        a = float(np.dot(self.velocity, np.asarray(n, dtype=float)))
        return a * u

    def max_signal(self, u, sound_included=True):
        a = np.linalg.norm(self.velocity)
        return np.full(u.shape[:-1], a)

    def admissible(self, u):
        return np.isfinite(u[..., 0])

    def left_eigenvectors(self, mean, n):
        return np.ones(mean.shape[:-1] + (1, 1))

    def right_eigenvectors(self, mean, n):
        return np.ones(mean.shape[:-1] + (1, 1))

    def velocity_at(self, u):
        v = np.asarray(self.velocity, dtype=float)
        return np.broadcast_to(v, u.shape[:-1] + (self.dim,))


@dataclass
class Euler:
    """Compressible Euler equations for an ideal gas."""

    dim: int = 1
    gamma: float = 1.4

    @property
    def n_comp(self):
        return self.dim + 2

    # -- state algebra -------------------------------------------------------

    def primitive(self, u):
        """(rho, velocity..., p) from conservative."""
        rho = u[..., 0]
        vel = u[..., 1:1 + self.dim] / rho[..., None]
        ke = 0.5 * rho * np.sum(vel * vel, axis=-1)
        p = (self.gamma - 1.0) * (u[..., -1] - ke)
        return rho, vel, p

    def conservative(self, rho, vel, p):
        rho = np.asarray(rho, dtype=float)
        vel = np.asarray(vel, dtype=float)
        if vel.ndim == rho.ndim:
            vel = vel[..., None]
        E = p / (self.gamma - 1.0) + 0.5 * rho * np.sum(vel * vel, axis=-1)
        return np.concatenate([rho[..., None], rho[..., None] * vel, E[..., None]],
                              axis=-1)

    def pressure(self, u):
        return self.primitive(u)[2]

    def sound_speed(self, u):
        rho, _, p = self.primitive(u)
        return np.sqrt(self.gamma * p / rho)

    def admissible(self, u):
        rho, _, p = self.primitive(u)
        return (rho > 0) & (p > 0)

    def velocity_at(self, u):
        return u[..., 1:1 + self.dim] / u[..., 0:1]

    # -- fluxes ---------------------------------------------------------------

    def flux(self, u):
        """Full flux tensor (..., M, D)."""
        rho, vel, p = self.primitive(u)
        M = self.n_comp
        out = np.empty(u.shape[:-1] + (M, self.dim))
        for d in range(self.dim):
            q = vel[..., d]
            out[..., 0, d] = rho * q
            for j in range(self.dim):
                out[..., 1 + j, d] = rho * vel[..., j] * q
            out[..., 1 + d, d] += p
            out[..., -1, d] = (u[..., -1] + p) * q
        return out

    def directional_flux(self, u, n):
        rho, vel, p = self.primitive(u)
        if np.any(rho <= 0) or np.any(p <= 0):
            bad = np.nonzero(np.atleast_1d(~((rho > 0) & (p > 0))))
            idx = tuple(int(b[0]) for b in bad)
            raise AdmissibilityError(
                f"inadmissible state passed to flux at index {idx}",
                state=np.atleast_2d(u)[idx[:1]])
        n = np.asarray(n, dtype=float)
        q = np.sum(vel * n[..., None, :] if n.ndim < vel.ndim else vel * n, axis=-1) \
            if n.ndim > 1 else vel @ n
        out = np.empty_like(u)
        out[..., 0] = rho * q
        for j in range(self.dim):
            nj = n[..., j] if n.ndim > 1 else n[j]
            out[..., 1 + j] = rho * vel[..., j] * q + p * nj
        out[..., -1] = (u[..., -1] + p) * q
        return out

    def max_signal(self, u, sound_included=True):
        rho, vel, p = self.primitive(u)
        if np.any(rho <= 0) or np.any(p <= 0):
            bad = np.nonzero(~((rho > 0) & (p > 0)))
            idx = tuple(b[0] for b in bad)
            raise AdmissibilityError(
                f"inadmissible state in wave-speed evaluation at index {idx}",
                element=idx[0] if idx else None, state=np.asarray(u)[idx])
        c = np.sqrt(self.gamma * p / rho)
        return np.sqrt(np.sum(vel * vel, axis=-1)) + c

    # -- eigenstructure --------------------------------------------------------

    def _eig_parts(self, mean, n):
        rho, vel, p = self.primitive(mean)
        if np.any(p <= 0) or np.any(rho <= 0):
            raise AdmissibilityError("inadmissible mean state in eigen-decomposition",
                                     state=mean)
        c = np.sqrt(self.gamma * p / rho)
        n = np.asarray(n, dtype=float)
        n = np.broadcast_to(n, vel.shape)
        q = np.sum(vel * n, axis=-1)
        H = (mean[..., -1] + p) / rho
        return vel, p, c, n, q, H

    def right_eigenvectors(self, mean, n):
        """Columns span the characteristic fields in unit direction ``n``."""
        mean = np.asarray(mean, dtype=float)
        vel, p, c, n, q, H = self._eig_parts(mean, n)
        M = self.n_comp
        R = np.zeros(mean.shape[:-1] + (M, M))
        v2 = 0.5 * np.sum(vel * vel, axis=-1)
        if self.dim == 1:
            u = vel[..., 0]
            nx = n[..., 0]
            R[..., 0, 0] = 1.0
            R[..., 1, 0] = u - c * nx
            R[..., 2, 0] = H - c * q
            R[..., 0, 1] = 1.0
            R[..., 1, 1] = u
            R[..., 2, 1] = v2
            R[..., 0, 2] = 1.0
            R[..., 1, 2] = u + c * nx
            R[..., 2, 2] = H + c * q
        else:
            u, v = vel[..., 0], vel[..., 1]
            nx, ny = n[..., 0], n[..., 1]
            tx, ty = -ny, nx
            w = u * tx + v * ty
            R[..., 0, 0] = 1.0
            R[..., 1, 0] = u - c * nx
            R[..., 2, 0] = v - c * ny
            R[..., 3, 0] = H - c * q
            R[..., 0, 1] = 1.0
            R[..., 1, 1] = u
            R[..., 2, 1] = v
            R[..., 3, 1] = v2
            R[..., 1, 2] = tx
            R[..., 2, 2] = ty
            R[..., 3, 2] = w
            R[..., 0, 3] = 1.0
            R[..., 1, 3] = u + c * nx
            R[..., 2, 3] = v + c * ny
            R[..., 3, 3] = H + c * q
        return R

    def left_eigenvectors(self, mean, n):
        mean = np.asarray(mean, dtype=float)
        vel, p, c, n, q, H = self._eig_parts(mean, n)
        M = self.n_comp
        L = np.zeros(mean.shape[:-1] + (M, M))
        b1 = (self.gamma - 1.0) / (c * c)
        b2 = 0.5 * b1 * np.sum(vel * vel, axis=-1)
        if self.dim == 1:
            u = vel[..., 0]
            nx = n[..., 0]
            uc = q / c
            L[..., 0, 0] = 0.5 * (b2 + uc)
            L[..., 0, 1] = -0.5 * (b1 * u + nx / c)
            L[..., 0, 2] = 0.5 * b1
            L[..., 1, 0] = 1.0 - b2
            L[..., 1, 1] = b1 * u
            L[..., 1, 2] = -b1
            L[..., 2, 0] = 0.5 * (b2 - uc)
            L[..., 2, 1] = -0.5 * (b1 * u - nx / c)
            L[..., 2, 2] = 0.5 * b1
        else:
            u, v = vel[..., 0], vel[..., 1]
            nx, ny = n[..., 0], n[..., 1]
            tx, ty = -ny, nx
            w = u * tx + v * ty
            qc = q / c
            L[..., 0, 0] = 0.5 * (b2 + qc)
            L[..., 0, 1] = -0.5 * (b1 * u + nx / c)
            L[..., 0, 2] = -0.5 * (b1 * v + ny / c)
            L[..., 0, 3] = 0.5 * b1
            L[..., 1, 0] = 1.0 - b2
            L[..., 1, 1] = b1 * u
            L[..., 1, 2] = b1 * v
            L[..., 1, 3] = -b1
            L[..., 2, 0] = -w
            L[..., 2, 1] = tx
            L[..., 2, 2] = ty
            L[..., 3, 0] = 0.5 * (b2 - qc)
            L[..., 3, 1] = -0.5 * (b1 * u - nx / c)
            L[..., 3, 2] = -0.5 * (b1 * v - ny / c)
            L[..., 3, 3] = 0.5 * b1
        return L


    def eigenvector_pair(self, mean, n):
        """(L, R) with shared primitive evaluation; L @ R = I."""
        return self.left_eigenvectors(mean, n), self.right_eigenvectors(mean, n)


def euler_flux(state, direction, gamma=1.4):
    """Directional Euler flux F.n; raises on an inadmissible state."""
    state = np.asarray(state, dtype=float)
    dim = state.shape[-1] - 2
    model = Euler(dim=dim, gamma=gamma)
    return model.directional_flux(state, direction)


def lax_friedrichs_flux(model, uL, uR, n, alpha):
    """0.5 (f(uL) + f(uR)).n - 0.5 alpha (uR - uL)."""
    fL = model.directional_flux(uL, n)
    fR = model.directional_flux(uR, n)
    a = np.asarray(alpha)
    if a.ndim:
        a = a[..., None]
    return 0.5 * (fL + fR) - 0.5 * a * (np.asarray(uR) - np.asarray(uL))


def characteristic_transform(vectors, mean, n, model, forward=True):
    """Map M-vectors to characteristic fields (and back with forward=False)."""
    mat = model.left_eigenvectors(mean, n) if forward \
        else model.right_eigenvectors(mean, n)
    vectors = np.asarray(vectors, dtype=float)
    return np.einsum("...ij,...j->...i", mat, vectors)


def max_wave_speed(field, physics):
    """Largest |velocity| + sound speed over cell averages.

    Errors identify the offending cell when an average is inadmissible.
    """
    means = field.cell_averages()
    try:
        speeds = physics.max_signal(means)
    except AdmissibilityError as err:
        raise AdmissibilityError(
            f"inadmissible cell average: {err}", element=err.element,
            state=err.state) from err
    return float(np.max(speeds))
