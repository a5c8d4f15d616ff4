"""Exact solutions and accuracy metrics for the benchmark suite.

Provides exact transport for linear advection, the smooth Euler solution
generated by a scalar Burgers equation (gamma = 3 isentropic flow), a full
two-wave exact Riemann solver with a vacuum branch, error norms against
exact cell averages / cell centers, convergence tables and
overshoot/oscillation metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .basis import DGSpace, ModalField, exact_cell_averages
from .mesh import Mesh


class SolutionError(Exception):
    pass


# ---------------------------------------------------------------------------
# exact solutions


def exact_advection(u0, t, domain):
    """Periodic transport: x -> u0(wrap(x - t)) on [a, b]."""
    a, b = domain
    length = b - a

    def solution(x):
        x = np.asarray(x, dtype=float)
        shifted = np.mod(x - t - a, length) + a
        return u0(shifted)

    return solution


BURGERS_BREAK_TIME = 5.0 * np.sqrt(3.0) / (6.0 * np.pi)


def exact_burgers_euler(x, t, gamma=3.0, newton_tol=1e-14, max_iter=60):
    """Smooth gamma=3 Euler solution via the characteristic equation.

    Density solves rho_t + (sqrt(gamma) rho^2)_x = 0 with initial profile
    1 + 0.2 sin(pi x); velocity and pressure follow as sqrt(gamma) rho and
    rho^gamma.  Valid before the breakdown time 5 sqrt(3)/(6 pi); a damped
    Newton iteration solves rho = rho0(x - 2 sqrt(gamma) rho t).
    """
    if gamma != 3.0:
        raise SolutionError("this exact solution is specific to gamma = 3")
    if t >= BURGERS_BREAK_TIME:
        raise SolutionError(
            f"no smooth solution at t = {t} >= {BURGERS_BREAK_TIME:.6f}")
    sq = np.sqrt(gamma)
    x = np.asarray(x, dtype=float)

    def rho0(z):
        return 1.0 + 0.2 * np.sin(np.pi * z)

    def drho0(z):
        return 0.2 * np.pi * np.cos(np.pi * z)

    rho = rho0(x)
    res = rho - rho0(x - 2.0 * sq * rho * t)
    for _ in range(max_iter):
        if np.max(np.abs(res)) < newton_tol:
            break
        z = x - 2.0 * sq * rho * t
        dres = 1.0 + 2.0 * sq * t * drho0(z)
        step = res / dres
        lam = np.ones_like(rho)
        for _ in range(40):
            trial = rho - lam * step
            tres = trial - rho0(x - 2.0 * sq * trial * t)
            worse = np.abs(tres) > np.abs(res)
            if not np.any(worse):
                break
            lam = np.where(worse, 0.5 * lam, lam)
        rho = rho - lam * step
        res = rho - rho0(x - 2.0 * sq * rho * t)
    if np.max(np.abs(res)) > 1e-10:
        raise SolutionError("characteristic equation did not converge")
    u = sq * rho
    p = rho ** gamma
    return rho, u, p


@dataclass
class RiemannSolution:
    p_star: float
    u_star: float
    rho_star_l: float
    rho_star_r: float
    vacuum: bool
    left: tuple
    right: tuple
    gamma: float

    def wave_speeds(self):
        """(left head, left tail, contact, right tail, right head)."""
        rl, ul, pl = self.left
        rr, ur, pr = self.right
        g = self.gamma
        cl = np.sqrt(g * pl / rl)
        cr = np.sqrt(g * pr / rr)
        if self.vacuum:
            return (ul - cl, ul + 2 * cl / (g - 1), None,
                    ur - 2 * cr / (g - 1), ur + cr)
        if self.p_star > pl:
            sl_h = sl_t = ul - cl * np.sqrt((g + 1) / (2 * g) * self.p_star / pl
                                            + (g - 1) / (2 * g))
        else:
            cls = cl * (self.p_star / pl) ** ((g - 1) / (2 * g))
            sl_h, sl_t = ul - cl, self.u_star - cls
        if self.p_star > pr:
            sr_t = sr_h = ur + cr * np.sqrt((g + 1) / (2 * g) * self.p_star / pr
                                            + (g - 1) / (2 * g))
        else:
            crs = cr * (self.p_star / pr) ** ((g - 1) / (2 * g))
            sr_t, sr_h = self.u_star + crs, ur + cr
        return sl_h, sl_t, self.u_star, sr_t, sr_h


def _pressure_fn(p, rho_k, p_k, c_k, gamma):
    """(f_K, f_K') of the standard two-wave pressure function."""
    if p > p_k:
        a = 2.0 / ((gamma + 1) * rho_k)
        b = (gamma - 1) / (gamma + 1) * p_k
        root = np.sqrt(a / (p + b))
        return (p - p_k) * root, root * (1.0 - 0.5 * (p - p_k) / (p + b))
    pr = p / p_k
    f = 2.0 * c_k / (gamma - 1) * (pr ** ((gamma - 1) / (2 * gamma)) - 1.0)
    df = pr ** (-(gamma + 1) / (2 * gamma)) / (rho_k * c_k)
    return f, df


def solve_riemann(left, right, gamma=1.4, tol=1e-14, max_iter=100):
    """Star state of the Riemann problem from primitive (rho, u, p) states."""
    rl, ul, pl = map(float, left)
    rr, ur, pr = map(float, right)
    if min(rl, rr) <= 0 or min(pl, pr) <= 0:
        raise SolutionError("Riemann data must have positive density and pressure")
    cl = np.sqrt(gamma * pl / rl)
    cr = np.sqrt(gamma * pr / rr)
    du_crit = 2.0 * cl / (gamma - 1) + 2.0 * cr / (gamma - 1)
    if ur - ul >= du_crit * (1.0 - 1e-12):
        return RiemannSolution(0.0, 0.0, 0.0, 0.0, True,
                               (rl, ul, pl), (rr, ur, pr), gamma)
    # two-rarefaction initial guess, robust for strong rarefactions
    z = (gamma - 1) / (2 * gamma)
    p = ((cl + cr - 0.5 * (gamma - 1) * (ur - ul))
         / (cl / pl ** z + cr / pr ** z)) ** (1.0 / z)
    p = max(p, 1e-300)
    for _ in range(max_iter):
        fl, dfl = _pressure_fn(p, rl, pl, cl, gamma)
        fr, dfr = _pressure_fn(p, rr, pr, cr, gamma)
        g = fl + fr + (ur - ul)
        dp = -g / (dfl + dfr)
        p_new = p + dp
        if p_new <= 0:
            p_new = 0.5 * p
        if abs(p_new - p) < tol * max(p, 1e-300):
            p = p_new
            break
        p = p_new
    fl, _ = _pressure_fn(p, rl, pl, cl, gamma)
    fr, _ = _pressure_fn(p, rr, pr, cr, gamma)
    u = 0.5 * (ul + ur) + 0.5 * (fr - fl)
    if p > pl:
        rsl = rl * ((p / pl + (gamma - 1) / (gamma + 1))
                    / ((gamma - 1) / (gamma + 1) * p / pl + 1.0))
    else:
        rsl = rl * (p / pl) ** (1.0 / gamma)
    if p > pr:
        rsr = rr * ((p / pr + (gamma - 1) / (gamma + 1))
                    / ((gamma - 1) / (gamma + 1) * p / pr + 1.0))
    else:
        rsr = rr * (p / pr) ** (1.0 / gamma)
    return RiemannSolution(p, u, rsl, rsr, False, (rl, ul, pl), (rr, ur, pr), gamma)


def exact_riemann(left, right, gamma, xi):
    """Sample the exact Riemann solution at similarity coordinates x/t.

    Returns (rho, u, p) arrays.  Near-vacuum data takes the explicit vacuum
    branch, with a zero-density star region between the two fans.
    """
    sol = solve_riemann(left, right, gamma)
    xi = np.asarray(xi, dtype=float)
    rl, ul, pl = sol.left
    rr, ur, pr = sol.right
    g = gamma
    cl = np.sqrt(g * pl / rl)
    cr = np.sqrt(g * pr / rr)
    rho = np.empty_like(xi)
    u = np.empty_like(xi)
    p = np.empty_like(xi)

    def left_fan(xx):
        f = (2.0 / (g + 1) + (g - 1) / ((g + 1) * cl) * (ul - xx))
        return rl * f ** (2 / (g - 1)), \
            2.0 / (g + 1) * (cl + 0.5 * (g - 1) * ul + xx), \
            pl * f ** (2 * g / (g - 1))

    def right_fan(xx):
        f = (2.0 / (g + 1) - (g - 1) / ((g + 1) * cr) * (ur - xx))
        return rr * f ** (2 / (g - 1)), \
            2.0 / (g + 1) * (-cr + 0.5 * (g - 1) * ur + xx), \
            pr * f ** (2 * g / (g - 1))

    if sol.vacuum:
        sl_h, sl_t, _, sr_t, sr_h = sol.wave_speeds()
        regions = [
            (xi < sl_h, lambda xx: (np.full_like(xx, rl), np.full_like(xx, ul),
                                    np.full_like(xx, pl))),
            ((xi >= sl_h) & (xi < sl_t), left_fan),
            ((xi >= sl_t) & (xi <= sr_t), lambda xx: (np.zeros_like(xx), xx * 0.0,
                                                      np.zeros_like(xx))),
            ((xi > sr_t) & (xi <= sr_h), right_fan),
            (xi > sr_h, lambda xx: (np.full_like(xx, rr), np.full_like(xx, ur),
                                    np.full_like(xx, pr))),
        ]
        for mask, fn in regions:
            if np.any(mask):
                rho[mask], u[mask], p[mask] = fn(xi[mask])
        return rho, u, p

    sl_h, sl_t, us, sr_t, sr_h = sol.wave_speeds()
    left_of_contact = xi <= us
    # left side
    m = left_of_contact & (xi < sl_h)
    rho[m], u[m], p[m] = rl, ul, pl
    m = left_of_contact & (xi >= sl_h) & (xi < sl_t)
    if np.any(m):
        rho[m], u[m], p[m] = left_fan(xi[m])
    m = left_of_contact & (xi >= sl_t)
    rho[m], u[m], p[m] = sol.rho_star_l, us, sol.p_star
    # right side
    m = ~left_of_contact & (xi > sr_h)
    rho[m], u[m], p[m] = rr, ur, pr
    m = ~left_of_contact & (xi <= sr_h) & (xi > sr_t)
    if np.any(m):
        rho[m], u[m], p[m] = right_fan(xi[m])
    m = ~left_of_contact & (xi <= sr_t)
    rho[m], u[m], p[m] = sol.rho_star_r, us, sol.p_star
    return rho, u, p


# ---------------------------------------------------------------------------
# metrics


@dataclass
class ErrorReport:
    degree: int
    h: list = dc_field(default_factory=list)
    l1: list = dc_field(default_factory=list)
    l2: list = dc_field(default_factory=list)
    linf: list = dc_field(default_factory=list)
    l1_center: list = dc_field(default_factory=list)
    linf_center: list = dc_field(default_factory=list)

    def orders(self, which="linf_center"):
        e = np.asarray(getattr(self, which), dtype=float)
        h = np.asarray(self.h, dtype=float)
        return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))

    def fitted_order(self, which="linf_center"):
        e = np.log(np.asarray(getattr(self, which), dtype=float))
        h = np.log(np.asarray(self.h, dtype=float))
        return float(np.polyfit(h, e, 1)[0])

    def rows(self):
        out = []
        ords = [float("nan")] + self.orders()
        for i in range(len(self.h)):
            out.append((self.h[i], self.l1[i], self.l2[i], self.linf[i], ords[i]))
        return out


def error_norms(space: DGSpace, field: ModalField, exact_fn, component=0):
    """L1/L2/Linf of cell-average error plus cell-center errors.

    ``exact_fn`` maps points (n, D) to (n, M); exact averages use a
    quadrature at least two degrees beyond the field's own.
    """
    mesh = space.mesh
    exact_avg = exact_cell_averages(mesh, exact_fn,
                                    degree=2 * space.degree + 2)[:, component]
    avg = field.cell_averages()[:, component]
    diff = np.abs(avg - exact_avg)
    w = mesh.measures / mesh.measures.sum()
    l1 = float(np.sum(diff * w))
    l2 = float(np.sqrt(np.sum(diff ** 2 * w)))
    linf = float(diff.max())
    cc = space.cell_center_values(field)[:, component]
    exact_cc = np.atleast_2d(np.asarray(exact_fn(mesh.centroids)))[:, component] \
        if np.asarray(exact_fn(mesh.centroids)).ndim > 1 \
        else np.asarray(exact_fn(mesh.centroids))
    dcc = np.abs(cc - exact_cc)
    return {"l1": l1, "l2": l2, "linf": linf,
            "l1_center": float(np.sum(dcc * w)), "linf_center": float(dcc.max())}


def oscillation_metrics(field_avgs, measures, bounds=None, reference=None):
    """Overshoot/undershoot beyond data bounds, total variation, optional
    L1 distance to a piecewise-constant reference on an aligned finer grid.
    """
    avgs = np.asarray(field_avgs, dtype=float)
    out = {}
    if bounds is not None:
        lo, hi = bounds
        out["overshoot"] = float(max(0.0, avgs.max() - hi))
        out["undershoot"] = float(max(0.0, lo - avgs.min()))
    out["total_variation"] = float(np.sum(np.abs(np.diff(avgs))))
    if reference is not None:
        ref_avgs, ref_measures = reference
        out["l1_distance"] = l1_distance_piecewise(avgs, measures,
                                                   ref_avgs, ref_measures)
    return out


def l1_distance_piecewise(avgs, measures, ref_avgs, ref_measures):
    """L1 norm of the difference of two piecewise-constant 1D profiles.

    The reference grid must refine the coarse grid by an integer factor.
    """
    ratio = len(ref_avgs) // len(avgs)
    if ratio * len(avgs) != len(ref_avgs):
        raise ValueError("reference grid must be an integer refinement")
    ref = np.asarray(ref_avgs, dtype=float).reshape(len(avgs), ratio)
    rm = np.asarray(ref_measures, dtype=float).reshape(len(avgs), ratio)
    return float(np.sum(np.abs(ref - np.asarray(avgs)[:, None]) * rm))


def convergence_study(run_fn, ns, degree):
    """Run ``run_fn(n) -> (space, field, exact_fn)`` over a mesh ladder."""
    rep = ErrorReport(degree=degree)
    for n in ns:
        space, field, exact_fn = run_fn(n)
        e = error_norms(space, field, exact_fn)
        h = float(np.max(space.mesh.measures)) if space.mesh.dim == 1 \
            else float(np.max(space.mesh.measures) ** 0.5)
        rep.h.append(h)
        rep.l1.append(e["l1"])
        rep.l2.append(e["l2"])
        rep.linf.append(e["linf"])
        rep.l1_center.append(e["l1_center"])
        rep.linf_center.append(e["linf_center"])
    return rep


def write_convergence_csv(path, reports):
    """CSV table: k, h, L1, L2, Linf, order (order from Linf cell centers)."""
    lines = ["k,h,L1,L2,Linf,order"]
    for rep in reports:
        ords = [float("nan")] + rep.orders()
        for i in range(len(rep.h)):
            lines.append(f"{rep.degree},{rep.h[i]:.17g},{rep.l1[i]:.17g},"
                         f"{rep.l2[i]:.17g},{rep.linf[i]:.17g},{ords[i]:.6g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
