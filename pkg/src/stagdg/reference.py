"""Reference solutions for benchmarking: exact Riemann solver, viscous
shock profile, advected vortex, smoothed discontinuous data and a 1D
radial finite-volume oracle for radially symmetric problems.

All routines are pure functions of their inputs and vectorize over
position arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf


class VacuumError(ValueError):
    """Raised when a Riemann problem generates vacuum."""


# ----------------------------------------------------------------------
# exact Riemann solver (two-wave solution of the 1D Euler equations)


@dataclass(frozen=True)
class RiemannState:
    """Left/right primitive data of a 1D Riemann problem.

    x0 is the initial discontinuity position and eps0 the width used when
    the jump is smoothed for projection onto a polynomial space.
    """

    rho_l: float
    u_l: float
    p_l: float
    rho_r: float
    u_r: float
    p_r: float
    gamma: float = 1.4
    t_end: float = 0.2
    x0: float = 0.0
    eps0: float = 2e-2

    def __post_init__(self):
        if min(self.rho_l, self.rho_r, self.p_l, self.p_r) <= 0.0:
            raise ValueError("densities and pressures must be positive")


#: standard 1D shock-tube suite: Sod, strong double shock, a Lax-type
#: problem, colliding shocks and a transonic (sonic-point) Sod variant.
RIEMANN_PROBLEMS = {
    "rp1": RiemannState(1.0, 0.0, 1.0, 0.125, 0.0, 0.1, t_end=0.2, x0=0.0, eps0=2e-2),
    "rp2": RiemannState(
        5.99924, 19.5975, 460.894, 5.99242, -6.19633, 46.095, t_end=0.035, x0=0.0, eps0=1e-2
    ),
    "rp3": RiemannState(0.445, 0.698, 3.528, 0.5, 0.0, 0.571, t_end=0.15, x0=0.0, eps0=5e-3),
    "rp4": RiemannState(1.0, 2.0, 0.1, 1.0, -2.0, 0.1, t_end=0.8, x0=0.0, eps0=1e-2),
    "rp5": RiemannState(1.0, 0.75, 1.0, 0.125, 0.0, 0.1, t_end=0.2, x0=-0.1, eps0=1e-2),
}


def _star_pressure(rl, ul, pl, rr, ur, pr, g, tol=1e-12, maxiter=200):
    """Vectorized Newton iteration for the star-region pressure."""
    rl, ul, pl, rr, ur, pr = np.broadcast_arrays(
        *(np.asarray(a, float) for a in (rl, ul, pl, rr, ur, pr))
    )
    cl = np.sqrt(g * pl / rl)
    cr = np.sqrt(g * pr / rr)
    if np.any(2.0 / (g - 1.0) * (cl + cr) <= ur - ul):
        raise VacuumError("Riemann problem generates vacuum")

    def side(p, rho, pk, c):
        # returns f_K(p) and its derivative for one side
        shock = p > pk
        ak = 2.0 / ((g + 1.0) * rho)
        bk = (g - 1.0) / (g + 1.0) * pk
        qs = np.sqrt(ak / (p + bk))
        fs = (p - pk) * qs
        dfs = qs * (1.0 - 0.5 * (p - pk) / (p + bk))
        pr_ = np.maximum(p / pk, 1e-300)
        fr_ = 2.0 * c / (g - 1.0) * (pr_ ** ((g - 1.0) / (2.0 * g)) - 1.0)
        dfr = pr_ ** (-(g + 1.0) / (2.0 * g)) / (rho * c)
        return np.where(shock, fs, fr_), np.where(shock, dfs, dfr)

    # two-rarefaction initial guess, positive-clipped
    z = (g - 1.0) / (2.0 * g)
    p = ((cl + cr - 0.5 * (g - 1.0) * (ur - ul)) / (cl / pl**z + cr / pr**z)) ** (1.0 / z)
    p = np.maximum(p, 1e-10)
    for _ in range(maxiter):
        fl, dl = side(p, rl, pl, cl)
        fr, dr = side(p, rr, pr, cr)
        f = fl + fr + (ur - ul)
        dp = f / (dl + dr)
        p_new = np.maximum(p - dp, 1e-14)
        if np.all(np.abs(p_new - p) <= tol * np.maximum(p, 1.0)):
            p = p_new
            break
        p = p_new
    fl, _ = side(p, rl, pl, cl)
    fr, _ = side(p, rr, pr, cr)
    u = 0.5 * (ul + ur) + 0.5 * (fr - fl)
    return p, u


def _sample(rl, ul, pl, rr, ur, pr, g, ps, us, xi):
    """Sample the two-wave solution at similarity coordinates xi = x/t."""
    rl, ul, pl, rr, ur, pr, ps, us, xi = np.broadcast_arrays(
        *(np.asarray(a, float) for a in (rl, ul, pl, rr, ur, pr, ps, us, xi))
    )
    cl = np.sqrt(g * pl / rl)
    cr = np.sqrt(g * pr / rr)
    gm, gp = g - 1.0, g + 1.0
    rho = np.empty_like(xi)
    u = np.empty_like(xi)
    p = np.empty_like(xi)

    left = xi <= us
    # --- left side of the contact
    shock_l = ps > pl
    rsl = rl * ((ps / pl + gm / gp) / (gm / gp * ps / pl + 1.0))
    sl = ul - cl * np.sqrt(gp / (2 * g) * ps / pl + gm / (2 * g))
    csl = cl * (ps / pl) ** (gm / (2 * g))
    head_l = ul - cl
    tail_l = us - csl
    fan_l = ~shock_l & (xi > head_l) & (xi < tail_l)
    ufan = 2.0 / gp * (cl + gm / 2.0 * ul + xi)
    cfan = 2.0 / gp * (cl + gm / 2.0 * (ul - xi))
    rfan = rl * (cfan / cl) ** (2.0 / gm)
    pfan = pl * (cfan / cl) ** (2.0 * g / gm)
    in_l = np.where(shock_l, xi <= sl, xi <= head_l)
    star_l = left & ~in_l & ~fan_l
    rho = np.where(left, np.where(in_l, rl, np.where(fan_l, rfan, np.where(shock_l, rsl, rl * (ps / pl) ** (1 / g)))), rho)
    u = np.where(left, np.where(in_l, ul, np.where(fan_l, ufan, us)), u)
    p = np.where(left, np.where(in_l, pl, np.where(fan_l, pfan, ps)), p)

    # --- right side of the contact
    right = ~left
    shock_r = ps > pr
    rsr = rr * ((ps / pr + gm / gp) / (gm / gp * ps / pr + 1.0))
    sr = ur + cr * np.sqrt(gp / (2 * g) * ps / pr + gm / (2 * g))
    csr = cr * (ps / pr) ** (gm / (2 * g))
    head_r = ur + cr
    tail_r = us + csr
    fan_r = ~shock_r & (xi < head_r) & (xi > tail_r)
    ufan_r = 2.0 / gp * (-cr + gm / 2.0 * ur + xi)
    cfan_r = 2.0 / gp * (cr - gm / 2.0 * (ur - xi))
    rfan_r = rr * (cfan_r / cr) ** (2.0 / gm)
    pfan_r = pr * (cfan_r / cr) ** (2.0 * g / gm)
    in_r = np.where(shock_r, xi >= sr, xi >= head_r)
    rho = np.where(right, np.where(in_r, rr, np.where(fan_r, rfan_r, np.where(shock_r, rsr, rr * (ps / pr) ** (1 / g)))), rho)
    u = np.where(right, np.where(in_r, ur, np.where(fan_r, ufan_r, us)), u)
    p = np.where(right, np.where(in_r, pr, np.where(fan_r, pfan_r, ps)), p)
    return rho, u, p


def exact_riemann(state: RiemannState, x, t):
    """Exact solution (rho, u, p) at positions x and time t > 0.

    The similarity solution is centred on state.x0.
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    g = state.gamma
    ps, us = _star_pressure(
        state.rho_l, state.u_l, state.p_l, state.rho_r, state.u_r, state.p_r, g
    )
    xi = (np.asarray(x, float) - state.x0) / t
    return _sample(
        state.rho_l, state.u_l, state.p_l,
        state.rho_r, state.u_r, state.p_r, g, ps, us, xi,
    )


def smooth_ic(q_l, q_r, x, x0, eps0):
    """Error-function blend of two states over a width eps0 around x0."""
    q_l = np.asarray(q_l, float)
    q_r = np.asarray(q_r, float)
    s = erf((np.asarray(x, float) - x0) / eps0)
    return 0.5 * (q_r + q_l) + 0.5 * (q_r - q_l) * s


# ----------------------------------------------------------------------
# exact viscous shock profile (Prandtl number 3/4, constant viscosity)


@dataclass(frozen=True)
class BeckerShock:
    """Traveling viscous shock wave of the Navier-Stokes equations.

    The upstream reference state (rho0, p0) defaults to a unit sound
    speed; the shock Reynolds number uses a unit reference length.
    """

    mach: float
    mu: float
    gamma: float = 1.4
    prandtl: float = 0.75
    rho0: float = 1.0
    p0: float = 1.0 / 1.4

    def __post_init__(self):
        if self.mach <= 1.0:
            raise ValueError("shock Mach number must exceed 1")

    @property
    def c0(self):
        return np.sqrt(self.gamma * self.p0 / self.rho0)

    @property
    def reynolds(self):
        return self.rho0 * self.c0 * self.mach / self.mu

    @property
    def lam2(self):
        g, m2 = self.gamma, self.mach**2
        return (1.0 + 0.5 * (g - 1.0) * m2) / (0.5 * (g + 1.0) * m2)


def becker_profile(shock: BeckerShock, x):
    """Stationary profile (rho, u, p) of the viscous shock at positions x.

    The dimensionless velocity solves a scalar algebraic equation on
    (lam2, 1) for each point; upstream (x -> -inf) the flow tends to the
    inflow state, downstream to the compressed state.
    """
    g, l2 = shock.gamma, shock.lam2
    ms = shock.mach
    k = 0.75 * shock.reynolds * (ms**2 - 1.0) / (g * ms**2)
    log_rhs0 = (1.0 - l2) * np.log((1.0 - l2) / 2.0)
    x = np.asarray(x, float)
    ub = np.empty(x.shape)
    lo = l2 * (1.0 + 1e-14) + 1e-300
    hi = 1.0 - 1e-15

    def res(u, lr):
        return np.log1p(-u) - l2 * np.log(u - l2) - lr

    for i, xi in np.ndenumerate(x):
        lr = log_rhs0 + k * xi
        if res(hi, lr) >= 0.0:
            ub[i] = hi  # far upstream: profile saturated at the inflow state
        elif res(lo, lr) <= 0.0:
            ub[i] = lo  # far downstream: saturated at the compressed state
        else:
            ub[i] = brentq(res, lo, hi, args=(lr,), xtol=1e-14, rtol=8.9e-16)
    pb = 1.0 - ub + (g + 1.0) / (2.0 * g * (g - 1.0)) * (ub - 1.0) / ub * (ub - l2)
    rho = shock.rho0 / ub
    u = ms * shock.c0 * ub
    p = shock.p0 + shock.rho0 * shock.c0**2 * ms**2 * pb
    return rho, u, p


def becker_traveling(shock: BeckerShock, x, t, x0=0.25):
    """Shock initially centred at x0, moving right into a medium at rest."""
    s = shock.mach * shock.c0
    xi = -(np.asarray(x, float) - x0 - s * t)
    rho, u_st, p = becker_profile(shock, xi)
    return rho, s - u_st, p


# ----------------------------------------------------------------------
# advected isentropic vortex


def vortex_state(x, y, t, eps=5.0, gamma=1.4, center=(0.0, 0.0), v_inf=(1.0, 1.0),
                 standard_pressure=False):
    """Smooth vortex advected rigidly by the background velocity.

    Background state is (1, v_inf, 1).  The density and pressure
    perturbations share the exponent 1/(gamma-1); standard_pressure
    switches the pressure to the isentropic exponent gamma/(gamma-1).
    """
    xr = np.asarray(x, float) - center[0] - v_inf[0] * t
    yr = np.asarray(y, float) - center[1] - v_inf[1] * t
    r2 = xr**2 + yr**2
    dT = -(gamma - 1.0) * eps**2 / (8.0 * gamma * np.pi**2) * np.exp(1.0 - r2)
    du = -eps / (2.0 * np.pi) * np.exp(0.5 * (1.0 - r2)) * yr
    dv = eps / (2.0 * np.pi) * np.exp(0.5 * (1.0 - r2)) * xr
    rho = (1.0 + dT) ** (1.0 / (gamma - 1.0))
    if standard_pressure:
        p = (1.0 + dT) ** (gamma / (gamma - 1.0))
    else:
        p = rho.copy()
    return rho, v_inf[0] + du, v_inf[1] + dv, p


# ----------------------------------------------------------------------
# 1D radial finite-volume oracle (MUSCL-TVD, Godunov flux)


def _minmod(a, b):
    return np.where(a * b > 0.0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def radial_reference(ic, t_end, n_cells=10_000, r_max=1.5, gamma=1.4, cfl=0.4):
    """Second-order TVD finite-volume solution of the radial Euler system.

    ic(r) must return (rho, u_r, p) profiles.  The cylindrical geometric
    source -1/r * (rho u, rho u^2, u (E + p)) is integrated unsplit with
    a two-stage TVD Runge-Kutta scheme; interface fluxes are Godunov
    fluxes from the exact Riemann solver.  Returns (r, rho, u, p).
    """
    dr = r_max / n_cells
    r = (np.arange(n_cells) + 0.5) * dr
    rho, u, p = (np.asarray(a, float).copy() for a in ic(r))
    g = gamma

    def cons(rho, u, p):
        return np.stack([rho, rho * u, p / (g - 1.0) + 0.5 * rho * u**2])

    def prim(U):
        rho = U[0]
        u = U[1] / rho
        p = (g - 1.0) * (U[2] - 0.5 * rho * u**2)
        return rho, u, p

    def rhs(U):
        rho, u, p = prim(U)
        W = np.stack([rho, u, p])
        # reflective ghost at the axis, outflow at r_max
        Wg = np.concatenate([W[:, 1::-1], W, W[:, -1:], W[:, -1:]], axis=1)
        Wg[1, :2] *= -1.0
        d = _minmod(Wg[:, 1:-1] - Wg[:, :-2], Wg[:, 2:] - Wg[:, 1:-1])
        wl = (Wg[:, 1:-1] + 0.5 * d)[:, :-1]  # left of each interface
        wr = (Wg[:, 1:-1] - 0.5 * d)[:, 1:]
        ps, us = _star_pressure(wl[0], wl[1], wl[2], wr[0], wr[1], wr[2], g, tol=1e-10, maxiter=40)
        rf, uf, pf = _sample(wl[0], wl[1], wl[2], wr[0], wr[1], wr[2], g, ps, us, 0.0)
        Ef = pf / (g - 1.0) + 0.5 * rf * uf**2
        F = np.stack([rf * uf, rf * uf**2 + pf, uf * (Ef + pf)])
        E = U[2]
        src = -np.stack([rho * u, rho * u**2, u * (E + p)]) / r
        return -(F[:, 1:] - F[:, :-1]) / dr + src

    U = cons(rho, u, p)
    t = 0.0
    while t < t_end - 1e-14:
        rho, u, p = prim(U)
        smax = np.max(np.abs(u) + np.sqrt(g * p / rho))
        dt = min(cfl * dr / smax, t_end - t)
        U1 = U + dt * rhs(U)
        U = 0.5 * (U + U1 + dt * rhs(U1))
        t += dt
    rho, u, p = prim(U)
    return r, rho, u, p
