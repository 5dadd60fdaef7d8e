"""Global pressure system: matrix-free operator, CG and GMRES drivers.

Each outer iteration of the semi-implicit step eliminates the new momentum
from the discrete energy balance, leaving a linear system in the element
pressures alone.  The operator couples each element only to its three edge
neighbours (a block four-point stencil) and is applied matrix-free from the
precomputed gradient/divergence tables.  For piecewise-constant time bases
the operator is symmetric positive definite and CG is used; higher time
degrees lose symmetry and fall back to GMRES.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla


@dataclass
class KrylovReport:
    iterations: int
    residual: float
    converged: bool
    breakdown: bool = False


@dataclass
class PressureSystem:
    """Matrix-free linear system A x = b with optional preconditioner.

    ``apply`` and ``precond`` map arrays of the same shape as ``b``.
    """

    apply: Callable[[np.ndarray], np.ndarray]
    b: np.ndarray
    precond: Callable[[np.ndarray], np.ndarray] | None = None
    symmetric: bool = True
    tol: float = 1e-10
    maxiter: int = 1000
    restart: int = 30


def make_pressure_operator(ops, gas, dt, theta, h_dual):
    """Left-hand-side operator acting on pressure slabs (n_t, N_i, n_phi).

    h_dual: enthalpy field on the dual grid per time slice (n_t, N_e, n_psi).
    theta is honored for the piecewise-constant-in-time scheme and fixed to
    one otherwise (the space-time form has no free off-centering).
    """
    st = ops.st
    if st.p_gamma > 0:
        theta = 1.0
    tev = st.t_evolve
    tinv = st.t_evolve_inv
    w = st.time.weights
    gm1 = gas.gamma - 1.0
    # precompute Mbar^{-1} W_H Mbar^{-1} so each Krylov matvec is cheap
    wh = ops.weighted_dual_mass(h_dual)
    proj = np.einsum(
        "jnm,ajmk,jkl->ajnl", ops.Mbar_inv, wh, ops.Mbar_inv, optimize=True
    )

    def apply(p):
        mass = np.einsum("ab,inm,bim->ain", tev, ops.Ms, p, optimize=True) / gm1
        qp = ops.apply_Q(p)
        uc = np.einsum("ab,b,bjnd->ajnd", tinv, w, qp, optimize=True)
        flux = ops.apply_div(np.einsum("ajnm,ajmd->ajnd", proj, uc))
        return mass - (theta * dt) ** 2 * w[:, None, None] * flux

    def precond(r):
        d = np.einsum("a,inm,aim->ain", 1.0 / np.diag(tev), ops.Ms_inv, r) * gm1
        return d

    return apply, precond


def solve_cg(system: PressureSystem, x0: np.ndarray | None = None):
    """Preconditioned conjugate gradients on the (assumed SPD) system.

    Detects loss of positive curvature and flags it so the caller can fall
    back to GMRES.  Convergence is on the 2-norm of the true residual
    relative to ||b||.
    """
    b = system.b
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), KrylovReport(0, 0.0, True)
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - system.apply(x)
    res = float(np.linalg.norm(r))
    if res <= system.tol * bnorm:
        return x, KrylovReport(0, res / bnorm, True)
    prec = system.precond or (lambda v: v)
    z = prec(r)
    p = z.copy()
    rz = float(np.vdot(r.ravel(), z.ravel()).real)
    for it in range(1, system.maxiter + 1):
        ap = system.apply(p)
        pap = float(np.vdot(p.ravel(), ap.ravel()).real)
        if pap <= 0.0:
            return x, KrylovReport(it, res / bnorm, False, breakdown=True)
        alpha = rz / pap
        x = x + alpha * p
        r = r - alpha * ap
        res = float(np.linalg.norm(r))
        if res <= system.tol * bnorm:
            return x, KrylovReport(it, res / bnorm, True)
        z = prec(r)
        rz_new = float(np.vdot(r.ravel(), z.ravel()).real)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, KrylovReport(system.maxiter, res / bnorm, False)


def solve_gmres(system: PressureSystem, x0: np.ndarray | None = None):
    """Restarted GMRES via scipy on the flattened system."""
    shape = system.b.shape
    n = system.b.size

    def mv(v):
        return system.apply(v.reshape(shape)).ravel()

    lin = spla.LinearOperator((n, n), matvec=mv)
    mop = None
    if system.precond is not None:
        mop = spla.LinearOperator(
            (n, n), matvec=lambda v: system.precond(v.reshape(shape)).ravel()
        )
    count = [0]

    def cb(_):
        count[0] += 1

    bnorm = float(np.linalg.norm(system.b))
    if bnorm == 0.0:
        return np.zeros_like(system.b), KrylovReport(0, 0.0, True)
    x, info = spla.gmres(
        lin,
        system.b.ravel(),
        x0=None if x0 is None else x0.ravel(),
        rtol=system.tol,
        restart=system.restart,
        maxiter=system.maxiter,
        M=mop,
        callback=cb,
        callback_type="pr_norm",
    )
    x = x.reshape(shape)
    res = float(np.linalg.norm(system.b - system.apply(x))) / bnorm
    return x, KrylovReport(count[0], res, info == 0)


def solve_refined(system: PressureSystem, x0: np.ndarray | None = None,
                  max_ref: int = 8):
    """Iterative refinement with a direct-solver preconditioner.

    When ``system.precond`` applies an (approximate) factorization of the
    operator itself, a few Richardson sweeps reach the Krylov tolerance at
    the cost of one operator application each.  Falls back to GMRES from the
    refined iterate if the contraction stalls.
    """
    b = system.b
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), KrylovReport(0, 0.0, True)
    x = system.precond(b) if x0 is None else x0.copy()
    for it in range(max_ref + 1):
        r = b - system.apply(x)
        res = float(np.linalg.norm(r)) / bnorm
        if res <= system.tol:
            return x, KrylovReport(it, res, True)
        if it < max_ref:
            x = x + system.precond(r)
    return solve_gmres(system, x0=x)


def solve(system: PressureSystem, x0: np.ndarray | None = None):
    """CG when the system is symmetric, with GMRES fallback; else GMRES."""
    if system.symmetric:
        x, rep = solve_cg(system, x0)
        if rep.converged:
            return x, rep
        x, rep2 = solve_gmres(system, x0)
        rep2.breakdown = rep.breakdown
        return x, rep2
    return solve_gmres(system, x0)


def symmetry_diagnostic(system: PressureSystem, samples: int = 10, seed: int = 0):
    """Max over random pairs of |<Ax,y> - <x,Ay>| / (||Ax|| ||y||)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        x = rng.standard_normal(system.b.shape)
        y = rng.standard_normal(system.b.shape)
        ax = system.apply(x)
        ay = system.apply(y)
        num = abs(float(np.vdot(ax.ravel(), y.ravel()) - np.vdot(x.ravel(), ay.ravel())))
        den = float(np.linalg.norm(ax) * np.linalg.norm(y))
        if den > 0:
            worst = max(worst, num / den)
    return worst


def sparsity_blocks(ops, gas, dt, h_dual):
    """Count coupled element blocks per row by probing the operator.

    Returns the maximum number of elements influenced by a unit pressure
    perturbation in a single element (block-row width of A^T, identical to
    the row width by the stencil's symmetry).
    """
    st = ops.st
    apply, _ = make_pressure_operator(ops, gas, dt, 1.0, h_dual)
    n_tri = ops.mesh.primal.n_tri
    worst = 0
    for i in range(n_tri):
        p = np.zeros((st.n_gamma, n_tri, st.n_phi))
        p[:, i, :] = 1.0
        out = apply(p)
        touched = np.any(np.abs(out) > 1e-13 * np.abs(out).max(), axis=(0, 2)).sum()
        worst = max(worst, int(touched))
    return worst
