"""Semi-implicit time loop: CFL step size, Picard sweeps, rollback limiting.

Each step advances pressure and total energy on the triangles and density
and momentum on the edge-based dual cells.  Per Picard sweep: (1) advance
the continuity equation on the primal grid and average the new density to
the dual grid; (2) evaluate the explicit convective and viscous terms at
the current level; (3) solve the global pressure system; (4) update the
dual momentum with the new pressure gradient; (5) update the total energy
consistently with the pressure equation (which keeps the update in flux
form, hence conservative).

Nonlinear terms are evaluated per temporal collocation node, so all the
spatial operators broadcast over a leading time-slice axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


_ein_paths: dict = {}


def _ein(subs, *arrays):
    """einsum with a memoized contraction path (shapes recur constantly)."""
    key = (subs, tuple(a.shape for a in arrays))
    path = _ein_paths.get(key)
    if path is None:
        path = np.einsum_path(subs, *arrays, optimize=True)[0]
        _ein_paths[key] = path
    return np.einsum(subs, *arrays, optimize=path)
import scipy.sparse.linalg as spla

from . import assembly as asm
from . import limiter as lim
from . import pressure as prs
from .operators import Operators, stress_tensor


@dataclass
class SolverState:
    t: float
    n: int
    p_p: np.ndarray       # (N_i, n_phi) pressure
    rhoE_p: np.ndarray    # (N_i, n_phi)
    rho_p: np.ndarray     # (N_i, n_phi)
    rho_d: np.ndarray     # (N_e, n_psi)
    rhov_d: np.ndarray    # (N_e, n_psi, 2)

    def copy(self):
        return SolverState(
            self.t, self.n, self.p_p.copy(), self.rhoE_p.copy(),
            self.rho_p.copy(), self.rho_d.copy(), self.rhov_d.copy(),
        )


@dataclass
class StepConfig:
    cfl: float = 0.45
    n_pic: int | None = None       # default p_gamma + 2
    theta: float = 1.0             # used only for piecewise-constant time basis
    viscous_mode: str = "explicit"  # explicit | implicit
    limiter: bool = False
    delta0: float = lim.DELTA0
    eps: float = lim.EPS
    retries: int = 3
    max_halvings: int = 5
    dt_max: float = np.inf
    tol: float = 1e-10
    maxiter: int = 1000
    restart: int = 30

    def __post_init__(self):
        if not 0.0 < self.cfl < 0.5:
            raise ValueError("cfl must lie in (0, 1/2)")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0.5, 1]")


@dataclass
class StepLog:
    t: float
    dt: float
    pressure_iters: int
    troubled: int = 0
    retries: int = 0


class Stepper:
    def __init__(self, ops: Operators, gas, config: StepConfig, dirichlet=None):
        """dirichlet: {state name: (rho, vx, vy, p)} for tagged edges."""
        self.ops = ops
        self.mesh = ops.mesh
        self.st = ops.st
        self.gas = gas
        self.cfg = config
        self.n_pic = config.n_pic or (self.st.p_gamma + 2)
        self.detector = lim.Detector(self.mesh, config.delta0, config.eps)
        names = self.mesh.bstate_names
        self.dir_states = {}
        for name, (rho, vx, vy, p) in (dirichlet or {}).items():
            if name in names:
                self.dir_states[names.index(name)] = (float(rho), np.array([vx, vy]), float(p))
        missing = set(range(len(names))) - set(self.dir_states)
        if missing:
            raise ValueError(f"no data for dirichlet states {[names[s] for s in missing]}")
        # frozen trace tables per field kind
        g = gas
        self.bc_rho = {s: (r, v) for s, (r, v, p) in self.dir_states.items()}
        self.bc_mom = {s: (r * v, v) for s, (r, v, p) in self.dir_states.items()}
        self.bc_rhok = {
            s: (0.5 * r * v @ v, v) for s, (r, v, p) in self.dir_states.items()
        }
        self.bc_v = {s: (v, v) for s, (r, v, p) in self.dir_states.items()}
        self.bc_T = {s: float(g.temperature(r, p)) for s, (r, v, p) in self.dir_states.items()}
        self.bc_p = {s: p for s, (r, v, p) in self.dir_states.items()}
        # time-independent pressure boundary load
        zero_p = np.zeros((self.mesh.primal.n_tri, self.st.n_phi))
        self.qdir = self.ops.apply_Q(zero_p, dirichlet=self.bc_p)
        self._mom_guess = None

    # ------------------------------------------------------------------
    def initial_state(self, rho_f, v_f, p_f) -> SolverState:
        """Project pointwise initial data (callables of x, y) onto both grids."""
        ops, g = self.ops, self.gas
        rho_p = ops.project_primal(rho_f)
        p_p = ops.project_primal(p_f)
        rhoE = ops.project_primal(
            lambda x, y: g.total_energy(rho_f(x, y), v_f(x, y)[0], v_f(x, y)[1], p_f(x, y))
        )
        rho_d = ops.project_dual(rho_f)
        mx = ops.project_dual(lambda x, y: rho_f(x, y) * v_f(x, y)[0])
        my = ops.project_dual(lambda x, y: rho_f(x, y) * v_f(x, y)[1])
        return SolverState(0.0, 0, p_p, rhoE, rho_p, rho_d, np.stack([mx, my], axis=-1))

    # ------------------------------------------------------------------
    def compute_dt(self, state: SolverState, visc: lim.ViscosityField | None = None):
        """Velocity-based CFL step, plus the parabolic bound when viscosity
        is treated explicitly."""
        cfg, g = self.cfg, self.gas
        p = self.st.p
        h = self.mesh.primal.h_min
        vmag = np.linalg.norm(state.rhov_d, axis=-1) / np.maximum(state.rho_d, 1e-300)
        vmax = float(vmag.max())
        dt = cfg.dt_max
        if vmax > 0:
            dt = min(dt, cfg.cfl / (2 * p + 1) * h / (2.0 * vmax))
        visc = visc or lim.base_viscosity(self.mesh, g)
        if cfg.viscous_mode == "explicit" and visc.mu_tri.max() > 0:
            rho_min = np.maximum(self.ops.primal_means(state.rho_p), 1e-300)
            lam_nu = np.maximum(
                4.0 * visc.mu_tri / (3.0 * rho_min),
                g.gamma * visc.mu_tri / (g.Pr * rho_min),
            ).max()
            if lam_nu > 0:
                dt = min(dt, cfg.cfl * (h / (2 * p + 1)) ** 2 / (2.0 * lam_nu))
        if not np.isfinite(dt):
            raise ValueError("time step unbounded; set dt_max for quiescent states")
        # Snap down onto a geometric grid so the step size changes rarely and
        # factored preconditioners stay valid across many steps.
        q = 0.97
        k = math.ceil(math.log(float(dt)) / math.log(q) - 1e-12)
        return float(q ** k)

    # ------------------------------------------------------------------
    # small temporal helpers (collocation basis)

    def _advance(self, qn, resid, minv, dt):
        """Solve the temporal evolution system for one field.

        qn: field at t^n (no slice axis); resid: (n_t, ...) weak spatial
        residuals per slice; minv: block inverse mass for the grid.
        Returns slab (n_t, ...).
        """
        st = self.st
        w = st.time.weights
        tend = _ein("jnm,ajm...->ajn...", minv, resid)
        extra = (1,) * qn.ndim
        rhs = st.gamma0.reshape((-1,) + extra) * qn[None]
        rhs = rhs - dt * w.reshape((-1,) + extra) * tend
        return _ein("ab,b...->a...", st.t_evolve_inv, rhs)

    def _slab(self, q):
        """Constant-in-time extension of a t^n field."""
        return np.repeat(q[None], self.st.n_gamma, axis=0)

    def _end(self, slab):
        """Value at the end of the time interval."""
        return _ein("a,a...->...", self.st.gamma1, slab)

    # ------------------------------------------------------------------
    def picard_step(self, state: SolverState, dt: float,
                    visc: lim.ViscosityField | None = None,
                    implicit_viscous: bool | None = None):
        """One full semi-implicit step; returns (candidate, StepLog)."""
        ops, st, g, cfg = self.ops, self.st, self.gas, self.cfg
        mesh = self.mesh
        ng = st.n_gamma
        w = st.time.weights
        tinv = st.t_evolve_inv
        tev = st.t_evolve
        g0 = st.gamma0
        theta = cfg.theta if st.p_gamma == 0 else 1.0
        visc = visc or lim.base_viscosity(mesh, g)
        viscous = visc.mu_tri.max() > 0 or visc.lam_tri.max() > 0
        if implicit_viscous is None:
            implicit_viscous = cfg.viscous_mode == "implicit"
        implicit_viscous = implicit_viscous and viscous
        # direct factorizations preconditioning the implicit solves are kept
        # across steps and rebuilt only when dt or the viscosity changes
        # (density drift between builds is absorbed by iterative refinement)
        key = (hash(visc.mu_edge.tobytes()), hash(visc.lam_edge.tobytes()))
        old = getattr(self, "_pre_key", None)
        if (
            old is None
            or key != old[0]
            or not (0.995 * old[1] <= dt <= 1.005 * old[1])
        ):
            self._pre_key = (key, float(dt))
            self._mom_pre = None
            self._prs_pre = None

        # Picard level-m slabs, initialized from t^n
        P = self._slab(state.p_p)
        rho_p = self._slab(state.rho_p)
        rho_d = self._slab(state.rho_d)
        rhov_d = self._slab(state.rhov_d)
        rhok_p = None
        iters = 0

        for m in range(self.n_pic):
            # (1) continuity on the primal grid, then average to dual
            rhov_p = ops.avg_dual_to_primal(rhov_d)
            v_p = rhov_p / rho_p[..., None]
            r_rho = ops.conv_residual(rho_p, v_p, "scalar", self.bc_rho)
            rho_p = self._advance(state.rho_p, r_rho, ops.Ms_inv, dt)
            rho_d = ops.avg_primal_to_dual(rho_p)
            v_p = rhov_p / rho_p[..., None]

            # (2) convective and viscous terms at level m
            r_conv = ops.conv_residual(rhov_p, v_p, "momentum", self.bc_mom)
            sig = None
            if viscous and not implicit_viscous:
                grad = ops.lift_gradient(v_p, "velocity", self.bc_v)
                sig = stress_tensor(grad, visc.mu_edge)
            if implicit_viscous:
                z, sig = self._implicit_momentum(state, rho_p, r_conv, visc, dt)
                r_mom = r_conv - ops.apply_div(sig)
            elif sig is not None:
                r_mom = r_conv - ops.apply_div(sig)
            else:
                r_mom = r_conv
            gv = ops.tendency_primal_to_dual(r_mom)

            v_d = rhov_d / rho_d[..., None]
            rhok_d = 0.5 * _ein("ajnd,ajnd->ajn", rhov_d, v_d)
            rhok_p = ops.avg_dual_to_primal(rhok_d)
            r_k = ops.conv_residual(rhok_p, v_p, "scalar", self.bc_rhok)

            wq = np.zeros_like(rhov_d)
            if sig is not None:
                wq = wq + _ein("ajnkd,ajnk->ajnd", sig, v_d)
            T_p = g.temperature(rho_p, P)
            q_dir = 0.0
            heat = visc.lam_tri.max() > 0
            heat_implicit = heat and implicit_viscous
            if heat and not heat_implicit:
                gT = ops.lift_gradient(T_p, "temperature", self.bc_T)
                wq = wq + visc.lam_edge[:, None, None] * gT
            elif heat_implicit and self.bc_T:
                zf = np.zeros_like(T_p)
                q_dir = visc.lam_edge[:, None, None] * ops.lift_gradient(
                    zf, "temperature", self.bc_T
                )
                wq = wq + q_dir

            p_d = ops.avg_primal_to_dual(P)
            H_d = g.enthalpy(rho_d, p_d)

            # (3) pressure system
            predv = _ein(
                "ab,bjnd->ajnd", tinv,
                g0[:, None, None, None] * state.rhov_d[None]
                - dt * w[:, None, None, None]
                * np.matmul(ops.Mbar_inv, gv),
            )
            gdir_u = _ein("jnm,jmd->jnd", ops.Mbar_inv, self.qdir)
            if ng == 1:
                u_b = (
                    theta * predv
                    + (1 - theta) * state.rhov_d[None]
                    - dt * theta * (1 - theta)
                    * np.matmul(
                        ops.Mbar_inv,
                        ops.apply_Q(self._slab(state.p_p), dirichlet=self.bc_p),
                    )
                    - dt * theta**2 * gdir_u[None]
                )
            else:
                cfac = _ein("ab,b->a", tinv, w)
                u_b = predv - dt * cfac[:, None, None, None] * gdir_u[None]

            b = (
                g0[:, None, None] * _ein("inm,im->in", ops.Ms, state.rhoE_p)[None]
                - _ein("ab,inm,bim->ain", tev, ops.Ms, rhok_p)
                - dt * w[:, None, None] * r_k
                + dt * w[:, None, None] * ops.apply_div(wq)
                - dt * w[:, None, None] * ops.apply_div(ops.project_weighted(H_d, u_b))
            )
            apply0, precond = prs.make_pressure_operator(ops, g, dt, theta, H_d)
            if heat_implicit:
                lam_e = visc.lam_edge[:, None, None]
                bc0 = {s: 0.0 for s in self.bc_T}

                def apply(pp, _a0=apply0, _lam=lam_e, _rho=rho_p, _bc=bc0):
                    qi = _lam * ops.lift_gradient(
                        g.temperature(_rho, pp), "temperature", _bc
                    )
                    return _a0(pp) - dt * w[:, None, None] * ops.apply_div(qi)

                if self._prs_pre is None:
                    self._prs_pre = asm.LUPreconditioner(
                        asm.pressure_matrix(
                            ops, g, dt, theta, H_d,
                            lam_edge=visc.lam_edge, rho_slab=rho_p,
                        )
                    )
                precond = self._prs_pre
            else:
                apply = apply0
            system = prs.PressureSystem(
                apply, b, precond,
                symmetric=(ng == 1 and not heat_implicit),
                tol=cfg.tol, maxiter=cfg.maxiter, restart=cfg.restart,
            )
            if heat_implicit:
                P_new, rep = prs.solve_refined(system, x0=P)
                if rep.iterations > 6:
                    # stale factorization: rebuild before the next solve
                    self._prs_pre = None
            else:
                P_new, rep = prs.solve(system, x0=P)
            iters += rep.iterations
            if not rep.converged:
                return None, StepLog(state.t + dt, dt, iters, troubled=-1)

            # (4) momentum update with the new pressure gradient
            p_eff = theta * P_new + (1 - theta) * self._slab(state.p_p) if ng == 1 else P_new
            qp = ops.apply_Q(p_eff, dirichlet=self.bc_p)
            rhov_d = _ein(
                "ab,bjnd->ajnd", tinv,
                g0[:, None, None, None] * state.rhov_d[None]
                - dt * w[:, None, None, None]
                * np.matmul(ops.Mbar_inv, gv + qp),
            )

            # (5) energy update consistent with the pressure equation
            P = P_new

        rhoE_p = g.rho_e(P) + rhok_p
        cand = SolverState(
            t=state.t + dt, n=state.n + 1,
            p_p=self._end(P), rhoE_p=self._end(rhoE_p), rho_p=self._end(rho_p),
            rho_d=self._end(rho_d), rhov_d=self._end(rhov_d),
        )
        return cand, StepLog(cand.t, dt, iters)

    # ------------------------------------------------------------------
    def _implicit_momentum(self, state, rho_p, r_conv, visc, dt):
        """Implicit viscous predictor on the primal grid.

        Solves  tev M z + dt w D(sigma(z)) = g0 M rhov^n - dt w R_conv
        matrix-free for the primal momentum slab z, then returns z and the
        stress evaluated at the solution (with inhomogeneous boundary data).
        """
        ops, st, cfg = self.ops, self.st, self.cfg
        w = st.time.weights
        shape = (st.n_gamma, self.mesh.primal.n_tri, st.n_phi, 2)
        rhov_pn = ops.avg_dual_to_primal(state.rhov_d)
        bc0 = {s: (np.zeros(2), np.zeros(2)) for s in self.bc_v}

        def sigma_of(z, bc):
            v = z / rho_p[..., None]
            grad = ops.lift_gradient(v, "velocity", bc)
            return stress_tensor(grad, visc.mu_edge)

        def L(zf):
            z = zf.reshape(shape)
            out = _ein("ab,inm,bimd->aind", st.t_evolve, ops.Ms, z)
            out = out - dt * w[:, None, None, None] * ops.apply_div(sigma_of(z, bc0))
            return out.ravel()

        rhs = (
            st.gamma0[:, None, None, None]
            * _ein("inm,imd->ind", ops.Ms, rhov_pn)[None]
            - dt * w[:, None, None, None] * r_conv
        )
        if self.bc_v:
            zf = np.zeros(shape)
            sig_d = sigma_of(zf, self.bc_v)
            rhs = rhs + dt * w[:, None, None, None] * ops.apply_div(sig_d)
        if self._mom_pre is None:
            self._mom_pre = asm.LUPreconditioner(
                asm.momentum_matrix(ops, dt, rho_p, visc.mu_edge)
            )

        # LU-preconditioned iterative refinement; the factorization is exact
        # up to the density drift since it was built, so a couple of sweeps
        # reach the tolerance.  A slow contraction means the factorization
        # went stale -- rebuild it once from the current density before
        # falling back to GMRES.
        bnorm = float(np.linalg.norm(rhs))
        z = (
            self._mom_guess
            if self._mom_guess is not None and self._mom_guess.shape == shape
            else self._mom_pre(rhs)
        )
        ok = bnorm == 0.0
        rebuilt = False
        it = 0
        while not ok:
            r = rhs - L(z.ravel()).reshape(shape)
            if float(np.linalg.norm(r)) <= cfg.tol * bnorm:
                ok = True
                break
            if it >= 8 and not rebuilt:
                self._mom_pre = asm.LUPreconditioner(
                    asm.momentum_matrix(ops, dt, rho_p, visc.mu_edge)
                )
                rebuilt = True
            elif it >= 14:
                break
            z = z + self._mom_pre(r)
            it += 1
        if ok and it > 6 and not rebuilt:
            # converged but slowly: refresh for the next call
            self._mom_pre = None
        if not ok:
            n = int(np.prod(shape))
            lin = spla.LinearOperator((n, n), matvec=L, dtype=float)
            pre = spla.LinearOperator(
                (n, n), matvec=lambda v: self._mom_pre(v), dtype=float
            )
            zf, info = spla.gmres(lin, rhs.ravel(), x0=z.ravel(), rtol=cfg.tol,
                                  restart=cfg.restart, maxiter=10, M=pre)
            z = zf.reshape(shape)
        self._mom_guess = z
        return z, sigma_of(z, self.bc_v)

    # ------------------------------------------------------------------
    def admissible(self, cand: SolverState) -> bool:
        for f in (cand.p_p, cand.rhoE_p, cand.rho_p, cand.rho_d, cand.rhov_d):
            if not np.isfinite(f).all():
                return False
        return (
            cand.rho_p.min() > 0 and cand.p_p.min() > 0 and cand.rho_d.min() > 0
        )

    def _make_av(self, state, report):
        ops, g = self.ops, self.gas
        rhov_p = ops.avg_dual_to_primal(state.rhov_d)
        v_nodal = rhov_p / state.rho_p[..., None]
        c_nodal = g.sound_speed(
            np.maximum(state.rho_p, 1e-300), np.maximum(state.p_p, 1e-300)
        )
        rho_mean = ops.primal_means(state.rho_p)
        return lim.artificial_viscosity(
            report, self.mesh, g, rho_mean, v_nodal, c_nodal, self.st.p
        )

    def step(self, state: SolverState, dt: float):
        """One accepted step, running the rollback limiter when enabled."""
        cfg = self.cfg
        self._mom_guess = None
        cand, log = self.picard_step(state, dt)
        self.last_troubled = None
        if not cfg.limiter:
            if cand is None or not self.admissible(cand):
                raise RuntimeError(
                    "inadmissible state produced with the limiter disabled"
                )
            return cand, log
        report = None
        if cand is not None and self.admissible(cand):
            report = self.detector.detect(cand, state, self.gas)
            if report.accepted:
                return cand, log
        if report is None:
            report = lim.DetectionReport(
                np.ones(self.mesh.primal.n_tri, dtype=bool), 0, 0, 0
            )
        retries = 0
        dt_try = dt
        for halve in range(cfg.max_halvings + 1):
            for _ in range(cfg.retries):
                retries += 1
                av = self._make_av(state, report)
                dt_av = min(dt_try, self.compute_dt(state, av))
                cand, log = self.picard_step(
                    state, dt_av, visc=av, implicit_viscous=True
                )
                if cand is None or not self.admissible(cand):
                    break
                rep2 = self.detector.detect(cand, state, self.gas)
                log.troubled = report.count
                log.retries = retries
                if rep2.accepted:
                    self.last_troubled = report.troubled
                    return cand, log
                if not (rep2.troubled & ~report.troubled).any():
                    # the troubled set is a fixed point: another attempt
                    # with the same viscosity reproduces this candidate
                    break
                report = lim.DetectionReport(
                    report.troubled | rep2.troubled,
                    rep2.n_positivity, rep2.n_dmp, rep2.n_nonfinite,
                )
            if cand is not None and self.admissible(cand):
                # positivity holds everywhere; accept the artificially
                # dissipated candidate even though the DMP still flags it
                log.troubled = report.count
                log.retries = retries
                self.last_troubled = report.troubled
                return cand, log
            dt_try *= 0.5
        raise RuntimeError("limiter retry budget exhausted; aborting step")

    # ------------------------------------------------------------------
    def run(self, state: SolverState, t_end: float, callback=None, max_steps=10**7):
        """Advance to t_end; returns (final state, list of StepLog)."""
        logs = []
        while state.t < t_end - 1e-12 and len(logs) < max_steps:
            dt = min(self.compute_dt(state), t_end - state.t)
            state, log = self.step(state, dt)
            logs.append(log)
            if callback is not None:
                callback(state, log)
        return state, logs
