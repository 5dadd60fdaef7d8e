"""Benchmark case registry, error norms and convergence studies.

Each case bundles a mesh recipe, gas model, polynomial degrees, solver
settings and initial/boundary data, plus (where available) a reference
solution callable used for error reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mesh as msh
from . import reference as ref
from .basis import SpaceTimeBasis
from .eos import GasModel
from .operators import Operators
from .stepper import SolverState, StepConfig, Stepper


@dataclass
class Case:
    """A ready-to-run benchmark configuration."""

    name: str
    mesh: msh.StaggeredMesh
    gas: GasModel
    p: int
    p_gamma: int
    t_end: float
    config: StepConfig
    init: tuple  # (rho_f, v_f, p_f) callables of (x, y)
    dirichlet: dict = field(default_factory=dict)
    exact: object = None  # callable (x, y, t) -> (rho, u, v, p), or None
    radial: object = None  # callable (t) -> (r, rho, u, p) oracle, or None

    def build(self):
        ops = Operators(self.mesh, SpaceTimeBasis(self.p, self.p_gamma))
        stepper = Stepper(ops, self.gas, self.config, self.dirichlet)
        state = stepper.initial_state(*self.init)
        return ops, stepper, state


def _rect_counts(n_target, lx, ly):
    """nx, ny for a rectangle so that 2*nx*ny is close to n_target with
    near-unit-aspect cells."""
    ny = max(1, round(np.sqrt(n_target / 2.0 * ly / lx)))
    nx = max(1, round(n_target / 2.0 / ny))
    return nx, ny


# ----------------------------------------------------------------------
# individual cases


def vortex_case(n_target=1400, p=1, p_gamma=1, t_end=1.0, cfl=0.45, jitter=0.0,
                seed=0, **cfg):
    nx, ny = _rect_counts(n_target, 20.0, 20.0)
    pm, tags = msh.generate_rectangle(
        -10.0, 10.0, -10.0, 10.0, nx, ny,
        {"left": "periodic:x", "right": "periodic:x",
         "bottom": "periodic:y", "top": "periodic:y"},
        jitter=jitter, seed=seed,
    )
    sm = msh.build_staggered(pm, tags)
    gas = GasModel()

    def exact(x, y, t):
        return ref.vortex_state(x, y, t, gamma=gas.gamma)

    return Case(
        name="vortex", mesh=sm, gas=gas, p=p, p_gamma=p_gamma, t_end=t_end,
        config=StepConfig(cfl=cfl, **cfg),
        init=(lambda x, y: exact(x, y, 0.0)[0],
              lambda x, y: exact(x, y, 0.0)[1:3],
              lambda x, y: exact(x, y, 0.0)[3]),
        exact=exact,
    )


def acoustic_case(n_target=5616, p=3, p_gamma=0, t_end=1.0, alpha=40.0, cfl=0.45,
                  jitter=0.15, seed=3, **cfg):
    nx, ny = _rect_counts(n_target, 4.0, 4.0)
    pm, tags = msh.generate_rectangle(
        -2.0, 2.0, -2.0, 2.0, nx, ny,
        {"left": "periodic:x", "right": "periodic:x",
         "bottom": "periodic:y", "top": "periodic:y"},
        jitter=jitter, seed=seed,
    )
    sm = msh.build_staggered(pm, tags)
    gas = GasModel()
    h = sm.primal.h_min

    def p_init(x, y):
        return 1.0 + np.exp(-alpha * (x**2 + y**2))

    def radial(t):
        return ref.radial_reference(
            lambda r: (np.ones_like(r), np.zeros_like(r), 1.0 + np.exp(-alpha * r**2)),
            t, n_cells=10_000, r_max=2.9, gamma=gas.gamma,
        )

    cfg.setdefault("dt_max", 0.5 * h / (2 * p + 1))
    return Case(
        name="acoustic", mesh=sm, gas=gas, p=p, p_gamma=p_gamma, t_end=t_end,
        config=StepConfig(cfl=cfl, **cfg),
        init=(lambda x, y: np.ones_like(x),
              lambda x, y: (np.zeros_like(x), np.zeros_like(y)),
              p_init),
        radial=radial,
    )


def riemann_case(which="rp1", n_target=400, p=4, p_gamma=1, cfl=0.45,
                 limiter=True, **cfg):
    """Quasi-1D shock-tube strip: two rows of unit-aspect cells, periodic
    in y, so the x-resolution is n_target / 4 intervals."""
    state = ref.RIEMANN_PROBLEMS[which]
    nx = max(8, n_target // 4)
    ny = 2
    hy = 1.0 / nx
    pm, tags = msh.generate_rectangle(
        -0.5, 0.5, -hy, hy, nx, ny,
        {"left": "transmissive", "right": "transmissive",
         "bottom": "periodic:y", "top": "periodic:y"},
    )
    sm = msh.build_staggered(pm, tags)
    gas = GasModel(gamma=state.gamma)

    def blend(ql, qr):
        return lambda x, y: ref.smooth_ic(ql, qr, x, state.x0, state.eps0)

    def exact(x, y, t):
        rho, u, p_ = ref.exact_riemann(state, x, max(t, 1e-12))
        return rho, u, np.zeros_like(u), p_

    cfg.setdefault("viscous_mode", "implicit")
    cfg.setdefault("dt_max", 0.5 * sm.primal.h_min / (2 * p + 1))
    return Case(
        name=which, mesh=sm, gas=gas, p=p, p_gamma=p_gamma, t_end=state.t_end,
        config=StepConfig(cfl=cfl, limiter=limiter, **cfg),
        init=(blend(state.rho_l, state.rho_r),
              lambda x, y: (ref.smooth_ic(state.u_l, state.u_r, x, state.x0, state.eps0),
                            np.zeros_like(y)),
              blend(state.p_l, state.p_r)),
        exact=exact,
    )


def explosion_case(n_target=5616, p=3, p_gamma=0, t_end=0.25, cfl=0.45,
                   limiter=True, eps0=0.02, **cfg):
    pm, tags = msh.generate_rectangle(
        -1.0, 1.0, -1.0, 1.0, *_rect_counts(n_target, 2.0, 2.0),
        {"left": "transmissive", "right": "transmissive",
         "bottom": "transmissive", "top": "transmissive"},
    )
    sm = msh.build_staggered(pm, tags)
    gas = GasModel()

    def prof(inner, outer):
        def f(x, y):
            r = np.sqrt(x**2 + y**2)
            return ref.smooth_ic(inner, outer, r, 0.5, eps0)
        return f

    def radial(t):
        return ref.radial_reference(
            lambda r: (ref.smooth_ic(1.0, 0.125, r, 0.5, eps0),
                       np.zeros_like(r),
                       ref.smooth_ic(1.0, 0.1, r, 0.5, eps0)),
            t, n_cells=10_000, r_max=1.6, gamma=gas.gamma,
        )

    cfg.setdefault("viscous_mode", "implicit")
    cfg.setdefault("dt_max", 0.5 * sm.primal.h_min / (2 * p + 1))
    return Case(
        name="explosion", mesh=sm, gas=gas, p=p, p_gamma=p_gamma, t_end=t_end,
        config=StepConfig(cfl=cfl, limiter=limiter, **cfg),
        init=(prof(1.0, 0.125),
              lambda x, y: (np.zeros_like(x), np.zeros_like(y)),
              prof(1.0, 0.1)),
        radial=radial,
    )


def becker_case(n_target=870, p=3, p_gamma=2, t_end=0.2, mach=2.0, mu=2e-2,
                cfl=0.45, **cfg):
    shock = ref.BeckerShock(mach=mach, mu=mu)
    nx, ny = _rect_counts(n_target, 1.2, 0.2)
    pm, tags = msh.generate_rectangle(
        -0.1, 1.1, -0.1, 0.1, nx, ny,
        {"left": "dirichlet:inflow", "right": "dirichlet:outflow",
         "bottom": "periodic:y", "top": "periodic:y"},
    )
    sm = msh.build_staggered(pm, tags)
    gas = GasModel(gamma=shock.gamma, mu=mu, Pr=shock.prandtl)

    def exact(x, y, t):
        rho, u, p_ = ref.becker_traveling(shock, x, t)
        return rho, u, np.zeros_like(np.asarray(u)), p_

    rl, ul, _, pl = (float(np.asarray(a).ravel()[0]) for a in exact(-10.0, 0.0, 0.0))
    rr, ur, _, pr = (float(np.asarray(a).ravel()[0]) for a in exact(10.0, 0.0, 0.0))

    cfg.setdefault("viscous_mode", "implicit")
    return Case(
        name="becker", mesh=sm, gas=gas, p=p, p_gamma=p_gamma, t_end=t_end,
        config=StepConfig(cfl=cfl, **cfg),
        init=(lambda x, y: exact(x, y, 0.0)[0],
              lambda x, y: exact(x, y, 0.0)[1:3],
              lambda x, y: exact(x, y, 0.0)[3]),
        dirichlet={"inflow": (rl, ul, 0.0, pl), "outflow": (rr, ur, 0.0, pr)},
        exact=exact,
    )


CASES = {
    "vortex": vortex_case,
    "acoustic": acoustic_case,
    "rp1": lambda **kw: riemann_case("rp1", **kw),
    "rp2": lambda **kw: riemann_case("rp2", **kw),
    "rp3": lambda **kw: riemann_case("rp3", **kw),
    "rp4": lambda **kw: riemann_case("rp4", **kw),
    "rp5": lambda **kw: riemann_case("rp5", **kw),
    "explosion": explosion_case,
    "becker": becker_case,
}


def make_case(name, **kwargs) -> Case:
    if name not in CASES:
        raise KeyError(f"unknown case {name!r}; choose from {sorted(CASES)}")
    return CASES[name](**kwargs)


# ----------------------------------------------------------------------
# error norms


def solution_points(ops, state: SolverState, gas):
    """Pointwise (rho, u, v, p) at the sub-cell quadrature points, with
    the matching weights.  Density/velocity come from the dual fields,
    pressure from the primal field."""
    x = ops.sub_x
    w = ops.sub_w
    rho = ops.dual_values(state.rho_d)
    mom = ops.dual_values(state.rhov_d)
    p = ops.primal_values(state.p_p)
    u = mom[..., 0] / rho
    v = mom[..., 1] / rho
    return x, w, {"rho": rho, "u": u, "v": v, "p": p}


def error_norms(ops, state: SolverState, exact, gas, t=None):
    """L1/L2/Linf errors of (rho, u, v, p) against a reference callable."""
    t = state.t if t is None else t
    x, w, fields = solution_points(ops, state, gas)
    er, eu, ev, ep = exact(x[..., 0], x[..., 1], t)
    out = {}
    for key, num, refv in (("rho", fields["rho"], er), ("u", fields["u"], eu),
                           ("v", fields["v"], ev), ("p", fields["p"], ep)):
        d = np.abs(num - refv)
        out[key] = {
            "l1": float(np.sum(w * d)),
            "l2": float(np.sqrt(np.sum(w * d**2))),
            "linf": float(d.max()),
        }
    return out


def radial_error_norms(ops, state: SolverState, radial, gas, t=None):
    """Norms against a radial oracle, interpolated to quadrature radii."""
    t = state.t if t is None else t
    x, w, fields = solution_points(ops, state, gas)
    rq = np.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2)
    r, rho, u, p = radial(t)
    er = np.interp(rq, r, rho)
    eur = np.interp(rq, r, u)
    ep = np.interp(rq, r, p)
    ur = np.where(rq > 1e-12,
                  (fields["u"] * x[..., 0] + fields["v"] * x[..., 1]) / np.maximum(rq, 1e-12),
                  0.0)
    out = {}
    for key, num, refv in (("rho", fields["rho"], er), ("ur", ur, eur),
                           ("p", fields["p"], ep)):
        d = np.abs(num - refv)
        out[key] = {
            "l1": float(np.sum(w * d)),
            "l2": float(np.sqrt(np.sum(w * d**2))),
            "linf": float(d.max()),
        }
    return out


def mesh_spacing(sm: msh.StaggeredMesh):
    """h = sqrt(domain area / N_i)."""
    return float(np.sqrt(sm.primal.area.sum() / sm.primal.n_tri))


def convergence_study(case_name, n_targets, p, p_gamma, t_end=None, norm="l2",
                      var="rho", callback=None, **case_kwargs):
    """Run a case on a mesh ladder and report errors and observed orders.

    Returns a list of dicts with n_tri, h, error and order (None on the
    coarsest level or when two levels share the same h).
    """
    rows = []
    for nt in n_targets:
        case = make_case(case_name, n_target=nt, p=p, p_gamma=p_gamma, **case_kwargs)
        if t_end is not None:
            case.t_end = t_end
        ops, stepper, state = case.build()
        state, logs = stepper.run(state, case.t_end, callback=callback)
        errs = error_norms(ops, state, case.exact, case.gas)
        h = mesh_spacing(case.mesh)
        err = errs[var][norm]
        order = None
        if rows and abs(h - rows[-1]["h"]) > 1e-14 * h:
            order = float(np.log(rows[-1]["error"] / err) / np.log(rows[-1]["h"] / h))
        rows.append({
            "n_tri": case.mesh.primal.n_tri, "h": h, "error": err,
            "order": order, "steps": len(logs), "errors": errs,
        })
    return rows
