"""A-posteriori detection (positivity + relaxed maximum principle) and
artificial-viscosity construction for the rollback loop.

A candidate step is accepted only if, in every cell and for every conserved
variable stored on that grid, all degrees of freedom stay inside the
node-neighbourhood bounds of the previous step relaxed by
delta = max(delta0, eps * local range), and density/pressure stay positive.
Troubled cells receive an artificial viscosity sized so the local mesh
Reynolds number is one, and the step is recomputed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DELTA0 = 2e-3
EPS = 1e-3


@dataclass
class DetectionReport:
    troubled: np.ndarray          # bool per primal cell
    n_positivity: int
    n_dmp: int
    n_nonfinite: int

    @property
    def accepted(self) -> bool:
        return not bool(self.troubled.any())

    @property
    def count(self) -> int:
        return int(self.troubled.sum())


@dataclass
class ViscosityField:
    mu_tri: np.ndarray            # total effective viscosity per primal cell
    lam_tri: np.ndarray
    mu_edge: np.ndarray           # dual extension: max over the two owners
    lam_edge: np.ndarray
    mu_add: np.ndarray            # artificial part only (zero off troubled set)

    @property
    def active(self) -> bool:
        return bool(self.mu_add.any())


def _pad_voronoi(voronoi):
    n = len(voronoi)
    width = max(len(v) for v in voronoi)
    pad = np.empty((n, width), dtype=np.int64)
    for i, v in enumerate(voronoi):
        pad[i, : len(v)] = v
        pad[i, len(v) :] = v[0]
    return pad


class Detector:
    """Holds per-mesh neighbourhood tables for the relaxed bound check."""

    def __init__(self, mesh, delta0=DELTA0, eps=EPS):
        self.mesh = mesh
        self.delta0 = delta0
        self.eps = eps
        self.pad = _pad_voronoi(mesh.voronoi)

    def _bounds(self, tri_min, tri_max):
        """Neighbourhood min/max per triangle from per-triangle extrema."""
        lo = tri_min[..., self.pad].min(axis=-1)
        hi = tri_max[..., self.pad].max(axis=-1)
        return lo, hi

    def _check(self, cand_dofs, lo, hi):
        """Relaxed DMP violation mask per cell; dofs (N, nb)."""
        delta = np.maximum(self.delta0, self.eps * (hi - lo))
        cmin = cand_dofs.min(axis=-1)
        cmax = cand_dofs.max(axis=-1)
        return (cmin < lo - delta) | (cmax > hi + delta)

    def detect(self, cand, prev, gas):
        """Examine a candidate state against the previous accepted state.

        cand/prev expose primal dof arrays rho_p, rhoE_p, p_p and dual
        arrays rho_d, rhov_d (nodal coefficients).
        """
        mesh = self.mesh
        left = mesh.left
        right = np.maximum(mesh.right, 0)
        n_tri = mesh.primal.n_tri

        finite = np.ones(n_tri, dtype=bool)
        for f in (cand.rho_p, cand.rhoE_p, cand.p_p):
            finite &= np.isfinite(f).all(axis=-1)
        fin_d = np.isfinite(cand.rho_d).all(axis=-1) & np.isfinite(cand.rhov_d).all(
            axis=(-2, -1)
        )
        finite &= np.bincount(left, ~fin_d, n_tri) == 0
        finite &= np.bincount(right[mesh.right >= 0], ~fin_d[mesh.right >= 0], n_tri) == 0

        pos = (cand.rho_p.min(axis=-1) > 0) & (cand.p_p.min(axis=-1) > 0)
        pos_d = cand.rho_d.min(axis=-1) > 0
        bad_d = ~pos_d
        pos &= np.bincount(left, bad_d, n_tri) == 0
        pos &= np.bincount(right[mesh.right >= 0], bad_d[mesh.right >= 0], n_tri) == 0

        dmp = np.zeros(n_tri, dtype=bool)
        for f_new, f_old in ((cand.rho_p, prev.rho_p), (cand.rhoE_p, prev.rhoE_p)):
            lo, hi = self._bounds(f_old.min(axis=-1), f_old.max(axis=-1))
            dmp |= self._check(f_new, lo, hi)
        # dual variables: per-triangle extrema over the 3 touching dual cells
        duals = [(cand.rho_d, prev.rho_d)] + [
            (cand.rhov_d[..., d], prev.rhov_d[..., d]) for d in range(2)
        ]
        te = mesh.tri_edges
        for f_new, f_old in duals:
            old_min = f_old.min(axis=-1)[te].min(axis=-1)
            old_max = f_old.max(axis=-1)[te].max(axis=-1)
            lo, hi = self._bounds(old_min, old_max)
            lo_e = np.minimum(lo[left], lo[right])
            hi_e = np.maximum(hi[left], hi[right])
            viol = self._check(f_new, lo_e, hi_e)
            dmp |= np.bincount(left, viol, n_tri) > 0
            m = mesh.right >= 0
            dmp |= np.bincount(right[m], viol[m], n_tri) > 0

        troubled = (~finite) | (~pos) | dmp
        return DetectionReport(
            troubled=troubled,
            n_positivity=int((~pos).sum()),
            n_dmp=int(dmp.sum()),
            n_nonfinite=int((~finite).sum()),
        )


def artificial_viscosity(report, mesh, gas, rho_mean, v_nodal, c_nodal, p_deg):
    """Viscosity field sized for unit mesh Reynolds number in troubled cells.

    mu_i = rho * s_max * h_s with s_max the largest nodal |v| + c in the
    cell and h_s = h_i / (2p+1); the heat conductivity uses a unit Prandtl
    number for the artificial part.  Dual cells take the max over owners.
    """
    n_tri = mesh.primal.n_tri
    s_max = (np.linalg.norm(v_nodal, axis=-1) + c_nodal).max(axis=-1)
    h_s = mesh.primal.h_circumcircle / (2 * p_deg + 1)
    mu_add = np.where(report.troubled, rho_mean * s_max * h_s, 0.0)
    mu_tri = gas.mu + mu_add
    lam_tri = gas.lam + mu_add * gas.gamma * gas.cv
    left = mesh.left
    right = np.maximum(mesh.right, 0)
    mu_edge = np.maximum(mu_tri[left], mu_tri[right])
    lam_edge = np.maximum(lam_tri[left], lam_tri[right])
    return ViscosityField(mu_tri, lam_tri, mu_edge, lam_edge, mu_add)


def base_viscosity(mesh, gas):
    """Physical (non-limited) viscosity field."""
    n_tri = mesh.primal.n_tri
    n_edge = mesh.n_edge
    return ViscosityField(
        mu_tri=np.full(n_tri, gas.mu),
        lam_tri=np.full(n_tri, gas.lam),
        mu_edge=np.full(n_edge, gas.mu),
        lam_edge=np.full(n_edge, gas.lam),
        mu_add=np.zeros(n_tri),
    )
