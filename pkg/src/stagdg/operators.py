"""Discrete operators on the staggered grid pair.

Everything is driven by a single set of quadrature point tables: per
sub-cell (triangle basis, its physical gradient and the overlapping dual
basis at shared points) and per edge (both triangle traces and the dual
basis).  Because every integral in the scheme -- mass matrices, averaging,
gradients, divergences and fluxes -- is evaluated on the same tables, the
discrete compatibility identities (constant preservation, telescoping
conservation, gradient/divergence duality) hold to machine precision even
though the dual basis is rational in physical coordinates.

Field layout: primal scalar (..., N_tri, n_phi), dual scalar
(..., N_edge, n_psi); vectors carry a trailing axis of length 2.  Leading
axes (e.g. time slices) broadcast through every operator.
"""

from __future__ import annotations

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

from . import mesh as msh
from .basis import SpaceTimeBasis, inverse_bilinear, make_quadrature


def rusanov_flux(qm, qp, vnm, vnp):
    """Rusanov transport flux for q v.n with wave speed max(|v-.n|, |v+.n|).

    The sound speed is deliberately excluded: only the nonlinear transport
    part is stabilized this way, the acoustics are treated implicitly.
    """
    smax = np.maximum(np.abs(vnm), np.abs(vnp))
    return 0.5 * (qm * vnm + qp * vnp) - 0.5 * smax * (qp - qm)


class Operators:
    """Precomputed geometry-dependent tables and matrices for one mesh."""

    def __init__(self, mesh: msh.StaggeredMesh, st: SpaceTimeBasis):
        self.mesh = mesh
        self.st = st
        p = st.p
        pm = mesh.primal
        nodes = pm.nodes
        n_tri = pm.n_tri
        n_edge = mesh.n_edge
        nphi = st.n_phi
        npsi = st.n_psi

        # --- sub-cell bookkeeping: c = 3*i + loc, edge j = tri_edges[i, loc]
        self.c_tri = np.repeat(np.arange(n_tri), 3)
        self.c_edge = mesh.tri_edges.ravel()
        self.c_sign = mesh.tri_sign.ravel()
        n_sub = 3 * n_tri
        self.n_sub = n_sub
        # sub-cell index per edge side (0: left, 1: right); n_sub pads missing
        es = np.full((n_edge, 2), n_sub, dtype=np.int64)
        for c in range(n_sub):
            es[self.c_edge[c], 0 if self.c_sign[c] > 0 else 1] = c
        self.edge_sub = es

        # --- affine maps of the primal triangles
        v0 = nodes[pm.triangles[:, 0]]
        jac = np.stack(
            [nodes[pm.triangles[:, 1]] - v0, nodes[pm.triangles[:, 2]] - v0], axis=-1
        )  # (N_i, 2, 2), columns are edge vectors
        self.tri_v0 = v0
        self.tri_jac_inv = np.linalg.inv(jac)

        # shift mapping each sub-cell's triangle frame into its edge frame
        c_shift = mesh.shift[self.c_edge] * (self.c_sign < 0)[:, None]
        self.c_shift = c_shift

        # --- volume tables (one affine-mapped triangle rule per sub-cell)
        rule = make_quadrature("triangle", 2 * p + 2)
        nq = len(rule.weights)
        self.nq_v = nq
        e1, e2 = mesh.edge_nodes[self.c_edge, 0], mesh.edge_nodes[self.c_edge, 1]
        p1 = nodes[e1] - c_shift
        p2 = nodes[e2] - c_shift
        p3 = pm.barycenter[self.c_tri]
        r0 = rule.points[:, 0]
        r1 = rule.points[:, 1]
        self.sub_x = (
            p1[:, None, :]
            + r0[None, :, None] * (p2 - p1)[:, None, :]
            + r1[None, :, None] * (p3 - p1)[:, None, :]
        )  # (N_c, nq, 2) in the owning triangle's frame (= global position)
        sub_area = 0.5 * np.abs(
            (p2[:, 0] - p1[:, 0]) * (p3[:, 1] - p1[:, 1])
            - (p2[:, 1] - p1[:, 1]) * (p3[:, 0] - p1[:, 0])
        )
        self.sub_w = 2.0 * sub_area[:, None] * rule.weights[None, :]

        ref = _ein(
            "cde,cqe->cqd",
            self.tri_jac_inv[self.c_tri],
            self.sub_x - v0[self.c_tri][:, None, :],
        )
        flat = ref.reshape(-1, 2)
        self.phi_v = st.tri.eval(flat).reshape(n_sub, nq, nphi)
        dref = st.tri.grad(flat).reshape(n_sub, nq, nphi, 2)
        self.dphi_v = _ein(
            "cqnr,crd->cqnd", dref, self.tri_jac_inv[self.c_tri]
        )
        qref = inverse_bilinear(
            mesh.quad_verts[self.c_edge][:, None, :, :], self.sub_x + c_shift[:, None, :]
        )
        self.psi_v = st.quad.eval(qref.reshape(-1, 2)).reshape(n_sub, nq, npsi)

        # --- edge tables (1D Gauss-Legendre along each edge, edge frame)
        from .basis import gauss_legendre_01

        te, we = gauss_legendre_01(p + 2)
        nqe = len(te)
        self.nq_e = nqe
        a = nodes[mesh.edge_nodes[:, 0]]
        b = nodes[mesh.edge_nodes[:, 1]]
        self.edge_x = a[:, None, :] + te[None, :, None] * (b - a)[:, None, :]
        self.edge_w = mesh.edge_len[:, None] * we[None, :]

        def tri_trace(tri_idx, pts):
            rr = _ein(
                "jde,jqe->jqd",
                self.tri_jac_inv[tri_idx],
                pts - self.tri_v0[tri_idx][:, None, :],
            )
            return st.tri.eval(rr.reshape(-1, 2)).reshape(n_edge, nqe, nphi)

        self.ephi_l = tri_trace(mesh.left, self.edge_x)
        r_safe = np.maximum(mesh.right, 0)
        self.ephi_r = tri_trace(r_safe, self.edge_x - mesh.shift[:, None, :])
        eref = inverse_bilinear(mesh.quad_verts[:, None, :, :], self.edge_x)
        self.epsi = st.quad.eval(eref.reshape(-1, 2)).reshape(n_edge, nqe, npsi)

        # --- mass and overlap matrices
        mc = _ein("cq,cqn,cqm->cnm", self.sub_w, self.phi_v, self.psi_v)
        self.Mc = mc  # (N_c, n_phi, n_psi) overlap on T_{i,j}
        self.Ms = (
            _ein("cq,cqn,cqm->cnm", self.sub_w, self.phi_v, self.phi_v)
            .reshape(n_tri, 3, nphi, nphi)
            .sum(axis=1)
        )
        self.Ms_inv = np.linalg.inv(self.Ms)
        mbar_c = _ein("cq,cqn,cqm->cnm", self.sub_w, self.psi_v, self.psi_v)
        self.Mbar = self._edge_sum(mbar_c)
        self.Mbar_inv = np.linalg.inv(self.Mbar)

        # --- pressure-gradient matrices, volume and edge parts per side
        qv = _ein("cq,cqm,cqnd->cmnd", self.sub_w, self.psi_v, self.dphi_v)
        self.Qvol = self._edge_gather(qv, axis=0)  # (N_e, 2, n_psi, n_phi, 2)
        self.Qedge_l = _ein(
            "jq,jqm,jqn,jd->jmnd", self.edge_w, self.epsi, self.ephi_l, mesh.normal
        )
        self.Qedge_r = _ein(
            "jq,jqm,jqn,jd->jmnd", self.edge_w, self.epsi, self.ephi_r, mesh.normal
        )

        # --- weak-divergence tables (quadrature contracted once)
        self.Dvol = -_ein(
            "cq,cqnd,cqm->cnmd", self.sub_w, self.dphi_v, self.psi_v
        )
        self.Dedge_l = _ein(
            "jq,jqn,jqm,jd->jnmd", self.edge_w, self.ephi_l, self.epsi, mesh.normal
        )
        self.Dedge_r = _ein(
            "jq,jqn,jqm,jd->jnmd", self.edge_w, self.ephi_r, self.epsi, mesh.normal
        )

        # --- lifting tables (volume gradient and edge-jump moments)
        self.Gvol = _ein(
            "cq,cqm,cqnd->cmnd", self.sub_w, self.psi_v, self.dphi_v
        )
        self.Gjump = _ein(
            "jq,jqm,jd->jmqd", self.edge_w, self.epsi, mesh.normal
        )

        # --- matmul-shaped copies of the hot tables.  einsum cannot use
        # BLAS once a batch index is present, so the inner application
        # loops below run as batched matmuls on these layouts instead.
        c = np.ascontiguousarray
        self.McT = c(self.Mc.swapaxes(-1, -2))
        self.Dvol_m = c(self.Dvol.reshape(n_sub, nphi, npsi * 2))
        self.Dedge_l_m = c(self.Dedge_l.reshape(n_edge, nphi, npsi * 2))
        self.Dedge_r_m = c(self.Dedge_r.reshape(n_edge, nphi, npsi * 2))
        self.Qvol_m = c(
            self.Qvol.transpose(0, 1, 2, 4, 3).reshape(n_edge, 2, npsi * 2, nphi)
        )
        self.Qedge_l_m = c(
            self.Qedge_l.transpose(0, 1, 3, 2).reshape(n_edge, npsi * 2, nphi)
        )
        self.Qedge_r_m = c(
            self.Qedge_r.transpose(0, 1, 3, 2).reshape(n_edge, npsi * 2, nphi)
        )
        self.Gvol_m = c(
            self.Gvol.transpose(0, 1, 3, 2).reshape(n_sub, npsi * 2, nphi)
        )
        self.Gjump_m = c(
            self.Gjump.transpose(0, 1, 3, 2).reshape(n_edge, npsi * 2, nqe)
        )
        self.ephi_lwT = c((self.edge_w[:, :, None] * self.ephi_l).transpose(0, 2, 1))
        self.ephi_rwT = c((self.edge_w[:, :, None] * self.ephi_r).transpose(0, 2, 1))

        # boundary classification
        self.b_int = mesh.interior
        self.b_slip = mesh.btype == msh.SLIPWALL
        self.b_noslip = mesh.btype == msh.NOSLIP
        self.b_dirichlet = mesh.btype == msh.DIRICHLET
        self.b_trans = mesh.btype == msh.TRANSMISSIVE

    # ------------------------------------------------------------------
    # small gather/scatter helpers (all pure, batch axes broadcast)

    def _edge_sum(self, arr, axis=-3):
        """Sum a per-sub-cell array onto edges (both sides where present)."""
        axis = axis % arr.ndim
        sh = list(arr.shape)
        sh[axis] = 1
        ap = np.concatenate([arr, np.zeros(sh)], axis=axis)
        return np.take(ap, self.edge_sub[:, 0], axis=axis) + np.take(
            ap, self.edge_sub[:, 1], axis=axis
        )

    def _edge_gather(self, arr, axis=-3):
        """Per-sub-cell array -> edge-by-side pair (zeros where absent)."""
        axis = axis % arr.ndim
        sh = list(arr.shape)
        sh[axis] = 1
        ap = np.concatenate([arr, np.zeros(sh)], axis=axis)
        return np.stack(
            [np.take(ap, self.edge_sub[:, 0], axis=axis),
             np.take(ap, self.edge_sub[:, 1], axis=axis)],
            axis=axis + 1,
        )

    def _tri_sum(self, arr, axis=-3):
        """Sum a per-sub-cell array over the 3 sub-cells of each triangle."""
        axis = axis % arr.ndim
        n_tri = self.mesh.primal.n_tri
        sh = arr.shape
        return arr.reshape(sh[:axis] + (n_tri, 3) + sh[axis + 1 :]).sum(axis=axis + 1)

    @staticmethod
    def _as_comp(z):
        """Append a component axis to scalar fields; report if it was added."""
        if z.shape[-1] == 2 and z.ndim >= 2 and z.shape[-2] != 2:
            return z, False
        return z[..., None], True

    # ------------------------------------------------------------------
    # averaging

    def avg_dual_to_primal(self, z):
        z, scal = self._as_comp(z)
        zc = z[..., self.c_edge, :, :]
        r = self._tri_sum(np.matmul(self.Mc, zc))
        out = np.matmul(self.Ms_inv, r)
        return out[..., 0] if scal else out

    def avg_primal_to_dual(self, z):
        z, scal = self._as_comp(z)
        zc = z[..., self.c_tri, :, :]
        r = self._edge_sum(np.matmul(self.McT, zc))
        out = np.matmul(self.Mbar_inv, r)
        return out[..., 0] if scal else out

    def tendency_primal_to_dual(self, r_primal):
        """Average a primal residual to the dual grid in weighted form.

        Returns sum over sides of Mc^T Ms^{-1} R_i, i.e. the dual-mass
        weighted average of the primal tendencies.
        """
        r, scal = self._as_comp(r_primal)
        t = np.matmul(self.Ms_inv, r)
        out = self._edge_sum(np.matmul(self.McT, t[..., self.c_tri, :, :]))
        return out[..., 0] if scal else out

    # ------------------------------------------------------------------
    # traces and boundary states

    def primal_edge_traces(self, Q):
        """(Q_left, Q_right) values at edge quadrature points."""
        Q, scal = self._as_comp(Q)
        ql = np.matmul(self.ephi_l, Q[..., self.mesh.left, :, :])
        qr = np.matmul(self.ephi_r, Q[..., np.maximum(self.mesh.right, 0), :, :])
        if scal:
            return ql[..., 0], qr[..., 0]
        return ql, qr

    def _exterior_values(self, qm, vm, kind, dirichlet):
        """Exterior trace values on boundary edges from the tagged condition.

        qm, vm: interior traces (..., N_e, nq_e, k) / (..., N_e, nq_e, 2).
        kind: "scalar" or "velocity" (mirror behaviour at walls).
        dirichlet: {state index: (q_value, v_value)} with constant data.
        """
        n = self.mesh.normal[:, None, :]
        qp = qm.copy()
        vp = vm.copy()
        for mask, flipq in ((self.b_slip, False), (self.b_noslip, True)):
            if not mask.any():
                continue
            vn = _ein("...jqd,jqd->...jq", vm[..., mask, :, :], n[mask])
            if flipq:
                vp[..., mask, :, :] = -vm[..., mask, :, :]
            else:
                vp[..., mask, :, :] = (
                    vm[..., mask, :, :] - 2.0 * vn[..., None] * n[mask]
                )
            if kind == "velocity":
                qp[..., mask, :, :] = vp[..., mask, :, :]
        if self.b_dirichlet.any():
            for s, (qd, vd) in (dirichlet or {}).items():
                mask = self.b_dirichlet & (self.mesh.bstate == s)
                qp[..., mask, :, :] = np.asarray(qd)
                vp[..., mask, :, :] = np.asarray(vd)
        return qp, vp

    # ------------------------------------------------------------------
    # convection (primal grid, Rusanov flux across primal edges)

    def conv_residual(self, Q, v, kind="scalar", dirichlet=None):
        """Weak residual of div(Q v) on the primal grid.

        Rusanov interface flux with wave speed max(|v-.n|, |v+.n|) (no sound
        speed: only the nonlinear transport is treated explicitly).  Returns
        the residual R such that M dQ/dt = -R (without any dt factor).
        """
        Q, scal = self._as_comp(Q)
        # volume term: -int grad(phi) . (Q v^T)
        qv = np.matmul(self.phi_v, Q[..., self.c_tri, :, :])
        vv = np.matmul(self.phi_v, v[..., self.c_tri, :, :])
        gv = np.matmul(self.dphi_v, vv[..., None])[..., 0]  # (..., c, q, n)
        vol = -np.matmul(
            gv.swapaxes(-1, -2), self.sub_w[:, :, None] * qv
        )
        r = self._tri_sum(vol)

        # edge term via Rusanov flux
        qm, qp0 = self.primal_edge_traces(Q if not scal else Q[..., 0])
        vm, vp0 = self.primal_edge_traces(v)
        if scal:
            qm, qp0 = qm[..., None], qp0[..., None]
        qp, vp = qp0, vp0
        if not self.b_int.all():
            bq, bv = self._exterior_values(
                qm, vm, "velocity" if kind == "momentum" else "scalar", dirichlet
            )
            bmask = ~self.b_int
            qp = qp0.copy()
            vp = vp0.copy()
            qp[..., bmask, :, :] = bq[..., bmask, :, :]
            vp[..., bmask, :, :] = bv[..., bmask, :, :]
        n = self.mesh.normal[:, None, :]
        vnm = _ein("...jqd,jqd->...jq", vm, n)
        vnp = _ein("...jqd,jqd->...jq", vp, n)
        fhat = rusanov_flux(qm, qp, vnm[..., None], vnp[..., None])
        fl = np.matmul(self.ephi_lwT, fhat)
        fr = np.matmul(self.ephi_rwT, fhat)
        sgn = self.c_sign[:, None, None]
        per_sub = np.where(
            (self.c_sign > 0)[:, None, None],
            fl[..., self.c_edge, :, :],
            fr[..., self.c_edge, :, :],
        ) * sgn
        r = r + self._tri_sum(per_sub)
        return r[..., 0] if scal else r

    # ------------------------------------------------------------------
    # pressure gradient and its transpose-flavoured divergence

    def apply_Q(self, pfield, dirichlet=None):
        """Weak gradient functional over each dual cell: volume + edge jump.

        Returns (..., N_e, n_psi, 2).  On wall/transmissive boundaries the
        exterior trace copies the interior one (zero jump); Dirichlet edges
        use the frozen exterior value (pass {state: value}; omitted states
        are treated as homogeneous, which is the right operator part when
        building a linear system in pfield).
        """
        npsi = self.psi_v.shape[-1]
        pl = pfield[..., self.mesh.left, :, None]
        pr = pfield[..., np.maximum(self.mesh.right, 0), :, None]
        out = np.matmul(self.Qvol_m[:, 0], pl) + np.matmul(self.Qvol_m[:, 1], pr)
        # interior jump: + int psi n (p_r - p_l)
        w = np.where(self.b_int, 1.0, 0.0)[:, None, None]
        out = out + w * (
            np.matmul(self.Qedge_r_m, pr) - np.matmul(self.Qedge_l_m, pl)
        )
        if self.b_dirichlet.any():
            wd = np.where(self.b_dirichlet, 1.0, 0.0)[:, None, None]
            out = out - wd * np.matmul(self.Qedge_l_m, pl)
        n_edge = self.mesh.n_edge
        out = out[..., 0].reshape(out.shape[:-3] + (n_edge, npsi, 2))
        if self.b_dirichlet.any() and dirichlet:
            pd = np.zeros(n_edge)
            for s, val in dirichlet.items():
                pd[self.b_dirichlet & (self.mesh.bstate == s)] = val
            out = out + _ein(
                "jq,jqm,jd,j->jmd", self.edge_w, self.epsi, self.mesh.normal, pd
            )
        return out

    def apply_div(self, z):
        """Weak divergence of a dual vector field against the primal basis.

        Sum over j of D_ij z_j: minus volume term plus single-valued
        interface flux on the inner edges.  Boundary edges contribute their
        edge term only through the owning triangle.

        z: (..., N_e, n_psi, 2), or (..., N_e, n_psi, k, 2) for fields
        carrying a component axis (e.g. a stress tensor, row-wise); the
        component axis is preserved in the result.
        """
        npsi = self.psi_v.shape[-1]
        if z.ndim >= 4 and z.shape[-2] != npsi and z.shape[-3] == npsi:
            zk = np.moveaxis(z, -2, 0)
            return np.moveaxis(self.apply_div(zk), 0, -1)
        zf = z.reshape(z.shape[:-2] + (npsi * 2, 1))
        zc = zf[..., self.c_edge, :, :]
        vol = np.matmul(self.Dvol_m, zc)[..., 0]
        fl = np.matmul(self.Dedge_l_m, zf)[..., 0]
        fr = np.matmul(self.Dedge_r_m, zf)[..., 0]
        per_sub = np.where(
            (self.c_sign > 0)[:, None],
            fl[..., self.c_edge, :],
            fr[..., self.c_edge, :],
        ) * self.c_sign[:, None]
        return self._tri_sum(vol + per_sub, axis=-2)

    def weighted_dual_mass(self, h_dual):
        """H-weighted dual mass matrices from point values of a dual field."""
        hv = np.matmul(self.psi_v, h_dual[..., self.c_edge, :, None])
        wm = np.matmul(
            self.psi_v.swapaxes(-1, -2),
            (self.sub_w[:, :, None] * hv) * self.psi_v,
        )
        return self._edge_sum(wm)

    def project_weighted(self, h_dual, z):
        """L2 projection of (H z) onto the dual space, H given as dual field."""
        wh = self.weighted_dual_mass(h_dual)
        z, scal = self._as_comp(z)
        out = np.matmul(self.Mbar_inv, np.matmul(wh, z))
        return out[..., 0] if scal else out

    def apply_E(self, h_dual, z):
        """Energy divergence: D applied to the projection of H z."""
        return self.apply_div(self.project_weighted(h_dual, z))

    # ------------------------------------------------------------------
    # lifting (weak gradients of primal fields on dual cells)

    def lift_gradient(self, u, kind="velocity", dirichlet=None):
        """Weak gradient of a primal field on each dual cell.

        Per dual cell: both sub-cell volume integrals of the broken gradient
        plus the inner-edge jump lifting (u_r - u_l) x n, solved against the
        dual mass matrix.  kind selects the exterior trace at boundaries:
        "velocity" mirrors at walls, "temperature" copies (adiabatic walls).
        Returns (..., N_e, n_psi, k, 2).
        """
        u, scal = self._as_comp(u)
        npsi = self.psi_v.shape[-1]

        def md_to_kd(arr):
            # (..., (m d), k) -> (..., m, k, d)
            a = arr.reshape(arr.shape[:-2] + (npsi, 2) + arr.shape[-1:])
            return a.swapaxes(-1, -2)

        rhs = self._edge_sum(
            md_to_kd(np.matmul(self.Gvol_m, u[..., self.c_tri, :, :])),
            axis=-4,
        )
        um, up0 = self.primal_edge_traces(u if not scal else u[..., 0])
        if scal:
            um, up0 = um[..., None], up0[..., None]
        up = up0
        if not self.b_int.all():
            if kind == "velocity":
                bq, _ = self._exterior_values(um, um, "velocity", dirichlet)
            else:
                bq = um.copy()
                if self.b_dirichlet.any():
                    for s, qd in (dirichlet or {}).items():
                        mask = self.b_dirichlet & (self.mesh.bstate == s)
                        bq[..., mask, :, :] = np.asarray(qd)
            bmask = ~self.b_int
            up = up0.copy()
            up[..., bmask, :, :] = bq[..., bmask, :, :]
        jump = up - um
        rhs = rhs + md_to_kd(np.matmul(self.Gjump_m, jump))
        k2 = rhs.shape[-2] * 2
        out = np.matmul(
            self.Mbar_inv, rhs.reshape(rhs.shape[:-2] + (k2,))
        ).reshape(rhs.shape)
        return out[..., 0, :] if scal else out

    # ------------------------------------------------------------------
    # evaluation helpers (norms, initial data, diagnostics)

    def primal_values(self, Q):
        """Values of a primal field at all volume quadrature points (N_c, nq)."""
        Q, scal = self._as_comp(Q)
        out = np.matmul(self.phi_v, Q[..., self.c_tri, :, :])
        return out[..., 0] if scal else out

    def dual_values(self, z):
        z, scal = self._as_comp(z)
        out = np.matmul(self.psi_v, z[..., self.c_edge, :, :])
        return out[..., 0] if scal else out

    def integrate(self, vals):
        """Integrate point values over the domain (per-sub-cell tables)."""
        return _ein("cq,...cq->...", self.sub_w, vals)

    def primal_means(self, Q):
        """Cell averages of a primal field."""
        vals = self.primal_values(Q)
        cell = _ein("cq,...cq->...c", self.sub_w, vals)
        return self._tri_sum(cell, axis=-1) / self.mesh.primal.area

    def project_primal(self, func):
        """L2-project a callable f(x, y) onto the primal space."""
        vals = func(self.sub_x[..., 0], self.sub_x[..., 1])
        vals = np.asarray(vals)
        r = self._tri_sum(
            _ein("cq,cqn,...cq->...cn", self.sub_w, self.phi_v, vals), axis=-2
        )
        return _ein("inm,...im->...in", self.Ms_inv, r)

    def project_dual(self, func):
        """L2-project a callable f(x, y) onto the dual space.

        Evaluation uses edge-frame positions so periodic cells see a
        consistent argument; pass periodic-aware callables for such meshes.
        """
        x = self.sub_x + self.c_shift[:, None, :]
        vals = np.asarray(func(x[..., 0], x[..., 1]))
        r = self._edge_sum(
            _ein("cq,cqm,...cq->...cm", self.sub_w, self.psi_v, vals)[..., None]
        )[..., 0]
        return _ein("jnm,...jm->...jn", self.Mbar_inv, r)


def stress_tensor(grad, mu):
    """Viscous stress with the Stokes hypothesis from a velocity gradient.

    grad: (..., N_e, n_psi, 2, 2) with grad[..., k, d] = d v_k / d x_d;
    mu: effective viscosity per dual cell (N_e,).
    """
    mu = np.asarray(mu)[:, None, None, None]
    sym = grad + np.swapaxes(grad, -1, -2)
    div = grad[..., 0, 0] + grad[..., 1, 1]
    out = mu * sym
    out[..., 0, 0] -= (2.0 / 3.0) * mu[..., 0, 0] * div
    out[..., 1, 1] -= (2.0 / 3.0) * mu[..., 0, 0] * div
    return out
