"""Sparse assembly of the implicit-step operators.

The semi-implicit update solves two global linear systems per Picard sweep:
the viscous momentum predictor and the pressure system (with an implicit
heat-flux term whenever viscosity is active).  Both are applied matrix-free
from the quadrature tables in :mod:`stagdg.operators`; this module assembles
the identical linear maps as sparse matrices so that a direct factorization
can precondition the Krylov solvers.  With strong, locally varying
artificial viscosity the mass-preconditioned iteration counts grow with
``dt * mu / h^2``; an LU preconditioner keeps them flat.

The assembled matrices are exact duplicates of the matrix-free operators
(the unit tests check this to round-off), so they could also be used for a
direct solve; using them as preconditioners keeps the quadrature-table
operators authoritative.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# sigma = mu (G + G^T - 2/3 tr(G) I) as a 4x4 mixing of the gradient
# components ordered (k, d) = (00, 01, 10, 11)
_STRESS_MIX = np.array(
    [
        [4.0 / 3.0, 0.0, 0.0, -2.0 / 3.0],
        [0.0, 1.0, 1.0, 0.0],
        [0.0, 1.0, 1.0, 0.0],
        [-2.0 / 3.0, 0.0, 0.0, 4.0 / 3.0],
    ]
)


def _block_diag(blocks) -> sp.bsr_matrix:
    """Block-diagonal sparse matrix from an (N, r, c) stack of dense blocks."""
    n = blocks.shape[0]
    return sp.bsr_matrix(
        (blocks, np.arange(n), np.arange(n + 1)),
        shape=(n * blocks.shape[1], n * blocks.shape[2]),
    ).tocsr()


def _coo(rows, cols, vals, shape) -> sp.csr_matrix:
    a = sp.coo_matrix(
        (np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=shape
    )
    a.sum_duplicates()
    return a.tocsr()


class SparseTables:
    """Geometry-only sparse matrices shared by all assembled operators.

    Built once per :class:`~stagdg.operators.Operators` instance (access via
    :func:`tables`).  All index orderings match the raveled field layouts:
    primal scalar ``i * n_phi + n``, dual scalar ``j * n_psi + m``, trailing
    component/direction axes innermost.
    """

    def __init__(self, ops):
        mesh = ops.mesh
        st = ops.st
        nphi, npsi = st.n_phi, st.n_psi
        n_tri, n_edge = mesh.primal.n_tri, mesh.n_edge
        NP, ND = n_tri * nphi, n_edge * npsi
        self.NP, self.ND = NP, ND
        c_tri, c_edge, c_sign = ops.c_tri, ops.c_edge, ops.c_sign
        left = mesh.left
        right = np.maximum(mesh.right, 0)

        def pdof(tri):
            return tri[:, None, None] * nphi + np.arange(nphi)[None, None, :]

        def ddof(edge):
            return edge[:, None, None] * npsi + np.arange(npsi)[None, :, None]

        # --- weak divergence, one matrix per direction: primal <- dual
        self.D = []
        for d in range(2):
            rows = [c_tri[:, None, None] * nphi + np.arange(nphi)[None, :, None]]
            cols = [c_edge[:, None, None] * npsi + np.arange(npsi)[None, None, :]]
            vals = [ops.Dvol[:, :, :, d]]
            edge_tab = np.where(
                (c_sign > 0)[:, None, None],
                ops.Dedge_l[c_edge, :, :, d],
                -ops.Dedge_r[c_edge, :, :, d],
            )
            rows.append(rows[0])
            cols.append(cols[0])
            vals.append(edge_tab)
            self.D.append(
                _coo(
                    np.concatenate([np.broadcast_to(r, v.shape).ravel() for r, v in zip(rows, vals)]),
                    np.concatenate([np.broadcast_to(c, v.shape).ravel() for c, v in zip(cols, vals)]),
                    np.concatenate([v.ravel() for v in vals]),
                    (NP, ND),
                )
            )

        # --- pressure gradient, one matrix per direction: dual <- primal
        w_int = ops.b_int.astype(float)
        w_dir = ops.b_dirichlet.astype(float)
        self.Q = []
        for d in range(2):
            rows, cols, vals = [], [], []
            for side, tri, tab in (
                (0, left, ops.Qvol[:, 0, :, :, d]),
                (1, right, ops.Qvol[:, 1, :, :, d]),
            ):
                rows.append(ddof(tri * 0 + np.arange(n_edge)))
                cols.append(pdof(tri))
                vals.append(tab)
            je = np.arange(n_edge)
            rows.append(ddof(je))
            cols.append(pdof(right))
            vals.append(w_int[:, None, None] * ops.Qedge_r[:, :, :, d])
            rows.append(ddof(je))
            cols.append(pdof(left))
            vals.append(-(w_int + w_dir)[:, None, None] * ops.Qedge_l[:, :, :, d])
            self.Q.append(
                _coo(
                    np.concatenate([np.broadcast_to(r, v.shape).ravel() for r, v in zip(rows, vals)]),
                    np.concatenate([np.broadcast_to(c, v.shape).ravel() for c, v in zip(cols, vals)]),
                    np.concatenate([v.ravel() for v in vals]),
                    (ND, NP),
                )
            )

        # --- lifting: edge-jump moments contracted against the traces,
        #     A_l[j, m, n, d] = sum_q Gjump[j, m, q, d] ephi_l[j, q, n]
        A_l = np.einsum("jmqd,jqn->jmnd", ops.Gjump, ops.ephi_l, optimize=True)
        A_r = np.einsum("jmqd,jqn->jmnd", ops.Gjump, ops.ephi_r, optimize=True)
        self._A_l, self._A_r = A_l, A_r
        # exterior-trace factor for the scalar jump: interior edges use the
        # genuine neighbour trace instead
        self._fac = {}
        for kind in ("velocity", "temperature"):
            fac = np.ones(n_edge)
            fac[ops.b_dirichlet] = 0.0
            if kind == "velocity":
                fac[ops.b_noslip] = -1.0
                # slip walls keep fac 1 here; the normal reflection adds the
                # cross-component term assembled in lift_vector below
            self._fac[kind] = fac

        mbar_bd = _block_diag(ops.Mbar_inv)
        ms_bd = _block_diag(ops.Ms)
        self.Ms_bd = ms_bd
        self.Ms_bd_vec = sp.kron(ms_bd, sp.identity(2), format="csr")
        self.Mbar_inv_bd = mbar_bd

        je = np.arange(n_edge)

        def lift_scalar(kind, d):
            fac = self._fac[kind]
            # volume part: Gvol[c, m, n, d] scattered to (edge(c), m) x (tri(c), n)
            vol_rows = c_edge[:, None, None] * npsi + np.arange(npsi)[None, :, None]
            vol_cols = c_tri[:, None, None] * nphi + np.arange(nphi)[None, None, :]
            vol_vals = ops.Gvol[:, :, :, d]
            jl = -A_l[:, :, :, d]
            jr = w_int[:, None, None] * A_r[:, :, :, d]
            jb = ((1.0 - w_int) * fac)[:, None, None] * A_l[:, :, :, d]
            raw = _coo(
                np.concatenate(
                    [
                        np.broadcast_to(vol_rows, vol_vals.shape).ravel(),
                        np.broadcast_to(ddof(je), jl.shape).ravel(),
                        np.broadcast_to(ddof(je), jr.shape).ravel(),
                        np.broadcast_to(ddof(je), jb.shape).ravel(),
                    ]
                ),
                np.concatenate(
                    [
                        np.broadcast_to(vol_cols, vol_vals.shape).ravel(),
                        np.broadcast_to(pdof(left), jl.shape).ravel(),
                        np.broadcast_to(pdof(right), jr.shape).ravel(),
                        np.broadcast_to(pdof(left), jb.shape).ravel(),
                    ]
                ),
                np.concatenate([vol_vals.ravel(), jl.ravel(), jr.ravel(), jb.ravel()]),
                (ND, NP),
            )
            return (mbar_bd @ raw).tocsr()

        self.L_temp = [lift_scalar("temperature", d) for d in range(2)]
        self._L_vel_scalar = [lift_scalar("velocity", d) for d in range(2)]

        # --- vector lifting (velocity): dof order ((j m) k d) <- ((i n) k)
        sel_in = [
            sp.csr_matrix(
                (np.ones(2), (np.array([0, 1]) * 2 + d, np.array([0, 1]))),
                shape=(4, 2),
            )
            for d in range(2)
        ]
        lv = sum(sp.kron(self._L_vel_scalar[d], sel_in[d]) for d in range(2))
        if ops.b_slip.any():
            # slip reflection: jump_k = -2 n_k n_l (trace_l)_l
            js = np.where(ops.b_slip)[0]
            nrm = mesh.normal[js]
            mb4 = sp.kron(mbar_bd, sp.identity(4), format="csr")
            rows, cols, vals = [], [], []
            for k in range(2):
                for d in range(2):
                    for l in range(2):
                        r = (ddof(js) * 4 + k * 2 + d)[..., None]
                        c = (pdof(left[js]) * 2 + l)[:, :, :]
                        v = (
                            -2.0
                            * (nrm[:, k] * nrm[:, l])[:, None, None]
                            * A_l[js, :, :, d]
                        )
                        rows.append(np.broadcast_to(r.squeeze(-1), v.shape).ravel())
                        cols.append(np.broadcast_to(c, v.shape).ravel())
                        vals.append(v.ravel())
            slip = _coo(
                np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                (ND * 4, NP * 2),
            )
            lv = lv + mb4 @ slip
        self.L_vel_vec = lv.tocsr()

        # --- vector divergence: ((i n) k) <- ((j m) k d)
        sel_out = [
            sp.csr_matrix(
                (np.ones(2), (np.array([0, 1]), np.array([0, 1]) * 2 + d)),
                shape=(2, 4),
            )
            for d in range(2)
        ]
        self.D_vec = sum(sp.kron(self.D[d], sel_out[d]) for d in range(2)).tocsr()

        self.n_edge, self.npsi, self.nphi = n_edge, npsi, nphi


def tables(ops) -> SparseTables:
    """The cached :class:`SparseTables` for one operator set."""
    t = getattr(ops, "_sparse_tables", None)
    if t is None:
        t = SparseTables(ops)
        ops._sparse_tables = t
    return t


def viscous_matrix(ops, mu_edge) -> sp.csr_matrix:
    """z -> div(sigma(lift(z))) on stacked primal vector dofs (2 NP)."""
    t = tables(ops)
    mu_rep = np.repeat(np.asarray(mu_edge, dtype=float), t.npsi)
    stress = sp.kron(sp.diags(mu_rep), sp.csr_matrix(_STRESS_MIX))
    return (t.D_vec @ stress @ t.L_vel_vec).tocsr()


def momentum_matrix(ops, dt, rho_slab, mu_edge) -> sp.csc_matrix:
    """Space-time matrix of the implicit viscous momentum predictor.

    Matches the matrix-free operator
    ``tev (x) Ms z - dt w D(sigma(mu lift(z / rho)))`` on slabs laid out as
    ``(n_t, N_i, n_phi, 2)``.
    """
    st = ops.st
    t = tables(ops)
    tev = st.t_evolve
    w = st.time.weights
    ng = st.n_gamma
    visc = viscous_matrix(ops, mu_edge)
    blocks = [[None] * ng for _ in range(ng)]
    for a in range(ng):
        rinv = np.repeat(1.0 / rho_slab[a].ravel(), 2)
        va = (visc @ sp.diags(rinv)).tocsr()
        for b in range(ng):
            blk = tev[a, b] * t.Ms_bd_vec
            if a == b:
                blk = blk - dt * w[a] * va
            blocks[a][b] = blk
    return sp.bmat(blocks, format="csc")


def pressure_matrix(
    ops, gas, dt, theta, h_dual, lam_edge=None, rho_slab=None
) -> sp.csc_matrix:
    """Space-time matrix of the pressure system on slabs ``(n_t, N_i, n_phi)``.

    Matches the matrix-free operator from
    :func:`stagdg.pressure.make_pressure_operator`, plus (when ``lam_edge``
    is given) the implicit heat-flux term
    ``- dt w D(lam lift(T(rho, p)))`` with ``rho`` frozen at ``rho_slab``.
    """
    st = ops.st
    t = tables(ops)
    if st.p_gamma > 0:
        theta = 1.0
    tev, tinv = st.t_evolve, st.t_evolve_inv
    w = st.time.weights
    ng = st.n_gamma
    gm1 = gas.gamma - 1.0
    wh = ops.weighted_dual_mass(h_dual)
    proj = np.einsum(
        "jnm,ajmk,jkl->ajnl", ops.Mbar_inv, wh, ops.Mbar_inv, optimize=True
    )
    heat = None
    if lam_edge is not None and np.asarray(lam_edge).max() > 0:
        lam_rep = np.repeat(np.asarray(lam_edge, dtype=float), t.npsi)
        heat = sum(t.D[d] @ sp.diags(lam_rep) @ t.L_temp[d] for d in range(2))
    blocks = [[None] * ng for _ in range(ng)]
    for a in range(ng):
        pa = _block_diag(proj[a])
        dpq = sum(t.D[d] @ pa @ t.Q[d] for d in range(2))
        for b in range(ng):
            blk = (tev[a, b] / gm1) * t.Ms_bd
            blk = blk - (theta * dt) ** 2 * w[a] * tinv[a, b] * w[b] * dpq
            if heat is not None and a == b:
                tlin = sp.diags(1.0 / (gas.R * rho_slab[a].ravel()))
                blk = blk - dt * w[a] * (heat @ tlin)
            blocks[a][b] = blk
    return sp.bmat(blocks, format="csc")


class LUPreconditioner:
    """Sparse-LU application wrapper usable as a Krylov preconditioner."""

    def __init__(self, matrix: sp.csc_matrix):
        self.shape = matrix.shape
        self._lu = spla.splu(matrix)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return self._lu.solve(r.ravel()).reshape(r.shape)
