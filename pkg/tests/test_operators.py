"""Discrete operator identities: mass/overlap matrices, averaging,
convective residuals, pressure gradient/divergence, gradient lifting."""

import numpy as np
import pytest

from stagdg import mesh as msh
from stagdg.basis import SpaceTimeBasis
from stagdg.operators import Operators, rusanov_flux, stress_tensor
from conftest import ALL_PERIODIC, ALL_WALL, small_mesh, two_triangle_mesh


def ref_triangle_ops(p, p_gamma):
    pm = msh.PrimalMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
                        np.array([[0, 1, 2]]))
    tags = {tuple(sorted(e)): "transmissive"
            for e in [(0, 1), (1, 2), (0, 2)]}
    return Operators(msh.build_staggered(pm, tags), SpaceTimeBasis(p, p_gamma))


# ----------------------------------------------------------------------
# element matrices


def test_p1_reference_triangle_mass_matrix():
    ops = ref_triangle_ops(1, 0)
    M = ops.Ms[0]
    expect = np.full((3, 3), 1.0 / 24.0)
    np.fill_diagonal(expect, 1.0 / 12.0)
    assert np.allclose(M, expect, atol=1e-14)


def test_p0_overlap_matrix_is_sub_cell_area():
    ops = ref_triangle_ops(0, 0)
    # per unit time step: the primal/dual overlap block reduces to the
    # sub-cell area
    areas = ops.sub_w.sum(axis=1)
    assert np.allclose(ops.Mc[:, 0, 0], areas, rtol=1e-13)


def test_mass_matrix_symmetry_p_gamma0():
    ops = ref_triangle_ops(3, 0)
    M = ops.Ms[0]
    assert np.abs(M - M.T).max() < 1e-13 * np.abs(M).max()


def test_divergence_of_constant_vanishes(periodic_ops):
    ops = periodic_ops
    z = np.stack([ops.project_dual(lambda x, y: np.full_like(x, 1.3)),
                  ops.project_dual(lambda x, y: np.full_like(x, -0.4))],
                 axis=-1)
    div = ops.apply_div(z)
    assert np.abs(div).max() < 1e-12


# ----------------------------------------------------------------------
# staggered averaging


def test_averaging_preserves_constants(periodic_ops):
    ops = periodic_ops
    z = ops.project_dual(lambda x, y: np.full_like(x, 2.7))
    Q = ops.avg_dual_to_primal(z)
    assert np.allclose(ops.primal_values(Q), 2.7, atol=1e-12)
    z2 = ops.avg_primal_to_dual(Q)
    assert np.allclose(ops.dual_values(z2), 2.7, atol=1e-12)


def test_averaging_exact_on_linears(wall_ops):
    ops = wall_ops
    f = lambda x, y: 0.8 * x - 1.1 * y + 0.3
    xq, yq = ops.sub_x[..., 0], ops.sub_x[..., 1]
    Q = ops.avg_dual_to_primal(ops.project_dual(f))
    assert np.abs(ops.primal_values(Q) - f(xq, yq)).max() < 1e-11
    z = ops.avg_primal_to_dual(ops.project_primal(f))
    assert np.abs(ops.dual_values(z) - f(xq, yq)).max() < 1e-11


def test_single_triangle_p0_average_is_area_weighted_mean():
    ops = ref_triangle_ops(0, 0)
    z = np.array([[0.5], [2.0], [3.5]])
    Q = ops.avg_dual_to_primal(z)
    areas = ops.sub_w.sum(axis=1)
    expect = (areas * z[:, 0]).sum() / areas.sum()
    assert Q[0, 0] == pytest.approx(expect, rel=1e-13)


# ----------------------------------------------------------------------
# Rusanov flux and convective residual


def test_rusanov_consistency():
    q, vn = 0.7, 1.3
    assert rusanov_flux(q, q, vn, vn) == pytest.approx(q * vn, rel=1e-15)


def test_rusanov_sod_interface_value():
    assert rusanov_flux(1.0, 0.125, 1.0, 0.0) == pytest.approx(0.9375)


def test_rusanov_zero_velocity():
    assert rusanov_flux(1.0, 0.125, 0.0, 0.0) == 0.0


def test_uniform_state_zero_convective_residual(periodic_ops):
    ops = periodic_ops
    Q = ops.project_primal(lambda x, y: np.full_like(x, 1.7))
    v = np.stack([ops.project_primal(lambda x, y: np.full_like(x, 0.6)),
                  ops.project_primal(lambda x, y: np.full_like(x, -0.9))],
                 axis=-1)
    r = ops.conv_residual(Q, v)
    assert np.abs(r).max() < 1e-12


def test_convective_residual_conservation(periodic_ops, rng):
    """Telescoping interface fluxes: the global sum of the residual
    (integral of div(Qv)) vanishes on a periodic mesh."""
    ops = periodic_ops
    n_tri, nphi = ops.mesh.primal.n_tri, ops.phi_v.shape[-1]
    Q = 1.0 + 0.3 * rng.standard_normal((n_tri, nphi))
    v = 0.5 * rng.standard_normal((n_tri, nphi, 2))
    r = ops.conv_residual(Q, v)
    assert abs(r.sum()) < 1e-11 * np.abs(r).sum()


# ----------------------------------------------------------------------
# gradient lifting, stress, heat flux


def test_lift_uniform_velocity_zero_gradient(wall_ops):
    ops = wall_ops
    v = np.stack([ops.project_primal(lambda x, y: np.full_like(x, 1.1)),
                  ops.project_primal(lambda x, y: np.full_like(x, -2.2))],
                 axis=-1)
    g = ops.lift_gradient(v)
    assert np.abs(g).max() < 1e-12


def test_lift_exact_on_linear_velocity(wall_ops):
    ops = wall_ops
    A = np.array([[0.7, -0.2], [1.3, 0.4]])  # v_k = A[k] . (x, y)
    v = np.stack([ops.project_primal(lambda x, y: A[0, 0] * x + A[0, 1] * y),
                  ops.project_primal(lambda x, y: A[1, 0] * x + A[1, 1] * y)],
                 axis=-1)
    g = ops.lift_gradient(v)  # (n_edge, npsi, k, d)
    vals = ops.dual_values(g.reshape(g.shape[0], g.shape[1], 4))
    expect = A.reshape(4)
    assert np.abs(vals - expect).max() < 1e-11


def test_lift_pure_jump_p0():
    """Piecewise-constant velocity jump across the single interior edge:
    the lifted gradient is (v_r - v_l) (x) n * |edge| / |dual cell|."""
    pm, tags = msh.generate_rectangle(0.0, 1.0, 0.0, 1.0, 1, 1, ALL_WALL)
    sm = msh.build_staggered(pm, tags)
    ops = Operators(sm, SpaceTimeBasis(0, 0))
    j = int(np.argmax(sm.right >= 0))
    v0 = np.array([0.8, -0.5])
    v = np.zeros((2, 1, 2))
    v[sm.right[j], 0] = v0  # right owner carries the jump
    g = ops.lift_gradient(v)
    n = sm.normal[j]
    expect = np.outer(v0, n) * sm.edge_len[j] * 3.0  # |R_j| = 1/3
    assert np.allclose(g[j, 0], expect, atol=1e-12)
    # boundary dual cells see no jump and constant data: zero gradient
    mask = np.ones(sm.n_edge, dtype=bool)
    mask[j] = False
    assert np.abs(g[mask]).max() < 1e-12


def test_stress_tensor_identities():
    mu = 0.7
    # grad v = I -> sigma = 2 mu I - (2/3) mu tr I = diag(2mu/3)
    g = np.eye(2)
    s = stress_tensor(g[None, None], np.array([mu]))
    assert np.allclose(s[0, 0], (2.0 * mu / 3.0) * np.eye(2), atol=1e-14)
    # antisymmetric gradient (rigid rotation) -> zero stress
    rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
    s = stress_tensor(rot[None, None], np.array([mu]))
    assert np.abs(s).max() < 1e-14
    # zero viscosity -> zero stress
    s = stress_tensor(g[None, None], np.array([0.0]))
    assert np.abs(s).max() == 0.0


def test_heat_flux_zero_for_uniform_temperature(wall_ops):
    ops = wall_ops
    T = ops.project_primal(lambda x, y: np.full_like(x, 3.3))
    g = ops.lift_gradient(T[..., None], kind="temperature")
    assert np.abs(g).max() < 1e-12


def test_heat_flux_exact_on_linear_temperature(wall_ops):
    ops = wall_ops
    T = ops.project_primal(lambda x, y: 0.4 * x - 0.9 * y)
    g = ops.lift_gradient(T[..., None], kind="temperature")
    vals = ops.dual_values(g.reshape(g.shape[0], g.shape[1], 2))
    assert np.abs(vals - np.array([0.4, -0.9])).max() < 1e-11


# ----------------------------------------------------------------------
# weighted dual mass / enthalpy contraction


def test_project_weighted_identity_for_unit_weight(periodic_ops, rng):
    ops = periodic_ops
    npsi = ops.psi_v.shape[-1]
    h = np.ones((ops.mesh.n_edge, npsi))
    z = rng.standard_normal((ops.mesh.n_edge, npsi))
    out = ops.project_weighted(h, z)
    assert np.abs(out - z).max() < 1e-11


def test_apply_E_constant_enthalpy_reduces_to_divergence(periodic_ops, rng):
    ops = periodic_ops
    npsi = ops.psi_v.shape[-1]
    h0 = 2.6
    h = np.zeros((ops.mesh.n_edge, npsi))
    h[:] = ops.project_dual(lambda x, y: np.full_like(x, h0))
    z = rng.standard_normal((ops.mesh.n_edge, npsi, 2))
    lhs = ops.apply_E(h, z)
    rhs = h0 * ops.apply_div(z)
    assert np.abs(lhs - rhs).max() < 1e-11 * max(1.0, np.abs(rhs).max())


def test_apply_E_zero_momentum(periodic_ops):
    ops = periodic_ops
    npsi = ops.psi_v.shape[-1]
    h = np.ones((ops.mesh.n_edge, npsi))
    z = np.zeros((ops.mesh.n_edge, npsi, 2))
    assert np.abs(ops.apply_E(h, z)).max() == 0.0
