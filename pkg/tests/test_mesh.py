"""Primal/dual mesh construction, geometry and file round-trip."""

import os

import numpy as np
import pytest

from stagdg import mesh as msh
from conftest import ALL_PERIODIC, ALL_WALL, small_mesh, two_triangle_mesh


def test_two_triangles_one_interior_edge():
    sm = two_triangle_mesh()
    interior = (sm.right >= 0).sum()
    boundary = (sm.right < 0).sum()
    assert interior == 1
    assert boundary == 4


def test_single_triangle_three_boundary_half_cells():
    pm = msh.PrimalMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
                        np.array([[0, 1, 2]]))
    tags = {tuple(sorted(e)): "transmissive"
            for e in [(0, 1), (1, 2), (0, 2)]}
    sm = msh.build_staggered(pm, tags)
    assert (sm.right >= 0).sum() == 0
    assert (sm.right < 0).sum() == 3


def test_interior_quad_area_two_triangles():
    """Unit square split in two: the interior dual quad spans a third of
    each triangle, total area 1/3 (shoelace on the quad vertices)."""
    sm = two_triangle_mesh()
    j = int(np.argmax(sm.right >= 0))
    v = sm.quad_verts[j]
    x, y = v[:, 0], v[:, 1]
    area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    assert abs(area - 1.0 / 3.0) < 1e-12


def test_positive_triangle_areas_and_area_sum():
    sm = small_mesh(jitter=0.2, seed=5)
    assert (sm.primal.area > 0).all()
    assert abs(sm.primal.area.sum() - 1.0) < 1e-12


def test_orientation_signs():
    sm = small_mesh(jitter=0.1, seed=3)
    for i in range(sm.primal.n_tri):
        for j, s in zip(sm.tri_edges[i], sm.tri_sign[i]):
            if sm.left[j] == i:
                assert s == 1
            elif sm.right[j] == i:
                assert s == -1


def test_normal_points_left_to_right():
    sm = small_mesh(jitter=0.1, seed=4)
    interior = sm.right >= 0
    bl = sm.primal.barycenter[sm.left[interior]]
    br = sm.primal.barycenter[sm.right[interior]] + sm.shift[interior]
    d = np.einsum("jd,jd->j", sm.normal[interior], br - bl)
    assert (d > 0).all()


def test_sub_cell_partition():
    """The three sub-cells of every triangle partition its area; straight
    interior edges give exact thirds."""
    from stagdg.basis import SpaceTimeBasis
    from stagdg.operators import Operators

    ops = Operators(small_mesh(jitter=0.15, seed=6), SpaceTimeBasis(2, 0))
    sub_area = ops.sub_w.sum(axis=1)
    per_tri = np.zeros(ops.mesh.primal.n_tri)
    np.add.at(per_tri, ops.c_tri, sub_area)
    assert np.allclose(per_tri, ops.mesh.primal.area, rtol=1e-12)
    assert np.allclose(sub_area, ops.mesh.primal.area[ops.c_tri] / 3.0,
                       rtol=1e-12)


def test_incircle_diameters():
    # equilateral side 1 -> 1/sqrt(3); right isoceles legs 1 -> 2 - sqrt(2)
    eq = msh.PrimalMesh(
        np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]]),
        np.array([[0, 1, 2]]))
    assert abs(eq.h_incircle[0] - 1 / np.sqrt(3)) < 1e-12
    rt = msh.PrimalMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
                        np.array([[0, 1, 2]]))
    assert abs(rt.h_incircle[0] - (2 - np.sqrt(2))) < 1e-12


def test_h_min_halves_under_refinement():
    h1, _ = msh.mesh_size_metrics(small_mesh(nx=4, ny=4).primal)
    h2, _ = msh.mesh_size_metrics(small_mesh(nx=8, ny=8).primal)
    assert abs(h2 - 0.5 * h1) < 1e-12


def test_periodic_partner_edges_equal_length():
    sm = small_mesh(ALL_PERIODIC, jitter=0.1, seed=9)
    nodes = sm.primal.nodes
    assert sm.periodic_pairs
    for (a1, a2), (b1, b2) in sm.periodic_pairs:
        la = np.linalg.norm(nodes[a2] - nodes[a1])
        lb = np.linalg.norm(nodes[b2] - nodes[b1])
        assert abs(la - lb) < 1e-12 * la


def test_voronoi_symmetric_and_reflexive():
    sm = small_mesh(jitter=0.1, seed=8)
    for i, nb in enumerate(sm.voronoi):
        assert i in nb
        for k in nb:
            assert i in sm.voronoi[k]


def test_degenerate_triangle_rejected():
    pm_nodes = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(msh.MeshError):
        msh.PrimalMesh(pm_nodes, np.array([[0, 1, 2]]))


def test_mesh_file_round_trip(tmp_path):
    pm, tags = msh.generate_rectangle(0, 1, 0, 2, 3, 5, ALL_WALL,
                                      jitter=0.25, seed=11)
    path = os.path.join(tmp_path, "m.mesh")
    msh.write_mesh(path, pm, tags)
    pm2, tags2 = msh.read_mesh(path)
    assert np.array_equal(pm.nodes, pm2.nodes)
    assert np.array_equal(pm.triangles, pm2.triangles)
    assert tags == tags2


def test_malformed_mesh_file_rejected(tmp_path):
    path = os.path.join(tmp_path, "bad.mesh")
    with open(path, "w") as f:
        f.write("NOT_A_HEADER 3\n")
    with pytest.raises(msh.MeshError):
        msh.read_mesh(path)
