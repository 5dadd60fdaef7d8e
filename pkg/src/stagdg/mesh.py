"""Primal triangular mesh and the edge-based staggered dual mesh.

The primal grid carries pressure and total energy; each (merged) edge j owns
a dual quadrilateral built from the two edge endpoints and the barycenters
of the left/right triangles.  Periodic boundaries are merged into interior
edges carrying a translation that maps the right triangle's frame onto the
edge frame, so periodicity needs no special casing downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# boundary type codes
INTERIOR = 0
SLIPWALL = 1
NOSLIP = 2
DIRICHLET = 3
TRANSMISSIVE = 4

_TAG_CODES = {"slipwall": SLIPWALL, "noslip": NOSLIP, "transmissive": TRANSMISSIVE}


class MeshError(ValueError):
    pass


def _tri_geometry(nodes: np.ndarray, tris: np.ndarray):
    a = nodes[tris[:, 0]]
    b = nodes[tris[:, 1]]
    c = nodes[tris[:, 2]]
    area2 = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
        c[:, 0] - a[:, 0]
    )
    return a, b, c, 0.5 * area2


@dataclass
class PrimalMesh:
    """Conforming triangulation with per-element geometry."""

    nodes: np.ndarray
    triangles: np.ndarray
    area: np.ndarray = field(init=False)
    barycenter: np.ndarray = field(init=False)
    h_incircle: np.ndarray = field(init=False)
    h_circumcircle: np.ndarray = field(init=False)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        a, b, c, signed = _tri_geometry(self.nodes, self.triangles)
        flip = signed < 0
        if flip.any():
            t = self.triangles.copy()
            t[flip, 1], t[flip, 2] = self.triangles[flip, 2], self.triangles[flip, 1]
            self.triangles = t
            a, b, c, signed = _tri_geometry(self.nodes, self.triangles)
        if np.any(signed <= 0):
            bad = int(np.argmin(signed))
            raise MeshError(f"degenerate triangle {bad} (area {signed[bad]:.3e})")
        self.area = signed
        self.barycenter = (a + b + c) / 3.0
        la = np.linalg.norm(b - c, axis=1)
        lb = np.linalg.norm(c - a, axis=1)
        lc = np.linalg.norm(a - b, axis=1)
        per = la + lb + lc
        self.h_incircle = 4.0 * self.area / per
        self.h_circumcircle = la * lb * lc / (2.0 * self.area)

    @property
    def n_tri(self) -> int:
        return len(self.triangles)

    @property
    def h_min(self) -> float:
        return float(self.h_incircle.min())


def mesh_size_metrics(primal: PrimalMesh) -> tuple[float, np.ndarray]:
    """(h_min, per-element circumcircle diameters)."""
    return primal.h_min, primal.h_circumcircle


@dataclass
class StaggeredMesh:
    """Primal mesh plus edge-based dual connectivity and geometry.

    Edge arrays are indexed by merged edge id j.  ``left[j]`` is always
    valid; ``right[j] == -1`` marks a physical boundary edge.  ``shift[j]``
    translates right-triangle coordinates into the edge frame (nonzero only
    for merged periodic edges).
    """

    primal: PrimalMesh
    edge_nodes: np.ndarray
    left: np.ndarray
    right: np.ndarray
    shift: np.ndarray
    normal: np.ndarray
    edge_len: np.ndarray
    btype: np.ndarray
    bstate: np.ndarray
    tri_edges: np.ndarray
    tri_sign: np.ndarray
    quad_verts: np.ndarray
    voronoi: list[np.ndarray]
    periodic_pairs: list[tuple[int, int]]
    bstate_names: list[str]

    @property
    def n_edge(self) -> int:
        return len(self.left)

    @property
    def interior(self) -> np.ndarray:
        return self.right >= 0

    def orientation_sign(self, i: int, j: int) -> int:
        """Sign of triangle i on edge j (+1 for left ownership)."""
        loc = np.where(self.tri_edges[i] == j)[0]
        if len(loc) == 0:
            raise ValueError(f"edge {j} is not an edge of triangle {i}")
        return int(self.tri_sign[i, loc[0]])

    def subcell_area(self, i: int, j: int) -> float:
        verts = self.subcell_verts(i, j)
        a, b, c = verts
        return 0.5 * abs(
            (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        )

    def subcell_verts(self, i: int, j: int) -> np.ndarray:
        """Vertices of T_{i,j} in the edge frame."""
        n1, n2 = self.edge_nodes[j]
        bary = self.primal.barycenter[i].copy()
        if self.right[j] == i and self.left[j] != i:
            bary = bary + self.shift[j]
        return np.array([self.primal.nodes[n1], self.primal.nodes[n2], bary])


def build_staggered(
    primal: PrimalMesh, boundary_tags: dict[tuple[int, int], str] | None = None
) -> StaggeredMesh:
    """Construct the dual mesh, connectivity and boundary metadata.

    ``boundary_tags`` maps sorted boundary node pairs to tag strings
    (periodic:<group>, slipwall, noslip, dirichlet:<name>, transmissive).
    Untagged boundary edges default to transmissive.
    """
    boundary_tags = boundary_tags or {}
    nodes, tris = primal.nodes, primal.triangles
    owners: dict[tuple[int, int], list[int]] = {}
    for it, tri in enumerate(tris):
        for k in range(3):
            key = tuple(sorted((int(tri[k]), int(tri[(k + 1) % 3]))))
            owners.setdefault(key, []).append(it)
    for key, lst in owners.items():
        if len(lst) > 2:
            raise MeshError(f"non-conforming mesh: edge {key} shared by {len(lst)}")

    bnd_keys = [k for k, lst in owners.items() if len(lst) == 1]
    per_groups: dict[str, list[tuple[int, int]]] = {}
    for key in bnd_keys:
        tag = boundary_tags.get(key, "transmissive")
        if tag.startswith("periodic:"):
            per_groups.setdefault(tag.split(":", 1)[1], []).append(key)
    per_pairs = _match_periodic(nodes, per_groups)

    state_names: list[str] = []
    edge_rows = []  # (key, left, right, shift, btype, bstate)
    done = set()
    periodic_pairs = []
    for key in sorted(owners):
        if key in done:
            continue
        lst = owners[key]
        if len(lst) == 2:
            i1, i2 = sorted(lst)
            edge_rows.append((key, i1, i2, np.zeros(2), INTERIOR, -1))
            done.add(key)
            continue
        tag = boundary_tags.get(key, "transmissive")
        if key in per_pairs:
            pkey, shift_ab = per_pairs[key]
            ta, tb = owners[key][0], owners[pkey][0]
            # keep the lower triangle as left; edge geometry is its copy
            if ta <= tb:
                edge_rows.append((key, ta, tb, shift_ab, INTERIOR, -1))
            else:
                edge_rows.append((pkey, tb, ta, -shift_ab, INTERIOR, -1))
            periodic_pairs.append((key, pkey))
            done.add(key)
            done.add(pkey)
        else:
            code = _TAG_CODES.get(tag)
            bs = -1
            if code is None:
                if tag.startswith("dirichlet:"):
                    code = DIRICHLET
                    name = tag.split(":", 1)[1]
                    if name not in state_names:
                        state_names.append(name)
                    bs = state_names.index(name)
                else:
                    raise MeshError(f"unknown boundary tag {tag!r}")
            edge_rows.append((key, lst[0], -1, np.zeros(2), code, bs))
            done.add(key)

    n_e = len(edge_rows)
    edge_nodes = np.array([r[0] for r in edge_rows], dtype=np.int64)
    left = np.array([r[1] for r in edge_rows], dtype=np.int64)
    right = np.array([r[2] for r in edge_rows], dtype=np.int64)
    shift = np.array([r[3] for r in edge_rows])
    btype = np.array([r[4] for r in edge_rows], dtype=np.int64)
    bstate = np.array([r[5] for r in edge_rows], dtype=np.int64)

    # normals: unit, oriented from left to right triangle
    p1 = nodes[edge_nodes[:, 0]]
    p2 = nodes[edge_nodes[:, 1]]
    d = p2 - p1
    edge_len = np.linalg.norm(d, axis=1)
    normal = np.column_stack([d[:, 1], -d[:, 0]]) / edge_len[:, None]
    bl = primal.barycenter[left]
    br = np.where(
        (right >= 0)[:, None], primal.barycenter[np.maximum(right, 0)] + shift, 0.0
    )
    mid = 0.5 * (p1 + p2)
    out_dir = np.where((right >= 0)[:, None], br - bl, mid - bl)
    flip = np.einsum("jd,jd->j", normal, out_dir) < 0
    normal[flip] = -normal[flip]

    # per-triangle edge sets and orientation signs
    key_to_edge = {}
    for j, r in enumerate(edge_rows):
        key_to_edge[r[0]] = j
    for ka, kb in periodic_pairs:
        j = key_to_edge.get(ka, key_to_edge.get(kb))
        key_to_edge[ka] = j
        key_to_edge[kb] = j
    tri_edges = np.empty((len(tris), 3), dtype=np.int64)
    tri_sign = np.empty((len(tris), 3), dtype=np.int64)
    for it, tri in enumerate(tris):
        for k in range(3):
            key = tuple(sorted((int(tri[k]), int(tri[(k + 1) % 3]))))
            j = key_to_edge[key]
            tri_edges[it, k] = j
            tri_sign[it, k] = 1 if left[j] == it else -1

    # dual quad corners: v00=n1, v10=bary_r (ghost mirror on boundary),
    # v11=n2, v01=bary_l, all in the edge frame
    ghost = _mirror_point(bl, p1, p2)
    v10 = np.where((right >= 0)[:, None], br, ghost)
    quad_verts = np.stack([p1, v10, p2, bl], axis=1)

    voronoi = _voronoi_neighbors(primal, edge_nodes, left, right, periodic_pairs, nodes)

    return StaggeredMesh(
        primal=primal,
        edge_nodes=edge_nodes,
        left=left,
        right=right,
        shift=shift,
        normal=normal,
        edge_len=edge_len,
        btype=btype,
        bstate=bstate,
        tri_edges=tri_edges,
        tri_sign=tri_sign,
        quad_verts=quad_verts,
        voronoi=voronoi,
        periodic_pairs=periodic_pairs,
        bstate_names=state_names,
    )


def _match_periodic(nodes, per_groups):
    """Pair periodic edges per group; returns {edge_key: (partner_key, shift)}.

    Each group is split into two clusters along the axis across which its
    edges form two well-separated lines (the axis with the largest gap in
    midpoint coordinates), and edges are matched by position within the
    cluster.
    """
    pairs = {}
    for group, keys in per_groups.items():
        mids = np.array([(nodes[a] + nodes[b]) / 2.0 for a, b in keys])
        gaps = []
        for ax in range(mids.shape[1]):
            s = np.sort(mids[:, ax])
            gaps.append(np.diff(s).max() if len(s) > 1 else 0.0)
        axis = int(np.argmax(gaps))
        lo = mids[:, axis] < 0.5 * (mids[:, axis].min() + mids[:, axis].max())
        ia = np.where(lo)[0]
        ib = np.where(~lo)[0]
        if len(ia) != len(ib):
            raise MeshError(f"periodic group {group!r}: unpaired edges")
        other = 1 - axis
        ia = ia[np.argsort(mids[ia, other], kind="stable")]
        ib = ib[np.argsort(mids[ib, other], kind="stable")]
        for ka, kb in zip(ia, ib):
            sa, sb = keys[ka], keys[kb]
            la = np.linalg.norm(nodes[sa[0]] - nodes[sa[1]])
            lb = np.linalg.norm(nodes[sb[0]] - nodes[sb[1]])
            if abs(la - lb) > 1e-9 * max(la, lb):
                raise MeshError(f"periodic group {group!r}: length mismatch")
            shift = mids[ka] - mids[kb]
            pairs[sa] = (sb, shift)
            pairs[sb] = (sa, -shift)
    return pairs


def _mirror_point(pt, a, b):
    d = b - a
    dd = np.einsum("jd,jd->j", d, d)
    t = np.einsum("jd,jd->j", pt - a, d) / dd
    foot = a + t[:, None] * d
    return 2.0 * foot - pt


def _voronoi_neighbors(primal, edge_nodes, left, right, periodic_pairs, nodes):
    """Node-sharing neighborhoods, honoring periodic node identification."""
    n_nodes = len(nodes)
    parent = np.arange(n_nodes)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for ka, kb in periodic_pairs:
        pa = nodes[list(ka)]
        pb = nodes[list(kb)]
        shift = pa.mean(axis=0) - pb.mean(axis=0)
        for na in ka:
            d = np.linalg.norm(pb + shift - nodes[na], axis=1)
            nb = list(kb)[int(np.argmin(d))]
            ra, rb = find(na), find(nb)
            if ra != rb:
                parent[ra] = rb
    root = np.array([find(x) for x in range(n_nodes)])
    node_tris: dict[int, list[int]] = {}
    for it, tri in enumerate(primal.triangles):
        for n in tri:
            node_tris.setdefault(int(root[n]), []).append(it)
    out = []
    for it, tri in enumerate(primal.triangles):
        s = set()
        for n in tri:
            s.update(node_tris[int(root[n])])
        out.append(np.array(sorted(s), dtype=np.int64))
    return out


def generate_rectangle(
    x0: float,
    x1: float,
    y0: float,
    y1: float,
    nx: int,
    ny: int,
    bc: dict[str, str] | None = None,
    jitter: float = 0.0,
    seed: int = 0,
) -> tuple[PrimalMesh, dict[tuple[int, int], str]]:
    """Structured lattice with alternating diagonals and optional node jitter.

    ``bc`` maps sides ("left", "right", "bottom", "top") to tag strings;
    defaults to transmissive.  Jitter (fraction of the cell size) is applied
    to interior nodes only, so periodic boundaries stay matched.
    """
    bc = bc or {}
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])
    if jitter > 0:
        rng = np.random.default_rng(seed)
        hx = (x1 - x0) / nx
        hy = (y1 - y0) / ny
        interior = (
            (xx > x0 + hx / 2) & (xx < x1 - hx / 2) & (yy > y0 + hy / 2) & (yy < y1 - hy / 2)
        ).ravel()
        pert = rng.uniform(-jitter, jitter, size=(interior.sum(), 2))
        nodes[interior] += pert * np.array([hx, hy])

    def nid(ix, iy):
        return ix * (ny + 1) + iy

    tris = []
    for ix in range(nx):
        for iy in range(ny):
            a, b = nid(ix, iy), nid(ix + 1, iy)
            c, d = nid(ix + 1, iy + 1), nid(ix, iy + 1)
            if (ix + iy) % 2 == 0:
                tris.append((a, b, c))
                tris.append((a, c, d))
            else:
                tris.append((a, b, d))
                tris.append((b, c, d))
    tags: dict[tuple[int, int], str] = {}
    for iy in range(ny):
        tags[tuple(sorted((nid(0, iy), nid(0, iy + 1))))] = bc.get("left", "transmissive")
        tags[tuple(sorted((nid(nx, iy), nid(nx, iy + 1))))] = bc.get(
            "right", "transmissive"
        )
    for ix in range(nx):
        tags[tuple(sorted((nid(ix, 0), nid(ix + 1, 0))))] = bc.get(
            "bottom", "transmissive"
        )
        tags[tuple(sorted((nid(ix, ny), nid(ix + 1, ny))))] = bc.get("top", "transmissive")
    return PrimalMesh(nodes, np.array(tris)), tags


def write_mesh(path, primal: PrimalMesh, tags: dict[tuple[int, int], str]):
    """ASCII mesh file (1-based indices)."""
    with open(path, "w") as f:
        f.write(f"NODES {len(primal.nodes)}\n")
        for x, y in primal.nodes:
            f.write(f"{x:.17g} {y:.17g}\n")
        f.write(f"TRIANGLES {len(primal.triangles)}\n")
        for a, b, c in primal.triangles:
            f.write(f"{a + 1} {b + 1} {c + 1}\n")
        f.write(f"BOUNDARY {len(tags)}\n")
        for (a, b), tag in sorted(tags.items()):
            f.write(f"{a + 1} {b + 1} {tag}\n")


def read_mesh(path) -> tuple[PrimalMesh, dict[tuple[int, int], str]]:
    with open(path) as f:
        toks = f.read().split("\n")
    idx = 0

    def header(name):
        nonlocal idx
        parts = toks[idx].split()
        if len(parts) != 2 or parts[0] != name:
            raise MeshError(f"expected '{name} <count>' at line {idx + 1}")
        idx += 1
        return int(parts[1])

    n = header("NODES")
    nodes = np.array([[float(v) for v in toks[idx + k].split()] for k in range(n)])
    idx += n
    m = header("TRIANGLES")
    tris = (
        np.array([[int(v) for v in toks[idx + k].split()] for k in range(m)]) - 1
    )
    idx += m
    k = header("BOUNDARY")
    tags = {}
    for r in range(k):
        parts = toks[idx + r].split()
        tags[tuple(sorted((int(parts[0]) - 1, int(parts[1]) - 1)))] = parts[2]
    return PrimalMesh(nodes, tris), tags
