"""Conforming triangle meshes: structured builders, red refinement, MSH import.

A TriMesh stores vertices, counter-clockwise triangles, and the boundary
topology derived from edge incidence (an interior edge is shared by exactly
two triangles, a boundary edge by one). MacroMeshPair ties a coarse mesh to
its uniform red refinement; the fine vertex array extends the coarse one, so
coarse vertex indices stay valid on the fine mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TriMesh",
    "MacroMeshPair",
    "MeshError",
    "build_uniform",
    "refine_red",
    "corner_swap",
    "import_msh",
    "write_msh",
    "affine_map_mesh",
]


class MeshError(ValueError):
    """Raised for invalid mesh topology or unsupported input files."""


def _signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    return 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


def _directed_edges(triangles: np.ndarray) -> np.ndarray:
    """All triangle edges in traversal order, shape (3T, 2)."""
    return np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )


@dataclass
class TriMesh:
    """Immutable conforming triangulation of a planar domain."""

    vertices: np.ndarray   # (V, 2) float64
    triangles: np.ndarray  # (T, 3) int64, counter-clockwise

    _areas: np.ndarray = field(init=False, repr=False, default=None)
    _boundary_edges: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must have shape (V, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must have shape (T, 3)")
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise MeshError("triangle indices out of range")
        areas = _signed_areas(self.vertices, self.triangles)
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise MeshError(
                f"triangle {bad} has non-positive area {areas[bad]:.3e}; "
                "triangles must be counter-clockwise and non-degenerate"
            )
        self._areas = areas
        self._boundary_edges = self._derive_boundary()
        self.vertices.flags.writeable = False
        self.triangles.flags.writeable = False

    def _derive_boundary(self) -> np.ndarray:
        edges = _directed_edges(self.triangles)
        key = np.sort(edges, axis=1)
        _, inverse, counts = np.unique(
            key, axis=0, return_inverse=True, return_counts=True
        )
        if np.any(counts > 2):
            raise MeshError("non-conforming mesh: an edge is shared by >2 triangles")
        # Directed boundary edges in triangle traversal order; the domain lies
        # to the left, so the outward normal of edge (a, b) is (dy, -dx).
        return edges[counts[inverse] == 1]

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def areas(self) -> np.ndarray:
        return self._areas

    @property
    def boundary_edges(self) -> np.ndarray:
        """Directed boundary edges (E, 2); domain on the left of each."""
        return self._boundary_edges

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self._boundary_edges)

    @property
    def bbox(self) -> np.ndarray:
        return np.array([self.vertices.min(axis=0), self.vertices.max(axis=0)])

    def triangle_coords(self, idx=None) -> np.ndarray:
        """Vertex coordinates per triangle, (T, 3, 2)."""
        tris = self.triangles if idx is None else self.triangles[idx]
        return self.vertices[tris]

    def boundary_edge_count(self) -> np.ndarray:
        """Number of boundary edges per triangle, (T,)."""
        edges = _directed_edges(self.triangles)
        key = np.sort(edges, axis=1)
        _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        on_boundary = (counts[inverse] == 1).reshape(3, -1)
        return on_boundary.sum(axis=0)


@dataclass
class MacroMeshPair:
    """A coarse mesh with its red refinement.

    fine.vertices[:coarse.num_vertices] equals coarse.vertices; parent[t] is
    the coarse triangle containing fine triangle t (four children each);
    midpoint_edges[k] holds the coarse endpoints of fine vertex
    coarse.num_vertices + k, which sits at their midpoint.
    """

    coarse: TriMesh
    fine: TriMesh
    parent: np.ndarray          # (4*Tc,) int64
    midpoint_edges: np.ndarray  # (V_fine - V_coarse, 2) int64

    def __post_init__(self):
        self.parent = np.ascontiguousarray(self.parent, dtype=np.int64)
        self.midpoint_edges = np.ascontiguousarray(self.midpoint_edges, dtype=np.int64)
        if len(self.parent) != self.fine.num_triangles:
            raise MeshError("parent map length does not match fine triangle count")
        if len(self.midpoint_edges) != self.fine.num_vertices - self.coarse.num_vertices:
            raise MeshError("midpoint edge list does not match added vertex count")


def build_uniform(n: int, box=(0.0, 0.0, 1.0, 1.0), orientation: str = "right") -> TriMesh:
    """Uniform n x n triangulated rectangle.

    box is (xmin, ymin, xmax, ymax). "right" splits each cell along the
    SW-NE diagonal, "left" along the NW-SE diagonal.
    """
    if n < 1:
        raise MeshError("n must be at least 1")
    if orientation not in ("right", "left"):
        raise MeshError(f"unknown orientation {orientation!r}")
    xmin, ymin, xmax, ymax = map(float, box)
    if xmax <= xmin or ymax <= ymin:
        raise MeshError("box must have positive extent")
    xs = np.linspace(xmin, xmax, n + 1)
    ys = np.linspace(ymin, ymax, n + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    if orientation == "right":
        lower = np.column_stack([v00, v10, v11])
        upper = np.column_stack([v00, v11, v01])
    else:
        lower = np.column_stack([v00, v10, v01])
        upper = np.column_stack([v10, v11, v01])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper
    return TriMesh(vertices, triangles)


def refine_red(mesh: TriMesh) -> MacroMeshPair:
    """Split every triangle into four by connecting edge midpoints."""
    tris = mesh.triangles
    edges = _directed_edges(tris)
    key = np.sort(edges, axis=1)
    unique_edges, inverse = np.unique(key, axis=0, return_inverse=True)
    nv = mesh.num_vertices
    midpoints = 0.5 * (mesh.vertices[unique_edges[:, 0]] + mesh.vertices[unique_edges[:, 1]])
    fine_vertices = np.vstack([mesh.vertices, midpoints])

    ntri = mesh.num_triangles
    m01 = nv + inverse[0 * ntri : 1 * ntri]
    m12 = nv + inverse[1 * ntri : 2 * ntri]
    m20 = nv + inverse[2 * ntri : 3 * ntri]
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    children = np.empty((4 * ntri, 3), dtype=np.int64)
    children[0::4] = np.column_stack([a, m01, m20])
    children[1::4] = np.column_stack([b, m12, m01])
    children[2::4] = np.column_stack([c, m20, m12])
    children[3::4] = np.column_stack([m01, m12, m20])
    parent = np.repeat(np.arange(ntri, dtype=np.int64), 4)
    return MacroMeshPair(mesh, TriMesh(fine_vertices, children), parent, unique_edges)


def corner_swap(mesh: TriMesh) -> TriMesh:
    """Exchange the diagonal of every cell whose triangle has two boundary edges.

    On a structured square mesh exactly two such corner triangles exist; after
    the swap every triangle touches the boundary with at most one edge. The
    1 x 1 mesh is rejected: there both triangles of the single cell have two
    boundary edges and no exchange can fix them.
    """
    edges = _directed_edges(mesh.triangles)
    key = np.sort(edges, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    on_boundary = (counts[inverse] == 1).reshape(3, -1).T  # (T, 3) per edge slot
    corner_tris = np.flatnonzero(on_boundary.sum(axis=1) >= 2)
    if corner_tris.size == 0:
        return mesh

    # Map undirected edge -> incident triangles to find the quad partner.
    edge_key = {}
    for t in range(mesh.num_triangles):
        for k in range(3):
            a, b = mesh.triangles[t, k], mesh.triangles[t, (k + 1) % 3]
            edge_key.setdefault((min(a, b), max(a, b)), []).append(t)

    triangles = mesh.triangles.copy()
    handled = set()
    corner_set = set(int(t) for t in corner_tris)
    for t in corner_tris:
        t = int(t)
        if t in handled:
            continue
        interior_slot = int(np.flatnonzero(~on_boundary[t])[0]) if (~on_boundary[t]).any() else None
        if interior_slot is None:
            raise MeshError("corner triangle has no interior edge; mesh too coarse to correct")
        a = triangles[t, interior_slot]
        b = triangles[t, (interior_slot + 1) % 3]
        apex = triangles[t, (interior_slot + 2) % 3]
        partners = [s for s in edge_key[(min(a, b), max(a, b))] if s != t]
        if not partners:
            raise MeshError("corner triangle's interior edge has no partner triangle")
        s = partners[0]
        if s in corner_set:
            raise MeshError(
                "cannot correct corner triangles: the diagonal partner is itself "
                "a corner triangle (mesh is a single cell)"
            )
        other_apex = [v for v in triangles[s] if v not in (a, b)][0]
        # Re-split the quadrilateral along the apex-apex diagonal.
        for row, tri in ((t, (apex, a, other_apex)), (s, (apex, other_apex, b))):
            tri = np.array(tri, dtype=np.int64)
            p = mesh.vertices[tri]
            area2 = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[2, 0] - p[0, 0]) * (
                p[1, 1] - p[0, 1]
            )
            triangles[row] = tri if area2 > 0 else tri[::-1]
        handled.update((t, s))
    return TriMesh(mesh.vertices, triangles)


def affine_map_mesh(mesh: TriMesh, a: np.ndarray, b: np.ndarray) -> TriMesh:
    """Apply x -> a @ x + b to all vertices; orientation is re-normalised."""
    a = np.asarray(a, dtype=float).reshape(2, 2)
    b = np.asarray(b, dtype=float).reshape(2)
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if det == 0.0:
        raise MeshError("affine map is singular")
    vertices = mesh.vertices @ a.T + b
    triangles = mesh.triangles if det > 0 else mesh.triangles[:, ::-1]
    return TriMesh(vertices, triangles)


def import_msh(path) -> TriMesh:
    """Read a Gmsh ASCII v2.2 file containing triangles.

    Line elements are accepted and ignored (the boundary is derived from edge
    incidence, not from file tags); any other element type is an error.
    Bitwise-identical vertices are merged and unreferenced vertices dropped,
    preserving first-occurrence order. Triangle orientation is normalised.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().split("\n")

    def section(name):
        try:
            start = lines.index(f"${name}")
            end = lines.index(f"$End{name}")
        except ValueError:
            raise MeshError(f"missing ${name} section") from None
        return lines[start + 1 : end]

    fmt = section("MeshFormat")[0].split()
    if fmt[0] != "2.2" or fmt[1] != "0":
        raise MeshError(f"unsupported MSH format {' '.join(fmt[:2])}; need ASCII 2.2")

    node_lines = section("Nodes")
    nnodes = int(node_lines[0])
    ids = np.empty(nnodes, dtype=np.int64)
    coords = np.empty((nnodes, 2), dtype=float)
    for k, line in enumerate(node_lines[1 : 1 + nnodes]):
        parts = line.split()
        ids[k] = int(parts[0])
        coords[k] = (float(parts[1]), float(parts[2]))
    id_to_row = {int(i): k for k, i in enumerate(ids)}

    elem_lines = section("Elements")
    nelems = int(elem_lines[0])
    tris = []
    for line in elem_lines[1 : 1 + nelems]:
        parts = line.split()
        etype = int(parts[1])
        ntags = int(parts[2])
        conn = parts[3 + ntags :]
        if etype == 2:
            tris.append([id_to_row[int(c)] for c in conn[:3]])
        elif etype in (1, 15):
            continue  # boundary lines / points: topology is re-derived
        else:
            raise MeshError(f"unsupported element type {etype}; only triangles allowed")
    if not tris:
        raise MeshError("no triangles in file")
    triangles = np.asarray(tris, dtype=np.int64)

    # Bitwise vertex dedup, then drop vertices not referenced by any triangle.
    seen: dict[bytes, int] = {}
    remap = np.empty(nnodes, dtype=np.int64)
    for k in range(nnodes):
        key = coords[k].tobytes()
        remap[k] = seen.setdefault(key, len(seen))
    triangles = remap[triangles]
    merged = np.empty((len(seen), 2), dtype=float)
    for k in range(nnodes):
        merged[remap[k]] = coords[k]

    used = np.zeros(len(seen), dtype=bool)
    used[triangles.ravel()] = True
    new_index = np.cumsum(used) - 1
    vertices = merged[used]
    triangles = new_index[triangles]

    areas = _signed_areas(vertices, triangles)
    flip = areas < 0
    triangles[flip] = triangles[flip][:, ::-1]
    return TriMesh(vertices, triangles)


def write_msh(mesh: TriMesh, path) -> None:
    """Write a TriMesh as Gmsh ASCII v2.2 (nodes and triangle elements)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        fh.write(f"$Nodes\n{mesh.num_vertices}\n")
        for i, (x, y) in enumerate(mesh.vertices, start=1):
            fh.write(f"{i} {x:.17g} {y:.17g} 0\n")
        fh.write("$EndNodes\n")
        fh.write(f"$Elements\n{mesh.num_triangles}\n")
        for i, (a, b, c) in enumerate(mesh.triangles, start=1):
            fh.write(f"{i} 2 2 0 0 {a + 1} {b + 1} {c + 1}\n")
        fh.write("$EndElements\n")
