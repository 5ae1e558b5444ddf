"""Assembly of the coupled velocity/pressure/displacement/multiplier system.

The global matrix has the block layout

    [ A_f   B^T   0     C_f^T ] [ u   ]   [ f ]
    [ B     0     0     0     ] [ p   ]   [ 0 ]
    [ 0     0     A_s  -C_s^T ] [ X   ] = [ g ]
    [ C_f   0    -C_s   0     ] [ lam ]   [ d ]

with A_f the vector Laplacian on the fine fluid mesh, B the negative
divergence tested against the pressure basis, A_s the vector Laplacian on
the solid reference mesh, C_s the solid-side coupling (mass, plus stiffness
for the H1 coupling form), and C_f the interface matrix coupling the
multiplier to the fluid velocity composed with the deformation map. C_f is
assembled in two alternative ways: by composite quadrature over the overlay
of the mapped solid mesh with the fluid mesh (exact for the piecewise-linear
integrands), or by a fixed-order rule directly on each solid element with
point location of the mapped nodes (deliberately inexact when an element
straddles fluid element boundaries).

Everything on the solid side integrates over the reference domain. Overlay
pieces live in physical coordinates; their quadrature data is pulled back
through the straight-edge (per-element affine) interpolant of the map, whose
inverse is applied implicitly: barycentric coordinates with respect to a
mapped triangle equal those of the pre-image with respect to the reference
triangle, and areas pull back by 1/|det a| with a the element jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import BoxIndex, Overlay, barycentric_coords, locate_points, split_segment_by_mesh
from .mesh import MacroMeshPair, TriMesh
from .quadrature import QuadratureRule, edge_rule, gauss_rule, high_order_rule
from .spaces import FESpace, p1_gradients

__all__ = [
    "CoupledSystem",
    "element_affine_maps",
    "assemble_Af",
    "assemble_B",
    "assemble_As",
    "assemble_Cs",
    "assemble_Cf_intersection",
    "assemble_Cf_nointersection",
    "assemble_volume_rhs",
    "assemble_interpolant_volume_rhs",
    "assemble_fluid_coupling_rhs",
    "assemble_pressure_jump_rhs",
    "assemble_solid_rhs",
    "assemble_constraint_rhs",
    "assemble_constraint_rhs_overlay",
    "pressure_mean_weights",
    "apply_dirichlet",
    "build_system",
]

RHS_RULE_DEGREE = 6  # internal rule for data terms integrated by quadrature


def element_affine_maps(ref_coords: np.ndarray, mapped_coords: np.ndarray):
    """Per-element jacobian of the straight-edge map, plus its determinant.

    ref_coords, mapped_coords: (T, 3, 2). Returns (a, det) with a of shape
    (T, 2, 2) such that mapped edges = a @ reference edges.
    """
    r = np.stack([ref_coords[:, 1] - ref_coords[:, 0],
                  ref_coords[:, 2] - ref_coords[:, 0]], axis=-1)   # (T,2,2) columns
    q = np.stack([mapped_coords[:, 1] - mapped_coords[:, 0],
                  mapped_coords[:, 2] - mapped_coords[:, 0]], axis=-1)
    det_r = r[:, 0, 0] * r[:, 1, 1] - r[:, 0, 1] * r[:, 1, 0]
    inv_r = np.empty_like(r)
    inv_r[:, 0, 0] = r[:, 1, 1]
    inv_r[:, 0, 1] = -r[:, 0, 1]
    inv_r[:, 1, 0] = -r[:, 1, 0]
    inv_r[:, 1, 1] = r[:, 0, 0]
    inv_r /= det_r[:, None, None]
    a = q @ inv_r
    det_a = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    if np.any(det_a == 0.0):
        raise ValueError("deformation map degenerates an element")
    return a, det_a


def _interleave_scatter(rows, cols, vals, shape):
    """Scatter scalar (row, col, val) triples into both vector components.

    Entry (a, b, v) lands at (2a, 2b) and (2a+1, 2b+1) of a matrix of the
    given (already doubled) shape.
    """
    r = rows.ravel()
    c = cols.ravel()
    v = vals.ravel()
    rr = np.concatenate([2 * r, 2 * r + 1])
    cc = np.concatenate([2 * c, 2 * c + 1])
    return sp.coo_matrix((np.concatenate([v, v]), (rr, cc)), shape=shape).tocsr()


def _local_pairs(tris):
    """Row/col vertex indices matching a (T, 3, 3) local block, row-major."""
    rows = np.repeat(tris, 3, axis=1)
    cols = np.tile(tris, (1, 3))
    return rows, cols


def _scalar_stiffness_local(mesh: TriMesh):
    g = p1_gradients(mesh)
    return np.einsum("tad,tbd->tab", g, g) * mesh.areas[:, None, None]


def _scalar_mass_local(mesh: TriMesh):
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return mesh.areas[:, None, None] * base


def _vector_from_scalar_locals(mesh: TriMesh, local):
    rows, cols = _local_pairs(mesh.triangles)
    n = 2 * mesh.num_vertices
    return _interleave_scatter(rows, cols, local.reshape(len(local), 9), (n, n))


def assemble_Af(pair: MacroMeshPair) -> sp.csr_matrix:
    """Vector Laplacian stiffness of the velocity space (fine mesh)."""
    return _vector_from_scalar_locals(pair.fine, _scalar_stiffness_local(pair.fine))


def assemble_As(mesh: TriMesh) -> sp.csr_matrix:
    """Vector Laplacian stiffness on the solid reference mesh."""
    return _vector_from_scalar_locals(mesh, _scalar_stiffness_local(mesh))


def assemble_Cs(mesh: TriMesh, form: str = "h1") -> sp.csr_matrix:
    """Solid-side coupling: vector mass, plus vector stiffness for H1."""
    local = _scalar_mass_local(mesh)
    if form == "h1":
        local = local + _scalar_stiffness_local(mesh)
    elif form != "l2":
        raise ValueError(f"unknown coupling form {form!r}")
    return _vector_from_scalar_locals(mesh, local)


def assemble_B(pressure: FESpace) -> sp.csr_matrix:
    """Negative divergence block, pressure rows by velocity columns.

    The velocity divergence is constant per fine triangle; pressure P1 basis
    functions are integrated per fine triangle through the coarse-to-fine
    prolongation, and the P0 rows (enriched space) aggregate the four
    children of each macro element.
    """
    pair = pressure.pair
    if pair is None:
        raise ValueError("pressure space must carry its macro mesh pair")
    fine, coarse = pair.fine, pair.coarse
    vf, vc, tf = fine.num_vertices, coarse.num_vertices, fine.num_triangles

    g = p1_gradients(fine)  # (Tf,3,2)
    cols = np.stack([2 * fine.triangles, 2 * fine.triangles + 1], axis=2).reshape(-1)
    gdiv = sp.coo_matrix(
        (g.reshape(-1), (np.repeat(np.arange(tf), 6), cols)), shape=(tf, 2 * vf)
    ).tocsr()

    hat_int = sp.coo_matrix(
        (np.repeat(fine.areas / 3.0, 3),
         (fine.triangles.ravel(), np.repeat(np.arange(tf), 3))),
        shape=(vf, tf),
    ).tocsr()

    nmid = vf - vc
    prol = sp.coo_matrix(
        (np.concatenate([np.ones(vc), np.full(2 * nmid, 0.5)]),
         (np.concatenate([np.arange(vc), np.repeat(np.arange(vc, vf), 2)]),
          np.concatenate([np.arange(vc), pair.midpoint_edges.ravel()]))),
        shape=(vf, vc),
    ).tocsr()

    b_p1 = -(prol.T @ (hat_int @ gdiv))
    if not pressure.enriched:
        return b_p1.tocsr()
    agg = sp.coo_matrix(
        (fine.areas, (pair.parent, np.arange(tf))),
        shape=(coarse.num_triangles, tf),
    ).tocsr()
    return sp.vstack([b_p1, -(agg @ gdiv)]).tocsr()


def assemble_Cf_intersection(
    overlay: Overlay,
    solid_mesh: TriMesh,
    fluid_mesh: TriMesh,
    mapped_coords: np.ndarray,
    amap: np.ndarray,
    adet: np.ndarray,
    form: str = "h1",
    order: int = 2,
) -> sp.csr_matrix:
    """Interface matrix by composite quadrature on the mesh overlay.

    Each overlay piece carries the quadrature rule; multiplier values come
    from barycentric coordinates with respect to the mapped solid triangle
    (equal to those on the reference triangle), fluid values from the piece's
    fluid triangle. Piece weights are reference-domain areas.
    """
    rule = gauss_rule(order)
    pts = np.einsum("qi,mij->mqj", rule.points, overlay.sub_coords)
    bs = barycentric_coords(mapped_coords[overlay.solid_tri][:, None], pts)
    bf = barycentric_coords(fluid_mesh.triangle_coords(overlay.fluid_tri)[:, None], pts)
    local = np.einsum("q,mqa,mqb->mab", rule.weights, bs, bf)
    if form == "h1":
        gs = p1_gradients(solid_mesh)[overlay.solid_tri]
        gf = p1_gradients(fluid_mesh)[overlay.fluid_tri]
        gfc = np.einsum("mbi,mij->mbj", gf, amap[overlay.solid_tri])
        local += np.einsum("mai,mbi->mab", gs, gfc)
    elif form != "l2":
        raise ValueError(f"unknown coupling form {form!r}")
    local *= (overlay.areas / np.abs(adet[overlay.solid_tri]))[:, None, None]

    rows, cols = _local_pairs(solid_mesh.triangles[overlay.solid_tri])
    cols = np.tile(fluid_mesh.triangles[overlay.fluid_tri], (1, 3))
    shape = (2 * solid_mesh.num_vertices, 2 * fluid_mesh.num_vertices)
    return _interleave_scatter(rows, cols, local.reshape(-1, 9), shape)


def assemble_Cf_nointersection(
    solid_mesh: TriMesh,
    fluid_mesh: TriMesh,
    mapped_coords: np.ndarray,
    amap: np.ndarray,
    index: BoxIndex,
    form: str = "h1",
    order: int = 2,
) -> sp.csr_matrix:
    """Interface matrix by direct quadrature on each solid element.

    Mapped quadrature nodes are located in the fluid mesh and the fluid
    basis of the containing element is evaluated there, as if it were
    supported on the whole solid element; no attempt is made to split
    elements straddling fluid edges. This is the cheap, inexact method.
    """
    rule = gauss_rule(order)
    ts = solid_mesh.num_triangles
    nq = len(rule.weights)
    pts = np.einsum("qi,tij->tqj", rule.points, mapped_coords)
    loc, bf = locate_points(pts.reshape(-1, 2), index)
    loc = loc.reshape(ts, nq)
    bf = bf.reshape(ts, nq, 3)

    # vals[t,k,a,b] = |T_s| w_k (zeta_a(q_k) phi_b + grad terms)
    vals = np.einsum("k,ka,tkb->tkab", rule.weights, rule.points, bf)
    if form == "h1":
        gs = p1_gradients(solid_mesh)
        gf = p1_gradients(fluid_mesh)[loc]                      # (Ts,K,3,2)
        gfc = np.einsum("tkbi,tij->tkbj", gf, amap)
        vals += np.einsum("k,tai,tkbi->tkab", rule.weights, gs, gfc)
    elif form != "l2":
        raise ValueError(f"unknown coupling form {form!r}")
    vals *= solid_mesh.areas[:, None, None, None]

    rows = np.broadcast_to(solid_mesh.triangles[:, None, :, None], (ts, nq, 3, 3))
    cols = np.broadcast_to(fluid_mesh.triangles[loc][:, :, None, :], (ts, nq, 3, 3))
    shape = (2 * solid_mesh.num_vertices, 2 * fluid_mesh.num_vertices)
    return _interleave_scatter(rows, cols, vals, shape)


def assemble_volume_rhs(mesh: TriMesh, field, rule: QuadratureRule | None = None) -> np.ndarray:
    """(field, phi_i) over the fluid mesh for a vector-valued field."""
    rule = rule or high_order_rule(RHS_RULE_DEGREE)
    pts = rule.physical_points(mesh.triangle_coords())  # (T,Q,2)
    vals = np.asarray(field(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape)
    contrib = np.einsum("q,tqc,qa,t->tac", rule.weights, vals, rule.points, mesh.areas)
    out = np.zeros(2 * mesh.num_vertices)
    np.add.at(out, (2 * mesh.triangles[:, :, None] + np.arange(2)).ravel(), contrib.ravel())
    return out


def assemble_interpolant_volume_rhs(mesh: TriMesh, field) -> np.ndarray:
    """(I_h field, phi_i): the volume datum enters through its nodal interpolant.

    Integration of the interpolant is exact (local mass action), so the data
    consistency error is the O(h^2) interpolation error. The benchmark error
    tables are defined with this data path; `assemble_volume_rhs` is the
    fully integrated alternative.
    """
    nodal = np.asarray(field(mesh.vertices), dtype=float)
    local_mass = (np.ones((3, 3)) + np.eye(3)) / 12.0
    contrib = np.einsum("ab,tbc,t->tac", local_mass, nodal[mesh.triangles], mesh.areas)
    out = np.zeros(2 * mesh.num_vertices)
    np.add.at(out, (2 * mesh.triangles[:, :, None] + np.arange(2)).ravel(), contrib.ravel())
    return out


def assemble_fluid_coupling_rhs(
    overlay: Overlay,
    solid_mesh: TriMesh,
    fluid_mesh: TriMesh,
    mapped_coords: np.ndarray,
    amap: np.ndarray,
    adet: np.ndarray,
    lam,
    grad_lam,
    form: str = "h1",
    rule: QuadratureRule | None = None,
) -> np.ndarray:
    """c(lambda, phi_i composed with the map), via the overlay machinery.

    This data term always uses the intersection, whatever method assembles
    C_f. Barycentric coordinates with respect to the mapped solid triangle
    double as those of the pre-image, so pulled-back points for evaluating
    lam come for free.
    """
    rule = rule or high_order_rule(RHS_RULE_DEGREE)
    pts = np.einsum("qi,mij->mqj", rule.points, overlay.sub_coords)
    bs = barycentric_coords(mapped_coords[overlay.solid_tri][:, None], pts)
    bf = barycentric_coords(fluid_mesh.triangle_coords(overlay.fluid_tri)[:, None], pts)
    ref_pts = np.einsum("mqa,maj->mqj", bs, solid_mesh.triangle_coords(overlay.solid_tri))
    lam_v = np.asarray(lam(ref_pts.reshape(-1, 2)), dtype=float).reshape(pts.shape)
    contrib = np.einsum("q,mqc,mqb->mbc", rule.weights, lam_v, bf)
    if form == "h1":
        gl = np.asarray(grad_lam(ref_pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2] + (2, 2))
        gf = p1_gradients(fluid_mesh)[overlay.fluid_tri]
        gfc = np.einsum("mbi,mij->mbj", gf, amap[overlay.solid_tri])
        contrib += np.einsum("q,mqcj,mbj->mbc", rule.weights, gl, gfc)
    elif form != "l2":
        raise ValueError(f"unknown coupling form {form!r}")
    contrib *= (overlay.areas / np.abs(adet[overlay.solid_tri]))[:, None, None]
    out = np.zeros(2 * fluid_mesh.num_vertices)
    cols = 2 * fluid_mesh.triangles[overlay.fluid_tri][:, :, None] + np.arange(2)
    np.add.at(out, cols.ravel(), contrib.ravel())
    return out


def assemble_pressure_jump_rhs(
    boundary_edges_phys: np.ndarray,
    fluid_mesh: TriMesh,
    index: BoxIndex,
    jump: float,
    npoints: int = 6,
) -> np.ndarray:
    """-J * integral over the mapped solid boundary of (phi_i . n_s).

    boundary_edges_phys: (E, 2, 2) directed physical edges with the solid on
    the left, so the outward normal of edge (a, b) is (dy, -dx)/len.
    """
    nodes, weights = edge_rule(npoints)
    out = np.zeros(2 * fluid_mesh.num_vertices)
    for a, b in boundary_edges_phys:
        edge = b - a
        length = float(np.hypot(*edge))
        normal = np.array([edge[1], -edge[0]]) / length
        tris, breaks = split_segment_by_mesh(a, b, index)
        for t, t0, t1 in zip(tris, breaks[:-1], breaks[1:]):
            tau = t0 + nodes * (t1 - t0)
            x = a + tau[:, None] * edge
            bf = barycentric_coords(fluid_mesh.triangle_coords(int(t)), x)
            piece_len = length * (t1 - t0)
            contrib = piece_len * jump * np.einsum("q,qb,c->bc", weights, bf, normal)
            np.subtract.at(out, 2 * fluid_mesh.triangles[int(t)][:, None] + np.arange(2), contrib)
    return out


def assemble_solid_rhs(
    mesh: TriMesh,
    neg_lap_x,
    grad_x,
    lam,
    grad_lam,
    form: str = "h1",
    rule: QuadratureRule | None = None,
    edge_points: int = 6,
    data: str = "interpolant",
) -> np.ndarray:
    """g_i = (-lap X, chi_i) - c(lam, chi_i) + boundary flux of X.

    The boundary term integrates (grad X . n) chi_i over the reference solid
    boundary. The multiplier pairing c uses the same form as the assembled
    constraint blocks and is always integrated by quadrature, so the
    manufactured fields satisfy the discrete solid equation up to the data
    error of the (-lap X, chi_i) term, which follows `data` ("interpolant"
    or "quadrature").
    """
    rule = rule or high_order_rule(RHS_RULE_DEGREE)
    pts = rule.physical_points(mesh.triangle_coords())
    flat = pts.reshape(-1, 2)
    vals = -np.asarray(lam(flat), dtype=float).reshape(pts.shape)
    contrib = np.einsum("q,tqc,qa,t->tac", rule.weights, vals, rule.points, mesh.areas)
    if form == "h1":
        gl = np.asarray(grad_lam(flat), dtype=float).reshape(pts.shape[:2] + (2, 2))
        gs = p1_gradients(mesh)
        contrib -= np.einsum("q,tqcj,taj,t->tac", rule.weights, gl, gs, mesh.areas)
    elif form != "l2":
        raise ValueError(f"unknown coupling form {form!r}")
    out = np.zeros(2 * mesh.num_vertices)
    np.add.at(out, (2 * mesh.triangles[:, :, None] + np.arange(2)).ravel(), contrib.ravel())
    if data == "interpolant":
        out += assemble_interpolant_volume_rhs(mesh, neg_lap_x)
    elif data == "quadrature":
        out += assemble_volume_rhs(mesh, neg_lap_x, rule)
    else:
        raise ValueError(f"unknown data path {data!r}")

    nodes, weights = edge_rule(edge_points)
    for a, b in mesh.boundary_edges:
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        edge = pb - pa
        length = float(np.hypot(*edge))
        normal = np.array([edge[1], -edge[0]]) / length
        x = pa + nodes[:, None] * edge
        flux = np.asarray(grad_x(x), dtype=float) @ normal  # (Q,2)
        hats = np.column_stack([1.0 - nodes, nodes])        # values of chi_a, chi_b
        contrib = length * np.einsum("q,qc,qa->ac", weights, flux, hats)
        np.add.at(out, 2 * np.array([a, b])[:, None] + np.arange(2), contrib)
    return out


def assemble_constraint_rhs(
    solid_mesh: TriMesh,
    mapped_coords: np.ndarray,
    amap: np.ndarray,
    u_exact,
    grad_u,
    x_exact,
    grad_x,
    form: str = "h1",
    rule: QuadratureRule | None = None,
) -> np.ndarray:
    """d_l = c(zeta_l, u(Xbar) - X), by direct quadrature on solid elements.

    u is evaluated at straight-edge mapped points, and its reference gradient
    uses the constant per-element jacobian, matching the discretization of
    the left-hand side exactly. The default rule is exact for the degree-8
    integrand this produces with affine maps, so the overlay route for d must
    agree to round-off.
    """
    rule = rule or high_order_rule(8)
    ref_pts = rule.physical_points(solid_mesh.triangle_coords())
    map_pts = np.einsum("qi,tij->tqj", rule.points, mapped_coords)
    shape = ref_pts.shape
    vals = np.asarray(u_exact(map_pts.reshape(-1, 2)), dtype=float).reshape(shape) - np.asarray(
        x_exact(ref_pts.reshape(-1, 2)), dtype=float
    ).reshape(shape)
    contrib = np.einsum("q,tqc,qa,t->tac", rule.weights, vals, rule.points, solid_mesh.areas)
    if form == "h1":
        gu = np.asarray(grad_u(map_pts.reshape(-1, 2)), dtype=float).reshape(shape[:2] + (2, 2))
        gx = np.asarray(grad_x(ref_pts.reshape(-1, 2)), dtype=float).reshape(shape[:2] + (2, 2))
        gdiff = np.einsum("tqci,tij->tqcj", gu, amap) - gx
        gs = p1_gradients(solid_mesh)
        contrib += np.einsum("q,tqcj,taj,t->tac", rule.weights, gdiff, gs, solid_mesh.areas)
    elif form != "l2":
        raise ValueError(f"unknown coupling form {form!r}")
    out = np.zeros(2 * solid_mesh.num_vertices)
    np.add.at(out, (2 * solid_mesh.triangles[:, :, None] + np.arange(2)).ravel(), contrib.ravel())
    return out


def assemble_constraint_rhs_overlay(
    overlay: Overlay,
    solid_mesh: TriMesh,
    mapped_coords: np.ndarray,
    amap: np.ndarray,
    adet: np.ndarray,
    u_exact,
    grad_u,
    x_exact,
    grad_x,
    form: str = "h1",
    rule: QuadratureRule | None = None,
) -> np.ndarray:
    """Same vector as assemble_constraint_rhs, u(Xbar) part via the overlay.

    The u term is integrated piecewise over the mesh intersection, the X term
    directly on solid elements. For polynomial u and affine maps both routes
    are exact, so they agree to round-off; the overlay route exists to mirror
    how the coupling term of f is assembled.
    """
    rule = rule or high_order_rule(8)
    pts = np.einsum("qi,mij->mqj", rule.points, overlay.sub_coords)
    bs = barycentric_coords(mapped_coords[overlay.solid_tri][:, None], pts)
    ref_pts = np.einsum("mqa,maj->mqj", bs, solid_mesh.triangle_coords(overlay.solid_tri))
    u_v = np.asarray(u_exact(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape)
    contrib = np.einsum("q,mqc,mqb->mbc", rule.weights, u_v, bs)
    if form == "h1":
        gu = np.asarray(grad_u(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2] + (2, 2))
        gs = p1_gradients(solid_mesh)[overlay.solid_tri]
        gref = np.einsum("mqci,mij->mqcj", gu, amap[overlay.solid_tri])
        contrib += np.einsum("q,mqcj,mbj->mbc", rule.weights, gref, gs)
    elif form != "l2":
        raise ValueError(f"unknown coupling form {form!r}")
    contrib *= (overlay.areas / np.abs(adet[overlay.solid_tri]))[:, None, None]
    out = np.zeros(2 * solid_mesh.num_vertices)
    cols = 2 * solid_mesh.triangles[overlay.solid_tri][:, :, None] + np.arange(2)
    np.add.at(out, cols.ravel(), contrib.ravel())

    zero_vec = lambda p: np.zeros((len(p), 2))
    zero_grad = lambda p: np.zeros((len(p), 2, 2))
    out += assemble_constraint_rhs(solid_mesh, mapped_coords, amap,
                                   zero_vec, zero_grad, x_exact, grad_x,
                                   form, rule)
    return out


def pressure_mean_weights(pressure: FESpace) -> np.ndarray:
    """Weights w with w @ p = integral of the pressure field over the domain."""
    mesh = pressure.mesh
    w = np.zeros(pressure.dof_count)
    np.add.at(w, mesh.triangles.ravel(), np.repeat(mesh.areas / 3.0, 3))
    if pressure.enriched:
        w[mesh.num_vertices:] = mesh.areas
    return w


def assemble_pressure_gram(pressure: FESpace) -> sp.csr_matrix:
    """Mass (Gram) matrix of the pressure space, P0 enrichment included.

    Singular for the enriched space: the constant field is represented both
    ways, so the vertex-constant minus element-constant direction is a
    kernel vector. Pinning one DOF per constant mode restores definiteness.
    """
    mesh = pressure.mesh
    rows, cols = _local_pairs(mesh.triangles)
    vc = mesh.num_vertices
    m11 = sp.coo_matrix(
        (_scalar_mass_local(mesh).ravel(), (rows.ravel(), cols.ravel())),
        shape=(vc, vc),
    ).tocsr()
    if not pressure.enriched:
        return m11
    t = mesh.num_triangles
    m10 = sp.coo_matrix(
        (np.repeat(mesh.areas / 3.0, 3),
         (mesh.triangles.ravel(), np.repeat(np.arange(t), 3))),
        shape=(vc, t),
    ).tocsr()
    return sp.bmat([[m11, m10], [m10.T, sp.diags(mesh.areas)]], format="csr")


def apply_dirichlet(matrix: sp.csr_matrix, rhs: np.ndarray, dofs: np.ndarray):
    """Zero rows and columns of constrained DOFs, put 1 on the diagonal.

    Exact for homogeneous conditions (no lift needed); keeps symmetry.
    Returns (matrix, rhs) as new objects.
    """
    n = matrix.shape[0]
    keep = np.ones(n)
    keep[dofs] = 0.0
    mask = sp.diags(keep)
    pinned = sp.coo_matrix((np.ones(len(dofs)), (dofs, dofs)), shape=matrix.shape)
    out = (mask @ matrix @ mask + pinned).tocsr()
    out.sum_duplicates()
    rhs = rhs.copy()
    rhs[dofs] = 0.0
    return out, rhs


@dataclass
class CoupledSystem:
    """Assembled saddle-point system with field layout and nullspace data.

    matrix/rhs have homogeneous Dirichlet rows already eliminated
    (identity rows). The pressure constant modes are NOT yet pinned; the
    solver handles that, guided by pressure_pins (one representative DOF per
    constant mode: the first P1 vertex, plus the first P0 element for the
    enriched space) and mean_weights (w @ p = integral of p over the domain).
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    offsets: dict
    mean_weights: np.ndarray
    pressure_pins: np.ndarray
    pressure_p1_count: int
    dirichlet: np.ndarray
    domain_area: float
    blocks: dict | None = None  # raw sub-matrices and data vectors, pre-Dirichlet

    def field_slice(self, name: str) -> slice:
        start, size = self.offsets[name]
        return slice(start, start + size)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def build_system(
    af: sp.csr_matrix,
    b: sp.csr_matrix,
    a_s: sp.csr_matrix,
    cs: sp.csr_matrix,
    cf: sp.csr_matrix,
    f: np.ndarray,
    g: np.ndarray,
    d: np.ndarray,
    velocity: FESpace,
    pressure: FESpace,
) -> CoupledSystem:
    """Assemble the block matrix, apply velocity Dirichlet conditions."""
    nu, npr = af.shape[0], b.shape[0]
    nx, nl = a_s.shape[0], cf.shape[0]
    matrix = sp.bmat(
        [
            [af, b.T, None, cf.T],
            [b, None, None, None],
            [None, None, a_s, -cs.T],
            [cf, None, -cs, None],
        ],
        format="csr",
    )
    rhs = np.concatenate([f, np.zeros(npr), g, d])
    dirichlet = velocity.dirichlet_dofs()
    matrix, rhs = apply_dirichlet(matrix, rhs, dirichlet)

    pins = [nu]  # first P1 pressure vertex
    if pressure.enriched:
        pins.append(nu + pressure.mesh.num_vertices)  # first P0 element
    offsets = {
        "u": (0, nu),
        "p": (nu, npr),
        "X": (nu + npr, nx),
        "lam": (nu + npr + nx, nl),
    }
    return CoupledSystem(
        matrix=matrix,
        rhs=rhs,
        offsets=offsets,
        mean_weights=pressure_mean_weights(pressure),
        pressure_pins=np.asarray(pins, dtype=np.int64),
        pressure_p1_count=pressure.mesh.num_vertices,
        dirichlet=dirichlet,
        domain_area=float(pressure.pair.coarse.areas.sum()),
        blocks={"af": af, "b": b, "a_s": a_s, "cs": cs, "cf": cf,
                "f": f, "g": g, "d": d,
                "pressure_gram": assemble_pressure_gram(pressure)},
    )
