"""Assembly kernels against independent quadrature and calculus oracles."""

import numpy as np
import pytest

from artifact import verification as ver
from artifact.assembly import (
    apply_dirichlet,
    assemble_Af,
    assemble_As,
    assemble_B,
    assemble_Cf_intersection,
    assemble_Cf_nointersection,
    assemble_Cs,
    assemble_constraint_rhs,
    assemble_fluid_coupling_rhs,
    assemble_interpolant_volume_rhs,
    assemble_pressure_gram,
    assemble_solid_rhs,
    assemble_volume_rhs,
    element_affine_maps,
    pressure_mean_weights,
)
from artifact.geometry import (
    BoxIndex,
    CoverageError,
    PointLocationError,
    barycentric_coords,
    build_overlay,
    locate_points,
)
from artifact.mesh import TriMesh, build_uniform, refine_red
from artifact.quadrature import gauss_rule, high_order_rule
from artifact.spaces import FESpace, p1_gradients


@pytest.fixture(scope="module")
def t1_n4():
    return ver.build_level(ver.make_test(1), 4, 4)


@pytest.fixture(scope="module")
def t1_n8():
    return ver.build_level(ver.make_test(1), 8, 8)


@pytest.fixture(scope="module")
def t3_n8():
    return ver.build_level(ver.make_test(3), 8, 8)


def _pair(n):
    return refine_red(build_uniform(n, (0.0, 0.0, 1.0, 1.0), "right"))


def _interpolant_energy(mesh, nodal):
    """Dirichlet energy of the P1 interpolant; gradients are cellwise constant."""
    g = p1_gradients(mesh)
    gv = np.einsum("tad,tac->tdc", g, nodal[mesh.triangles])
    return float(np.einsum("t,tdc->", mesh.areas, gv ** 2))


# ---------------------------------------------------------------- stiffness

def test_af_kills_constants_before_bc():
    af = assemble_Af(_pair(2))
    assert np.abs(af @ np.ones(af.shape[1])).max() < 1e-12


def test_af_symmetric():
    af = assemble_Af(_pair(2))
    assert abs(af - af.T).max() < 1e-14


def test_af_energy_of_quadratic_interpolant():
    pair = _pair(2)
    vel = FESpace.p1_iso_p2_vector(pair)
    field = lambda p: np.column_stack(
        [p[:, 0] ** 2 + 0.5 * p[:, 0] * p[:, 1], p[:, 1] ** 2 - p[:, 0] ** 2]
    )
    coeffs = vel.interpolate(field)
    energy = coeffs @ (assemble_Af(pair) @ coeffs)
    nodal = np.asarray(field(pair.fine.vertices))
    assert energy == pytest.approx(_interpolant_energy(pair.fine, nodal), rel=1e-12)


def test_as_kills_constants_and_is_symmetric():
    mesh = build_uniform(4, (-1.0, -1.0, 1.0, 1.0), "right")
    a_s = assemble_As(mesh)
    assert np.abs(a_s @ np.ones(a_s.shape[1])).max() < 1e-12
    assert abs(a_s - a_s.T).max() < 1e-14


def test_as_energy_of_interpolant():
    mesh = build_uniform(3, (-1.0, -1.0, 1.0, 1.0), "right")
    space = FESpace.p1_vector(mesh)
    field = lambda p: np.column_stack([np.sin(p[:, 0]), p[:, 0] * p[:, 1]])
    coeffs = space.interpolate(field)
    energy = coeffs @ (assemble_As(mesh) @ coeffs)
    nodal = np.asarray(field(mesh.vertices))
    assert energy == pytest.approx(_interpolant_energy(mesh, nodal), rel=1e-12)


# --------------------------------------------------------------- divergence

@pytest.mark.parametrize("enriched", [False, True])
def test_b_annihilates_divergence_free_interpolant(enriched):
    pair = _pair(4)
    space = FESpace.p1_plus_p0_scalar(pair) if enriched else FESpace.p1_scalar(pair.coarse, pair)
    vel = FESpace.p1_iso_p2_vector(pair)
    u = vel.interpolate(lambda p: np.column_stack([p[:, 1], -p[:, 0]]))
    assert np.abs(assemble_B(space) @ u).max() < 1e-13


@pytest.mark.parametrize("enriched", [False, True])
def test_b_rows_integrate_basis_for_unit_divergence(enriched):
    # u = (x, 0) has div 1, so each row must produce -integral of its basis fn
    pair = _pair(3)
    space = FESpace.p1_plus_p0_scalar(pair) if enriched else FESpace.p1_scalar(pair.coarse, pair)
    vel = FESpace.p1_iso_p2_vector(pair)
    u = vel.interpolate(lambda p: np.column_stack([p[:, 0], np.zeros(len(p))]))
    coarse = pair.coarse
    expected = np.zeros(space.dof_count)
    np.add.at(expected, coarse.triangles.ravel(), np.repeat(coarse.areas / 3.0, 3))
    if enriched:
        expected[coarse.num_vertices:] = coarse.areas
    np.testing.assert_allclose(assemble_B(space) @ u, -expected, atol=1e-13)


def test_b_p0_rows_match_boundary_flux(rng):
    # divergence theorem per macro element: row . u = -contour integral of u.n
    pair = _pair(2)
    b = assemble_B(FESpace.p1_plus_p0_scalar(pair))
    fine, coarse = pair.fine, pair.coarse
    u = rng.standard_normal(2 * fine.num_vertices)
    for k in range(coarse.num_triangles):
        corners = coarse.triangles[k]
        flux = 0.0
        for e in range(3):
            va, vb = corners[e], corners[(e + 1) % 3]
            pa, pb = coarse.vertices[va], coarse.vertices[vb]
            mid = 0.5 * (pa + pb)
            vm = int(np.where(np.all(np.abs(fine.vertices - mid) < 1e-12, axis=1))[0][0])
            normal = np.array([pb[1] - pa[1], pa[0] - pb[0]])  # outward, |edge| long
            ua, um, ub = u[2 * va:2 * va + 2], u[2 * vm:2 * vm + 2], u[2 * vb:2 * vb + 2]
            # u_h is linear on each half edge, so the trapezoid rule is exact
            flux += 0.25 * (ua + um + um + ub) @ normal
        row = b[coarse.num_vertices + k].toarray().ravel()
        assert row @ u == pytest.approx(-flux, abs=1e-13)


# ------------------------------------------------------- solid-side coupling

def test_cs_h1_is_l2_plus_stiffness():
    mesh = build_uniform(4, (-1.0, -1.0, 1.0, 1.0), "right")
    diff = assemble_Cs(mesh, "h1") - assemble_Cs(mesh, "l2") - assemble_As(mesh)
    assert abs(diff).max() < 1e-14


def test_cs_l2_row_sums_are_lumped_areas():
    mesh = build_uniform(4, (-1.0, -1.0, 1.0, 1.0), "right")
    sums = assemble_Cs(mesh, "l2") @ np.ones(2 * mesh.num_vertices)
    lump = np.zeros(mesh.num_vertices)
    np.add.at(lump, mesh.triangles.ravel(), np.repeat(mesh.areas / 3.0, 3))
    np.testing.assert_allclose(sums, np.repeat(lump, 2), rtol=1e-13)
    total = np.ones(len(sums)) @ sums
    assert total == pytest.approx(2.0 * mesh.areas.sum(), rel=1e-13)


def test_cs_h1_positive_definite():
    mesh = build_uniform(4, (-1.0, -1.0, 1.0, 1.0), "right")
    eigs = np.linalg.eigvalsh(assemble_Cs(mesh, "h1").toarray())
    assert eigs[0] > 0.0


# ----------------------------------------------------- interface matrix C_f

def test_cf_methods_agree_on_matching_meshes(t1_n8):
    ci = ver.interface_matrix(t1_n8, "intersect")
    cn = ver.interface_matrix(t1_n8, "noint_q2")
    assert abs(ci - cn).max() < 1e-13


def test_cf_intersection_invariant_under_rule_order(t1_n8):
    d = t1_n8
    args = (d.overlay, d.solid_mesh, d.pair.fine, d.mapped_coords, d.amap, d.adet)
    c2 = assemble_Cf_intersection(*args, "h1", order=2)
    c3 = assemble_Cf_intersection(*args, "h1", order=3)
    assert abs(c2 - c3).max() < 1e-13


def test_cf_direct_orders_differ_on_nonmatching_meshes(t3_n8):
    q2 = ver.interface_matrix(t3_n8, "noint_q2")
    q3 = ver.interface_matrix(t3_n8, "noint_q3")
    assert abs(q2 - q3).max() > 1e-8


def _single_triangle_setup(tri):
    fluid = build_uniform(1, (0.0, 0.0, 1.0, 1.0), "right")
    solid = TriMesh(np.asarray(tri, dtype=float), np.array([[0, 1, 2]]))
    coords = solid.triangle_coords()
    amap, adet = element_affine_maps(coords, coords)
    index = BoxIndex(fluid.triangle_coords())
    overlay = build_overlay(coords, None, index=index)
    return fluid, solid, coords, amap, adet, index, overlay


def test_cf_interior_triangle_needs_no_intersection():
    fluid = build_uniform(1, (0.0, 0.0, 1.0, 1.0), "right")
    base = fluid.triangle_coords(0)
    tri = base.mean(axis=0) + 0.3 * (base - base.mean(axis=0))
    fluid, solid, coords, amap, adet, index, overlay = _single_triangle_setup(tri)
    ci = assemble_Cf_intersection(overlay, solid, fluid, coords, amap, adet)
    cn = assemble_Cf_nointersection(solid, fluid, coords, amap, index)
    assert abs(ci - cn).max() < 1e-14


def _halfplane_clip(poly, normal, offset):
    """Keep the part of a convex CCW polygon with normal . p <= offset."""
    out = []
    for i in range(len(poly)):
        p, q = poly[i], poly[(i + 1) % len(poly)]
        dp, dq = normal @ p - offset, normal @ q - offset
        if dp <= 0.0:
            out.append(p)
        if (dp < 0.0) != (dq < 0.0):
            out.append(p + (dp / (dp - dq)) * (q - p))
    return np.asarray(out)


@pytest.mark.parametrize("form", ["l2", "h1"])
def test_cf_straddling_triangle_against_split_quadrature(form):
    # One solid triangle crossing the diagonal of a two-element fluid mesh.
    # Oracle: clip by hand against the interior edge, then integrate each
    # smooth piece with a rich rule.
    tri = [(0.15, 0.10), (0.90, 0.35), (0.45, 0.80)]
    fluid, solid, coords, amap, adet, index, overlay = _single_triangle_setup(tri)
    ci = assemble_Cf_intersection(overlay, solid, fluid, coords, amap, adet, form).toarray()

    edges = np.sort(
        np.concatenate([fluid.triangles[:, [0, 1]], fluid.triangles[:, [1, 2]],
                        fluid.triangles[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    pa, pb = fluid.vertices[uniq[counts == 2][0]]
    normal = np.array([pb[1] - pa[1], pa[0] - pb[0]])
    offset = normal @ pa

    rule = high_order_rule(10)
    gs = p1_gradients(solid)[0]
    gf_all = p1_gradients(fluid)
    oracle = np.zeros((3, fluid.num_vertices))
    for side_n, side_o in ((normal, offset), (-normal, -offset)):
        poly = _halfplane_clip(np.asarray(tri, dtype=float), side_n, side_o)
        for i in range(1, len(poly) - 1):
            sub = np.array([poly[0], poly[i], poly[i + 1]])
            e1, e2 = sub[1] - sub[0], sub[2] - sub[0]
            area = 0.5 * (e1[0] * e2[1] - e1[1] * e2[0])
            cen = sub.mean(axis=0)
            bc = barycentric_coords(fluid.triangle_coords(), cen[None, :])
            ft = int(np.argmax(bc.min(axis=-1)))
            pts = rule.points @ sub
            bs = barycentric_coords(coords[0][None], pts)
            bf = barycentric_coords(fluid.triangle_coords(ft)[None], pts)
            local = area * np.einsum("q,qa,qb->ab", rule.weights, bs, bf)
            if form == "h1":
                local += area * (gs @ gf_all[ft].T)
            np.add.at(oracle, (np.repeat(np.arange(3), 3),
                               np.tile(fluid.triangles[ft], 3)), local.ravel())

    for a in range(3):
        for b in range(fluid.num_vertices):
            assert ci[2 * a, 2 * b] == pytest.approx(oracle[a, b], abs=1e-10)
            assert ci[2 * a + 1, 2 * b + 1] == ci[2 * a, 2 * b]
            assert ci[2 * a, 2 * b + 1] == 0.0


def test_cf_l2_row_sums_give_reference_areas():
    # constant fluid test function: rows integrate the multiplier basis
    tri = [(0.15, 0.10), (0.90, 0.35), (0.45, 0.80)]
    fluid, solid, coords, amap, adet, index, overlay = _single_triangle_setup(tri)
    ci = assemble_Cf_intersection(overlay, solid, fluid, coords, amap, adet, "l2")
    sums = ci @ np.ones(ci.shape[1])
    np.testing.assert_allclose(sums, np.full(6, solid.areas[0] / 3.0), rtol=1e-12)
    assert np.ones(6) @ sums == pytest.approx(2.0 * solid.areas[0], rel=1e-12)


def test_cf_outside_solid_raises():
    fluid = build_uniform(2, (0.0, 0.0, 1.0, 1.0), "right")
    tri = np.array([[0.6, 0.4], [1.4, 0.5], [0.8, 0.9]])  # pokes past x = 1
    solid = TriMesh(tri, np.array([[0, 1, 2]]))
    coords = solid.triangle_coords()
    amap, _ = element_affine_maps(coords, coords)
    index = BoxIndex(fluid.triangle_coords())
    with pytest.raises(PointLocationError):
        assemble_Cf_nointersection(solid, fluid, coords, amap, index)
    with pytest.raises(CoverageError):
        build_overlay(coords, None, index=index)


def test_mapped_gradient_matches_finite_differences(rng):
    # pulled-back hat gradient must be (physical gradient) @ jacobian; central
    # differences of the composed hat are exact for piecewise-linear targets
    fluid = build_uniform(4, (0.0, 0.0, 1.0, 1.0), "right")
    index = BoxIndex(fluid.triangle_coords())
    grads = p1_gradients(fluid)
    a = np.array([[1.2, 0.3], [-0.1, 0.9]])
    b = np.array([0.05, 0.08])
    h = 1e-5

    def hat_values(s_pts):
        loc, bary = locate_points(s_pts @ a.T + b, index)
        return loc, bary

    samples = rng.random((200, 2)) * 0.5
    loc0, bary0 = hat_values(samples)
    keep = np.where(bary0.min(axis=1) > 0.05)[0][:25]
    assert len(keep) >= 10
    checked = 0
    for i in keep:
        t = int(loc0[i])
        code = grads[t] @ a  # (3 hats, 2 pullback derivatives)
        fd = np.empty((3, 2))
        ok = True
        for j in range(2):
            step = np.zeros(2)
            step[j] = h
            lp, bp = hat_values((samples[i] + step)[None])
            lm, bm = hat_values((samples[i] - step)[None])
            if int(lp[0]) != t or int(lm[0]) != t:
                ok = False
                break
            fd[:, j] = (bp[0] - bm[0]) / (2.0 * h)
        if ok:
            np.testing.assert_allclose(code, fd, atol=1e-6)
            checked += 1
    assert checked >= 10


# ------------------------------------------------------------- data vectors

def _refine_tris(tris):
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    return np.concatenate([
        np.stack([a, ab, ca], 1), np.stack([ab, b, bc], 1),
        np.stack([ca, bc, c], 1), np.stack([ab, bc, ca], 1),
    ])


def test_coupling_rhs_matches_subdivided_quadrature(t1_n4):
    disc = t1_n4
    lam, glam = ver.exp_multiplier, ver.exp_multiplier_grad
    got = assemble_fluid_coupling_rhs(
        disc.overlay, disc.solid_mesh, disc.pair.fine, disc.mapped_coords,
        disc.amap, disc.adet, lam, glam, "h1")

    fine = disc.pair.fine
    rule = high_order_rule(10)
    grads = p1_gradients(fine)
    oracle = np.zeros(2 * fine.num_vertices)
    for t in range(disc.solid_mesh.num_triangles):
        coords = disc.solid_mesh.triangle_coords(int(t))
        loc, _ = locate_points(coords.mean(axis=0)[None], disc.index)
        ft = int(loc[0])
        sub = coords[None]
        for _ in range(2):
            sub = _refine_tris(sub)
        e1, e2 = sub[:, 1] - sub[:, 0], sub[:, 2] - sub[:, 0]
        areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        pts = np.einsum("qi,mij->mqj", rule.points, sub).reshape(-1, 2)
        bf = barycentric_coords(fine.triangle_coords(ft)[None], pts)
        assert bf.min() > -1e-10  # solid cell sits inside one fluid cell here
        w = np.repeat(areas, len(rule.weights)) * np.tile(rule.weights, len(sub))
        local = np.einsum("n,nc,nb->bc", w, np.asarray(lam(pts)), bf)
        local += np.einsum("n,ncj,bj->bc", w, np.asarray(glam(pts)), grads[ft])
        cols = 2 * fine.triangles[ft][:, None] + np.arange(2)
        np.add.at(oracle, cols.ravel(), local.ravel())

    np.testing.assert_allclose(got, oracle, atol=1e-9 * np.abs(oracle).max())


def test_zero_data_gives_zero_vectors(t1_n4):
    disc = t1_n4
    zero_v = lambda pts: np.zeros((len(pts), 2))
    zero_g = lambda pts: np.zeros((len(pts), 2, 2))
    assert not assemble_volume_rhs(disc.pair.fine, zero_v).any()
    assert not assemble_interpolant_volume_rhs(disc.pair.fine, zero_v).any()
    assert not assemble_fluid_coupling_rhs(
        disc.overlay, disc.solid_mesh, disc.pair.fine, disc.mapped_coords,
        disc.amap, disc.adet, zero_v, zero_g).any()
    assert not assemble_solid_rhs(disc.solid_mesh, zero_v, zero_g, zero_v, zero_g).any()
    assert not assemble_constraint_rhs(
        disc.solid_mesh, disc.mapped_coords, disc.amap,
        zero_v, zero_g, zero_v, zero_g).any()


def test_unknown_form_rejected(t1_n4):
    disc = t1_n4
    with pytest.raises(ValueError, match="form"):
        assemble_Cs(disc.solid_mesh, "h2")
    with pytest.raises(ValueError, match="form"):
        assemble_Cf_intersection(
            disc.overlay, disc.solid_mesh, disc.pair.fine, disc.mapped_coords,
            disc.amap, disc.adet, "h2")
    with pytest.raises(ValueError, match="form"):
        assemble_Cf_nointersection(
            disc.solid_mesh, disc.pair.fine, disc.mapped_coords, disc.amap,
            disc.index, "h2")


# ---------------------------------------------------------- pressure pieces

def test_pressure_gram_integrates_constants():
    pair = _pair(3)
    for space in (FESpace.p1_scalar(pair.coarse, pair), FESpace.p1_plus_p0_scalar(pair)):
        gram = assemble_pressure_gram(space)
        assert abs(gram - gram.T).max() < 1e-15
        const = np.zeros(space.dof_count)
        const[:space.mesh.num_vertices] = 1.0
        np.testing.assert_allclose(gram @ const, pressure_mean_weights(space), rtol=1e-13)


def test_enriched_gram_kernel_and_pinning():
    pair = _pair(2)
    space = FESpace.p1_plus_p0_scalar(pair)
    gram = assemble_pressure_gram(space)
    vc = space.mesh.num_vertices
    doubled_const = np.concatenate([np.ones(vc), -np.ones(space.mesh.num_triangles)])
    assert np.abs(gram @ doubled_const).max() < 1e-15
    eigs = np.linalg.eigvalsh(gram.toarray())
    assert eigs[0] < 1e-14 * eigs[-1]
    pinned, _ = apply_dirichlet(gram, np.zeros(space.dof_count), np.array([0, vc]))
    assert np.linalg.eigvalsh(pinned.toarray())[0] > 0.0


def test_apply_dirichlet_symmetric_identity_rows(rng):
    mesh = build_uniform(3, (0.0, 0.0, 1.0, 1.0), "right")
    a_s = assemble_As(mesh)
    rhs = rng.standard_normal(a_s.shape[0])
    dofs = np.array([0, 5, 11])
    out, r = apply_dirichlet(a_s, rhs, dofs)
    dense = out.toarray()
    assert abs(out - out.T).max() < 1e-15
    for k in dofs:
        row = np.zeros(len(rhs))
        row[k] = 1.0
        np.testing.assert_array_equal(dense[k], row)
        np.testing.assert_array_equal(dense[:, k], row)
        assert r[k] == 0.0
    untouched = np.setdiff1d(np.arange(len(rhs)), dofs)
    np.testing.assert_array_equal(r[untouched], rhs[untouched])


def test_assembly_is_deterministic(t3_n8):
    disc = t3_n8
    for build in (
        lambda: assemble_Af(disc.pair),
        lambda: assemble_B(disc.pressure),
        lambda: assemble_Cs(disc.solid_mesh),
        lambda: ver.interface_matrix(disc, "intersect"),
        lambda: ver.interface_matrix(disc, "noint_q2"),
    ):
        m1, m2 = build(), build()
        assert np.array_equal(m1.indptr, m2.indptr)
        assert np.array_equal(m1.indices, m2.indices)
        assert np.array_equal(m1.data, m2.data)
