"""Benchmark definitions: exact fields, error norms, rates, and DOF counts."""

import math

import numpy as np
import pytest

from artifact import verification as ver
from artifact.assembly import assemble_constraint_rhs, assemble_constraint_rhs_overlay
from artifact.mesh import build_uniform
from artifact.quadrature import high_order_rule
from artifact.spaces import FESpace


def _sample_box(rng, n, box=(-2.0, -2.0, 2.0, 2.0)):
    xmin, ymin, xmax, ymax = box
    pts = rng.random((n, 2))
    pts[:, 0] = xmin + (xmax - xmin) * pts[:, 0]
    pts[:, 1] = ymin + (ymax - ymin) * pts[:, 1]
    return pts


# ------------------------------------------------------------- exact fields

def test_velocity_is_divergence_free(rng):
    pts = _sample_box(rng, 10_000)
    g = ver.stream_velocity_grad(pts)
    div = g[:, 0, 0] + g[:, 1, 1]
    assert np.abs(div).max() <= 1e-12 * np.abs(g).max()


def test_velocity_vanishes_on_fluid_boundary(rng):
    line = np.linspace(-2.0, 2.0, 1001)
    for fixed in (-2.0, 2.0):
        for pts in (np.column_stack([line, np.full_like(line, fixed)]),
                    np.column_stack([np.full_like(line, fixed), line])):
            assert np.abs(ver.stream_velocity(pts)).max() <= 1e-12


def _central_fd(func, pts, h):
    out = []
    for j in range(2):
        step = np.zeros(2)
        step[j] = h
        out.append((np.asarray(func(pts + step)) - np.asarray(func(pts - step))) / (2 * h))
    return np.stack(out, axis=-1)  # (..., c, j)


def test_velocity_gradient_matches_finite_differences(rng):
    pts = _sample_box(rng, 1000)
    g = ver.stream_velocity_grad(pts)
    fd = _central_fd(ver.stream_velocity, pts, 1e-5)
    np.testing.assert_allclose(g, fd, atol=1e-6 * np.abs(g).max())


def test_velocity_laplacian_matches_finite_differences(rng):
    pts = _sample_box(rng, 1000)
    ref = ver.stream_velocity_neg_lap(pts)
    lap = np.zeros_like(ref)
    h = 1e-4
    for j in range(2):
        step = np.zeros(2)
        step[j] = h
        lap += (np.asarray(ver.stream_velocity(pts + step))
                - 2.0 * np.asarray(ver.stream_velocity(pts))
                + np.asarray(ver.stream_velocity(pts - step))) / h ** 2
    np.testing.assert_allclose(ref, -lap, atol=1e-6 * np.abs(ref).max())


def test_multiplier_gradient_matches_finite_differences(rng):
    pts = _sample_box(rng, 1000, (-1.0, -1.0, 1.0, 1.0))
    g = ver.exp_multiplier_grad(pts)
    fd = _central_fd(ver.exp_multiplier, pts, 1e-6)
    np.testing.assert_allclose(g, fd, atol=1e-6 * np.abs(g).max())


def test_pressure_gradient_matches_finite_differences(rng):
    pts = _sample_box(rng, 1000)
    case = ver.make_test(1)
    g = case.exact.pressure_grad_smooth(pts)
    fd = _central_fd(lambda p: case.exact.pressure(p)[..., None], pts, 1e-6)
    np.testing.assert_allclose(g, fd[:, 0, :], atol=1e-6 * np.abs(g).max())


# ----------------------------------------------------------- configurations

def test_case_catalog_geometry():
    t1 = ver.make_test(1)
    assert t1.fluid_box == (-2.0, -2.0, 2.0, 2.0)
    assert t1.solid_box == (-1.0, -1.0, 1.0, 1.0)
    assert not t1.has_jump

    assert ver.make_test(2).solid_kind == "left"
    assert ver.make_test(3).solid_box == (-0.62, -0.62, 1.38, 1.38)
    assert ver.make_test(4).solid_kind == "unstructured"
    assert ver.make_test(5).pressure_variant == "jump_matching"

    q = math.pi / 4.0
    t6 = ver.make_test(6)
    assert t6.solid_box == pytest.approx((-q, -q, q, q))
    assert t6.pressure_variant == "jump_nonmatching"

    t8 = ver.make_test(8)
    assert t8.solid_box == (0.0, 0.0, 1.0, 1.0)
    corners = np.array([[0.0, 0.0], [1.0, 1.0]])
    np.testing.assert_allclose(t8.deformation.value(corners),
                               [[-0.62, -0.62], [1.38, 1.38]], atol=1e-14)


def test_identity_map_cases_leave_points_alone(rng):
    pts = _sample_box(rng, 100, (-1.0, -1.0, 1.0, 1.0))
    for ident in (1, 2, 3, 5, 6):
        case = ver.make_test(ident)
        np.testing.assert_array_equal(case.deformation.value(pts), pts)


def test_disk_case_corner_images():
    t7 = ver.make_test(7)
    pts = np.array([[1.0, 0.0], [1.0, 1.0]])
    images = t7.deformation.value(pts)
    np.testing.assert_allclose(images[0], [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(images[1], [math.sqrt(0.5), math.sqrt(0.5)],
                               atol=1e-15)
    assert t7.solid_area == pytest.approx(math.pi)


def test_unknown_test_id_rejected():
    for ident in (0, 9, -1):
        with pytest.raises(ValueError, match="unknown test"):
            ver.make_test(ident)


def test_jump_constants_balance_to_zero_mean():
    # piecewise offsets must cancel over the 4x4 fluid box
    for ident in (5, 6):
        case = ver.make_test(ident)
        ex = case.exact
        inside_val = ex.pressure(np.array([[0.0, 0.1]])).item()
        outside_val = ex.pressure(np.array([[1.9, 1.9]])).item()
        c_s = inside_val - 150.0 * math.sin(0.0)
        c_f = outside_val - 150.0 * math.sin(1.9)
        assert c_s - c_f == pytest.approx(ex.pressure_jump, rel=1e-12)
        area = case.solid_area
        assert c_s * area + c_f * (16.0 - area) == pytest.approx(0.0, abs=1e-8)


def test_jump_pressure_has_zero_mean_by_quadrature():
    # the jump line of the matching-jump case lies on mesh lines, so the
    # element-wise rule never straddles it and integrates the field cleanly
    case = ver.make_test(5)
    mesh = build_uniform(16, case.fluid_box, "right")
    rule = high_order_rule(6)
    pts = rule.physical_points(mesh.triangle_coords())
    vals = np.asarray(case.exact.pressure(pts.reshape(-1, 2))).reshape(pts.shape[:2])
    mean = np.einsum("q,tq,t->", rule.weights, vals, mesh.areas) / 16.0
    assert abs(mean) <= 1e-8


# ------------------------------------------------------------- error norms

def test_field_errors_vanish_for_reproduced_field():
    mesh = build_uniform(4, (-1.0, -1.0, 1.0, 1.0), "right")
    space = FESpace.p1_vector(mesh)
    field = lambda p: np.stack([1.0 + 2.0 * p[..., 0] - p[..., 1], p[..., 1]], axis=-1)
    grad = lambda p: np.broadcast_to(
        np.array([[2.0, -1.0], [0.0, 1.0]]), p.shape[:-1] + (2, 2))
    coeffs = space.interpolate(field)
    l2, h1 = ver.field_errors(mesh, coeffs, field, grad)
    assert l2 <= 1e-12
    assert h1 <= 1e-12


def test_published_errors_at_coarse_level(solved_t1_n16):
    disc, shared, system, x, report = solved_t1_n16
    errors = ver.compute_errors(disc, x)
    assert errors["X_L2"] == pytest.approx(8.011e-03, rel=0.01)
    assert errors["X_H1"] == pytest.approx(4.972e-02, rel=0.01)
    assert errors["lam_L2"] == pytest.approx(1.908e-01, rel=0.01)
    assert errors["lam_H1"] == pytest.approx(4.166e-01, rel=0.01)


def test_constraint_data_vanishes_for_identity_map(solved_t1_n16):
    disc, shared, system, x, report = solved_t1_n16
    assert np.abs(shared.d).max() <= 1e-12


def test_constraint_data_routes_agree_for_mapped_solid():
    # disk map: both integration routes see the same polynomial integrand
    disc = ver.build_level(ver.make_test(7), 8, 8)
    ex = disc.case.exact
    direct = assemble_constraint_rhs(
        disc.solid_mesh, disc.mapped_coords, disc.amap,
        ex.velocity, ex.velocity_grad, ex.solid, ex.solid_grad)
    overlay = assemble_constraint_rhs_overlay(
        disc.overlay, disc.solid_mesh, disc.mapped_coords, disc.amap, disc.adet,
        ex.velocity, ex.velocity_grad, ex.solid, ex.solid_grad)
    scale = max(np.abs(direct).max(), 1.0)
    assert np.abs(direct - overlay).max() <= 1e-9 * scale


def test_convergence_rates_basics():
    rates = ver.convergence_rates([4e-2, 1e-2])
    assert np.isnan(rates[0])
    assert rates[1] == pytest.approx(2.0)
    rates = ver.convergence_rates([1e-2, 0.0, 5e-3])
    assert np.isnan(rates[1]) and np.isnan(rates[2])
    assert len(rates) == 3


def test_doubling_levels_helper():
    assert ver.doubling_levels(16, 64) == [(16, 16), (32, 32), (64, 64)]
    with pytest.raises(ValueError):
        ver.doubling_levels(16, 48)
    with pytest.raises(ValueError):
        ver.doubling_levels(0, 16)


def test_run_many_methods_share_levels_and_agree():
    studies = ver.run_many(1, ["intersect", "noint_q2", "noint_q3"],
                           levels=[(16, 16)])
    base = studies["intersect"].levels[0].errors
    for method in ("noint_q2", "noint_q3"):
        errors = studies[method].levels[0].errors
        for key, val in base.items():
            # agreement to three significant digits on matching meshes
            assert errors[key] == pytest.approx(val, rel=5e-4), (method, key)


def test_run_test_rejects_unknown_method():
    with pytest.raises(ValueError, match="unknown method"):
        ver.run_test(1, "noint_q4", levels=[(4, 4)])


def test_build_level_rejects_unknown_element():
    with pytest.raises(ValueError, match="unknown element"):
        ver.build_level(ver.make_test(1), 4, 4, "taylor_hood")


def test_study_rows_are_serializable():
    study = ver.run_test(1, "intersect", levels=[(8, 8), (16, 16)])
    rows = study.rows()
    assert len(rows) == 2
    assert rows[0]["level"] == 8
    assert rows[1]["err_u_L2"] < rows[0]["err_u_L2"]
    assert math.isnan(rows[0]["rate_u_L2"])
    assert rows[1]["rate_u_L2"] == pytest.approx(2.0, abs=0.1)


def test_quadrature_data_path_changes_little(solved_t1_n16):
    # fully integrated data instead of nodal-interpolant data: same fields,
    # slightly different consistency error, same leading digits
    disc, shared, system, x, report = solved_t1_n16
    from artifact.solver import solve

    shared_q = ver.assemble_shared(disc, data="quadrature")
    system_q = ver.coupled_system(disc, shared_q, "intersect")
    xq, _ = solve(system_q)
    base = ver.compute_errors(disc, x)
    alt = ver.compute_errors(disc, xq)
    for key, val in base.items():
        # the data path shifts the consistency error, not the approximation
        # order: every column stays within a factor of two at this level
        assert 0.5 < alt[key] / val < 2.0, key


def test_assemble_shared_rejects_unknown_data_path(solved_t1_n16):
    disc = solved_t1_n16[0]
    with pytest.raises(ValueError, match="data path"):
        ver.assemble_shared(disc, data="lumped")


@pytest.mark.parametrize("ident", range(1, 9))
def test_primary_fields_converge_at_expected_orders(ident):
    # velocity and displacement orders hold in every configuration when the
    # interface matrix integrates over the mesh intersection
    study = ver.run_test(ident, "intersect", levels=[(16, 16), (32, 32)])
    targets = {"u_L2": 2.0, "u_H1": 1.0, "X_L2": 2.0, "X_H1": 1.0}
    for key, want in targets.items():
        assert study.rates[key][-1] == pytest.approx(want, abs=0.15), key


# --------------------------------------------------------------- DOF counts

def test_dof_summary_first_level():
    dofs = ver.dof_summary(16)
    assert dofs["u"] == 2_178
    assert dofs["p"] == 289
    assert dofs["p_enriched"] == 801
    assert dofs["X_uniform"] == 162
    assert dofs["X_unstructured"] == 232


def test_dof_summary_scales_with_level():
    dofs = ver.dof_summary(32)
    assert dofs["u"] == 8_450
    assert dofs["p"] == 1_089
    assert dofs["p_enriched"] == 3_137
    assert dofs["X_uniform"] == 578
    assert dofs["X_unstructured"] == 742
