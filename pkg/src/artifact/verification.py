"""Manufactured-solution benchmarks and convergence studies.

Eight geometric configurations share one family of closed-form fields: a
divergence-free velocity derived from a stream function that vanishes (with
its tangential derivative) on the fluid box boundary, the pressure
150 sin(x) optionally offset by piecewise constants to create a jump across
the solid boundary, the solid position field equal to the velocity formula
evaluated on the reference domain, and an exponential multiplier field. The
right-hand sides are assembled so the discrete coupled system is satisfied
by these fields up to the discretization error being measured.

Levels are indexed by the coarse fluid subdivision count n (the pressure
mesh is n x n over the fluid box; velocity lives on its red refinement).
Uniform solid meshes use the same subdivision count, which puts the mapped
solid element size at the fluid velocity element size; unstructured solid
fixtures are selected to match that spacing.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .assembly import (
    CoupledSystem,
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
    assemble_volume_rhs,
    assemble_pressure_jump_rhs,
    assemble_solid_rhs,
    build_system,
    element_affine_maps,
)
from .geometry import BoxIndex, Overlay, build_overlay
from .mesh import MacroMeshPair, TriMesh, affine_map_mesh, build_uniform, corner_swap, import_msh, refine_red
from .quadrature import QuadratureRule, high_order_rule
from .solver import SolveReport, solve
from .spaces import DeformationMap, FESpace, affine_map, disk_map, identity_map, p1_gradients

__all__ = [
    "ExactSolution",
    "BenchmarkCase",
    "LevelDiscretization",
    "LevelResult",
    "StudyResult",
    "ERROR_COLUMNS",
    "METHODS",
    "ELEMENTS",
    "make_test",
    "build_level",
    "assemble_shared",
    "interface_matrix",
    "compute_errors",
    "field_errors",
    "convergence_rates",
    "run_test",
    "run_many",
    "dof_summary",
    "fixture_directory",
    "doubling_levels",
]

FLUID_BOX = (-2.0, -2.0, 2.0, 2.0)
METHODS = ("intersect", "noint_q2", "noint_q3")
ELEMENTS = ("bp", "bp_p0")
ERROR_COLUMNS = ("p_L2", "u_L2", "u_H1", "X_L2", "X_H1", "lam_L2", "lam_H1")
FIXTURE_ENV = "FSI_FIXTURES"

_ERROR_RULE = high_order_rule(6)
_CHUNK = 65536


# ----------------------------------------------------------------------
# Closed-form fields. The velocity is curl(psi) for
# psi = (4 - x^2)^2 (4 - y^2)^2, hand-differentiated below.

def _xy(pts):
    pts = np.asarray(pts, dtype=float)
    return pts[..., 0], pts[..., 1]


def stream_velocity(pts) -> np.ndarray:
    x, y = _xy(pts)
    a = 4.0 - x * x
    b = 4.0 - y * y
    return np.stack([-4.0 * y * a * a * b, 4.0 * x * a * b * b], axis=-1)


def stream_velocity_grad(pts) -> np.ndarray:
    """Jacobian with rows indexed by component: out[..., c, j] = d u_c / d x_j."""
    x, y = _xy(pts)
    a = 4.0 - x * x
    b = 4.0 - y * y
    u1x = 16.0 * x * y * a * b
    u1y = -4.0 * a * a * (4.0 - 3.0 * y * y)
    u2x = 4.0 * b * b * (4.0 - 3.0 * x * x)
    u2y = -16.0 * x * y * a * b
    return np.stack(
        [np.stack([u1x, u1y], axis=-1), np.stack([u2x, u2y], axis=-1)], axis=-2
    )


def stream_velocity_neg_lap(pts) -> np.ndarray:
    x, y = _xy(pts)
    a = 4.0 - x * x
    b = 4.0 - y * y
    lap1 = 16.0 * y * b * (4.0 - 3.0 * x * x) + 24.0 * y * a * a
    lap2 = -24.0 * x * b * b - 16.0 * x * a * (4.0 - 3.0 * y * y)
    return np.stack([-lap1, -lap2], axis=-1)


def exp_multiplier(pts) -> np.ndarray:
    x, y = _xy(pts)
    return np.stack([np.exp(x), np.exp(y)], axis=-1)


def exp_multiplier_grad(pts) -> np.ndarray:
    x, y = _xy(pts)
    z = np.zeros_like(x)
    return np.stack(
        [np.stack([np.exp(x), z], axis=-1), np.stack([z, np.exp(y)], axis=-1)], axis=-2
    )


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form fields of a benchmark, with the derivatives assembly needs.

    Gradient conventions match the assembly module: out[..., c, j] is the
    j-derivative of component c. pressure is the full (possibly piecewise)
    field with zero mean over the fluid box; pressure_grad_smooth is the
    gradient of its smooth part, valid away from the jump line.
    """

    velocity: Callable
    velocity_grad: Callable
    velocity_neg_lap: Callable
    pressure: Callable
    pressure_grad_smooth: Callable
    pressure_jump: float
    solid: Callable
    solid_grad: Callable
    solid_neg_lap: Callable
    multiplier: Callable
    multiplier_grad: Callable


def _pressure_grad_smooth(pts):
    x, _ = _xy(pts)
    return np.stack([150.0 * np.cos(x), np.zeros_like(x)], axis=-1)


def _make_exact(inside_solid: Callable | None, solid_area: float, with_jump: bool) -> ExactSolution:
    if with_jump:
        # Offsets keep the mean over the 4 x 4 fluid box at zero:
        # c_f (16 - A) + c_s A = 0 with c_s = 50.
        c_s = 50.0
        c_f = -50.0 * solid_area / (16.0 - solid_area)

        def pressure(pts):
            x, _ = _xy(pts)
            return 150.0 * np.sin(x) + np.where(inside_solid(pts), c_s, c_f)

        jump = c_s - c_f
    else:

        def pressure(pts):
            x, _ = _xy(pts)
            return 150.0 * np.sin(x)

        jump = 0.0
    return ExactSolution(
        velocity=stream_velocity,
        velocity_grad=stream_velocity_grad,
        velocity_neg_lap=stream_velocity_neg_lap,
        pressure=pressure,
        pressure_grad_smooth=_pressure_grad_smooth,
        pressure_jump=jump,
        solid=stream_velocity,
        solid_grad=stream_velocity_grad,
        solid_neg_lap=stream_velocity_neg_lap,
        multiplier=exp_multiplier,
        multiplier_grad=exp_multiplier_grad,
    )


# ----------------------------------------------------------------------
# Benchmark configurations.

def _box_predicate(box):
    xmin, ymin, xmax, ymax = box

    def inside(pts):
        x, y = _xy(pts)
        return (x >= xmin) & (x <= xmax) & (y >= ymin) & (y <= ymax)

    return inside


def _disk_predicate(pts):
    x, y = _xy(pts)
    return x * x + y * y <= 1.0


@dataclass(frozen=True)
class BenchmarkCase:
    """One geometric configuration of the coupled benchmark problem."""

    ident: int
    fluid_box: tuple
    solid_box: tuple          # reference domain of the solid field
    solid_kind: str           # "right" | "left" | "unstructured"
    deformation: DeformationMap
    pressure_variant: str     # "smooth" | "jump_matching" | "jump_nonmatching"
    inside_solid: Callable
    solid_area: float         # area of the physical solid domain
    exact: ExactSolution

    @property
    def has_jump(self) -> bool:
        return self.pressure_variant != "smooth"

    def build_solid_mesh(self, n: int) -> TriMesh:
        if self.solid_kind == "unstructured":
            return _unstructured_solid(n)
        return build_uniform(n, self.solid_box, orientation=self.solid_kind)

    def solid_mesh_size(self, mesh: TriMesh, n: int) -> float:
        if self.solid_kind == "unstructured":
            edges = mesh.vertices[mesh.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)]
            return float(np.max(np.hypot(*(edges[:, 1] - edges[:, 0]).T)))
        xmin, _, xmax, _ = self.solid_box
        return (xmax - xmin) / n


def fixture_directory() -> Path:
    """Directory holding the bundled meshes; FSI_FIXTURES overrides it."""
    override = os.environ.get(FIXTURE_ENV)
    if override:
        return Path(override)
    return Path(__file__).parent / "fixtures" / "meshes"


def _unstructured_solid(n: int) -> TriMesh:
    """Unstructured mesh of [-0.62, 1.38]^2 with spacing about 2/n.

    Bundled unit-square fixtures exist for n in {8, 16, ..., 256}; the
    fixture with nominal size 1/n is scaled by 2 and shifted, so its mapped
    spacing matches the uniform solid meshes used at the same level.
    """
    h = 1.0 / n
    name = f"unit_square_unstructured_h{h:g}.msh"
    path = fixture_directory() / name
    if not path.exists():
        raise ValueError(
            f"no unstructured solid fixture for subdivision {n} (expected {name})"
        )
    unit = import_msh(path)
    return affine_map_mesh(unit, 2.0 * np.eye(2), np.array([-0.62, -0.62]))


def make_test(ident: int) -> BenchmarkCase:
    """Benchmark configuration by id, 1 through 8.

    1: solid box [-1,1]^2 meshed to match the fluid grid exactly.
    2: same box, left-oriented solid mesh (nodes match, edges do not).
    3: solid box [-0.62,1.38]^2, offset from every fluid grid line.
    4: as 3 with an unstructured solid mesh.
    5: as 2 plus a pressure jump aligned with the fluid mesh.
    6: solid box [-pi/4,pi/4]^2, pressure jump crossing fluid elements.
    7: reference square [-1,1]^2 mapped onto the unit disk.
    8: reference unit square mapped affinely onto [-0.62,1.38]^2.
    """
    if ident not in range(1, 9):
        raise ValueError(f"unknown test {ident}; valid ids are 1..8")
    unit_box = (-1.0, -1.0, 1.0, 1.0)
    off_box = (-0.62, -0.62, 1.38, 1.38)
    if ident == 1:
        return BenchmarkCase(1, FLUID_BOX, unit_box, "right", identity_map(),
                             "smooth", _box_predicate(unit_box), 4.0,
                             _make_exact(None, 4.0, False))
    if ident == 2:
        return BenchmarkCase(2, FLUID_BOX, unit_box, "left", identity_map(),
                             "smooth", _box_predicate(unit_box), 4.0,
                             _make_exact(None, 4.0, False))
    if ident == 3:
        return BenchmarkCase(3, FLUID_BOX, off_box, "left", identity_map(),
                             "smooth", _box_predicate(off_box), 4.0,
                             _make_exact(None, 4.0, False))
    if ident == 4:
        return BenchmarkCase(4, FLUID_BOX, off_box, "unstructured", identity_map(),
                             "smooth", _box_predicate(off_box), 4.0,
                             _make_exact(None, 4.0, False))
    if ident == 5:
        inside = _box_predicate(unit_box)
        return BenchmarkCase(5, FLUID_BOX, unit_box, "left", identity_map(),
                             "jump_matching", inside, 4.0,
                             _make_exact(inside, 4.0, True))
    if ident == 6:
        q = math.pi / 4.0
        box = (-q, -q, q, q)
        inside = _box_predicate(box)
        area = (2.0 * q) ** 2
        return BenchmarkCase(6, FLUID_BOX, box, "left", identity_map(),
                             "jump_nonmatching", inside, area,
                             _make_exact(inside, area, True))
    if ident == 7:
        return BenchmarkCase(7, FLUID_BOX, unit_box, "left", disk_map(),
                             "smooth", _disk_predicate, math.pi,
                             _make_exact(None, math.pi, False))
    return BenchmarkCase(8, FLUID_BOX, (0.0, 0.0, 1.0, 1.0), "left",
                         affine_map(2.0 * np.eye(2), np.array([-0.62, -0.62])),
                         "smooth", _box_predicate(off_box), 4.0,
                         _make_exact(None, 4.0, False))


# ----------------------------------------------------------------------
# Per-level discretization and assembly.

@dataclass
class LevelDiscretization:
    case: BenchmarkCase
    fluid_n: int
    solid_n: int
    element: str
    pair: MacroMeshPair
    velocity: FESpace
    pressure: FESpace
    solid_mesh: TriMesh
    mapped_verts: np.ndarray
    mapped_coords: np.ndarray
    amap: np.ndarray
    adet: np.ndarray
    index: BoxIndex
    overlay: Overlay
    h_fluid: float
    h_solid: float


@dataclass
class SharedBlocks:
    """Method-independent matrices and data vectors of one level."""

    af: object
    b: object
    a_s: object
    cs: object
    f: np.ndarray
    g: np.ndarray
    d: np.ndarray


def build_level(case: BenchmarkCase, fluid_n: int, solid_n: int, element: str = "bp") -> LevelDiscretization:
    if element not in ELEMENTS:
        raise ValueError(f"unknown element {element!r}; use one of {ELEMENTS}")
    coarse = build_uniform(fluid_n, case.fluid_box, orientation="right")
    if element == "bp_p0":
        coarse = corner_swap(coarse)
    pair = refine_red(coarse)
    velocity = FESpace.p1_iso_p2_vector(pair)
    pressure = (FESpace.p1_plus_p0_scalar(pair) if element == "bp_p0"
                else FESpace.p1_scalar(pair.coarse, pair))
    solid_mesh = case.build_solid_mesh(solid_n)
    mapped_verts = case.deformation.value(solid_mesh.vertices)
    mapped_coords = mapped_verts[solid_mesh.triangles]
    amap, adet = element_affine_maps(solid_mesh.triangle_coords(), mapped_coords)
    index = BoxIndex(pair.fine.triangle_coords())
    overlay = build_overlay(mapped_coords, None, index=index)
    xmin, _, xmax, _ = case.fluid_box
    return LevelDiscretization(
        case=case, fluid_n=fluid_n, solid_n=solid_n, element=element,
        pair=pair, velocity=velocity, pressure=pressure, solid_mesh=solid_mesh,
        mapped_verts=mapped_verts, mapped_coords=mapped_coords,
        amap=amap, adet=adet, index=index, overlay=overlay,
        h_fluid=(xmax - xmin) / fluid_n,
        h_solid=case.solid_mesh_size(solid_mesh, solid_n),
    )


def assemble_shared(disc: LevelDiscretization, coupling: str = "h1",
                    data: str = "interpolant") -> SharedBlocks:
    ex = disc.case.exact
    momentum_field = lambda pts: ex.velocity_neg_lap(pts) + ex.pressure_grad_smooth(pts)
    if data == "interpolant":
        f = assemble_interpolant_volume_rhs(disc.pair.fine, momentum_field)
    elif data == "quadrature":
        f = assemble_volume_rhs(disc.pair.fine, momentum_field)
    else:
        raise ValueError(f"unknown data path {data!r}")
    f += assemble_fluid_coupling_rhs(
        disc.overlay, disc.solid_mesh, disc.pair.fine, disc.mapped_coords,
        disc.amap, disc.adet, ex.multiplier, ex.multiplier_grad, coupling,
    )
    if disc.case.has_jump:
        edges_phys = disc.mapped_verts[disc.solid_mesh.boundary_edges]
        f += assemble_pressure_jump_rhs(edges_phys, disc.pair.fine, disc.index,
                                        ex.pressure_jump)
    g = assemble_solid_rhs(disc.solid_mesh, ex.solid_neg_lap, ex.solid_grad,
                           ex.multiplier, ex.multiplier_grad, coupling,
                           data=data)
    d = assemble_constraint_rhs(disc.solid_mesh, disc.mapped_coords, disc.amap,
                                ex.velocity, ex.velocity_grad,
                                ex.solid, ex.solid_grad, coupling)
    return SharedBlocks(
        af=assemble_Af(disc.pair),
        b=assemble_B(disc.pressure),
        a_s=assemble_As(disc.solid_mesh),
        cs=assemble_Cs(disc.solid_mesh, coupling),
        f=f, g=g, d=d,
    )


def interface_matrix(disc: LevelDiscretization, method: str, coupling: str = "h1"):
    if method == "intersect":
        return assemble_Cf_intersection(
            disc.overlay, disc.solid_mesh, disc.pair.fine, disc.mapped_coords,
            disc.amap, disc.adet, coupling, order=2,
        )
    if method in ("noint_q2", "noint_q3"):
        order = 2 if method.endswith("2") else 3
        return assemble_Cf_nointersection(
            disc.solid_mesh, disc.pair.fine, disc.mapped_coords, disc.amap,
            disc.index, coupling, order=order,
        )
    raise ValueError(f"unknown method {method!r}; use one of {METHODS}")


def coupled_system(disc: LevelDiscretization, shared: SharedBlocks, method: str,
                   coupling: str = "h1") -> CoupledSystem:
    cf = interface_matrix(disc, method, coupling)
    return build_system(shared.af, shared.b, shared.a_s, shared.cs, cf,
                        shared.f, shared.g, shared.d, disc.velocity, disc.pressure)


# ----------------------------------------------------------------------
# Error norms (relative, full H1) via the degree-6 rule per element.

def _chunks(n: int, size: int = _CHUNK):
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def field_errors(mesh: TriMesh, coeffs: np.ndarray, exact_val: Callable,
                 exact_grad: Callable, rule: QuadratureRule = _ERROR_RULE):
    """Relative L2 and full-H1 errors of an interleaved vector P1 field."""
    nodal = np.asarray(coeffs, dtype=float).reshape(-1, 2)
    grads = p1_gradients(mesh)
    acc = np.zeros(4)  # err_l2, err_semi, norm_l2, norm_semi (all squared)
    for sl in _chunks(mesh.num_triangles):
        tris = mesh.triangles[sl]
        pts = rule.physical_points(mesh.vertices[tris])
        vals_h = np.einsum("qa,tac->tqc", rule.points, nodal[tris])
        grad_h = np.einsum("tac,taj->tcj", nodal[tris], grads[sl])
        ev = np.asarray(exact_val(pts), dtype=float)
        eg = np.asarray(exact_grad(pts), dtype=float)
        w, areas = rule.weights, mesh.areas[sl]
        acc[0] += np.einsum("q,tq,t->", w, ((vals_h - ev) ** 2).sum(-1), areas)
        acc[1] += np.einsum(
            "q,tq,t->", w, ((grad_h[:, None] - eg) ** 2).sum((-1, -2)), areas
        )
        acc[2] += np.einsum("q,tq,t->", w, (ev ** 2).sum(-1), areas)
        acc[3] += np.einsum("q,tq,t->", w, (eg ** 2).sum((-1, -2)), areas)
    l2 = math.sqrt(acc[0] / acc[2])
    h1 = math.sqrt((acc[0] + acc[1]) / (acc[2] + acc[3]))
    return l2, h1


def _pressure_error(disc: LevelDiscretization, pvec: np.ndarray,
                    rule: QuadratureRule = _ERROR_RULE) -> float:
    mesh = disc.pressure.mesh
    nv = mesh.num_vertices
    p1 = pvec[:nv]
    p0 = pvec[nv:] if disc.pressure.enriched else None
    exact = disc.case.exact.pressure
    err = norm = 0.0
    for sl in _chunks(mesh.num_triangles):
        tris = mesh.triangles[sl]
        pts = rule.physical_points(mesh.vertices[tris])
        vals_h = np.einsum("qa,ta->tq", rule.points, p1[tris])
        if p0 is not None:
            vals_h = vals_h + p0[sl, None]
        ev = np.asarray(exact(pts), dtype=float)
        w, areas = rule.weights, mesh.areas[sl]
        err += np.einsum("q,tq,t->", w, (vals_h - ev) ** 2, areas)
        norm += np.einsum("q,tq,t->", w, ev ** 2, areas)
    return math.sqrt(err / norm)


def compute_errors(disc: LevelDiscretization, solution: np.ndarray,
                   rule: QuadratureRule = _ERROR_RULE) -> dict:
    """The seven relative error norms of one solved level."""
    ex = disc.case.exact
    nu = disc.velocity.dof_count
    npr = disc.pressure.dof_count
    nx = 2 * disc.solid_mesh.num_vertices
    u = solution[:nu]
    p = solution[nu:nu + npr]
    xs = solution[nu + npr:nu + npr + nx]
    lam = solution[nu + npr + nx:]
    u_l2, u_h1 = field_errors(disc.pair.fine, u, ex.velocity, ex.velocity_grad, rule)
    x_l2, x_h1 = field_errors(disc.solid_mesh, xs, ex.solid, ex.solid_grad, rule)
    l_l2, l_h1 = field_errors(disc.solid_mesh, lam, ex.multiplier,
                              ex.multiplier_grad, rule)
    return {
        "p_L2": _pressure_error(disc, p, rule),
        "u_L2": u_l2,
        "u_H1": u_h1,
        "X_L2": x_l2,
        "X_H1": x_h1,
        "lam_L2": l_l2,
        "lam_H1": l_h1,
    }


def convergence_rates(errors) -> np.ndarray:
    """Observed orders for a sequence of errors on meshes halving in size.

    rates[0] is NaN (no coarser level); a non-positive or non-finite error
    at either level also yields NaN.
    """
    errors = np.asarray(errors, dtype=float)
    rates = np.full(errors.shape, np.nan)
    for i in range(1, len(errors)):
        if errors[i - 1] > 0 and errors[i] > 0 and np.isfinite(errors[i - 1 : i + 1]).all():
            rates[i] = math.log2(errors[i - 1] / errors[i])
    return rates


# ----------------------------------------------------------------------
# Study driver.

@dataclass
class LevelResult:
    fluid_n: int
    solid_n: int
    h_fluid: float
    h_solid: float
    errors: dict
    dofs: dict
    report: SolveReport


@dataclass
class StudyResult:
    ident: int
    method: str
    element: str
    coupling: str
    levels: list = field(default_factory=list)
    rates: dict = field(default_factory=dict)

    def finalize(self):
        ns = [lv.fluid_n for lv in self.levels]
        doubling = all(b == 2 * a for a, b in zip(ns, ns[1:]))
        for col in ERROR_COLUMNS:
            seq = [lv.errors[col] for lv in self.levels]
            self.rates[col] = (convergence_rates(seq) if doubling
                               else np.full(len(seq), np.nan))

    def rows(self) -> list:
        out = []
        for i, lv in enumerate(self.levels):
            row = {"level": lv.fluid_n, "h_fluid": lv.h_fluid, "h_solid": lv.h_solid}
            for col in ERROR_COLUMNS:
                row[f"err_{col}"] = lv.errors[col]
            for col in ERROR_COLUMNS:
                row[f"rate_{col}"] = float(self.rates[col][i]) if self.rates else np.nan
            out.append(row)
        return out


def doubling_levels(first: int, last: int) -> list:
    """Coarse fluid subdivisions first, 2*first, ..., last (inclusive)."""
    if first < 1 or last < first:
        raise ValueError("levels must satisfy 1 <= first <= last")
    out = []
    n = first
    while n <= last:
        out.append((n, n))
        n *= 2
    if out[-1][0] != last:
        raise ValueError(f"last level {last} is not first*2^k for first {first}")
    return out


def _normalize_levels(levels) -> list:
    pairs = []
    for entry in levels:
        if np.isscalar(entry):
            pairs.append((int(entry), int(entry)))
        else:
            fn, sn = entry
            pairs.append((int(fn), int(sn)))
    if not pairs:
        raise ValueError("at least one level is required")
    return pairs


def run_many(ident: int, methods, element: str = "bp", levels=((16, 16),),
             coupling: str = "h1") -> dict:
    """Run several interface-assembly methods over shared discretizations.

    The overlay, the method-independent matrix blocks and the data vectors
    are assembled once per level and reused for every method, so comparing
    methods only re-does the interface matrix and the solve.
    """
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; use one of {METHODS}")
    case = make_test(ident)
    pairs = _normalize_levels(levels)
    studies = {m: StudyResult(ident, m, element, coupling) for m in methods}
    for fluid_n, solid_n in pairs:
        disc = build_level(case, fluid_n, solid_n, element)
        shared = assemble_shared(disc, coupling)
        for m in methods:
            system = coupled_system(disc, shared, m, coupling)
            x, report = solve(system)
            errors = compute_errors(disc, x)
            dofs = {
                "u": disc.velocity.dof_count,
                "p": disc.pressure.dof_count,
                "X": 2 * disc.solid_mesh.num_vertices,
                "lam": 2 * disc.solid_mesh.num_vertices,
            }
            studies[m].levels.append(LevelResult(
                fluid_n, solid_n, disc.h_fluid, disc.h_solid, errors, dofs, report
            ))
    for s in studies.values():
        s.finalize()
    return studies


def run_test(ident: int, method: str, element: str = "bp", levels=((16, 16),),
             coupling: str = "h1") -> StudyResult:
    """Convergence study for one test, one method; see run_many."""
    return run_many(ident, [method], element, levels, coupling)[method]


# ----------------------------------------------------------------------
# Degrees-of-freedom bookkeeping.

def dof_summary(fluid_n: int) -> dict:
    """DOF counts of all spaces at one level, built from real meshes.

    Keys: u (velocity), p (plain pressure), p_enriched, X_uniform (vector
    field on the uniform [-1,1]^2 solid at half the fluid subdivision),
    X_unstructured (on the bundled fixture of matching nominal size).
    """
    pair = refine_red(build_uniform(fluid_n, FLUID_BOX))
    solid = build_uniform(fluid_n // 2, (-1.0, -1.0, 1.0, 1.0))
    h = 2.0 / fluid_n
    name = f"unit_square_unstructured_h{h:g}.msh"
    fixture = import_msh(fixture_directory() / name)
    return {
        "u": FESpace.p1_iso_p2_vector(pair).dof_count,
        "p": FESpace.p1_scalar(pair.coarse, pair).dof_count,
        "p_enriched": FESpace.p1_plus_p0_scalar(pair).dof_count,
        "X_uniform": FESpace.p1_vector(solid).dof_count,
        "X_unstructured": FESpace.p1_vector(fixture).dof_count,
    }
