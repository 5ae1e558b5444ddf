"""Finite-element toolkit for a velocity-coupled fluid/solid saddle-point
problem on unfitted meshes.

The fluid lives on a fixed background triangulation, the solid on its own
reference triangulation mapped into the fluid domain. The velocity constraint
is enforced weakly through a Lagrange multiplier, and the interface matrix
tying the two meshes together can be assembled either with composite
quadrature on the mesh intersection or directly on the solid elements.
"""

from .mesh import TriMesh, MacroMeshPair, MeshError, build_uniform, refine_red
from .mesh import corner_swap, import_msh, write_msh, affine_map_mesh
from .geometry import (
    BoxIndex,
    Overlay,
    CoverageError,
    PointLocationError,
    clip_triangle_triangle,
    fan_triangulate,
    polygon_area,
    build_overlay,
    coverage_defect,
    barycentric_coords,
    locate_points,
    split_segment_by_mesh,
)
from .quadrature import QuadratureRule, gauss_rule, high_order_rule, edge_rule
from .quadrature import integrate_on_triangle, triangle_monomial_integral
from .spaces import FESpace, DeformationMap, identity_map, affine_map, disk_map
from .assembly import CoupledSystem, build_system, element_affine_maps
from .solver import SolveReport, SolverError, solve
from .verification import BenchmarkCase, ExactSolution, make_test
from .verification import build_level, run_test, run_many, dof_summary
from .verification import compute_errors, convergence_rates

__all__ = [
    "TriMesh", "MacroMeshPair", "MeshError", "build_uniform", "refine_red",
    "corner_swap", "import_msh", "write_msh", "affine_map_mesh",
    "BoxIndex", "Overlay", "CoverageError", "PointLocationError",
    "clip_triangle_triangle", "fan_triangulate", "polygon_area",
    "build_overlay", "coverage_defect", "barycentric_coords",
    "locate_points", "split_segment_by_mesh",
    "QuadratureRule", "gauss_rule", "high_order_rule", "edge_rule",
    "integrate_on_triangle", "triangle_monomial_integral",
    "FESpace", "DeformationMap", "identity_map", "affine_map", "disk_map",
    "CoupledSystem", "build_system", "element_affine_maps",
    "SolveReport", "SolverError", "solve",
    "BenchmarkCase", "ExactSolution", "make_test",
    "build_level", "run_test", "run_many", "dof_summary",
    "compute_errors", "convergence_rates",
]

__version__ = "0.1.0"
