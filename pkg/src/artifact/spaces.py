"""Finite element spaces and the solid deformation map.

All fields are piecewise linear: scalar or 2-vector P1 on a triangulation,
the velocity variant living on the refined half of a MacroMeshPair, and the
enriched pressure adding one constant per macro triangle. Vector DOFs are
interleaved per vertex, (x of vertex 0, y of vertex 0, x of vertex 1, ...),
which fixes a reproducible global ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import MacroMeshPair, TriMesh

__all__ = [
    "FESpace",
    "DeformationMap",
    "p1_gradients",
    "identity_map",
    "affine_map",
    "disk_map",
]


def p1_gradients(mesh: TriMesh) -> np.ndarray:
    """Constant gradients of the three hat functions per triangle, (T, 3, 2)."""
    p = mesh.triangle_coords()
    out = np.empty((mesh.num_triangles, 3, 2))
    inv2a = 1.0 / (2.0 * mesh.areas)
    for a in range(3):
        b, c = p[:, (a + 1) % 3], p[:, (a + 2) % 3]
        out[:, a, 0] = (b[:, 1] - c[:, 1]) * inv2a
        out[:, a, 1] = (c[:, 0] - b[:, 0]) * inv2a
    return out


@dataclass
class FESpace:
    """A nodal space over a mesh; see module docstring for DOF layout.

    kind is one of P1_scalar, P1_vector, P1isoP2_vector, P1plusP0_scalar.
    The mesh attribute is the one basis functions live on (the fine mesh for
    P1isoP2, the coarse one for the enriched pressure).
    """

    kind: str
    mesh: TriMesh
    pair: MacroMeshPair | None = None
    _grads: np.ndarray = field(init=False, repr=False, default=None)

    @classmethod
    def p1_scalar(cls, mesh: TriMesh, pair: MacroMeshPair | None = None) -> "FESpace":
        return cls("P1_scalar", mesh, pair)

    @classmethod
    def p1_vector(cls, mesh: TriMesh) -> "FESpace":
        return cls("P1_vector", mesh)

    @classmethod
    def p1_iso_p2_vector(cls, pair: MacroMeshPair) -> "FESpace":
        return cls("P1isoP2_vector", pair.fine, pair)

    @classmethod
    def p1_plus_p0_scalar(cls, pair: MacroMeshPair) -> "FESpace":
        return cls("P1plusP0_scalar", pair.coarse, pair)

    @property
    def vector(self) -> bool:
        return self.kind in ("P1_vector", "P1isoP2_vector")

    @property
    def enriched(self) -> bool:
        return self.kind == "P1plusP0_scalar"

    @property
    def dof_count(self) -> int:
        v = self.mesh.num_vertices
        if self.vector:
            return 2 * v
        if self.enriched:
            return v + self.mesh.num_triangles
        return v

    @property
    def num_p1_dofs(self) -> int:
        """Size of the vertex-nodal part (before any P0 tail)."""
        return 2 * self.mesh.num_vertices if self.vector else self.mesh.num_vertices

    def gradients(self) -> np.ndarray:
        if self._grads is None:
            self._grads = p1_gradients(self.mesh)
        return self._grads

    def eval_basis(self, tri: int, bary) -> tuple[np.ndarray, np.ndarray]:
        """Scalar local basis at a barycentric point of one triangle.

        Returns (values, gradients): the P1 hat values are the barycentric
        coordinates themselves; the enriched space appends the macro
        indicator (value 1, zero gradient). Vector kinds use the same scalar
        data for both components.
        """
        if not 0 <= tri < self.mesh.num_triangles:
            raise IndexError(f"triangle {tri} out of range")
        vals = np.asarray(bary, dtype=float)
        grads = self.gradients()[tri]
        if self.enriched:
            vals = np.concatenate([vals, [1.0]])
            grads = np.vstack([grads, [0.0, 0.0]])
        return vals, grads

    def interpolate(self, f: Callable) -> np.ndarray:
        """Nodal interpolation. f maps (N, 2) points to (N,) or (N, 2) values.

        P0 coefficients of the enriched space are set to zero: a smooth field
        is fully represented by its vertex values.
        """
        vals = np.asarray(f(self.mesh.vertices), dtype=float)
        if self.vector:
            if vals.shape != (self.mesh.num_vertices, 2):
                raise ValueError("vector space needs (V, 2) nodal values")
            return vals.reshape(-1)
        if vals.shape != (self.mesh.num_vertices,):
            raise ValueError("scalar space needs (V,) nodal values")
        if self.enriched:
            return np.concatenate([vals, np.zeros(self.mesh.num_triangles)])
        return vals

    def dirichlet_dofs(self) -> np.ndarray:
        """Both components of every boundary vertex (vector spaces only)."""
        if not self.vector:
            raise ValueError("Dirichlet DOFs are defined for velocity-type spaces")
        bv = self.mesh.boundary_vertices
        return np.sort(np.concatenate([2 * bv, 2 * bv + 1]))


@dataclass(frozen=True)
class DeformationMap:
    """Map from the solid reference domain into the fluid domain.

    value maps (..., 2) reference points to (..., 2) physical points;
    jacobian returns the analytic gradient, (..., 2, 2) with [i, j] = dX_i/ds_j.
    The analytic jacobian is only for interpolating exact fields; assembly
    uses the constant per-element jacobian of the straight-edge vertex map.
    """

    kind: str
    value: Callable
    jacobian: Callable


def identity_map() -> DeformationMap:
    def val(s):
        return np.asarray(s, dtype=float)

    def jac(s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(np.eye(2), s.shape[:-1] + (2, 2)).copy()

    return DeformationMap("identity", val, jac)


def affine_map(a, b) -> DeformationMap:
    a = np.asarray(a, dtype=float).reshape(2, 2)
    b = np.asarray(b, dtype=float).reshape(2)

    def val(s):
        return np.asarray(s, dtype=float) @ a.T + b

    def jac(s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(a, s.shape[:-1] + (2, 2)).copy()

    return DeformationMap("affine", val, jac)


def disk_map() -> DeformationMap:
    """Square-to-disk map (x sqrt(1 - y^2/2), y sqrt(1 - x^2/2)) on [-1,1]^2."""

    def val(s):
        s = np.asarray(s, dtype=float)
        x, y = s[..., 0], s[..., 1]
        return np.stack([x * np.sqrt(1.0 - 0.5 * y * y),
                         y * np.sqrt(1.0 - 0.5 * x * x)], axis=-1)

    def jac(s):
        s = np.asarray(s, dtype=float)
        x, y = s[..., 0], s[..., 1]
        rx = np.sqrt(1.0 - 0.5 * x * x)
        ry = np.sqrt(1.0 - 0.5 * y * y)
        out = np.empty(s.shape[:-1] + (2, 2))
        out[..., 0, 0] = ry
        out[..., 0, 1] = -0.5 * x * y / ry
        out[..., 1, 0] = -0.5 * x * y / rx
        out[..., 1, 1] = rx
        return out

    return DeformationMap("disk", val, jac)
