"""Generate the unstructured unit-square meshes shipped with the package.

Each mesh has boundary nodes spaced exactly h along all four sides and a
fixed total vertex count, reached by accepting low-discrepancy interior
candidates under a minimum-separation rule and stopping at the target.
The point set is triangulated with Delaunay and written as ASCII .msh.

The produced files are committed; rerunning this script must reproduce
them byte for byte.
"""

import sys
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay
from scipy.stats import qmc

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from artifact.mesh import TriMesh, write_msh

# target total vertex count per nominal spacing
TARGETS = {
    0.125: 116,
    0.0625: 371,
    0.03125: 1394,
    0.015625: 5509,
    0.0078125: 21867,
    0.00390625: 87158,
}

CLEARANCE = 0.55  # interior points keep this times h away from the boundary


def boundary_points(n: int) -> np.ndarray:
    t = np.arange(n) / n
    side = np.stack([t, np.zeros(n)], axis=1)
    bottom = side
    right = np.stack([np.ones(n), t], axis=1)
    top = np.stack([1.0 - t, np.ones(n)], axis=1)
    left = np.stack([np.zeros(n), 1.0 - t], axis=1)
    return np.concatenate([bottom, right, top, left], axis=0)


def fill_interior(h: float, count: int, min_sep: float) -> np.ndarray:
    """Greedy acceptance of Halton points with pairwise separation min_sep.

    Returns exactly `count` points, or fewer if the sequence saturates.
    """
    lo, hi = CLEARANCE * h, 1.0 - CLEARANCE * h
    cell = min_sep
    grid = {}
    accepted = []
    sampler = qmc.Halton(d=2, scramble=False)
    sampler.fast_forward(1)  # index 0 is the origin corner
    block = max(4 * count, 4096)
    sep2 = min_sep * min_sep
    for _ in range(64):
        cand = lo + (hi - lo) * sampler.random(block)
        for x, y in cand:
            ci, cj = int(x / cell), int(y / cell)
            ok = True
            for ii in range(ci - 1, ci + 2):
                for jj in range(cj - 1, cj + 2):
                    for k in grid.get((ii, jj), ()):
                        dx = x - accepted[k][0]
                        dy = y - accepted[k][1]
                        if dx * dx + dy * dy < sep2:
                            ok = False
                            break
                    if not ok:
                        break
                if not ok:
                    break
            if ok:
                grid.setdefault((ci, cj), []).append(len(accepted))
                accepted.append((x, y))
                if len(accepted) == count:
                    return np.asarray(accepted)
    return np.asarray(accepted)


def build_fixture(h: float, total: int) -> TriMesh:
    n = round(1.0 / h)
    bnd = boundary_points(n)
    interior_target = total - len(bnd)
    if interior_target <= 0:
        raise ValueError(f"target {total} below boundary count {len(bnd)}")

    alpha = 0.70
    interior = fill_interior(h, interior_target, alpha * h)
    while len(interior) < interior_target:
        alpha -= 0.03
        if alpha < 0.30:
            raise RuntimeError(f"cannot place {interior_target} points for h={h}")
        interior = fill_interior(h, interior_target, alpha * h)

    points = np.concatenate([bnd, interior], axis=0)
    tri = Delaunay(points)
    if len(tri.coplanar):
        raise RuntimeError(f"Delaunay dropped {len(tri.coplanar)} points for h={h}")
    cells = tri.simplices.copy()
    p = points[cells]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    flip = det < 0
    cells[flip] = cells[flip][:, [0, 2, 1]]
    mesh = TriMesh(points, cells)
    if mesh.num_vertices != total:
        raise RuntimeError(f"got {mesh.num_vertices} vertices, wanted {total}")
    if mesh.areas.min() < 1e-10 * h * h:
        raise RuntimeError(f"degenerate triangle in fixture h={h}")
    print(f"h={h:<11g} vertices={mesh.num_vertices:<6d} "
          f"triangles={mesh.num_triangles:<7d} alpha={alpha:.2f} "
          f"min_area/h^2={mesh.areas.min() / h**2:.3f}")
    return mesh


def main() -> None:
    out_dir = Path(__file__).resolve().parents[1] / "src" / "artifact" / "fixtures" / "meshes"
    out_dir.mkdir(parents=True, exist_ok=True)
    for h, total in TARGETS.items():
        mesh = build_fixture(h, total)
        path = out_dir / f"unit_square_unstructured_h{h:g}.msh"
        write_msh(mesh, path)
        print(f"  wrote {path}")


if __name__ == "__main__":
    main()
