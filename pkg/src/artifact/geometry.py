"""Planar geometry kernel: triangle clipping, mesh overlays, point location.

The overlay of a mapped solid triangulation against a background fluid mesh
is the core geometric object here: every solid triangle is decomposed into
the pieces it shares with individual fluid triangles, so that integrals of
products of functions living on the two meshes can be evaluated exactly on
regions where both are polynomial.

Clipping is Sutherland-Hodgman against convex clip triangles, written out by
hand so the degenerate cases (shared edges, vertex contact, slivers) follow
one documented tolerance policy instead of whatever a black-box library does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoxIndex",
    "Overlay",
    "CoverageError",
    "PointLocationError",
    "polygon_area",
    "clip_triangle_triangle",
    "fan_triangulate",
    "build_overlay",
    "barycentric_coords",
    "coverage_defect",
    "locate_points",
    "split_segment_by_mesh",
]

# Relative tolerances, scaled by local triangle size where they are applied.
EPS_CLIP = 1e-12     # half-plane membership in clipping and classification
EPS_BARY = 1e-12     # barycentric slack in point location
SLIVER_REL = 1e-14   # overlay pieces below this fraction of the domain scale are dropped
COVERAGE_RTOL = 1e-10


class CoverageError(RuntimeError):
    """The overlay pieces of a solid triangle do not add up to its area."""


class PointLocationError(RuntimeError):
    """A query point could not be assigned to any mesh triangle."""


def polygon_area(points: np.ndarray) -> float:
    """Signed shoelace area of a polygon given as (k, 2) vertices."""
    p = np.asarray(points, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_triangle_triangle(subject, clipper, eps: float = EPS_CLIP):
    """Intersection polygon of two counter-clockwise triangles.

    Returns an (k, 2) array with k >= 3, or None when the intersection has
    (numerically) empty interior. eps is relative to the clipper size.
    """
    subject = np.asarray(subject, dtype=float)
    clipper = np.asarray(clipper, dtype=float)
    diam = max(np.ptp(clipper[:, 0]), np.ptp(clipper[:, 1]),
               np.ptp(subject[:, 0]), np.ptp(subject[:, 1]))
    tol = eps * diam * diam
    poly = [tuple(p) for p in subject]
    for k in range(3):
        if len(poly) < 3:
            return None
        ax, ay = clipper[k]
        bx, by = clipper[(k + 1) % 3]
        ex, ey = bx - ax, by - ay
        dist = [ex * (py - ay) - ey * (px - ax) for px, py in poly]
        out = []
        m = len(poly)
        for i in range(m):
            j = (i + 1) % m
            di, dj = dist[i], dist[j]
            if di >= -tol:
                out.append(poly[i])
            if (di > tol and dj < -tol) or (di < -tol and dj > tol):
                t = di / (di - dj)
                out.append((poly[i][0] + t * (poly[j][0] - poly[i][0]),
                            poly[i][1] + t * (poly[j][1] - poly[i][1])))
        poly = out
    if len(poly) < 3:
        return None
    # Merge consecutive near-duplicate vertices.
    keep = []
    dtol = eps * diam
    for p in poly:
        if not keep or abs(p[0] - keep[-1][0]) + abs(p[1] - keep[-1][1]) > dtol:
            keep.append(p)
    if len(keep) >= 2 and abs(keep[0][0] - keep[-1][0]) + abs(keep[0][1] - keep[-1][1]) <= dtol:
        keep.pop()
    if len(keep) < 3:
        return None
    return np.asarray(keep)


def fan_triangulate(points: np.ndarray) -> np.ndarray:
    """Triangulate a convex polygon, (k, 2) -> (m, 3, 2).

    A triangle passes through unchanged. Larger polygons are fanned around
    their vertex centroid, giving k sub-triangles; using an interior apex
    keeps the pieces well-shaped even for nearly-degenerate polygons.
    """
    points = np.asarray(points, dtype=float)
    k = len(points)
    if k == 3:
        return points[None, :, :]
    apex = points.mean(axis=0)
    tris = np.empty((k, 3, 2))
    tris[:, 0] = apex
    tris[:, 1] = points
    tris[:, 2] = np.roll(points, -1, axis=0)
    return tris


class BoxIndex:
    """Uniform-bin spatial index over triangle bounding boxes."""

    def __init__(self, coords: np.ndarray, nbins: int | None = None):
        """coords: triangle vertex coordinates, (T, 3, 2)."""
        coords = np.asarray(coords, dtype=float)
        self.coords = coords
        ntri = len(coords)
        lo = coords.reshape(-1, 2).min(axis=0)
        hi = coords.reshape(-1, 2).max(axis=0)
        span = np.maximum(hi - lo, 1e-300)
        if nbins is None:
            nbins = max(1, int(np.sqrt(max(ntri, 1) / 2.0)))
        self.nx = self.ny = int(np.clip(nbins, 1, 2048))
        self.lo = lo
        self.inv_dx = self.nx / span[0]
        self.inv_dy = self.ny / span[1]

        tlo = coords.min(axis=1)
        thi = coords.max(axis=1)
        i0, j0 = self._bin_of(tlo)
        i1, j1 = self._bin_of(thi)
        # Scatter each triangle into every bin its bbox overlaps.
        owners, bins = [], []
        wx = i1 - i0 + 1
        wy = j1 - j0 + 1
        for di in range(int(wx.max(initial=1))):
            for dj in range(int(wy.max(initial=1))):
                sel = np.flatnonzero((di < wx) & (dj < wy))
                owners.append(sel)
                bins.append((i0[sel] + di) + self.nx * (j0[sel] + dj))
        owners = np.concatenate(owners) if owners else np.empty(0, dtype=np.int64)
        bins = np.concatenate(bins) if bins else np.empty(0, dtype=np.int64)
        order = np.lexsort((owners, bins))
        self._tris = owners[order]
        self._starts = np.zeros(self.nx * self.ny + 1, dtype=np.int64)
        np.add.at(self._starts, bins + 1, 1)
        np.cumsum(self._starts, out=self._starts)

    def _bin_of(self, pts):
        i = np.clip((pts[..., 0] - self.lo[0]) * self.inv_dx, 0, self.nx - 1).astype(np.int64)
        j = np.clip((pts[..., 1] - self.lo[1]) * self.inv_dy, 0, self.ny - 1).astype(np.int64)
        return i, j

    def point_candidates(self, points: np.ndarray):
        """CSR candidate lists for query points: (data, offsets).

        Candidates of point k are data[offsets[k]:offsets[k+1]], ascending.
        """
        points = np.asarray(points, dtype=float)
        i, j = self._bin_of(points)
        b = i + self.nx * j
        counts = self._starts[b + 1] - self._starts[b]
        offsets = np.zeros(len(points) + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        total = int(offsets[-1])
        idx = np.repeat(self._starts[b], counts) + (
            np.arange(total, dtype=np.int64) - np.repeat(offsets[:-1], counts)
        )
        return self._tris[idx], offsets

    def box_candidates(self, lo: np.ndarray, hi: np.ndarray):
        """Unique (owner, triangle) pairs for a batch of query boxes.

        lo, hi: (N, 2). A pair (k, t) means triangle t's bin range overlaps
        box k. Pairs come out sorted by owner then triangle.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        i0, j0 = self._bin_of(lo)
        i1, j1 = self._bin_of(hi)
        wx = i1 - i0 + 1
        wy = j1 - j0 + 1
        nbins = wx * wy
        owner_b = np.repeat(np.arange(len(lo), dtype=np.int64), nbins)
        local = np.arange(int(nbins.sum()), dtype=np.int64) - np.repeat(
            np.concatenate([[0], np.cumsum(nbins)[:-1]]), nbins
        )
        bi = i0[owner_b] + local % wx[owner_b]
        bj = j0[owner_b] + local // wx[owner_b]
        b = bi + self.nx * bj
        counts = self._starts[b + 1] - self._starts[b]
        total = int(counts.sum())
        offsets = np.concatenate([[0], np.cumsum(counts)])
        idx = np.repeat(self._starts[b], counts) + (
            np.arange(total, dtype=np.int64) - np.repeat(offsets[:-1], counts)
        )
        owner = np.repeat(owner_b, counts)
        tri = self._tris[idx]
        pairs = np.unique(np.stack([owner, tri], axis=1), axis=0)
        return pairs[:, 0], pairs[:, 1]


def _edge_dists(tris: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Signed edge-line distances d[p, edge, vert], positive inside CCW tris.

    tris: (P, 3, 2), pts: (P, K, 2). Values are unnormalised cross products,
    scaling like (edge length) x (distance).
    """
    a = tris
    e = tris[:, [1, 2, 0], :] - a
    rel = pts[:, None, :, :] - a[:, :, None, :]
    return e[:, :, None, 0] * rel[..., 1] - e[:, :, None, 1] * rel[..., 0]


@dataclass
class Overlay:
    """Decomposition of mapped solid triangles into per-fluid-triangle pieces.

    Piece m is the triangle sub_coords[m] (physical plane), lying inside
    solid triangle solid_tri[m] and fluid triangle fluid_tri[m]. Pieces of
    one solid triangle tile it up to COVERAGE_RTOL.
    """

    sub_coords: np.ndarray  # (M, 3, 2)
    solid_tri: np.ndarray   # (M,)
    fluid_tri: np.ndarray   # (M,)
    areas: np.ndarray       # (M,) positive

    @property
    def num_pieces(self) -> int:
        return len(self.solid_tri)


def build_overlay(solid_coords: np.ndarray, fluid_coords: np.ndarray,
                  index: BoxIndex | None = None, eps: float = EPS_CLIP) -> Overlay:
    """Overlay mapped solid triangles onto a fluid triangulation.

    solid_coords: (Ts, 3, 2) mapped solid triangle vertices (CCW).
    fluid_coords: (Tf, 3, 2) fluid triangle vertices (CCW), or a BoxIndex
    over them via the index argument.

    Raises CoverageError if some solid triangle is not fully tiled, which
    happens when it sticks out of the fluid mesh.
    """
    solid_coords = np.asarray(solid_coords, dtype=float)
    if index is None:
        index = BoxIndex(fluid_coords)
    fluid_coords = index.coords

    s_own, f_cand = index.box_candidates(solid_coords.min(axis=1), solid_coords.max(axis=1))
    S = solid_coords[s_own]
    F = fluid_coords[f_cand]
    area_f2 = np.abs(
        (F[:, 1, 0] - F[:, 0, 0]) * (F[:, 2, 1] - F[:, 0, 1])
        - (F[:, 2, 0] - F[:, 0, 0]) * (F[:, 1, 1] - F[:, 0, 1])
    )
    area_s2 = np.abs(
        (S[:, 1, 0] - S[:, 0, 0]) * (S[:, 2, 1] - S[:, 0, 1])
        - (S[:, 2, 0] - S[:, 0, 0]) * (S[:, 1, 1] - S[:, 0, 1])
    )
    d_sf = _edge_dists(F, S)  # fluid edges vs solid vertices
    d_fs = _edge_dists(S, F)  # solid edges vs fluid vertices
    tol_f = (eps * area_f2)[:, None, None]
    tol_s = (eps * area_s2)[:, None, None]

    # If every vertex of one triangle sits on or outside some edge line of
    # the other, the intersection is confined to a sliver along that line;
    # such pairs contribute no area and are dropped outright. This also
    # covers fully separated pairs.
    droppable = (d_sf <= tol_f).all(axis=2).any(axis=1) | (d_fs <= tol_s).all(axis=2).any(axis=1)
    s_in_f = (d_sf >= -tol_f).all(axis=(1, 2)) & ~droppable
    f_in_s = (d_fs >= -tol_s).all(axis=(1, 2)) & ~droppable & ~s_in_f
    crossing = ~droppable & ~s_in_f & ~f_in_s

    pieces = []
    owners = []
    fluids = []
    if s_in_f.any():
        pieces.append(S[s_in_f])
        owners.append(s_own[s_in_f])
        fluids.append(f_cand[s_in_f])
    if f_in_s.any():
        pieces.append(F[f_in_s])
        owners.append(s_own[f_in_s])
        fluids.append(f_cand[f_in_s])
    for k in np.flatnonzero(crossing):
        poly = clip_triangle_triangle(S[k], F[k], eps)
        if poly is None:
            continue
        sub = fan_triangulate(poly)
        pieces.append(sub)
        owners.append(np.full(len(sub), s_own[k], dtype=np.int64))
        fluids.append(np.full(len(sub), f_cand[k], dtype=np.int64))

    if pieces:
        sub_coords = np.concatenate(pieces)
        solid_tri = np.concatenate(owners)
        fluid_tri = np.concatenate(fluids)
    else:
        sub_coords = np.empty((0, 3, 2))
        solid_tri = np.empty(0, dtype=np.int64)
        fluid_tri = np.empty(0, dtype=np.int64)

    areas = 0.5 * np.abs(
        (sub_coords[:, 1, 0] - sub_coords[:, 0, 0]) * (sub_coords[:, 2, 1] - sub_coords[:, 0, 1])
        - (sub_coords[:, 2, 0] - sub_coords[:, 0, 0]) * (sub_coords[:, 1, 1] - sub_coords[:, 0, 1])
    )
    scale = float(np.prod(index.coords.reshape(-1, 2).max(axis=0)
                          - index.coords.reshape(-1, 2).min(axis=0)))
    keep = areas > SLIVER_REL * max(scale, 1e-300)
    sub_coords, solid_tri, fluid_tri, areas = (
        sub_coords[keep], solid_tri[keep], fluid_tri[keep], areas[keep]
    )
    order = np.lexsort((fluid_tri, solid_tri))
    overlay = Overlay(sub_coords[order], solid_tri[order], fluid_tri[order], areas[order])

    covered = np.zeros(len(solid_coords))
    np.add.at(covered, overlay.solid_tri, overlay.areas)
    target = 0.5 * np.abs(
        (solid_coords[:, 1, 0] - solid_coords[:, 0, 0]) * (solid_coords[:, 2, 1] - solid_coords[:, 0, 1])
        - (solid_coords[:, 2, 0] - solid_coords[:, 0, 0]) * (solid_coords[:, 1, 1] - solid_coords[:, 0, 1])
    )
    defect = np.abs(covered - target)
    bad = defect > COVERAGE_RTOL * target
    if bad.any():
        worst = int(np.argmax(defect / target))
        raise CoverageError(
            f"{int(bad.sum())} solid triangle(s) not tiled by the fluid mesh; "
            f"worst is triangle {worst}: covered {covered[worst]:.16g} of "
            f"area {target[worst]:.16g}"
        )
    return overlay


def coverage_defect(overlay: Overlay, solid_coords: np.ndarray) -> np.ndarray:
    """Per solid triangle: |sum of piece areas - triangle area|, absolute."""
    solid_coords = np.asarray(solid_coords, dtype=float)
    covered = np.zeros(len(solid_coords))
    np.add.at(covered, overlay.solid_tri, overlay.areas)
    target = 0.5 * np.abs(
        (solid_coords[:, 1, 0] - solid_coords[:, 0, 0]) * (solid_coords[:, 2, 1] - solid_coords[:, 0, 1])
        - (solid_coords[:, 2, 0] - solid_coords[:, 0, 0]) * (solid_coords[:, 1, 1] - solid_coords[:, 0, 1])
    )
    return np.abs(covered - target)


def barycentric_coords(tri_coords: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of points w.r.t. triangles, broadcasting.

    tri_coords: (..., 3, 2), points: (..., 2) -> (..., 3).
    """
    tri_coords = np.asarray(tri_coords, dtype=float)
    points = np.asarray(points, dtype=float)
    v0 = tri_coords[..., 1, :] - tri_coords[..., 0, :]
    v1 = tri_coords[..., 2, :] - tri_coords[..., 0, :]
    r = points - tri_coords[..., 0, :]
    det = v0[..., 0] * v1[..., 1] - v0[..., 1] * v1[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        l1 = (r[..., 0] * v1[..., 1] - r[..., 1] * v1[..., 0]) / det
        l2 = (v0[..., 0] * r[..., 1] - v0[..., 1] * r[..., 0]) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)


def locate_points(points: np.ndarray, index: BoxIndex, eps: float = EPS_BARY):
    """Assign each point to a containing triangle of the indexed mesh.

    Returns (tri (N,), bary (N, 3)). Points on shared edges or vertices go
    to the containing triangle with the lowest index; barycentric output is
    clamped to [0, 1] and renormalised so downstream interpolation never
    extrapolates. Raises PointLocationError when a point is outside.
    """
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    data, offsets = index.point_candidates(points)
    counts = np.diff(offsets)
    if len(points) and counts.max(initial=0) == 0:
        raise PointLocationError("no candidate triangles for any query point")
    kmax = int(counts.max(initial=1))
    n = len(points)
    cand = np.full((n, kmax), -1, dtype=np.int64)
    colmask = np.arange(kmax)[None, :] < counts[:, None]
    cand[colmask] = data
    tri_xy = index.coords[np.maximum(cand, 0)]          # (N, K, 3, 2)
    bary = barycentric_coords(tri_xy, points[:, None, :])  # (N, K, 3)
    valid = colmask & (bary >= -eps).all(axis=2)
    found = valid.any(axis=1)
    if not found.all():
        missing = np.flatnonzero(~found)
        p = points[missing[0]]
        raise PointLocationError(
            f"{len(missing)} point(s) outside the mesh; first is ({p[0]:.16g}, {p[1]:.16g})"
        )
    pick = valid.argmax(axis=1)
    rows = np.arange(n)
    tri = cand[rows, pick]
    lam = np.clip(bary[rows, pick], 0.0, 1.0)
    lam /= lam.sum(axis=1, keepdims=True)
    if single:
        return int(tri[0]), lam[0]
    return tri, lam


def split_segment_by_mesh(p0, p1, index: BoxIndex, eps: float = EPS_CLIP):
    """Partition segment p0-p1 into pieces lying in single mesh triangles.

    Returns (tris (m,), breaks (m+1,)): parameter interval
    [breaks[k], breaks[k+1]] of the segment lies inside triangle tris[k].
    Ties at edges go to the lowest triangle index. Raises PointLocationError
    if part of the segment is outside the mesh.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    lo = np.minimum(p0, p1)[None, :]
    hi = np.maximum(p0, p1)[None, :]
    _, cand = index.box_candidates(lo, hi)
    cand = np.sort(np.unique(cand))
    if len(cand) == 0:
        raise PointLocationError("segment lies outside the mesh")
    tris = index.coords[cand]  # (K, 3, 2)
    a = tris
    e = tris[:, [1, 2, 0], :] - a
    # Signed distances of the two endpoints to each edge line.
    d0 = e[..., 0] * (p0[1] - a[..., 1]) - e[..., 1] * (p0[0] - a[..., 0])  # (K, 3)
    d1 = e[..., 0] * (p1[1] - a[..., 1]) - e[..., 1] * (p1[0] - a[..., 0])
    area2 = np.abs(e[:, 0, 0] * (-e[:, 2, 1]) - e[:, 0, 1] * (-e[:, 2, 0]))
    tol = eps * area2

    t0 = np.zeros(len(cand))
    t1 = np.ones(len(cand))
    for k in range(3):
        a0, a1 = d0[:, k], d1[:, k]
        denom = a0 - a1
        with np.errstate(divide="ignore", invalid="ignore"):
            tc = np.where(np.abs(denom) > 0, a0 / np.where(denom == 0, 1.0, denom), 0.0)
        ok0 = a0 >= -tol
        ok1 = a1 >= -tol
        t0 = np.where(ok0, t0, np.maximum(t0, tc))
        t1 = np.where(ok1, t1, np.minimum(t1, tc))
        both_out = ~ok0 & ~ok1
        t0 = np.where(both_out, 1.0, t0)
        t1 = np.where(both_out, 0.0, t1)
    live = t0 < t1 - 1e-14
    cand, t0, t1 = cand[live], t0[live], t1[live]
    if len(cand) == 0:
        raise PointLocationError("segment lies outside the mesh")

    breaks = np.unique(np.concatenate([[0.0, 1.0], t0, t1]))
    breaks = breaks[(breaks > -1e-14) & (breaks < 1.0 + 1e-14)]
    breaks[0], breaks[-1] = 0.0, 1.0
    # Collapse near-duplicate breakpoints.
    keep = np.concatenate([[True], np.diff(breaks) > 1e-13])
    breaks = breaks[keep]
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    # Assign each elementary interval to the lowest-index covering triangle.
    inside = (mids[None, :] >= t0[:, None] - 1e-13) & (mids[None, :] <= t1[:, None] + 1e-13)
    has = inside.any(axis=0)
    if not has.all():
        s = mids[np.flatnonzero(~has)[0]]
        raise PointLocationError(f"segment parameter {s:.6g} not covered by mesh")
    owner = cand[inside.argmax(axis=0)]
    # Merge consecutive intervals owned by the same triangle.
    change = np.concatenate([[True], owner[1:] != owner[:-1]])
    tris_out = owner[change]
    starts = breaks[:-1][change]
    breaks_out = np.concatenate([starts, [1.0]])
    return tris_out, breaks_out
