"""Axis-aligned BVH over triangles with numba ray-cast kernels.

The tree is built once in numpy (median split on the longest centroid axis)
and stored as flat arrays so the traversal kernels can be called from other
compiled kernels without boxing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

_LEAF_SIZE = 4
_STACK_SIZE = 128


@dataclass(frozen=True)
class Bvh:
    """Flat BVH arrays. Leaves have count > 0 and index into prim_order."""

    bounds_min: np.ndarray  # (M, 3) f8
    bounds_max: np.ndarray  # (M, 3) f8
    left: np.ndarray        # (M,) i4, -1 on leaves
    right: np.ndarray       # (M,) i4, -1 on leaves
    start: np.ndarray       # (M,) i4
    count: np.ndarray       # (M,) i4
    prim_order: np.ndarray  # (T,) i4
    tri_v0: np.ndarray      # (T, 3) f8, first vertex per triangle
    tri_e1: np.ndarray      # (T, 3) f8, v1 - v0
    tri_e2: np.ndarray      # (T, 3) f8, v2 - v0

    def arrays(self):
        """Positional tuple for passing into the numba kernels."""
        return (self.bounds_min, self.bounds_max, self.left, self.right,
                self.start, self.count, self.prim_order,
                self.tri_v0, self.tri_e1, self.tri_e2)


def build_bvh(positions: np.ndarray, triangles: np.ndarray) -> Bvh:
    positions = np.asarray(positions, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    ntri = len(triangles)
    if ntri == 0:
        raise ValueError("cannot build a BVH over zero triangles")
    tri_pts = positions[triangles]               # (T, 3, 3)
    tri_min = tri_pts.min(axis=1)
    tri_max = tri_pts.max(axis=1)
    centroids = tri_pts.mean(axis=1)

    order = np.arange(ntri, dtype=np.int64)
    bounds_min, bounds_max = [], []
    left, right, start, count = [], [], [], []

    def new_node():
        bounds_min.append(None)
        bounds_max.append(None)
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        return len(left) - 1

    # (node_index, lo, hi) ranges into `order`
    root = new_node()
    stack = [(root, 0, ntri)]
    while stack:
        node, lo, hi = stack.pop()
        idx = order[lo:hi]
        bounds_min[node] = tri_min[idx].min(axis=0)
        bounds_max[node] = tri_max[idx].max(axis=0)
        if hi - lo <= _LEAF_SIZE:
            start[node] = lo
            count[node] = hi - lo
            continue
        extent = centroids[idx].max(axis=0) - centroids[idx].min(axis=0)
        axis = int(np.argmax(extent))
        if extent[axis] <= 0.0:
            start[node] = lo
            count[node] = hi - lo
            continue
        local = np.argsort(centroids[idx, axis], kind="stable")
        order[lo:hi] = idx[local]
        mid = lo + (hi - lo) // 2
        lchild, rchild = new_node(), new_node()
        left[node], right[node] = lchild, rchild
        stack.append((lchild, lo, mid))
        stack.append((rchild, mid, hi))

    v0 = tri_pts[:, 0, :].copy()
    return Bvh(
        bounds_min=np.asarray(bounds_min, dtype=np.float64),
        bounds_max=np.asarray(bounds_max, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        start=np.asarray(start, dtype=np.int32),
        count=np.asarray(count, dtype=np.int32),
        prim_order=order.astype(np.int32),
        tri_v0=v0,
        tri_e1=tri_pts[:, 1, :] - v0,
        tri_e2=tri_pts[:, 2, :] - v0,
    )


@njit(cache=True, inline="always")
def _intersect_triangle(v0, e1, e2, ox, oy, oz, dx, dy, dz, t_min, t_max):
    """Moller-Trumbore; returns (t, u, v) with t = inf on miss."""
    px = dy * e2[2] - dz * e2[1]
    py = dz * e2[0] - dx * e2[2]
    pz = dx * e2[1] - dy * e2[0]
    det = e1[0] * px + e1[1] * py + e1[2] * pz
    if abs(det) < 1e-14:
        return np.inf, 0.0, 0.0
    inv = 1.0 / det
    tx = ox - v0[0]
    ty = oy - v0[1]
    tz = oz - v0[2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -1e-9 or u > 1.0 + 1e-9:
        return np.inf, 0.0, 0.0
    qx = ty * e1[2] - tz * e1[1]
    qy = tz * e1[0] - tx * e1[2]
    qz = tx * e1[1] - ty * e1[0]
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -1e-9 or u + v > 1.0 + 1e-9:
        return np.inf, 0.0, 0.0
    t = (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv
    if t <= t_min or t >= t_max:
        return np.inf, 0.0, 0.0
    return t, u, v


@njit(cache=True, inline="always")
def _slab_enter(bmin, bmax, ox, oy, oz, ix, iy, iz, t_max):
    """Entry parameter of a ray against an AABB, or inf when disjoint."""
    t0 = (bmin[0] - ox) * ix
    t1 = (bmax[0] - ox) * ix
    tn = min(t0, t1)
    tf = max(t0, t1)
    t0 = (bmin[1] - oy) * iy
    t1 = (bmax[1] - oy) * iy
    tn = max(tn, min(t0, t1))
    tf = min(tf, max(t0, t1))
    t0 = (bmin[2] - oz) * iz
    t1 = (bmax[2] - oz) * iz
    tn = max(tn, min(t0, t1))
    tf = min(tf, max(t0, t1))
    if tf < max(tn, 0.0) or tn > t_max:
        return np.inf
    return tn


@njit(cache=True)
def bvh_ray_cast(bmin, bmax, left, right, start, count, order, v0, e1, e2,
                 ox, oy, oz, dx, dy, dz, t_min, t_max):
    """Nearest-hit query. Returns (tri_index, t, u, v); tri_index -1 on miss."""
    ix = 1.0 / dx if dx != 0.0 else np.inf
    iy = 1.0 / dy if dy != 0.0 else np.inf
    iz = 1.0 / dz if dz != 0.0 else np.inf
    best_t = t_max
    best_tri = -1
    best_u = 0.0
    best_v = 0.0
    stack = np.empty(_STACK_SIZE, dtype=np.int32)
    top = 0
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if _slab_enter(bmin[node], bmax[node], ox, oy, oz, ix, iy, iz, best_t) == np.inf:
            continue
        if count[node] > 0:
            s = start[node]
            for k in range(count[node]):
                tri = order[s + k]
                t, u, v = _intersect_triangle(v0[tri], e1[tri], e2[tri],
                                              ox, oy, oz, dx, dy, dz, t_min, best_t)
                if t < best_t:
                    best_t = t
                    best_tri = tri
                    best_u = u
                    best_v = v
        else:
            l = left[node]
            r = right[node]
            tl = _slab_enter(bmin[l], bmax[l], ox, oy, oz, ix, iy, iz, best_t)
            tr = _slab_enter(bmin[r], bmax[r], ox, oy, oz, ix, iy, iz, best_t)
            # push the farther child first so the nearer is popped first
            if tl <= tr:
                if tr != np.inf:
                    stack[top] = r
                    top += 1
                if tl != np.inf:
                    stack[top] = l
                    top += 1
            else:
                if tl != np.inf:
                    stack[top] = l
                    top += 1
                if tr != np.inf:
                    stack[top] = r
                    top += 1
    if best_tri < 0:
        return -1, np.inf, 0.0, 0.0
    return best_tri, best_t, best_u, best_v


@njit(cache=True)
def bvh_any_hit(bmin, bmax, left, right, start, count, order, v0, e1, e2,
                ox, oy, oz, dx, dy, dz, t_min, t_max):
    """True if any intersection exists with t in (t_min, t_max)."""
    ix = 1.0 / dx if dx != 0.0 else np.inf
    iy = 1.0 / dy if dy != 0.0 else np.inf
    iz = 1.0 / dz if dz != 0.0 else np.inf
    stack = np.empty(_STACK_SIZE, dtype=np.int32)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if _slab_enter(bmin[node], bmax[node], ox, oy, oz, ix, iy, iz, t_max) == np.inf:
            continue
        if count[node] > 0:
            s = start[node]
            for k in range(count[node]):
                tri = order[s + k]
                t, _, _ = _intersect_triangle(v0[tri], e1[tri], e2[tri],
                                              ox, oy, oz, dx, dy, dz, t_min, t_max)
                if t != np.inf:
                    return True
        else:
            stack[top] = left[node]
            top += 1
            stack[top] = right[node]
            top += 1
    return False


@njit(cache=True, parallel=True)
def bvh_ray_cast_batch(bmin, bmax, left, right, start, count, order, v0, e1, e2,
                       origins, dirs, t_min):
    n = origins.shape[0]
    tri_out = np.empty(n, dtype=np.int64)
    t_out = np.empty(n, dtype=np.float64)
    u_out = np.empty(n, dtype=np.float64)
    v_out = np.empty(n, dtype=np.float64)
    for i in prange(n):
        tri, t, u, v = bvh_ray_cast(bmin, bmax, left, right, start, count, order,
                                    v0, e1, e2,
                                    origins[i, 0], origins[i, 1], origins[i, 2],
                                    dirs[i, 0], dirs[i, 1], dirs[i, 2],
                                    t_min, np.inf)
        tri_out[i] = tri
        t_out[i] = t
        u_out[i] = u
        v_out[i] = v
    return tri_out, t_out, u_out, v_out
