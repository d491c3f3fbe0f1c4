"""Edge-aware smoothing in bilateral space: splat the problem onto a sparse
5D grid built from the guide image (x, y, luma, chroma), solve a quadratic
with preconditioned conjugate gradient, and slice back to pixels.

The quadratic couples a per-vertex data term (splatted confidences and
targets) with a graph Laplacian over axis neighbors in grid space, which is
the [1, 2, 1] blur stencil of the bilateral grid minus its self weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .materials import MIN_ROUGHNESS, MaterialMaps

# classic analog YUV weights; any fixed luma/chroma split works here
_YUV = np.array([
    [0.299, 0.587, 0.114],
    [-0.147, -0.289, 0.436],
    [0.615, -0.515, -0.100],
])


@dataclass(frozen=True)
class SolverParams:
    sigma_xy: float = 8.0
    sigma_l: float = 0.1
    sigma_c: float = 0.1
    lambda_smooth: float = 4.0
    cg_tolerance: float = 1e-5
    cg_max_iter: int = 200

    def __post_init__(self):
        if min(self.sigma_xy, self.sigma_l, self.sigma_c) <= 0:
            raise ValueError("all sigmas must be positive")
        if self.lambda_smooth < 0:
            raise ValueError("lambda_smooth must be >= 0")
        if self.cg_tolerance <= 0:
            raise ValueError("cg_tolerance must be positive")

    @classmethod
    def from_dict(cls, cfg: dict) -> "SolverParams":
        return cls(
            sigma_xy=float(cfg.get("sigma_xy", 8.0)),
            sigma_l=float(cfg.get("sigma_l", 0.1)),
            sigma_c=float(cfg.get("sigma_c", 0.1)),
            lambda_smooth=float(cfg.get("lambda_smooth", 4.0)),
            cg_tolerance=float(cfg.get("cg_tolerance", 1e-5)),
            cg_max_iter=int(cfg.get("cg_max_iter", 200)),
        )


@dataclass(frozen=True)
class BilateralGrid:
    """Hard pixel-to-vertex assignment plus the grid-space Laplacian."""

    shape: tuple[int, int]        # (H, W)
    pixel_vertex: np.ndarray      # (H*W,) int64
    coords: np.ndarray            # (V, 5) int64 quantized vertex coordinates
    laplacian: sp.csr_matrix      # (V, V)

    @property
    def num_vertices(self) -> int:
        return len(self.coords)


def build_grid(guide: np.ndarray, params: SolverParams) -> BilateralGrid:
    """Quantize guide pixels into bilateral-space vertices.

    guide: (H, W, 3) RGB (the predicted diffuse albedo).
    """
    guide = np.asarray(guide, dtype=np.float64)
    h, w = guide.shape[:2]
    yuv = guide @ _YUV.T
    ys, xs = np.mgrid[0:h, 0:w]
    feats = np.stack([
        xs.ravel() / params.sigma_xy,
        ys.ravel() / params.sigma_xy,
        yuv[:, :, 0].ravel() / params.sigma_l,
        yuv[:, :, 1].ravel() / params.sigma_c,
        yuv[:, :, 2].ravel() / params.sigma_c,
    ], axis=1)
    coords = np.floor(feats).astype(np.int64)
    verts, pixel_vertex = np.unique(coords, axis=0, return_inverse=True)
    pixel_vertex = pixel_vertex.ravel()

    index = {tuple(c): i for i, c in enumerate(verts)}
    rows, cols = [], []
    for dim in range(5):
        shifted = verts.copy()
        shifted[:, dim] += 1
        for i, key in enumerate(map(tuple, shifted)):
            j = index.get(key)
            if j is not None:
                rows.extend((i, j))
                cols.extend((j, i))
    nv = len(verts)
    data = np.ones(len(rows), dtype=np.float64)
    adj = sp.csr_matrix((data, (rows, cols)), shape=(nv, nv))
    lap = sp.diags(np.asarray(adj.sum(axis=1)).ravel()) - adj
    return BilateralGrid(shape=(h, w), pixel_vertex=pixel_vertex,
                         coords=verts, laplacian=lap.tocsr())


def cg_solve(a: sp.csr_matrix, b: np.ndarray, tol: float, max_iter: int,
             x0: np.ndarray | None = None):
    """Jacobi-preconditioned conjugate gradient.

    Stops when |r| < tol * |b|. Returns (x, residual_norms) where the
    residual norms are in the preconditioned metric sqrt(r^T M^-1 r).
    """
    diag = a.diagonal()
    if np.any(diag <= 0):
        raise ValueError("system diagonal must be positive")
    inv_diag = 1.0 / diag
    x = np.zeros_like(b) if x0 is None else x0.astype(np.float64).copy()
    r = b - a @ x
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b), [0.0]
    history = [float(np.sqrt(max(rz, 0.0)))]
    for _ in range(max_iter):
        if float(np.linalg.norm(r)) < tol * b_norm:
            break
        ap = a @ p
        alpha = rz / float(p @ ap)
        x = x + alpha * p
        r = r - alpha * ap
        z = inv_diag * r
        rz_new = float(r @ z)
        history.append(float(np.sqrt(max(rz_new, 0.0))))
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, history


def solve(target: np.ndarray, confidence: np.ndarray, grid: BilateralGrid,
          params: SolverParams) -> np.ndarray:
    """Minimize lambda * z^T L z + sum_p conf_p ((S^T z)_p - t_p)^2 in grid
    space and slice the solution back to pixels."""
    target = np.asarray(target, dtype=np.float64)
    confidence = np.asarray(confidence, dtype=np.float64)
    if target.shape != grid.shape or confidence.shape != grid.shape:
        raise ValueError("target/confidence resolution does not match the grid")
    if confidence.min() < 0:
        raise ValueError("confidence must be non-negative")
    if not np.any(confidence > 0):
        raise ValueError("all-zero confidence leaves the system underdetermined")
    nv = grid.num_vertices
    pv = grid.pixel_vertex
    w_v = np.bincount(pv, weights=confidence.ravel(), minlength=nv)
    b_v = np.bincount(pv, weights=(confidence * target).ravel(), minlength=nv)
    # vertices whose pixels all have zero confidence get a weak anchor to
    # their own mean target, keeping the system nonsingular without moving
    # anchored vertices
    n_v = np.bincount(pv, minlength=nv).astype(np.float64)
    mean_t = np.bincount(pv, weights=target.ravel(), minlength=nv) / np.maximum(n_v, 1.0)
    eps = 1e-8 * max(float(w_v.max()), 1.0)
    a = (params.lambda_smooth * grid.laplacian
         + sp.diags(w_v + eps)).tocsr()
    rhs = b_v + eps * mean_t
    z, _ = cg_solve(a, rhs, params.cg_tolerance, params.cg_max_iter)
    return z[pv].reshape(grid.shape)


def smooth_specular_roughness(maps: MaterialMaps, params: SolverParams,
                              confidence: np.ndarray | None = None) -> MaterialMaps:
    """Solve roughness and each specular channel on the grid built from the
    predicted diffuse albedo; the diffuse map passes through untouched."""
    if confidence is None:
        confidence = np.ones(maps.roughness.shape, dtype=np.float64)
    confidence = np.where(maps.mask, confidence, 0.0)
    grid = build_grid(maps.diffuse, params)
    roughness = solve(maps.roughness.astype(np.float64), confidence, grid, params)
    specular = np.empty_like(maps.specular, dtype=np.float64)
    for c in range(3):
        specular[:, :, c] = solve(maps.specular[:, :, c].astype(np.float64),
                                  confidence, grid, params)
    return MaterialMaps(
        diffuse=maps.diffuse,
        specular=np.clip(specular, 0.0, 1.0).astype(np.float32),
        roughness=np.clip(roughness, MIN_ROUGHNESS, 1.0).astype(np.float32),
        mask=maps.mask,
    )
