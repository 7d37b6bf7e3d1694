"""Rectified pin-hole stereo model: disparity, depth, 3D points and the
closed-form link between surface normals and local affine parameters.

Coordinate conventions used throughout the package:

* image: u = column (right-positive), v = row (down-positive), origin at
  the top-left pixel center;
* camera: x right, y down, z forward (left camera at the origin, right
  camera at (baseline, 0, 0));
* disparity: d = u_left - u_right = fx * baseline / z, stored non-negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarField


@dataclass(frozen=True)
class StereoRig:
    """Rectified camera pair: shared pin-hole intrinsics plus baseline."""

    fx: float
    fy: float
    u0: float
    v0: float
    baseline: float

    def __post_init__(self):
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise ValueError("focal lengths must be positive")
        if not self.baseline > 0.0:
            raise ValueError("baseline must be positive")


def disparity_to_depth(d, rig: StereoRig):
    """z = fx * b / d.  Non-positive or non-finite disparities map to NaN."""
    d = np.asarray(d, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = rig.fx * rig.baseline / d
    z = np.where(np.isfinite(d) & (d > 0.0), z, np.nan)
    return z[()]


def depth_to_disparity(z, rig: StereoRig):
    """Exact algebraic inverse of :func:`disparity_to_depth`."""
    z = np.asarray(z, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = rig.fx * rig.baseline / z
    d = np.where(np.isfinite(z) & (z > 0.0), d, np.nan)
    return d[()]


def triangulate(u, v, d, rig: StereoRig):
    """Back-project left-image pixel (u, v) with disparity d to (x, y, z)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    z = disparity_to_depth(d, rig)
    x = (u - rig.u0) * z / rig.fx
    y = (v - rig.v0) * z / rig.fy
    return x[()], y[()], z[()]


def project_left(x, y, z, rig: StereoRig):
    u = rig.fx * np.asarray(x, dtype=np.float64) / z + rig.u0
    v = rig.fy * np.asarray(y, dtype=np.float64) / z + rig.v0
    return u[()], np.asarray(v)[()]


def project_right(x, y, z, rig: StereoRig):
    u = rig.fx * (np.asarray(x, dtype=np.float64) - rig.baseline) / z + rig.u0
    v = rig.fy * np.asarray(y, dtype=np.float64) / z + rig.v0
    return u[()], np.asarray(v)[()]


def pixel_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """(U, V) coordinate grids for an image of the given size."""
    v, u = np.mgrid[0:height, 0:width]
    return u.astype(np.float64), v.astype(np.float64)


def triangulate_grid(disparity: ScalarField, rig: StereoRig) -> np.ndarray:
    """(H, W, 3) camera-space points; NaN rows at invalid pixels."""
    u, v = pixel_grid(disparity.height, disparity.width)
    x, y, z = triangulate(u, v, disparity.values, rig)
    return np.stack([x, y, z], axis=-1)


def orient_toward_camera(n, x):
    """Flip normals so they face the camera: n . X <= 0.

    ``n . X == 0`` is returned unchanged; zero vectors map to NaN.
    """
    n = np.asarray(n, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    dot = np.sum(n * x, axis=-1, keepdims=True)
    out = np.where(dot > 0.0, -n, n)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    out = np.where(norm > 0.0, out, np.nan)
    return out[()]


def affine_from_normal(n, x, rig: StereoRig, tol: float = 1e-12):
    """Affine parameters (a1, a2) of the left-to-right patch map for a
    surface with normal n observed at camera-space point X.

    a1 = n . (X - (b,0,0)) / (n . X)
    a2 = -b * fx * n_y / (fy * (n . X))

    Planes through the projection-center direction (|n . X| ~ 0) are
    degenerate and map to NaN.  Scale-invariant in n.
    """
    n = np.asarray(n, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    denom = np.sum(n * x, axis=-1)
    scale = np.linalg.norm(n, axis=-1) * np.linalg.norm(x, axis=-1)
    bad = ~np.isfinite(denom) | (np.abs(denom) <= tol * scale)
    with np.errstate(divide="ignore", invalid="ignore"):
        a1 = (denom - rig.baseline * n[..., 0]) / denom
        a2 = -rig.baseline * rig.fx * n[..., 1] / (rig.fy * denom)
    a1 = np.where(bad, np.nan, a1)
    a2 = np.where(bad, np.nan, a2)
    return a1[()], a2[()]


def normal_from_affine(a1, a2, x, rig: StereoRig):
    """Unit, camera-facing surface normal from patch-map parameters.

    The normal is the cross product of a1*v1 - v2 and a2*v3 - v4 with
    v1 = X, v2 = X - (b, 0, 0), v3 = fy*X, v4 = (0, -b*fx, 0), which
    expands (up to scale) to

        ( (a1-1)*fx*z,  a2*fy*z,  -(a1-1)*fx*x - a2*fy*y - b*fx ).

    Degenerate parameter pairs (zero cross product) map to NaN.
    """
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    px, py, pz = x[..., 0], x[..., 1], x[..., 2]
    g = a1 - 1.0
    nx = g * rig.fx * pz
    ny = a2 * rig.fy * pz
    nz = -g * rig.fx * px - a2 * rig.fy * py - rig.baseline * rig.fx
    raw = np.stack(np.broadcast_arrays(nx, ny, nz), axis=-1)
    norm = np.linalg.norm(raw, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = raw / norm
    unit = np.where(norm > 0.0, unit, np.nan)
    return orient_toward_camera(unit, x)


def affine_gradient_to_model(a1, a2):
    """Convert disparity-gradient parameters to patch-map parameters.

    The least-squares estimators solve the local linear model of the
    stored (left-referenced, non-negative) disparity field, yielding
    a1 - 1 = dd/du and a2 = dd/dv.  The patch map consumed by
    :func:`normal_from_affine` describes right-image offsets
    u_right = u_left - d, i.e. the same fit with the disparity sign
    flipped; the conversion negates (a1 - 1, a2).
    """
    return 2.0 - np.asarray(a1, dtype=np.float64), -np.asarray(a2, dtype=np.float64)


def depth_field(disparity: ScalarField, rig: StereoRig) -> ScalarField:
    """Per-pixel depth; pixels with non-positive disparity become invalid."""
    z = disparity_to_depth(disparity.values, rig)
    return ScalarField(z, disparity.mask & np.isfinite(z))


def normals_from_gradient_affine(a1, a2, disparity, du, dv, rig: StereoRig,
                                 out: np.ndarray) -> np.ndarray:
    """Fused fast path: gradient-form (a1, a2) plus disparity to normals.

    Equivalent to affine_gradient_to_model -> triangulate ->
    normal_from_affine, written as few full-frame passes as possible
    since this tail dominates the per-frame cost.  Two identities make
    that safe: x = du * b / d needs no depth intermediate, and the raw
    cross-product direction always satisfies n . X = -b * fx * z < 0, so
    the camera-facing flip can never trigger for a valid pixel.

    ``du``/``dv`` are the (u - u0), (v - v0) grids; ``out`` is the
    (..., 3) destination.  Returns the per-pixel finite mask; ``out``
    rows outside it are NaN.
    """
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)
    d = np.asarray(disparity, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(d > 0.0, rig.baseline / d, np.nan)
        g = 1.0 - a1                      # model-convention a1 - 1
        nx = g * w
        nx *= rig.fx * rig.fx
        ny = a2 * w
        ny *= -rig.fx * rig.fy            # model-convention a2 = -a2
        nz = a2 * dv
        nz -= g * du
        nz *= w
        nz -= rig.baseline
        nz *= rig.fx
        norm = np.sqrt(nx * nx + ny * ny + nz * nz)
        np.divide(nx, norm, out=nx)
        np.divide(ny, norm, out=ny)
        np.divide(nz, norm, out=nz)
    out[..., 0] = nx
    out[..., 1] = ny
    out[..., 2] = nz
    ok = np.isfinite(nx)
    ok &= np.isfinite(ny)
    ok &= np.isfinite(nz)
    out[~ok] = np.nan
    return ok
