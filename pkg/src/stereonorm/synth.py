"""Raycast scene generation: ground-truth depth, disparity and normals.

Scenes are lists of analytic primitives (spheres, axis-aligned boxes,
planes) in left-camera coordinates.  Each pixel casts a ray through its
center; the nearest positive-depth hit provides the exact depth, the
analytic surface normal (camera-facing) and the disparity fx*b/z.
Rays that miss every primitive are masked out.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import NormalField, ScalarField
from .geometry import StereoRig, orient_toward_camera, pixel_grid

_EPS_T = 1e-9


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        if not self.radius > 0.0:
            raise ValueError("sphere radius must be positive")


@dataclass(frozen=True)
class Box:
    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=np.float64).reshape(3)
        hi = np.asarray(self.max_corner, dtype=np.float64).reshape(3)
        if not np.all(lo < hi):
            raise ValueError("box min corner must be strictly below max corner")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)


@dataclass(frozen=True)
class Plane:
    """Points P with normal . P == offset (offset != 0 keeps it off the camera)."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        nrm = np.linalg.norm(n)
        if nrm == 0.0:
            raise ValueError("plane normal must be nonzero")
        object.__setattr__(self, "normal", n / nrm)


@dataclass
class SceneSpec:
    rig: StereoRig
    width: int
    height: int
    primitives: list = field(default_factory=list)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("scene resolution must be positive")


@dataclass
class GroundTruth:
    depth: ScalarField
    disparity: ScalarField
    normals: NormalField

    @property
    def mask(self) -> np.ndarray:
        return self.depth.mask


def _ray_dirs(rig: StereoRig, height: int, width: int):
    u, v = pixel_grid(height, width)
    return (u - rig.u0) / rig.fx, (v - rig.v0) / rig.fy


def _hit_sphere(sph: Sphere, dx, dy):
    cx, cy, cz = sph.center
    a = dx * dx + dy * dy + 1.0
    b = -2.0 * (dx * cx + dy * cy + cz)
    c = cx * cx + cy * cy + cz * cz - sph.radius ** 2
    disc = b * b - 4.0 * a * c
    root = np.sqrt(np.maximum(disc, 0.0))
    t1 = (-b - root) / (2.0 * a)
    t2 = (-b + root) / (2.0 * a)
    t = np.where(t1 > _EPS_T, t1, t2)
    t = np.where((disc >= 0.0) & (t > _EPS_T), t, np.inf)
    px, py, pz = dx * t, dy * t, t
    n = np.stack([(px - cx), (py - cy), (pz - cz)], axis=-1) / sph.radius
    return t, n


def _hit_box(box: Box, dx, dy):
    t_enter = np.full(dx.shape, -np.inf)
    t_exit = np.full(dx.shape, np.inf)
    axis = np.zeros(dx.shape, dtype=np.int8)
    dirs = (dx, dy, np.ones_like(dx))
    for k in range(3):
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = box.min_corner[k] / dirs[k]
            t2 = box.max_corner[k] / dirs[k]
        lo = np.fmin(t1, t2)
        hi = np.fmax(t1, t2)
        # rays parallel to the slab miss unless the origin lies inside it
        inside = (box.min_corner[k] <= 0.0) & (0.0 <= box.max_corner[k])
        parallel = dirs[k] == 0.0
        lo = np.where(parallel, np.where(inside, -np.inf, np.inf), lo)
        hi = np.where(parallel, np.where(inside, np.inf, -np.inf), hi)
        take = lo > t_enter
        axis = np.where(take, np.int8(k), axis)
        t_enter = np.maximum(t_enter, lo)
        t_exit = np.minimum(t_exit, hi)
    hit = (t_exit >= t_enter) & (t_enter > _EPS_T)
    t = np.where(hit, t_enter, np.inf)
    d_axis = np.choose(axis, dirs)
    n = np.zeros(dx.shape + (3,))
    sign = -np.sign(d_axis)
    for k in range(3):
        n[..., k] = np.where(axis == k, sign, 0.0)
    return t, n


def _hit_plane(pl: Plane, dx, dy):
    nd = pl.normal[0] * dx + pl.normal[1] * dy + pl.normal[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = pl.offset / nd
    t = np.where(np.isfinite(t) & (t > _EPS_T), t, np.inf)
    n = np.broadcast_to(pl.normal, dx.shape + (3,))
    return t, n


_HITTERS = {Sphere: _hit_sphere, Box: _hit_box, Plane: _hit_plane}


def raycast(scene: SceneSpec) -> GroundTruth:
    """Render the scene: nearest positive-depth hit per pixel.

    Since ray directions are normalized to unit z, the ray parameter of a
    hit equals its camera depth.  An empty scene yields fully masked
    fields.
    """
    h, w = scene.height, scene.width
    dx, dy = _ray_dirs(scene.rig, h, w)
    best_t = np.full((h, w), np.inf)
    best_n = np.full((h, w, 3), np.nan)
    for prim in scene.primitives:
        t, n = _HITTERS[type(prim)](prim, dx, dy)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_n = np.where(closer[..., None], n, best_n)
    mask = np.isfinite(best_t)
    depth = np.where(mask, best_t, np.nan)
    pts = np.stack([dx * depth, dy * depth, depth], axis=-1)
    normals = orient_toward_camera(best_n, pts)
    disparity = scene.rig.fx * scene.rig.baseline / depth
    return GroundTruth(depth=ScalarField(depth, mask),
                       disparity=ScalarField(disparity, mask),
                       normals=NormalField(np.where(mask[..., None], normals, np.nan), mask))


def make_plane_scene(normal, offset: float, rig: StereoRig,
                     width: int, height: int) -> GroundTruth:
    """Closed-form ground truth for a single plane normal . P == offset.

    The disparity of a plane is exactly linear in pixel coordinates,
    which makes this the exactness fixture for every estimator.  Raises
    if the plane passes through the camera (offset == 0) or is not fully
    visible with positive depth across the frame.
    """
    plane = Plane(normal, float(offset))
    if plane.offset == 0.0:
        raise ValueError("plane through the projection center is degenerate")
    dx, dy = _ray_dirs(rig, height, width)
    denom = plane.normal[0] * dx + plane.normal[1] * dy + plane.normal[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = plane.offset / denom
    if not np.all(np.isfinite(z) & (z > 0.0)):
        raise ValueError("plane is not fully visible with positive depth")
    mask = np.ones((height, width), dtype=bool)
    disparity = rig.fx * rig.baseline * denom / plane.offset
    oriented = plane.normal if plane.offset <= 0.0 else -plane.normal
    normals = np.broadcast_to(oriented, (height, width, 3)).copy()
    return GroundTruth(depth=ScalarField(z, mask),
                       disparity=ScalarField(disparity, mask),
                       normals=NormalField(normals, mask))


def add_gaussian_noise(disparity: ScalarField, sigma: float,
                       seed: int) -> ScalarField:
    """Perturb every valid pixel with an independent N(0, sigma) draw.

    Draws come from a PCG64 generator in fixed raster order over the
    full grid, so the output is bit-reproducible for a given (sigma,
    seed) regardless of the mask or thread count.  The mask is unchanged.
    """
    if sigma < 0.0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0.0:
        return disparity.copy()
    rng = np.random.Generator(np.random.PCG64(seed))
    noise = rng.normal(0.0, sigma, size=disparity.shape)
    values = np.where(disparity.mask, disparity.values + noise, np.nan)
    return ScalarField(values, disparity.mask.copy())
