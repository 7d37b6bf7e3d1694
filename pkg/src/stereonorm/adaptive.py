"""Adaptive star-shaped support selection for edge-aware estimation.

Instead of a fixed window, the support around each pixel is grown by
walking rays in uniformly spaced directions and stopping at depth
discontinuities.  Two stopping rules are provided:

* ``"st"`` -- stop when a precomputed depth-Laplacian edge measure at the
  visited pixel exceeds a threshold;
* ``"cd"`` -- stop when the depth range covered along the traversal
  exceeds a fixed fraction of the center depth.

The affine parameters are then the plain least-squares fit over the
selected offsets (two passes: support moments first, weighted sums
second), so with stopping disabled the result matches the fixed-pattern
direct solver exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import NormalField, ScalarField
from .geometry import (StereoRig, depth_field, normals_from_gradient_affine,
                       pixel_grid)
from .parallel import run_row_chunks

_STOPS = ("st", "cd")


@dataclass(frozen=True)
class StarConfig:
    """Ray-traversal parameters.

    ``threshold`` is the edge measure bound t for ``stop="st"`` (world
    depth units) or the covered-depth ratio k for ``stop="cd"``
    (dimensionless).  ``shared_range`` switches the covered-depth
    bookkeeping from per-ray (default) to a single running range shared
    by all rays of one pixel, processed in direction order.
    """

    directions: int = 8
    max_steps: int = 10
    stop: str = "cd"
    threshold: float = 0.1
    shared_range: bool = False

    def __post_init__(self):
        if self.directions < 3:
            raise ValueError("need at least 3 ray directions")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.stop not in _STOPS:
            raise ValueError(f"stop must be one of {_STOPS}")
        if not self.threshold > 0.0:
            raise ValueError("threshold must be positive")


def ray_offsets(config: StarConfig) -> list[np.ndarray]:
    """Rounded integer offsets per direction, consecutive duplicates dropped.

    Direction j points at angle 2*pi*j/M from the +u axis (v downward);
    step i lands on rint(i * (cos, sin)).  Steps never round back onto
    the center pixel.
    """
    rays = []
    for j in range(config.directions):
        theta = 2.0 * np.pi * j / config.directions
        steps = np.arange(1, config.max_steps + 1, dtype=np.float64)
        vx = np.rint(steps * np.cos(theta)).astype(np.int64)
        vy = np.rint(steps * np.sin(theta)).astype(np.int64)
        off = np.column_stack([vx, vy])
        keep = np.ones(len(off), dtype=bool)
        keep[1:] = (off[1:] != off[:-1]).any(axis=1)
        rays.append(off[keep])
    return rays


def depth_laplacian(depth: ScalarField) -> ScalarField:
    """5-point discrete Laplacian magnitude of the depth map.

    Valid only at interior pixels whose four neighbours are valid;
    linear depth ramps map to zero.
    """
    z = depth.values
    e = np.full_like(z, np.nan)
    ok = np.zeros_like(depth.mask)
    c = z[1:-1, 1:-1]
    lap = np.abs(4.0 * c - z[1:-1, :-2] - z[1:-1, 2:]
                 - z[:-2, 1:-1] - z[2:, 1:-1])
    m = depth.mask
    good = (m[1:-1, 1:-1] & m[1:-1, :-2] & m[1:-1, 2:]
            & m[:-2, 1:-1] & m[2:, 1:-1])
    e[1:-1, 1:-1] = np.where(good, lap, np.nan)
    ok[1:-1, 1:-1] = good
    return ScalarField(e, ok)


def star_trace(center: tuple[int, int], depth: ScalarField,
               edges: ScalarField | None, config: StarConfig) -> np.ndarray:
    """Offsets selected around one pixel, center (0, 0) always included.

    Rays stop (excluding the triggering pixel) at the image border, at
    masked pixels, where the edge measure exceeds the threshold (``st``;
    pixels without a valid edge value also stop the ray), or when the
    covered depth range exceeds threshold * center depth (``cd``).
    Single-pass reference implementation; the whole-frame estimator in
    :func:`estimate_normals_adaptive` selects identical supports.
    """
    if config.stop == "st" and edges is None:
        raise ValueError("stop='st' requires an edge map")
    u, v = center
    h, w = depth.shape
    selected = [(0, 0)]
    if not (0 <= v < h and 0 <= u < w) or not depth.mask[v, u]:
        return np.asarray(selected, dtype=np.int64)
    zc = depth.values[v, u]
    seen = {(0, 0)}
    rmax = rmin = zc
    for ray in ray_offsets(config):
        if config.stop == "cd" and not config.shared_range:
            rmax = rmin = zc
        for vx, vy in ray:
            uu, vv = u + vx, v + vy
            if not (0 <= uu < w and 0 <= vv < h):
                break
            if not depth.mask[vv, uu]:
                break
            if config.stop == "st":
                if not edges.mask[vv, uu] or edges.values[vv, uu] > config.threshold:
                    break
            else:
                z = depth.values[vv, uu]
                rmax = max(rmax, z)
                rmin = min(rmin, z)
                if rmax - rmin > config.threshold * zc:
                    break
            key = (int(vx), int(vy))
            if key not in seen:
                seen.add(key)
                selected.append(key)
    return np.asarray(selected, dtype=np.int64)


def estimate_affine_adaptive(disparity: ScalarField, depth: ScalarField,
                             edges: ScalarField | None, pixel: tuple[int, int],
                             config: StarConfig) -> tuple[float, float]:
    """(a1, a2) least-squares fit over the star support of one pixel.

    Offsets whose disparity sample is invalid are dropped from the fit.
    Returns (nan, nan) when the support is rank deficient or the center
    is invalid.
    """
    u, v = pixel
    h, w = disparity.shape
    if not (0 <= v < h and 0 <= u < w) or not disparity.mask[v, u]:
        return (float("nan"), float("nan"))
    off = star_trace(pixel, depth, edges, config)
    uu = u + off[:, 0]
    vv = v + off[:, 1]
    ok = disparity.mask[vv, uu]
    vxy = off[ok].astype(np.float64)
    rhs = disparity.values[vv[ok], uu[ok]] - disparity.values[v, u]
    alpha = float(vxy[:, 0] @ vxy[:, 0])
    beta = float(vxy[:, 0] @ vxy[:, 1])
    gamma = float(vxy[:, 1] @ vxy[:, 1])
    det = alpha * gamma - beta * beta
    if det <= 0.5:
        return (float("nan"), float("nan"))
    b1 = float(vxy[:, 0] @ rhs)
    b2 = float(vxy[:, 1] @ rhs)
    return (1.0 + (gamma * b1 - beta * b2) / det,
            (-beta * b1 + alpha * b2) / det)


def estimate_normals_adaptive(disparity: ScalarField, rig: StereoRig,
                              config: StarConfig,
                              threads: int | None = 1) -> NormalField:
    """Dense normals with star-shaped adaptive supports.

    Depth (and, for ``st``, the edge map) are derived from the disparity
    input.  Per pixel: select the star support, fit (a1, a2), triangulate
    and apply the closed-form normal; rank-deficient supports are
    invalid.
    """
    depth = depth_field(disparity, rig)
    edges = depth_laplacian(depth) if config.stop == "st" else None
    h, w = disparity.shape
    s = config.max_steps
    dpad = np.pad(disparity.values, s, constant_values=np.nan)
    zpad = np.pad(depth.values, s, constant_values=np.nan)
    epad = np.pad(edges.values, s, constant_values=np.nan) if edges is not None else None
    rays = ray_offsets(config)
    ugrid, vgrid = pixel_grid(h, w)
    du = ugrid - rig.u0
    dv = vgrid - rig.v0
    normals = np.full((h, w, 3), np.nan)
    out_mask = np.zeros((h, w), dtype=bool)

    def shifted(padded, r0, r1, vx, vy):
        return padded[r0 + s + vy:r1 + s + vy, s + vx:s + vx + w]

    def work(r0: int, r1: int) -> None:
        zc = depth.values[r0:r1]
        dc = disparity.values[r0:r1]
        center_ok = np.isfinite(zc)
        limit = config.threshold * zc
        members: dict[tuple[int, int], np.ndarray] = {}
        rmax = zc.copy()
        rmin = zc.copy()
        for ray in rays:
            alive = center_ok.copy()
            if config.stop == "cd" and not config.shared_range:
                rmax = zc.copy()
                rmin = zc.copy()
            for vx, vy in ray:
                if config.stop == "st":
                    es = shifted(epad, r0, r1, vx, vy)
                    with np.errstate(invalid="ignore"):
                        ok = es <= config.threshold
                else:
                    zs = shifted(zpad, r0, r1, vx, vy)
                    if config.shared_range:
                        enc = alive & np.isfinite(zs)
                        nmax = np.where(enc, np.fmax(rmax, zs), rmax)
                        nmin = np.where(enc, np.fmin(rmin, zs), rmin)
                    else:
                        nmax = np.fmax(rmax, zs)
                        nmin = np.fmin(rmin, zs)
                    with np.errstate(invalid="ignore"):
                        ok = np.isfinite(zs) & (nmax - nmin <= limit)
                    rmax, rmin = nmax, nmin
                alive = alive & ok
                key = (int(vx), int(vy))
                if key in members:
                    members[key] |= alive
                else:
                    members[key] = alive.copy()
        shape = zc.shape
        alpha = np.zeros(shape)
        beta = np.zeros(shape)
        gamma = np.zeros(shape)
        b1 = np.zeros(shape)
        b2 = np.zeros(shape)
        for (vx, vy), m in members.items():
            mf = m.astype(np.float64)
            alpha += mf * float(vx * vx)
            beta += mf * float(vx * vy)
            gamma += mf * float(vy * vy)
            ds = shifted(dpad, r0, r1, vx, vy)
            with np.errstate(invalid="ignore"):
                dd = np.where(m, ds - dc, 0.0)
            b1 += float(vx) * dd
            b2 += float(vy) * dd
        det = alpha * gamma - beta * beta
        solvable = center_ok & (det > 0.5)
        safe_det = np.where(solvable, det, 1.0)
        g1 = (gamma * b1 - beta * b2) / safe_det
        g2 = (-beta * b1 + alpha * b2) / safe_det
        ok = normals_from_gradient_affine(1.0 + g1, g2, dc, du[r0:r1],
                                          dv[r0:r1], rig, normals[r0:r1])
        ok &= solvable
        normals[r0:r1][~ok] = np.nan
        out_mask[r0:r1] = ok

    run_row_chunks(h, threads, work)
    return NormalField(normals, out_mask)
