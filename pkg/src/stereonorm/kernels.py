"""Precomputed least-squares kernels and convolutional affine estimation.

For a fixed set of integer pixel offsets v_i around each observed pixel c,
the local affine parameters minimize

    sum_i ( v_ix * (a1 - 1) + v_iy * a2 - (d_i - d_c) )^2

over the disparity samples d_i = d(c + v_i).  Because the offset pattern is
shared by every pixel, the pseudo-inverse S = (V^T V)^-1 V^T depends only on
the pattern and is precomputed once; applying it to a whole disparity map
reduces to two direct 2D convolutions (one per parameter) followed by a
per-pixel correction involving the center disparity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .fields import AffineField, NormalField, ScalarField
from .geometry import StereoRig, normals_from_gradient_affine, pixel_grid
from .parallel import run_row_chunks


class DegenerateSupportError(ValueError):
    """Offset pattern spans less than two independent directions."""


@dataclass(frozen=True)
class KernelSpec:
    """Integer pixel displacements (vx, vy) relative to the observed pixel."""

    offsets: np.ndarray

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=np.int64)
        if off.ndim != 2 or off.shape[1] != 2 or off.shape[0] == 0:
            raise ValueError("offsets must have shape (N, 2)")
        if len(np.unique(off, axis=0)) != len(off):
            raise ValueError("offsets must be distinct")
        object.__setattr__(self, "offsets", off)

    @classmethod
    def square(cls, width: int) -> "KernelSpec":
        """Centered width x width square, center offset included."""
        if width < 3 or width % 2 == 0:
            raise ValueError("square kernel width must be odd and >= 3")
        h = width // 2
        vy, vx = np.mgrid[-h:h + 1, -h:h + 1]
        return cls(np.column_stack([vx.ravel(), vy.ravel()]))

    def __len__(self) -> int:
        return len(self.offsets)


@dataclass(frozen=True)
class PrecomputedKernels:
    """Solution weights of the fixed-pattern least-squares system.

    s1/s2 are the rows of S = (V^T V)^-1 V^T; delta1/delta2 their sums,
    used by the center-disparity correction step.  Both deltas vanish for
    point-symmetric offset patterns.
    """

    spec: KernelSpec
    alpha: float
    beta: float
    gamma: float
    det: float
    s1: np.ndarray
    s2: np.ndarray
    delta1: float
    delta2: float


def build_kernels(spec: KernelSpec, tol: float = 0.5) -> PrecomputedKernels:
    """Precompute the least-squares weights for one offset pattern.

    Raises :class:`DegenerateSupportError` when the offsets are collinear
    (det(V^T V) vanishes; it is integer-valued for integer offsets, so the
    default tolerance of 0.5 separates rank 2 from rank deficiency exactly).
    """
    vx = spec.offsets[:, 0].astype(np.float64)
    vy = spec.offsets[:, 1].astype(np.float64)
    alpha = float(np.sum(vx * vx))
    beta = float(np.sum(vx * vy))
    gamma = float(np.sum(vy * vy))
    det = alpha * gamma - beta * beta
    if det <= tol:
        raise DegenerateSupportError(
            f"offset pattern is rank deficient (det={det:g})")
    s1 = (gamma * vx - beta * vy) / det
    s2 = (-beta * vx + alpha * vy) / det
    # exact integer offset sums keep the deltas exactly zero for
    # point-symmetric patterns
    sx = float(np.sum(vx))
    sy = float(np.sum(vy))
    return PrecomputedKernels(spec=spec, alpha=alpha, beta=beta, gamma=gamma,
                              det=det, s1=s1, s2=s2,
                              delta1=(gamma * sx - beta * sy) / det,
                              delta2=(-beta * sx + alpha * sy) / det)


def _as_kernels(kernels) -> PrecomputedKernels:
    if isinstance(kernels, PrecomputedKernels):
        return kernels
    if isinstance(kernels, KernelSpec):
        return build_kernels(kernels)
    return build_kernels(KernelSpec.square(int(kernels)))


def _dense_grids(kern: PrecomputedKernels):
    """Embed the sparse weights in centered odd-sized grids.

    Returns (k1, k2, footprint, hx, hy, margins) where margins are the
    true per-side support extents used for border invalidation.
    """
    off = kern.spec.offsets
    vx, vy = off[:, 0], off[:, 1]
    hx = int(max(vx.max(), -vx.min(), 0))
    hy = int(max(vy.max(), -vy.min(), 0))
    k1 = np.zeros((2 * hy + 1, 2 * hx + 1))
    k2 = np.zeros_like(k1)
    fp = np.zeros_like(k1)
    k1[hy + vy, hx + vx] = kern.s1
    k2[hy + vy, hx + vx] = kern.s2
    fp[hy + vy, hx + vx] = 1.0
    margins = (max(0, -int(vy.min())), max(0, int(vy.max())),
               max(0, -int(vx.min())), max(0, int(vx.max())))
    return k1, k2, fp, hx, hy, margins


def _affine_pass(disparity: ScalarField, kern: PrecomputedKernels,
                 threads: int | None, consume):
    """Shared convolution driver for the affine/normal fixed-path ops.

    For each row band, computes (a1, a2, valid) in the disparity-gradient
    convention and hands them to ``consume(r0, r1, a1, a2, valid)``.
    """
    k1, k2, fp, hx, hy, (mt, mb, ml, mr) = _dense_grids(kern)
    h, w = disparity.shape
    vals = disparity.values
    mask = disparity.mask
    all_valid = bool(mask.all())
    zeroed = np.where(mask, vals, 0.0)
    padded = np.pad(zeroed, ((hy, hy), (hx, hx)))
    if not all_valid:
        inv_pad = np.pad((~mask).astype(np.float64), ((hy, hy), (hx, hx)))

    def work(r0: int, r1: int) -> None:
        block = padded[r0:r1 + 2 * hy, :]
        step1 = ndimage.correlate(block, k1, mode="constant", cval=0.0)
        step2 = ndimage.correlate(block, k2, mode="constant", cval=0.0)
        step1 = step1[hy:hy + (r1 - r0), hx:hx + w]
        step2 = step2[hy:hy + (r1 - r0), hx:hx + w]
        dc = vals[r0:r1]
        a1 = step1 - dc * kern.delta1 + 1.0
        a2 = step2 - dc * kern.delta2
        valid = mask[r0:r1].copy()
        if not all_valid:
            touched = ndimage.correlate(inv_pad[r0:r1 + 2 * hy, :], fp,
                                        mode="constant", cval=0.0)
            valid &= touched[hy:hy + (r1 - r0), hx:hx + w] <= 0.5
        # support exiting the image invalidates the pixel: no padding
        lo = max(r0, mt)
        hi = min(r1, h - mb)
        if lo > r0:
            valid[:min(lo, r1) - r0] = False
        if hi < r1:
            valid[max(hi, r0) - r0:] = False
        if ml:
            valid[:, :ml] = False
        if mr:
            valid[:, w - mr:] = False
        consume(r0, r1, a1, a2, valid)

    run_row_chunks(h, threads, work)


def convolve_affine(disparity: ScalarField, kernels,
                    threads: int | None = 1) -> AffineField:
    """Per-pixel (a1, a2) over a whole disparity map.

    a1 = sum_i s1_i d_i - d_c * delta1 + 1 and a2 = sum_i s2_i d_i -
    d_c * delta2, evaluated only where the full offset support is in
    bounds and valid; every other pixel is invalid.  Accumulation is in
    double precision.
    """
    kern = _as_kernels(kernels)
    h, w = disparity.shape
    a1 = np.full((h, w), np.nan)
    a2 = np.full((h, w), np.nan)
    valid = np.zeros((h, w), dtype=bool)

    def consume(r0, r1, b1, b2, v):
        a1[r0:r1] = b1
        a2[r0:r1] = b2
        valid[r0:r1] = v

    _affine_pass(disparity, kern, threads, consume)
    return AffineField(a1, a2, valid)


def estimate_affine_direct(disparity: ScalarField, pixel: tuple[int, int],
                           spec: KernelSpec) -> tuple[float, float]:
    """Reference least-squares solve at a single pixel.

    Uses the valid in-bounds subset of the offsets (the convolutional
    path instead invalidates pixels with incomplete support).  Returns
    (nan, nan) when the center is invalid or the support is rank
    deficient.
    """
    u, v = pixel
    h, w = disparity.shape
    if not (0 <= v < h and 0 <= u < w) or not disparity.mask[v, u]:
        return (float("nan"), float("nan"))
    uu = u + spec.offsets[:, 0]
    vv = v + spec.offsets[:, 1]
    ok = (uu >= 0) & (uu < w) & (vv >= 0) & (vv < h)
    ok[ok] &= disparity.mask[vv[ok], uu[ok]]
    vxy = spec.offsets[ok].astype(np.float64)
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


def estimate_normals_fixed(disparity: ScalarField, rig: StereoRig, kernels,
                           threads: int | None = 1) -> NormalField:
    """Dense normals: convolutional affine fit, triangulation, closed form.

    ``kernels`` may be a :class:`PrecomputedKernels`, a :class:`KernelSpec`
    or an odd square width.
    """
    kern = _as_kernels(kernels)
    h, w = disparity.shape
    normals = np.full((h, w, 3), np.nan)
    out_mask = np.zeros((h, w), dtype=bool)
    ugrid, vgrid = pixel_grid(h, w)
    du = ugrid - rig.u0
    dv = vgrid - rig.v0

    def consume(r0, r1, a1, a2, valid):
        ok = normals_from_gradient_affine(a1, a2, disparity.values[r0:r1],
                                          du[r0:r1], dv[r0:r1], rig,
                                          normals[r0:r1])
        ok &= valid
        normals[r0:r1][~ok] = np.nan
        out_mask[r0:r1] = ok

    _affine_pass(disparity, kern, threads, consume)
    return NormalField(normals, out_mask)


def format_kernel_dump(kern: PrecomputedKernels) -> str:
    """Debug text listing of a kernel: constants plus weights row by row.

    Offset patterns that exactly fill their bounding box are rendered as
    aligned grids (one row of cells per pixel row); sparse patterns fall
    back to one line per offset.
    """
    lines = [
        f"offsets {len(kern.spec)}",
        f"alpha {kern.alpha:.17g}",
        f"beta {kern.beta:.17g}",
        f"gamma {kern.gamma:.17g}",
        f"det {kern.det:.17g}",
        f"delta1 {kern.delta1:.17g}",
        f"delta2 {kern.delta2:.17g}",
    ]
    off = kern.spec.offsets
    vx, vy = off[:, 0], off[:, 1]
    rows = np.arange(vy.min(), vy.max() + 1)
    cols = np.arange(vx.min(), vx.max() + 1)
    dense = len(off) == len(rows) * len(cols)
    for name, wgt in (("s1", kern.s1), ("s2", kern.s2)):
        lines.append(f"{name} kernel:")
        if dense:
            grid = np.zeros((len(rows), len(cols)))
            grid[vy - vy.min(), vx - vx.min()] = wgt
            for r, row in zip(rows, grid):
                cells = "  ".join(f"{val: .10g}" for val in row)
                lines.append(f"  vy={r:+d}:  {cells}")
        else:
            for (x, y), val in zip(off, wgt):
                lines.append(f"  v=({x:+d},{y:+d})  {val:.10g}")
    return "\n".join(lines) + "\n"
