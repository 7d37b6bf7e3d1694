"""Reference estimators: PCA plane fitting and the tangent cross product.

Both operate on the triangulated point grid.  The PCA path needs one
3x3 symmetric eigendecomposition per pixel, so a closed-form
trigonometric solver is used and vectorized over the whole frame.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .fields import NormalField, ScalarField
from .geometry import StereoRig, orient_toward_camera, triangulate_grid
from .parallel import run_row_chunks

_AXES = np.eye(3)


def _unit_perp(v: np.ndarray) -> np.ndarray:
    """A unit vector orthogonal to each row of v (v assumed unit)."""
    k = np.argmin(np.abs(v), axis=-1)
    e = _AXES[k]
    p = e - np.sum(e * v, axis=-1, keepdims=True) * v
    return p / np.linalg.norm(p, axis=-1, keepdims=True)


def _best_null(a11, a12, a13, a22, a23, a33, lam):
    """Unit null-space candidate of (A - lam*I) via the largest row cross."""
    r0 = np.stack([a11 - lam, a12, a13], axis=-1)
    r1 = np.stack([a12, a22 - lam, a23], axis=-1)
    r2 = np.stack([a13, a23, a33 - lam], axis=-1)
    cands = np.stack([np.cross(r0, r1), np.cross(r0, r2), np.cross(r1, r2)],
                     axis=-2)
    norms = np.linalg.norm(cands, axis=-1)
    pick = np.argmax(norms, axis=-1)
    best = np.take_along_axis(cands, pick[..., None, None], axis=-2)[..., 0, :]
    nrm = np.take_along_axis(norms, pick[..., None], axis=-1)[..., 0]
    safe = np.where(nrm > 0.0, nrm, 1.0)
    return best / safe[..., None], nrm


def eig3_symmetric(m) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigendecomposition of real symmetric 3x3 matrices.

    ``m`` has shape (..., 3, 3); off-diagonal pairs are averaged.  Returns
    ``(w, V)`` with eigenvalues ascending along the last axis and unit
    eigenvectors in the columns of V (``V[..., :, i]`` pairs ``w[..., i]``).
    Repeated eigenvalues yield an arbitrary valid orthonormal basis.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.shape[-2:] != (3, 3):
        raise ValueError("expected (..., 3, 3) input")
    a11, a22, a33 = a[..., 0, 0], a[..., 1, 1], a[..., 2, 2]
    a12 = 0.5 * (a[..., 0, 1] + a[..., 1, 0])
    a13 = 0.5 * (a[..., 0, 2] + a[..., 2, 0])
    a23 = 0.5 * (a[..., 1, 2] + a[..., 2, 1])

    q = (a11 + a22 + a33) / 3.0
    p1 = a12 ** 2 + a13 ** 2 + a23 ** 2
    p2 = (a11 - q) ** 2 + (a22 - q) ** 2 + (a33 - q) ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    frob = np.sqrt(a11 ** 2 + a22 ** 2 + a33 ** 2 + 2.0 * p1)
    iso = p <= 1e-14 * np.maximum(frob, 1e-300)

    ps = np.where(iso, 1.0, p)
    b11, b22, b33 = (a11 - q) / ps, (a22 - q) / ps, (a33 - q) / ps
    b12, b13, b23 = a12 / ps, a13 / ps, a23 / ps
    detb = (b11 * (b22 * b33 - b23 ** 2) - b12 * (b12 * b33 - b23 * b13)
            + b13 * (b12 * b23 - b22 * b13))
    phi = np.arccos(np.clip(detb / 2.0, -1.0, 1.0)) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    # rounding can push the trace-derived middle value past the extremes
    mid = np.clip(3.0 * q - hi - lo, lo, hi)
    w = np.stack([np.where(iso, q, lo), np.where(iso, q, mid),
                  np.where(iso, q, hi)], axis=-1)

    v_lo, _ = _best_null(a11, a12, a13, a22, a23, a33, w[..., 0])
    v_hi, _ = _best_null(a11, a12, a13, a22, a23, a33, w[..., 2])
    gap_tol = 1e-7 * np.maximum(frob, 1e-300)
    lo_rep = (w[..., 1] - w[..., 0]) <= gap_tol
    hi_rep = (w[..., 2] - w[..., 1]) <= gap_tol

    # distinct extremes: orthogonalize the pair, complete with a cross
    v2 = v_hi - np.sum(v_hi * v_lo, axis=-1, keepdims=True) * v_lo
    n2 = np.linalg.norm(v2, axis=-1, keepdims=True)
    v2 = np.where(n2 > 0.0, v2 / np.where(n2 > 0.0, n2, 1.0), _unit_perp(v_lo))
    v0 = v_lo
    # lower pair repeated: the top eigenvector is reliable, rebuild the rest
    v0 = np.where(lo_rep[..., None], _unit_perp(v_hi), v0)
    v2 = np.where(lo_rep[..., None], v_hi, v2)
    # upper pair repeated: the bottom eigenvector is reliable
    v2 = np.where((hi_rep & ~lo_rep)[..., None], _unit_perp(v_lo), v2)
    v1 = np.cross(v2, v0)
    n1 = np.linalg.norm(v1, axis=-1, keepdims=True)
    v1 = np.where(n1 > 0.0, v1 / np.where(n1 > 0.0, n1, 1.0), _AXES[1])

    allrep = iso | (lo_rep & hi_rep)
    v0 = np.where(allrep[..., None], _AXES[0], v0)
    v1 = np.where(allrep[..., None], _AXES[1], v1)
    v2 = np.where(allrep[..., None], _AXES[2], v2)
    vecs = np.stack([v0, v1, v2], axis=-1)
    return w, vecs


def estimate_normals_pca(disparity: ScalarField, rig: StereoRig,
                         window: int = 9,
                         threads: int | None = 1) -> NormalField:
    """Plane-fit normals: smallest eigenvector of the windowed covariance.

    Pixels whose window leaves the image are invalid; masked samples
    inside the window are tolerated as long as at least three valid
    points remain, the center is valid, and the covariance is not
    degenerate (collinear points).
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    h, w = disparity.shape
    r = window // 2
    pts = triangulate_grid(disparity, rig)
    valid = np.isfinite(pts).all(axis=-1)
    p0 = np.where(valid[..., None], pts, 0.0)
    x, y, z = p0[..., 0], p0[..., 1], p0[..., 2]
    planes = np.stack([valid.astype(np.float64), x, y, z,
                       x * x, x * y, x * z, y * y, y * z, z * z])
    padded = np.pad(planes, ((0, 0), (r, r), (r, r)))
    area = float(window * window)

    normals = np.full((h, w, 3), np.nan)
    out_mask = np.zeros((h, w), dtype=bool)

    def work(r0: int, r1: int) -> None:
        block = padded[:, r0:r1 + 2 * r, :]
        sums = ndimage.uniform_filter(block, size=(1, window, window),
                                      mode="constant", cval=0.0) * area
        sums = sums[:, r:r + (r1 - r0), r:r + w]
        n = sums[0]
        ok = n >= 2.5
        ns = np.where(ok, n, 1.0)
        sx, sy, sz = sums[1], sums[2], sums[3]
        cov = np.empty(sums.shape[1:] + (3, 3))
        cov[..., 0, 0] = sums[4] - sx * sx / ns
        cov[..., 0, 1] = cov[..., 1, 0] = sums[5] - sx * sy / ns
        cov[..., 0, 2] = cov[..., 2, 0] = sums[6] - sx * sz / ns
        cov[..., 1, 1] = sums[7] - sy * sy / ns
        cov[..., 1, 2] = cov[..., 2, 1] = sums[8] - sy * sz / ns
        cov[..., 2, 2] = sums[9] - sz * sz / ns
        evals, evecs = eig3_symmetric(cov)
        # a defined plane needs two spread directions: lambda_1 must clear
        # both the top eigenvalue and the moment-assembly rounding floor
        floor = np.maximum(1e-9 * evals[..., 2],
                           1e-12 * (sums[4] + sums[7] + sums[9]))
        spread = evals[..., 1] > floor
        nrm = orient_toward_camera(evecs[..., :, 0], pts[r0:r1])
        good = ok & spread & valid[r0:r1] & np.isfinite(nrm).all(axis=-1)
        normals[r0:r1] = np.where(good[..., None], nrm, np.nan)
        out_mask[r0:r1] = good

    run_row_chunks(h, threads, work)
    if r:
        out_mask[:r] = out_mask[-r:] = False
        out_mask[:, :r] = out_mask[:, -r:] = False
        normals[~out_mask] = np.nan
    return NormalField(normals, out_mask)


def estimate_normals_cross(disparity: ScalarField, rig: StereoRig) -> NormalField:
    """Naive normal: cross product of central-difference tangents.

    Valid where the pixel and its four axis neighbours triangulate;
    constant-disparity input yields (0, 0, -1) everywhere.
    """
    h, w = disparity.shape
    pts = triangulate_grid(disparity, rig)
    normals = np.full((h, w, 3), np.nan)
    tu = pts[1:-1, 2:] - pts[1:-1, :-2]
    tv = pts[2:, 1:-1] - pts[:-2, 1:-1]
    raw = np.cross(tu, tv)
    nrm = np.linalg.norm(raw, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(nrm > 0.0, raw / nrm, np.nan)
    normals[1:-1, 1:-1] = orient_toward_camera(unit, pts[1:-1, 1:-1])
    mask = np.isfinite(normals).all(axis=-1)
    # the center must triangulate too, or the orientation is undefined
    mask &= np.isfinite(pts).all(axis=-1)
    normals[~mask] = np.nan
    return NormalField(normals, mask)
