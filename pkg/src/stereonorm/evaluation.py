"""Angular-error maps and summary statistics for estimator comparisons."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .fields import NormalField, ScalarField


@dataclass(frozen=True)
class ErrorStats:
    """Five-number summary of an error map, degrees, valid pixels only."""

    avg: float
    min: float
    max: float
    median: float
    std: float
    valid_count: int

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorStats":
        return cls(avg=float(d["avg"]), min=float(d["min"]), max=float(d["max"]),
                   median=float(d["median"]), std=float(d["std"]),
                   valid_count=int(d["valid_count"]))


def angular_error_map(est: NormalField, gt: NormalField,
                      mask=None) -> ScalarField:
    """Unsigned angle (degrees) between estimate and ground truth.

    arccos(|n_est . n_gt|) ranges over [0, 90]; flipping either normal
    leaves it unchanged.  Defined on jointly valid pixels, optionally
    restricted further by ``mask``.
    """
    if est.shape != gt.shape:
        raise ValueError(f"field sizes differ: {est.shape} vs {gt.shape}")
    ok = est.mask & gt.mask
    if mask is not None:
        ok = ok & np.asarray(mask, dtype=bool)
    # renormalize: storage quantization perturbs lengths, and arccos
    # amplifies even 1e-7 length error into hundredths of a degree
    with np.errstate(invalid="ignore", divide="ignore"):
        ea = est.vectors / np.linalg.norm(est.vectors, axis=-1, keepdims=True)
        ga = gt.vectors / np.linalg.norm(gt.vectors, axis=-1, keepdims=True)
        dot = np.abs(np.sum(ea * ga, axis=-1))
    ang = np.degrees(np.arccos(np.clip(dot, 0.0, 1.0)))
    ok &= np.isfinite(ang)
    return ScalarField(np.where(ok, ang, np.nan), ok)


def summarize(errors: ScalarField) -> ErrorStats:
    """Population statistics over the valid pixels of an error map.

    The median of an even count is the lower-middle element; std divides
    by N.  Raises on an empty mask.
    """
    vals = errors.valid_values()
    if vals.size == 0:
        raise ValueError("cannot summarize an empty error map")
    srt = np.sort(vals)
    return ErrorStats(avg=float(vals.mean()),
                      min=float(srt[0]),
                      max=float(srt[-1]),
                      median=float(srt[(len(srt) - 1) // 2]),
                      std=float(vals.std()),
                      valid_count=int(vals.size))


def stats_records(runs: list[tuple[str, ErrorStats]]) -> list[dict]:
    """Machine-readable rows, ordered by label; exact float values."""
    out = []
    for label, stats in sorted(runs, key=lambda r: r[0]):
        rec = {"label": label}
        rec.update(stats.as_dict())
        out.append(rec)
    return out


def compare_table(runs: list[tuple[str, ErrorStats]]) -> str:
    """Fixed-format comparison table, one row per labelled run."""
    if not runs:
        raise ValueError("need at least one run")
    width = max(len("method"), max(len(lbl) for lbl, _ in runs))
    head = (f"{'method':<{width}}  {'avg':>10}  {'min':>10}  {'max':>10}"
            f"  {'med':>10}  {'std':>10}  {'pixels':>9}")
    lines = [head]
    for rec in stats_records(runs):
        lines.append(
            f"{rec['label']:<{width}}  {rec['avg']:>10.4f}  {rec['min']:>10.4f}"
            f"  {rec['max']:>10.4f}  {rec['median']:>10.4f}  {rec['std']:>10.4f}"
            f"  {rec['valid_count']:>9d}")
    return "\n".join(lines) + "\n"


def depth_discontinuity_band(depth: ScalarField, min_jump: float,
                             radius: int = 3) -> np.ndarray:
    """Pixels within ``radius`` (Chebyshev) of a depth step.

    A step is any valid-valid 4-neighbour pair whose depth difference
    exceeds ``min_jump``; the seed set is dilated ``radius`` times with a
    3x3 structuring element.
    """
    z = depth.values
    m = depth.mask
    seed = np.zeros(depth.shape, dtype=bool)
    jump_h = (np.abs(np.diff(z, axis=1)) > min_jump) & m[:, 1:] & m[:, :-1]
    jump_v = (np.abs(np.diff(z, axis=0)) > min_jump) & m[1:, :] & m[:-1, :]
    seed[:, 1:] |= jump_h
    seed[:, :-1] |= jump_h
    seed[1:, :] |= jump_v
    seed[:-1, :] |= jump_v
    if radius > 0 and seed.any():
        seed = ndimage.binary_dilation(seed, structure=np.ones((3, 3), bool),
                                       iterations=radius)
    return seed
