"""Wall-time benchmarking of the estimation kernels.

Timing deliberately excludes all file I/O: inputs are prepared before the
clock starts and nothing is written while it runs, mirroring how the
per-frame estimation cost would be measured inside a live pipeline.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .adaptive import StarConfig, estimate_normals_adaptive
from .baselines import estimate_normals_cross, estimate_normals_pca
from .fields import ScalarField
from .geometry import StereoRig
from .kernels import KernelSpec, build_kernels, estimate_normals_fixed

DEFAULT_BENCH_RIG = StereoRig(fx=1024.0, fy=1024.0, u0=0.0, v0=0.0, baseline=0.3)


@dataclass(frozen=True)
class FrameTimeStats:
    avg_ms: float
    min_ms: float
    max_ms: float
    std_ms: float
    repeats: int

    def __str__(self) -> str:
        return (f"avg {self.avg_ms:.3f} ms  min {self.min_ms:.3f} ms  "
                f"max {self.max_ms:.3f} ms  std {self.std_ms:.3f} ms  "
                f"({self.repeats} runs)")


def time_callable(fn, repeats: int = 10, warmup: int = 1) -> FrameTimeStats:
    """Population statistics of ``fn()`` wall times over ``repeats`` runs."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    for _ in range(warmup):
        fn()
    samples = np.empty(repeats)
    for i in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples[i] = time.perf_counter() - t0
    ms = samples * 1e3
    return FrameTimeStats(avg_ms=float(ms.mean()), min_ms=float(ms.min()),
                          max_ms=float(ms.max()), std_ms=float(ms.std()),
                          repeats=repeats)


def bench_disparity(width: int, height: int) -> ScalarField:
    """Deterministic fully-valid disparity map with gentle structure."""
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    d = (60.0 + 0.01 * u + 0.02 * v
         + 2.0 * np.sin(u * (2.0 * np.pi / max(width, 2)))
         * np.cos(v * (2.0 * np.pi / max(height, 2))))
    return ScalarField.from_array(d)


def make_bench_callable(method: str, disparity: ScalarField,
                        rig: StereoRig | None = None, kernel_size: int = 9,
                        star: StarConfig | None = None,
                        threads: int | None = 1):
    """Closure running one full estimation pass over ``disparity``."""
    rig = rig or DEFAULT_BENCH_RIG
    if method == "affine-fixed":
        kern = build_kernels(KernelSpec.square(kernel_size))
        return lambda: estimate_normals_fixed(disparity, rig, kern, threads=threads)
    if method in ("affine-adaptive-st", "affine-adaptive-cd"):
        cfg = star or StarConfig(stop=method.rsplit("-", 1)[1])
        return lambda: estimate_normals_adaptive(disparity, rig, cfg, threads=threads)
    if method == "pca":
        return lambda: estimate_normals_pca(disparity, rig, kernel_size, threads=threads)
    if method == "cross":
        return lambda: estimate_normals_cross(disparity, rig)
    raise ValueError(f"unknown method {method!r}")


def run_bench(method: str, width: int, height: int, repeats: int = 10,
              rig: StereoRig | None = None, kernel_size: int = 9,
              star: StarConfig | None = None,
              threads: int | None = 1) -> FrameTimeStats:
    disparity = bench_disparity(width, height)
    fn = make_bench_callable(method, disparity, rig=rig, kernel_size=kernel_size,
                             star=star, threads=threads)
    return time_callable(fn, repeats=repeats)
