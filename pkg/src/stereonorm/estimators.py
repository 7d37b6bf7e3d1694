"""Estimator-object layer over the functional API.

The classes follow the scikit-learn protocol (``fit`` / ``transform`` /
``fit_transform`` / ``get_params`` / ``set_params``) without depending on
scikit-learn itself, so they drop into sklearn pipelines and parameter
search utilities.  ``X`` is a 2D disparity array (NaN marks missing
samples) or a :class:`~stereonorm.fields.ScalarField`; ``transform``
returns an (H, W, 3) array of unit camera-facing normals with NaN rows at
invalid pixels.
"""

from __future__ import annotations

import inspect

import numpy as np

from .adaptive import StarConfig, estimate_normals_adaptive
from .baselines import estimate_normals_cross, estimate_normals_pca
from .fields import ScalarField
from .geometry import StereoRig
from .kernels import KernelSpec, build_kernels, estimate_normals_fixed


def as_scalar_field(X) -> ScalarField:
    """Validation helper: accept a ScalarField or a 2D array with NaNs."""
    if isinstance(X, ScalarField):
        return X
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D disparity grid, got shape {arr.shape}")
    return ScalarField.from_array(arr)


def as_rig(rig) -> StereoRig:
    """Validation helper: accept a StereoRig or a (fx, fy, u0, v0, b) mapping."""
    if isinstance(rig, StereoRig):
        return rig
    if isinstance(rig, dict):
        return StereoRig(**rig)
    raise ValueError("rig must be a StereoRig or a parameter mapping")


class BaseNormalEstimator:
    """Shared sklearn-style parameter plumbing."""

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "BaseNormalEstimator":
        valid = self._param_names()
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def fit(self, X=None, y=None) -> "BaseNormalEstimator":
        """Validate parameters and precompute anything shape-independent."""
        as_rig(self.rig)
        return self

    def transform(self, X) -> np.ndarray:
        raise NotImplementedError

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).transform(X)


class AffineNormalEstimator(BaseNormalEstimator):
    """Fixed-pattern convolutional affine estimator."""

    def __init__(self, rig, kernel_size: int = 9, threads: int | None = 1):
        self.rig = rig
        self.kernel_size = kernel_size
        self.threads = threads

    def fit(self, X=None, y=None) -> "AffineNormalEstimator":
        super().fit(X, y)
        self.kernels_ = build_kernels(KernelSpec.square(self.kernel_size))
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "kernels_"):
            self.fit()
        field = as_scalar_field(X)
        return estimate_normals_fixed(field, as_rig(self.rig), self.kernels_,
                                      threads=self.threads).vectors


class AdaptiveNormalEstimator(BaseNormalEstimator):
    """Star-fill adaptive estimator with ST or CD stopping."""

    def __init__(self, rig, stop: str = "cd", directions: int = 8,
                 max_steps: int = 10, threshold: float = 0.1,
                 threads: int | None = 1):
        self.rig = rig
        self.stop = stop
        self.directions = directions
        self.max_steps = max_steps
        self.threshold = threshold
        self.threads = threads

    def fit(self, X=None, y=None) -> "AdaptiveNormalEstimator":
        super().fit(X, y)
        self.config_ = StarConfig(directions=self.directions,
                                  max_steps=self.max_steps,
                                  stop=self.stop, threshold=self.threshold)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "config_"):
            self.fit()
        field = as_scalar_field(X)
        return estimate_normals_adaptive(field, as_rig(self.rig), self.config_,
                                         threads=self.threads).vectors


class PCANormalEstimator(BaseNormalEstimator):
    """Windowed plane-fit baseline."""

    def __init__(self, rig, window: int = 9, threads: int | None = 1):
        self.rig = rig
        self.window = window
        self.threads = threads

    def fit(self, X=None, y=None) -> "PCANormalEstimator":
        super().fit(X, y)
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 3")
        return self

    def transform(self, X) -> np.ndarray:
        field = as_scalar_field(X)
        return estimate_normals_pca(field, as_rig(self.rig), self.window,
                                    threads=self.threads).vectors


class CrossProductNormalEstimator(BaseNormalEstimator):
    """Central-difference tangent cross product baseline."""

    def __init__(self, rig):
        self.rig = rig

    def transform(self, X) -> np.ndarray:
        field = as_scalar_field(X)
        return estimate_normals_cross(field, as_rig(self.rig)).vectors
