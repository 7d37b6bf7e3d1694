"""Grid containers shared by every estimation stage.

All fields pair a row-major value array with a boolean validity mask.
Invalid pixels hold NaN so that accidental reads poison downstream math
instead of silently producing plausible numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _as_grid(values, depth: int | None = None) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    want = 2 if depth is None else 3
    if arr.ndim != want or (depth is not None and arr.shape[2] != depth):
        raise ValueError(f"expected shape (H, W{', %d' % depth if depth else ''}), got {arr.shape}")
    return arr


def _as_mask(mask, shape) -> np.ndarray:
    m = np.asarray(mask, dtype=bool)
    if m.shape != shape:
        raise ValueError(f"mask shape {m.shape} does not match grid shape {shape}")
    return m


@dataclass
class ScalarField:
    """Width x height scalar grid (disparity, depth, error, edge maps)."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.values = _as_grid(self.values)
        self.mask = _as_mask(self.mask, self.values.shape)
        self.values = np.where(self.mask, self.values, np.nan)

    @classmethod
    def from_array(cls, values) -> "ScalarField":
        """Wrap a grid, marking non-finite samples invalid."""
        arr = _as_grid(values)
        return cls(arr, np.isfinite(arr))

    @classmethod
    def full(cls, height: int, width: int, value: float) -> "ScalarField":
        return cls(np.full((height, width), value, dtype=np.float64),
                   np.ones((height, width), dtype=bool))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def valid_values(self) -> np.ndarray:
        return self.values[self.mask]

    def copy(self) -> "ScalarField":
        return ScalarField(self.values.copy(), self.mask.copy())


@dataclass
class AffineField:
    """Per-pixel local affine parameters (a1, a2) with a validity mask."""

    a1: np.ndarray
    a2: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.a1 = _as_grid(self.a1)
        self.a2 = _as_grid(self.a2)
        if self.a2.shape != self.a1.shape:
            raise ValueError("a1/a2 shapes differ")
        self.mask = _as_mask(self.mask, self.a1.shape)
        self.a1 = np.where(self.mask, self.a1, np.nan)
        self.a2 = np.where(self.mask, self.a2, np.nan)

    @property
    def height(self) -> int:
        return self.a1.shape[0]

    @property
    def width(self) -> int:
        return self.a1.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.a1.shape


@dataclass
class NormalField:
    """Per-pixel unit surface normals, camera-facing where valid."""

    vectors: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.vectors = _as_grid(self.vectors, depth=3)
        self.mask = _as_mask(self.mask, self.vectors.shape[:2])
        self.vectors = np.where(self.mask[..., None], self.vectors, np.nan)

    @classmethod
    def from_array(cls, vectors) -> "NormalField":
        arr = _as_grid(vectors, depth=3)
        return cls(arr, np.isfinite(arr).all(axis=2))

    @property
    def height(self) -> int:
        return self.vectors.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.vectors.shape[:2]
