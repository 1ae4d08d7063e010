"""Integral projections over rectangular regions of a frame.

A horizontal projection averages intensities along rows (one value per row of
the region), a vertical projection along columns. Applied to the sparse
subtle-motion component of a clip these become the improved projections used
by the spatiotemporal descriptor; applied to the raw frames they give the
original-projection comparison mode.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Region:
    """Pixel rectangle [x1, x2) x [y1, y2); x indexes columns, y indexes rows."""

    x1: int
    x2: int
    y1: int
    y2: int

    def __post_init__(self):
        if self.x1 < 0 or self.y1 < 0 or self.x2 <= self.x1 or self.y2 <= self.y1:
            raise ValueError(f"invalid region {self}")

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1


def _check_bounds(mat: np.ndarray, region: Region):
    h, w = mat.shape
    if region.x2 > w or region.y2 > h:
        raise ValueError(f"region {region} exceeds {w}x{h} frame")


def horizontal_projection(mat, region: Region) -> np.ndarray:
    """Row means of the region: value at y is the mean over x in [x1, x2)."""
    m = np.asarray(mat, dtype=np.float64)
    _check_bounds(m, region)
    return m[region.y1 : region.y2, region.x1 : region.x2].mean(axis=1)


def vertical_projection(mat, region: Region) -> np.ndarray:
    """Column means of the region: value at x is the mean over y in [y1, y2)."""
    m = np.asarray(mat, dtype=np.float64)
    _check_bounds(m, region)
    return m[region.y1 : region.y2, region.x1 : region.x2].mean(axis=0)


def frame_projections(frames, region: Region) -> list:
    """Per-frame (horizontal, vertical) projection pairs.

    `frames` is a (T, H, W) stack; for the improved variant pass the reshaped
    sparse components, for the original variant the raw intensity frames.
    """
    stack = np.asarray(frames, dtype=np.float64)
    if stack.ndim != 3:
        raise ValueError(f"expected a (T, H, W) frame stack, got shape {stack.shape}")
    return [
        (horizontal_projection(f, region), vertical_projection(f, region))
        for f in stack
    ]


def improved_projections(clip, decomposition, region: Region, original: bool = False) -> list:
    """Projections of the clip's sparse subtle-motion frames (or, with
    original=True, of the raw intensity frames for comparison runs)."""
    if original:
        return frame_projections(clip.frames, region)
    if decomposition.frame_shape != clip.frames.shape[1:] or \
            decomposition.sparse.shape[1] != clip.frames.shape[0]:
        raise ValueError(
            f"decomposition shape does not match clip {clip.clip_id!r}"
        )
    return frame_projections(decomposition.sparse_frames(), region)
