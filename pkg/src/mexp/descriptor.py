"""Spatiotemporal clip descriptor assembly.

The frame is divided into an m x n block grid. Per block, four group
features are computed from the motion frames (sparse components by default):

* XYH / XYV - accumulated 1D-pattern histograms of the per-frame horizontal
  and vertical projections (appearance/shape, spatial domain);
* XT / YT - 2D-pattern histograms of temporal texture images whose columns
  are the per-frame projections (motion along each axis over time), after
  optional temporal normalization to a fixed length T.

The clip descriptor is the ordered concatenation of all m*n*4 normalized
group histograms: the STLBP-IIP feature of a clip.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from . import encoding
from .encoding import LbpParams2D, MASK_SIZES
from .errors import ConfigError, DataError
from .projection import Region, horizontal_projection, vertical_projection

PLANES = ("XYH", "XYV", "XT", "YT")
SOURCES = ("improved", "original", "framediff")


@dataclass(frozen=True)
class DescriptorConfig:
    blocks_m: int = 7          # block rows
    blocks_n: int = 3          # block columns
    mask_w: int = 9            # 1D mask size
    lbp_samples: int = 8       # circle samples for the temporal planes
    lbp_radius: int = 3        # circle radius
    temporal_length: int = 25  # T; 0 disables temporal normalization
    source: str = "improved"   # improved | original | framediff

    def __post_init__(self):
        if self.blocks_m < 1 or self.blocks_n < 1:
            raise ConfigError("blocks_m and blocks_n must be >= 1")
        if self.mask_w not in MASK_SIZES:
            raise ConfigError(f"mask_w must be odd in {MASK_SIZES}, got {self.mask_w}")
        if self.lbp_samples < 4:
            raise ConfigError("lbp_samples must be >= 4")
        if self.lbp_radius < 1:
            raise ConfigError("lbp_radius must be >= 1")
        if self.temporal_length != 0 and self.temporal_length < 2 * self.lbp_radius + 1:
            raise ConfigError(
                "temporal_length must be 0 or >= 2*lbp_radius + 1, got "
                f"{self.temporal_length}"
            )
        if self.source not in SOURCES:
            raise ConfigError(f"source must be one of {SOURCES}, got {self.source!r}")

    @property
    def n_groups(self) -> int:
        return self.blocks_m * self.blocks_n * len(PLANES)

    @property
    def lbp_params(self) -> LbpParams2D:
        return LbpParams2D(self.lbp_samples, self.lbp_radius)

    def plane_bins(self, plane: str) -> int:
        return 1 << (self.mask_w - 1) if plane in ("XYH", "XYV") else 1 << self.lbp_samples

    def validate_frame_shape(self, frame_shape):
        h, w = frame_shape
        need = max(self.mask_w, 2 * self.lbp_radius + 1)
        min_h = h // self.blocks_m
        min_w = w // self.blocks_n
        if min_h < need or min_w < need:
            raise ConfigError(
                f"{self.blocks_m}x{self.blocks_n} blocks on {w}x{h} frames give "
                f"{min_w}x{min_h} blocks, smaller than the required {need}"
            )

    def fingerprint(self) -> str:
        text = ";".join(
            f"{k}={getattr(self, k)}"
            for k in (
                "blocks_m", "blocks_n", "mask_w", "lbp_samples", "lbp_radius",
                "temporal_length", "source",
            )
        ) + ";hist=normalized"
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class GroupFeature:
    """One (block, plane) normalized histogram, the unit of selection."""

    block: int
    plane: str
    histogram: np.ndarray


@dataclass
class ClipDescriptor:
    clip_id: str
    groups: list
    fingerprint: str

    def histograms(self) -> list:
        return [g.histogram for g in self.groups]

    def concatenated(self, group_indices=None) -> np.ndarray:
        """Concatenation of group histograms, ascending group order."""
        if group_indices is None:
            picked = self.groups
        else:
            picked = [self.groups[i] for i in sorted(group_indices)]
        return np.concatenate([g.histogram for g in picked])


def block_regions(frame_shape, m: int, n: int, min_size: int = 1) -> list:
    """Partition an (H, W) frame into m x n rectangles, row-major; remainder
    pixels go to the last block row/column."""
    h, w = frame_shape
    if m < 1 or n < 1:
        raise ConfigError("block counts must be >= 1")
    bh, bw = h // m, w // n
    if bh < min_size or bw < min_size:
        raise ConfigError(
            f"{m}x{n} blocks on {w}x{h} frame are {bw}x{bh}, below minimum {min_size}"
        )
    regions = []
    for i in range(m):
        y1 = i * bh
        y2 = (i + 1) * bh if i < m - 1 else h
        for j in range(n):
            x1 = j * bw
            x2 = (j + 1) * bw if j < n - 1 else w
            regions.append(Region(x1, x2, y1, y2))
    return regions


def spatial_histograms(frames, region: Region, mask_w: int):
    """Accumulate 1D-pattern histograms of per-frame projections over a region.

    Returns the normalized (horizontal, vertical) histogram pair: the XYH and
    XYV group features of the block.
    """
    stack = np.asarray(frames, dtype=np.float64)
    if stack.ndim != 3:
        raise ValueError(f"expected (T, H, W) frames, got shape {stack.shape}")
    bins = 1 << (mask_w - 1)
    acc_h = np.zeros(bins)
    acc_v = np.zeros(bins)
    for f in stack:
        acc_h += encoding.onedlbp_histogram(horizontal_projection(f, region), mask_w)
        acc_v += encoding.onedlbp_histogram(vertical_projection(f, region), mask_w)
    return encoding.normalize(acc_h), encoding.normalize(acc_v)


def temporal_texture(frames, region: Region, plane: str) -> np.ndarray:
    """Stack per-frame projections as columns of a (space x time) image.

    YT uses horizontal projections (rows = y positions), XT vertical ones
    (rows = x positions).
    """
    stack = np.asarray(frames, dtype=np.float64)
    if stack.ndim != 3:
        raise ValueError(f"expected (T, H, W) frames, got shape {stack.shape}")
    if stack.shape[0] < 2:
        raise ValueError("temporal texture needs at least 2 frames")
    if plane == "YT":
        cols = [horizontal_projection(f, region) for f in stack]
    elif plane == "XT":
        cols = [vertical_projection(f, region) for f in stack]
    else:
        raise ValueError(f"plane must be XT or YT, got {plane!r}")
    return np.stack(cols, axis=1)


def temporal_normalize(image, length: int) -> np.ndarray:
    """Resample each row to `length` columns by linear interpolation."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("temporal texture images are 2D")
    t = img.shape[1]
    if t < 2:
        raise ValueError("cannot resample a single-column image")
    if length < 2:
        raise ValueError("normalized length must be >= 2")
    positions = np.linspace(0.0, t - 1, length)
    src = np.arange(t, dtype=np.float64)
    out = np.empty((img.shape[0], length))
    for i in range(img.shape[0]):
        out[i] = np.interp(positions, src, img[i])
    return out


def motion_frames(clip, decomposition, source: str) -> np.ndarray:
    """Frame stack the descriptor encodes: sparse parts, raw frames, or
    consecutive-frame differences."""
    if source == "improved":
        if decomposition is None:
            raise DataError(f"clip {clip.clip_id!r}: no decomposition available")
        if (
            decomposition.frame_shape != clip.frame_shape
            or decomposition.sparse.shape[1] != clip.n_frames
        ):
            raise DataError(
                f"clip {clip.clip_id!r}: decomposition does not match clip dimensions"
            )
        return decomposition.sparse_frames()
    if source == "original":
        return clip.frames
    if source == "framediff":
        return np.diff(clip.frames, axis=0)
    raise ConfigError(f"unknown motion source {source!r}")


def extract_descriptor(clip, decomposition, cfg: DescriptorConfig) -> ClipDescriptor:
    """Compute the full ordered group-feature descriptor of one clip."""
    cfg.validate_frame_shape(clip.frame_shape)
    frames = motion_frames(clip, decomposition, cfg.source)
    if cfg.temporal_length == 0 and frames.shape[0] < 2 * cfg.lbp_radius + 1:
        raise DataError(
            f"clip {clip.clip_id!r}: {frames.shape[0]} motion frames are too few "
            f"for radius {cfg.lbp_radius} without temporal normalization"
        )
    regions = block_regions(clip.frame_shape, cfg.blocks_m, cfg.blocks_n, cfg.mask_w)
    params = cfg.lbp_params
    groups = []
    for k, region in enumerate(regions):
        try:
            f_xyh, f_xyv = spatial_histograms(frames, region, cfg.mask_w)
        except ValueError as e:
            raise DataError(f"clip {clip.clip_id!r} block {k} plane XYH/XYV: {e}") from e
        groups.append(GroupFeature(k, "XYH", f_xyh))
        groups.append(GroupFeature(k, "XYV", f_xyv))
        for plane in ("XT", "YT"):
            try:
                img = temporal_texture(frames, region, plane)
                if cfg.temporal_length:
                    img = temporal_normalize(img, cfg.temporal_length)
                hist = encoding.normalize(encoding.lbp2d_histogram(img, params))
            except ValueError as e:
                raise DataError(
                    f"clip {clip.clip_id!r} block {k} plane {plane}: {e}"
                ) from e
            groups.append(GroupFeature(k, plane, hist))
    return ClipDescriptor(clip.clip_id, groups, cfg.fingerprint())
