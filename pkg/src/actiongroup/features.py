"""Temporal-gradient interest points and 3-D gradient patches.

The only signal is the absolute difference between consecutive frames.
A voxel becomes an interest point when its gradient exceeds a threshold
and it lies inside the person's dilated mask; the patch around it,
vectorized with x fastest, then y, then time, is one training sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .errors import ConfigurationError, EmptyPatchSetError
from .ingest import FrameSequence, MaskSequence

__all__ = [
    "FeatureConfig",
    "GradientVolume",
    "InterestPoint",
    "InterestPoints",
    "PatchSet",
    "temporal_gradient",
    "dilate_mask",
    "detect_interest_points",
    "extract_patchset",
    "equalize_patch_counts",
    "subsample_indices",
    "person_stream",
    "derived_seed",
]


@dataclass(frozen=True)
class FeatureConfig:
    eta: float = 0.08
    spatial_extent: int = 15
    temporal_extent: int = 7
    dilation_radius: int = 5
    n_max: int = 15000
    seed: int = 0
    threshold_mode: str = "fixed"  # or "percentile"
    percentile: float = 10.0  # share (in %) of in-mask voxels kept in percentile mode

    def __post_init__(self):
        for name in ("spatial_extent", "temporal_extent"):
            ext = getattr(self, name)
            if ext < 3 or ext % 2 == 0:
                raise ConfigurationError(f"{name} must be odd and >= 3")
        if not 0 < self.eta < 1:
            raise ConfigurationError("eta must lie in (0, 1)")
        if self.n_max < 1:
            raise ConfigurationError("n_max must be >= 1")
        if self.dilation_radius < 0:
            raise ConfigurationError("dilation_radius must be >= 0")
        if self.threshold_mode not in ("fixed", "percentile"):
            raise ConfigurationError("threshold_mode must be 'fixed' or 'percentile'")
        if not 0 < self.percentile <= 100:
            raise ConfigurationError("percentile must lie in (0, 100]")

    @property
    def patch_dim(self) -> int:
        return self.spatial_extent**2 * self.temporal_extent


@dataclass
class GradientVolume:
    """``values[f, y, x] = |I[f+1, y, x] - I[f, y, x]|``."""

    values: np.ndarray

    @property
    def depth(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


class InterestPoint(NamedTuple):
    x: int
    y: int
    f: int
    person_id: int


@dataclass
class InterestPoints:
    """Interest points of one person, stored column-wise in raster order."""

    x: np.ndarray
    y: np.ndarray
    f: np.ndarray
    person_id: int

    def __len__(self) -> int:
        return len(self.x)

    def __iter__(self) -> Iterator[InterestPoint]:
        for x, y, f in zip(self.x, self.y, self.f):
            yield InterestPoint(int(x), int(y), int(f), self.person_id)

    def take(self, idx) -> "InterestPoints":
        return InterestPoints(self.x[idx], self.y[idx], self.f[idx], self.person_id)

    @classmethod
    def from_list(cls, points: Sequence[InterestPoint], person_id: Optional[int] = None):
        arr = np.array([(p.x, p.y, p.f) for p in points], dtype=np.int64).reshape(-1, 3)
        pid = person_id if person_id is not None else (points[0].person_id if points else 0)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], pid)


@dataclass
class PatchSet:
    """Training patches of one person in one interval, one per column."""

    data: np.ndarray
    person_id: Optional[int] = None
    interval: Optional[int] = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError("patch data must be a 2-D (m, n) matrix")
        if self.data.size and (self.data.min() < 0 or not np.all(np.isfinite(self.data))):
            raise ValueError("patch entries must be finite and nonnegative")

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


def temporal_gradient(frames: FrameSequence) -> GradientVolume:
    return GradientVolume(np.abs(np.diff(frames.pixels, axis=0)))


def dilate_mask(mask: MaskSequence, radius: int) -> MaskSequence:
    """Dilate every frame by a square of half-width ``radius``.

    Boxes grow by ``radius`` on each side and are clamped to the frame.
    """
    if radius < 0:
        raise ConfigurationError("dilation radius must be >= 0")
    if radius == 0:
        return mask
    if mask.masks is not None:
        size = (1, 2 * radius + 1, 2 * radius + 1)
        grown = ndimage.maximum_filter(mask.masks, size=size, mode="constant", cval=False)
        return MaskSequence(mask.person_id, mask.width, mask.height, masks=grown)
    boxes = mask.boxes.copy()
    empty = (boxes[:, 2] <= 0) | (boxes[:, 3] <= 0)
    x0 = np.maximum(boxes[:, 0] - radius, 0)
    y0 = np.maximum(boxes[:, 1] - radius, 0)
    x1 = np.minimum(boxes[:, 0] + boxes[:, 2] + radius, mask.width)
    y1 = np.minimum(boxes[:, 1] + boxes[:, 3] + radius, mask.height)
    grown = np.column_stack([x0, y0, x1 - x0, y1 - y0])
    grown[empty] = boxes[empty]
    return MaskSequence(mask.person_id, mask.width, mask.height, boxes=grown)


def _window_fits(grad: GradientVolume, cfg: FeatureConfig) -> np.ndarray:
    hs, ht = cfg.spatial_extent // 2, cfg.temporal_extent // 2
    fits = np.zeros(grad.values.shape, dtype=bool)
    fits[ht : grad.depth - ht, hs : grad.height - hs, hs : grad.width - hs] = True
    return fits


def detect_interest_points(grad: GradientVolume, mask: MaskSequence,
                           cfg: FeatureConfig) -> InterestPoints:
    """Voxels above threshold, inside the (already dilated) mask, whose whole
    patch window fits in the volume.

    Gradient frame ``f`` is tested against the mask of frame ``f``.  Points
    come out in raster order: time, then y, then x.
    """
    support = np.stack([mask.frame(f) for f in range(grad.depth)])
    if support.shape != grad.values.shape:
        raise ValueError("mask does not match the gradient volume")
    if cfg.threshold_mode == "percentile":
        inside = grad.values[support]
        if inside.size == 0:
            thresh = np.inf
        else:
            thresh = np.percentile(inside, 100.0 - cfg.percentile)
    else:
        thresh = cfg.eta
    keep = (grad.values > thresh) & support & _window_fits(grad, cfg)
    f, y, x = np.nonzero(keep)
    return InterestPoints(x, y, f, mask.person_id)


def extract_patchset(grad: GradientVolume, points, cfg: FeatureConfig,
                     interval: Optional[int] = None) -> PatchSet:
    """Stack the centered gradient window of every point as a column."""
    if not isinstance(points, InterestPoints):
        points = InterestPoints.from_list(list(points))
    if len(points) == 0:
        raise EmptyPatchSetError(f"person {points.person_id}: no interest points")
    s, t = cfg.spatial_extent, cfg.temporal_extent
    hs, ht = s // 2, t // 2
    f0, y0, x0 = points.f - ht, points.y - hs, points.x - hs
    if (f0.min() < 0 or y0.min() < 0 or x0.min() < 0 or (f0 + t).max() > grad.depth
            or (y0 + s).max() > grad.height or (x0 + s).max() > grad.width):
        raise ValueError("some patch windows do not fit inside the volume")
    windows = sliding_window_view(grad.values, (t, s, s))
    cols = windows[f0, y0, x0].reshape(len(points), t * s * s)
    return PatchSet(np.ascontiguousarray(cols.T), person_id=points.person_id, interval=interval)


def _unit_sequence(seed: int, person_id, interval) -> np.random.SeedSequence:
    key = (int(person_id or 0), int(interval or 0))
    return np.random.SeedSequence(int(seed), spawn_key=key)


def person_stream(seed: int, person_id, interval=None) -> np.random.Generator:
    """Independent RNG stream for one (person, interval) under a master seed."""
    return np.random.default_rng(_unit_sequence(seed, person_id, interval))


def derived_seed(seed: int, person_id, interval=None) -> int:
    """Integer seed of one (person, interval) problem under a master seed."""
    return int(_unit_sequence(seed, person_id, interval).generate_state(1)[0])


def subsample_indices(count: int, n: int, seed: int, person_id, interval=None) -> np.ndarray:
    """Sorted uniform choice of ``n`` out of ``count`` indices, without
    replacement; the identity when ``n == count``."""
    if n >= count:
        return np.arange(count)
    rng = person_stream(seed, person_id, interval)
    return np.sort(rng.choice(count, size=n, replace=False))


def equalize_patch_counts(sets: Sequence[PatchSet], n_max: int, seed: int) -> list:
    """Subsample every set to ``min(min_j n_j, n_max)`` columns."""
    if any(ps.n == 0 for ps in sets):
        raise EmptyPatchSetError("cannot equalize an empty patch set")
    if not sets:
        return []
    n = min(min(ps.n for ps in sets), n_max)
    out = []
    for ps in sets:
        if ps.n == n:
            out.append(ps)
            continue
        idx = subsample_indices(ps.n, n, seed, ps.person_id, ps.interval)
        out.append(PatchSet(ps.data[:, idx], ps.person_id, ps.interval))
    return out
