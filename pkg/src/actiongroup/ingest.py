"""Frame and mask loading, and slicing of a sequence into analysis intervals."""

from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .errors import (
    ConfigurationError,
    DataError,
    DimensionMismatchError,
    FrameReadError,
    MalformedMaskError,
)

__all__ = [
    "FrameSequence",
    "MaskSequence",
    "Interval",
    "load_frames",
    "write_frames",
    "load_masks",
    "slice_intervals",
    "MIN_INTERVAL_FRAMES",
]

IMAGE_SUFFIXES = {".pgm", ".png", ".pnm", ".ppm", ".bmp", ".tif", ".tiff"}
MIN_INTERVAL_FRAMES = 8
MIN_FRAME_SIDE = 15


@dataclass
class FrameSequence:
    """Grayscale video, ``pixels[f, y, x]`` in [0, 1]."""

    pixels: np.ndarray
    fps: float

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 3:
            raise DimensionMismatchError("pixels must have shape (frames, height, width)")
        if self.frame_count < 2:
            raise DataError("a frame sequence needs at least 2 frames")
        if self.width < MIN_FRAME_SIDE or self.height < MIN_FRAME_SIDE:
            raise DataError(f"frames must be at least {MIN_FRAME_SIDE} pixels on each side")
        if self.pixels.min() < 0 or self.pixels.max() > 1:
            raise DataError("pixel values must lie in [0, 1]")
        if self.fps <= 0:
            raise ConfigurationError("fps must be positive")

    @property
    def frame_count(self) -> int:
        return self.pixels.shape[0]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]

    def window(self, interval: "Interval") -> "FrameSequence":
        sl = slice(interval.start_frame, interval.start_frame + interval.length)
        return FrameSequence(self.pixels[sl], self.fps)


@dataclass
class MaskSequence:
    """Per-frame support of one person, either dense or as boxes.

    Exactly one of ``masks`` (bool, frames x height x width) and ``boxes``
    (int, frames x 4 as ``x, y, w, h``; zero width or height means the person
    is not visible in that frame) is set.
    """

    person_id: int
    width: int
    height: int
    masks: Optional[np.ndarray] = None
    boxes: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.masks is None) == (self.boxes is None):
            raise ValueError("give exactly one of masks or boxes")
        if self.masks is not None:
            self.masks = np.asarray(self.masks, dtype=bool)
            if self.masks.shape[1:] != (self.height, self.width):
                raise DimensionMismatchError("mask frames do not match the declared size")
        else:
            self.boxes = np.asarray(self.boxes, dtype=np.int64).reshape(-1, 4)

    @property
    def frame_count(self) -> int:
        return len(self.masks) if self.masks is not None else len(self.boxes)

    def frame(self, f: int) -> np.ndarray:
        if self.masks is not None:
            return self.masks[f]
        out = np.zeros((self.height, self.width), dtype=bool)
        x, y, w, h = self.boxes[f]
        if w > 0 and h > 0:
            out[y : y + h, x : x + w] = True
        return out

    def dense(self) -> np.ndarray:
        if self.masks is not None:
            return self.masks
        return np.stack([self.frame(f) for f in range(self.frame_count)])

    def window(self, interval: "Interval") -> "MaskSequence":
        sl = slice(interval.start_frame, interval.start_frame + interval.length)
        if self.masks is not None:
            return MaskSequence(self.person_id, self.width, self.height, masks=self.masks[sl])
        return MaskSequence(self.person_id, self.width, self.height, boxes=self.boxes[sl])


@dataclass(frozen=True)
class Interval:
    start_frame: int
    length: int
    index: int


def _image_files(path: Path) -> list:
    if not path.is_dir():
        raise FrameReadError(f"not a directory: {path}")
    return sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _max_value(img: Image.Image) -> float:
    if img.mode == "1":
        return 1.0
    if img.mode.startswith("I;16") or img.mode in ("I", "I;16B"):
        return 65535.0
    if img.mode == "F":
        return 1.0
    return 255.0


def _read_gray(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            img.load()
            scale = _max_value(img)
            if img.mode in ("RGB", "RGBA", "P", "LA", "CMYK", "YCbCr"):
                rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
                return rgb.mean(axis=2) / scale
            return np.asarray(img, dtype=np.float64) / scale
    except (OSError, ValueError) as exc:
        raise FrameReadError(f"cannot read image {path}: {exc}") from exc


def load_frames(path, fps: float, temporal_subsample: int = 1) -> FrameSequence:
    """Load a directory of grayscale images as a frame sequence.

    Files are taken in lexicographic order.  Color images are reduced to the
    mean of their channels.  ``temporal_subsample`` keeps every n-th frame.
    """
    if temporal_subsample < 1:
        raise ConfigurationError("temporal_subsample must be >= 1")
    files = _image_files(Path(path))[::temporal_subsample]
    if len(files) < 2:
        raise DataError(f"{path}: need at least 2 frames, found {len(files)}")
    frames = []
    for f in files:
        img = _read_gray(f)
        if frames and img.shape != frames[0].shape:
            raise DimensionMismatchError(
                f"{f.name} is {img.shape[1]}x{img.shape[0]}, expected "
                f"{frames[0].shape[1]}x{frames[0].shape[0]}"
            )
        frames.append(img)
    return FrameSequence(np.stack(frames), fps)


def write_frames(frames: FrameSequence, path, bits: int = 8) -> list:
    """Write frames as PGM files ``frame_00000.pgm`` ...; returns the paths."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    maxval = (1 << bits) - 1
    dtype = np.uint8 if bits == 8 else np.uint16
    written = []
    for f, img in enumerate(frames.pixels):
        data = np.rint(img * maxval).astype(dtype)
        target = out / f"frame_{f:05d}.pgm"
        header = f"P5\n{frames.width} {frames.height}\n{maxval}\n".encode("ascii")
        with open(target, "wb") as fh:
            fh.write(header)
            fh.write(data.astype(">u2").tobytes() if bits > 8 else data.tobytes())
        written.append(target)
    return written


def _load_label_masks(path: Path, n_persons: int, frame_count: int) -> list:
    files = _image_files(path)
    if len(files) != frame_count:
        raise DataError(f"{path}: {len(files)} mask images for {frame_count} frames")
    labels = []
    for f in files:
        try:
            with Image.open(f) as img:
                lab = np.asarray(img).astype(np.int64)
        except OSError as exc:
            raise FrameReadError(f"cannot read mask {f}: {exc}") from exc
        if lab.ndim == 3:
            lab = lab[..., 0]
        if lab.max(initial=0) > n_persons or lab.min(initial=0) < 0:
            raise MalformedMaskError(f"{f.name}: label {lab.max()} exceeds person count {n_persons}")
        if labels and lab.shape != labels[0].shape:
            raise DimensionMismatchError(f"{f.name}: mask size differs from earlier masks")
        labels.append(lab)
    stack = np.stack(labels)
    height, width = stack.shape[1:]
    return [
        MaskSequence(p, width, height, masks=(stack == p)) for p in range(1, n_persons + 1)
    ]


def _load_box_csv(path: Path, n_persons: int, frame_count: int, width, height) -> list:
    if width is None or height is None:
        raise ConfigurationError("box masks need the frame width and height")
    boxes = np.zeros((n_persons, frame_count, 4), dtype=np.int64)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FrameReadError(f"cannot read mask file {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        expected = {"frame", "person", "x", "y", "w", "h"}
        if reader.fieldnames is None or not expected <= set(reader.fieldnames):
            raise MalformedMaskError(f"{path}: header must be frame,person,x,y,w,h")
        for lineno, row in enumerate(reader, start=2):
            try:
                f, p, x, y, w, h = (int(float(row[c])) for c in ("frame", "person", "x", "y", "w", "h"))
            except (TypeError, ValueError) as exc:
                raise MalformedMaskError(f"{path}:{lineno}: {exc}") from exc
            if not 1 <= p <= n_persons:
                raise MalformedMaskError(f"{path}:{lineno}: person {p} outside 1..{n_persons}")
            if not 0 <= f < frame_count:
                raise MalformedMaskError(f"{path}:{lineno}: frame {f} outside 0..{frame_count - 1}")
            x0, y0 = max(x, 0), max(y, 0)
            x1, y1 = min(x + w, width), min(y + h, height)
            if (x0, y0, x1, y1) != (x, y, x + w, y + h):
                warnings.warn(f"{path}:{lineno}: box clamped to the frame", stacklevel=2)
            boxes[p - 1, f] = (x0, y0, max(x1 - x0, 0), max(y1 - y0, 0))
    return [MaskSequence(p + 1, width, height, boxes=boxes[p]) for p in range(n_persons)]


def load_masks(path, n_persons: int, frame_count: int, width: Optional[int] = None,
               height: Optional[int] = None) -> list:
    """Load per-person masks from label images or a bounding-box CSV.

    A directory is read as one label image per frame (pixel value = person
    id, 0 = background).  A ``.csv`` file is read as rows of
    ``frame,person,x,y,w,h`` with zero-based frames and one-based persons;
    (frame, person) pairs without a row get an empty mask.
    """
    p = Path(path)
    if not p.exists():
        raise FrameReadError(f"mask path does not exist: {p}")
    if p.is_dir():
        return _load_label_masks(p, n_persons, frame_count)
    return _load_box_csv(p, n_persons, frame_count, width, height)


def slice_intervals(frames: FrameSequence, seconds_per_interval: float) -> list:
    """Tile the sequence with non-overlapping intervals; the tail is dropped."""
    length = int(round(seconds_per_interval * frames.fps))
    if length < MIN_INTERVAL_FRAMES:
        raise ConfigurationError(
            f"{seconds_per_interval}s at {frames.fps} fps gives {length} frames; "
            f"need at least {MIN_INTERVAL_FRAMES}"
        )
    count = frames.frame_count // length
    return [Interval(i * length, length, i) for i in range(count)]
