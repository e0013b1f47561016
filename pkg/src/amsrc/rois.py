"""Foreground boxes: threshold-based extraction and the RoI text format."""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError
from .video import VideoSequence


@dataclass(frozen=True)
class RoiBox:
    """Axis-aligned box with top-left corner (x, y) and size (w, h) pixels."""

    frame_index: int
    x: int
    y: int
    w: int
    h: int
    object_id: str
    video_id: str = ""

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")
        if self.w < 1 or self.h < 1:
            raise ValueError(f"box size must be >= 1, got w={self.w} h={self.h}")


@dataclass(frozen=True)
class ForegroundParams:
    """Settings of the threshold-based foreground extractor."""

    threshold: float = 0.12
    min_area: int = 9

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        if self.min_area < 1:
            raise ValueError("min_area must be >= 1")


_CONNECT_8 = np.ones((3, 3), dtype=bool)


def extract_rois(video: VideoSequence, params: ForegroundParams = ForegroundParams()):
    """Boxes of connected foreground regions against the per-video median frame.

    A pixel is foreground when its absolute difference to the temporal
    median exceeds the threshold; 8-connected components with at least
    `min_area` pixels become boxes. Deterministic for fixed input.
    """
    if len(video) == 0:
        raise ValueError("empty input video")
    median = np.median(video.frames, axis=0)
    boxes = []
    for frame_index, frame in enumerate(video.frames):
        mask = np.abs(frame - median) > params.threshold
        labeled, n_components = ndimage.label(mask, structure=_CONNECT_8)
        if n_components == 0:
            continue
        areas = ndimage.sum_labels(mask, labeled, index=np.arange(1, n_components + 1))
        slices = ndimage.find_objects(labeled)
        found = []
        for component, sl in enumerate(slices):
            if areas[component] < params.min_area:
                continue
            ys, xs = sl
            found.append((ys.start, xs.start,
                          xs.stop - xs.start, ys.stop - ys.start))
        found.sort()
        for k, (y, x, w, h) in enumerate(found):
            boxes.append(RoiBox(
                frame_index=frame_index, x=int(x), y=int(y), w=int(w), h=int(h),
                object_id=f"{frame_index:06d}-{k:02d}", video_id=video.video_id,
            ))
    return boxes


def save_rois(path, boxes):
    """Write boxes in the plain-text format:
    ``video_id frame_index x y w h object_id`` per line."""
    with open(path, "w") as fh:
        for box in boxes:
            fh.write(f"{box.video_id} {box.frame_index} {box.x} {box.y} "
                     f"{box.w} {box.h} {box.object_id}\n")


def load_rois(path):
    """Parse the RoI text file; boxes are returned exactly as stored."""
    boxes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 7:
                raise DataError(
                    f"{path}: line {lineno}: expected 7 whitespace-separated "
                    f"fields, got {len(parts)}"
                )
            video_id, fi, x, y, w, h, object_id = parts
            try:
                box = RoiBox(frame_index=int(fi), x=int(x), y=int(y),
                             w=int(w), h=int(h), object_id=object_id,
                             video_id=video_id)
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            boxes.append(box)
    return boxes


def square_and_clamp(box: RoiBox, height, width):
    """Expand a box to a square of side max(w, h) and clamp it into the frame.

    The square keeps the box center when possible; boxes hanging over the
    border are shifted back inside, and sides longer than the frame are cut
    to it. Returns (x, y, side_w, side_h) in pixels.
    """
    side = max(box.w, box.h)
    cx = box.x + box.w / 2.0
    cy = box.y + box.h / 2.0
    side_w = min(side, width)
    side_h = min(side, height)
    x = int(round(cx - side_w / 2.0))
    y = int(round(cy - side_h / 2.0))
    x = max(0, min(x, width - side_w))
    y = max(0, min(y, height - side_h))
    return x, y, side_w, side_h
