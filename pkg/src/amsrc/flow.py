"""Dense optical flow: a classical block-matching estimator and a
precomputed-file backend, plus the raw flow file format.

Flow maps are [2, H, W] float32 arrays holding per-pixel displacement
(dx, dy) in pixels: channel 0 moves right along x/columns, channel 1 down
along y/rows.
"""

import os
import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError
from .validation import check_same_shape


def _downsample(img):
    """2x2 box downsample, cropping an odd trailing row/column."""
    h, w = img.shape
    img = img[: h - h % 2, : w - w % 2]
    return 0.25 * (img[0::2, 0::2] + img[0::2, 1::2]
                   + img[1::2, 0::2] + img[1::2, 1::2])


def _integer_shift(img, dx, dy):
    """img sampled at (y+dy, x+dx) with border replication."""
    h, w = img.shape
    pad = max(abs(dx), abs(dy))
    if pad == 0:
        return img
    padded = np.pad(img, pad, mode="edge")
    return padded[pad + dy: pad + dy + h, pad + dx: pad + dx + w]


def _warp(img, flow_x, flow_y):
    """img sampled at per-pixel displaced coordinates (bilinear, clamped)."""
    h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return ndimage.map_coordinates(img, [yy + flow_y, xx + flow_x],
                                   order=1, mode="nearest")


def _candidate_offsets(radius, step=1.0):
    offsets = []
    r = int(round(radius / step))
    for iy in range(-r, r + 1):
        for ix in range(-r, r + 1):
            dx, dy = ix * step, iy * step
            offsets.append((dx * dx + dy * dy, abs(dy), abs(dx), dy, dx))
    offsets.sort()
    return [(dx, dy) for _, _, _, dy, dx in offsets]


_MAGNITUDE_PENALTY = 1e-5
_FLAT_WINDOW_VAR = 1e-8


def _window_variance(img, window):
    mean = ndimage.uniform_filter(img, size=window, mode="nearest")
    mean_sq = ndimage.uniform_filter(img ** 2, size=window, mode="nearest")
    return np.maximum(mean_sq - mean ** 2, 0.0)


def _match_residual(ref, moving, base_x, base_y, radius, window, step=1.0):
    """Per-pixel residual displacement of `moving` toward `ref`.

    The matching cost carries a tiny penalty on the accumulated displacement
    magnitude (base + residual), so near-ties on weak texture resolve toward
    small motion instead of amplifying across pyramid levels. Windows of
    `ref` with no texture at all are unmatchable and get zero total flow.
    """
    best_cost = np.full(ref.shape, np.inf)
    best_dx = np.zeros(ref.shape, dtype=np.float64)
    best_dy = np.zeros(ref.shape, dtype=np.float64)
    for dx, dy in _candidate_offsets(radius, step):
        if step == 1.0:
            shifted = _integer_shift(moving, int(dx), int(dy))
        else:
            shifted = _warp(moving, np.full(ref.shape, dx), np.full(ref.shape, dy))
        cost = ndimage.uniform_filter((ref - shifted).astype(np.float64) ** 2,
                                      size=window, mode="nearest")
        cost += _MAGNITUDE_PENALTY * ((base_x + dx) ** 2 + (base_y + dy) ** 2)
        better = cost < best_cost
        best_cost[better] = cost[better]
        best_dx[better] = dx
        best_dy[better] = dy
    flat = _window_variance(ref, window) < _FLAT_WINDOW_VAR
    total_x = base_x + best_dx
    total_y = base_y + best_dy
    total_x[flat] = 0.0
    total_y[flat] = 0.0
    return total_x, total_y


def estimate_flow(frame_a, frame_b, window=7, max_displacement=8):
    """Coarse-to-fine block matching with half-pixel refinement.

    Matches `window` x `window` neighborhoods of frame_a in frame_b over a
    pyramid deep enough to cover `max_displacement` pixels, then refines the
    finest level on a half-pixel grid.
    """
    frame_a = np.asarray(frame_a, dtype=np.float64)
    frame_b = np.asarray(frame_b, dtype=np.float64)
    check_same_shape(frame_a, frame_b, ("frame_a", "frame_b"))
    if frame_a.ndim != 2:
        raise ValueError(f"expected 2-d frames, got ndim={frame_a.ndim}")

    radius = 2
    n_levels = 1
    while (radius * 2 ** (n_levels - 1) < max_displacement
           and min(frame_a.shape) // 2 ** n_levels >= max(8, window)):
        n_levels += 1
    pyr_a, pyr_b = [frame_a], [frame_b]
    for _ in range(n_levels - 1):
        pyr_a.append(_downsample(pyr_a[-1]))
        pyr_b.append(_downsample(pyr_b[-1]))

    flow_x = np.zeros(pyr_a[-1].shape, dtype=np.float64)
    flow_y = np.zeros(pyr_a[-1].shape, dtype=np.float64)
    for level in range(n_levels - 1, -1, -1):
        a, b = pyr_a[level], pyr_b[level]
        if flow_x.shape != a.shape:
            flow_x = 2.0 * np.repeat(np.repeat(flow_x, 2, axis=0), 2, axis=1)[
                : a.shape[0], : a.shape[1]]
            flow_y = 2.0 * np.repeat(np.repeat(flow_y, 2, axis=0), 2, axis=1)[
                : a.shape[0], : a.shape[1]]
            pad_h = a.shape[0] - flow_x.shape[0]
            pad_w = a.shape[1] - flow_x.shape[1]
            if pad_h or pad_w:
                flow_x = np.pad(flow_x, ((0, pad_h), (0, pad_w)), mode="edge")
                flow_y = np.pad(flow_y, ((0, pad_h), (0, pad_w)), mode="edge")
        warped = _warp(b, flow_x, flow_y)
        flow_x, flow_y = _match_residual(a, warped, flow_x, flow_y,
                                         radius=radius, window=window)

    warped = _warp(frame_b, flow_x, flow_y)
    flow_x, flow_y = _match_residual(frame_a, warped, flow_x, flow_y,
                                     radius=0.5, window=window, step=0.5)
    return np.stack([flow_x, flow_y]).astype(np.float32)


def write_flow_file(path, flow):
    """Raw flow format: little-endian u32 height, u32 width, then
    height*width*2 float32 values in (dx, dy) row-major order."""
    flow = np.asarray(flow, dtype=np.float32)
    if flow.ndim != 3 or flow.shape[0] != 2:
        raise ValueError(f"flow must be [2, H, W], got {flow.shape}")
    h, w = flow.shape[1:]
    interleaved = np.ascontiguousarray(np.moveaxis(flow, 0, -1), dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", h, w))
        fh.write(interleaved.tobytes())


def read_flow_file(path):
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise DataError(f"{path}: truncated flow header")
        h, w = struct.unpack("<II", header)
        data = fh.read()
    expected = h * w * 2 * 4
    if len(data) != expected:
        raise DataError(
            f"{path}: expected {expected} payload bytes for {h}x{w} flow, "
            f"got {len(data)}"
        )
    interleaved = np.frombuffer(data, dtype="<f4").reshape(h, w, 2)
    return np.ascontiguousarray(np.moveaxis(interleaved, -1, 0))


def flow_filename(index):
    return f"{index:06d}.flo"


@dataclass(frozen=True)
class ClassicalFlowBackend:
    """Block-matching estimator; ignores video identity."""

    window: int = 7
    max_displacement: int = 8
    kind = "classical"

    def pair_flow(self, video_id, index, frame_a, frame_b):
        return estimate_flow(frame_a, frame_b, window=self.window,
                             max_displacement=self.max_displacement)


@dataclass(frozen=True)
class PrecomputedFlowBackend:
    """Reads stored flow files; file k holds the flow from frame k to k+1."""

    source_path: str
    kind = "precomputed"

    def pair_flow(self, video_id, index, frame_a, frame_b):
        path = os.path.join(self.source_path, video_id, flow_filename(index))
        if not os.path.isfile(path):
            raise DataError(
                f"no stored flow for video {video_id!r} frame pair "
                f"({index}, {index + 1}) at {path}"
            )
        return read_flow_file(path)


def make_flow_backend(kind, source_path=None, window=7, max_displacement=8):
    if kind == "classical":
        return ClassicalFlowBackend(window=window, max_displacement=max_displacement)
    if kind == "precomputed":
        if not source_path:
            raise DataError("precomputed flow backend requires a source path")
        return PrecomputedFlowBackend(source_path=source_path)
    raise DataError(f"unknown flow backend kind: {kind!r}")


def compute_flow(frame_a, frame_b, backend=None, video_id="", index=0):
    """Displacement map from frame_a to frame_b under the given backend
    (classical block matching when none is given)."""
    if backend is None:
        backend = ClassicalFlowBackend()
    return backend.pair_flow(video_id, index, np.asarray(frame_a),
                             np.asarray(frame_b))


def video_flows(video, backend=None):
    """All consecutive-pair flows of a video as one [n-1, 2, H, W] array."""
    if backend is None:
        backend = ClassicalFlowBackend()
    n = len(video)
    if n < 2:
        return np.zeros((0, 2, video.height, video.width), dtype=np.float32)
    return np.stack([
        compute_flow(video.frames[k], video.frames[k + 1], backend,
                     video_id=video.video_id, index=k)
        for k in range(n - 1)
    ])
