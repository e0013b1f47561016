"""Object-centric spatio-temporal clips: crop, resize, and batch them.

A clip stacks t input frames, one target frame, and t flow maps, all cropped
to the same squared box and resized to 32x32. Flow map k covers the motion
from input frame k to k+1, the last one from the final input frame to the
target frame.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InsufficientHistoryError
from .rois import RoiBox, square_and_clamp
from .video import VideoSequence

CLIP_SIZE = 32
DEFAULT_T = 4


def resize_bilinear(img, out_h, out_w):
    """Bilinear resize of a 2-d array, sampling at output pixel centers."""
    img = np.asarray(img, dtype=np.float64)
    in_h, in_w = img.shape
    ys = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0, in_h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0, in_w - 1)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1 - wx) + img[np.ix_(y0, x1)] * wx
    bottom = img[np.ix_(y1, x0)] * (1 - wx) + img[np.ix_(y1, x1)] * wx
    return (top * (1 - wy) + bottom * wy).astype(np.float32)


def resize_flow(flow, out_h, out_w):
    """Resize a [2, h, w] flow crop, rescaling displacements by the spatial
    resize factors (flow is a length, not an intensity)."""
    _, in_h, in_w = flow.shape
    dx = resize_bilinear(flow[0], out_h, out_w) * (out_w / in_w)
    dy = resize_bilinear(flow[1], out_h, out_w) * (out_h / in_h)
    return np.stack([dx, dy])


@dataclass
class StClip:
    """One model input: t frames, the target frame, and t flow maps."""

    input_frames: np.ndarray = field(repr=False)
    target_frame: np.ndarray = field(repr=False)
    input_flows: np.ndarray = field(repr=False)
    frame_index: int = 0
    object_id: str = ""
    video_id: str = ""

    def __post_init__(self):
        self.input_frames = np.asarray(self.input_frames, dtype=np.float32)
        self.target_frame = np.asarray(self.target_frame, dtype=np.float32)
        self.input_flows = np.asarray(self.input_flows, dtype=np.float32)
        t = self.input_frames.shape[0] if self.input_frames.ndim == 3 else 0
        size = self.input_frames.shape[-1] if self.input_frames.ndim == 3 else 0
        if self.input_frames.shape != (t, size, size) or t < 1:
            raise ValueError(
                f"input_frames must be [t, s, s], got {self.input_frames.shape}"
            )
        if self.target_frame.shape != (1, size, size):
            raise ValueError(
                f"target_frame must be [1, {size}, {size}], "
                f"got {self.target_frame.shape}"
            )
        if self.input_flows.shape != (t, 2, size, size):
            raise ValueError(
                f"input_flows must be [{t}, 2, {size}, {size}], "
                f"got {self.input_flows.shape}"
            )

    @property
    def t(self):
        return self.input_frames.shape[0]


def build_stc(video: VideoSequence, flows, box: RoiBox, t=DEFAULT_T,
              size=CLIP_SIZE) -> StClip:
    """Crop one clip around a box whose frame is the prediction target.

    Input frames come from indices [frame_index - t, frame_index), the
    target from frame_index, and the t flow maps cover the consecutive
    pairs in between. Raises InsufficientHistoryError when the box sits in
    the first t frames (callers drop such boxes).
    """
    fi = box.frame_index
    if fi < t:
        raise InsufficientHistoryError(
            f"frame {fi} has fewer than t={t} preceding frames"
        )
    if fi >= len(video):
        raise DataError(
            f"box frame {fi} outside video {video.video_id!r} of {len(video)} frames"
        )
    x, y, w, h = square_and_clamp(box, video.height, video.width)
    frame_crops = [
        resize_bilinear(video.frames[k, y:y + h, x:x + w], size, size)
        for k in range(fi - t, fi + 1)
    ]
    flow_crops = [
        resize_flow(np.asarray(flows[k])[:, y:y + h, x:x + w], size, size)
        for k in range(fi - t, fi)
    ]
    return StClip(
        input_frames=np.stack(frame_crops[:-1]),
        target_frame=frame_crops[-1][None],
        input_flows=np.stack(flow_crops),
        frame_index=fi,
        object_id=box.object_id,
        video_id=box.video_id or video.video_id,
    )


def build_clips(video, flows, boxes, t=DEFAULT_T, size=CLIP_SIZE):
    """Clips for every box with enough history; early boxes are dropped."""
    clips = []
    for box in boxes:
        try:
            clips.append(build_stc(video, flows, box, t=t, size=size))
        except InsufficientHistoryError:
            continue
    return clips


@dataclass
class ClipBatch:
    """Stacked clip arrays plus per-clip provenance."""

    input_frames: np.ndarray = field(repr=False)
    target_frames: np.ndarray = field(repr=False)
    input_flows: np.ndarray = field(repr=False)
    frame_indices: np.ndarray = field(repr=False)
    video_ids: list
    object_ids: list

    def __post_init__(self):
        n = len(self.input_frames)
        if not (len(self.target_frames) == len(self.input_flows)
                == len(self.frame_indices) == len(self.video_ids)
                == len(self.object_ids) == n):
            raise ValueError("clip batch fields must have equal length")

    def __len__(self):
        return len(self.input_frames)

    @property
    def t(self):
        return self.input_frames.shape[1]

    @classmethod
    def from_clips(cls, clips):
        clips = list(clips)
        if not clips:
            raise ValueError("cannot build a batch from zero clips")
        return cls(
            input_frames=np.stack([c.input_frames for c in clips]),
            target_frames=np.stack([c.target_frame for c in clips]),
            input_flows=np.stack([c.input_flows for c in clips]),
            frame_indices=np.array([c.frame_index for c in clips], dtype=np.int64),
            video_ids=[c.video_id for c in clips],
            object_ids=[c.object_id for c in clips],
        )

    def subset(self, indices):
        indices = np.asarray(indices)
        return ClipBatch(
            input_frames=self.input_frames[indices],
            target_frames=self.target_frames[indices],
            input_flows=self.input_flows[indices],
            frame_indices=self.frame_indices[indices],
            video_ids=[self.video_ids[i] for i in indices],
            object_ids=[self.object_ids[i] for i in indices],
        )

    def slice(self, start, stop):
        return self.subset(np.arange(start, min(stop, len(self))))

    def save_npz(self, path):
        np.savez_compressed(
            path,
            input_frames=self.input_frames.astype(np.float32),
            target_frames=self.target_frames.astype(np.float32),
            input_flows=self.input_flows.astype(np.float32),
            frame_indices=self.frame_indices,
            video_ids=np.array(self.video_ids),
            object_ids=np.array(self.object_ids),
        )

    @classmethod
    def load_npz(cls, path):
        with np.load(path, allow_pickle=False) as data:
            return cls(
                input_frames=data["input_frames"],
                target_frames=data["target_frames"],
                input_flows=data["input_flows"],
                frame_indices=data["frame_indices"],
                video_ids=[str(v) for v in data["video_ids"]],
                object_ids=[str(v) for v in data["object_ids"]],
            )
