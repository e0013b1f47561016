"""Grayscale video sequences and the on-disk directory layout.

Videos live at ``<root>/<video_id>/%06d.png`` as 8-bit grayscale; RGB files
are converted on load. In memory a video is a float array in [0, 1].
"""

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import DataError


@dataclass
class VideoSequence:
    video_id: str
    frames: np.ndarray = field(repr=False)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 3:
            raise ValueError(
                f"frames must be [n, height, width], got shape {frames.shape}"
            )
        if frames.size and (frames.min() < 0.0 or frames.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")
        self.frames = frames

    def __len__(self):
        return self.frames.shape[0]

    @property
    def height(self):
        return self.frames.shape[1]

    @property
    def width(self):
        return self.frames.shape[2]


def frame_filename(index):
    return f"{index:06d}.png"


def write_video_dir(root, video: VideoSequence):
    """Save a video as 8-bit grayscale PNG frames under root/video_id/."""
    out = os.path.join(root, video.video_id)
    os.makedirs(out, exist_ok=True)
    for i, frame in enumerate(video.frames):
        data = np.clip(np.round(frame * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(data, mode="L").save(os.path.join(out, frame_filename(i)))
    return out


def load_video_dir(root, video_id):
    """Load the PNG frames of one video, sorted by frame number."""
    directory = os.path.join(root, video_id)
    if not os.path.isdir(directory):
        raise DataError(f"no video directory at {directory}")
    names = sorted(n for n in os.listdir(directory) if n.endswith(".png"))
    if not names:
        raise DataError(f"{directory}: contains no .png frames")
    frames = []
    for name in names:
        with Image.open(os.path.join(directory, name)) as img:
            frames.append(np.asarray(img.convert("L"), dtype=np.float32) / 255.0)
    return VideoSequence(video_id=video_id, frames=np.stack(frames))


def list_videos(root):
    """Sorted video ids found under a dataset root."""
    if not os.path.isdir(root):
        raise DataError(f"no dataset directory at {root}")
    return sorted(
        name for name in os.listdir(root)
        if os.path.isdir(os.path.join(root, name))
    )
