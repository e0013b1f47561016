"""Desk-scale synthetic benchmark: textured sprites on a black background.

Training videos contain only normal sprites (a fixed square shape moving
inside a fixed speed range). Test videos add one anomalous sprite during a
contiguous window: either an unseen shape at a normal speed (appearance
anomaly) or the seen shape at an out-of-range speed (motion anomaly).
Frame labels are 1 exactly when an anomalous sprite is visible.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .video import VideoSequence

APPEARANCE = "appearance"
MOTION = "motion"
NORMAL = "normal"


@dataclass(frozen=True)
class SyntheticConfig:
    n_train_videos: int = 6
    n_test_videos: int = 4
    n_frames: int = 64
    frame_size: int = 64
    sprite_size: int = 12
    sprites_per_video: int = 2
    normal_speed: tuple = (0.8, 1.6)
    anomaly_speed: tuple = (4.0, 6.0)
    anomaly_rate: float = 0.3
    anomaly_start_min: int = 10

    def __post_init__(self):
        if self.frame_size < 2 * self.sprite_size:
            raise ValueError("frame_size must be at least twice the sprite size")
        if not 0.0 <= self.anomaly_rate <= 0.8:
            raise ValueError("anomaly_rate must lie in [0, 0.8]")


@dataclass
class SyntheticDataset:
    train_videos: list
    test_videos: list
    labels: dict
    annotations: dict = field(default_factory=dict)


_TEXTURE_SEEDS = {"square": 11, "diamond": 23}


def _texture(shape, size):
    """Fixed aperiodic per-shape texture; noise keeps window matching
    unambiguous at every offset."""
    noise = np.random.default_rng(_TEXTURE_SEEDS[shape]).random((size + 2, size + 2))
    smooth = (noise[:-2, :-2] + noise[:-2, 1:-1] + noise[:-2, 2:]
              + noise[1:-1, :-2] + noise[1:-1, 1:-1] + noise[1:-1, 2:]
              + noise[2:, :-2] + noise[2:, 1:-1] + noise[2:, 2:]) / 9.0
    lo, hi = smooth.min(), smooth.max()
    return 0.35 + 0.65 * (smooth - lo) / (hi - lo)


def _shape_mask(shape, size):
    if shape == "square":
        return np.ones((size, size))
    if shape == "diamond":
        c = (size - 1) / 2.0
        yy, xx = np.mgrid[0:size, 0:size]
        return (np.abs(xx - c) + np.abs(yy - c) <= c).astype(np.float64)
    raise ValueError(f"unknown sprite shape: {shape!r}")


def sprite_patch(shape, size):
    """Deterministic textured sprite; intensities within [0.35, 1.0]."""
    return _texture(shape, size) * _shape_mask(shape, size)


def _splat(canvas, patch, px, py):
    """Add `patch` at float position (px, py) with bilinear weighting."""
    h, w = canvas.shape
    s = patch.shape[0]
    x0, y0 = int(math.floor(px)), int(math.floor(py))
    fx, fy = px - x0, py - y0
    weights = [((0, 0), (1 - fx) * (1 - fy)), ((1, 0), fx * (1 - fy)),
               ((0, 1), (1 - fx) * fy), ((1, 1), fx * fy)]
    for (ox, oy), weight in weights:
        if weight == 0.0:
            continue
        x, y = x0 + ox, y0 + oy
        sx0, sy0 = max(0, -x), max(0, -y)
        sx1 = min(s, w - x)
        sy1 = min(s, h - y)
        if sx1 <= sx0 or sy1 <= sy0:
            continue
        canvas[y + sy0:y + sy1, x + sx0:x + sx1] += weight * patch[sy0:sy1, sx0:sx1]


@dataclass
class _Sprite:
    kind: str
    shape: str
    size: int
    x: float
    y: float
    vx: float
    vy: float
    start: int
    end: int
    positions: list = field(default_factory=list)

    def step(self, frame_size):
        lo, hi = 0.0, frame_size - self.size
        nx, ny = self.x + self.vx, self.y + self.vy
        if nx < lo or nx > hi:
            self.vx = -self.vx
            nx = min(max(nx, lo), hi)
        if ny < lo or ny > hi:
            self.vy = -self.vy
            ny = min(max(ny, lo), hi)
        self.x, self.y = nx, ny


def _random_velocity(rng, speed_range):
    speed = rng.uniform(*speed_range)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    return speed * math.cos(angle), speed * math.sin(angle)


def _make_sprite(rng, config, kind, start, end):
    shape = "diamond" if kind == APPEARANCE else "square"
    speed_range = (config.anomaly_speed if kind == MOTION
                   else config.normal_speed)
    vx, vy = _random_velocity(rng, speed_range)
    limit = config.frame_size - config.sprite_size
    return _Sprite(kind=kind, shape=shape, size=config.sprite_size,
                   x=rng.uniform(0, limit), y=rng.uniform(0, limit),
                   vx=vx, vy=vy, start=start, end=end)


def _render_video(video_id, sprites, config):
    patches = {sprite.shape: sprite_patch(sprite.shape, sprite.size)
               for sprite in sprites}
    frames = np.zeros((config.n_frames, config.frame_size, config.frame_size))
    for frame_index in range(config.n_frames):
        for sprite in sprites:
            if not sprite.start <= frame_index < sprite.end:
                continue
            sprite.positions.append((sprite.x, sprite.y))
            _splat(frames[frame_index], patches[sprite.shape], sprite.x, sprite.y)
            sprite.step(config.frame_size)
    np.clip(frames, 0.0, 1.0, out=frames)
    return VideoSequence(video_id=video_id, frames=frames)


def _annotate(sprites):
    return [
        {"kind": s.kind, "shape": s.shape, "size": s.size,
         "start": s.start, "end": s.end,
         "positions": [[float(x), float(y)] for x, y in s.positions]}
        for s in sprites
    ]


def generate_synthetic_dataset(seed, config: SyntheticConfig = SyntheticConfig()):
    """Build the benchmark; bit-identical for a fixed (seed, config)."""
    rng = np.random.default_rng(seed)
    train_videos, test_videos = [], []
    labels, annotations = {}, {}

    for i in range(config.n_train_videos):
        video_id = f"train{i:02d}"
        sprites = [_make_sprite(rng, config, NORMAL, 0, config.n_frames)
                   for _ in range(config.sprites_per_video)]
        train_videos.append(_render_video(video_id, sprites, config))
        annotations[video_id] = _annotate(sprites)

    window = int(round(config.anomaly_rate * config.n_frames))
    for i in range(config.n_test_videos):
        video_id = f"test{i:02d}"
        sprites = [_make_sprite(rng, config, NORMAL, 0, config.n_frames)
                   for _ in range(config.sprites_per_video)]
        frame_labels = np.zeros(config.n_frames, dtype=np.int64)
        if window > 0:
            start_max = max(config.anomaly_start_min,
                            config.n_frames - window)
            start = int(rng.integers(config.anomaly_start_min, start_max + 1))
            end = min(start + window, config.n_frames)
            kind = APPEARANCE if i % 2 == 0 else MOTION
            sprites.append(_make_sprite(rng, config, kind, start, end))
            frame_labels[start:end] = 1
        test_videos.append(_render_video(video_id, sprites, config))
        labels[video_id] = frame_labels
        annotations[video_id] = _annotate(sprites)

    return SyntheticDataset(train_videos=train_videos, test_videos=test_videos,
                            labels=labels, annotations=annotations)


def sprites_at(annotations, video_id, frame_index, kinds=None):
    """Sprites of a video visible at one frame, as (record, x, y) tuples."""
    out = []
    for record in annotations.get(video_id, []):
        if kinds is not None and record["kind"] not in kinds:
            continue
        if record["start"] <= frame_index < record["end"]:
            x, y = record["positions"][frame_index - record["start"]]
            out.append((record, x, y))
    return out
