"""Per-object anomaly scores, normalization statistics, and frame aggregation.

Each clip gets an inconsistency score s_f (cosine distance between the two
stream features) and a prediction-error score s_p (mean squared error of the
predicted frame). Both are z-scored against statistics fitted on normal
training clips and combined with configurable weights; a frame's score is
the maximum over its objects.
"""

import os
from dataclasses import dataclass

import numpy as np
import torch

from .errors import DataError
from .losses import consistency_loss, intensity_loss


@dataclass(frozen=True)
class ObjectScore:
    video_id: str
    frame_index: int
    object_id: str
    s_f: float
    s_p: float


@dataclass(frozen=True)
class NormStats:
    """Means and standard deviations of s_f and s_p on normal training clips."""

    u_f: float
    delta_f: float
    u_p: float
    delta_p: float


@dataclass(frozen=True)
class ScoreWeights:
    w_f: float = 0.5
    w_p: float = 0.5

    def __post_init__(self):
        if self.w_f < 0 or self.w_p < 0:
            raise ValueError("score weights must be nonnegative")
        if self.w_f == 0 and self.w_p == 0:
            raise ValueError("score weights must not both be zero")


@dataclass(frozen=True)
class FrameScore:
    video_id: str
    frame_index: int
    score: float
    n_objects: int
    s_f_max: float = 0.0
    s_p_max: float = 0.0


STD_FLOOR = 1e-12


def object_scores(net, batch, chunk_size=256):
    """Score every clip in a ClipBatch under a trained network.

    s_f and s_p are evaluated per clip through the same functions used as
    training losses. With the flow stream disabled s_f is fixed to 0.
    """
    net.eval()
    out = []
    with torch.no_grad():
        for start in range(0, len(batch), chunk_size):
            sub = batch.slice(start, start + chunk_size)
            frames = torch.from_numpy(sub.input_frames)
            targets = torch.from_numpy(sub.target_frames)
            flows = torch.from_numpy(sub.input_flows) if net.use_flow else None
            preds, latents = net(frames, flows)
            for i in range(len(sub)):
                if latents.fea_flow is None:
                    s_f = 0.0
                else:
                    s_f = float(consistency_loss(latents.fea_frame[i],
                                                 latents.fea_flow[i]))
                s_p = float(intensity_loss(preds[i], targets[i]))
                out.append(ObjectScore(
                    video_id=sub.video_ids[i],
                    frame_index=int(sub.frame_indices[i]),
                    object_id=sub.object_ids[i],
                    s_f=s_f,
                    s_p=s_p,
                ))
    return out


def fit_norm_stats(train_scores) -> NormStats:
    """Mean and population standard deviation of s_f and s_p, floored at
     1e-12 so later z-scoring stays defined for degenerate distributions."""
    if len(train_scores) < 2:
        raise ValueError(f"need at least 2 training scores, got {len(train_scores)}")
    s_f = np.array([s.s_f for s in train_scores], dtype=np.float64)
    s_p = np.array([s.s_p for s in train_scores], dtype=np.float64)
    return NormStats(
        u_f=float(s_f.mean()),
        delta_f=max(float(s_f.std()), STD_FLOOR),
        u_p=float(s_p.mean()),
        delta_p=max(float(s_p.std()), STD_FLOOR),
    )


def fuse_scores(obj: ObjectScore, stats: NormStats, weights: ScoreWeights) -> float:
    """Weighted sum of the z-scored inconsistency and prediction error."""
    z_f = (obj.s_f - stats.u_f) / stats.delta_f
    z_p = (obj.s_p - stats.u_p) / stats.delta_p
    return weights.w_f * z_f + weights.w_p * z_p


def frame_scores(scores, stats, weights, frames_universe):
    """Aggregate object scores to one score per frame of the universe.

    A frame's score is the maximum fused score over its objects. Frames with
    no objects receive the minimum fused score seen in their video (no
    foreground means nothing detectably anomalous); if the whole video has
    no objects, the global minimum is used, and 0.0 if nothing was scored
    anywhere.
    """
    frames_universe = list(frames_universe)
    if not frames_universe:
        raise ValueError("frames_universe must not be empty")
    fused = {}
    per_frame = {}
    for obj in scores:
        value = fuse_scores(obj, stats, weights)
        key = (obj.video_id, obj.frame_index)
        per_frame.setdefault(key, []).append((value, obj))
        fused.setdefault(obj.video_id, []).append(value)
    video_floor = {vid: min(values) for vid, values in fused.items()}
    global_floor = min(video_floor.values()) if video_floor else 0.0

    out = []
    for video_id, frame_index in frames_universe:
        entries = per_frame.get((video_id, frame_index))
        if entries:
            value = max(v for v, _ in entries)
            out.append(FrameScore(
                video_id=video_id,
                frame_index=frame_index,
                score=value,
                n_objects=len(entries),
                s_f_max=max(obj.s_f for _, obj in entries),
                s_p_max=max(obj.s_p for _, obj in entries),
            ))
        else:
            out.append(FrameScore(
                video_id=video_id,
                frame_index=frame_index,
                score=video_floor.get(video_id, global_floor),
                n_objects=0,
            ))
    return out


def save_norm_stats(path, stats: NormStats, config_hash=""):
    with open(path, "w") as fh:
        fh.write(f"u_f={stats.u_f!r}\n")
        fh.write(f"delta_f={stats.delta_f!r}\n")
        fh.write(f"u_p={stats.u_p!r}\n")
        fh.write(f"delta_p={stats.delta_p!r}\n")
        fh.write(f"config_hash={config_hash}\n")


def load_norm_stats(path):
    """Returns (NormStats, config_hash)."""
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            values[key] = value
    try:
        stats = NormStats(
            u_f=float(values["u_f"]),
            delta_f=float(values["delta_f"]),
            u_p=float(values["u_p"]),
            delta_p=float(values["delta_p"]),
        )
    except KeyError as exc:
        raise DataError(f"{path}: missing stats key {exc}") from exc
    return stats, values.get("config_hash", "")


SCORE_HEADER = "video_id,frame_index,score,n_objects,s_f_max,s_p_max"


def write_frame_scores(path, records):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(SCORE_HEADER + "\n")
        for fs in records:
            fh.write(f"{fs.video_id},{fs.frame_index},{fs.score!r},"
                     f"{fs.n_objects},{fs.s_f_max!r},{fs.s_p_max!r}\n")


def read_frame_scores(path):
    records = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != SCORE_HEADER:
            raise DataError(f"{path}: unexpected header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.strip().split(",")
            if len(parts) != 6:
                raise DataError(f"{path}: line {lineno}: expected 6 fields")
            records.append(FrameScore(
                video_id=parts[0],
                frame_index=int(parts[1]),
                score=float(parts[2]),
                n_objects=int(parts[3]),
                s_f_max=float(parts[4]),
                s_p_max=float(parts[5]),
            ))
    return records
