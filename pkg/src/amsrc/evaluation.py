"""Frame-level AUROC and score-curve export."""

import os

import numpy as np

from .errors import DataError


def _average_ranks(values):
    """1-based ranks with ties sharing their average rank."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auroc(scores, labels):
    """Area under the ROC curve over frame scores and 0/1 labels.

    Implemented as the rank-based Mann-Whitney statistic, so ties between a
    positive and a negative score receive half credit. Requires both classes
    to be present.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    if scores.shape != labels.shape:
        raise ValueError(
            f"scores and labels must align: {scores.shape} vs {labels.shape}"
        )
    if np.any((labels != 0) & (labels != 1)):
        raise ValueError("labels must be 0 or 1")
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC undefined: labels contain a single class")
    ranks = _average_ranks(scores)
    rank_sum_pos = float(ranks[labels == 1].sum())
    u_stat = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u_stat / (n_pos * n_neg)


def write_labels(path, labels_by_video):
    """One line per video: video_id followed by space-separated 0/1 flags."""
    with open(path, "w") as fh:
        for video_id in sorted(labels_by_video):
            flags = " ".join(str(int(v)) for v in labels_by_video[video_id])
            fh.write(f"{video_id} {flags}\n")


def load_labels(path):
    """Parse the per-video frame-label file into {video_id: int array}."""
    labels = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            video_id, flags = parts[0], parts[1:]
            if any(f not in ("0", "1") for f in flags):
                raise DataError(f"{path}: line {lineno}: labels must be 0 or 1")
            labels[video_id] = np.array([int(f) for f in flags], dtype=np.int64)
    return labels


def export_curves(frame_scores, labels_by_video, out_dir):
    """Write one CSV per video with columns frame_index,score,label.

    `frame_scores` is a list of FrameScore-like records (video_id,
    frame_index, score). Lengths must match the label arrays exactly.
    """
    by_video = {}
    for fs in frame_scores:
        by_video.setdefault(fs.video_id, []).append(fs)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for video_id, rows in sorted(by_video.items()):
        if video_id not in labels_by_video:
            raise DataError(f"no labels for video {video_id!r}")
        rows = sorted(rows, key=lambda fs: fs.frame_index)
        labels = labels_by_video[video_id]
        if len(rows) != len(labels):
            raise DataError(
                f"video {video_id!r}: {len(rows)} scored frames vs "
                f"{len(labels)} labels"
            )
        path = os.path.join(out_dir, f"{video_id}.csv")
        with open(path, "w") as fh:
            fh.write("frame_index,score,label\n")
            for fs, label in zip(rows, labels):
                fh.write(f"{fs.frame_index},{fs.score!r},{int(label)}\n")
        paths.append(path)
    return paths


def read_curve(path):
    """Parse a curve CSV back into (frame_index, score, label) arrays."""
    frame_index, scores, labels = [], [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "frame_index,score,label":
            raise DataError(f"{path}: unexpected header {header!r}")
        for line in fh:
            fi, score, label = line.strip().split(",")
            frame_index.append(int(fi))
            scores.append(float(score))
            labels.append(int(label))
    return (np.array(frame_index), np.array(scores, dtype=np.float64),
            np.array(labels, dtype=np.int64))
