"""End-to-end pipeline commands and the per-run manifest.

Every command reads and writes only inside its output root:

    <out>/data/...      synthetic videos, labels, annotations
    <out>/flows/...     per-pair flow files
    <out>/cache/...     RoI files and clip caches
    <out>/model/...     checkpoint and normalization stats
    <out>/runs/...      one manifest directory per training run
    <out>/scores/...    per-frame score CSV
    <out>/eval/...      AUROC report and score curves
    <out>/ablation/...  component-toggle matrix results
"""

import hashlib
import json
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .config import TrainConfig, config_hash, derive_seed, serialize_config
from .detector import AmsrcDetector
from .errors import ConfigError, DataError, MissingArtifactError
from .evaluation import auroc, export_curves, load_labels, write_labels
from .flow import flow_filename, make_flow_backend, video_flows, write_flow_file
from .model import load_checkpoint, save_checkpoint
from .rois import ForegroundParams, extract_rois, load_rois, save_rois
from .scoring import (ScoreWeights, frame_scores, load_norm_stats,
                      object_scores, read_frame_scores, save_norm_stats,
                      write_frame_scores)
from .stc import ClipBatch, build_clips
from .synthetic import SyntheticConfig, generate_synthetic_dataset
from .video import list_videos, load_video_dir, write_video_dir

SPLITS = ("train", "test")


def detector_from_config(cfg: TrainConfig) -> AmsrcDetector:
    return AmsrcDetector(
        t=cfg.model_t, widths=cfg.model_widths, use_flow=cfg.model_use_flow,
        use_consistency=cfg.train_use_consistency, use_fgfm=cfg.model_use_fgfm,
        learning_rate=cfg.train_learning_rate, decay_factor=cfg.train_decay_factor,
        decay_every_epochs=cfg.train_decay_every_epochs,
        batch_size=cfg.train_batch_size, epochs=cfg.train_epochs,
        lambda_int=cfg.loss_lambda_int, lambda_gd=cfg.loss_lambda_gd,
        lambda_sim=cfg.loss_lambda_sim, lambda_model=cfg.loss_lambda_model,
        w_f=cfg.score_w_f, w_p=cfg.score_w_p, seed=cfg.train_seed,
    )


def synthetic_config(cfg: TrainConfig) -> SyntheticConfig:
    return SyntheticConfig(
        n_train_videos=cfg.synth_n_train_videos,
        n_test_videos=cfg.synth_n_test_videos,
        n_frames=cfg.synth_n_frames,
        frame_size=cfg.synth_frame_size,
        anomaly_rate=cfg.synth_anomaly_rate,
    )


def _data_root(cfg, out):
    return cfg.data_video_root or os.path.join(out, "data")


def _labels_path(cfg, out):
    return cfg.data_label_file or os.path.join(_data_root(cfg, out), "labels.txt")


def dataset_hash(videos, labels):
    digest = hashlib.sha256()
    for video in videos:
        digest.update(video.video_id.encode())
        digest.update(np.ascontiguousarray(video.frames).tobytes())
    for video_id in sorted(labels):
        digest.update(video_id.encode())
        digest.update(np.ascontiguousarray(labels[video_id]).tobytes())
    return digest.hexdigest()


def cmd_synth(cfg: TrainConfig, out):
    """Generate the synthetic benchmark into <out>/data."""
    dataset = generate_synthetic_dataset(
        derive_seed(cfg.train_seed, "synth"), synthetic_config(cfg))
    root = os.path.join(out, "data")
    for split, videos in (("train", dataset.train_videos),
                          ("test", dataset.test_videos)):
        split_dir = os.path.join(root, split)
        os.makedirs(split_dir, exist_ok=True)
        for video in videos:
            write_video_dir(split_dir, video)
    write_labels(os.path.join(root, "labels.txt"), dataset.labels)
    with open(os.path.join(root, "annotations.json"), "w") as fh:
        json.dump(dataset.annotations, fh, sort_keys=True)
    digest = dataset_hash(dataset.train_videos + dataset.test_videos,
                          dataset.labels)
    with open(os.path.join(root, "dataset.sha256"), "w") as fh:
        fh.write(digest + "\n")
    return {"dataset_hash": digest,
            "n_train_videos": len(dataset.train_videos),
            "n_test_videos": len(dataset.test_videos)}


def _boxes_for_video(cfg, video, roi_boxes_by_video):
    if roi_boxes_by_video is not None:
        return roi_boxes_by_video.get(video.video_id, [])
    params = ForegroundParams(threshold=cfg.roi_threshold,
                              min_area=cfg.roi_min_area)
    return extract_rois(video, params)


def cmd_extract(cfg: TrainConfig, out):
    """Compute flows and clip caches for both splits."""
    root = _data_root(cfg, out)
    cache_dir = os.path.join(out, "cache")
    os.makedirs(cache_dir, exist_ok=True)

    roi_boxes_by_video = None
    if cfg.data_roi_file:
        boxes = load_rois(cfg.data_roi_file)
        roi_boxes_by_video = {}
        for box in boxes:
            roi_boxes_by_video.setdefault(box.video_id, []).append(box)

    backend = make_flow_backend(
        cfg.data_flow_backend, source_path=cfg.data_flow_root or None,
        window=cfg.flow_window, max_displacement=cfg.flow_max_displacement)

    meta = {"t": cfg.model_t, "frame_counts": {}}
    summary = {}
    for split in SPLITS:
        split_root = os.path.join(root, split)
        if not os.path.isdir(split_root):
            raise MissingArtifactError(f"video directory {split_root}", "synth")
        clips = []
        boxes_out = []
        counts = {}
        for video_id in list_videos(split_root):
            video = load_video_dir(split_root, video_id)
            counts[video_id] = len(video)
            flows = video_flows(video, backend)
            if cfg.data_flow_backend == "classical":
                flow_dir = os.path.join(out, "flows", video_id)
                os.makedirs(flow_dir, exist_ok=True)
                for k in range(len(flows)):
                    write_flow_file(os.path.join(flow_dir, flow_filename(k)),
                                    flows[k])
            boxes = _boxes_for_video(cfg, video, roi_boxes_by_video)
            boxes_out.extend(boxes)
            clips.extend(build_clips(video, flows, boxes, t=cfg.model_t))
        if not clips:
            raise DataError(
                f"{split} split produced no clips; check foreground settings"
            )
        save_rois(os.path.join(cache_dir, f"rois_{split}.txt"), boxes_out)
        ClipBatch.from_clips(clips).save_npz(
            os.path.join(cache_dir, f"clips_{split}.npz"))
        meta["frame_counts"][split] = counts
        summary[f"n_{split}_clips"] = len(clips)
    with open(os.path.join(cache_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True)
    return summary


def _load_cache(out, split):
    path = os.path.join(out, "cache", f"clips_{split}.npz")
    if not os.path.isfile(path):
        raise MissingArtifactError(f"clip cache {path}", "extract")
    return ClipBatch.load_npz(path)


def _load_meta(out):
    path = os.path.join(out, "cache", "meta.json")
    if not os.path.isfile(path):
        raise MissingArtifactError(f"cache metadata {path}", "extract")
    with open(path) as fh:
        return json.load(fh)


@dataclass
class RunManifest:
    """Append-only record of one training run."""

    seed: int
    checkpoint_path: str
    stats_path: str
    config_text: str
    optimizer: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    wall_clock_sec: float = 0.0

    def to_text(self):
        lines = ["manifest.version = 1",
                 f"seed = {self.seed}",
                 f"checkpoint = {self.checkpoint_path}",
                 f"stats = {self.stats_path}"]
        for key in sorted(self.optimizer):
            lines.append(f"optimizer.{key} = {self.optimizer[key]}")
        for key in sorted(self.metrics):
            lines.append(f"metrics.{key} = {self.metrics[key]}")
        lines.append(f"wall_clock_sec = {self.wall_clock_sec:.3f}")
        lines.extend(f"config.{line}" for line in self.config_text.splitlines())
        return "\n".join(lines) + "\n"


def cmd_train(cfg: TrainConfig, out, cache_dir=None):
    """Train on the cached training clips; write checkpoint, stats, manifest."""
    cache_out = cache_dir or out
    batch = _load_cache(cache_out, "train")
    started = time.monotonic()
    detector = detector_from_config(cfg).fit(batch)
    wall = time.monotonic() - started

    model_dir = os.path.join(out, "model")
    os.makedirs(model_dir, exist_ok=True)
    digest = config_hash(cfg)
    save_checkpoint(os.path.join(model_dir, "checkpoint.pt"), detector.model_,
                    extra={"config_hash": digest})
    save_norm_stats(os.path.join(model_dir, "norm_stats.txt"),
                    detector.norm_stats_, config_hash=digest)

    history = detector.history_
    manifest = RunManifest(
        seed=cfg.train_seed,
        checkpoint_path="model/checkpoint.pt",
        stats_path="model/norm_stats.txt",
        config_text=serialize_config(cfg),
        optimizer={"name": "adam", "beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
        metrics={
            "n_clips": len(batch),
            "epochs": cfg.train_epochs,
            "final_loss": (repr(history["loss"][-1]) if history["loss"] else "nan"),
            "final_lr": (repr(history["lr"][-1]) if history["lr"] else "nan"),
        },
        wall_clock_sec=wall,
    )
    run_dir = os.path.join(out, "runs", f"{time.strftime('%Y%m%d-%H%M%S')}-{digest}")
    os.makedirs(run_dir, exist_ok=True)
    with open(os.path.join(run_dir, "manifest"), "w") as fh:
        fh.write(manifest.to_text())
    return {"manifest_dir": run_dir, "detector": detector,
            "final_loss": history["loss"][-1] if history["loss"] else None}


def cmd_score(cfg: TrainConfig, out, cache_dir=None):
    """Score the cached test clips and write the per-frame CSV."""
    cache_out = cache_dir or out
    checkpoint_path = os.path.join(out, "model", "checkpoint.pt")
    stats_path = os.path.join(out, "model", "norm_stats.txt")
    if not os.path.isfile(checkpoint_path) or not os.path.isfile(stats_path):
        raise MissingArtifactError("trained model", "train")
    batch = _load_cache(cache_out, "test")
    meta = _load_meta(cache_out)

    net, _ = load_checkpoint(checkpoint_path)
    stats, _ = load_norm_stats(stats_path)
    weights = ScoreWeights(w_f=cfg.score_w_f, w_p=cfg.score_w_p)
    scores = object_scores(net, batch)
    universe = [(vid, fi)
                for vid in sorted(meta["frame_counts"]["test"])
                for fi in range(meta["frame_counts"]["test"][vid])]
    records = frame_scores(scores, stats, weights, universe)
    path = os.path.join(out, "scores", "scores.csv")
    write_frame_scores(path, records)
    return {"scores_path": path, "n_frames": len(records)}


def cmd_eval(cfg: TrainConfig, out, labels_out=None):
    """Compute frame-level AUROC of the score CSV against the labels."""
    scores_path = os.path.join(out, "scores", "scores.csv")
    if not os.path.isfile(scores_path):
        raise MissingArtifactError("score CSV", "score")
    labels_path = _labels_path(cfg, labels_out or out)
    if not os.path.isfile(labels_path):
        raise MissingArtifactError(f"label file {labels_path}", "synth")
    records = read_frame_scores(scores_path)
    labels_by_video = load_labels(labels_path)

    all_scores, all_labels = [], []
    by_video = {}
    for record in records:
        by_video.setdefault(record.video_id, []).append(record)
    for video_id in sorted(by_video):
        if video_id not in labels_by_video:
            raise DataError(f"no labels for scored video {video_id!r}")
        rows = sorted(by_video[video_id], key=lambda r: r.frame_index)
        labels = labels_by_video[video_id]
        if len(rows) != len(labels):
            raise DataError(
                f"video {video_id!r}: {len(rows)} scores vs {len(labels)} labels")
        all_scores.extend(r.score for r in rows)
        all_labels.extend(int(v) for v in labels)

    value = auroc(np.array(all_scores), np.array(all_labels))
    eval_dir = os.path.join(out, "eval")
    os.makedirs(eval_dir, exist_ok=True)
    with open(os.path.join(eval_dir, "report.txt"), "w") as fh:
        fh.write(f"auroc = {value!r}\n")
        fh.write(f"n_frames = {len(all_labels)}\n")
        fh.write(f"n_positive = {sum(all_labels)}\n")
        fh.write(f"n_negative = {len(all_labels) - sum(all_labels)}\n")
    export_curves(records, labels_by_video, os.path.join(eval_dir, "curves"))
    return {"auroc": value, "report_path": os.path.join(eval_dir, "report.txt")}


ABLATION_ROWS = (
    ("A", {"use_flow": False, "use_consistency": False, "use_fgfm": False}),
    ("B", {"use_flow": True, "use_consistency": False, "use_fgfm": False}),
    ("C", {"use_flow": True, "use_consistency": False, "use_fgfm": True}),
    ("D", {"use_flow": True, "use_consistency": True, "use_fgfm": False}),
    ("E", {"use_flow": True, "use_consistency": True, "use_fgfm": True}),
)


def run_ablation_matrix(cfg: TrainConfig, out):
    """Train and evaluate every component-toggle row under one seed.

    Shares the extracted caches across rows; a row failure is recorded and
    the remaining rows still run. Returns {row: auroc or None}.
    """
    results = {}
    rows_dir = os.path.join(out, "ablation")
    os.makedirs(rows_dir, exist_ok=True)
    for row, flags in ABLATION_ROWS:
        row_cfg = replace(
            cfg,
            model_use_flow=flags["use_flow"],
            train_use_consistency=flags["use_consistency"],
            model_use_fgfm=flags["use_fgfm"],
        )
        row_dir = os.path.join(rows_dir, row)
        try:
            cmd_train(row_cfg, row_dir, cache_dir=out)
            cmd_score(row_cfg, row_dir, cache_dir=out)
            value = cmd_eval(row_cfg, row_dir, labels_out=out)["auroc"]
            results[row] = {"flags": flags, "auroc": value, "error": ""}
        except Exception as exc:  # noqa: BLE001 - rows must not kill the matrix
            results[row] = {"flags": flags, "auroc": None, "error": str(exc)}
    with open(os.path.join(rows_dir, "results.csv"), "w") as fh:
        fh.write("row,use_flow,use_consistency,use_fgfm,auroc,error\n")
        for row, info in results.items():
            flags = info["flags"]
            value = "" if info["auroc"] is None else repr(info["auroc"])
            fh.write(f"{row},{flags['use_flow']},{flags['use_consistency']},"
                     f"{flags['use_fgfm']},{value},{info['error']}\n")
    return results


COMMANDS = ("synth", "extract", "train", "score", "eval", "ablate")


def run_pipeline(command, cfg: TrainConfig, out):
    """Dispatch one pipeline command; artifacts land under `out`."""
    os.makedirs(out, exist_ok=True)
    if command == "synth":
        return cmd_synth(cfg, out)
    if command == "extract":
        return cmd_extract(cfg, out)
    if command == "train":
        result = cmd_train(cfg, out)
        result.pop("detector", None)
        return result
    if command == "score":
        return cmd_score(cfg, out)
    if command == "eval":
        return cmd_eval(cfg, out)
    if command == "ablate":
        return run_ablation_matrix(cfg, out)
    raise ConfigError(f"unknown command {command!r}; expected one of {COMMANDS}")
