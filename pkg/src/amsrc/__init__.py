"""Two-stream video anomaly detection with consistency-constrained
future-frame prediction and flow-guided feature fusion."""

from .detector import AmsrcDetector, learning_rate_at
from .evaluation import auroc
from .losses import (LossReport, LossWeights, consistency_loss, gradient_loss,
                     intensity_loss, regularization_loss, total_loss)
from .model import AmsrcNet, LatentPair, fgfm_fuse, load_checkpoint, save_checkpoint
from .scoring import (FrameScore, NormStats, ObjectScore, ScoreWeights,
                      fit_norm_stats, frame_scores, fuse_scores, object_scores)
from .stc import ClipBatch, StClip, build_clips, build_stc
from .synthetic import SyntheticConfig, generate_synthetic_dataset
from .flow import compute_flow, estimate_flow, make_flow_backend
from .rois import ForegroundParams, RoiBox, extract_rois, load_rois
from .video import VideoSequence, load_video_dir, write_video_dir

__version__ = "0.1.0"

__all__ = [
    "AmsrcDetector", "AmsrcNet", "ClipBatch", "ForegroundParams", "FrameScore",
    "LatentPair", "LossReport", "LossWeights", "NormStats", "ObjectScore",
    "RoiBox", "ScoreWeights", "StClip", "SyntheticConfig", "VideoSequence",
    "auroc", "build_clips", "build_stc", "compute_flow", "consistency_loss",
    "estimate_flow", "extract_rois", "fgfm_fuse", "fit_norm_stats",
    "frame_scores", "fuse_scores", "generate_synthetic_dataset",
    "gradient_loss", "intensity_loss", "learning_rate_at", "load_checkpoint",
    "load_rois", "load_video_dir", "make_flow_backend", "object_scores",
    "regularization_loss", "save_checkpoint", "total_loss", "write_video_dir",
]
