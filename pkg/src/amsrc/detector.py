"""Sklearn-style anomaly detector wrapping the two-stream predictor.

`fit` trains the network on normal clips and freezes score-normalization
statistics; the scoring methods follow the sklearn outlier-detection
conventions (`score_samples` is high for normal samples, `predict` returns
+1/-1), while :meth:`anomaly_scores` exposes the domain orientation where
larger means more anomalous.
"""

import numpy as np
import torch
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_is_fitted

from .config import derive_seed
from .errors import NumericalError
from .losses import (LossReport, LossWeights, gradient_loss, intensity_loss,
                     per_sample_cosine_distance, regularization_loss,
                     total_loss)
from .model import AmsrcNet
from .scoring import (ScoreWeights, fit_norm_stats, fuse_scores,
                      object_scores)
from .stc import ClipBatch


def learning_rate_at(epoch, initial=2e-4, decay_factor=0.8, every=10):
    """Stepwise-decayed learning rate: initial * decay_factor ** (epoch // every)."""
    return initial * decay_factor ** (epoch // every)


def _ensure_batch(X) -> ClipBatch:
    if isinstance(X, ClipBatch):
        return X
    return ClipBatch.from_clips(X)


class AmsrcDetector(BaseEstimator, OutlierMixin):
    """Future-frame-prediction anomaly detector over object clips.

    Parameters mirror the pipeline configuration; see the config reference
    in the README. Fitted attributes: ``model_`` (the trained network),
    ``norm_stats_``, ``history_`` (per-epoch learning rate and losses), and
    ``offset_`` (decision threshold set from `contamination`).
    """

    def __init__(self, t=4, widths=(32, 64, 128), use_flow=True,
                 use_consistency=True, use_fgfm=True, learning_rate=2e-4,
                 decay_factor=0.8, decay_every_epochs=10, batch_size=64,
                 epochs=40, lambda_int=1.0, lambda_gd=1.0, lambda_sim=1.0,
                 lambda_model=1.0, w_f=0.5, w_p=0.5, contamination=0.1,
                 seed=0):
        self.t = t
        self.widths = widths
        self.use_flow = use_flow
        self.use_consistency = use_consistency
        self.use_fgfm = use_fgfm
        self.learning_rate = learning_rate
        self.decay_factor = decay_factor
        self.decay_every_epochs = decay_every_epochs
        self.batch_size = batch_size
        self.epochs = epochs
        self.lambda_int = lambda_int
        self.lambda_gd = lambda_gd
        self.lambda_sim = lambda_sim
        self.lambda_model = lambda_model
        self.w_f = w_f
        self.w_p = w_p
        self.contamination = contamination
        self.seed = seed

    def _loss_weights(self) -> LossWeights:
        effective_sim = (self.lambda_sim
                         if (self.use_consistency and self.use_flow) else 0.0)
        return LossWeights(lambda_int=self.lambda_int, lambda_gd=self.lambda_gd,
                           lambda_sim=effective_sim, lambda_model=self.lambda_model)

    def _batch_loss(self, net, frames, flows, targets, weights) -> LossReport:
        preds, latents = net(frames, flows if net.use_flow else None)
        l_int = intensity_loss(preds, targets)
        l_gd = gradient_loss(preds, targets)
        if latents.fea_flow is None:
            l_sim = torch.zeros((), dtype=preds.dtype)
        else:
            l_sim = per_sample_cosine_distance(latents.fea_frame,
                                               latents.fea_flow).mean()
        l_reg = regularization_loss(net)
        return total_loss(l_int, l_gd, l_sim, l_reg, weights)

    def fit(self, X, y=None):
        """Train on normal clips, then fit normalization statistics."""
        batch = _ensure_batch(X)
        if batch.t != self.t:
            raise ValueError(f"clips have t={batch.t}, detector expects t={self.t}")
        net = AmsrcNet(t=self.t, widths=self.widths, use_flow=self.use_flow,
                       use_fgfm=self.use_fgfm,
                       input_size=batch.input_frames.shape[-1],
                       seed=derive_seed(self.seed, "init"))
        weights = self._loss_weights()
        frames_all = torch.from_numpy(np.ascontiguousarray(batch.input_frames))
        targets_all = torch.from_numpy(np.ascontiguousarray(batch.target_frames))
        flows_all = torch.from_numpy(np.ascontiguousarray(batch.input_flows))
        optimizer = torch.optim.Adam(net.parameters(), lr=self.learning_rate)
        shuffle_rng = np.random.default_rng(derive_seed(self.seed, "shuffle"))

        n = len(batch)
        history = {"lr": [], "loss": [], "l_int": [], "l_gd": [],
                   "l_sim": [], "l_reg": []}
        step = 0
        net.train()
        for epoch in range(self.epochs):
            lr = learning_rate_at(epoch, self.learning_rate,
                                  self.decay_factor, self.decay_every_epochs)
            for group in optimizer.param_groups:
                group["lr"] = lr
            perm = shuffle_rng.permutation(n)
            sums = dict.fromkeys(("loss", "l_int", "l_gd", "l_sim", "l_reg"), 0.0)
            for start in range(0, n, self.batch_size):
                idx = perm[start:start + self.batch_size]
                try:
                    report = self._batch_loss(
                        net, frames_all[idx], flows_all[idx], targets_all[idx],
                        weights)
                except NumericalError as exc:
                    raise NumericalError(f"step {step}: {exc}", step=step,
                                         report=exc.report) from exc
                floats = report.as_floats()
                if not np.isfinite(floats.total):
                    raise NumericalError(
                        f"step {step}: non-finite total loss {floats.total}",
                        step=step, report=floats)
                optimizer.zero_grad()
                report.total.backward()
                optimizer.step()
                frac = len(idx) / n
                sums["loss"] += floats.total * frac
                sums["l_int"] += floats.l_int * frac
                sums["l_gd"] += floats.l_gd * frac
                sums["l_sim"] += floats.l_sim * frac
                sums["l_reg"] += floats.l_reg * frac
                step += 1
            history["lr"].append(lr)
            for key, value in sums.items():
                history[key].append(value)

        self.model_ = net.eval()
        train_scores = object_scores(net, batch)
        self.norm_stats_ = fit_norm_stats(train_scores)
        self.score_weights_ = ScoreWeights(w_f=self.w_f, w_p=self.w_p)
        fused = np.array([fuse_scores(s, self.norm_stats_, self.score_weights_)
                          for s in train_scores])
        self.offset_ = float(np.quantile(-fused, self.contamination))
        self.history_ = history
        self.n_steps_ = step
        return self

    def object_scores(self, X):
        """Raw (s_f, s_p) per clip under the trained network."""
        check_is_fitted(self, "model_")
        return object_scores(self.model_, _ensure_batch(X))

    def anomaly_scores(self, X):
        """Fused normalized anomaly score per clip; larger is more anomalous."""
        check_is_fitted(self, "model_")
        return np.array([
            fuse_scores(s, self.norm_stats_, self.score_weights_)
            for s in self.object_scores(X)
        ])

    def score_samples(self, X):
        """Sklearn orientation: the negated fused score (higher = more normal)."""
        return -self.anomaly_scores(X)

    def decision_function(self, X):
        return self.score_samples(X) - self.offset_

    def predict(self, X):
        """+1 for clips scored as normal, -1 for anomalous."""
        decision = self.decision_function(X)
        return np.where(decision < 0, -1, 1)
