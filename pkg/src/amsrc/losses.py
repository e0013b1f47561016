"""Training objectives: intensity, gradient, consistency, and weight penalties.

All reductions are means over elements/terms so the balancing weights keep
the same meaning at any crop size; multiply by element count to recover sums.
"""

from dataclasses import dataclass

import torch

from .errors import NumericalError
from .validation import check_same_shape

COSINE_EPS = 1e-8


@dataclass(frozen=True)
class LossWeights:
    """Balancing weights of the four loss terms."""

    lambda_int: float = 1.0
    lambda_gd: float = 1.0
    lambda_sim: float = 1.0
    lambda_model: float = 1.0

    def __post_init__(self):
        for name in ("lambda_int", "lambda_gd", "lambda_sim", "lambda_model"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass
class LossReport:
    """Individual loss terms plus their weighted total.

    Fields hold torch scalars during training and plain floats once detached
    via :meth:`as_floats`. ``total`` always equals the exact weighted sum of
    the four terms.
    """

    l_int: object
    l_gd: object
    l_sim: object
    l_reg: object
    total: object

    def as_floats(self) -> "LossReport":
        values = (self.l_int, self.l_gd, self.l_sim, self.l_reg, self.total)
        return LossReport(*(float(v.detach()) if isinstance(v, torch.Tensor)
                            else float(v) for v in values))


def intensity_loss(pred, target):
    """Mean squared pixel difference between prediction and ground truth."""
    check_same_shape(pred, target, ("pred", "target"))
    return ((pred - target) ** 2).mean()


def gradient_loss(pred, target):
    """Mean absolute difference of neighboring-pixel gradient magnitudes.

    Horizontal and vertical neighbor differences are compared in absolute
    value; positions whose neighbor falls outside the image contribute no
    term. The mean runs over all valid terms of both directions.
    """
    check_same_shape(pred, target, ("pred", "target"))
    dv_pred = (pred[..., 1:, :] - pred[..., :-1, :]).abs()
    dv_target = (target[..., 1:, :] - target[..., :-1, :]).abs()
    dh_pred = (pred[..., :, 1:] - pred[..., :, :-1]).abs()
    dh_target = (target[..., :, 1:] - target[..., :, :-1]).abs()
    vertical = (dv_pred - dv_target).abs()
    horizontal = (dh_pred - dh_target).abs()
    n_terms = vertical.numel() + horizontal.numel()
    if n_terms == 0:
        return torch.zeros((), dtype=pred.dtype, device=pred.device)
    return (vertical.sum() + horizontal.sum()) / n_terms


def per_sample_cosine_distance(fea_a, fea_b, eps=COSINE_EPS):
    """1 - cosine similarity per sample, over per-sample flattened features.

    Inputs are [B, ...] tensors of identical shape; returns a [B] tensor.
    Each norm is stabilized with `eps`, so two all-zero inputs yield the
    degenerate value 1 instead of NaN.
    """
    check_same_shape(fea_a, fea_b, ("fea_a", "fea_b"))
    a = fea_a.reshape(fea_a.shape[0], -1)
    b = fea_b.reshape(fea_b.shape[0], -1)
    dot = (a * b).sum(dim=1)
    norm_a = a.norm(dim=1) + eps
    norm_b = b.norm(dim=1) + eps
    return 1.0 - dot / (norm_a * norm_b)


def consistency_loss(fea_frame, fea_flow, eps=COSINE_EPS):
    """Cosine distance between appearance and motion features.

    Computed over the flattened tensors; range [0, 2] in general and [0, 1]
    for nonnegative inputs. This is also the test-time inconsistency score,
    evaluated through the same code path.
    """
    check_same_shape(fea_frame, fea_flow, ("fea_frame", "fea_flow"))
    return per_sample_cosine_distance(
        fea_frame.reshape(1, -1), fea_flow.reshape(1, -1), eps=eps
    )[0]


def regularization_loss(params):
    """Sum of squared entries over multiplicative weight tensors.

    Accepts a module (convolution/linear `weight` tensors are included;
    biases and normalization affine parameters are not) or an explicit
    iterable of weight tensors, all of which are included.
    """
    if isinstance(params, torch.nn.Module):
        tensors = [
            m.weight
            for m in params.modules()
            if isinstance(m, (torch.nn.Conv2d, torch.nn.ConvTranspose2d, torch.nn.Linear))
            and m.weight is not None
        ]
    else:
        tensors = list(params)
    if not tensors:
        return torch.zeros(())
    return sum((w ** 2).sum() for w in tensors)


def total_loss(l_int, l_gd, l_sim, l_reg, weights: LossWeights) -> LossReport:
    """Weighted sum of the four terms; raises on any non-finite component."""
    terms = {"intensity": l_int, "gradient": l_gd,
             "consistency": l_sim, "regularization": l_reg}
    for name, value in terms.items():
        value_t = torch.as_tensor(value)
        if not bool(torch.isfinite(value_t).all()):
            raise NumericalError(
                f"non-finite {name} loss: {float(value_t.detach())!r}")
    total = (weights.lambda_int * l_int + weights.lambda_gd * l_gd
             + weights.lambda_sim * l_sim + weights.lambda_model * l_reg)
    return LossReport(l_int=l_int, l_gd=l_gd, l_sim=l_sim, l_reg=l_reg, total=total)
