"""Two-stream encoder, flow-guided fusion, and skip-connected decoder.

The frame stream encodes the stacked input frames, the flow stream encodes
the stacked flow maps, and the decoder predicts the next frame from the
fused bottleneck feature plus skip activations of the frame stream.
"""

from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .validation import check_same_shape


@dataclass
class LatentPair:
    """Bottleneck features of the two streams; both end in ReLU, so entries
    are nonnegative. ``fea_flow`` is None when the flow stream is disabled."""

    fea_frame: torch.Tensor
    fea_flow: Optional[torch.Tensor] = None


def fgfm_fuse(fea_frame, fea_flow):
    """Gate motion features by appearance activation and add the result.

    fused = fea_frame + sigmoid(fea_frame) * fea_flow, elementwise and
    parameter-free. With zero flow features this is the identity on
    ``fea_frame``.
    """
    check_same_shape(fea_frame, fea_flow, ("fea_frame", "fea_flow"))
    return fea_frame + torch.sigmoid(fea_frame) * fea_flow


class _Encoder(nn.Module):
    """Stack of stride-2 conv / batch-norm / ReLU levels."""

    def __init__(self, in_channels, widths):
        super().__init__()
        self.levels = nn.ModuleList()
        prev = in_channels
        for width in widths:
            self.levels.append(nn.Sequential(
                nn.Conv2d(prev, width, kernel_size=3, stride=2, padding=1),
                nn.BatchNorm2d(width),
                nn.ReLU(inplace=True),
            ))
            prev = width

    def forward(self, x):
        skips = []
        for level in self.levels:
            x = level(x)
            skips.append(x)
        return x, skips


class _Decoder(nn.Module):
    """Mirror of the encoder: per level, concatenate the matching-resolution
    skip activation, nearest-neighbor upsample, then conv/batch-norm/ReLU.
    A 3x3 conv with sigmoid maps the last activation to a [0,1] frame."""

    def __init__(self, widths, out_channels=1):
        super().__init__()
        n = len(widths)
        out_widths = [widths[n - 2 - k] if n - 2 - k >= 0 else widths[0]
                      for k in range(n)]
        self.ups = nn.ModuleList()
        current = widths[-1]
        for k in range(n):
            skip_ch = widths[n - 1 - k]
            self.ups.append(nn.Sequential(
                nn.Conv2d(current + skip_ch, out_widths[k], kernel_size=3, padding=1),
                nn.BatchNorm2d(out_widths[k]),
                nn.ReLU(inplace=True),
            ))
            current = out_widths[k]
        self.head = nn.Conv2d(current, out_channels, kernel_size=3, padding=1)

    def forward(self, fused, skips):
        if len(skips) != len(self.ups):
            raise ValueError(
                f"skip/level count mismatch: decoder has {len(self.ups)} levels, "
                f"got {len(skips)} skips"
            )
        x = fused
        for k, up in enumerate(self.ups):
            skip = skips[len(skips) - 1 - k]
            if x.shape[-2:] != skip.shape[-2:]:
                raise ValueError(
                    f"skip resolution mismatch at up-level {k}: "
                    f"{tuple(x.shape[-2:])} vs {tuple(skip.shape[-2:])}"
                )
            x = torch.cat([x, skip], dim=1)
            x = F.interpolate(x, scale_factor=2, mode="nearest")
            x = up(x)
        return torch.sigmoid(self.head(x))


class AmsrcNet(nn.Module):
    """Future-frame predictor with appearance and motion streams.

    Parameters
    ----------
    t : temporal depth; the frame stream consumes t stacked frames and the
        flow stream 2t stacked flow channels.
    widths : per-level channel widths of both encoders (decoder mirrors them).
    use_flow : disable to drop the flow stream entirely; the decoder then
        receives the frame feature unfused.
    use_fgfm : when the flow stream is active, fuse with the sigmoid gate;
        otherwise fall back to plain elementwise addition.
    """

    def __init__(self, t=4, widths=(32, 64, 128), use_flow=True, use_fgfm=True,
                 input_size=32, seed=None):
        super().__init__()
        widths = tuple(int(w) for w in widths)
        if len(widths) < 1:
            raise ValueError("widths must list at least one level")
        if input_size % (2 ** len(widths)) != 0:
            raise ValueError(
                f"input_size {input_size} not divisible by 2^{len(widths)} levels"
            )
        self.t = int(t)
        self.widths = widths
        self.use_flow = bool(use_flow)
        self.use_fgfm = bool(use_fgfm)
        self.input_size = int(input_size)
        self.frame_encoder = _Encoder(self.t, widths)
        self.flow_encoder = _Encoder(2 * self.t, widths) if self.use_flow else None
        self.decoder = _Decoder(widths)
        if seed is not None:
            self.reset_parameters(seed)

    @property
    def levels(self):
        return len(self.widths)

    def reset_parameters(self, seed):
        """Kaiming fan-in init for conv weights, zero biases, unit batch norm."""
        torch.manual_seed(int(seed) % (2 ** 63))
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
                if m.bias is not None:
                    nn.init.zeros_(m.bias)
            elif isinstance(m, nn.BatchNorm2d):
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)
                m.reset_running_stats()
        return self

    def _check_input(self, x, channels, name):
        expected = (channels, self.input_size, self.input_size)
        if x.ndim != 4 or tuple(x.shape[1:]) != expected:
            raise ValueError(
                f"{name}: expected shape [B, {expected[0]}, {expected[1]}, "
                f"{expected[2]}], got {tuple(x.shape)}"
            )

    def encode_frames(self, frames):
        """Encode stacked input frames -> (bottleneck feature, skip stack)."""
        self._check_input(frames, self.t, "frames")
        return self.frame_encoder(frames)

    def encode_flows(self, flows):
        """Encode stacked flow maps [B, t, 2, H, W] -> bottleneck feature."""
        if flows.ndim == 5:
            flows = flows.reshape(flows.shape[0], -1, *flows.shape[3:])
        self._check_input(flows, 2 * self.t, "flows")
        fea, _ = self.flow_encoder(flows)
        return fea

    def decode(self, fused, skips):
        return self.decoder(fused, skips)

    def forward(self, frames, flows=None):
        """Predict the next frame; returns (prediction, LatentPair)."""
        fea_frame, skips = self.encode_frames(frames)
        if not self.use_flow:
            pred = self.decode(fea_frame, skips)
            return pred, LatentPair(fea_frame=fea_frame, fea_flow=None)
        if flows is None:
            raise ValueError("flows required when the flow stream is enabled")
        fea_flow = self.encode_flows(flows)
        if self.use_fgfm:
            fused = fgfm_fuse(fea_frame, fea_flow)
        else:
            fused = fea_frame + fea_flow
        pred = self.decode(fused, skips)
        return pred, LatentPair(fea_frame=fea_frame, fea_flow=fea_flow)


CHECKPOINT_VERSION = 1


def save_checkpoint(path, net: AmsrcNet, extra: dict | None = None):
    """Write architecture hyperparameters and named tensors to one file."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "arch": {
            "t": net.t,
            "widths": list(net.widths),
            "use_flow": net.use_flow,
            "use_fgfm": net.use_fgfm,
            "input_size": net.input_size,
        },
        "state": net.state_dict(),
        "extra": dict(extra or {}),
    }
    torch.save(payload, path)


def load_checkpoint(path):
    """Rebuild the network stored by :func:`save_checkpoint`."""
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {version!r}")
    net = AmsrcNet(**payload["arch"])
    net.load_state_dict(payload["state"])
    return net, payload.get("extra", {})
