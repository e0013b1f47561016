"""Flat key-value configuration, shipped presets, and seed derivation."""

import hashlib
import importlib.resources
from dataclasses import dataclass

from .errors import ConfigError


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_tuple(text):
    return tuple(int(part) for part in text.replace(",", " ").split())


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


@dataclass
class TrainConfig:
    """Every tunable of the pipeline, one attribute per config key."""

    model_t: int = 4
    model_levels: int = 3
    model_widths: tuple = (32, 64, 128)
    model_use_flow: bool = True
    model_use_fgfm: bool = True
    loss_lambda_int: float = 1.0
    loss_lambda_gd: float = 1.0
    loss_lambda_sim: float = 1.0
    loss_lambda_model: float = 1.0
    loss_reduction: str = "mean"
    score_w_f: float = 0.5
    score_w_p: float = 0.5
    train_learning_rate: float = 2e-4
    train_decay_factor: float = 0.8
    train_decay_every_epochs: int = 10
    train_batch_size: int = 64
    train_epochs: int = 40
    train_seed: int = 0
    train_use_consistency: bool = True
    data_video_root: str = ""
    data_roi_file: str = ""
    data_flow_root: str = ""
    data_flow_backend: str = "classical"
    data_label_file: str = ""
    roi_threshold: float = 0.12
    roi_min_area: int = 9
    flow_window: int = 7
    flow_max_displacement: int = 8
    synth_n_train_videos: int = 8
    synth_n_test_videos: int = 4
    synth_n_frames: int = 80
    synth_frame_size: int = 64
    synth_anomaly_rate: float = 0.3

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.train_learning_rate <= 0:
            raise ConfigError("train.learning_rate must be > 0")
        if not 0 < self.train_decay_factor <= 1:
            raise ConfigError("train.decay_factor must lie in (0, 1]")
        if self.train_decay_every_epochs < 1:
            raise ConfigError("train.decay_every_epochs must be >= 1")
        if self.train_batch_size < 1:
            raise ConfigError("train.batch_size must be >= 1")
        if self.train_epochs < 0:
            raise ConfigError("train.epochs must be >= 0")
        if self.model_t < 1:
            raise ConfigError("model.t must be >= 1")
        if len(self.model_widths) < 1:
            raise ConfigError("model.widths must list at least one level")
        if len(self.model_widths) != self.model_levels:
            raise ConfigError(
                f"model.levels is {self.model_levels} but model.widths lists "
                f"{len(self.model_widths)} levels"
            )
        for name in ("loss_lambda_int", "loss_lambda_gd", "loss_lambda_sim",
                     "loss_lambda_model"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{_attr_to_key(name)} must be >= 0")
        if self.loss_reduction != "mean":
            raise ConfigError("loss.reduction supports only 'mean'")
        if self.score_w_f < 0 or self.score_w_p < 0:
            raise ConfigError("score weights must be >= 0")
        if self.score_w_f == 0 and self.score_w_p == 0:
            raise ConfigError("score.w_f and score.w_p must not both be zero")
        if self.data_flow_backend not in ("classical", "precomputed"):
            raise ConfigError(
                f"data.flow_backend must be classical or precomputed, "
                f"got {self.data_flow_backend!r}"
            )
        return self


def _attr_to_key(attr):
    prefix, _, rest = attr.partition("_")
    return f"{prefix}.{rest}"


def _key_to_attr(key):
    return key.replace(".", "_", 1)


_PARSERS = {
    int: int,
    float: float,
    str: str,
    bool: _parse_bool,
    tuple: _parse_int_tuple,
}


_TYPE_BY_ATTR = {
    "model_t": int, "model_levels": int, "model_widths": tuple,
    "model_use_flow": bool,
    "model_use_fgfm": bool, "loss_lambda_int": float, "loss_lambda_gd": float,
    "loss_lambda_sim": float, "loss_lambda_model": float, "loss_reduction": str,
    "score_w_f": float, "score_w_p": float, "train_learning_rate": float,
    "train_decay_factor": float, "train_decay_every_epochs": int,
    "train_batch_size": int, "train_epochs": int, "train_seed": int,
    "train_use_consistency": bool, "data_video_root": str, "data_roi_file": str,
    "data_flow_root": str, "data_flow_backend": str, "data_label_file": str,
    "roi_threshold": float, "roi_min_area": int, "flow_window": int,
    "flow_max_displacement": int, "synth_n_train_videos": int,
    "synth_n_test_videos": int, "synth_n_frames": int, "synth_frame_size": int,
    "synth_anomaly_rate": float,
}

KNOWN_KEYS = {_attr_to_key(attr) for attr in _TYPE_BY_ATTR}


def parse_config_text(text, source="<config>"):
    """Parse `key = value` lines; '#' starts a comment. Unknown keys fail."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}: line {lineno}: expected key = value")
        key, value = key.strip(), value.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")
        attr = _key_to_attr(key)
        parser = _PARSERS[_TYPE_BY_ATTR[attr]]
        try:
            values[attr] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"{source}: line {lineno}: {exc}") from exc
    return values


def load_config(path=None, preset=None, overrides=None) -> TrainConfig:
    """Resolve a config from (preset file) <- (config file) <- overrides."""
    values = {}
    if preset is not None:
        values.update(parse_config_text(read_preset(preset), source=f"preset:{preset}"))
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(parse_config_text(text, source=str(path)))
    for key, value in (overrides or {}).items():
        attr = _key_to_attr(key) if "." in key else key
        if attr not in _TYPE_BY_ATTR:
            raise ConfigError(f"unknown config key {key!r}")
        values[attr] = value
    try:
        return TrainConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


PRESETS = ("ped2", "avenue", "shanghaitech", "synth")


def read_preset(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    ref = importlib.resources.files("amsrc").joinpath(f"presets/{name}.cfg")
    return ref.read_text()


def serialize_config(config: TrainConfig):
    """Canonical text form: sorted `key = value` lines."""
    lines = []
    for attr in sorted(_TYPE_BY_ATTR):
        lines.append(f"{_attr_to_key(attr)} = {_format_value(getattr(config, attr))}")
    return "\n".join(lines) + "\n"


def config_hash(config: TrainConfig):
    digest = hashlib.sha256(serialize_config(config).encode()).hexdigest()
    return digest[:12]


def derive_seed(master_seed, name):
    """Stable named sub-seed of one master seed."""
    digest = hashlib.sha256(f"{int(master_seed)}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little") % (2 ** 63)
