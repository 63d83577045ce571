"""Flat `section.key = value` run configuration with strict key checking.

All randomness in a run derives from the single `seed` key, fanned out to
per-module streams with fixed documented offsets:

    synthesis        seed + 11
    dataset sampling seed + 22
    dataset split    seed + 33
    net init         seed + 44
    training         seed + 55   (balancing/augmentation/dropout offsets
                                  are layered on top inside nn.training)
    detector         seed + 66

Identical config plus seed therefore reproduces every artifact
byte-for-byte.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

SEED_SYNTH = 11
SEED_DATAGEN = 22
SEED_SPLIT = 33
SEED_NET = 44
SEED_TRAIN = 55
SEED_DETECTOR = 66


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (default, type, help)
SCHEMA: dict[str, tuple[object, type, str]] = {
    "seed": (0, int, "master seed; every random choice in a run derives from it"),
    "paths.sequence": ("out/sequence", str, "sequence directory (synth writes, gen-data/eval read)"),
    "paths.dataset": ("out/dataset", str, "dataset directory (gen-data writes, train/eval-still read)"),
    "paths.run": ("out/run", str, "run directory for weights, history, traces, and reports"),
    "synth.world_w": (256, int, "world frame width in pixels"),
    "synth.world_h": (192, int, "world frame height in pixels"),
    "synth.frames": (120, int, "number of frames to synthesize"),
    "synth.targets": (2, int, "number of moving targets"),
    "synth.size_min": (8, int, "minimum target edge length in pixels"),
    "synth.size_max": (14, int, "maximum target edge length in pixels"),
    "synth.speed_min": (1.0, float, "minimum target speed in px/frame"),
    "synth.speed_max": (2.0, float, "maximum target speed in px/frame"),
    "synth.turn_prob": (0.05, float, "per-frame probability of a direction change"),
    "synth.texture_seed": (0, int, "background texture seed"),
    "synth.group_spread": (0.0, float, "rigid-group spread in pixels; 0 moves targets independently"),
    "datagen.samples": (2000, int, "number of (crop, label) samples to draw"),
    "datagen.crop_w": (64, int, "crop (camera window) width in pixels"),
    "datagen.crop_h": (48, int, "crop (camera window) height in pixels"),
    "datagen.train_fraction": (0.6, float, "fraction of samples used for training"),
    "balance.near_zero_tau": (0.1, float, "labels below this (inf norm) count as near-zero"),
    "balance.max_near_zero_frac": (0.5, float, "cap on the near-zero fraction per batch"),
    "augment.flip_prob": (0.5, float, "probability of a horizontal flip"),
    "augment.translate_prob": (0.5, float, "probability of a window-jitter translation"),
    "augment.max_jitter": (8, int, "maximum translation jitter in pixels"),
    "augment.photometric_prob": (0.3, float, "per-op probability of each photometric change"),
    "network.scale": ("tiny", str, "architecture scale: tiny or full"),
    "network.input_w": (64, int, "network input width (must be divisible by 16)"),
    "network.input_h": (48, int, "network input height (must be divisible by 16)"),
    "train.lr": (0.001, float, "initial learning rate"),
    "train.decay_factor": (0.5, float, "learning-rate multiplier on plateau"),
    "train.plateau_patience": (10, int, "epochs without improvement before decaying the rate"),
    "train.batch_size": (128, int, "samples per batch"),
    "train.batches_per_epoch": (50, int, "batches per epoch"),
    "train.epochs": (300, int, "training epochs"),
    "filter.k": (3, int, "weighted-moving-average window over controller outputs"),
    "detector.p_miss": (0.0, float, "synthetic detector miss probability per true box"),
    "detector.center_sigma": (0.0, float, "detection center jitter sigma in pixels"),
    "detector.size_sigma": (0.0, float, "detection size jitter sigma as a fraction"),
    "detector.fp_rate": (0.0, float, "expected false positives per frame"),
    "tracker.iou_threshold": (0.3, float, "minimum IoU for a track/detection match"),
    "tracker.max_age": (5, int, "consecutive misses before a confirmed track dies"),
    "tracker.min_hits": (2, int, "consecutive hits before a track is confirmed"),
    "tracker.q_pos": (1.0, float, "position process noise, px^2"),
    "tracker.q_vel": (0.25, float, "velocity process noise, (px/frame)^2"),
    "tracker.q_size": (0.1, float, "size process noise, px^2"),
    "tracker.r_meas": (1.0, float, "measurement noise per component, px^2"),
    "eval.controller": ("oracle", str, "controller: static, oracle, baseline, or cnn"),
    "eval.window_w": (64, int, "camera window width during episodes"),
    "eval.window_h": (48, int, "camera window height during episodes"),
    "eval.start_cx": (-1.0, float, "start window center x; -1 means world center"),
    "eval.start_cy": (-1.0, float, "start window center y; -1 means world center"),
    "eval.dump_crops": (False, bool, "also write per-step crops during `run`"),
}


@dataclass
class RunConfig:
    values: dict[str, object]

    def __getitem__(self, key: str):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key: {key}")
        return self.values[key]

    @property
    def seed(self) -> int:
        return int(self.values["seed"])


def default_config() -> RunConfig:
    return RunConfig({key: default for key, (default, _, _) in SCHEMA.items()})


def _parse_value(key: str, text: str):
    _, typ, _ = SCHEMA[key]
    try:
        if typ is bool:
            return _bool(text)
        return typ(text)
    except ValueError as exc:
        raise ConfigError(f"config key {key}: cannot parse {text!r} as {typ.__name__}") from exc


def load_config(path: str | os.PathLike | None, overrides: list[str] = ()) -> RunConfig:
    """Read a config file (optional) and apply `key=value` overrides.

    Lines are `section.key = value`; blank lines and `#` comments are
    ignored.  Unknown keys are rejected by name.
    """
    cfg = default_config()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.split("#", 1)[0].strip()
                if not stripped:
                    continue
                if "=" not in stripped:
                    raise ConfigError(f"{path}: line {lineno}: expected `key = value`")
                key, _, value = stripped.partition("=")
                key = key.strip()
                if key not in SCHEMA:
                    raise ConfigError(f"{path}: line {lineno}: unknown config key: {key}")
                cfg.values[key] = _parse_value(key, value.strip())
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key: {key}")
        cfg.values[key] = _parse_value(key, value.strip())
    return cfg


def describe_keys() -> str:
    """One help line per key with its default, for --help output."""
    lines = []
    for key, (default, typ, help_text) in SCHEMA.items():
        lines.append(f"  {key} = {default}  ({typ.__name__}) {help_text}")
    return "\n".join(lines)
