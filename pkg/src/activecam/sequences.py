"""Annotated image sequences: loading, saving, and synthetic generation.

On-disk layout of a sequence directory:
  frame_000000.png, frame_000001.png, ...   lossless RGB world frames
  annotations.csv                            one row per box:
                                             frame_index,target_id,x,y,w,h
                                             (integers, pixels, no header, LF)
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image

from .geometry import BBox

ANNOTATION_FILE = "annotations.csv"
FRAME_PATTERN = "frame_%06d.png"


class SequenceError(ValueError):
    """Raised when a sequence cannot be loaded, saved, or synthesized."""


@dataclass(frozen=True)
class Frame:
    """One world frame: RGB raster plus per-target boxes."""

    index: int
    image: np.ndarray  # (H, W, 3) uint8
    boxes: list[tuple[int, BBox]] = field(default_factory=list)


@dataclass(frozen=True)
class Sequence:
    frames: list[Frame]
    world_w: int
    world_h: int
    name: str = "unnamed"

    def __len__(self) -> int:
        return len(self.frames)


def _check_box_in_world(box: BBox, world_w: int, world_h: int) -> bool:
    return box.x >= 0 and box.y >= 0 and box.x + box.w <= world_w and box.y + box.h <= world_h


def load_sequence(directory: str | os.PathLike) -> Sequence:
    """Load a sequence directory (numbered images plus annotation CSV).

    Frames are sorted by their numeric index; every annotation row must
    reference an existing frame and lie inside the world frame.
    """
    directory = os.fspath(directory)
    if not os.path.isdir(directory):
        raise SequenceError(f"not a directory: {directory}")

    image_files = sorted(f for f in os.listdir(directory) if f.startswith("frame_") and f.endswith(".png"))
    images = []
    for fname in image_files:
        arr = np.asarray(Image.open(os.path.join(directory, fname)).convert("RGB"))
        images.append(arr)
    if images:
        h, w = images[0].shape[:2]
        for fname, arr in zip(image_files, images):
            if arr.shape[:2] != (h, w):
                raise SequenceError(f"frame {fname} has size {arr.shape[1]}x{arr.shape[0]}, expected {w}x{h}")
    else:
        raise SequenceError(f"no frame_*.png images found in {directory}")

    ann_path = os.path.join(directory, ANNOTATION_FILE)
    if not os.path.isfile(ann_path):
        raise SequenceError(f"missing annotation file: {ann_path}")

    per_frame: dict[int, list[tuple[int, BBox]]] = {i: [] for i in range(len(images))}
    with open(ann_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise SequenceError(f"{ann_path}: row {lineno}: expected 6 fields, got {len(parts)}")
            try:
                fidx, tid, x, y, bw, bh = (int(p) for p in parts)
            except ValueError:
                raise SequenceError(f"{ann_path}: row {lineno}: non-integer field in {line!r}") from None
            if fidx not in per_frame:
                raise SequenceError(
                    f"{ann_path}: row {lineno}: frame index {fidx} outside 0..{len(images) - 1}"
                )
            box = BBox(x, y, bw, bh)
            if not _check_box_in_world(box, w, h):
                raise SequenceError(f"{ann_path}: row {lineno}: box {parts[2:]} outside {w}x{h} frame")
            if any(existing_id == tid for existing_id, _ in per_frame[fidx]):
                raise SequenceError(f"{ann_path}: row {lineno}: duplicate target id {tid} in frame {fidx}")
            per_frame[fidx].append((tid, box))

    frames = [Frame(i, images[i], per_frame[i]) for i in range(len(images))]
    return Sequence(frames, w, h, name=os.path.basename(os.path.normpath(directory)))


def save_sequence(seq: Sequence, directory: str | os.PathLike) -> None:
    """Write a sequence to disk so that load_sequence round-trips it."""
    directory = os.fspath(directory)
    try:
        os.makedirs(directory, exist_ok=True)
        for frame in seq.frames:
            Image.fromarray(frame.image).save(os.path.join(directory, FRAME_PATTERN % frame.index))
        with open(os.path.join(directory, ANNOTATION_FILE), "w", encoding="utf-8", newline="\n") as fh:
            for frame in seq.frames:
                for tid, box in frame.boxes:
                    fh.write(f"{frame.index},{tid},{int(box.x)},{int(box.y)},{int(box.w)},{int(box.h)}\n")
    except OSError as exc:
        raise SequenceError(f"failed to write sequence to {directory}: {exc}") from exc


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic moving-target generator.

    Targets are solid high-contrast rectangles drifting over a static
    textured background with piecewise-constant velocity, reflecting at the
    world edges.  With group_spread > 0 all targets move as one rigid
    cluster whose anchor offsets are at most group_spread pixels apart;
    this keeps multiple targets co-visible inside a small camera window.
    """

    world_w: int = 256
    world_h: int = 192
    frames: int = 120
    targets: int = 2
    size_min: int = 8
    size_max: int = 14
    speed_min: float = 1.0
    speed_max: float = 2.0
    turn_prob: float = 0.05
    texture_seed: int = 0
    group_spread: float = 0.0  # <= 0 disables the rigid-group mode


def _make_background(cfg: SynthConfig) -> np.ndarray:
    """Static mid-gray texture; target colors are kept far outside its range."""
    rng = np.random.default_rng(cfg.texture_seed)
    noise = rng.uniform(-1.0, 1.0, size=(cfg.world_h // 4 + 2, cfg.world_w // 4 + 2))
    # Cheap smooth upsample: repeat then box-blur once.
    up = np.repeat(np.repeat(noise, 4, axis=0), 4, axis=1)[: cfg.world_h, : cfg.world_w]
    smooth = (up + np.roll(up, 1, 0) + np.roll(up, 1, 1) + np.roll(up, (1, 1), (0, 1))) / 4.0
    gray = (100.0 + 25.0 * smooth).clip(70, 130).astype(np.uint8)
    return np.stack([gray, gray, gray], axis=-1)


def _target_color(rng: np.random.Generator) -> np.ndarray:
    # Each channel either near-black or near-saturated, never in the
    # background's 70..130 gray band, so every target pixel differs from it.
    channels = [rng.integers(0, 35) if rng.random() < 0.5 else rng.integers(190, 256) for _ in range(3)]
    if all(c < 35 for c in channels):  # guarantee at least one bright channel
        channels[int(rng.integers(0, 3))] = int(rng.integers(190, 256))
    return np.array(channels, dtype=np.uint8)


def _random_direction(rng: np.random.Generator) -> tuple[float, float]:
    theta = rng.uniform(0.0, 2.0 * np.pi)
    return (np.cos(theta), np.sin(theta))


def _reflect(pos: float, lo: float, hi: float, vel: float) -> tuple[float, float]:
    # Reflect a scalar coordinate into [lo, hi], flipping velocity on bounce.
    span = hi - lo
    if span <= 0:
        return lo, 0.0
    while pos < lo or pos > hi:
        if pos < lo:
            pos = 2 * lo - pos
            vel = -vel
        elif pos > hi:
            pos = 2 * hi - pos
            vel = -vel
    return pos, vel


def synth_sequence(cfg: SynthConfig, seed: int) -> Sequence:
    """Generate a deterministic synthetic sequence for a given (cfg, seed)."""
    if cfg.size_max > cfg.world_w or cfg.size_max > cfg.world_h:
        raise SequenceError(
            f"target size {cfg.size_max} exceeds world frame {cfg.world_w}x{cfg.world_h}"
        )
    if cfg.size_min > cfg.size_max or cfg.size_min < 1:
        raise SequenceError(f"bad target size range [{cfg.size_min}, {cfg.size_max}]")

    rng = np.random.default_rng(seed)
    background = _make_background(cfg)

    sizes = [
        (int(rng.integers(cfg.size_min, cfg.size_max + 1)), int(rng.integers(cfg.size_min, cfg.size_max + 1)))
        for _ in range(cfg.targets)
    ]
    colors = [_target_color(rng) for _ in range(cfg.targets)]

    grouped = cfg.group_spread > 0 and cfg.targets > 0
    if grouped:
        offsets = [
            (float(rng.uniform(0, cfg.group_spread)), float(rng.uniform(0, cfg.group_spread)))
            for _ in range(cfg.targets)
        ]
        ext_w = max(off[0] + tw for off, (tw, _) in zip(offsets, sizes))
        ext_h = max(off[1] + th for off, (_, th) in zip(offsets, sizes))
        if ext_w > cfg.world_w or ext_h > cfg.world_h:
            raise SequenceError("group spread plus target size exceeds world frame")
        anchor = np.array([rng.uniform(0, cfg.world_w - ext_w), rng.uniform(0, cfg.world_h - ext_h)])
        speed = rng.uniform(cfg.speed_min, cfg.speed_max)
        direction = _random_direction(rng)
        vel = np.array([direction[0] * speed, direction[1] * speed])
    else:
        positions = []
        velocities = []
        for tw, th in sizes:
            positions.append(np.array([rng.uniform(0, cfg.world_w - tw), rng.uniform(0, cfg.world_h - th)]))
            speed = rng.uniform(cfg.speed_min, cfg.speed_max)
            direction = _random_direction(rng)
            velocities.append(np.array([direction[0] * speed, direction[1] * speed]))

    frames = []
    for fidx in range(cfg.frames):
        img = background.copy()
        boxes: list[tuple[int, BBox]] = []
        if grouped:
            for tid, ((offx, offy), (tw, th), color) in enumerate(zip(offsets, sizes, colors)):
                left = int(round(anchor[0] + offx))
                top = int(round(anchor[1] + offy))
                left = min(max(left, 0), cfg.world_w - tw)
                top = min(max(top, 0), cfg.world_h - th)
                img[top : top + th, left : left + tw] = color
                boxes.append((tid, BBox(left, top, tw, th)))
        else:
            for tid, (pos, (tw, th), color) in enumerate(zip(positions, sizes, colors)):
                left = int(round(pos[0]))
                top = int(round(pos[1]))
                left = min(max(left, 0), cfg.world_w - tw)
                top = min(max(top, 0), cfg.world_h - th)
                img[top : top + th, left : left + tw] = color
                boxes.append((tid, BBox(left, top, tw, th)))
        frames.append(Frame(fidx, img, boxes))

        # Advance motion state for the next frame.
        if grouped:
            if rng.random() < cfg.turn_prob:
                speed = float(np.hypot(*vel))
                direction = _random_direction(rng)
                vel = np.array([direction[0] * speed, direction[1] * speed])
            anchor = anchor + vel
            anchor[0], vel[0] = _reflect(anchor[0], 0.0, cfg.world_w - ext_w, vel[0])
            anchor[1], vel[1] = _reflect(anchor[1], 0.0, cfg.world_h - ext_h, vel[1])
        else:
            for t in range(cfg.targets):
                if rng.random() < cfg.turn_prob:
                    speed = float(np.hypot(*velocities[t]))
                    direction = _random_direction(rng)
                    velocities[t] = np.array([direction[0] * speed, direction[1] * speed])
                tw, th = sizes[t]
                positions[t] = positions[t] + velocities[t]
                positions[t][0], velocities[t][0] = _reflect(
                    positions[t][0], 0.0, cfg.world_w - tw, velocities[t][0]
                )
                positions[t][1], velocities[t][1] = _reflect(
                    positions[t][1], 0.0, cfg.world_h - th, velocities[t][1]
                )

    return Sequence(frames, cfg.world_w, cfg.world_h, name=f"synth-{seed}")


def rename(seq: Sequence, name: str) -> Sequence:
    return replace(seq, name=name)
