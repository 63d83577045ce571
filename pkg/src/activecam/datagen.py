"""Supervised (crop, control) dataset construction from annotated sequences.

Covers random window sampling, train/validation splitting, near-zero-label
batch balancing, and label-aware augmentation.  A dataset persists as a
directory of crop images plus labels.csv with rows
sample_id,mx,my,seq,frame,cx,cy.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .geometry import ControlVector, Window, clamp_window
from .sequences import Frame, Sequence
from .simulator import crop_window, ground_truth_label

LABELS_FILE = "labels.csv"


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class SampleMeta:
    seq_name: str
    frame_index: int
    window: Window


@dataclass(frozen=True)
class Sample:
    image: np.ndarray  # (crop_h, crop_w, 3) uint8
    label: ControlVector
    meta: SampleMeta


@dataclass(frozen=True)
class Dataset:
    samples: list[Sample]
    crop_w: int
    crop_h: int

    def __len__(self) -> int:
        return len(self.samples)


def generate_samples(seq: Sequence, n: int, crop: tuple[int, int], seed: int) -> Dataset:
    """Sample n (crop, label) pairs from uniformly random frames and windows.

    Window positions are uniform over all placements fully inside the world
    frame; labels come from the exact centering rule on the sampled window.
    """
    crop_w, crop_h = crop
    if crop_w > seq.world_w or crop_h > seq.world_h:
        raise DatasetError(f"crop {crop_w}x{crop_h} does not fit in world {seq.world_w}x{seq.world_h}")
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        frame = seq.frames[int(rng.integers(0, len(seq.frames)))]
        left = int(rng.integers(0, seq.world_w - crop_w + 1))
        top = int(rng.integers(0, seq.world_h - crop_h + 1))
        window = Window(left + crop_w / 2.0, top + crop_h / 2.0, crop_w, crop_h)
        label = ground_truth_label(frame, window)
        samples.append(
            Sample(crop_window(frame.image, window), label, SampleMeta(seq.name, frame.index, window))
        )
    return Dataset(samples, crop_w, crop_h)


def split_dataset(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Random disjoint split; the train part gets round(n * fraction) samples.

    Rounding is half-away-from-zero, so a 1-sample dataset at fraction 0.5
    splits 1/0.
    """
    if not (0.0 < train_fraction < 1.0):
        raise DatasetError(f"train fraction must be in (0, 1), got {train_fraction}")
    n = len(ds.samples)
    n_train = int(math.floor(n * train_fraction + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    train = [ds.samples[i] for i in perm[:n_train]]
    val = [ds.samples[i] for i in perm[n_train:]]
    return (Dataset(train, ds.crop_w, ds.crop_h), Dataset(val, ds.crop_w, ds.crop_h))


def _near_zero(label: ControlVector, tau: float) -> bool:
    return max(abs(label.mx), abs(label.my)) < tau


def balanced_batches(
    ds: Dataset,
    batch_size: int,
    near_zero_tau: float = 0.1,
    max_near_zero_frac: float = 0.5,
    seed: int = 0,
) -> Iterator[list[Sample]]:
    """Endless stream of batches with a cap on near-zero-label samples.

    Each batch holds at most ceil(batch_size * max_near_zero_frac) samples
    whose label is within near_zero_tau of zero (infinity norm); the excess
    is resampled from the remaining pool.  When no sample exceeds the
    threshold the cap is infeasible, so it is waived with a warning.
    """
    if not ds.samples:
        raise DatasetError("cannot draw batches from an empty dataset")
    if batch_size > len(ds.samples):
        raise DatasetError(f"batch size {batch_size} exceeds dataset size {len(ds.samples)}")
    if not (0.0 <= max_near_zero_frac <= 1.0):
        raise DatasetError(f"max near-zero fraction must be in [0, 1], got {max_near_zero_frac}")

    far_pool = np.array(
        [i for i, s in enumerate(ds.samples) if not _near_zero(s.label, near_zero_tau)], dtype=np.int64
    )
    cap = math.ceil(batch_size * max_near_zero_frac)
    waived = cap < batch_size and far_pool.size == 0
    if waived:
        warnings.warn(
            "near-zero balancing waived: every sample is below the threshold",
            stacklevel=2,
        )

    rng = np.random.default_rng(seed)

    def stream() -> Iterator[list[Sample]]:
        n = len(ds.samples)
        while True:
            idx = rng.choice(n, size=batch_size, replace=False)
            if not waived:
                near = [i for i in idx if _near_zero(ds.samples[i].label, near_zero_tau)]
                excess = len(near) - cap
                if excess > 0:
                    drop = rng.choice(len(near), size=excess, replace=False)
                    dropped = {near[j] for j in drop}
                    kept = [i for i in idx if i not in dropped]
                    remaining = np.setdiff1d(far_pool, np.array(kept, dtype=np.int64))
                    if remaining.size >= excess:
                        extra = rng.choice(remaining, size=excess, replace=False)
                    else:  # small far pool: allow duplicates rather than break the cap
                        extra = rng.choice(far_pool, size=excess, replace=True)
                    idx = np.concatenate([np.array(kept, dtype=np.int64), extra])
            yield [ds.samples[int(i)] for i in idx]

    return stream()


@dataclass(frozen=True)
class AugmentConfig:
    flip_prob: float = 0.5
    translate_prob: float = 0.5
    max_jitter: int = 8
    photometric_prob: float = 0.3  # applied independently per photometric op
    brightness_delta: float = 30.0
    contrast_range: tuple[float, float] = (0.7, 1.3)
    color_delta: float = 15.0
    blur_sigma: tuple[float, float] = (0.5, 1.2)


def _photometric(image: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    out = image.astype(np.float32)
    if rng.random() < cfg.photometric_prob:
        out += rng.uniform(-cfg.brightness_delta, cfg.brightness_delta)
    if rng.random() < cfg.photometric_prob:
        factor = rng.uniform(*cfg.contrast_range)
        out = (out - 127.5) * factor + 127.5
    if rng.random() < cfg.photometric_prob:
        out += rng.uniform(-cfg.color_delta, cfg.color_delta, size=(1, 1, 3))
    if rng.random() < cfg.photometric_prob:
        sigma = rng.uniform(*cfg.blur_sigma)
        blurred = gaussian_filter(out, sigma=(sigma, sigma, 0))
        if rng.random() < 0.5:
            out = blurred
        else:
            out = out + 0.7 * (out - blurred)  # unsharp mask
    return out.clip(0, 255).astype(np.uint8)


def augment_sample(
    s: Sample,
    source_frame: Frame | None,
    cfg: AugmentConfig,
    seed: int | np.random.Generator,
) -> Sample:
    """Label-aware augmentation of one sample.

    Translation re-crops the source frame at a jittered window and
    recomputes the label exactly (targets may cross the visibility
    boundary, so offsetting the old label would be wrong); the horizontal
    flip mirrors the image and negates the pan component; photometric ops
    leave the label untouched.  Translation is skipped when no source
    frame is available.
    """
    rng = np.random.default_rng(seed)
    image, label, meta = s.image, s.label, s.meta

    if source_frame is not None and rng.random() < cfg.translate_prob:
        jx = int(rng.integers(-cfg.max_jitter, cfg.max_jitter + 1))
        jy = int(rng.integers(-cfg.max_jitter, cfg.max_jitter + 1))
        win = meta.window
        moved = Window(win.cx + jx, win.cy + jy, win.w, win.h)
        h, w = source_frame.image.shape[:2]
        moved = clamp_window(moved, w, h)
        image = crop_window(source_frame.image, moved)
        label = ground_truth_label(source_frame, moved)
        meta = replace(meta, window=moved)

    if rng.random() < cfg.flip_prob:
        image = image[:, ::-1].copy()
        label = ControlVector(-label.mx, label.my)

    image = _photometric(image, cfg, rng)
    return Sample(image, label, meta)


def flip_sample(s: Sample) -> Sample:
    """Horizontal mirror of (image, label); applying it twice is the identity."""
    return Sample(s.image[:, ::-1].copy(), ControlVector(-s.label.mx, s.label.my), s.meta)


def save_dataset(ds: Dataset, directory: str | os.PathLike) -> None:
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, LABELS_FILE), "w", encoding="utf-8", newline="\n") as fh:
        for i, s in enumerate(ds.samples):
            Image.fromarray(s.image).save(os.path.join(directory, "sample_%06d.png" % i))
            fh.write(
                f"{i},{s.label.mx:.6f},{s.label.my:.6f},{s.meta.seq_name},"
                f"{s.meta.frame_index},{s.meta.window.cx:.6f},{s.meta.window.cy:.6f}\n"
            )


def load_dataset(directory: str | os.PathLike) -> Dataset:
    directory = os.fspath(directory)
    labels_path = os.path.join(directory, LABELS_FILE)
    if not os.path.isfile(labels_path):
        raise DatasetError(f"missing labels file: {labels_path}")
    samples = []
    crop_w = crop_h = None
    with open(labels_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise DatasetError(f"{labels_path}: row {lineno}: expected 7 fields")
            sid = int(parts[0])
            image = np.asarray(Image.open(os.path.join(directory, "sample_%06d.png" % sid)).convert("RGB"))
            if crop_w is None:
                crop_h, crop_w = image.shape[:2]
            elif image.shape[:2] != (crop_h, crop_w):
                raise DatasetError(f"{labels_path}: row {lineno}: inconsistent crop size")
            label = ControlVector(float(parts[1]), float(parts[2]))
            meta = SampleMeta(parts[3], int(parts[4]), Window(float(parts[5]), float(parts[6]), crop_w, crop_h))
            samples.append(Sample(image, label, meta))
    if crop_w is None:
        raise DatasetError(f"{labels_path}: no samples")
    return Dataset(samples, crop_w, crop_h)
