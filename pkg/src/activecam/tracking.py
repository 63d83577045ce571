"""Tracking-by-detection machinery: synthetic detector, Kalman filter,
greedy IoU association, and track lifecycle management.

Track state is (cx, cy, w, h, vcx, vcy): constant-velocity centers,
constant size with process noise.  Measurements are (cx, cy, w, h).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import BBox, box_iou


class TrackingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Detection:
    box: BBox
    score: float


@dataclass(frozen=True)
class DetectorConfig:
    """Synthetic detector derived from ground truth; all noise optional."""

    p_miss: float = 0.0
    center_sigma: float = 0.0  # pixels
    size_sigma: float = 0.0  # fraction of box size
    fp_rate: float = 0.0  # expected false positives per frame


@dataclass(frozen=True)
class TrackerConfig:
    iou_threshold: float = 0.3
    max_age: int = 5
    min_hits: int = 2
    q_pos: float = 1.0  # position process noise, px^2
    q_vel: float = 0.25  # velocity process noise, (px/frame)^2
    q_size: float = 0.1  # size process noise, px^2
    r_meas: float = 1.0  # measurement noise per component, px^2


@dataclass(frozen=True)
class Track:
    id: int
    mean: np.ndarray  # (6,)
    cov: np.ndarray  # (6, 6) symmetric PSD
    hits: int  # consecutive matched frames
    misses: int  # consecutive missed frames
    confirmed: bool


@dataclass(frozen=True)
class TrackerState:
    tracks: tuple[Track, ...] = ()
    next_id: int = 0


_VEL_INIT_VAR = 10.0

_F = np.eye(6)
_F[0, 4] = 1.0
_F[1, 5] = 1.0
_H = np.zeros((4, 6))
_H[0, 0] = _H[1, 1] = _H[2, 2] = _H[3, 3] = 1.0


def synthetic_detector(
    boxes: list[BBox],
    cfg: DetectorConfig,
    seed: int,
    frame_index: int = 0,
    crop_size: tuple[int, int] = (64, 48),
) -> list[Detection]:
    """Noisy detections from ground-truth boxes, deterministic per (frame, seed).

    True boxes are dropped with probability p_miss, survivors get Gaussian
    center/size jitter, and Poisson(fp_rate) false boxes are placed
    uniformly inside the crop.
    """
    rng = np.random.default_rng([seed, frame_index])
    crop_w, crop_h = crop_size
    out: list[Detection] = []
    for box in boxes:
        if rng.random() < cfg.p_miss:
            continue
        cx, cy = box.center
        cx += rng.normal(0.0, cfg.center_sigma) if cfg.center_sigma > 0 else 0.0
        cy += rng.normal(0.0, cfg.center_sigma) if cfg.center_sigma > 0 else 0.0
        w = box.w * max(0.1, 1.0 + (rng.normal(0.0, cfg.size_sigma) if cfg.size_sigma > 0 else 0.0))
        h = box.h * max(0.1, 1.0 + (rng.normal(0.0, cfg.size_sigma) if cfg.size_sigma > 0 else 0.0))
        out.append(Detection(BBox(cx - w / 2.0, cy - h / 2.0, w, h), 1.0))
    n_fp = int(rng.poisson(cfg.fp_rate)) if cfg.fp_rate > 0 else 0
    for _ in range(n_fp):
        w = float(rng.uniform(4.0, max(8.0, crop_w / 4.0)))
        h = float(rng.uniform(4.0, max(8.0, crop_h / 4.0)))
        cx = float(rng.uniform(0.0, crop_w))
        cy = float(rng.uniform(0.0, crop_h))
        out.append(Detection(BBox(cx - w / 2.0, cy - h / 2.0, w, h), 0.5))
    return out


def new_track(track_id: int, det: Detection, cfg: TrackerConfig) -> Track:
    cx, cy = det.box.center
    mean = np.array([cx, cy, det.box.w, det.box.h, 0.0, 0.0])
    cov = np.diag([cfg.r_meas, cfg.r_meas, cfg.r_meas, cfg.r_meas, _VEL_INIT_VAR, _VEL_INIT_VAR])
    return Track(track_id, mean, cov, hits=1, misses=0, confirmed=cfg.min_hits <= 1)


def track_box(track: Track) -> BBox:
    cx, cy, w, h = track.mean[:4]
    w = max(w, 1.0)
    h = max(h, 1.0)
    return BBox(cx - w / 2.0, cy - h / 2.0, w, h)


def _check_psd(cov: np.ndarray) -> np.ndarray:
    cov = (cov + cov.T) / 2.0
    try:
        np.linalg.cholesky(cov + 1e-9 * np.eye(6))
        return cov
    except np.linalg.LinAlgError:
        pass
    # numerical repair: clip tiny negative eigenvalues
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() < -1e-6:
        raise TrackingError(f"covariance not PSD after repair (min eigenvalue {vals.min():.3g})")
    vals = np.clip(vals, 0.0, None)
    return (vecs * vals) @ vecs.T


def kalman_predict(track: Track, cfg: TrackerConfig = TrackerConfig()) -> Track:
    """Constant-velocity prediction; covariance grows by the process noise."""
    q = np.diag([cfg.q_pos, cfg.q_pos, cfg.q_size, cfg.q_size, cfg.q_vel, cfg.q_vel])
    mean = _F @ track.mean
    cov = _check_psd(_F @ track.cov @ _F.T + q)
    return replace(track, mean=mean, cov=cov)


def kalman_update(track: Track, det: Detection, cfg: TrackerConfig = TrackerConfig()) -> Track:
    """Standard measurement update on (cx, cy, w, h), Joseph-stabilized."""
    r = np.eye(4) * cfg.r_meas
    cx, cy = det.box.center
    z = np.array([cx, cy, det.box.w, det.box.h])
    innovation = z - _H @ track.mean
    s = _H @ track.cov @ _H.T + r
    gain = track.cov @ _H.T @ np.linalg.inv(s)
    mean = track.mean + gain @ innovation
    mean[2] = max(mean[2], 1.0)
    mean[3] = max(mean[3], 1.0)
    ikh = np.eye(6) - gain @ _H
    cov = _check_psd(ikh @ track.cov @ ikh.T + gain @ r @ gain.T)
    return replace(track, mean=mean, cov=cov)


def associate(
    tracks: list[Track],
    detections: list[Detection],
    iou_threshold: float,
) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    """Greedy matching by descending IoU between track boxes and detections.

    Returns (matched (track_idx, det_idx) pairs, unmatched track indices,
    unmatched detection indices).  Pairs below the threshold stay unmatched.
    """
    if not (0.0 < iou_threshold < 1.0):
        raise TrackingError(f"iou threshold must be in (0, 1), got {iou_threshold}")
    pairs = []
    for ti, track in enumerate(tracks):
        tb = track_box(track)
        for di, det in enumerate(detections):
            iou = box_iou(tb, det.box)
            if iou >= iou_threshold:
                pairs.append((iou, ti, di))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    matches: list[tuple[int, int]] = []
    used_t: set[int] = set()
    used_d: set[int] = set()
    for _, ti, di in pairs:
        if ti in used_t or di in used_d:
            continue
        matches.append((ti, di))
        used_t.add(ti)
        used_d.add(di)
    unmatched_t = [i for i in range(len(tracks)) if i not in used_t]
    unmatched_d = [i for i in range(len(detections)) if i not in used_d]
    return matches, unmatched_t, unmatched_d


def step_tracker(
    state: TrackerState, detections: list[Detection], cfg: TrackerConfig
) -> TrackerState:
    """One predict/associate/update/lifecycle cycle.

    Unmatched confirmed tracks coast on their prediction until max_age
    consecutive misses; unmatched tentative tracks are dropped immediately.
    """
    predicted = [kalman_predict(t, cfg) for t in state.tracks]
    matches, unmatched_t, unmatched_d = associate(predicted, detections, cfg.iou_threshold)

    next_tracks: list[Track] = []
    for ti, di in matches:
        t = kalman_update(predicted[ti], detections[di], cfg)
        hits = t.hits + 1
        next_tracks.append(replace(t, hits=hits, misses=0, confirmed=t.confirmed or hits >= cfg.min_hits))
    for ti in unmatched_t:
        t = predicted[ti]
        if not t.confirmed:
            continue
        misses = t.misses + 1
        if misses >= cfg.max_age:
            continue
        next_tracks.append(replace(t, hits=0, misses=misses))

    next_id = state.next_id
    for di in unmatched_d:
        next_tracks.append(new_track(next_id, detections[di], cfg))
        next_id += 1

    next_tracks.sort(key=lambda t: t.id)
    return TrackerState(tuple(next_tracks), next_id)
