"""Virtual active camera: a crop window driven over an annotated sequence.

The closed loop is frame-synchronous and strictly causal: the controller
sees the crop of frame t, its (optionally filtered) control moves the
window, and the camera then observes frame t+1 through the moved window.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .filtering import WmaState, wma_update
from .geometry import (
    BBox,
    ControlVector,
    Window,
    centroid_of,
    center_distance,
    clamp_window,
    normalized_offset,
    visible_targets,
)
from .sequences import Frame, Sequence


class SimulationError(RuntimeError):
    """Episode-level failure (bad start state, controller crash, trace I/O)."""


class EpisodeEnd(Exception):
    """Signals that the camera was stepped past the last frame."""


@dataclass(frozen=True)
class CameraState:
    window: Window
    frame_index: int = 0


@dataclass(frozen=True)
class StepRecord:
    frame_index: int
    window: Window
    control_applied: ControlVector
    visible_target_ids: tuple[int, ...]
    centroid_distance: float | None


@dataclass(frozen=True)
class EpisodeTrace:
    records: list[StepRecord]

    def __len__(self) -> int:
        return len(self.records)


def _round_half_away(x: float) -> int:
    # Control-to-pixel conversion; ties round away from zero.
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


def crop_window(image: np.ndarray, window: Window) -> np.ndarray:
    """Extract the window's pixels from a world frame (copy)."""
    left = int(round(window.left))
    top = int(round(window.top))
    w = int(round(window.w))
    h = int(round(window.h))
    return image[top : top + h, left : left + w].copy()


def crop_relative_boxes(
    boxes: list[tuple[int, BBox]], window: Window
) -> list[tuple[int, BBox]]:
    """Translate boxes into window coordinates, keeping only those that overlap it."""
    out = []
    for tid, box in boxes:
        ix = min(box.x + box.w, window.right) - max(box.x, window.left)
        iy = min(box.y + box.h, window.bottom) - max(box.y, window.top)
        if ix > 0 and iy > 0:
            out.append((tid, BBox(box.x - window.left, box.y - window.top, box.w, box.h)))
    return out


def ground_truth_label(frame: Frame, window: Window) -> ControlVector:
    """Exact centering control for the current window on a frozen frame.

    Uses the 50%-visibility rule to pick which targets count; with no
    visible target the correct action is to stay put, (0, 0).
    """
    boxes = [b for _, b in frame.boxes]
    vis = visible_targets(window, boxes)
    if not vis:
        return ControlVector(0.0, 0.0)
    centroid = centroid_of([boxes[i] for i in vis])
    return normalized_offset(window, centroid)


def apply_control(state: CameraState, m: ControlVector, world: Sequence) -> CameraState:
    """Move the window by the control (in whole pixels) and advance one frame."""
    if state.frame_index >= len(world.frames):
        raise EpisodeEnd(f"no frame {state.frame_index} to step from")
    dx = _round_half_away(m.mx * state.window.w)
    dy = _round_half_away(m.my * state.window.h)
    moved = Window(state.window.cx + dx, state.window.cy + dy, state.window.w, state.window.h)
    clamped = clamp_window(moved, world.world_w, world.world_h)
    return CameraState(clamped, state.frame_index + 1)


def run_episode(
    seq: Sequence,
    controller,
    start: CameraState,
    output_filter: WmaState | None = None,
    crop_dir: str | os.PathLike | None = None,
) -> EpisodeTrace:
    """Run the closed loop over every remaining frame of the sequence.

    `controller` is a callable mapping a ControllerInput to a
    ControlVector (see the controllers module); if it has a reset()
    method it is reset before the first frame.  `output_filter`, when
    given, smooths controller outputs with a weighted moving average
    before they reach the camera.
    """
    from .controllers import ControllerInput  # local import to avoid a cycle

    win = clamp_window(start.window, seq.world_w, seq.world_h)
    if (win.cx, win.cy) != (start.window.cx, start.window.cy):
        raise SimulationError("start window lies outside the world frame")
    if hasattr(controller, "reset"):
        controller.reset()

    state = start
    wma = output_filter
    records: list[StepRecord] = []
    if crop_dir is not None:
        os.makedirs(crop_dir, exist_ok=True)

    while state.frame_index < len(seq.frames):
        frame = seq.frames[state.frame_index]
        crop = crop_window(frame.image, state.window)
        rel_boxes = crop_relative_boxes(frame.boxes, state.window)
        try:
            raw = controller(ControllerInput(crop=crop, boxes=rel_boxes))
        except Exception as exc:
            raise SimulationError(f"controller failed at frame {state.frame_index}: {exc}") from exc
        if wma is not None:
            wma, control = wma_update(wma, raw)
        else:
            control = raw

        boxes = [b for _, b in frame.boxes]
        vis = visible_targets(state.window, boxes)
        centroid = centroid_of([boxes[i] for i in vis])
        dist = center_distance(state.window, centroid) if centroid is not None else None
        records.append(
            StepRecord(frame.index, state.window, control, tuple(frame.boxes[i][0] for i in vis), dist)
        )
        if crop_dir is not None:
            Image.fromarray(crop).save(os.path.join(crop_dir, "crop_%06d.png" % frame.index))

        state = apply_control(state, control, seq)

    return EpisodeTrace(records)


def save_trace(trace: EpisodeTrace, path: str | os.PathLike) -> None:
    """Write a trace as line-delimited records.

    Columns: frame,cx,cy,mx,my,n_visible,centroid_dist (floats with six
    decimals; centroid_dist left empty when no target is visible).
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in trace.records:
            dist = "" if r.centroid_distance is None else f"{r.centroid_distance:.6f}"
            fh.write(
                f"{r.frame_index},{r.window.cx:.6f},{r.window.cy:.6f},"
                f"{r.control_applied.mx:.6f},{r.control_applied.my:.6f},"
                f"{len(r.visible_target_ids)},{dist}\n"
            )


def load_trace(path: str | os.PathLike, window_w: float, window_h: float) -> EpisodeTrace:
    """Read a trace written by save_trace; visible ids are not persisted."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise SimulationError(f"{path}: row {lineno}: expected 7 fields")
            frame = int(parts[0])
            cx, cy, mx, my = (float(p) for p in parts[1:5])
            n_visible = int(parts[5])
            dist = None if parts[6] == "" else float(parts[6])
            records.append(
                StepRecord(
                    frame,
                    Window(cx, cy, window_w, window_h),
                    ControlVector(mx, my),
                    tuple(range(n_visible)),
                    dist,
                )
            )
    return EpisodeTrace(records)
