"""Controller contract and the four implementations.

A controller is a callable mapping a ControllerInput (the current camera
crop, plus crop-relative ground-truth boxes for the oracle and the
synthetic detector) to a ControlVector.  Stateful controllers also expose
reset(), which run_episode calls before the first frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .filtering import WmaState, wma_update
from .geometry import (
    BBox,
    ControlVector,
    Window,
    centroid_of,
    normalized_offset,
    visible_targets,
)
from .tracking import (
    Detection,
    DetectorConfig,
    TrackerConfig,
    TrackerState,
    step_tracker,
    synthetic_detector,
    track_box,
)


class ControllerError(RuntimeError):
    pass


@dataclass(frozen=True)
class ControllerInput:
    crop: np.ndarray  # (H, W, 3) uint8
    boxes: list[tuple[int, BBox]] | None = None  # crop-relative ground truth


def _crop_rect(inp: ControllerInput) -> Window:
    h, w = inp.crop.shape[:2]
    return Window(w / 2.0, h / 2.0, w, h)


def oracle_controller(inp: ControllerInput) -> ControlVector:
    """Exact centering control from the annotations; the upper bound."""
    if inp.boxes is None:
        raise ControllerError("oracle controller requires ground-truth boxes")
    window = _crop_rect(inp)
    boxes = [b for _, b in inp.boxes]
    vis = visible_targets(window, boxes)
    if not vis:
        return ControlVector(0.0, 0.0)
    return normalized_offset(window, centroid_of([boxes[i] for i in vis]))


def static_controller(inp: ControllerInput) -> ControlVector:
    """Null baseline: never move."""
    return ControlVector(0.0, 0.0)


class OracleController:
    def __call__(self, inp: ControllerInput) -> ControlVector:
        return oracle_controller(inp)


class StaticController:
    def __call__(self, inp: ControllerInput) -> ControlVector:
        return static_controller(inp)


def _centroid_control(window: Window, centroid: tuple[float, float]) -> ControlVector:
    # Like normalized_offset but tolerant: track estimates may drift a
    # little outside the crop, so clamp instead of raising.
    mx = (centroid[0] - window.cx) / window.w
    my = (centroid[1] - window.cy) / window.h
    return ControlVector(min(max(mx, -0.5), 0.5), min(max(my, -0.5), 0.5))


def baseline_controller_step(
    state: TrackerState,
    inp: ControllerInput,
    det_cfg: DetectorConfig,
    trk_cfg: TrackerConfig,
    seed: int,
    frame_index: int = 0,
) -> tuple[TrackerState, ControlVector]:
    """Detect, track, and steer toward the confirmed tracks' centroid."""
    if inp.boxes is None:
        raise ControllerError("synthetic detector requires ground-truth boxes")
    h, w = inp.crop.shape[:2]
    detections = synthetic_detector(
        [b for _, b in inp.boxes], det_cfg, seed, frame_index, crop_size=(w, h)
    )
    state = step_tracker(state, detections, trk_cfg)
    confirmed = [t for t in state.tracks if t.confirmed]
    if not confirmed:
        return state, ControlVector(0.0, 0.0)
    centroid = centroid_of([track_box(t) for t in confirmed])
    return state, _centroid_control(_crop_rect(inp), centroid)


class BaselineController:
    """Tracking-by-detection pipeline: detector, Kalman filter, centroid control.

    Keeps a per-frame track log (frame, id, cx, cy, hits, misses,
    confirmed) that can be dumped next to the episode trace for debugging.
    """

    def __init__(
        self,
        det_cfg: DetectorConfig = DetectorConfig(),
        trk_cfg: TrackerConfig = TrackerConfig(),
        seed: int = 0,
    ):
        self.det_cfg = det_cfg
        self.trk_cfg = trk_cfg
        self.seed = seed
        self.reset()

    def reset(self):
        self.state = TrackerState()
        self.frame_index = 0
        self.track_log: list[tuple[int, int, float, float, int, int, bool]] = []

    def __call__(self, inp: ControllerInput) -> ControlVector:
        self.state, control = baseline_controller_step(
            self.state, inp, self.det_cfg, self.trk_cfg, self.seed, self.frame_index
        )
        for t in self.state.tracks:
            self.track_log.append(
                (self.frame_index, t.id, float(t.mean[0]), float(t.mean[1]), t.hits, t.misses, t.confirmed)
            )
        self.frame_index += 1
        return control

    def save_track_log(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("frame,track_id,cx,cy,hits,misses,confirmed\n")
            for frame, tid, cx, cy, hits, misses, confirmed in self.track_log:
                fh.write(f"{frame},{tid},{cx:.6f},{cy:.6f},{hits},{misses},{int(confirmed)}\n")


def _prepare_input(crop: np.ndarray, input_w: int, input_h: int) -> np.ndarray:
    if crop.shape[:2] != (input_h, input_w):
        crop = np.asarray(
            Image.fromarray(crop).resize((input_w, input_h), Image.Resampling.BILINEAR)
        )
    x = crop.astype(np.float32) / 255.0
    return x.transpose(2, 0, 1)[None]


def cnn_controller_step(
    state: WmaState,
    inp: ControllerInput,
    graph,
    params,
) -> tuple[WmaState, ControlVector]:
    """Infer-mode network forward, clamp to the label range, then smooth.

    The raw tanh output can reach +-1, but ground-truth displacements never
    exceed +-0.5 (the centroid lies inside the window), so the output is
    clamped before filtering and application.
    """
    from .nn import forward  # deferred: keep module import light

    x = _prepare_input(inp.crop, graph.input_w, graph.input_h)
    fwd = forward(graph, params, x, "infer")
    mx, my = fwd.output[0]
    raw = ControlVector(min(max(float(mx), -0.5), 0.5), min(max(float(my), -0.5), 0.5))
    return wma_update(state, raw)


class CnnController:
    """Learned controller with an internal weighted-moving-average filter.

    Use wma_k=1 for unfiltered per-image evaluation.
    """

    def __init__(self, graph, params, wma_k: int = 3):
        from .nn import validate_params

        validate_params(graph, params)
        self.graph = graph
        self.params = params
        self.wma_k = wma_k
        self.reset()

    def reset(self):
        self.state = WmaState(k=self.wma_k)

    def __call__(self, inp: ControllerInput) -> ControlVector:
        self.state, control = cnn_controller_step(self.state, inp, self.graph, self.params)
        return control
