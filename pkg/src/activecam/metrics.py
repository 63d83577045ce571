"""Monitoring metrics over episode traces and per-image control errors.

Closed-loop metrics:
  1. average number of visible targets per frame,
  2. monitoring time: fraction of frames with at least one visible target,
  3. average pixel distance from the window center to the visible-target
     centroid, over frames where one exists (reported as absent, never 0,
     when no frame has a visible target).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .controllers import ControllerInput
from .datagen import Dataset
from .geometry import centroid_of, center_distance, visible_targets
from .sequences import Sequence
from .simulator import EpisodeTrace, crop_relative_boxes


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    frames_evaluated: int
    avg_targets_in_fov: float | None = None
    monitoring_time: float | None = None
    avg_centroid_distance: float | None = None  # pixels; None when never defined
    avg_abs_error: tuple[float, float] | None = None  # per-axis, still-image mode
    max_abs_error: tuple[float, float] | None = None

    def as_kv(self) -> str:
        """Machine-readable key/value lines, six-decimal floats."""
        lines = [f"frames_evaluated = {self.frames_evaluated}"]
        if self.avg_targets_in_fov is not None:
            lines.append(f"avg_targets_in_fov = {self.avg_targets_in_fov:.6f}")
        if self.monitoring_time is not None:
            lines.append(f"monitoring_time = {self.monitoring_time:.6f}")
        lines.append(
            "avg_centroid_distance = "
            + ("absent" if self.avg_centroid_distance is None else f"{self.avg_centroid_distance:.6f}")
        )
        if self.avg_abs_error is not None:
            lines.append(f"avg_abs_error_mx = {self.avg_abs_error[0]:.6f}")
            lines.append(f"avg_abs_error_my = {self.avg_abs_error[1]:.6f}")
        if self.max_abs_error is not None:
            lines.append(f"max_abs_error_mx = {self.max_abs_error[0]:.6f}")
            lines.append(f"max_abs_error_my = {self.max_abs_error[1]:.6f}")
        return "\n".join(lines) + "\n"

    def as_table(self) -> str:
        rows = [("frames evaluated", str(self.frames_evaluated))]
        if self.avg_targets_in_fov is not None:
            rows.append(("avg targets in FoV", f"{self.avg_targets_in_fov:.3f}"))
        if self.monitoring_time is not None:
            rows.append(("monitoring time", f"{100.0 * self.monitoring_time:.1f}%"))
        if self.avg_centroid_distance is not None:
            rows.append(("avg centroid distance", f"{self.avg_centroid_distance:.2f} px"))
        elif self.avg_abs_error is None:
            rows.append(("avg centroid distance", "absent (no visible target)"))
        if self.avg_abs_error is not None:
            rows.append(("avg |error| pan/tilt", f"{self.avg_abs_error[0]:.4f} / {self.avg_abs_error[1]:.4f}"))
        if self.max_abs_error is not None:
            rows.append(("max |error| pan/tilt", f"{self.max_abs_error[0]:.4f} / {self.max_abs_error[1]:.4f}"))
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows) + "\n"


def evaluate_trace(trace: EpisodeTrace, seq: Sequence) -> MetricsReport:
    """Score a closed-loop trace against the sequence annotations.

    Visibility and centroid distances are recomputed from the traced
    windows, so the result does not depend on what the simulator recorded.
    """
    if len(trace.records) != len(seq.frames):
        raise MetricsError(
            f"trace has {len(trace.records)} records for a {len(seq.frames)}-frame sequence"
        )
    total_visible = 0
    frames_with_target = 0
    dist_sum = 0.0
    for record in trace.records:
        if not (0 <= record.frame_index < len(seq.frames)):
            raise MetricsError(f"trace references missing frame {record.frame_index}")
        boxes = [b for _, b in seq.frames[record.frame_index].boxes]
        vis = visible_targets(record.window, boxes)
        total_visible += len(vis)
        if vis:
            frames_with_target += 1
            dist_sum += center_distance(record.window, centroid_of([boxes[i] for i in vis]))
    n = len(trace.records)
    return MetricsReport(
        frames_evaluated=n,
        avg_targets_in_fov=total_visible / n,
        monitoring_time=frames_with_target / n,
        avg_centroid_distance=(dist_sum / frames_with_target) if frames_with_target else None,
    )


def still_image_errors(controller, dataset: Dataset, sequences: dict[str, Sequence] | None = None) -> MetricsReport:
    """Per-image |prediction - label| statistics, per axis.

    Each sample is evaluated independently (stateful controllers are reset
    per sample, and no moving average belongs here).  `sequences` maps
    sequence names to loaded sequences so that controllers needing
    ground-truth boxes (oracle, synthetic-detector baseline) can be fed
    crop-relative annotations.
    """
    if not dataset.samples:
        raise MetricsError("cannot evaluate an empty dataset")
    sum_ex = sum_ey = 0.0
    max_ex = max_ey = 0.0
    for sample in dataset.samples:
        boxes = None
        if sequences is not None and sample.meta.seq_name in sequences:
            frame = sequences[sample.meta.seq_name].frames[sample.meta.frame_index]
            boxes = crop_relative_boxes(frame.boxes, sample.meta.window)
        if hasattr(controller, "reset"):
            controller.reset()
        pred = controller(ControllerInput(crop=sample.image, boxes=boxes))
        ex = abs(pred.mx - sample.label.mx)
        ey = abs(pred.my - sample.label.my)
        sum_ex += ex
        sum_ey += ey
        max_ex = max(max_ex, ex)
        max_ey = max(max_ey, ey)
    n = len(dataset.samples)
    return MetricsReport(
        frames_evaluated=n,
        avg_abs_error=(sum_ex / n, sum_ey / n),
        max_abs_error=(max_ex, max_ey),
    )


def save_report(report: MetricsReport, path_kv: str | os.PathLike, path_table: str | os.PathLike | None = None) -> None:
    with open(path_kv, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.as_kv())
    if path_table is not None:
        with open(path_table, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report.as_table())
