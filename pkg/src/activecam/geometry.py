"""Pinhole-model geometry: boxes, crop windows, and control-vector math.

Coordinate convention used everywhere in this package: origin at the
top-left of the world frame, +x right, +y down.  Positive mx pans right,
positive my tilts down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class GeometryError(ValueError):
    """Domain violation in a geometric operation."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned bounding box (left, top, width, height) in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise GeometryError(f"box size must be positive, got {self.w}x{self.h}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class Window:
    """Camera field-of-view crop, stored as center plus size, in pixels."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise GeometryError(f"window size must be positive, got {self.w}x{self.h}")

    @property
    def left(self) -> float:
        return self.cx - self.w / 2.0

    @property
    def top(self) -> float:
        return self.cy - self.h / 2.0

    @property
    def right(self) -> float:
        return self.cx + self.w / 2.0

    @property
    def bottom(self) -> float:
        return self.cy + self.h / 2.0


@dataclass(frozen=True)
class ControlVector:
    """Normalized pan/tilt displacement pair, each component in [-1, 1]."""

    mx: float
    my: float

    def __post_init__(self):
        if not (-1.0 <= self.mx <= 1.0 and -1.0 <= self.my <= 1.0):
            raise GeometryError(f"control components out of [-1,1]: ({self.mx}, {self.my})")


@dataclass(frozen=True)
class FovAngles:
    """Horizontal and vertical angles of view in degrees."""

    ax: float
    ay: float

    def __post_init__(self):
        if not (0.0 < self.ax < 180.0 and 0.0 < self.ay < 180.0):
            raise GeometryError(f"angles of view must lie in (0, 180), got ({self.ax}, {self.ay})")


def normalized_offset(window: Window, centroid: tuple[float, float]) -> ControlVector:
    """Displacement of `centroid` from the window center, normalized by window size.

    The centroid must lie inside the (closed) window; a violation signals a
    bookkeeping bug in the caller, so it raises rather than clamping.
    Components of the result lie in [-0.5, 0.5].
    """
    px, py = centroid
    dx = px - window.cx
    dy = py - window.cy
    if abs(dx) > window.w / 2.0 or abs(dy) > window.h / 2.0:
        raise GeometryError(
            f"centroid ({px}, {py}) lies outside window centered "
            f"({window.cx}, {window.cy}) size {window.w}x{window.h}"
        )
    return ControlVector(dx / window.w, dy / window.h)


def offset_to_angles(m: ControlVector, fov: FovAngles) -> tuple[float, float]:
    """Scale a normalized displacement to pan/tilt angles in degrees.

    Camera motion is bounded by half the angle of view on each axis, so the
    result satisfies |pan| <= ax/2 and |tilt| <= ay/2.
    """
    return (m.mx * fov.ax / 2.0, m.my * fov.ay / 2.0)


def intersection_area(box: BBox, window: Window) -> float:
    """Area of overlap between a box and a window, 0 when disjoint."""
    ix = min(box.x + box.w, window.right) - max(box.x, window.left)
    iy = min(box.y + box.h, window.bottom) - max(box.y, window.top)
    if ix <= 0 or iy <= 0:
        return 0.0
    return ix * iy


def box_iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def visible_targets(window: Window, boxes: list[BBox]) -> list[int]:
    """Indices of boxes with at least half their area inside the window.

    The 50% threshold is inclusive: a box with exactly half its area inside
    counts as visible.
    """
    return [
        i for i, box in enumerate(boxes)
        if intersection_area(box, window) >= 0.5 * box.area
    ]


def centroid_of(boxes: list[BBox]) -> tuple[float, float] | None:
    """Unweighted mean of box centers, or None for an empty list."""
    if not boxes:
        return None
    cx = sum(b.x + b.w / 2.0 for b in boxes) / len(boxes)
    cy = sum(b.y + b.h / 2.0 for b in boxes) / len(boxes)
    return (cx, cy)


def clamp_window(window: Window, world_w: float, world_h: float) -> Window:
    """Shift the window minimally so it lies fully inside the world frame.

    Idempotent; raises when the window cannot fit at all.
    """
    if window.w > world_w or window.h > world_h:
        raise GeometryError(
            f"window {window.w}x{window.h} larger than world frame {world_w}x{world_h}"
        )
    left = min(max(window.left, 0.0), world_w - window.w)
    top = min(max(window.top, 0.0), world_h - window.h)
    return Window(left + window.w / 2.0, top + window.h / 2.0, window.w, window.h)


def center_distance(window: Window, point: tuple[float, float]) -> float:
    """Euclidean pixel distance from the window center to a point."""
    return math.hypot(point[0] - window.cx, point[1] - window.cy)
