import math

import numpy as np
import pytest

from activecam.geometry import (
    BBox,
    ControlVector,
    FovAngles,
    GeometryError,
    Window,
    box_iou,
    centroid_of,
    clamp_window,
    intersection_area,
    normalized_offset,
    offset_to_angles,
    visible_targets,
)


class TestNormalizedOffset:
    def test_zero_displacement(self):
        win = Window(160, 120, 320, 240)
        m = normalized_offset(win, (160, 120))
        assert (m.mx, m.my) == (0.0, 0.0)

    def test_quarter_right(self):
        m = normalized_offset(Window(160, 120, 320, 240), (240, 120))
        assert m.mx == pytest.approx(0.25, abs=1e-12)
        assert m.my == 0.0

    def test_corner(self):
        m = normalized_offset(Window(160, 120, 320, 240), (0, 0))
        assert (m.mx, m.my) == (-0.5, -0.5)

    def test_outside_raises(self):
        with pytest.raises(GeometryError):
            normalized_offset(Window(160, 120, 320, 240), (400, 120))

    def test_components_bounded(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            w, h = rng.uniform(10, 400, size=2)
            cx, cy = rng.uniform(200, 600, size=2)
            win = Window(cx, cy, w, h)
            px = rng.uniform(win.left, win.right)
            py = rng.uniform(win.top, win.bottom)
            m = normalized_offset(win, (px, py))
            assert -0.5 <= m.mx <= 0.5
            assert -0.5 <= m.my <= 0.5

    def test_mirror_equivariance(self):
        rng = np.random.default_rng(8)
        world_w = 768.0
        for _ in range(100):
            win = Window(rng.uniform(200, 500), rng.uniform(150, 400), 320, 240)
            px = rng.uniform(win.left, win.right)
            py = rng.uniform(win.top, win.bottom)
            m = normalized_offset(win, (px, py))
            mirrored_win = Window(world_w - win.cx, win.cy, win.w, win.h)
            mm = normalized_offset(mirrored_win, (world_w - px, py))
            assert mm.mx == pytest.approx(-m.mx, abs=1e-9)
            assert mm.my == pytest.approx(m.my, abs=1e-12)


class TestOffsetToAngles:
    def test_no_motion(self):
        assert offset_to_angles(ControlVector(0, 0), FovAngles(62.2, 48.8)) == (0.0, 0.0)

    def test_half_pan(self):
        pan, tilt = offset_to_angles(ControlVector(0.5, 0), FovAngles(62.2, 48.8))
        assert pan == pytest.approx(15.55, abs=1e-9)
        assert tilt == 0.0

    def test_output_bounds_case(self):
        pan, tilt = offset_to_angles(ControlVector(-1, 1), FovAngles(60, 45))
        assert pan == pytest.approx(-30.0, abs=1e-9)
        assert tilt == pytest.approx(22.5, abs=1e-9)

    def test_bounded_by_half_fov(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            m = ControlVector(rng.uniform(-1, 1), rng.uniform(-1, 1))
            fov = FovAngles(rng.uniform(10, 170), rng.uniform(10, 170))
            pan, tilt = offset_to_angles(m, fov)
            assert abs(pan) <= fov.ax / 2 + 1e-12
            assert abs(tilt) <= fov.ay / 2 + 1e-12


class TestVisibleTargets:
    def test_fully_inside(self):
        win = Window(50, 50, 100, 100)
        assert visible_targets(win, [BBox(10, 10, 20, 20)]) == [0]

    def test_exactly_half_inclusive(self):
        win = Window(50, 50, 100, 100)  # covers [0,100]^2
        box = BBox(90, 30, 20, 40)  # x half in, y fully in: 400 of 800
        assert intersection_area(box, win) == pytest.approx(400.0)
        assert visible_targets(win, [box]) == [0]

    def test_disjoint(self):
        win = Window(50, 50, 100, 100)
        assert visible_targets(win, [BBox(200, 200, 20, 20)]) == []

    def test_monotone_in_window_size(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            boxes = [
                BBox(rng.uniform(0, 300), rng.uniform(0, 300), rng.uniform(5, 40), rng.uniform(5, 40))
                for _ in range(6)
            ]
            cx, cy = rng.uniform(100, 250, size=2)
            small = Window(cx, cy, 80, 60)
            large = Window(cx, cy, 160, 140)
            assert set(visible_targets(small, boxes)) <= set(visible_targets(large, boxes))


class TestCentroid:
    def test_single(self):
        assert centroid_of([BBox(40, 50, 20, 20)]) == (50, 60)

    def test_mean(self):
        boxes = [BBox(0, 0, 20, 20), BBox(20, 20, 20, 20)]  # centers (10,10), (30,30)
        assert centroid_of(boxes) == (20, 20)

    def test_empty(self):
        assert centroid_of([]) is None


class TestClampWindow:
    def test_identity_inside(self):
        win = Window(160, 120, 320, 240)
        assert clamp_window(win, 768, 576) == win

    def test_left_edge(self):
        assert clamp_window(Window(100, 120, 320, 240), 768, 576) == Window(160, 120, 320, 240)

    def test_right_bottom_edge(self):
        assert clamp_window(Window(700, 500, 320, 240), 768, 576) == Window(608, 456, 320, 240)

    def test_too_large(self):
        with pytest.raises(GeometryError):
            clamp_window(Window(0, 0, 800, 100), 768, 576)

    def test_idempotent(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            win = Window(rng.uniform(-200, 900), rng.uniform(-200, 700), 320, 240)
            once = clamp_window(win, 768, 576)
            assert clamp_window(once, 768, 576) == once
            assert once.left >= 0 and once.top >= 0
            assert once.right <= 768 and once.bottom <= 576


class TestTypes:
    def test_bad_box(self):
        with pytest.raises(GeometryError):
            BBox(0, 0, -1, 10)

    def test_bad_control(self):
        with pytest.raises(GeometryError):
            ControlVector(1.5, 0)

    def test_bad_fov(self):
        with pytest.raises(GeometryError):
            FovAngles(190, 45)

    def test_iou_symmetry(self):
        a = BBox(0, 0, 10, 10)
        b = BBox(5, 5, 10, 10)
        assert box_iou(a, b) == box_iou(b, a) == pytest.approx(25 / 175)
