import numpy as np
import pytest

from activecam.geometry import BBox
from activecam.sequences import (
    Frame,
    Sequence,
    SequenceError,
    SynthConfig,
    load_sequence,
    save_sequence,
    synth_sequence,
)


def boxes_equal(a, b):
    return len(a) == len(b) and all(
        ta == tb and (ba.x, ba.y, ba.w, ba.h) == (bb.x, bb.y, bb.w, bb.h)
        for (ta, ba), (tb, bb) in zip(a, b)
    )


class TestSynth:
    def test_deterministic(self):
        cfg = SynthConfig(frames=20, targets=3)
        a = synth_sequence(cfg, seed=5)
        b = synth_sequence(cfg, seed=5)
        for fa, fb in zip(a.frames, b.frames):
            assert np.array_equal(fa.image, fb.image)
            assert boxes_equal(fa.boxes, fb.boxes)

    def test_different_seeds_differ(self):
        cfg = SynthConfig(frames=5, targets=2)
        a = synth_sequence(cfg, seed=1)
        b = synth_sequence(cfg, seed=2)
        assert not all(boxes_equal(fa.boxes, fb.boxes) for fa, fb in zip(a.frames, b.frames))

    def test_no_targets(self):
        seq = synth_sequence(SynthConfig(frames=10, targets=0), seed=1)
        assert len(seq.frames) == 10
        assert all(f.boxes == [] for f in seq.frames)

    def test_static_target(self):
        cfg = SynthConfig(frames=8, targets=1, speed_min=0.0, speed_max=0.0, turn_prob=0.0)
        seq = synth_sequence(cfg, seed=2)
        first = seq.frames[0].boxes[0][1]
        for frame in seq.frames:
            box = frame.boxes[0][1]
            assert (box.x, box.y, box.w, box.h) == (first.x, first.y, first.w, first.h)

    def test_boxes_stay_inside_world(self):
        for seed in range(5):
            cfg = SynthConfig(frames=60, targets=4, speed_min=2.0, speed_max=5.0, turn_prob=0.2)
            seq = synth_sequence(cfg, seed=seed)
            for frame in seq.frames:
                for _, box in frame.boxes:
                    assert box.x >= 0 and box.y >= 0
                    assert box.x + box.w <= cfg.world_w
                    assert box.y + box.h <= cfg.world_h

    def test_grouped_boxes_stay_inside_and_clustered(self):
        cfg = SynthConfig(frames=100, targets=2, group_spread=24.0, speed_min=1.0, speed_max=1.5)
        seq = synth_sequence(cfg, seed=9)
        for frame in seq.frames:
            xs = [box.x for _, box in frame.boxes]
            ys = [box.y for _, box in frame.boxes]
            assert max(xs) - min(xs) <= 24.0 + 1
            assert max(ys) - min(ys) <= 24.0 + 1
            for _, box in frame.boxes:
                assert box.x >= 0 and box.x + box.w <= cfg.world_w
                assert box.y >= 0 and box.y + box.h <= cfg.world_h

    def test_targets_rendered_where_annotated(self):
        cfg = SynthConfig(frames=20, targets=3)
        seq = synth_sequence(cfg, seed=7)
        bg = synth_sequence(SynthConfig(frames=1, targets=0, texture_seed=cfg.texture_seed), seed=7)
        background = bg.frames[0].image
        for frame in seq.frames:
            for _, box in frame.boxes:
                x, y, w, h = int(box.x), int(box.y), int(box.w), int(box.h)
                patch = frame.image[y : y + h, x : x + w]
                ref = background[y : y + h, x : x + w]
                differing = np.any(patch != ref, axis=2).mean()
                assert differing >= 0.9

    def test_size_exceeds_world(self):
        with pytest.raises(SequenceError):
            synth_sequence(SynthConfig(world_w=32, world_h=32, size_min=40, size_max=48), seed=0)


class TestRoundTrip:
    def test_save_load(self, tmp_path):
        seq = synth_sequence(SynthConfig(frames=4, targets=2), seed=3)
        save_sequence(seq, tmp_path / "seq")
        loaded = load_sequence(tmp_path / "seq")
        assert loaded.world_w == seq.world_w and loaded.world_h == seq.world_h
        assert loaded.name == "seq"
        assert len(loaded.frames) == 4
        for fa, fb in zip(seq.frames, loaded.frames):
            assert np.array_equal(fa.image, fb.image)
            assert boxes_equal(fa.boxes, fb.boxes)

    def test_save_empty_sequence(self, tmp_path):
        seq = Sequence([], 64, 48, name="empty")
        save_sequence(seq, tmp_path / "empty")
        assert (tmp_path / "empty" / "annotations.csv").read_text() == ""

    def test_save_to_unwritable_path(self, tmp_path):
        # a plain file where the directory should go
        target = tmp_path / "blocked"
        target.write_text("")
        seq = synth_sequence(SynthConfig(frames=1, targets=1), seed=1)
        with pytest.raises(SequenceError):
            save_sequence(seq, target)


class TestLoadValidation:
    def write_frames(self, directory, n=3, w=64, h=48):
        from PIL import Image

        directory.mkdir(parents=True, exist_ok=True)
        for i in range(n):
            Image.fromarray(np.zeros((h, w, 3), dtype=np.uint8)).save(directory / ("frame_%06d.png" % i))

    def test_missing_annotations(self, tmp_path):
        self.write_frames(tmp_path / "s")
        with pytest.raises(SequenceError, match="annotation"):
            load_sequence(tmp_path / "s")

    def test_empty_annotations(self, tmp_path):
        self.write_frames(tmp_path / "s")
        (tmp_path / "s" / "annotations.csv").write_text("")
        seq = load_sequence(tmp_path / "s")
        assert len(seq.frames) == 3
        assert all(f.boxes == [] for f in seq.frames)

    def test_boxes_distributed_by_frame(self, tmp_path):
        self.write_frames(tmp_path / "s")
        rows = "0,0,1,1,4,4\n0,1,10,10,4,4\n1,0,2,2,4,4\n2,0,3,3,4,4\n2,1,20,20,4,4\n"
        (tmp_path / "s" / "annotations.csv").write_text(rows)
        seq = load_sequence(tmp_path / "s")
        assert [len(f.boxes) for f in seq.frames] == [2, 1, 2]

    def test_bad_frame_index_names_row(self, tmp_path):
        self.write_frames(tmp_path / "s")
        (tmp_path / "s" / "annotations.csv").write_text("0,0,1,1,4,4\n99,0,1,1,4,4\n")
        with pytest.raises(SequenceError, match="row 2"):
            load_sequence(tmp_path / "s")

    def test_malformed_row(self, tmp_path):
        self.write_frames(tmp_path / "s")
        (tmp_path / "s" / "annotations.csv").write_text("0,0,1,1\n")
        with pytest.raises(SequenceError, match="row 1"):
            load_sequence(tmp_path / "s")

    def test_non_integer_field(self, tmp_path):
        self.write_frames(tmp_path / "s")
        (tmp_path / "s" / "annotations.csv").write_text("0,0,a,1,4,4\n")
        with pytest.raises(SequenceError, match="row 1"):
            load_sequence(tmp_path / "s")

    def test_box_outside_frame(self, tmp_path):
        self.write_frames(tmp_path / "s", w=64, h=48)
        (tmp_path / "s" / "annotations.csv").write_text("0,0,60,40,10,10\n")
        with pytest.raises(SequenceError, match="outside"):
            load_sequence(tmp_path / "s")

    def test_duplicate_target_id(self, tmp_path):
        self.write_frames(tmp_path / "s")
        (tmp_path / "s" / "annotations.csv").write_text("0,0,1,1,4,4\n0,0,10,10,4,4\n")
        with pytest.raises(SequenceError, match="duplicate"):
            load_sequence(tmp_path / "s")
