"""Shared fixtures: crafted frames and the session-wide trained tiny network."""

import numpy as np
import pytest

from activecam.geometry import BBox
from activecam.sequences import Frame, Sequence


def render_frame(index, world_w, world_h, boxes, bg=100):
    """Frame with solid white rectangles at the annotated boxes."""
    img = np.full((world_h, world_w, 3), bg, dtype=np.uint8)
    for _, box in boxes:
        x, y, w, h = int(box.x), int(box.y), int(box.w), int(box.h)
        img[y : y + h, x : x + w] = 255
    return Frame(index, img, list(boxes))


def make_sequence(per_frame_boxes, world_w, world_h, name="crafted"):
    frames = [render_frame(i, world_w, world_h, boxes) for i, boxes in enumerate(per_frame_boxes)]
    return Sequence(frames, world_w, world_h, name=name)


def central_diff_failures(
    loss_fn,
    params,
    grads,
    h=1e-3,
    rel_tol=1e-2,
    abs_floor=1e-6,
    fallback_hs=(1e-5, 1e-7),
    sample=None,
    rng=None,
):
    """Compare analytic gradients against central finite differences.

    Runs in whatever dtype `params` holds (use float64).  A fixed-step
    central difference is inconsistent when the probe straddles a
    relu/leakyrelu kink, so entries that disagree at `h` are re-probed at
    smaller steps before being counted as failures.  Returns a list of
    (tensor name, flat index, numeric, analytic) tuples.
    """
    failures = []
    for name, arr in params.items():
        if name.endswith((".running_mean", ".running_var")):
            continue
        flat = arr.ravel()
        g = grads[name].ravel()
        if sample is None:
            indices = range(flat.size)
        else:
            indices = rng.choice(flat.size, size=min(sample, flat.size), replace=False)
        for i in indices:
            ana = float(g[i])
            num = None
            ok = False
            for step in (h, *fallback_hs):
                orig = flat[i]
                flat[i] = orig + step
                lp = loss_fn()
                flat[i] = orig - step
                lm = loss_fn()
                flat[i] = orig
                num = (lp - lm) / (2.0 * step)
                if abs(num - ana) <= max(rel_tol * max(abs(num), abs(ana)), abs_floor):
                    ok = True
                    break
            if not ok:
                failures.append((name, int(i), num, ana))
    return failures


@pytest.fixture
def frame_factory():
    return render_frame


@pytest.fixture
def sequence_factory():
    return make_sequence


@pytest.fixture(scope="session")
def desk_rig():
    """Desk-scale training rig used by the slow learning tests.

    Synthesizes a 3-target world, draws 2400 crop samples, trains the tiny
    network for 30 epochs, and returns everything the acceptance criteria
    need.  Built once per session (roughly a minute of CPU).
    """
    from activecam import nn
    from activecam.datagen import AugmentConfig, augment_sample, generate_samples, split_dataset
    from activecam.sequences import SynthConfig, synth_sequence

    train_seq = synth_sequence(
        SynthConfig(
            world_w=256,
            world_h=192,
            frames=300,
            targets=3,
            size_min=8,
            size_max=14,
            speed_min=1.0,
            speed_max=2.5,
            turn_prob=0.05,
            texture_seed=4,
        ),
        seed=101,
    )
    ds = generate_samples(train_seq, 3500, (64, 48), seed=202)
    train_ds, val_ds = split_dataset(ds, 0.6, seed=303)  # 2100 training samples

    graph, params = nn.build_control_net((64, 48), "tiny", seed=404)
    aug_cfg = AugmentConfig()

    def augment(sample, rng):
        frame = train_seq.frames[sample.meta.frame_index]
        return augment_sample(sample, frame, aug_cfg, rng)

    cfg = nn.TrainConfig(
        lr=0.002,
        decay_factor=0.5,
        plateau_patience=8,
        batch_size=64,
        batches_per_epoch=50,
        epochs=30,
        seed=505,
    )
    best, history = nn.train(graph, params, train_ds, val_ds, cfg, augment=augment)
    return {
        "graph": graph,
        "params": best,
        "history": history,
        "train_seq": train_seq,
        "train_ds": train_ds,
        "val_ds": val_ds,
    }
