"""Command-line entry point wiring synthesis, data generation, training,
and evaluation into one reproducible pipeline.

Every command reads the same flat config file; flags override config keys;
all randomness derives from the single `seed` key.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import nn
from .config import (
    SEED_DATAGEN,
    SEED_DETECTOR,
    SEED_NET,
    SEED_SPLIT,
    SEED_SYNTH,
    SEED_TRAIN,
    ConfigError,
    RunConfig,
    describe_keys,
    load_config,
)
from .controllers import BaselineController, CnnController, OracleController, StaticController
from .datagen import (
    AugmentConfig,
    augment_sample,
    generate_samples,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .geometry import Window, clamp_window
from .metrics import evaluate_trace, save_report, still_image_errors
from .sequences import SynthConfig, load_sequence, save_sequence, synth_sequence
from .simulator import CameraState, run_episode, save_trace
from .tracking import DetectorConfig, TrackerConfig


def _synth_config(cfg: RunConfig) -> SynthConfig:
    return SynthConfig(
        world_w=cfg["synth.world_w"],
        world_h=cfg["synth.world_h"],
        frames=cfg["synth.frames"],
        targets=cfg["synth.targets"],
        size_min=cfg["synth.size_min"],
        size_max=cfg["synth.size_max"],
        speed_min=cfg["synth.speed_min"],
        speed_max=cfg["synth.speed_max"],
        turn_prob=cfg["synth.turn_prob"],
        texture_seed=cfg["synth.texture_seed"],
        group_spread=cfg["synth.group_spread"],
    )


def _detector_config(cfg: RunConfig) -> DetectorConfig:
    return DetectorConfig(
        p_miss=cfg["detector.p_miss"],
        center_sigma=cfg["detector.center_sigma"],
        size_sigma=cfg["detector.size_sigma"],
        fp_rate=cfg["detector.fp_rate"],
    )


def _tracker_config(cfg: RunConfig) -> TrackerConfig:
    return TrackerConfig(
        iou_threshold=cfg["tracker.iou_threshold"],
        max_age=cfg["tracker.max_age"],
        min_hits=cfg["tracker.min_hits"],
        q_pos=cfg["tracker.q_pos"],
        q_vel=cfg["tracker.q_vel"],
        q_size=cfg["tracker.q_size"],
        r_meas=cfg["tracker.r_meas"],
    )


def _weights_path(cfg: RunConfig) -> str:
    return os.path.join(cfg["paths.run"], "weights.bin")


def _build_controller(cfg: RunConfig, per_image: bool = False):
    name = cfg["eval.controller"]
    if name == "static":
        return StaticController()
    if name == "oracle":
        return OracleController()
    if name == "baseline":
        return BaselineController(_detector_config(cfg), _tracker_config(cfg), cfg.seed + SEED_DETECTOR)
    if name == "cnn":
        graph = nn.build_control_net(
            (cfg["network.input_w"], cfg["network.input_h"]), cfg["network.scale"]
        )[0]
        params = nn.load_weights(_weights_path(cfg))
        wma_k = 1 if per_image else cfg["filter.k"]
        return CnnController(graph, params, wma_k=wma_k)
    raise ConfigError(f"config key eval.controller: unknown controller {name!r}")


def _start_state(cfg: RunConfig, world_w: int, world_h: int) -> CameraState:
    w = cfg["eval.window_w"]
    h = cfg["eval.window_h"]
    cx = cfg["eval.start_cx"]
    cy = cfg["eval.start_cy"]
    if cx < 0:
        cx = world_w / 2.0
    if cy < 0:
        cy = world_h / 2.0
    return CameraState(clamp_window(Window(cx, cy, w, h), world_w, world_h), 0)


def cmd_synth(cfg: RunConfig) -> int:
    seq = synth_sequence(_synth_config(cfg), cfg.seed + SEED_SYNTH)
    save_sequence(seq, cfg["paths.sequence"])
    print(f"wrote {len(seq.frames)} frames to {cfg['paths.sequence']}")
    return 0


def cmd_gen_data(cfg: RunConfig) -> int:
    seq = load_sequence(cfg["paths.sequence"])
    ds = generate_samples(
        seq,
        cfg["datagen.samples"],
        (cfg["datagen.crop_w"], cfg["datagen.crop_h"]),
        cfg.seed + SEED_DATAGEN,
    )
    save_dataset(ds, cfg["paths.dataset"])
    print(f"wrote {len(ds.samples)} samples to {cfg['paths.dataset']}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    ds = load_dataset(cfg["paths.dataset"])
    if (ds.crop_w, ds.crop_h) != (cfg["network.input_w"], cfg["network.input_h"]):
        raise ConfigError(
            f"config key network.input_w/h: dataset crops are {ds.crop_w}x{ds.crop_h}, "
            f"network expects {cfg['network.input_w']}x{cfg['network.input_h']}"
        )
    train_ds, val_ds = split_dataset(ds, cfg["datagen.train_fraction"], cfg.seed + SEED_SPLIT)

    graph, params = nn.build_control_net(
        (cfg["network.input_w"], cfg["network.input_h"]),
        cfg["network.scale"],
        seed=cfg.seed + SEED_NET,
    )

    augment = None
    seq_dir = cfg["paths.sequence"]
    aug_cfg = AugmentConfig(
        flip_prob=cfg["augment.flip_prob"],
        translate_prob=cfg["augment.translate_prob"],
        max_jitter=cfg["augment.max_jitter"],
        photometric_prob=cfg["augment.photometric_prob"],
    )
    if os.path.isdir(seq_dir):
        seq = load_sequence(seq_dir)
        frames_by_name = {seq.name: seq}

        def augment(sample, rng):
            source = frames_by_name.get(sample.meta.seq_name)
            frame = source.frames[sample.meta.frame_index] if source else None
            return augment_sample(sample, frame, aug_cfg, rng)

    else:
        print("note: no source sequence found; translation augmentation disabled", file=sys.stderr)

        def augment(sample, rng):
            return augment_sample(sample, None, aug_cfg, rng)

    train_cfg = nn.TrainConfig(
        lr=cfg["train.lr"],
        decay_factor=cfg["train.decay_factor"],
        plateau_patience=cfg["train.plateau_patience"],
        batch_size=cfg["train.batch_size"],
        batches_per_epoch=cfg["train.batches_per_epoch"],
        epochs=cfg["train.epochs"],
        seed=cfg.seed + SEED_TRAIN,
    )
    best, history = nn.train(
        graph,
        params,
        train_ds,
        val_ds,
        train_cfg,
        augment=augment,
        near_zero_tau=cfg["balance.near_zero_tau"],
        max_near_zero_frac=cfg["balance.max_near_zero_frac"],
    )

    os.makedirs(cfg["paths.run"], exist_ok=True)
    nn.save_weights(best, _weights_path(cfg))
    from .nn.training import save_history

    save_history(history, os.path.join(cfg["paths.run"], "history.csv"))
    if history:
        print(
            f"trained {history[-1].epoch} epochs: val loss "
            f"{history[0].val_loss:.4f} -> {min(r.val_loss for r in history):.4f}"
        )
    print(f"weights -> {_weights_path(cfg)}")
    return 0


def cmd_eval_still(cfg: RunConfig) -> int:
    ds = load_dataset(cfg["paths.dataset"])
    controller = _build_controller(cfg, per_image=True)
    sequences = None
    if os.path.isdir(cfg["paths.sequence"]):
        seq = load_sequence(cfg["paths.sequence"])
        sequences = {seq.name: seq}
    report = still_image_errors(controller, ds, sequences)
    os.makedirs(cfg["paths.run"], exist_ok=True)
    name = cfg["eval.controller"]
    save_report(
        report,
        os.path.join(cfg["paths.run"], f"still_{name}.kv"),
        os.path.join(cfg["paths.run"], f"still_{name}.txt"),
    )
    print(report.as_table(), end="")
    return 0


def _episode(cfg: RunConfig, dump_crops: bool):
    seq = load_sequence(cfg["paths.sequence"])
    controller = _build_controller(cfg)
    start = _start_state(cfg, seq.world_w, seq.world_h)
    crop_dir = None
    if dump_crops:
        crop_dir = os.path.join(cfg["paths.run"], f"crops_{cfg['eval.controller']}")
    trace = run_episode(seq, controller, start, crop_dir=crop_dir)
    if isinstance(controller, BaselineController):
        os.makedirs(cfg["paths.run"], exist_ok=True)
        controller.save_track_log(os.path.join(cfg["paths.run"], "tracks_baseline.csv"))
    return seq, trace


def cmd_eval_seq(cfg: RunConfig) -> int:
    seq, trace = _episode(cfg, dump_crops=False)
    os.makedirs(cfg["paths.run"], exist_ok=True)
    name = cfg["eval.controller"]
    save_trace(trace, os.path.join(cfg["paths.run"], f"trace_{name}.csv"))
    report = evaluate_trace(trace, seq)
    save_report(
        report,
        os.path.join(cfg["paths.run"], f"report_{name}.kv"),
        os.path.join(cfg["paths.run"], f"report_{name}.txt"),
    )
    print(report.as_table(), end="")
    return 0


def cmd_run(cfg: RunConfig) -> int:
    os.makedirs(cfg["paths.run"], exist_ok=True)
    seq, trace = _episode(cfg, dump_crops=cfg["eval.dump_crops"])
    name = cfg["eval.controller"]
    save_trace(trace, os.path.join(cfg["paths.run"], f"trace_{name}.csv"))
    print(f"episode over {len(trace.records)} frames -> trace_{name}.csv")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval-still": cmd_eval_still,
    "eval-seq": cmd_eval_seq,
    "run": cmd_run,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="activecam",
        description=__doc__,
        epilog="config keys and defaults:\n" + describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("synth", "synthesize an annotated sequence"),
        ("gen-data", "sample a (crop, label) dataset from a sequence"),
        ("train", "train the controller network on a dataset"),
        ("eval-still", "per-image error report for a controller"),
        ("eval-seq", "closed-loop episode plus monitoring report"),
        ("run", "single episode with optional crop dump"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="config file (section.key = value lines)")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config key (repeatable)",
        )
        p.add_argument("--seed", type=int, help="override the master seed")
        if name in ("eval-still", "eval-seq", "run"):
            p.add_argument("--controller", help="override eval.controller")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if getattr(args, "controller", None):
        overrides.append(f"eval.controller={args.controller}")
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
