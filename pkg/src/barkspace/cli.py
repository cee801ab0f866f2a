"""Batch command line: segment, featurize, synth, split, train, eval, project.

Exit codes are a stable scripting contract: 0 success, 1 usage error,
2 data error (unreadable or inconsistent inputs), 3 internal invariant
violation. Every subcommand is deterministic given its flags and inputs.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import models, pipeline, projection
from .audio_io import (CANONICAL_RATE_HZ, AudioClip, UnsupportedWavError,
                       WavFormatError, read_wav, resample, write_wav)
from .corpus import (ManifestError, SynthConfig, load_manifest, save_manifest,
                     synth_corpus)
from .evaluation import UndefinedMetricError, evaluate, event_level_split
from .features import FeatureConfig, log_mel
from .segmentation import SegmentationConfig, detect_nonsilent, frame_segment

USAGE_ERROR = 1
DATA_ERROR = 2
INTERNAL_ERROR = 3

_DATA_EXCEPTIONS = (
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
    WavFormatError,
    UnsupportedWavError,
    ManifestError,
    UndefinedMetricError,
    models.CheckpointError,
    ValueError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return cfg


def _section(config: dict, name: str, cls, overrides: dict):
    """defaults < config-file section < explicit flags."""
    merged = dict(config.get(name, {}))
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**merged)


def _seg_config(args, config) -> SegmentationConfig:
    return _section(config, "segmentation", SegmentationConfig, {
        "top_db": getattr(args, "top_db", None),
        "target_len": getattr(args, "frame_len", None),
        "stride": getattr(args, "stride", None),
    })


def _feat_config(args, config) -> FeatureConfig:
    fc = dict(config.get("features", {}))
    if "fmax" in fc and fc["fmax"] is not None:
        fc["fmax"] = float(fc["fmax"])
    return FeatureConfig(**fc)


def cmd_segment(args) -> int:
    config = _load_config(args.config)
    seg_cfg = _seg_config(args, config)
    in_path = Path(args.in_path)
    if in_path.is_dir():
        wavs = sorted(in_path.glob("*.wav"))
    elif in_path.exists():
        wavs = [in_path]
    else:
        raise FileNotFoundError(f"no such file or directory: {in_path}")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = []
    for wav in wavs:
        clip = resample(read_wav(wav), CANONICAL_RATE_HZ)
        if len(clip.samples) == 0:
            continue
        segments = detect_nonsilent(clip, seg_cfg, event_prefix=wav.stem)
        for seg in segments:
            if np.abs(seg.samples).max() == 0.0:
                continue  # zero-energy span: nothing trainable in it
            write_wav(out_dir / f"{seg.event_id}.wav", AudioClip(seg.samples, CANONICAL_RATE_HZ))
            index.append({
                "event_id": seg.event_id,
                "start_sample": seg.start_sample,
                "end_sample": seg.end_sample,
                "source_path": str(wav),
            })
    (out_dir / "index.json").write_text(json.dumps(index, indent=2))
    if args.verbose:
        print(f"wrote {len(index)} event(s) to {out_dir}")
    return 0


def cmd_featurize(args) -> int:
    config = _load_config(args.config)
    seg_cfg = _seg_config(args, config)
    feat_cfg = _feat_config(args, config)
    in_path = Path(args.in_path)
    clip = read_wav(in_path)
    frames = pipeline.frames_of_clip(clip, in_path.stem, seg_cfg)
    grids = [log_mel(f, feat_cfg, CANONICAL_RATE_HZ) for f in frames]

    if args.format == "bin":
        meta = {"kind": "log_mel", "source": str(in_path), "n_frames": len(grids),
                "n_mels": feat_cfg.n_mels, "sample_rate_hz": CANONICAL_RATE_HZ}
        models.save_tensor_file(args.out, [(f"frame{i:04d}", g) for i, g in enumerate(grids)],
                                meta)
    elif args.format == "csv":
        with open(args.out, "w") as fh:
            n_time = grids[0].shape[1]
            fh.write("frame,band," + ",".join(f"t{j}" for j in range(n_time)) + "\n")
            for i, g in enumerate(grids):
                for band in range(g.shape[0]):
                    row = ",".join(f"{v:.6g}" for v in g[band])
                    fh.write(f"{i},{band},{row}\n")
    else:
        raise ValueError(f"unknown format {args.format!r}")
    if args.verbose:
        print(f"featurized {len(grids)} frame(s) from {in_path} -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        seed=args.seed,
        n_events=args.n_events,
        duration_range=(args.dur_min, args.dur_max),
    )
    entries = synth_corpus(cfg, args.out)
    if args.verbose:
        print(f"wrote {len(entries)} event(s) and manifest.csv to {args.out}")
    return 0


def cmd_split(args) -> int:
    if not (0.0 < args.ratio < 1.0):
        print(f"barkspace split: error: --ratio must be in (0, 1), got {args.ratio}",
              file=sys.stderr)
        return USAGE_ERROR
    entries = load_manifest(args.manifest)
    train_ids, _ = event_level_split([e.event_id for e in entries], args.ratio, args.seed)
    train_set = set(train_ids)
    for e in entries:
        e.split = "train" if e.event_id in train_set else "test"
    save_manifest(entries, args.out)
    if args.verbose:
        n_train = len(train_set)
        print(f"split {len(entries)} events into {n_train} train / {len(entries) - n_train} test")
    return 0


def _events_from_manifest(manifest_path, seg_cfg, feat_cfg):
    entries = load_manifest(manifest_path)
    return pipeline.load_event_features(entries, Path(manifest_path).parent, seg_cfg, feat_cfg)


def cmd_train(args) -> int:
    config = _load_config(args.config)
    seg_cfg = _seg_config(args, config)
    feat_cfg = _feat_config(args, config)
    train_section = dict(config.get("train", {}))
    overrides = {"epochs": args.epochs, "batch_size": args.batch,
                 "learning_rate": args.lr, "seed": args.seed,
                 "pairs_per_epoch": args.pairs_per_epoch}
    train_section.update({k: v for k, v in overrides.items() if v is not None})
    train_section["dimension"] = args.dim
    cfg = models.TrainConfig(**train_section)

    events = pipeline.select_split(_events_from_manifest(args.manifest, seg_cfg, feat_cfg), "train")
    if not events:
        raise ValueError(f"{args.manifest}: no training events")
    result = pipeline.train_dimension(events, args.model, cfg,
                                      seg_cfg=seg_cfg, feat_cfg=feat_cfg)
    models.save_checkpoint(result.checkpoint, args.out)
    if args.verbose:
        print(f"trained {args.model}/{args.dim} on {len(events)} events; "
              f"final epoch loss {result.loss_history[-1]:.6f}; saved {args.out}")
    return 0


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    ckpt = models.load_checkpoint(args.model)
    events = pipeline.select_split(
        _events_from_manifest(args.manifest, ckpt.segmentation_config, ckpt.feature_config),
        args.split,
    )
    if not events:
        raise ValueError(f"{args.manifest}: no events in split {args.split!r}")
    report = evaluate(ckpt, pipeline.evaluation_events(events, ckpt.dimension))
    Path(args.report).write_text(report.to_json())
    if args.verbose:
        print(f"{ckpt.dimension}: event accuracy {report.event_accuracy:.3f}, "
              f"TAP {report.tap_percent:.2f}%")
    return 0


def cmd_project(args) -> int:
    arousal_ckpt = models.load_checkpoint(args.arousal_model, dimension="arousal")
    valence_ckpt = models.load_checkpoint(args.valence_model, dimension="valence")
    seg_cfg = arousal_ckpt.segmentation_config

    in_path = Path(args.in_path)
    labeled = None
    per_event_frames = []
    if in_path.suffix.lower() == ".csv":
        entries = load_manifest(in_path)
        labeled = {e.event_id: e for e in entries}
        for e in entries:
            wav = Path(e.path)
            if not wav.is_absolute():
                wav = in_path.parent / wav
            clip = read_wav(wav)
            per_event_frames.append(pipeline.frames_of_clip(clip, e.event_id, seg_cfg))
    else:
        clip = resample(read_wav(in_path), CANONICAL_RATE_HZ)
        for seg in detect_nonsilent(clip, seg_cfg, event_prefix=in_path.stem):
            if np.abs(seg.samples).max() == 0.0:
                continue
            per_event_frames.append(frame_segment(seg, seg_cfg))

    points = [projection.project_event(arousal_ckpt, valence_ckpt, frames)
              for frames in per_event_frames]
    projection.export_points(points, args.out, fmt=args.format)

    if args.hist:
        if labeled is None:
            raise ValueError("--hist needs a labeled manifest input")
        _write_projection_histograms(args.hist, per_event_frames, labeled,
                                     arousal_ckpt, valence_ckpt)
    if args.verbose:
        print(f"projected {len(points)} event(s) to {args.out}")
    return 0


def _write_projection_histograms(path, per_event_frames, labeled,
                                 arousal_ckpt, valence_ckpt, n_bins: int = 50):
    """Per-class histograms of raw event scores for each dimension."""
    out = {}
    for dim, ckpt in (("arousal", arousal_ckpt), ("valence", valence_ckpt)):
        scores, names = [], []
        for frames in per_event_frames:
            entry = labeled[frames[0].event_id]
            scores.append(models.predict_event(ckpt, frames))
            names.append((entry.arousal if dim == "arousal" else entry.valence).name.lower())
        scores = np.asarray(scores)
        edges = np.histogram_bin_edges(scores, bins=n_bins)
        out[dim] = {
            "bin_edges": edges.tolist(),
            "histograms": {
                key: np.histogram(scores[[n == key for n in names]], bins=edges)[0].tolist()
                for key in ("low", "medium", "high")
            },
        }
    Path(path).write_text(json.dumps(out, indent=2))


def build_parser() -> _Parser:
    parser = _Parser(prog="barkspace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="PRNG seed (default 42)")
        p.add_argument("--config", default=None, help="JSON config overriding built-in defaults")
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("segment", help="cut recordings into non-silent event WAVs")
    p.add_argument("--in", dest="in_path", required=True, help="WAV file or directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--top-db", type=float, default=None)
    p.add_argument("--frame-len", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("featurize", help="write a WAV's log-mel frames to a file")
    p.add_argument("--in", dest="in_path", required=True, help="WAV file")
    p.add_argument("--out", required=True, help="output tensor/CSV path")
    p.add_argument("--format", choices=("bin", "csv"), default="bin")
    common(p)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    p.add_argument("--n-events", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dur-min", type=float, default=0.2)
    p.add_argument("--dur-max", type=float, default=1.5)
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="add an event-level train/test split column")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train one dimension model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--dim", choices=("arousal", "valence"), required=True)
    p.add_argument("--model", choices=("baseline", "siamese"), required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--pairs-per-epoch", type=int, default=None)
    p.add_argument("--out", required=True, help="checkpoint path")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest split")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--report", required=True, help="output JSON path")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("project", help="project events onto the emotion plane")
    p.add_argument("--arousal-model", required=True)
    p.add_argument("--valence-model", required=True)
    p.add_argument("--in", dest="in_path", required=True, help="WAV file or manifest CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--hist", default=None, help="also write per-class score histogram JSON")
    common(p)
    p.set_defaults(func=cmd_project)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_ERROR
    if getattr(args, "seed", None) is None:
        args.seed = 42
    try:
        return args.func(args)
    except _DATA_EXCEPTIONS as exc:
        print(f"barkspace {args.command}: error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except Exception as exc:  # noqa: BLE001 - the exit-code contract needs a catch-all
        print(f"barkspace {args.command}: internal error: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
