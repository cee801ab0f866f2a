"""The two trainable regressors plus pair construction and persistence.

Both models share the same CNN head producing one scalar per input. The
baseline is trained to regress the numeric label value directly. The
adjusted twin-network model instead scores two inputs with the shared head
and is trained so that score(a) - score(b) matches the signed numeric
difference of their ordinal labels; single-input inference then uses the
branch scalar, which is an absolute coordinate up to an additive constant
absorbed later by boundary calibration.

Checkpoints are a self-describing binary container ("BDN1"): JSON metadata,
raw float32 tensors, and a trailing CRC32.
"""

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import neuralnet as nn
from .evaluation import Boundaries
from .features import FeatureConfig
from .labels import DIMENSIONS, OrdinalLabel, label_from_value
from .segmentation import Frame, SegmentationConfig

CHECKPOINT_MAGIC = b"BDN1"
TENSOR_FILE_MAGIC = b"BDF1"
CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    """Unreadable, corrupt, or mismatched checkpoint file."""


@dataclass(frozen=True)
class TrainConfig:
    dimension: str
    epochs: int = 15
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 42
    pairs_per_epoch: Optional[int] = None  # None -> 4 * n_frames

    def __post_init__(self):
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"dimension must be one of {DIMENSIONS}")
        if self.epochs <= 0 or self.batch_size <= 0 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        if self.pairs_per_epoch is not None and self.pairs_per_epoch <= 0:
            raise ValueError("pairs_per_epoch must be positive")


@dataclass
class Checkpoint:
    """Everything needed to reproduce predictions, with no external context."""

    dimension: str
    seed: int
    net_spec: nn.NetSpec
    params: nn.Params
    feature_config: FeatureConfig
    segmentation_config: SegmentationConfig
    sample_rate_hz: int
    boundaries: Optional[Boundaries] = None
    version: int = CHECKPOINT_VERSION


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    loss_history: list = field(default_factory=list)


def _stack_features(features: Sequence[np.ndarray]) -> np.ndarray:
    """Stack (n_mels, n_time) grids into a float32 batch with a channel axis."""
    return np.stack([np.asarray(f, dtype=np.float32)[None] for f in features])


def _check_training_set(values: Sequence[float]):
    if len(values) == 0:
        raise ValueError("training set is empty")
    present = set(float(v) for v in values)
    missing = {-1.0, 0.0, 1.0} - present
    if missing:
        raise ValueError(
            "training set must contain all three label values; missing "
            + ", ".join(str(v) for v in sorted(missing))
        )


def _net_spec_for(features: np.ndarray, net_spec: Optional[nn.NetSpec]) -> nn.NetSpec:
    spec = net_spec or nn.default_net_spec(input_shape=tuple(features.shape[1:]))
    if spec.output_shape != (1,):
        raise ValueError("regression head must end in dense(1)")
    return spec


def make_pairs(labels: Sequence[OrdinalLabel], pairs_per_epoch: int, seed: int,
               epoch: int) -> list[tuple[int, int, float]]:
    """Sample (index_a, index_b, target) pairs, target = value(a) - value(b).

    Sampling is stratified over the 9 ordered label combinations so the cell
    counts are as uniform as the available labels allow; the remainder cells
    are picked uniformly at random. Pairs with a == b (same index) never
    occur. The stream is a pure function of (seed, epoch).
    """
    if len(labels) < 2:
        raise ValueError("need at least 2 labeled frames to form pairs")
    if pairs_per_epoch <= 0:
        raise ValueError("pairs_per_epoch must be positive")

    rng = np.random.default_rng((int(seed), int(epoch), 0x9A125))
    order = (OrdinalLabel.HIGH, OrdinalLabel.MEDIUM, OrdinalLabel.LOW)
    groups = {lab: np.flatnonzero([l == lab for l in labels]) for lab in order}
    cells = [
        (a, b)
        for a in order
        for b in order
        if len(groups[a]) and len(groups[b]) and not (a == b and len(groups[a]) < 2)
    ]
    if not cells:
        raise ValueError("labels admit no valid pairs")

    base = pairs_per_epoch // len(cells)
    counts = [base] * len(cells)
    for j in rng.choice(len(cells), size=pairs_per_epoch % len(cells), replace=False):
        counts[j] += 1

    pairs = []
    for (a, b), count in zip(cells, counts):
        if count == 0:
            continue
        ga, gb = groups[a], groups[b]
        ia = ga[rng.integers(0, len(ga), size=count)]
        ib = gb[rng.integers(0, len(gb), size=count)]
        if a == b:
            clash = ia == ib
            while clash.any():
                ib[clash] = gb[rng.integers(0, len(gb), size=int(clash.sum()))]
                clash = ia == ib
        target = a.numeric - b.numeric
        pairs.extend((int(i), int(j), target) for i, j in zip(ia, ib))
    return pairs


def train_baseline(train_frames: Sequence[tuple[np.ndarray, float]], cfg: TrainConfig,
                   *, net_spec: Optional[nn.NetSpec] = None,
                   feature_config: Optional[FeatureConfig] = None,
                   segmentation_config: Optional[SegmentationConfig] = None,
                   sample_rate_hz: int = 22050) -> TrainResult:
    """Mean-squared-error regression of the numeric label value.

    Data is reshuffled every epoch by a (seed, epoch)-derived generator;
    the result is a pure function of (data, config, seed).
    """
    feats = [f for f, _ in train_frames]
    values = [v for _, v in train_frames]
    _check_training_set(values)
    x = _stack_features(feats)
    y = np.asarray(values, dtype=np.float32)
    spec = _net_spec_for(x, net_spec)

    params = nn.init_params(spec, cfg.seed, dtype=np.float32)
    state = nn.init_adam(params)
    history = []
    n = len(x)
    for epoch in range(cfg.epochs):
        rng = np.random.default_rng((cfg.seed, epoch, 0x5487FE))
        perm = rng.permutation(n)
        losses = []
        for lo in range(0, n, cfg.batch_size):
            sel = perm[lo : lo + cfg.batch_size]
            out, tape = nn.forward(spec, params, x[sel])
            pred = out[:, 0]
            err = pred - y[sel]
            losses.append(float(np.mean(err * err)) * len(sel))
            upstream = (2.0 / len(sel)) * err[:, None]
            grads, _ = nn.backward(spec, params, tape, upstream.astype(np.float32))
            nn.adam_step(params, grads, state, cfg.learning_rate)
        history.append(sum(losses) / n)

    ckpt = Checkpoint(
        dimension=cfg.dimension,
        seed=cfg.seed,
        net_spec=spec,
        params=params,
        feature_config=feature_config or FeatureConfig(),
        segmentation_config=segmentation_config or SegmentationConfig(),
        sample_rate_hz=sample_rate_hz,
    )
    return TrainResult(checkpoint=ckpt, loss_history=history)


def train_siamese(train_frames: Sequence[tuple[np.ndarray, float]], cfg: TrainConfig,
                  *, net_spec: Optional[nn.NetSpec] = None,
                  feature_config: Optional[FeatureConfig] = None,
                  segmentation_config: Optional[SegmentationConfig] = None,
                  sample_rate_hz: int = 22050) -> TrainResult:
    """Train the shared head to regress ordered numeric label differences.

    Each pair runs both inputs through the same weights; the loss is the MSE
    between score(a) - score(b) and the pair target, and gradients from both
    branches accumulate into the shared parameters (both branches are part
    of one stacked batch, so accumulation order is fixed).
    """
    feats = [f for f, _ in train_frames]
    values = [v for _, v in train_frames]
    _check_training_set(values)
    labels = [label_from_value(float(v)) for v in values]
    x = _stack_features(feats)
    spec = _net_spec_for(x, net_spec)

    pairs_per_epoch = cfg.pairs_per_epoch or 4 * len(x)
    params = nn.init_params(spec, cfg.seed, dtype=np.float32)
    state = nn.init_adam(params)
    history = []
    for epoch in range(cfg.epochs):
        pairs = make_pairs(labels, pairs_per_epoch, cfg.seed, epoch)
        rng = np.random.default_rng((cfg.seed, epoch, 0x5487FE))
        perm = rng.permutation(len(pairs))
        ia = np.asarray([pairs[k][0] for k in perm])
        ib = np.asarray([pairs[k][1] for k in perm])
        tg = np.asarray([pairs[k][2] for k in perm], dtype=np.float32)
        losses = []
        for lo in range(0, len(pairs), cfg.batch_size):
            sa, sb, t = ia[lo : lo + cfg.batch_size], ib[lo : lo + cfg.batch_size], tg[lo : lo + cfg.batch_size]
            b = len(t)
            stacked = np.concatenate((x[sa], x[sb]))
            out, tape = nn.forward(spec, params, stacked)
            diff = out[:b, 0] - out[b:, 0]
            err = diff - t
            losses.append(float(np.mean(err * err)) * b)
            g = (2.0 / b) * err
            upstream = np.concatenate((g, -g))[:, None].astype(np.float32)
            grads, _ = nn.backward(spec, params, tape, upstream)
            nn.adam_step(params, grads, state, cfg.learning_rate)
        history.append(sum(losses) / len(pairs))

    ckpt = Checkpoint(
        dimension=cfg.dimension,
        seed=cfg.seed,
        net_spec=spec,
        params=params,
        feature_config=feature_config or FeatureConfig(),
        segmentation_config=segmentation_config or SegmentationConfig(),
        sample_rate_hz=sample_rate_hz,
    )
    return TrainResult(checkpoint=ckpt, loss_history=history)


def _as_net_input(spec: nn.NetSpec, x: np.ndarray, dtype) -> np.ndarray:
    """Accept a feature grid (n_mels, n_time) or a full (C, H, W) tensor."""
    x = np.asarray(x, dtype=dtype)
    if x.shape == tuple(spec.input_shape):
        return x
    if x.ndim == 2 and (1,) + x.shape == tuple(spec.input_shape):
        return x[None]
    raise ValueError(f"input shape {x.shape} does not fit spec {spec.input_shape}")


def siamese_forward(spec: nn.NetSpec, params: nn.Params, xa: np.ndarray,
                    xb: np.ndarray) -> float:
    """Predicted ordered distance score(xa) - score(xb) under shared weights."""
    dtype = next(params.tensors())[1].dtype
    ya, _ = nn.forward(spec, params, _as_net_input(spec, xa, dtype))
    yb, _ = nn.forward(spec, params, _as_net_input(spec, xb, dtype))
    return float(ya[0]) - float(yb[0])


def predict_scalar(ckpt: Checkpoint, features: np.ndarray) -> float:
    """Single-branch scalar for one feature grid."""
    return float(predict_many(ckpt, [features])[0])


def predict_many(ckpt: Checkpoint, features: Sequence[np.ndarray]) -> np.ndarray:
    """Vectorised predict_scalar over a list of feature grids."""
    if len(features) == 0:
        return np.zeros(0)
    x = _stack_features(features)
    out, _ = nn.forward(ckpt.net_spec, ckpt.params, x)
    return out[:, 0].astype(np.float64)


def predict_event(ckpt: Checkpoint, frames: Sequence[Frame]) -> float:
    """Mean per-frame scalar over all frames of one event.

    Frames are featurised with the checkpoint's own feature config, so a
    loaded checkpoint needs no external context.
    """
    from .features import log_mel  # local import keeps module load order flat

    if len(frames) == 0:
        raise ValueError("predict_event needs at least one frame")
    ids = {f.event_id for f in frames}
    if len(ids) != 1:
        raise ValueError(f"frames belong to multiple events: {sorted(ids)}")
    grids = [log_mel(f, ckpt.feature_config, ckpt.sample_rate_hz) for f in frames]
    # score one frame at a time (batched GEMM results shift by an ulp with
    # batch order) and sum in sorted order: exactly permutation-invariant
    scores = np.array([predict_many(ckpt, [g])[0] for g in grids])
    return float(np.sort(scores).mean())


def _layer_to_dict(layer: nn.Layer) -> dict:
    if isinstance(layer, nn.Conv2d):
        return {"kind": "conv2d", "out_channels": layer.out_channels,
                "kernel_h": layer.kernel_h, "kernel_w": layer.kernel_w}
    if isinstance(layer, nn.Relu):
        return {"kind": "relu"}
    if isinstance(layer, nn.MaxPool2x2):
        return {"kind": "maxpool2x2"}
    if isinstance(layer, nn.Flatten):
        return {"kind": "flatten"}
    if isinstance(layer, nn.Dense):
        return {"kind": "dense", "out_units": layer.out_units}
    raise ValueError(f"unknown layer {layer!r}")


def _layer_from_dict(d: dict) -> nn.Layer:
    kind = d.get("kind")
    if kind == "conv2d":
        return nn.Conv2d(d["out_channels"], d["kernel_h"], d["kernel_w"])
    if kind == "relu":
        return nn.Relu()
    if kind == "maxpool2x2":
        return nn.MaxPool2x2()
    if kind == "flatten":
        return nn.Flatten()
    if kind == "dense":
        return nn.Dense(d["out_units"])
    raise CheckpointError(f"unknown layer kind {kind!r}")


def _pack_container(magic: bytes, meta: dict, tensors) -> bytes:
    """Length-prefixed JSON metadata, named float32 tensor blocks, CRC32."""
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [magic, struct.pack("<I", len(meta_bytes)), meta_bytes]
    for name, arr in tensors:
        name_b = name.encode("utf-8")
        a = np.ascontiguousarray(arr, dtype="<f4")
        parts.append(struct.pack("<I", len(name_b)))
        parts.append(name_b)
        parts.append(struct.pack("<I", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}I", *a.shape))
        parts.append(a.tobytes())
    blob = b"".join(parts)
    return blob + struct.pack("<I", zlib.crc32(blob))


def _unpack_container(blob: bytes, magic: bytes, path) -> tuple[dict, dict]:
    if len(blob) < 12:
        raise CheckpointError(f"{path}: truncated file")
    (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise CheckpointError(f"{path}: checksum mismatch, file is corrupt")
    if blob[0:4] != magic:
        raise CheckpointError(f"{path}: bad magic, expected {magic!r}")
    (meta_len,) = struct.unpack_from("<I", blob, 4)
    if 8 + meta_len > len(blob) - 4:
        raise CheckpointError(f"{path}: truncated metadata")
    meta = json.loads(blob[8 : 8 + meta_len].decode("utf-8"))

    tensors = {}
    pos = 8 + meta_len
    end = len(blob) - 4
    while pos < end:
        try:
            (name_len,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            shape = struct.unpack_from(f"<{rank}I", blob, pos)
            pos += 4 * rank
            count = int(np.prod(shape)) if rank else 1
            arr = np.frombuffer(blob, dtype="<f4", count=count, offset=pos).reshape(shape)
            pos += 4 * count
        except (struct.error, ValueError) as exc:
            raise CheckpointError(f"{path}: truncated tensor block") from exc
        tensors[name] = arr.astype(np.float32)
    return meta, tensors


def save_tensor_file(path, named_arrays, meta: Optional[dict] = None) -> None:
    """Write named float32 arrays in the checkpoint's block format (BDF1)."""
    full_meta = {"version": CHECKPOINT_VERSION, "kind": "tensors"}
    full_meta.update(meta or {})
    Path(path).write_bytes(_pack_container(TENSOR_FILE_MAGIC, full_meta,
                                           list(named_arrays)))


def load_tensor_file(path) -> tuple[dict, dict]:
    """Read back a BDF1 tensor file as (metadata, {name: float32 array})."""
    return _unpack_container(Path(path).read_bytes(), TENSOR_FILE_MAGIC, path)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Write the BDN1 container: JSON metadata, float32 tensors, CRC32."""
    meta = {
        "version": ckpt.version,
        "dimension": ckpt.dimension,
        "seed": ckpt.seed,
        "sample_rate_hz": ckpt.sample_rate_hz,
        "net_spec": {
            "input_shape": list(ckpt.net_spec.input_shape),
            "layers": [_layer_to_dict(l) for l in ckpt.net_spec.layers],
        },
        "feature_config": {
            "n_fft": ckpt.feature_config.n_fft,
            "hop": ckpt.feature_config.hop,
            "n_mels": ckpt.feature_config.n_mels,
            "fmin": ckpt.feature_config.fmin,
            "fmax": ckpt.feature_config.fmax,
            "db_floor": ckpt.feature_config.db_floor,
        },
        "segmentation_config": {
            "top_db": ckpt.segmentation_config.top_db,
            "target_len": ckpt.segmentation_config.target_len,
            "stride": ckpt.segmentation_config.stride,
            "detect_frame_len": ckpt.segmentation_config.detect_frame_len,
            "detect_hop": ckpt.segmentation_config.detect_hop,
        },
        "boundaries": None if ckpt.boundaries is None else
            {"t_low": ckpt.boundaries.t_low, "t_high": ckpt.boundaries.t_high},
    }
    Path(path).write_bytes(
        _pack_container(CHECKPOINT_MAGIC, meta, list(ckpt.params.tensors()))
    )


def load_checkpoint(path, dimension: Optional[str] = None) -> Checkpoint:
    """Read and verify a BDN1 container.

    Raises CheckpointError on a bad magic, version mismatch, truncation,
    checksum failure, or (when ``dimension`` is given) a dimension-tag
    mismatch.
    """
    meta, tensors = _unpack_container(Path(path).read_bytes(), CHECKPOINT_MAGIC, path)
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {meta.get('version')!r}")
    if dimension is not None and meta["dimension"] != dimension:
        raise CheckpointError(
            f"{path}: dimension tag is {meta['dimension']!r}, expected {dimension!r}"
        )

    spec = nn.NetSpec(
        input_shape=tuple(meta["net_spec"]["input_shape"]),
        layers=tuple(_layer_from_dict(d) for d in meta["net_spec"]["layers"]),
    )
    layers = []
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, (nn.Conv2d, nn.Dense)):
            try:
                layers.append({"w": tensors[f"layer{i}.weight"], "b": tensors[f"layer{i}.bias"]})
            except KeyError as exc:
                raise CheckpointError(f"{path}: missing tensor for layer {i}") from exc
        else:
            layers.append(None)
    fc = meta["feature_config"]
    sc = meta["segmentation_config"]
    b = meta["boundaries"]
    return Checkpoint(
        dimension=meta["dimension"],
        seed=meta["seed"],
        net_spec=spec,
        params=nn.Params(layers=layers, seed=meta["seed"]),
        feature_config=FeatureConfig(**fc),
        segmentation_config=SegmentationConfig(**sc),
        sample_rate_hz=meta["sample_rate_hz"],
        boundaries=None if b is None else Boundaries(b["t_low"], b["t_high"]),
        version=meta["version"],
    )
