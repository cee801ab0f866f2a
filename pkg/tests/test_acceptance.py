"""Acceptance gate: one test per numbered criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

The end-to-end criterion trains on the synthetic corpus, whose label-linked
acoustics make ordinal-structure claims falsifiable without external data.
"""

import itertools
import os
import time

import numpy as np
import pytest

from barkspace import neuralnet as nn
from barkspace import pipeline
from barkspace.cli import main as cli_main
from barkspace.corpus import SynthConfig, synth_corpus
from barkspace.evaluation import (Boundaries, ConfusionMatrix,
                                  UndefinedMetricError, accuracy,
                                  calibrate_boundaries, decode, evaluate,
                                  event_level_split, tap)
from barkspace.features import (FeatureConfig, log_mel,
                                mel_center_frequencies)
from barkspace.labels import OrdinalLabel
from barkspace.models import (Checkpoint, CheckpointError, TrainConfig,
                              load_checkpoint, make_pairs, predict_many,
                              save_checkpoint, siamese_forward)
from barkspace.segmentation import EventSegment, SegmentationConfig, frame_segment
from gradcheck import draw_checkable_case, max_gradient_error, random_small_spec

H, M, L = OrdinalLabel.HIGH, OrdinalLabel.MEDIUM, OrdinalLabel.LOW
SR = 22050


def report(criterion, ok, detail):
    print(f"\n[acceptance {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def test_criterion_1_tap_oracle_equivalence():
    """tap() matches a brute-force recount on 1,000 random confusion matrices."""
    rng = np.random.default_rng(10)
    t0 = time.time()
    checked = undefined = 0
    for k in range(1000):
        counts = rng.integers(0, 51, size=(3, 3))
        if k % 25 == 0:  # force the zero-denominator branch regularly
            counts[OrdinalLabel.HIGH] = 0
            counts[OrdinalLabel.LOW] = 0
        cm = ConfusionMatrix(counts)
        # expand the matrix back into labeled instances and recount
        instances = [(t, p) for t in (L, M, H) for p in (L, M, H)
                     for _ in range(counts[t, p])]
        flips = sum(1 for t, p in instances if (t, p) in ((H, L), (L, H)))
        extremes = sum(1 for t, _ in instances if t in (H, L))
        if extremes == 0:
            with pytest.raises(UndefinedMetricError):
                tap(cm)
            undefined += 1
        else:
            assert tap(cm) == 100.0 * flips / extremes
            checked += 1
    elapsed = time.time() - t0
    report(1, elapsed < 5.0,
           f"{checked} matrices match exactly, {undefined} zero-denominator "
           f"cases raise, in {elapsed:.2f}s (< 5s)")


def test_criterion_2_gradient_correctness():
    """Analytic gradients vs central differences (h=1e-5, float64) on >= 20 nets."""
    t0 = time.time()
    fixed = [
        nn.NetSpec((2, 5, 4), (nn.Conv2d(3, 2, 2),)),
        nn.NetSpec((1, 4, 3), (nn.Relu(),)),
        nn.NetSpec((1, 5, 4), (nn.MaxPool2x2(),)),
        nn.NetSpec((2, 3, 3), (nn.Flatten(), nn.Dense(2))),
        nn.NetSpec((1, 7, 6), (nn.Conv2d(2, 3, 3), nn.Relu(), nn.MaxPool2x2(),
                               nn.Flatten(), nn.Dense(4), nn.Relu(), nn.Dense(1))),
    ]
    rng = np.random.default_rng(20)
    specs = fixed + [random_small_spec(rng) for _ in range(17)]
    worst = 0.0
    for k, spec in enumerate(specs):
        params, x = draw_checkable_case(spec, rng)
        worst = max(worst, max_gradient_error(spec, params, x, rng))
    elapsed = time.time() - t0
    report(2, worst < 1e-4 and elapsed < 120.0,
           f"{len(specs)} specs (all layer types), max relative error "
           f"{worst:.2e} (< 1e-4), in {elapsed:.1f}s (< 2 min)")


def test_criterion_3_siamese_structural_identities():
    spec = nn.NetSpec((1, 10, 8), (nn.Conv2d(3, 3, 3), nn.Relu(), nn.MaxPool2x2(),
                                   nn.Flatten(), nn.Dense(6), nn.Relu(), nn.Dense(1)))
    rng = np.random.default_rng(30)
    worst_anti = worst_self = 0.0
    for k in range(100):
        params = nn.init_params(spec, k)
        xa = rng.uniform(-1, 1, size=spec.input_shape)
        xb = rng.uniform(-1, 1, size=spec.input_shape)
        anti = abs(siamese_forward(spec, params, xa, xb)
                   + siamese_forward(spec, params, xb, xa))
        self_d = abs(siamese_forward(spec, params, xa, xa))
        worst_anti = max(worst_anti, anti)
        worst_self = max(worst_self, self_d)
    report(3, worst_anti <= 1e-12 and worst_self <= 1e-12,
           f"100 random cases: |f(a,b)+f(b,a)| <= {worst_anti:.1e}, "
           f"|f(x,x)| <= {worst_self:.1e} (both <= 1e-12)")


def test_criterion_4_pair_target_correctness():
    labels = [H, H, M, M, M, L, L, L]
    pairs = make_pairs(labels, 900, seed=4, epoch=0)
    high_low = [t for ia, ib, t in pairs if labels[ia] == H and labels[ib] == L]
    equal = [t for ia, ib, t in pairs if labels[ia] == labels[ib]]
    cells = {}
    for ia, ib, _ in pairs:
        cells[(labels[ia], labels[ib])] = cells.get((labels[ia], labels[ib]), 0) + 1
    spread = max(cells.values()) - min(cells.values())
    ok = (len(high_low) > 0 and all(t == 2.0 for t in high_low)
          and all(t == 0.0 for t in equal) and len(cells) == 9 and spread <= 1)
    report(4, ok, f"(High,Low) target 2.0 on {len(high_low)} pairs, equal-label "
                  f"target 0.0, 9-cell count spread {spread} (<= 1)")


def test_criterion_5_framing_arithmetic():
    cfg = SegmentationConfig()
    rng = np.random.default_rng(50)
    x = rng.uniform(-1, 1, size=10240)
    frames = frame_segment(EventSegment("a", 0, 10240, x), cfg)
    ok = (len(frames) == 3
          and all(np.array_equal(f.samples, x[o : o + 5120])
                  for f, o in zip(frames, (0, 2560, 5120))))
    y = rng.uniform(-1, 1, size=5000)
    (pf,) = frame_segment(EventSegment("b", 0, 5000, y), cfg)
    ok = (ok and len(pf.samples) == 5120
          and np.array_equal(pf.samples[:60], np.zeros(60))
          and np.array_equal(pf.samples[-60:], np.zeros(60))
          and np.array_equal(pf.samples[60:-60], y))
    report(5, ok, "len 10240 -> frames at {0, 2560, 5120}; len 5000 -> one "
                  "frame with 60+60 symmetric zeros (bitwise)")


def test_criterion_6_end_to_end_synthetic(tmp_path):
    """Twin-network model recovers the ordinal structure of the synthetic corpus."""
    t0 = time.time()
    seeds = (101, 202, 303)
    acc = {d: [] for d in ("arousal", "valence")}
    tap_pc = {d: [] for d in ("arousal", "valence")}
    valence_wins = 0
    for seed in seeds:
        out = tmp_path / f"corpus_{seed}"
        entries = synth_corpus(SynthConfig(seed=seed, n_events=200), out)
        events = pipeline.load_event_features(entries, out)
        train_ids, _ = event_level_split([e.event_id for e in events], 0.8, seed=seed)
        tr = set(train_ids)
        train_events = [e for e in events if e.event_id in tr]
        test_events = [e for e in events if e.event_id not in tr]
        taps = {}
        for dim in ("arousal", "valence"):
            for kind in ("siamese", "baseline"):
                cfg = TrainConfig(dimension=dim, epochs=15, batch_size=64,
                                  learning_rate=1e-3, seed=seed,
                                  pairs_per_epoch=2000)
                res = pipeline.train_dimension(train_events, kind, cfg)
                rep = evaluate(res.checkpoint,
                               pipeline.evaluation_events(test_events, dim))
                taps[(dim, kind)] = rep.tap_percent
                if kind == "siamese":
                    acc[dim].append(rep.event_accuracy)
                    tap_pc[dim].append(rep.tap_percent)
                print(f"  seed {seed} {kind:8s} {dim:7s}: "
                      f"acc {rep.event_accuracy:.3f} TAP {rep.tap_percent:.2f}%")
        if taps[("valence", "siamese")] <= taps[("valence", "baseline")]:
            valence_wins += 1
    elapsed = time.time() - t0
    means = {d: (float(np.mean(acc[d])), float(np.mean(tap_pc[d])))
             for d in ("arousal", "valence")}
    ok = (all(means[d][0] >= 0.80 for d in means)
          and all(means[d][1] <= 5.0 for d in means)
          and valence_wins >= 2 and elapsed < 600.0)
    report(6, ok,
           f"seed-averaged siamese: arousal acc {means['arousal'][0]:.3f} / "
           f"TAP {means['arousal'][1]:.2f}%, valence acc {means['valence'][0]:.3f} / "
           f"TAP {means['valence'][1]:.2f}% (need acc >= 0.80, TAP <= 5%); "
           f"valence TAP siamese <= baseline on {valence_wins}/3 seeds (need >= 2); "
           f"{elapsed:.0f}s (< 600s)")


def brute_force_boundary_accuracy(preds, labels):
    values = sorted(set(preds))
    cands = [-np.inf] + [(a + b) / 2 for a, b in zip(values, values[1:])] + [np.inf]
    best = -1
    for t_low, t_high in itertools.product(cands, cands):
        if t_low > t_high:
            continue
        b = Boundaries(t_low, t_high)
        best = max(best, sum(1 for v, lab in zip(preds, labels) if decode(v, b) == lab))
    return best / len(preds)


def test_criterion_7_boundary_calibration_optimality():
    rng = np.random.default_rng(70)
    worst_gap = 0.0
    cases = 0
    for _ in range(30):
        n = int(rng.integers(3, 201))
        labels = [L, M, H] + [OrdinalLabel(int(k)) for k in rng.integers(0, 3, size=n - 3)]
        centers = {L: -1.0, M: 0.0, H: 1.0}
        preds = [centers[lab] + float(rng.normal(0, 0.8)) for lab in labels]
        b = calibrate_boundaries(preds, labels)
        got = accuracy([decode(v, b) for v in preds], labels)
        oracle = brute_force_boundary_accuracy(preds, labels)
        worst_gap = max(worst_gap, oracle - got)
        cases += 1
        # additive shift: decoded labels must not change at all
        for shift in (2.5, -1036.25):
            bs = calibrate_boundaries([v + shift for v in preds], labels)
            assert [decode(v + shift, bs) for v in preds] == [decode(v, b) for v in preds]
    report(7, worst_gap == 0.0,
           f"{cases} sets (<= 200 preds): calibrated accuracy equals the grid "
           f"oracle (worst gap {worst_gap}); shift invariance exact")


def test_criterion_8_leak_free_splitting():
    rng = np.random.default_rng(80)
    leaks = 0
    for trial in range(100):
        n = int(rng.integers(2, 60))
        ids = [f"t{trial}_ev{i}" for i in range(n)]
        frames = {eid: [f"{eid}_f{k}" for k in range(int(rng.integers(1, 7)))]
                  for eid in ids}
        frac = float(rng.uniform(0.3, 0.7))
        k = int(np.floor(n * frac + 0.5))
        if k == 0 or k == n:
            continue
        train, test = event_level_split(ids, frac, seed=trial)
        if set(train) & set(test) or sorted(train + test) != sorted(ids):
            leaks += 1
            continue
        train_frames = {f for eid in train for f in frames[eid]}
        test_frames = {f for eid in test for f in frames[eid]}
        if train_frames & test_frames:
            leaks += 1
    report(8, leaks == 0, f"100 random manifests: 0 event or inherited-frame "
                          f"leaks ({leaks} found)")


def test_criterion_9_checkpoint_roundtrip(tmp_path):
    spec = nn.default_net_spec()
    ckpt = Checkpoint("valence", 9, spec, nn.init_params(spec, 9, dtype=np.float32),
                      FeatureConfig(), SegmentationConfig(), SR,
                      boundaries=Boundaries(-0.2, 0.4))
    path = tmp_path / "model.ckpt"
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path)
    rng = np.random.default_rng(90)
    grids = [rng.uniform(0, 1, size=(64, 37)) for _ in range(50)]
    bitwise = np.array_equal(predict_many(ckpt, grids), predict_many(back, grids))

    blob = bytearray(path.read_bytes())
    detected = 0
    positions = rng.integers(0, len(blob), size=10)
    for pos in positions:
        corrupt = bytearray(blob)
        corrupt[pos] ^= 0x01
        (tmp_path / "bad.ckpt").write_bytes(bytes(corrupt))
        try:
            load_checkpoint(tmp_path / "bad.ckpt")
        except CheckpointError:
            detected += 1
    report(9, bitwise and detected == len(positions),
           f"50 predictions bit-identical after save/load; {detected}/"
           f"{len(positions)} single-byte corruptions detected via CRC")


def test_criterion_10_feature_sanity():
    cfg = FeatureConfig()
    x = np.sin(2 * np.pi * 1000.0 * np.arange(5120) / SR)
    grid = log_mel(x, cfg, SR)
    centers = mel_center_frequencies(SR, cfg)
    expect = int(np.argmin(np.abs(centers - 1000.0)))
    got = int(grid.mean(axis=1).argmax())
    bin_ok = abs(got - expect) <= 1

    rich = 0.6 * x + 0.1 * np.sin(2 * np.pi * 3200.0 * np.arange(5120) / SR + 0.3)
    base = log_mel(rich, cfg, SR)
    exact = all(np.array_equal(log_mel(a * rich, cfg, SR), base) for a in (0.5, 2.0))
    # 0.1x rounds every sample (0.1 has no binary representation), so equality
    # is bounded by that input rounding; the grid still matches to 1e-12
    near = float(np.max(np.abs(log_mel(0.1 * rich, cfg, SR) - base)))
    report(10, bin_ok and exact and near < 1e-12,
           f"1 kHz lands on mel bin {got} (filter center nearest 1 kHz: {expect}, "
           f"+/- 1); gain invariance exact for 0.5x/2x, {near:.1e} for 0.1x")


def test_criterion_11_external_corpus_stretch(tmp_path):
    """Non-gating: runs only when a discretized external manifest is supplied."""
    manifest = os.environ.get("BARKSPACE_EXTERNAL_MANIFEST")
    if not manifest:
        print("\n[acceptance 11] SKIP: optional stretch; set "
              "BARKSPACE_EXTERNAL_MANIFEST to a discretized manifest to run")
        pytest.skip("external corpus not supplied")
    split_csv = tmp_path / "split.csv"
    assert cli_main(["split", "--manifest", manifest, "--ratio", "0.8",
                     "--seed", "42", "--out", str(split_csv)]) == 0
    fields = {}
    for dim in ("arousal", "valence"):
        for kind in ("baseline", "siamese"):
            ckpt = tmp_path / f"{dim}_{kind}.ckpt"
            rep = tmp_path / f"{dim}_{kind}.json"
            assert cli_main(["train", "--manifest", str(split_csv), "--dim", dim,
                             "--model", kind, "--out", str(ckpt)]) == 0
            assert cli_main(["eval", "--model", str(ckpt), "--manifest",
                             str(split_csv), "--split", "test",
                             "--report", str(rep)]) == 0
            import json
            data = json.loads(rep.read_text())
            fields[(dim, kind)] = (data["event_accuracy"], data["tap_percent"])
    report(11, True, f"external corpus end-to-end complete: {fields}")
