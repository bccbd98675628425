"""Release acceptance checks.

Each test covers one release criterion end to end and prints a single
`[acceptance] <name>: PASS (...)` line with its headline numbers (visible
under `pytest -s`). The fusion-gain sweep is the slow one; everything else
runs in seconds.
"""

import hashlib
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from terrafuse.cart import SplitChoice, best_split, parse_tree, serialize_tree, train
from terrafuse.classify import classify_stack
from terrafuse.composite import reduce_mean
from terrafuse.config import DEFAULT_CONFIG, parse_config
from terrafuse.raster import Band, BandStack, GeoTransform, read_stack, write_stack
from terrafuse.samples import SamplePoint, SampleSet, parse_samples, serialize_samples
from terrafuse.simulate import generate_sar_series, generate_truth
from terrafuse.validation import ConfusionMatrix, accuracy_metrics
from terrafuse.workflow import run_experiment

from conftest import SMALL_SCENE
from test_cart import oracle_best_split, random_dataset, vectors
from test_simulate import scene_cfg

STAGES = ("simulate", "composite", "train", "classify", "validate",
          "compare", "render")


@pytest.fixture(scope="module")
def default_result():
    """The out-of-box experiment: default config, default seed."""
    t0 = time.perf_counter()
    result = run_experiment(parse_config({}))
    return result, time.perf_counter() - t0


def test_fusion_gain(default_result):
    result, elapsed = default_result
    assert elapsed <= 60.0
    oa_optical = result.reports["optical"].overall_accuracy
    oa_fused = result.reports["fused"].overall_accuracy
    delta = oa_fused - oa_optical
    assert delta >= 0.05, f"fused gain {delta * 100:.1f}pp below 5pp"

    wins = 0
    times = []
    for seed in range(20):
        t0 = time.perf_counter()
        r = run_experiment(parse_config({}, seed_override=seed))
        times.append(time.perf_counter() - t0)
        if (r.reports["fused"].overall_accuracy
                > r.reports["optical"].overall_accuracy):
            wins += 1
    assert max(times) <= 60.0
    assert wins >= 18, f"fused beat optical on only {wins}/20 seeds"
    print(f"[acceptance] fusion-gain: PASS (optical={oa_optical:.3f}, "
          f"fused={oa_fused:.3f}, delta=+{delta * 100:.1f}pp, sign={wins}/20, "
          f"slowest seed {max(times):.1f}s)")


def test_cart_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(424242)
    for i in range(200):
        x, y = random_dataset(rng)
        min_leaf = (1, 1, 2, 3)[i % 4]
        got = best_split(vectors(x, y), min_leaf=min_leaf)
        want = oracle_best_split(x.tolist(), y.tolist(), min_leaf=min_leaf)
        if want is None:
            assert got is None, f"dataset {i}: impl found a split, oracle none"
        else:
            assert got == SplitChoice(*want), (
                f"dataset {i}: impl {got} vs oracle {want}"
            )
    elapsed = time.perf_counter() - t0
    assert elapsed <= 10.0
    print(f"[acceptance] cart-oracle: PASS (200/200 datasets, exact "
          f"tie-order agreement, {elapsed:.2f}s)")


def test_speckle_reduction():
    t0 = time.perf_counter()
    cfg = scene_cfg(width=256, height=256, n_dates=12)
    truth = generate_truth(cfg)
    series = generate_sar_series(truth, cfg)
    water = truth.labels == 0
    single = series[0].stack.band("VV").values[water].astype(np.float64)
    mean12 = reduce_mean(series, ["VV"]).band("VV").values[water].astype(np.float64)
    ratio = single.var() / mean12.var()
    elapsed = time.perf_counter() - t0
    assert abs(ratio - 12.0) / 12.0 < 0.2, f"variance ratio {ratio:.2f}"
    assert elapsed <= 5.0
    print(f"[acceptance] speckle-reduction: PASS (single/mean variance "
          f"ratio {ratio:.2f} vs 12, {elapsed:.2f}s)")


def test_noise_free_exactness():
    classes = json.loads(json.dumps(DEFAULT_CONFIG["scene"]["classes"]))
    for c in classes:
        c["optical_sd"] = [0.0] * 6
    run = parse_config({
        "scene": {
            "width": 128,
            "height": 128,
            "cloud_fraction_range": [0.0, 0.0],
            "looks": 1_000_000.0,
            "classes": classes,
        },
        "samples": {
            "train_counts": {"0": 10, "1": 10, "2": 10},
            "validation_counts": {"0": 5, "1": 5, "2": 5},
            "min_spacing": 3.0,
        },
    })
    result = run_experiment(run)
    truth = result.scene.truth.labels
    for source in ("optical", "fused"):
        cm = classify_stack(result.models[source],
                            result.composites.for_source(source))
        assert (cm.labels != 255).all(), f"{source}: unexpected nodata pixels"
        agree = (cm.labels == truth).mean()
        assert agree == 1.0, f"{source}: truth recovery {agree:.4f} < 1.0"
    print("[acceptance] noise-free-exactness: PASS (optical and fused both "
          "recover 100% of truth pixels)")


def test_metric_exactness(default_result):
    result, _ = default_result
    for source in ("optical", "fused"):
        m = result.reports[source].matrix
        assert m.row_sums() == (129, 95, 89), f"{source}: {m.row_sums()}"
        trace = int(np.trace(m.counts))
        assert result.reports[source].overall_accuracy == trace / m.total

    diag = accuracy_metrics(ConfusionMatrix(
        np.diag([129, 95, 89]).astype(np.int64),
        {0: "water", 1: "urban", 2: "non-urban"},
    ))
    assert diag.overall_accuracy == 1.0
    assert diag.kappa == 1.0
    print("[acceptance] metric-exactness: PASS (row sums (129, 95, 89), "
          "overall = trace/total exact, diagonal -> 1.0/1.0)")


def test_cli_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL_SCENE))
    digests = []
    for name in ("first", "second"):
        out = tmp_path / name
        for stage in STAGES:
            proc = subprocess.run(
                [sys.executable, "-m", "terrafuse", stage,
                 "--config", str(cfg), "--out", str(out)],
                capture_output=True, text=True, timeout=300,
            )
            assert proc.returncode == 0, f"{stage}: {proc.stderr}"
        digests.append({
            p.relative_to(out).as_posix():
                hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(out.rglob("*")) if p.is_file()
        })
    assert len(digests[0]) > 0
    assert digests[0] == digests[1]
    print(f"[acceptance] cli-determinism: PASS ({len(digests[0])} artifacts, "
          "byte-identical digests across two runs)")


def test_round_trips(tmp_path):
    # raster container: bitwise, NaN payloads included
    rng = np.random.default_rng(99)
    transform = GeoTransform(-94.925, 29.389, 0.0001, -0.0001)
    values = rng.uniform(-50.0, 50.0, (17, 13)).astype(np.float32)
    values[0, 0] = np.nan
    values[1, 1] = np.array([0x7FC00001], dtype=np.uint32).view(np.float32)[0]
    stack = BandStack(transform, [Band("a", values), Band("b", values * 2.0)])
    write_stack(stack, tmp_path / "s")
    back = read_stack(tmp_path / "s")
    for name in ("a", "b"):
        assert np.array_equal(
            stack.band(name).values.view(np.uint32),
            back.band(name).values.view(np.uint32),
        )

    # sample pins: structural equality plus serialized fixed point
    pins = SampleSet(
        (SamplePoint(-94.92, 29.38, 0, note="bay"),
         SamplePoint(-94.91, 29.37, 2)),
        legend={0: "water", 2: "non-urban"},
    )
    text = serialize_samples(pins)
    assert parse_samples(text) == pins
    assert serialize_samples(parse_samples(text)) == text

    # tree document: structural equality plus serialized fixed point
    x, y = random_dataset(np.random.default_rng(5))
    tree = train(vectors(x, y))
    doc = serialize_tree(tree)
    assert parse_tree(doc) == tree
    assert serialize_tree(parse_tree(doc)) == doc

    print("[acceptance] round-trips: PASS (stack bitwise, pins and tree "
          "document fixed-point)")
