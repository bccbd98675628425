"""End-to-end experiment steps shared by the CLI, the HTTP service and the
test suite, so every surface computes identical results from identical
inputs.

The comparison workflow trains two models from the same pins — one on the
optical composite, one on the fused optical+SAR composite — and validates
both on the same held-out pins, isolating the contribution of the SAR
bands.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cart import CartClassifier, TrainParams
from .composite import (
    build_fused_composite,
    build_optical_composite,
    build_sar_composite,
    filter_collection,
)
from .config import RunConfig
from .raster import BandStack, ClassMap
from .samples import SampleSet, auto_sample, extract_features
from .simulate import (
    ImageCollection,
    generate_optical_series,
    generate_sar_series,
    generate_truth,
)
from .validation import AccuracyReport, accuracy_metrics, compare_report, confusion_matrix

SOURCES = ("optical", "fused")


@dataclass(frozen=True)
class Scene:
    truth: ClassMap
    optical: ImageCollection
    sar: ImageCollection


@dataclass(frozen=True)
class Composites:
    optical: BandStack
    sar: BandStack
    fused: BandStack

    def for_source(self, source: str) -> BandStack:
        if source == "optical":
            return self.optical
        if source == "fused":
            return self.fused
        raise ValueError(f"unknown source {source!r}, expected optical or fused")


def simulate_scene(run: RunConfig) -> Scene:
    truth = generate_truth(run.scene)
    return Scene(
        truth=truth,
        optical=generate_optical_series(truth, run.scene),
        sar=generate_sar_series(truth, run.scene),
    )


def build_composites(scene: Scene, run: RunConfig) -> Composites:
    optical = build_optical_composite(
        filter_collection(scene.optical, run.filter_optical)
    )
    sar = build_sar_composite(filter_collection(scene.sar, run.filter_sar))
    return Composites(optical=optical, sar=sar, fused=build_fused_composite(optical, sar))


def draw_sample_sets(truth: ClassMap, run: RunConfig) -> tuple[SampleSet, SampleSet]:
    """Training and validation pin draws; validation avoids training pins
    so the two sets stay spatially disjoint."""
    train = auto_sample(
        truth,
        run.samples.train_counts,
        seed=run.samples.train_seed,
        min_spacing=run.samples.min_spacing,
    )
    validation = auto_sample(
        truth,
        run.samples.validation_counts,
        seed=run.samples.validation_seed,
        min_spacing=run.samples.min_spacing,
        avoid=train,
    )
    return train, validation


def train_model(
    stack: BandStack, pins: SampleSet, params: TrainParams
) -> CartClassifier:
    vectors = extract_features(pins, stack)
    clf = CartClassifier(
        max_depth=params.max_depth,
        min_leaf_samples=params.min_leaf_samples,
        min_impurity_decrease=params.min_impurity_decrease,
    )
    return clf.fit_vectors(vectors)


def validate_model(
    model: CartClassifier, stack: BandStack, pins: SampleSet
) -> AccuracyReport:
    vectors = extract_features(pins, stack)
    return accuracy_metrics(confusion_matrix(model, vectors))


@dataclass(frozen=True)
class ExperimentResult:
    scene: Scene
    composites: Composites
    train_pins: SampleSet
    validation_pins: SampleSet
    models: dict[str, CartClassifier]
    reports: dict[str, AccuracyReport]
    comparison: dict


def run_experiment(run: RunConfig) -> ExperimentResult:
    """Simulate, composite, sample, train and validate both sources."""
    scene = simulate_scene(run)
    composites = build_composites(scene, run)
    train_pins, validation_pins = draw_sample_sets(scene.truth, run)
    models = {}
    reports = {}
    for source in SOURCES:
        stack = composites.for_source(source)
        models[source] = train_model(stack, train_pins, run.train_params)
        reports[source] = validate_model(models[source], stack, validation_pins)
    comparison = compare_report(reports["optical"], reports["fused"])
    return ExperimentResult(
        scene=scene,
        composites=composites,
        train_pins=train_pins,
        validation_pins=validation_pins,
        models=models,
        reports=reports,
        comparison=comparison,
    )
