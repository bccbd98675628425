"""Optical + SAR fusion land-cover classification pipeline on seeded
synthetic scenes: simulation, temporal compositing, CART training,
per-pixel classification, accuracy reporting, CLI and a local labeling
service."""

__version__ = "0.1.0"

from .cart import CartClassifier, TrainParams, best_split, gini
from .composite import (
    FilterSpec,
    build_fused_composite,
    build_optical_composite,
    build_sar_composite,
    filter_collection,
    reduce_mean,
)
from .classify import classify_stack, render_classmap, render_composite
from .config import DEFAULT_CONFIG, RunConfig, parse_config
from .errors import TerrafuseError
from .raster import Band, BandStack, ClassMap, GeoTransform, read_stack, write_stack
from .samples import SamplePoint, SampleSet, auto_sample, extract_features, parse_samples
from .simulate import ClassSpec, SceneConfig, generate_truth
from .validation import accuracy_metrics, compare_report, confusion_matrix
from .workflow import run_experiment

__all__ = [
    "__version__",
    "Band",
    "BandStack",
    "CartClassifier",
    "ClassMap",
    "ClassSpec",
    "DEFAULT_CONFIG",
    "FilterSpec",
    "GeoTransform",
    "RunConfig",
    "SamplePoint",
    "SampleSet",
    "SceneConfig",
    "TerrafuseError",
    "TrainParams",
    "accuracy_metrics",
    "auto_sample",
    "best_split",
    "build_fused_composite",
    "build_optical_composite",
    "build_sar_composite",
    "classify_stack",
    "compare_report",
    "confusion_matrix",
    "extract_features",
    "filter_collection",
    "generate_truth",
    "gini",
    "parse_config",
    "parse_samples",
    "read_stack",
    "reduce_mean",
    "render_classmap",
    "render_composite",
    "run_experiment",
    "write_stack",
]
