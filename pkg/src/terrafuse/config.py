"""Run configuration: one JSON document drives every pipeline stage.

A user config is deep-merged over the built-in defaults, so `{}` is a
valid config and partial documents override only what they name. The
effective (merged) document is what gets hashed into run manifests.

Sections: scene, filter, bands, samples, train_params, palette, and an
optional service section for the HTTP port.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cart import TrainParams
from .composite import OPTICAL, SAR, SAR_COMPOSITE_BAND_NAMES, FilterSpec
from .errors import ConfigError, IoError
from .raster import GeoTransform
from .simulate import OPTICAL_BAND_NAMES, ClassSpec, SceneConfig

DEFAULT_CONFIG: dict = {
    "scene": {
        "seed": 42,
        "width": 512,
        "height": 512,
        "n_dates": 12,
        "date_range": ["2020-01-01", "2021-08-01"],
        "cloud_fraction_range": [0.0, 0.4],
        "looks": 6.0,
        "angle_range": [29.0, 46.0],
        "transform": {
            "origin_x": -94.925,
            "origin_y": 29.389,
            "pixel_w": 0.0001,
            "pixel_h": -0.0001,
        },
        "classes": [
            {
                "id": 0,
                "name": "water",
                "fraction": 0.3,
                "optical_mean": [0.060, 0.070, 0.055, 0.045, 0.035, 0.030],
                "optical_sd": [0.018, 0.018, 0.018, 0.018, 0.018, 0.018],
                "sar_mean_db": [-22.0, -28.0],
            },
            {
                "id": 1,
                "name": "urban",
                "fraction": 0.3,
                "optical_mean": [0.068, 0.075, 0.065, 0.058, 0.052, 0.048],
                "optical_sd": [0.018, 0.018, 0.018, 0.018, 0.018, 0.018],
                "sar_mean_db": [-5.5, -11.0],
            },
            {
                "id": 2,
                "name": "non-urban",
                "fraction": 0.4,
                "optical_mean": [0.050, 0.090, 0.080, 0.150, 0.220, 0.260],
                "optical_sd": [0.025, 0.025, 0.025, 0.025, 0.025, 0.025],
                "sar_mean_db": [-11.5, -17.5],
            },
        ],
    },
    "filter": {
        "date_range": ["2020-01-01", "2021-08-01"],
        "max_cloud_fraction": 0.2,
    },
    "bands": {
        "optical": list(OPTICAL_BAND_NAMES),
        "sar": list(SAR_COMPOSITE_BAND_NAMES),
        "render": ["B4", "B3", "B2"],
        "stretch": [2.0, 98.0],
    },
    "samples": {
        "train_counts": {"0": 78, "1": 53, "2": 70},
        "validation_counts": {"0": 129, "1": 95, "2": 89},
        "min_spacing": 6.0,
        "train_seed": None,
        "validation_seed": None,
    },
    "train_params": {
        "max_depth": 12,
        "min_leaf_samples": 1,
        "min_impurity_decrease": 0.0,
    },
    "palette": {"0": [0, 0, 255], "1": [255, 255, 255], "2": [255, 0, 0]},
    "service": {"port": 8765},
}


@dataclass(frozen=True)
class SamplesConfig:
    train_counts: dict[int, int]
    validation_counts: dict[int, int]
    min_spacing: float
    train_seed: int
    validation_seed: int


@dataclass(frozen=True)
class RunConfig:
    """Validated, typed view of the effective config document."""

    scene: SceneConfig
    filter_optical: FilterSpec
    filter_sar: FilterSpec
    render_bands: tuple[str, str, str]
    stretch: tuple[float, float]
    samples: SamplesConfig
    train_params: TrainParams
    palette: dict[int, tuple[int, int, int]]
    port: int
    effective: dict  # the merged document this was parsed from


# sections keyed by class id rather than a fixed schema: a user value
# replaces the default whole instead of merging into it
_OPEN_PATHS = {
    "config.palette",
    "config.samples.train_counts",
    "config.samples.validation_counts",
}


def _merge(base, override, path="config"):
    """Recursive dict merge; lists and open-keyed maps replace whole."""
    if not isinstance(override, dict):
        return override
    if not isinstance(base, dict) or path in _OPEN_PATHS:
        return override
    out = dict(base)
    for key, value in override.items():
        if key in base:
            out[key] = _merge(base[key], value, f"{path}.{key}")
        else:
            raise ConfigError(f"unknown key {path}.{key}")
    return out


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise IoError(f"cannot read config {path}: {e}") from e
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config root must be an object")
    return obj


def _date(value, where: str) -> datetime.date:
    try:
        return datetime.date.fromisoformat(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: not an ISO date: {value!r}") from e


def _num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _counts(obj, where: str) -> dict[int, int]:
    if not isinstance(obj, dict) or not obj:
        raise ConfigError(f"{where}: expected a non-empty id -> count object")
    out = {}
    for key, value in obj.items():
        try:
            cid = int(key)
        except ValueError as e:
            raise ConfigError(f"{where}: bad class id {key!r}") from e
        out[cid] = _int(value, f"{where}[{key}]")
        if out[cid] < 0:
            raise ConfigError(f"{where}[{key}]: counts must be >= 0")
    return out


def _wrap(fn, *args, where: str):
    """Run a dataclass constructor, rewording its errors as ConfigError."""
    try:
        return fn(*args)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"{where}: {e}") from e


def parse_config(user: dict, seed_override: int | None = None) -> RunConfig:
    """Merge a user document over the defaults and validate every section."""
    merged = _merge(DEFAULT_CONFIG, user)
    if seed_override is not None:
        merged["scene"] = dict(merged["scene"])
        merged["scene"]["seed"] = seed_override

    sc = merged["scene"]
    classes = []
    if not isinstance(sc["classes"], list):
        raise ConfigError("scene.classes: expected a list")
    for i, c in enumerate(sc["classes"]):
        where = f"scene.classes[{i}]"
        if not isinstance(c, dict):
            raise ConfigError(f"{where}: expected an object")
        extra = set(c) - {"id", "name", "fraction", "optical_mean",
                          "optical_sd", "sar_mean_db"}
        if extra:
            raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
        classes.append(
            _wrap(
                ClassSpec,
                _int(c["id"], f"{where}.id"),
                str(c["name"]),
                _num(c["fraction"], f"{where}.fraction"),
                tuple(_num(v, f"{where}.optical_mean") for v in c["optical_mean"]),
                tuple(_num(v, f"{where}.optical_sd") for v in c["optical_sd"]),
                tuple(_num(v, f"{where}.sar_mean_db") for v in c["sar_mean_db"]),
                where=where,
            )
        )
    transform = _wrap(GeoTransform.from_dict, sc["transform"], where="scene.transform")
    scene = _wrap(
        SceneConfig,
        _int(sc["seed"], "scene.seed"),
        _int(sc["width"], "scene.width"),
        _int(sc["height"], "scene.height"),
        tuple(classes),
        _int(sc["n_dates"], "scene.n_dates"),
        tuple(_num(v, "scene.cloud_fraction_range") for v in sc["cloud_fraction_range"]),
        _num(sc["looks"], "scene.looks"),
        tuple(_num(v, "scene.angle_range") for v in sc["angle_range"]),
        (
            _date(sc["date_range"][0], "scene.date_range"),
            _date(sc["date_range"][1], "scene.date_range"),
        ),
        transform,
        where="scene",
    )

    fl = merged["filter"]
    f_start = _date(fl["date_range"][0], "filter.date_range")
    f_end = _date(fl["date_range"][1], "filter.date_range")
    max_cloud = _num(fl["max_cloud_fraction"], "filter.max_cloud_fraction")
    filter_optical = _wrap(
        FilterSpec, f_start, f_end, OPTICAL, max_cloud, where="filter"
    )
    filter_sar = _wrap(FilterSpec, f_start, f_end, SAR, 1.0, where="filter")

    bands = merged["bands"]
    if tuple(bands["optical"]) != OPTICAL_BAND_NAMES:
        raise ConfigError(
            f"bands.optical must be {list(OPTICAL_BAND_NAMES)}; "
            "the optical composite band list is fixed"
        )
    if tuple(bands["sar"]) != SAR_COMPOSITE_BAND_NAMES:
        raise ConfigError(
            f"bands.sar must be {list(SAR_COMPOSITE_BAND_NAMES)}; "
            "the SAR composite band list is fixed"
        )
    render = tuple(str(b) for b in bands["render"])
    if len(render) != 3:
        raise ConfigError("bands.render must name exactly three bands")
    stretch = tuple(_num(v, "bands.stretch") for v in bands["stretch"])
    if len(stretch) != 2 or not 0 <= stretch[0] < stretch[1] <= 100:
        raise ConfigError("bands.stretch must be [lo, hi] with 0 <= lo < hi <= 100")

    sm = merged["samples"]
    train_seed = sm["train_seed"]
    validation_seed = sm["validation_seed"]
    if train_seed is None or validation_seed is None:
        # deterministic children of the scene seed, distinct from every
        # stream the simulator itself draws
        derived = np.random.SeedSequence(scene.seed, spawn_key=(5,)).generate_state(2)
        if train_seed is None:
            train_seed = int(derived[0])
        if validation_seed is None:
            validation_seed = int(derived[1])
    samples = SamplesConfig(
        train_counts=_counts(sm["train_counts"], "samples.train_counts"),
        validation_counts=_counts(
            sm["validation_counts"], "samples.validation_counts"
        ),
        min_spacing=_num(sm["min_spacing"], "samples.min_spacing"),
        train_seed=_int(train_seed, "samples.train_seed"),
        validation_seed=_int(validation_seed, "samples.validation_seed"),
    )
    if samples.min_spacing < 0:
        raise ConfigError("samples.min_spacing must be >= 0")
    known_ids = set(scene.legend)
    for name in ("train_counts", "validation_counts"):
        bad = set(getattr(samples, name)) - known_ids
        if bad:
            raise ConfigError(f"samples.{name}: unknown class ids {sorted(bad)}")

    tp = merged["train_params"]
    train_params = _wrap(
        TrainParams,
        _int(tp["max_depth"], "train_params.max_depth"),
        _int(tp["min_leaf_samples"], "train_params.min_leaf_samples"),
        _num(tp["min_impurity_decrease"], "train_params.min_impurity_decrease"),
        where="train_params",
    )

    palette = {}
    for key, rgb in merged["palette"].items():
        try:
            cid = int(key)
        except ValueError as e:
            raise ConfigError(f"palette: bad class id {key!r}") from e
        if not isinstance(rgb, (list, tuple)) or len(rgb) != 3:
            raise ConfigError(f"palette[{key}]: expected an [r, g, b] triple")
        triple = tuple(_int(v, f"palette[{key}]") for v in rgb)
        if any(not 0 <= v <= 255 for v in triple):
            raise ConfigError(f"palette[{key}]: channels must be within 0..255")
        palette[cid] = triple
    missing = known_ids - set(palette)
    if missing:
        raise ConfigError(f"palette lacks entries for class ids {sorted(missing)}")

    port = _int(merged["service"]["port"], "service.port")
    if not 1 <= port <= 65535:
        raise ConfigError("service.port must be within 1..65535")

    return RunConfig(
        scene=scene,
        filter_optical=filter_optical,
        filter_sar=filter_sar,
        render_bands=render,
        stretch=stretch,
        samples=samples,
        train_params=train_params,
        palette=palette,
        port=port,
        effective=merged,
    )


def config_digest(effective: dict) -> str:
    """sha256 of the canonical JSON form of the effective config."""
    canon = json.dumps(effective, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
