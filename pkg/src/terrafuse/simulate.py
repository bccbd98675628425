"""Seeded synthetic Sentinel-like scene generator.

Produces a ground-truth class map plus date-tagged optical and SAR image
collections on the same grid, so the full classification experiment is
reproducible at desk scale. Everything is a pure function of the scene
config: per-date draws come from streams keyed on (seed, purpose, date
index), so results are independent of generation order.

Radiometric model:
  optical  per-pixel reflectance = class mean + Gaussian noise, with smooth
           cloud fields overwriting pixels with a bright constant;
  SAR      linear power = class power * Gamma(L, 1/L) multiplicative
           speckle (mean 1, variance 1/L), stored in dB, plus a
           deterministic viewing-angle column ramp.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConfigError, FormatError, IoError
from .raster import Band, BandStack, ClassMap, GeoTransform, read_stack, write_stack

OPTICAL = "optical"
SAR = "sar"
OPTICAL_BAND_NAMES = ("B2", "B3", "B4", "B5", "B6", "B7")
SAR_RAW_BAND_NAMES = ("VV", "VH", "angle")
CLOUD_REFLECTANCE = 0.75
COLLECTION_FORMAT = "terrafuse-collection"

# stream tags for per-purpose RNG derivation
_TRUTH, _OPTICAL_NOISE, _SPECKLE, _CLOUDS = 0, 1, 2, 3


@dataclass(frozen=True)
class ClassSpec:
    """Radiometric description of one land-cover class."""

    class_id: int
    name: str
    fraction: float
    optical_mean: tuple[float, ...]
    optical_sd: tuple[float, ...]
    sar_mean_db: tuple[float, float]

    def __post_init__(self):
        if not 0 <= self.class_id <= 254:
            raise ConfigError(f"class_id {self.class_id} outside 0..254")
        if len(self.optical_mean) != len(OPTICAL_BAND_NAMES):
            raise ConfigError(f"{self.name}: optical_mean needs 6 entries")
        if len(self.optical_sd) != len(OPTICAL_BAND_NAMES):
            raise ConfigError(f"{self.name}: optical_sd needs 6 entries")
        if any(sd < 0 for sd in self.optical_sd):
            raise ConfigError(f"{self.name}: optical_sd must be >= 0")
        if len(self.sar_mean_db) != 2:
            raise ConfigError(f"{self.name}: sar_mean_db needs (VV, VH)")
        if not 0 <= self.fraction <= 1:
            raise ConfigError(f"{self.name}: fraction outside [0, 1]")


@dataclass(frozen=True)
class SceneConfig:
    seed: int
    width: int
    height: int
    classes: tuple[ClassSpec, ...]
    n_dates: int
    cloud_fraction_range: tuple[float, float]
    looks: float
    angle_range: tuple[float, float]
    date_range: tuple[datetime.date, datetime.date]
    transform: GeoTransform

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError("scene dimensions must be positive")
        if self.n_dates < 1:
            raise ConfigError("n_dates must be >= 1")
        if self.looks < 1:
            raise ConfigError("looks must be >= 1")
        lo, hi = self.cloud_fraction_range
        if not (0 <= lo <= hi <= 1):
            raise ConfigError("cloud_fraction_range must be within [0, 1]")
        if self.date_range[0] >= self.date_range[1]:
            raise ConfigError("date_range start must precede end")
        if not self.classes:
            raise ConfigError("at least one class is required")
        ids = [c.class_id for c in self.classes]
        if len(set(ids)) != len(ids):
            raise ConfigError("class ids must be unique")
        _check_fractions(self.classes)

    @property
    def legend(self) -> dict[int, str]:
        return {c.class_id: c.name for c in self.classes}

    def dates(self) -> list[datetime.date]:
        """n_dates acquisition days, evenly spaced over [start, end)."""
        start, end = self.date_range
        span = (end - start).days
        return [
            start + datetime.timedelta(days=(i * span) // self.n_dates)
            for i in range(self.n_dates)
        ]


def _check_fractions(classes) -> None:
    total = sum(c.fraction for c in classes)
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"class fractions sum to {total}, expected 1")


@dataclass(frozen=True)
class CollectionItem:
    date: datetime.date
    sensor: str
    stack: BandStack
    cloud_fraction: float | None = None


class ImageCollection:
    """Date-ordered sequence of stacks sharing one grid."""

    def __init__(self, items):
        items = tuple(items)
        for prev, cur in zip(items, items[1:]):
            if cur.date < prev.date:
                raise ValueError("collection items must be sorted by date")
        if items:
            first = items[0].stack
            for it in items:
                s = it.stack
                if (s.width, s.height) != (first.width, first.height) or (
                    s.transform != first.transform
                ):
                    raise ValueError("collection stacks must share geometry")
        self.items = items

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i) -> CollectionItem:
        return self.items[i]


def _rng(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tag, index)))


def _smooth_field(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    # white noise, box-blurred with radius width/16 for spatial coherence
    radius = max(1, width // 16)
    field = rng.standard_normal((height, width))
    return ndimage.uniform_filter(field, size=2 * radius + 1, mode="reflect")


def generate_truth(cfg: SceneConfig) -> ClassMap:
    """Spatially coherent class map with areas matching the target fractions.

    A smoothed Gaussian field is thresholded at the cumulative-fraction
    quantiles, so label counts track the targets up to quantile ties.
    Deterministic for a fixed seed.
    """
    _check_fractions(cfg.classes)
    field = _smooth_field(_rng(cfg.seed, _TRUTH), cfg.height, cfg.width)
    fractions = [c.fraction for c in cfg.classes]
    cuts = np.quantile(field, np.cumsum(fractions[:-1])) if len(fractions) > 1 else []
    rank = np.searchsorted(cuts, field, side="left")
    ids = np.array([c.class_id for c in cfg.classes], dtype=np.uint8)
    labels = ids[rank]
    present = set(np.unique(labels).tolist())
    absent = [c.name for c in cfg.classes if c.class_id not in present]
    if absent:
        raise ConfigError(
            f"classes {absent} received no pixels; fractions too small "
            f"for a {cfg.width}x{cfg.height} grid"
        )
    return ClassMap(cfg.transform, labels, legend=cfg.legend)


def _class_lut(cfg: SceneConfig, attr: str) -> np.ndarray:
    """(max_id+1, n) lookup table indexed by class id."""
    table = np.zeros((max(c.class_id for c in cfg.classes) + 1,
                      len(getattr(cfg.classes[0], attr))))
    for c in cfg.classes:
        table[c.class_id] = getattr(c, attr)
    return table


def _check_geometry(truth: ClassMap, cfg: SceneConfig) -> None:
    if (truth.width, truth.height) != (cfg.width, cfg.height):
        raise ConfigError(
            f"truth grid {truth.width}x{truth.height} does not match "
            f"scene config {cfg.width}x{cfg.height}"
        )


def _cloud_mask(rng: np.random.Generator, cfg: SceneConfig) -> np.ndarray:
    """Smooth random mask whose coverage is drawn from cloud_fraction_range."""
    lo, hi = cfg.cloud_fraction_range
    target = rng.uniform(lo, hi)
    field = _smooth_field(rng, cfg.height, cfg.width)
    if target <= 0:
        return np.zeros((cfg.height, cfg.width), dtype=bool)
    if target >= 1:
        return np.ones((cfg.height, cfg.width), dtype=bool)
    return field <= np.quantile(field, target)


def generate_optical_series(truth: ClassMap, cfg: SceneConfig) -> ImageCollection:
    """Per-date 6-band optical stacks with Gaussian class noise and clouds.

    Clouded pixels are overwritten with a bright constant reflectance; each
    item's cloud_fraction metadata is the recounted masked fraction.
    """
    _check_geometry(truth, cfg)
    means = _class_lut(cfg, "optical_mean")[truth.labels]  # (H, W, 6)
    sds = _class_lut(cfg, "optical_sd")[truth.labels]
    items = []
    for i, date in enumerate(cfg.dates()):
        noise = _rng(cfg.seed, _OPTICAL_NOISE, i).standard_normal(means.shape)
        values = means + noise * sds
        mask = _cloud_mask(_rng(cfg.seed, _CLOUDS, i), cfg)
        values[mask] = CLOUD_REFLECTANCE
        bands = [
            Band(name, np.ascontiguousarray(values[:, :, k], dtype=np.float32))
            for k, name in enumerate(OPTICAL_BAND_NAMES)
        ]
        items.append(
            CollectionItem(
                date=date,
                sensor=OPTICAL,
                stack=BandStack(cfg.transform, bands),
                cloud_fraction=float(mask.sum()) / mask.size,
            )
        )
    return ImageCollection(items)


def viewing_angle_plane(cfg: SceneConfig) -> np.ndarray:
    """Deterministic incidence-angle ramp across columns, in degrees."""
    lo, hi = cfg.angle_range
    if cfg.width == 1:
        ramp = np.array([lo], dtype=np.float32)
    else:
        ramp = (lo + (hi - lo) * np.arange(cfg.width) / (cfg.width - 1)).astype(
            np.float32
        )
    return np.ascontiguousarray(np.broadcast_to(ramp, (cfg.height, cfg.width)))


def generate_sar_series(truth: ClassMap, cfg: SceneConfig) -> ImageCollection:
    """Per-date VV/VH/angle stacks with multiplicative Gamma speckle.

    Backscatter is drawn in linear power (class power times Gamma(L, 1/L),
    mean 1) and stored in dB; the angle band is the same ramp on all dates.
    """
    _check_geometry(truth, cfg)
    power = np.power(10.0, _class_lut(cfg, "sar_mean_db") / 10.0)[truth.labels]
    angle = viewing_angle_plane(cfg)
    items = []
    for i, date in enumerate(cfg.dates()):
        rng = _rng(cfg.seed, _SPECKLE, i)
        speckle = rng.gamma(shape=cfg.looks, scale=1.0 / cfg.looks, size=power.shape)
        db = 10.0 * np.log10(power * speckle)
        bands = [
            Band("VV", np.ascontiguousarray(db[:, :, 0], dtype=np.float32)),
            Band("VH", np.ascontiguousarray(db[:, :, 1], dtype=np.float32)),
            Band("angle", angle),
        ]
        items.append(
            CollectionItem(date=date, sensor=SAR, stack=BandStack(cfg.transform, bands))
        )
    return ImageCollection(items)


def write_collection(c: ImageCollection, path) -> None:
    """Write a collection directory: collection.json index + stack containers."""
    path = Path(path)
    index = []
    seen: dict[str, int] = {}
    try:
        path.mkdir(parents=True, exist_ok=True)
        for item in c:
            stem = f"{item.sensor}_{item.date.isoformat()}"
            if stem in seen:
                seen[stem] += 1
                stem = f"{stem}_{seen[stem]}"
            else:
                seen[stem] = 0
            rel = f"stacks/{stem}"
            write_stack(item.stack, path / rel)
            entry = {"date": item.date.isoformat(), "sensor": item.sensor, "path": rel}
            if item.cloud_fraction is not None:
                entry["cloud_fraction"] = item.cloud_fraction
            index.append(entry)
        doc = {"format": COLLECTION_FORMAT, "version": 1, "items": index}
        (path / "collection.json").write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as e:
        raise IoError(f"cannot write collection to {path}: {e}") from e


def read_collection(path) -> ImageCollection:
    path = Path(path)
    index_path = path / "collection.json"
    try:
        doc = json.loads(index_path.read_text())
    except OSError as e:
        raise IoError(f"cannot read {index_path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{index_path}: not valid JSON: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != COLLECTION_FORMAT:
        raise FormatError(f"{index_path}: bad magic, expected {COLLECTION_FORMAT!r}")
    items = []
    for entry in doc.get("items", []):
        try:
            date = datetime.date.fromisoformat(entry["date"])
            sensor = entry["sensor"]
            rel = entry["path"]
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"{index_path}: malformed item: {e}") from e
        cloud = entry.get("cloud_fraction")
        items.append(
            CollectionItem(
                date=date,
                sensor=sensor,
                stack=read_stack(path / rel),
                cloud_fraction=None if cloud is None else float(cloud),
            )
        )
    return ImageCollection(items)
