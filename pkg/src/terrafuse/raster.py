"""Georeferenced raster types, coordinate transforms and the on-disk container.

A BandStack is the universal image currency of the pipeline: an ordered set
of named float32 planes sharing one grid and one plate-carree (lon/lat)
affine transform. Rasters are immutable after construction; the backing
numpy arrays are write-protected so concurrent readers are always safe.

On-disk container: one directory holding ``stack.json`` (header) plus one
raw ``<band>.f32`` plane per band, little-endian IEEE-754 float32,
row-major, no header bytes. Round-trips are bit-exact, NaN payloads
included.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateBandName,
    FormatError,
    IoError,
    MissingBand,
)

STACK_FORMAT = "terrafuse-stack"
CLASSMAP_FORMAT = "terrafuse-classmap"
NODATA_LABEL = 255

_BAND_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


@dataclass(frozen=True)
class GeoTransform:
    """North-up affine transform from pixel indices to lon/lat degrees.

    origin_x/origin_y locate the outer corner of pixel (0, 0); pixel_w is
    positive (east), pixel_h negative (south). Rotation terms are fixed at
    zero, so the transform is fully described by four scalars.
    """

    origin_x: float
    origin_y: float
    pixel_w: float
    pixel_h: float

    def __post_init__(self):
        for name in ("origin_x", "origin_y", "pixel_w", "pixel_h"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"GeoTransform.{name} must be finite")
        if not self.pixel_w > 0:
            raise ValueError("pixel_w must be > 0")
        if not self.pixel_h < 0:
            raise ValueError("pixel_h must be < 0 (north-up)")

    def to_dict(self) -> dict:
        return {
            "origin_x": self.origin_x,
            "origin_y": self.origin_y,
            "pixel_w": self.pixel_w,
            "pixel_h": self.pixel_h,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeoTransform":
        return cls(
            float(d["origin_x"]),
            float(d["origin_y"]),
            float(d["pixel_w"]),
            float(d["pixel_h"]),
        )


def geo_to_pixel(t: GeoTransform, lon: float, lat: float) -> tuple[int, int]:
    """Map a lon/lat point to the (col, row) pixel containing it.

    Pure floor arithmetic; indices outside the raster are returned as-is,
    bounds checking is the caller's job.
    """
    col = math.floor((lon - t.origin_x) / t.pixel_w)
    row = math.floor((lat - t.origin_y) / t.pixel_h)
    return int(col), int(row)


def pixel_to_geo(t: GeoTransform, col: int, row: int) -> tuple[float, float]:
    """Return the lon/lat of the center of pixel (col, row)."""
    lon = t.origin_x + (col + 0.5) * t.pixel_w
    lat = t.origin_y + (row + 0.5) * t.pixel_h
    return lon, lat


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Band:
    """One named float32 plane. ``values`` has shape (height, width)."""

    name: str
    values: np.ndarray
    nodata: float = math.nan

    def __post_init__(self):
        if not isinstance(self.name, str) or not _BAND_NAME_RE.match(self.name):
            raise ValueError(f"invalid band name: {self.name!r}")
        v = self.values
        if not isinstance(v, np.ndarray) or v.ndim != 2:
            raise ValueError("band values must be a 2-D array")
        if v.dtype != np.float32:
            raise ValueError("band values must be float32")
        _freeze(v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class BandStack:
    """Ordered bands on a shared grid and transform."""

    transform: GeoTransform
    bands: tuple[Band, ...]

    def __init__(self, transform: GeoTransform, bands):
        bands = tuple(bands)
        if not bands:
            raise ValueError("a BandStack needs at least one band")
        h, w = bands[0].values.shape
        for b in bands:
            if b.values.shape != (h, w):
                raise DimensionMismatch(
                    f"band {b.name!r} is {b.values.shape}, expected {(h, w)}"
                )
        names = [b.name for b in bands]
        if len(set(names)) != len(names):
            raise DuplicateBandName(f"duplicate band names in {names}")
        object.__setattr__(self, "transform", transform)
        object.__setattr__(self, "bands", bands)

    @property
    def width(self) -> int:
        return self.bands[0].width

    @property
    def height(self) -> int:
        return self.bands[0].height

    @property
    def band_names(self) -> tuple[str, ...]:
        return tuple(b.name for b in self.bands)

    def band(self, name: str) -> Band:
        for b in self.bands:
            if b.name == name:
                return b
        raise MissingBand(f"no band {name!r}, stack has {list(self.band_names)}")

    def select(self, names) -> "BandStack":
        """New stack holding the named bands, in the requested order."""
        return BandStack(self.transform, [self.band(n) for n in names])

    def as_array(self) -> np.ndarray:
        """(n_bands, height, width) view-stack of the plane data."""
        return np.stack([b.values for b in self.bands])


@dataclass(frozen=True)
class ClassMap:
    """Per-pixel class labels (uint8) with a legend; 255 is reserved nodata."""

    transform: GeoTransform
    labels: np.ndarray
    legend: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.labels.ndim != 2 or self.labels.dtype != np.uint8:
            raise ValueError("labels must be a 2-D uint8 array")
        present = set(np.unique(self.labels).tolist()) - {NODATA_LABEL}
        missing = present - set(self.legend)
        if missing:
            raise ValueError(f"labels {sorted(missing)} missing from legend")
        if NODATA_LABEL in self.legend:
            raise ValueError(f"class id {NODATA_LABEL} is reserved for nodata")
        _freeze(self.labels)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def stack_concat(a: BandStack, b: BandStack) -> BandStack:
    """Fuse two stacks on the same grid: a's bands followed by b's.

    Plane data is carried over unchanged (same arrays, bit-for-bit).
    """
    if (a.width, a.height) != (b.width, b.height) or a.transform != b.transform:
        raise DimensionMismatch(
            f"stacks disagree: {a.width}x{a.height} {a.transform} vs "
            f"{b.width}x{b.height} {b.transform}"
        )
    overlap = set(a.band_names) & set(b.band_names)
    if overlap:
        raise DuplicateBandName(f"both stacks carry {sorted(overlap)}")
    return BandStack(a.transform, a.bands + b.bands)


def _nodata_to_json(nodata: float):
    return "nan" if math.isnan(nodata) else nodata


def _nodata_from_json(v) -> float:
    if v == "nan":
        return math.nan
    if isinstance(v, (int, float)):
        return float(v)
    raise FormatError(f"bad nodata value {v!r}")


def write_stack(s: BandStack, path) -> None:
    """Write a stack container directory (header + one .f32 plane per band)."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        header = {
            "format": STACK_FORMAT,
            "version": 1,
            "width": s.width,
            "height": s.height,
            "transform": s.transform.to_dict(),
            "bands": [
                {"name": b.name, "dtype": "f32", "nodata": _nodata_to_json(b.nodata)}
                for b in s.bands
            ],
        }
        (path / "stack.json").write_text(json.dumps(header, indent=2) + "\n")
        for b in s.bands:
            plane = np.ascontiguousarray(b.values, dtype="<f4")
            plane.tofile(path / f"{b.name}.f32")
    except OSError as e:
        raise IoError(f"cannot write stack to {path}: {e}") from e


def read_stack(path) -> BandStack:
    """Read a stack container written by write_stack. Bit-exact round-trip."""
    path = Path(path)
    header_path = path / "stack.json"
    try:
        text = header_path.read_text()
    except OSError as e:
        raise IoError(f"cannot read {header_path}: {e}") from e
    try:
        header = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"{header_path}: not valid JSON: {e}") from e
    if not isinstance(header, dict) or header.get("format") != STACK_FORMAT:
        raise FormatError(f"{header_path}: bad magic, expected {STACK_FORMAT!r}")
    try:
        width = int(header["width"])
        height = int(header["height"])
        transform = GeoTransform.from_dict(header["transform"])
        descriptors = header["bands"]
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{header_path}: malformed header: {e}") from e
    if not descriptors:
        raise FormatError(f"{header_path}: header lists no bands")

    expected = width * height * 4
    bands = []
    for d in descriptors:
        name = d.get("name")
        if not isinstance(name, str) or not _BAND_NAME_RE.match(name):
            raise FormatError(f"{header_path}: bad band name {name!r}")
        if d.get("dtype") != "f32":
            raise FormatError(f"{header_path}: unsupported dtype {d.get('dtype')!r}")
        plane_path = path / f"{name}.f32"
        if not plane_path.exists():
            raise FormatError(f"missing plane file {plane_path}")
        size = plane_path.stat().st_size
        if size != expected:
            raise FormatError(
                f"{plane_path}: {size} bytes, header implies {expected}"
            )
        try:
            values = np.fromfile(plane_path, dtype="<f4").reshape(height, width)
        except OSError as e:
            raise IoError(f"cannot read {plane_path}: {e}") from e
        bands.append(Band(name, values, nodata=_nodata_from_json(d.get("nodata"))))
    return BandStack(transform, bands)


def write_classmap(m: ClassMap, path) -> None:
    """Write a class map container: classmap.json header + raw labels.u8."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        header = {
            "format": CLASSMAP_FORMAT,
            "version": 1,
            "width": m.width,
            "height": m.height,
            "transform": m.transform.to_dict(),
            "legend": {str(k): v for k, v in sorted(m.legend.items())},
            "nodata": NODATA_LABEL,
        }
        (path / "classmap.json").write_text(json.dumps(header, indent=2) + "\n")
        np.ascontiguousarray(m.labels, dtype=np.uint8).tofile(path / "labels.u8")
    except OSError as e:
        raise IoError(f"cannot write classmap to {path}: {e}") from e


def read_classmap(path) -> ClassMap:
    path = Path(path)
    header_path = path / "classmap.json"
    try:
        header = json.loads(header_path.read_text())
    except OSError as e:
        raise IoError(f"cannot read {header_path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{header_path}: not valid JSON: {e}") from e
    if not isinstance(header, dict) or header.get("format") != CLASSMAP_FORMAT:
        raise FormatError(f"{header_path}: bad magic, expected {CLASSMAP_FORMAT!r}")
    try:
        width = int(header["width"])
        height = int(header["height"])
        transform = GeoTransform.from_dict(header["transform"])
        legend = {int(k): str(v) for k, v in header["legend"].items()}
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{header_path}: malformed header: {e}") from e
    labels_path = path / "labels.u8"
    if not labels_path.exists():
        raise FormatError(f"missing label plane {labels_path}")
    if labels_path.stat().st_size != width * height:
        raise FormatError(f"{labels_path}: size does not match header")
    labels = np.fromfile(labels_path, dtype=np.uint8).reshape(height, width)
    return ClassMap(transform, labels, legend)
