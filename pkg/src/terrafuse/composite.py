"""Temporal filtering and per-pixel mean reduction of image collections.

The reducer averages each pixel over dates, ignoring nodata, which is the
standard way to beat down speckle and transient cover: over a homogeneous
region the variance of an N-date mean shrinks like 1/N. Items are summed
in date order after a stable sort, so the result is bit-reproducible and
invariant to the incoming collection order.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch, EmptyCollection, EmptyResult, MissingBand
from .raster import Band, BandStack, stack_concat
from .simulate import (
    OPTICAL,
    OPTICAL_BAND_NAMES,
    SAR,
    ImageCollection,
)

SAR_COMPOSITE_BAND_NAMES = ("VV", "VH", "angle", "ratio")


@dataclass(frozen=True)
class FilterSpec:
    """Date window [start, end), sensor kind and optical cloud ceiling."""

    date_start: datetime.date
    date_end: datetime.date
    sensor: str
    max_cloud_fraction: float = 1.0

    def __post_init__(self):
        if self.date_start >= self.date_end:
            raise ConfigError("filter date_start must precede date_end")
        if not 0 <= self.max_cloud_fraction <= 1:
            raise ConfigError("max_cloud_fraction must be within [0, 1]")
        if self.sensor not in (OPTICAL, SAR):
            raise ConfigError(f"unknown sensor {self.sensor!r}")


def filter_collection(c: ImageCollection, f: FilterSpec) -> ImageCollection:
    """Keep items matching the sensor, date window and cloud ceiling.

    Order is preserved. Raises EmptyResult when nothing survives, since a
    downstream mean would be undefined.
    """
    kept = []
    for item in c:
        if item.sensor != f.sensor:
            continue
        if not (f.date_start <= item.date < f.date_end):
            continue
        if item.sensor == OPTICAL and item.cloud_fraction is not None:
            if item.cloud_fraction > f.max_cloud_fraction:
                continue
        kept.append(item)
    if not kept:
        raise EmptyResult(
            f"no {f.sensor} items within {f.date_start}..{f.date_end} "
            f"at cloud fraction <= {f.max_cloud_fraction}"
        )
    return ImageCollection(kept)


def reduce_mean(c: ImageCollection, band_names) -> BandStack:
    """Per-pixel arithmetic mean over dates for each named band.

    Nodata (NaN) samples are ignored; a pixel with no valid date at all
    comes out as NaN. Accumulation runs in float64 in date order (stable
    sort by date), then the means are stored as float32 planes.
    """
    band_names = tuple(band_names)
    if len(c) == 0:
        raise EmptyCollection("cannot reduce an empty collection")
    for item in c:
        missing = set(band_names) - set(item.stack.band_names)
        if missing:
            raise MissingBand(
                f"item {item.date.isoformat()} lacks bands {sorted(missing)}"
            )
    items = sorted(c, key=lambda it: it.date)
    first = items[0].stack
    shape = (first.height, first.width)
    out_bands = []
    for name in band_names:
        acc = np.zeros(shape, dtype=np.float64)
        count = np.zeros(shape, dtype=np.int64)
        for item in items:
            values = item.stack.band(name).values
            valid = ~np.isnan(values)
            acc[valid] += values[valid]
            count += valid
        with np.errstate(invalid="ignore"):
            mean = np.where(count > 0, acc / np.maximum(count, 1), np.nan)
        out_bands.append(Band(name, mean.astype(np.float32)))
    return BandStack(first.transform, out_bands)


def build_optical_composite(c: ImageCollection) -> BandStack:
    """Mean-reduce a filtered optical collection to the 6 B2..B7 bands."""
    stack = reduce_mean(c, OPTICAL_BAND_NAMES)
    assert stack.band_names == OPTICAL_BAND_NAMES
    return stack


def build_sar_composite(c: ImageCollection) -> BandStack:
    """Mean-reduce a filtered SAR collection to [VV, VH, angle, ratio].

    The fourth band is the VH - VV dB difference, computed after the
    temporal reduction.
    """
    reduced = reduce_mean(c, ("VV", "VH", "angle"))
    vv = reduced.band("VV").values
    vh = reduced.band("VH").values
    ratio = Band("ratio", (vh - vv).astype(np.float32))
    stack = BandStack(reduced.transform, list(reduced.bands) + [ratio])
    assert stack.band_names == SAR_COMPOSITE_BAND_NAMES
    return stack


def build_fused_composite(opt: BandStack, sar: BandStack) -> BandStack:
    """Optical bands followed by SAR bands, one 10-band stack."""
    if (opt.width, opt.height) != (sar.width, sar.height) or (
        opt.transform != sar.transform
    ):
        raise DimensionMismatch(
            f"optical {opt.width}x{opt.height} vs sar {sar.width}x{sar.height}"
        )
    return stack_concat(opt, sar)
