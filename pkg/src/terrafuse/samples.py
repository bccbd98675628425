"""Labeled point collections and feature-vector extraction.

Pins live as a GeoJSON FeatureCollection of Point features (RFC 7946
subset) with an integer "class" property and an optional "label" note;
the class legend travels as a top-level "legend" foreign member. This is
the wire format shared with the labeling UI.

Extraction is nearest-pixel on purpose: pins are categorical observations
and interpolation would blend classes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AllSamplesDropped, InsufficientPixels, ParseError
from .raster import BandStack, ClassMap, geo_to_pixel, pixel_to_geo


@dataclass(frozen=True)
class SamplePoint:
    lon: float
    lat: float
    class_id: int
    note: str | None = None

    def __post_init__(self):
        if not (math.isfinite(self.lon) and math.isfinite(self.lat)):
            raise ValueError("sample coordinates must be finite")


@dataclass(frozen=True)
class SampleSet:
    """Class-tagged pins plus the id -> name legend."""

    features: tuple[SamplePoint, ...]
    legend: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        missing = {p.class_id for p in self.features} - set(self.legend)
        if missing:
            raise ValueError(f"class ids {sorted(missing)} missing from legend")

    def __len__(self) -> int:
        return len(self.features)

    def class_counts(self) -> dict[int, int]:
        counts = {cid: 0 for cid in self.legend}
        for p in self.features:
            counts[p.class_id] += 1
        return counts


@dataclass(frozen=True)
class LabeledVectors:
    """Per-pin feature rows: x[i] holds one float per band, in band order."""

    x: np.ndarray
    y: np.ndarray
    band_names: tuple[str, ...]
    n_dropped: int = 0
    legend: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.x.ndim != 2 or self.x.shape[1] != len(self.band_names):
            raise ValueError("x must be (n, n_bands)")
        if self.y.shape != (self.x.shape[0],):
            raise ValueError("y must be (n,)")
        if self.x.size and np.isnan(self.x).any():
            raise ValueError("feature rows must not contain NaN")

    def __len__(self) -> int:
        return len(self.y)


def parse_samples(text: str) -> SampleSet:
    """Parse a GeoJSON FeatureCollection of class-tagged Point features."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"not valid JSON: {e}") from e
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParseError("document is not a GeoJSON FeatureCollection")
    raw_features = doc.get("features")
    if not isinstance(raw_features, list):
        raise ParseError("FeatureCollection lacks a features list")

    points = []
    for i, feat in enumerate(raw_features):
        if not isinstance(feat, dict) or feat.get("type") != "Feature":
            raise ParseError(f"features[{i}] is not a Feature")
        geom = feat.get("geometry")
        if not isinstance(geom, dict) or geom.get("type") != "Point":
            kind = geom.get("type") if isinstance(geom, dict) else geom
            raise ParseError(f"features[{i}]: unsupported geometry {kind!r}")
        coords = geom.get("coordinates")
        if (
            not isinstance(coords, list)
            or len(coords) < 2
            or not all(isinstance(c, (int, float)) for c in coords[:2])
        ):
            raise ParseError(f"features[{i}]: malformed Point coordinates")
        props = feat.get("properties") or {}
        cls = props.get("class")
        if not isinstance(cls, int) or isinstance(cls, bool):
            raise ParseError(f"features[{i}]: missing integer 'class' property")
        note = props.get("label")
        if note is not None and not isinstance(note, str):
            raise ParseError(f"features[{i}]: 'label' must be a string")
        points.append(
            SamplePoint(float(coords[0]), float(coords[1]), cls, note=note)
        )

    legend_raw = doc.get("legend")
    if legend_raw is not None:
        if not isinstance(legend_raw, dict):
            raise ParseError("'legend' must map class ids to names")
        try:
            legend = {int(k): str(v) for k, v in legend_raw.items()}
        except ValueError as e:
            raise ParseError(f"bad legend key: {e}") from e
    else:
        legend = {}
    for cid in sorted({p.class_id for p in points}):
        legend.setdefault(cid, f"class_{cid}")
    return SampleSet(tuple(points), legend)


def serialize_samples(s: SampleSet) -> str:
    """Serialize to the GeoJSON wire format; parse(serialize(s)) == s."""
    features = []
    for p in s.features:
        props: dict = {"class": p.class_id}
        if p.note is not None:
            props["label"] = p.note
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [p.lon, p.lat]},
                "properties": props,
            }
        )
    doc = {
        "type": "FeatureCollection",
        "legend": {str(k): v for k, v in sorted(s.legend.items())},
        "features": features,
    }
    return json.dumps(doc, indent=2) + "\n"


def extract_features(s: SampleSet, stack: BandStack) -> LabeledVectors:
    """Sample the stack at each pin's nearest pixel.

    Pins outside the raster, or hitting nodata in any band, are dropped
    and counted; surviving rows keep the input order.
    """
    planes = stack.as_array()  # (n_bands, H, W)
    rows, labels, dropped = [], [], 0
    for p in s.features:
        col, row = geo_to_pixel(stack.transform, p.lon, p.lat)
        if not (0 <= col < stack.width and 0 <= row < stack.height):
            dropped += 1
            continue
        x = planes[:, row, col].astype(np.float64)
        if np.isnan(x).any():
            dropped += 1
            continue
        rows.append(x)
        labels.append(p.class_id)
    if not rows and dropped:
        raise AllSamplesDropped(f"all {dropped} pins were outside or nodata")
    x = np.array(rows, dtype=np.float64).reshape(len(rows), len(stack.bands))
    y = np.array(labels, dtype=np.int64)
    return LabeledVectors(
        x, y, stack.band_names, n_dropped=dropped, legend=dict(s.legend)
    )


def auto_sample(
    truth: ClassMap,
    counts: dict[int, int],
    seed: int,
    min_spacing: float = 0.0,
    avoid: SampleSet | None = None,
) -> SampleSet:
    """Draw class-pure pins from the truth map, the desk-scale stand-in for
    manual pin placement.

    Pins land on pixel centers of the requested class, pairwise at least
    min_spacing pixels apart (Euclidean, also against `avoid` pins, which
    keeps validation draws disjoint from training draws). Deterministic
    greedy draw per seed; InsufficientPixels if a class cannot reach its
    count at the requested spacing.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(4,)))
    spacing_sq = float(min_spacing) ** 2
    cell = max(1.0, float(min_spacing))

    occupied: dict[tuple[int, int], list[tuple[float, float]]] = {}

    def blocked(col: float, row: float) -> bool:
        if spacing_sq == 0:
            return False
        ci, ri = int(col // cell), int(row // cell)
        for dc in (-1, 0, 1):
            for dr in (-1, 0, 1):
                for oc, orow in occupied.get((ci + dc, ri + dr), ()):
                    if (oc - col) ** 2 + (orow - row) ** 2 < spacing_sq:
                        return True
        return False

    def occupy(col: float, row: float) -> None:
        occupied.setdefault((int(col // cell), int(row // cell)), []).append(
            (col, row)
        )

    if avoid is not None:
        for p in avoid.features:
            col, row = geo_to_pixel(truth.transform, p.lon, p.lat)
            occupy(float(col), float(row))

    pins = []
    for cid in sorted(counts):
        want = counts[cid]
        if want == 0:
            continue
        if cid not in truth.legend:
            raise InsufficientPixels(f"class {cid} absent from truth legend")
        candidates = np.flatnonzero(truth.labels.ravel() == cid)
        rng.shuffle(candidates)
        taken = 0
        for flat in candidates:
            row, col = divmod(int(flat), truth.width)
            if blocked(float(col), float(row)):
                continue
            occupy(float(col), float(row))
            lon, lat = pixel_to_geo(truth.transform, col, row)
            pins.append(SamplePoint(lon, lat, cid, note=None))
            taken += 1
            if taken == want:
                break
        if taken < want:
            raise InsufficientPixels(
                f"class {cid}: placed {taken} of {want} pins at spacing "
                f">= {min_spacing}"
            )
    return SampleSet(tuple(pins), legend=dict(truth.legend))
