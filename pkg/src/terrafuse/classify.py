"""Per-pixel classification of a composite stack and portable-image
rendering (binary PPM always, PNG when Pillow is importable)."""

from __future__ import annotations

import numpy as np

from .cart import CartClassifier, predict_batch
from .errors import (
    BandOrderMismatch,
    ConfigError,
    FormatError,
    MissingBand,
    MissingPaletteEntry,
)
from .raster import NODATA_LABEL, BandStack, ClassMap

# class ids: 0 water, 1 urban, 2 non-urban
DEFAULT_PALETTE = {0: (0, 0, 255), 1: (255, 255, 255), 2: (255, 0, 0)}
NODATA_COLOR = (0, 0, 0)


def classify_stack(model: CartClassifier, stack: BandStack) -> ClassMap:
    """Apply a trained classifier to every pixel of a stack.

    The stack's band list must equal the training band list, names and
    order both. Pixels with nodata in any band get the reserved label 255.
    """
    if model.band_names_ is not None:
        if tuple(stack.band_names) != tuple(model.band_names_):
            raise BandOrderMismatch(
                f"model expects bands {list(model.band_names_)}, "
                f"stack has {list(stack.band_names)}"
            )
    elif len(stack.band_names) != model.n_features_in_:
        raise BandOrderMismatch(
            f"model expects {model.n_features_in_} bands, "
            f"stack has {len(stack.band_names)}"
        )
    ids = [int(c) for c in model.classes_]
    if min(ids) < 0 or max(ids) > 254:
        raise ConfigError("class ids must fit 0..254; 255 is reserved for nodata")

    planes = stack.as_array()  # (bands, h, w)
    n_bands, h, w = planes.shape
    flat = planes.reshape(n_bands, h * w).T
    valid = ~np.isnan(flat).any(axis=1)
    labels = np.full(h * w, NODATA_LABEL, dtype=np.uint8)
    if valid.any():
        labels[valid] = predict_batch(model.tree_, flat[valid]).astype(np.uint8)
    legend = model.legend_ or {i: f"class_{i}" for i in ids}
    return ClassMap(stack.transform, labels.reshape(h, w), legend)


def _check_palette(palette, legend) -> None:
    if NODATA_LABEL in palette:
        raise ConfigError("palette must not assign the reserved label 255")
    missing = sorted(set(legend) - set(palette))
    if missing:
        raise MissingPaletteEntry(f"palette lacks entries for class ids {missing}")
    for cid, rgb in palette.items():
        if len(rgb) != 3 or any(not (0 <= int(v) <= 255) for v in rgb):
            raise ConfigError(f"palette entry for class {cid} is not an RGB triple")


def classmap_to_rgb(m: ClassMap, palette=None) -> np.ndarray:
    """(h, w, 3) uint8 recoloring; nodata pixels paint black."""
    palette = DEFAULT_PALETTE if palette is None else palette
    _check_palette(palette, m.legend)
    lut = np.zeros((256, 3), dtype=np.uint8)
    lut[NODATA_LABEL] = NODATA_COLOR
    for cid, rgb in palette.items():
        lut[int(cid)] = rgb
    return lut[m.labels]


def composite_to_rgb(
    stack: BandStack, band_triple, stretch=(2.0, 98.0)
) -> np.ndarray:
    """Percentile-stretched (h, w, 3) uint8 preview of three named bands.

    Per band: values at/below the low percentile map to 0, at/above the
    high to 255, linear between. A constant band maps to 127. Nodata
    pixels paint black in all channels.
    """
    if len(band_triple) != 3:
        raise ConfigError("band_triple must name exactly three bands")
    lo_p, hi_p = stretch
    if not 0.0 <= lo_p < hi_p <= 100.0:
        raise ConfigError("stretch percentiles must satisfy 0 <= lo < hi <= 100")
    h, w = stack.height, stack.width
    out = np.zeros((h, w, 3), dtype=np.uint8)
    nodata = np.zeros((h, w), dtype=bool)
    for ch, name in enumerate(band_triple):
        values = stack.band(name).values  # raises MissingBand
        invalid = np.isnan(values)
        nodata |= invalid
        finite = values[~invalid]
        if finite.size == 0:
            continue
        lo = float(np.percentile(finite, lo_p))
        hi = float(np.percentile(finite, hi_p))
        if lo == hi:
            plane = np.full((h, w), 127, dtype=np.uint8)
        else:
            scaled = (values.astype(np.float64) - lo) / (hi - lo) * 255.0
            with np.errstate(invalid="ignore"):
                plane = np.clip(np.rint(scaled), 0, 255)
            plane = np.nan_to_num(plane, nan=0.0).astype(np.uint8)
        out[:, :, ch] = plane
    out[nodata] = 0
    return out


def encode_ppm(rgb: np.ndarray) -> bytes:
    """Binary PPM (P6, maxval 255)."""
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise FormatError("encode_ppm expects a (h, w, 3) uint8 array")
    h, w = rgb.shape[:2]
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(rgb).tobytes()


def decode_ppm(data: bytes) -> np.ndarray:
    """Inverse of encode_ppm for the exact header layout it writes."""
    if not data.startswith(b"P6"):
        raise FormatError("not a P6 image")
    parts = data.split(b"\n", 3)
    if len(parts) != 4:
        raise FormatError("truncated P6 header")
    try:
        w, h = (int(t) for t in parts[1].split())
        maxval = int(parts[2])
    except ValueError as e:
        raise FormatError(f"bad P6 header: {e}") from e
    if maxval != 255:
        raise FormatError("only maxval 255 is supported")
    body = parts[3]
    if len(body) != w * h * 3:
        raise FormatError(
            f"P6 body holds {len(body)} bytes, header promises {w * h * 3}"
        )
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)


def encode_png(rgb: np.ndarray) -> bytes:
    """PNG bytes via Pillow; raises FormatError if Pillow is unavailable."""
    try:
        from PIL import Image
    except ImportError as e:  # pragma: no cover - Pillow is a normal dependency
        raise FormatError("PNG output needs Pillow installed") from e
    import io

    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise FormatError("encode_png expects a (h, w, 3) uint8 array")
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def render_classmap(m: ClassMap, palette=None, fmt: str = "ppm") -> bytes:
    rgb = classmap_to_rgb(m, palette)
    return _encode(rgb, fmt)


def render_composite(
    stack: BandStack, band_triple, stretch=(2.0, 98.0), fmt: str = "ppm"
) -> bytes:
    rgb = composite_to_rgb(stack, band_triple, stretch)
    return _encode(rgb, fmt)


def _encode(rgb: np.ndarray, fmt: str) -> bytes:
    if fmt == "ppm":
        return encode_ppm(rgb)
    if fmt == "png":
        return encode_png(rgb)
    raise ConfigError(f"unknown image format {fmt!r}, expected ppm or png")
