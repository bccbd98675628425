import numpy as np
import pytest

from terrafuse.raster import Band, BandStack, GeoTransform

SMALL_SCENE = {
    "scene": {
        "width": 96,
        "height": 96,
        "n_dates": 4,
    },
    "samples": {
        "train_counts": {"0": 10, "1": 10, "2": 10},
        "validation_counts": {"0": 12, "1": 12, "2": 12},
        "min_spacing": 2.0,
    },
}


@pytest.fixture
def transform() -> GeoTransform:
    return GeoTransform(-94.925, 29.389, 0.0001, -0.0001)


@pytest.fixture
def small_run():
    from terrafuse.config import parse_config

    return parse_config(SMALL_SCENE)


def make_stack(transform, arrays: dict[str, np.ndarray]) -> BandStack:
    return BandStack(
        transform,
        [Band(name, np.asarray(a, dtype=np.float32)) for name, a in arrays.items()],
    )
