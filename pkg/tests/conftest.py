"""Shared fixtures: a seeded photo-like corpus and its JPEG re-encodings."""
import io

import numpy as np
import pytest
from PIL import Image
from scipy.ndimage import gaussian_filter

from rbqe.imagecore import Plane

CORPUS_SIZE = 256
CORPUS_SEEDS = tuple(range(10))
QF_LADDER = tuple(range(10, 100, 10))


def synth_image(seed: int, size: int = CORPUS_SIZE) -> Plane:
    """Photo-like scene: smooth grainy background, textured objects, hard edges.

    The mix matters: the smooth background must carry faint grain (about one
    or two 8-bit levels) so high-QF encodings keep it lively while low-QF
    encodings flatten it into blocks.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    theta = rng.uniform(0, np.pi)
    ramp = (np.cos(theta) * xx + np.sin(theta) * yy) / size
    img = 0.30 + 0.35 * rng.uniform(0.3, 1.0) * (ramp - ramp.min())
    blob = gaussian_filter(rng.standard_normal((size, size)), size / 6)
    img += 0.10 * blob / (np.abs(blob).max() + 1e-12)
    tex = gaussian_filter(rng.standard_normal((size, size)), 1.2)
    tex = 0.22 * tex / (tex.std() + 1e-12)
    mask = np.zeros((size, size))
    for _ in range(int(rng.integers(3, 6))):
        cy, cx = rng.uniform(0.1, 0.9, 2) * size
        r = rng.uniform(0.08, 0.22) * size
        mask = np.maximum(mask, ((yy - cy) ** 2 + (xx - cx) ** 2 < r * r).astype(float))
    img += mask * tex + mask * rng.uniform(-0.15, 0.15)
    img += 0.006 * rng.standard_normal((size, size))
    return Plane(np.clip(img, 0.01, 0.99))


def jpeg_roundtrip(plane: Plane, qf: int) -> Plane:
    """Encode to JPEG at the given quality factor and decode back."""
    u8 = np.floor(plane.samples * 255 + 0.5).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(u8, "L").save(buf, format="JPEG", quality=qf)
    buf.seek(0)
    return Plane(np.asarray(Image.open(buf).convert("L"), dtype=np.float64) / 255.0)


@pytest.fixture(scope="session")
def corpus():
    """Ten raw planes, seeds 0..9."""
    return [synth_image(seed) for seed in CORPUS_SEEDS]


@pytest.fixture(scope="session")
def jpeg_ladder(corpus):
    """dict (image index, qf) -> decoded compressed plane over the full ladder."""
    return {
        (idx, qf): jpeg_roundtrip(raw, qf)
        for idx, raw in enumerate(corpus)
        for qf in QF_LADDER
    }
