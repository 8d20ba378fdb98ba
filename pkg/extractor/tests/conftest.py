"""Synthetic sample images shared by the extractor tests."""

import numpy as np
import pytest
from PIL import Image

# (name, (width, height)): all multiples of the patch size so the processed
# image equals the input and geometric expectations are exact
SAMPLE_SIZES = [
    ("s224", (224, 224)),
    ("s256", (256, 256)),
    ("s320", (320, 320)),
    ("wide", (640, 480)),
    ("tall", (224, 320)),
]


def block_image(rng, width, height):
    """Piecewise-constant color blocks plus light noise."""
    img = np.zeros((height, width, 3))
    for _ in range(6):
        r0 = int(rng.integers(0, height // 2))
        c0 = int(rng.integers(0, width // 2))
        img[r0 : r0 + height // 3, c0 : c0 + width // 3] = rng.random(3)
    img += 0.1 * rng.random((height, width, 3))
    return (np.clip(img, 0, 1) * 255).astype(np.uint8)


@pytest.fixture(scope="session")
def sample_image_dir(tmp_path_factory):
    rng = np.random.default_rng(42)
    image_dir = tmp_path_factory.mktemp("images")
    for name, (width, height) in SAMPLE_SIZES:
        Image.fromarray(block_image(rng, width, height)).save(image_dir / f"{name}.png")
    return image_dir
