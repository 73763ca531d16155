import numpy as np
from PIL import Image

from ..errors import EmptyImage

LUMA = np.array([0.299, 0.587, 0.114])


def load_image(path):
    """Decode an image file to an (H, W, 3) uint8 RGB array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def as_rgb(image):
    img = np.asarray(image)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    if img.ndim != 3 or img.shape[2] not in (3, 4):
        raise ValueError(f"expected an RGB or grayscale raster, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise EmptyImage("image has no pixels")
    return img[:, :, :3]


def to_gray(image):
    """Luma (0.299, 0.587, 0.114) as float64 in [0, 255]."""
    img = np.asarray(image)
    if img.ndim == 2:
        if img.size == 0:
            raise EmptyImage("image has no pixels")
        return img.astype(np.float64)
    return as_rgb(img).astype(np.float64) @ LUMA
