"""GIST scene descriptor.

Grayscale, resize to 256x256, filter with 4 scales x 8 orientations of
frequency-domain log-Gabor filters, average the response magnitude over a 4x4 grid
and L2-normalise the resulting 512 values.

Value order is ``[scale][orientation][grid row][grid col]``. Orientation k is
tuned to spatial frequencies pointing at angle ``k * pi / 8`` from the x axis,
so orientation 0 responds to intensity varying along x (vertical stripes).
"""

from functools import lru_cache

import numpy as np
from PIL import Image

from ._image import to_gray

SIZE = 256
N_SCALES = 4
N_ORIENT = 8
GRID = 4
PAD = 32
# Peak frequencies in cycles/pixel, one octave apart.
CENTER_FREQS = tuple(0.25 / 2 ** s for s in range(N_SCALES))
RADIAL_SIGMA = np.log(0.55)
ANGULAR_SIGMA = 0.6 * np.pi / N_ORIENT


@lru_cache(maxsize=8)
def gabor_bank(n_rows, n_cols):
    """Transfer functions, shape (scales, orientations, n_rows, n_cols), DC = 0."""
    fy = np.fft.fftfreq(n_rows)[:, None]
    fx = np.fft.fftfreq(n_cols)[None, :]
    radius = np.hypot(fx, fy)
    angle = np.arctan2(fy, fx)
    safe_r = np.where(radius == 0, 1.0, radius)
    bank = np.empty((N_SCALES, N_ORIENT, n_rows, n_cols))
    for s, f0 in enumerate(CENTER_FREQS):
        radial = np.exp(-np.log(safe_r / f0) ** 2 / (2 * RADIAL_SIGMA ** 2))
        radial[radius == 0] = 0.0
        for o in range(N_ORIENT):
            d = np.angle(np.exp(1j * (angle - o * np.pi / N_ORIENT)))
            bank[s, o] = radial * np.exp(-d ** 2 / (2 * ANGULAR_SIGMA ** 2))
    bank.setflags(write=False)
    return bank


def prepare(image, size=SIZE):
    """Grayscale float image resized to ``size`` x ``size``."""
    gray = to_gray(image)
    if gray.shape != (size, size):
        gray = np.asarray(Image.fromarray(gray.astype(np.float32), mode="F")
                          .resize((size, size), Image.BILINEAR), dtype=np.float64)
    return gray


def gabor_energies(gray, pad=PAD):
    """Mean response magnitude per (scale, orientation, grid cell), unnormalised."""
    g = gray - gray.mean()
    if pad:
        g = np.pad(g, pad, mode="symmetric")
    spec = np.fft.fft2(g)
    bank = gabor_bank(*g.shape)
    resp = np.abs(np.fft.ifft2(spec[None, None] * bank))
    if pad:
        resp = resp[..., pad:-pad, pad:-pad]
    h, w = resp.shape[-2:]
    cells = resp.reshape(N_SCALES, N_ORIENT, GRID, h // GRID, GRID, w // GRID)
    return cells.mean(axis=(3, 5))


def gist_descriptor(image, pad=PAD) -> np.ndarray:
    energies = gabor_energies(prepare(image), pad=pad).ravel()
    norm = np.linalg.norm(energies)
    # a constant image has (numerically) zero response; skip normalisation
    if norm < 1e-9 * SIZE:
        return np.zeros_like(energies)
    return energies / norm
