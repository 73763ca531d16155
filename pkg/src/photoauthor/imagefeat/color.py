"""L*a*b* colour histogram (10 marginal bins per channel, 30 values)."""

import numpy as np

from ._image import as_rgb

N_BINS = 10
# D65 reference white
_WHITE = np.array([0.95047, 1.0, 1.08883])
_RGB_TO_XYZ = np.array([
    [0.412453, 0.357580, 0.180423],
    [0.212671, 0.715160, 0.072169],
    [0.019334, 0.119193, 0.950227],
])


def srgb_to_lab(rgb):
    """Convert 8-bit sRGB to CIE L*a*b* (D65). Returns float64 (..., 3)."""
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(c > 0.04045, ((c + 0.055) / 1.055) ** 2.4, c / 12.92)
    xyz = lin @ _RGB_TO_XYZ.T / _WHITE
    eps = (6 / 29) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3 * (6 / 29) ** 2) + 4 / 29)
    L = 116 * f[..., 1] - 16
    a = 500 * (f[..., 0] - f[..., 1])
    b = 200 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def _bin(values, lo, hi):
    idx = np.floor((values - lo) / (hi - lo) * N_BINS).astype(np.int64)
    return np.clip(idx, 0, N_BINS - 1)


def lab_bin_indices(lab):
    """Per-pixel (L, a, b) bin indices; L over [0, 100], a and b over [-128, 128)."""
    return (_bin(lab[..., 0], 0.0, 100.0),
            _bin(lab[..., 1], -128.0, 128.0),
            _bin(lab[..., 2], -128.0, 128.0))


def lab_histogram(image) -> np.ndarray:
    """30-d colour feature: L, a and b histograms concatenated, summing to 1.

    Each pixel adds 1/(3 * n_pixels) to one bin of each channel.
    """
    rgb = as_rgb(image)
    lab = srgb_to_lab(rgb).reshape(-1, 3)
    n = lab.shape[0]
    hist = np.concatenate([np.bincount(idx, minlength=N_BINS) for idx in lab_bin_indices(lab)])
    return hist.astype(np.float64) / (3.0 * n)
