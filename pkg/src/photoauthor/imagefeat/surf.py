"""SURF interest points and 64-d descriptors on integral images.

Detection uses box-filter approximations of the Hessian (9x9, 15x15, ...)
evaluated through an integral image, 3x3x3 non-maximum suppression within each
octave and quadratic sub-pixel/sub-scale refinement. Each keypoint gets a
dominant orientation from Haar responses in a 6s disc; the descriptor sums
(dx, |dx|, dy, |dy|) of rotated Haar responses over a 4x4 grid of 5x5 samples
in a 20s window.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ImageTooSmall
from ._image import to_gray

MIN_SIZE = 32
DEFAULT_THRESHOLD = 5e-4
N_INTERVALS = 4
MAX_OCTAVES = 4


@dataclass
class DescriptorSet:
    photo_id: str
    descriptors: np.ndarray  # (n, 64), rows unit length
    x: np.ndarray
    y: np.ndarray
    scale: np.ndarray
    orientation: np.ndarray
    response: np.ndarray

    def __len__(self):
        return self.descriptors.shape[0]

    @classmethod
    def empty(cls, photo_id="", dim=64):
        z = np.zeros(0)
        return cls(photo_id, np.zeros((0, dim)), z, z, z, z, z)


def integral_image(img):
    ii = np.zeros((img.shape[0] + 1, img.shape[1] + 1))
    ii[1:, 1:] = img.cumsum(0).cumsum(1)
    return ii


def box_sum(ii, row, col, rows, cols):
    """Sum over img[row:row+rows, col:col+cols], clipped to the image. Vectorised."""
    h, w = ii.shape[0] - 1, ii.shape[1] - 1
    r0 = np.clip(row, 0, h)
    c0 = np.clip(col, 0, w)
    r1 = np.clip(row + rows, 0, h)
    c1 = np.clip(col + cols, 0, w)
    return ii[r1, c1] - ii[r0, c1] - ii[r1, c0] + ii[r0, c0]


def filter_sizes(octave):
    return [3 * ((2 ** (octave + 1)) * (i + 1) + 1) for i in range(N_INTERVALS)]


def hessian_layer(ii, size, step):
    """Normalised det(H) and Laplacian sign on the grid (rows, cols) sampled every ``step``."""
    h, w = ii.shape[0] - 1, ii.shape[1] - 1
    r = np.arange(0, h, step)[:, None]
    c = np.arange(0, w, step)[None, :]
    lobe = size // 3
    b = (size - 1) // 2
    inv_area = 1.0 / (size * size)
    dxx = (box_sum(ii, r - lobe + 1, c - b, 2 * lobe - 1, size)
           - 3 * box_sum(ii, r - lobe + 1, c - lobe // 2, 2 * lobe - 1, lobe))
    dyy = (box_sum(ii, r - b, c - lobe + 1, size, 2 * lobe - 1)
           - 3 * box_sum(ii, r - lobe // 2, c - lobe + 1, lobe, 2 * lobe - 1))
    dxy = (box_sum(ii, r - lobe, c + 1, lobe, lobe)
           + box_sum(ii, r + 1, c - lobe, lobe, lobe)
           - box_sum(ii, r - lobe, c - lobe, lobe, lobe)
           - box_sum(ii, r + 1, c + 1, lobe, lobe))
    dxx *= inv_area
    dyy *= inv_area
    dxy *= inv_area
    return dxx * dyy - 0.81 * dxy * dxy, (dxx + dyy) >= 0


def _detect(ii, threshold):
    h, w = ii.shape[0] - 1, ii.shape[1] - 1
    pts = []
    for octave in range(MAX_OCTAVES):
        sizes = filter_sizes(octave)
        if sizes[-1] > min(h, w):
            break
        step = 2 ** octave
        stack = np.stack([hessian_layer(ii, s, step)[0] for s in sizes])
        rows = np.arange(0, h, step)
        cols = np.arange(0, w, step)
        for mid in range(1, N_INTERVALS - 1):
            border = (sizes[mid + 1] - 1) // 2 + 1
            rmask = (rows >= border) & (rows < h - border)
            cmask = (cols >= border) & (cols < w - border)
            ri = np.nonzero(rmask)[0]
            ci = np.nonzero(cmask)[0]
            if ri.size == 0 or ci.size == 0:
                continue
            ri = ri[(ri > 0) & (ri < len(rows) - 1)]
            ci = ci[(ci > 0) & (ci < len(cols) - 1)]
            if ri.size == 0 or ci.size == 0:
                continue
            center = stack[mid][np.ix_(ri, ci)]
            cand = center > threshold
            for dl in (-1, 0, 1):
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        if dl == dr == dc == 0:
                            continue
                        cand &= center > stack[mid + dl][np.ix_(ri + dr, ci + dc)]
            for a, bb in zip(*np.nonzero(cand)):
                i, j = ri[a], ci[bb]
                refined = _refine(stack, mid, i, j)
                if refined is None:
                    continue
                di, dj, dl = refined
                fstep = sizes[1] - sizes[0]
                size = sizes[mid] + dl * fstep
                pts.append(((cols[j] + dj * step), (rows[i] + di * step),
                            1.2 * size / 9.0, stack[mid, i, j]))
    return pts


def _refine(stack, l, i, j):
    """Quadratic fit around a discrete maximum; offset in (row, col, layer) units."""
    v = stack[l, i, j]
    d = lambda dl, di, dj: stack[l + dl, i + di, j + dj]
    g = np.array([(d(0, 1, 0) - d(0, -1, 0)) / 2,
                  (d(0, 0, 1) - d(0, 0, -1)) / 2,
                  (d(1, 0, 0) - d(-1, 0, 0)) / 2])
    hrr = d(0, 1, 0) + d(0, -1, 0) - 2 * v
    hcc = d(0, 0, 1) + d(0, 0, -1) - 2 * v
    hll = d(1, 0, 0) + d(-1, 0, 0) - 2 * v
    hrc = (d(0, 1, 1) - d(0, 1, -1) - d(0, -1, 1) + d(0, -1, -1)) / 4
    hrl = (d(1, 1, 0) - d(1, -1, 0) - d(-1, 1, 0) + d(-1, -1, 0)) / 4
    hcl = (d(1, 0, 1) - d(1, 0, -1) - d(-1, 0, 1) + d(-1, 0, -1)) / 4
    H = np.array([[hrr, hrc, hrl], [hrc, hcc, hcl], [hrl, hcl, hll]])
    try:
        off = -np.linalg.solve(H, g)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.abs(off) >= 0.5) or not np.all(np.isfinite(off)):
        # fall back to the lattice point rather than dropping strong maxima
        return 0.0, 0.0, 0.0
    return off[0], off[1], off[2]


def _haar(ii, x, y, size):
    """Haar x/y responses of side ``size`` centred at (x, y); arrays broadcast."""
    half = size // 2
    dx = (box_sum(ii, y - half, x, size, half) - box_sum(ii, y - half, x - half, size, half))
    dy = (box_sum(ii, y, x - half, half, size) - box_sum(ii, y - half, x - half, half, size))
    return dx, dy


_DISC = np.array([(i, j) for i in range(-6, 7) for j in range(-6, 7) if i * i + j * j < 36])
_DISC_W = np.exp(-(_DISC ** 2).sum(1) / (2 * 2.5 ** 2))


def _orientations(ii, x, y, s):
    xs = np.rint(x[:, None] + _DISC[None, :, 1] * s[:, None]).astype(np.int64)
    ys = np.rint(y[:, None] + _DISC[None, :, 0] * s[:, None]).astype(np.int64)
    size = (2 * np.rint(2 * s)).astype(np.int64)[:, None]
    dx, dy = _haar(ii, xs, ys, np.maximum(size, 2))
    dx *= _DISC_W
    dy *= _DISC_W
    ang = np.mod(np.arctan2(dy, dx), 2 * np.pi)
    starts = np.arange(0, 2 * np.pi, 0.15)
    best = np.zeros(len(x))
    best_len = np.full(len(x), -1.0)
    for a0 in starts:
        inside = np.mod(ang - a0, 2 * np.pi) < np.pi / 3
        sx = (dx * inside).sum(1)
        sy = (dy * inside).sum(1)
        mag = sx * sx + sy * sy
        upd = mag > best_len
        best_len[upd] = mag[upd]
        best[upd] = np.arctan2(sy[upd], sx[upd])
    return np.mod(best, 2 * np.pi)


_GRID = (np.arange(20) - 9.5)
_GU, _GV = np.meshgrid(_GRID, _GRID)  # _GU varies along columns
_GU = _GU.ravel()
_GV = _GV.ravel()
_SUBREGION = ((_GV + 10) // 5 * 4 + (_GU + 10) // 5).astype(np.int64)
_GAUSS = np.exp(-(_GU ** 2 + _GV ** 2) / (2 * 3.3 ** 2))


def _descriptors(ii, x, y, s, theta):
    cos, sin = np.cos(theta)[:, None], np.sin(theta)[:, None]
    u = _GU[None, :] * s[:, None]
    v = _GV[None, :] * s[:, None]
    xs = np.rint(x[:, None] + u * cos - v * sin).astype(np.int64)
    ys = np.rint(y[:, None] + u * sin + v * cos).astype(np.int64)
    size = np.maximum(2 * np.rint(s), 2).astype(np.int64)[:, None]
    dx, dy = _haar(ii, xs, ys, size)
    rx = (dx * cos + dy * sin) * _GAUSS
    ry = (-dx * sin + dy * cos) * _GAUSS
    n = len(x)
    out = np.zeros((n, 16, 4))
    for k, comp in enumerate((rx, np.abs(rx), ry, np.abs(ry))):
        for sub in range(16):
            out[:, sub, k] = comp[:, _SUBREGION == sub].sum(1)
    out = out.reshape(n, 64)
    norm = np.linalg.norm(out, axis=1, keepdims=True)
    keep = norm[:, 0] > 0
    out[keep] /= norm[keep]
    return out, keep


def extract_descriptors(image, photo_id="", threshold=DEFAULT_THRESHOLD, max_keypoints=None) -> DescriptorSet:
    """Detect SURF keypoints and describe them; strongest response first."""
    gray = to_gray(image)
    if min(gray.shape) < MIN_SIZE:
        raise ImageTooSmall(f"image {gray.shape[1]}x{gray.shape[0]} smaller than {MIN_SIZE}px")
    ii = integral_image(gray / 255.0)
    pts = _detect(ii, threshold)
    if not pts:
        return DescriptorSet.empty(photo_id)
    arr = np.array(pts, dtype=np.float64)
    order = np.lexsort((arr[:, 1], arr[:, 0], -arr[:, 3]))
    arr = arr[order]
    if max_keypoints is not None:
        arr = arr[:max_keypoints]
    x, y, s, resp = arr.T
    theta = _orientations(ii, x, y, s)
    desc, keep = _descriptors(ii, x, y, s, theta)
    return DescriptorSet(photo_id, desc[keep], x[keep], y[keep], s[keep], theta[keep], resp[keep])
