"""Grayscale conversion and the soft edge map used as flooding topography."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import ImageBuffer

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T
_FLAT = 1e-9  # gradient magnitudes below this (in gray levels) count as zero


@dataclass
class EdgeMap:
    energy: np.ndarray  # (height, width) float64 in [0, 1]

    @property
    def height(self) -> int:
        return self.energy.shape[0]

    @property
    def width(self) -> int:
        return self.energy.shape[1]


def gaussian_kernel(size: int = 5, sigma: float = 1.0) -> np.ndarray:
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()


def to_grayscale(img: ImageBuffer) -> ImageBuffer:
    """Luma conversion, rounded half up. Gray input is returned unchanged."""
    if img.channels == 1:
        return img
    if img.channels != 3:
        raise ValueError(f"unsupported channel count {img.channels}")
    rgb = img.data.astype(np.float64)
    y = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    gray = np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)
    return ImageBuffer(gray)


def edge_energy(gray: ImageBuffer) -> EdgeMap:
    """Blur (5x5, sigma 1), Sobel magnitude, then scale so the maximum is 1.

    Borders are replicated for both filters. A constant image yields all zeros.
    """
    if gray.channels != 1:
        raise ValueError("edge_energy expects a single-channel image")
    x = gray.data[:, :, 0].astype(np.float64)
    blurred = ndimage.correlate(x, gaussian_kernel(), mode="nearest")
    gx = ndimage.correlate(blurred, SOBEL_X, mode="nearest")
    gy = ndimage.correlate(blurred, SOBEL_Y, mode="nearest")
    mag = np.sqrt(gx * gx + gy * gy)
    # blurring a flat area leaves ~1e-13 of round-off; don't let it normalise to 1
    mag[mag < _FLAT] = 0.0
    peak = mag.max()
    if peak > 0:
        mag = mag / peak
    else:
        mag = np.zeros_like(mag)
    return EdgeMap(np.clip(mag, 0.0, 1.0))
