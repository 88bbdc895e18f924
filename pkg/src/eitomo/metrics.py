"""Image-quality metrics: Fourier ring correlation, CNR and a ring-artifact score."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.ndimage import gaussian_filter1d, map_coordinates

from .errors import DomainError, ShapeError

__all__ = [
    "FRCCurve",
    "Resolution",
    "Circle",
    "CNR",
    "central_crop",
    "frc",
    "resolution_from_frc",
    "cnr",
    "ring_score",
]


@dataclass
class FRCCurve:
    """Correlation per frequency ring.

    ``freq`` is in cycles per pixel; ``raw`` is the unsmoothed correlation
    and ``counts`` the number of Fourier samples in each ring.
    """

    freq: np.ndarray
    values: np.ndarray
    raw: np.ndarray | None = None
    counts: np.ndarray | None = None
    pixel_size: float = 1.0


class Resolution(NamedTuple):
    pixels: float
    micrometers: float
    frequency: float
    crossed: bool


class Circle(NamedTuple):
    """Circular region centred at column ``x``, row ``y``."""

    x: float
    y: float
    radius: float

    def mask(self, shape) -> np.ndarray:
        rows, cols = np.indices(shape)
        return (rows - self.y) ** 2 + (cols - self.x) ** 2 <= self.radius**2


class CNR(NamedTuple):
    value: float
    mean1: float
    mean2: float
    std1: float
    std2: float
    degenerate: bool


def central_crop(img, frac: float = 0.64) -> np.ndarray:
    """Central square with side ``round(frac * N)``."""
    img = np.asarray(img)
    n = img.shape[0]
    k = int(round(frac * n))
    lo = (n - k) // 2
    return img[lo : lo + k, lo : lo + k]


def frc(img1, img2, sigma: float = 2.0, pixel_size: float = 1.0) -> FRCCurve:
    """Fourier ring correlation of two images of the same field.

    For every ring of unit width in frequency index,
    ``sum(F1 * conj(F2)) / sqrt(sum|F1|^2 * sum|F2|^2)`` (real part). The
    curve is then smoothed with a Gaussian of ``sigma`` bins (0 disables).
    """
    a = np.asarray(img1, dtype=np.float64)
    b = np.asarray(img2, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError("frc needs two square images of the same shape")
    if not np.any(a) or not np.any(b):
        raise DomainError("frc is undefined for an all-zero image")
    n = a.shape[0]
    fa = np.fft.fft2(a)
    fb = np.fft.fft2(b)
    k = np.fft.fftfreq(n) * n
    ring = np.rint(np.hypot(k[:, None], k[None, :])).astype(np.intp).ravel()
    n_bins = n // 2 + 1
    keep = ring < n_bins
    ring = ring[keep]
    cross = np.bincount(ring, (fa * np.conj(fb)).real.ravel()[keep], n_bins)
    pa = np.bincount(ring, (np.abs(fa) ** 2).ravel()[keep], n_bins)
    pb = np.bincount(ring, (np.abs(fb) ** 2).ravel()[keep], n_bins)
    counts = np.bincount(ring, minlength=n_bins)
    denom = np.sqrt(pa * pb)
    raw = np.divide(cross, denom, out=np.zeros(n_bins), where=denom > 0)
    values = gaussian_filter1d(raw, sigma, mode="nearest") if sigma > 0 else raw.copy()
    return FRCCurve(np.arange(n_bins) / n, values, raw, counts, pixel_size)


def resolution_from_frc(curve: FRCCurve, cutoff: float = 0.5) -> Resolution:
    """Resolution at the first downward crossing of ``cutoff``.

    The crossing frequency is linearly interpolated between bins. Without a
    crossing the highest frequency in the curve is used and ``crossed`` is
    false.
    """
    f = np.asarray(curve.freq)
    v = np.asarray(curve.values)
    below = np.nonzero((v[1:] < cutoff) & (v[:-1] >= cutoff))[0]
    if below.size == 0:
        w = float(f[-1])
        crossed = False
    else:
        i = below[0]
        w = float(f[i] + (v[i] - cutoff) / (v[i] - v[i + 1]) * (f[i + 1] - f[i]))
        crossed = True
    px = 1.0 / w
    return Resolution(px, px * curve.pixel_size, w, crossed)


def cnr(img, roi1: Circle, roi2: Circle) -> CNR:
    """Contrast-to-noise ratio between two circular regions.

    ``|mean1 - mean2| / sqrt(std1**2 + std2**2)`` with population standard
    deviations. When both deviations vanish the value is 0 and
    ``degenerate`` is set.
    """
    img = np.asarray(img, dtype=np.float64)
    for roi in (roi1, roi2):
        if (
            roi.radius <= 0
            or roi.x - roi.radius < -0.5
            or roi.y - roi.radius < -0.5
            or roi.x + roi.radius > img.shape[1] - 0.5
            or roi.y + roi.radius > img.shape[0] - 0.5
        ):
            raise DomainError(f"region {roi} lies outside the image")
    if np.hypot(roi1.x - roi2.x, roi1.y - roi2.y) < roi1.radius + roi2.radius:
        raise DomainError("regions overlap")
    a = img[roi1.mask(img.shape)]
    b = img[roi2.mask(img.shape)]
    m1, m2 = float(a.mean()), float(b.mean())
    s1, s2 = float(a.std()), float(b.std())
    noise = np.hypot(s1, s2)
    if noise == 0:
        warnings.warn("both regions are constant; CNR set to 0", RuntimeWarning, stacklevel=2)
        return CNR(0.0, m1, m2, s1, s2, True)
    return CNR(float(abs(m1 - m2) / noise), m1, m2, s1, s2, False)


def radial_profile(img, n_angles: int | None = None) -> np.ndarray:
    """Angular mean at integer radii about the image centre."""
    img = np.asarray(img, dtype=np.float64)
    n = img.shape[0]
    c = (n - 1) / 2.0
    radii = np.arange(int(n // 2))
    n_angles = n_angles or 4 * n
    theta = np.arange(n_angles) * (2 * np.pi / n_angles)
    rows = c + radii[:, None] * np.sin(theta)[None, :]
    cols = c + radii[:, None] * np.cos(theta)[None, :]
    polar = map_coordinates(img, [rows, cols], order=1, mode="nearest")
    return polar.mean(axis=1)


def ring_score(img, trend_sigma: float = 2.0) -> float:
    """Strength of concentric ring structure, relative to image contrast.

    The angular mean at each radius is compared with a Gaussian-smoothed
    version of itself (width ``trend_sigma`` radii); the score is the mean
    absolute deviation divided by the standard deviation of the image inside
    its inscribed circle. Rings are angle-constant, so they survive the
    angular average while noise does not. A constant image scores 0.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ShapeError("ring_score needs a square image")
    n = img.shape[0]
    c = (n - 1) / 2.0
    rows, cols = np.indices(img.shape)
    inside = np.hypot(rows - c, cols - c) <= n / 2 - 1
    spread = float(img[inside].std())
    if spread == 0:
        return 0.0
    prof = radial_profile(img)
    trend = gaussian_filter1d(prof, trend_sigma, mode="nearest")
    return float(np.mean(np.abs(prof - trend)) / spread)
