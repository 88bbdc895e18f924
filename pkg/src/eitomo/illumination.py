"""Flat-field illumination curves: averaging, periodic interpolation, derivatives.

An illumination curve (IC) is the intensity seen by each detector pixel while
the sample mask steps through one period. Curves are interpolated with a
periodic Catmull-Rom spline so both the value and the first derivative are
continuous, which the gradient of the reconstruction cost needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import DomainError, ShapeError

__all__ = ["IlluminationCurve", "MeanCurve", "ic_from_scans", "smooth_ic"]


def _catmull_rom(p0, p1, p2, p3, s):
    a = -p0 + 3.0 * p1 - 3.0 * p2 + p3
    b = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3
    c = p2 - p0
    return 0.5 * (((a * s + b) * s + c) * s + 2.0 * p1)


def _catmull_rom_deriv(p0, p1, p2, p3, s):
    a = -p0 + 3.0 * p1 - 3.0 * p2 + p3
    b = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3
    c = p2 - p0
    return 0.5 * ((3.0 * a * s + 2.0 * b) * s + c)


def _check_offsets(offsets: np.ndarray, period: float) -> float:
    if offsets.ndim != 1 or offsets.size < 4:
        raise ShapeError("need at least 4 mask offsets for cubic interpolation")
    if not period > 0:
        raise DomainError("period must be positive")
    steps = np.diff(offsets)
    delta = period / offsets.size
    if np.any(steps <= 0):
        raise DomainError("offsets must be strictly increasing")
    if not np.allclose(steps, delta, rtol=1e-9, atol=0):
        raise DomainError("offsets must evenly sample exactly one period")
    return delta


@dataclass(frozen=True, eq=False)
class IlluminationCurve:
    """Per-pixel flat-field curve ``f(t, m)`` over one mask period.

    Attributes
    ----------
    samples : ndarray, shape (N_t, N_m)
        Mean intensity (counts) per detector pixel and mask offset.
    offsets : ndarray, shape (N_m,)
        Mask offsets in micrometers; ``offsets[k] = offsets[0] + k * period / N_m``.
    period : float
        Mask period in micrometers.
    n_repeats_averaged : int
        Number of flat-field scans averaged into ``samples``.
    """

    samples: np.ndarray
    offsets: np.ndarray
    period: float
    n_repeats_averaged: int = 1

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        offsets = np.array(self.offsets, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[1] != offsets.size:
            raise ShapeError("samples must be (N_t, N_m) matching offsets")
        if not np.all(np.isfinite(samples)) or np.any(samples < 0):
            raise DomainError("intensities must be finite and non-negative")
        _check_offsets(offsets, float(self.period))
        samples.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "period", float(self.period))

    @property
    def n_pixels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_steps(self) -> int:
        return self.samples.shape[1]

    @property
    def delta(self) -> float:
        return self.period / self.n_steps

    def _stencil(self, t, m):
        n = self.n_steps
        u = np.mod((np.asarray(m, dtype=np.float64) - self.offsets[0]) / self.delta, n)
        k = np.floor(u)
        s = u - k
        k = k.astype(np.intp) % n
        t_b, k_b = np.broadcast_arrays(np.asarray(t, dtype=np.intp), k)
        p = [self.samples[t_b, (k_b + j) % n] for j in (-1, 0, 1, 2)]
        return p, s

    def eval(self, t, m) -> np.ndarray:
        """Interpolated intensity at pixel(s) ``t`` and offset(s) ``m`` (broadcast)."""
        p, s = self._stencil(t, m)
        return _catmull_rom(*p, s)

    def deriv(self, t, m) -> np.ndarray:
        """Derivative of the interpolant with respect to ``m`` (counts per micrometer)."""
        p, s = self._stencil(t, m)
        return _catmull_rom_deriv(*p, s) / self.delta

    def eval_with_deriv(self, t, m) -> tuple[np.ndarray, np.ndarray]:
        """Value and ``m``-derivative from a single stencil gather."""
        p, s = self._stencil(t, m)
        return _catmull_rom(*p, s), _catmull_rom_deriv(*p, s) / self.delta

    def mean(self) -> "MeanCurve":
        """Pixel-averaged curve."""
        return MeanCurve(self.samples.mean(axis=0), self.offsets, self.period)

    def argmax_offset(self) -> float:
        """Offset of the maximum of the pixel-averaged curve, on a fine grid."""
        return self.mean().argmax_offset()


@dataclass(frozen=True, eq=False)
class MeanCurve:
    """Pixel-averaged IC ``f(m)`` with its interpolant derivative ``f'(m)``."""

    values: np.ndarray
    offsets: np.ndarray
    period: float

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        offsets = np.array(self.offsets, dtype=np.float64)
        if values.shape != offsets.shape:
            raise ShapeError("values and offsets must have the same length")
        _check_offsets(offsets, float(self.period))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "_ic", IlluminationCurve(np.maximum(values, 0)[None, :], offsets, self.period))

    @property
    def derivs(self) -> np.ndarray:
        """``f'`` at the knots."""
        return self.deriv(self.offsets)

    def eval(self, m) -> np.ndarray:
        return self._ic.eval(0, m)

    def deriv(self, m) -> np.ndarray:
        return self._ic.deriv(0, m)

    def argmax_offset(self, oversample: int = 64) -> float:
        m = self.offsets[0] + np.arange(self.offsets.size * oversample) * (self.period / (self.offsets.size * oversample))
        return float(m[np.argmax(self.eval(m))])


def ic_from_scans(scans, offsets, period: float) -> IlluminationCurve:
    """Average repeated flat-field scans into one illumination curve.

    Parameters
    ----------
    scans : array_like, shape (N_t, N_m, N_rep)
        Photon counts; a 2D array is treated as a single repeat.
    offsets : array_like, shape (N_m,)
        Mask offsets in micrometers.
    period : float
        Mask period in micrometers.
    """
    scans = np.asarray(scans, dtype=np.float64)
    if scans.ndim == 2:
        scans = scans[..., None]
    if scans.ndim != 3 or scans.shape[2] < 1:
        raise ShapeError("scans must be (N_t, N_m, N_rep) with N_rep >= 1")
    if np.any(scans < 0):
        raise DomainError("photon counts must be non-negative")
    n_rep = scans.shape[2]
    mean = scans[..., 0].copy() if n_rep == 1 else scans.mean(axis=2)
    return IlluminationCurve(mean, offsets, period, n_repeats_averaged=n_rep)


def smooth_ic(ic: IlluminationCurve, sigma_steps: float) -> IlluminationCurve:
    """Periodic Gaussian smoothing of each pixel's curve along ``m``."""
    if sigma_steps <= 0:
        return ic
    smoothed = gaussian_filter1d(ic.samples, sigma_steps, axis=1, mode="wrap")
    return IlluminationCurve(smoothed, ic.offsets, ic.period, ic.n_repeats_averaged)
