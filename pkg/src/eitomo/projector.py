"""Parallel-beam Radon transform, its exact adjoint, and the detector derivative.

Rays are sampled at a fixed step along their length and the image is read
with bilinear interpolation. Pixels outside the image count as zero; this is
implemented by working on a copy of the image padded with a one-pixel zero
border, so every interpolation stencil stays in bounds.

Two implementations share the same sampling code:

* on-the-fly kernels recompute the interpolation indices for every ray,
* a lookup table (:func:`build_lookup`) stores them once.

Both accumulate the samples of a ray in the same order, so their outputs are
bitwise identical.

Array layout: images are ``(N_t, N_t)`` indexed ``[row, col]``; sinograms
are ``(N_t, N_theta)`` indexed ``[t, theta]``.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from .errors import DomainError, ResourceError, ShapeError

__all__ = [
    "Geometry",
    "LookupTable",
    "build_lookup",
    "lookup_memory_bytes",
    "radon_forward",
    "radon_adjoint",
    "diff_t",
    "diff_t_adjoint",
    "call_counts",
    "reset_call_counts",
]

# Number of per-angle accumulation buffers in the adjoint. Fixed (not tied to
# the thread count) so the merge order, and hence the result, never changes.
ADJOINT_CHUNKS = 8

DEFAULT_LOOKUP_BUDGET = 1 << 30  # bytes

_calls = {"radon_forward": 0, "radon_adjoint": 0, "diff_t": 0, "diff_t_adjoint": 0}


def call_counts() -> dict[str, int]:
    """Return a snapshot of the operator call counters."""
    return dict(_calls)


def reset_call_counts() -> None:
    for key in _calls:
        _calls[key] = 0


@dataclass(frozen=True, eq=False)
class Geometry:
    """Parallel-beam scan geometry.

    Parameters
    ----------
    n_pixels : int
        Detector pixels ``N_t``; the reconstructed slice is ``N_t x N_t``.
    angles : array_like
        Projection angles in radians, strictly increasing, within ``[0, 2*pi)``.
    pixel_size : float
        Detector and image pixel pitch in micrometers.
    step : float
        Sampling step along each ray, in pixels.
    """

    n_pixels: int
    angles: np.ndarray
    pixel_size: float = 1.0
    step: float = 1.0
    _trig: tuple = field(init=False, repr=False)

    def __post_init__(self):
        angles = np.ascontiguousarray(self.angles, dtype=np.float64)
        if angles.ndim != 1 or angles.size < 1:
            raise ShapeError("angles must be a non-empty 1D array")
        if not np.all(np.isfinite(angles)):
            raise DomainError("angles must be finite")
        if np.any(angles < 0) or np.any(angles >= 2 * np.pi):
            raise DomainError("angles must lie in [0, 2*pi)")
        if np.any(np.diff(angles) <= 0):
            raise DomainError("angles must be strictly increasing")
        if int(self.n_pixels) < 2:
            raise ShapeError("n_pixels must be >= 2")
        if not self.pixel_size > 0:
            raise DomainError("pixel_size must be positive")
        if not self.step > 0:
            raise DomainError("step must be positive")
        angles.setflags(write=False)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "n_pixels", int(self.n_pixels))
        object.__setattr__(self, "pixel_size", float(self.pixel_size))
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "_trig", (np.cos(angles), np.sin(angles)))

    @classmethod
    def uniform(cls, n_pixels: int, n_angles: int, span: float = np.pi, **kwargs) -> "Geometry":
        """Evenly spaced angles over ``[0, span)``."""
        angles = np.arange(n_angles) * (span / n_angles)
        return cls(n_pixels, angles, **kwargs)

    @property
    def n_angles(self) -> int:
        return self.angles.size

    @property
    def center(self) -> float:
        return (self.n_pixels - 1) / 2.0

    @property
    def n_samples(self) -> int:
        """Samples per ray: enough to cross the zero-padded image diagonally."""
        half = math.ceil((self.center + 1.0) * math.sqrt(2.0) / self.step) + 1
        return 2 * half + 1

    @property
    def sino_shape(self) -> tuple[int, int]:
        return (self.n_pixels, self.n_angles)

    @property
    def image_shape(self) -> tuple[int, int]:
        return (self.n_pixels, self.n_pixels)

    def subset(self, index) -> "Geometry":
        """Geometry restricted to a subset of the angles."""
        return Geometry(self.n_pixels, self.angles[index], self.pixel_size, self.step)


@contextlib.contextmanager
def _threads(n: int | None):
    if n is None:
        yield
        return
    prev = numba.get_num_threads()
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
    try:
        yield
    finally:
        numba.set_num_threads(prev)


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------


@njit(cache=True)
def _sample_point(u, s, ct, st, c, lim):
    """Padded-grid stencil of the sample at detector offset u, ray offset s.

    Returns (valid, i0, j0, fy, fx). A sample is valid when its 2x2 stencil
    touches the padded image; invalid samples contribute exactly zero.
    """
    x = u * ct - s * st + c + 1.0
    y = u * st + s * ct + c + 1.0
    if x < 0.0 or y < 0.0 or x >= lim or y >= lim:
        return False, 0, 0, 0.0, 0.0
    j0 = int(x)
    i0 = int(y)
    return True, i0, j0, y - i0, x - j0


@njit(cache=True)
def _pixel(image, i, j, n):
    """Value at padded-grid index (i, j); the one-pixel border reads as zero."""
    if i < 1 or j < 1 or i > n or j > n:
        return 0.0
    return image[i - 1, j - 1]


@njit(parallel=True, cache=True)
def _forward_otf(image, cos_t, sin_t, n, n_samples, step, scale):
    # reads the unpadded image so that no image-sized workspace is needed;
    # the arithmetic matches _forward_table term by term
    n_ang = cos_t.shape[0]
    out = np.empty((n, n_ang))
    c = (n - 1) / 2.0
    lim = n + 1.0
    half = (n_samples - 1) // 2
    for r in prange(n * n_ang):
        it = r // n_ang
        ia = r - it * n_ang
        u = it - c
        ct = cos_t[ia]
        st = sin_t[ia]
        acc = 0.0
        for k in range(n_samples):
            ok, i0, j0, fy, fx = _sample_point(u, (k - half) * step, ct, st, c, lim)
            if not ok:
                continue
            wx0 = 1.0 - fx
            wy0 = 1.0 - fy
            if i0 >= 1 and j0 >= 1 and i0 < n and j0 < n:
                a = image[i0 - 1, j0 - 1]
                b = image[i0 - 1, j0]
                d = image[i0, j0 - 1]
                e = image[i0, j0]
            else:
                a = _pixel(image, i0, j0, n)
                b = _pixel(image, i0, j0 + 1, n)
                d = _pixel(image, i0 + 1, j0, n)
                e = _pixel(image, i0 + 1, j0 + 1, n)
            acc += wy0 * (wx0 * a + fx * b) + fy * (wx0 * d + fx * e)
        out[it, ia] = acc * scale
    return out


@njit(parallel=True, cache=True)
def _adjoint_otf(sino, cos_t, sin_t, n, n_samples, step, scale, n_chunks):
    n_ang = cos_t.shape[0]
    c = (n - 1) / 2.0
    lim = n + 1.0
    half = (n_samples - 1) // 2
    bufs = np.zeros((n_chunks, n + 2, n + 2))
    for ch in prange(n_chunks):
        buf = bufs[ch]
        for ia in range(ch, n_ang, n_chunks):
            ct = cos_t[ia]
            st = sin_t[ia]
            for it in range(n):
                val = sino[it, ia] * scale
                if val == 0.0:
                    continue
                u = it - c
                for k in range(n_samples):
                    ok, i0, j0, fy, fx = _sample_point(u, (k - half) * step, ct, st, c, lim)
                    if not ok:
                        continue
                    wx0 = 1.0 - fx
                    wy0 = 1.0 - fy
                    buf[i0, j0] += wy0 * wx0 * val
                    buf[i0, j0 + 1] += wy0 * fx * val
                    buf[i0 + 1, j0] += fy * wx0 * val
                    buf[i0 + 1, j0 + 1] += fy * fx * val
    out = np.zeros((n + 2, n + 2))
    for ch in range(n_chunks):
        out += bufs[ch]
    return out[1 : n + 1, 1 : n + 1].copy()


@njit(parallel=True, cache=True)
def _count_samples(cos_t, sin_t, n, n_samples, step):
    n_ang = cos_t.shape[0]
    counts = np.zeros(n * n_ang, dtype=np.int64)
    c = (n - 1) / 2.0
    lim = n + 1.0
    half = (n_samples - 1) // 2
    for r in prange(n * n_ang):
        it = r // n_ang
        ia = r - it * n_ang
        cnt = 0
        for k in range(n_samples):
            ok, i0, j0, fy, fx = _sample_point(it - c, (k - half) * step, cos_t[ia], sin_t[ia], c, lim)
            if ok:
                cnt += 1
        counts[r] = cnt
    return counts


@njit(parallel=True, cache=True)
def _fill_table(cos_t, sin_t, n, n_samples, step, ptr, index, wx, wy):
    n_ang = cos_t.shape[0]
    c = (n - 1) / 2.0
    lim = n + 1.0
    half = (n_samples - 1) // 2
    stride = n + 2
    for r in prange(n * n_ang):
        it = r // n_ang
        ia = r - it * n_ang
        pos = ptr[r]
        for k in range(n_samples):
            ok, i0, j0, fy, fx = _sample_point(it - c, (k - half) * step, cos_t[ia], sin_t[ia], c, lim)
            if not ok:
                continue
            base = i0 * stride + j0
            index[pos, 0] = base
            index[pos, 1] = base + 1
            index[pos, 2] = base + stride
            index[pos, 3] = base + stride + 1
            wx[pos, 0] = 1.0 - fx
            wx[pos, 1] = fx
            wy[pos, 0] = 1.0 - fy
            wy[pos, 1] = fy
            pos += 1


@njit(parallel=True, cache=True)
def _forward_table(flat, ptr, index, wx, wy, n, n_ang, scale):
    out = np.empty((n, n_ang))
    for r in prange(n * n_ang):
        acc = 0.0
        for p in range(ptr[r], ptr[r + 1]):
            wx0 = wx[p, 0]
            fx = wx[p, 1]
            acc += wy[p, 0] * (wx0 * flat[index[p, 0]] + fx * flat[index[p, 1]]) + wy[p, 1] * (
                wx0 * flat[index[p, 2]] + fx * flat[index[p, 3]]
            )
        it = r // n_ang
        out[it, r - it * n_ang] = acc * scale
    return out


@njit(parallel=True, cache=True)
def _adjoint_table(sino, ptr, index, wx, wy, n, scale, n_chunks):
    n_ang = sino.shape[1]
    size = (n + 2) * (n + 2)
    bufs = np.zeros((n_chunks, size))
    for ch in prange(n_chunks):
        buf = bufs[ch]
        for ia in range(ch, n_ang, n_chunks):
            for it in range(n):
                val = sino[it, ia] * scale
                if val == 0.0:
                    continue
                r = it * n_ang + ia
                for p in range(ptr[r], ptr[r + 1]):
                    buf[index[p, 0]] += wy[p, 0] * wx[p, 0] * val
                    buf[index[p, 1]] += wy[p, 0] * wx[p, 1] * val
                    buf[index[p, 2]] += wy[p, 1] * wx[p, 0] * val
                    buf[index[p, 3]] += wy[p, 1] * wx[p, 1] * val
    out = np.zeros(size)
    for ch in range(n_chunks):
        out += bufs[ch]
    return out.reshape((n + 2, n + 2))[1 : n + 1, 1 : n + 1].copy()


# --------------------------------------------------------------------------
# lookup table
# --------------------------------------------------------------------------


@dataclass(eq=False)
class LookupTable:
    """Precomputed bilinear stencils for every valid ray sample.

    Ray ``r = t * N_theta + theta`` owns entries ``ptr[r]:ptr[r+1]``.
    ``index`` holds the four corner positions in the flattened zero-padded
    image; ``wx``/``wy`` hold the horizontal and vertical weight pairs.
    """

    geometry: Geometry
    ptr: np.ndarray
    index: np.ndarray
    wx: np.ndarray
    wy: np.ndarray

    @property
    def memory_bytes(self) -> int:
        return int(self.ptr.nbytes + self.index.nbytes + self.wx.nbytes + self.wy.nbytes)

    @property
    def n_entries(self) -> int:
        return int(self.ptr[-1])


_ENTRY_BYTES = 4 * 8 + 2 * 8 + 2 * 8


def _sample_counts(geom: Geometry) -> np.ndarray:
    cos_t, sin_t = geom._trig
    return _count_samples(cos_t, sin_t, geom.n_pixels, geom.n_samples, geom.step)


def lookup_memory_bytes(geom: Geometry) -> int:
    """Bytes a lookup table for ``geom`` would occupy, without allocating it."""
    total = int(_sample_counts(geom).sum())
    return total * _ENTRY_BYTES + (geom.n_pixels * geom.n_angles + 1) * 8


def build_lookup(geom: Geometry, budget_bytes: int = DEFAULT_LOOKUP_BUDGET) -> LookupTable:
    """Precompute the interpolation stencils of every ray.

    Raises
    ------
    ResourceError
        If the table would exceed ``budget_bytes``.
    """
    counts = _sample_counts(geom)
    need = int(counts.sum()) * _ENTRY_BYTES + (counts.size + 1) * 8
    if need > budget_bytes:
        raise ResourceError(
            f"lookup table needs {need / 2**20:.1f} MiB, budget is {budget_bytes / 2**20:.1f} MiB"
        )
    ptr = np.zeros(counts.size + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    total = int(ptr[-1])
    index = np.empty((total, 4), dtype=np.int64)
    wx = np.empty((total, 2))
    wy = np.empty((total, 2))
    cos_t, sin_t = geom._trig
    _fill_table(cos_t, sin_t, geom.n_pixels, geom.n_samples, geom.step, ptr, index, wx, wy)
    return LookupTable(geom, ptr, index, wx, wy)


# --------------------------------------------------------------------------
# public operators
# --------------------------------------------------------------------------


def _check_image(image, geom: Geometry) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.shape != geom.image_shape:
        raise ShapeError(f"image shape {image.shape} does not match geometry {geom.image_shape}")
    if not np.all(np.isfinite(image)):
        raise DomainError("image contains non-finite values")
    return image


def _check_sino(sino, geom: Geometry) -> np.ndarray:
    sino = np.ascontiguousarray(sino, dtype=np.float64)
    if sino.shape != geom.sino_shape:
        raise ShapeError(f"sinogram shape {sino.shape} does not match geometry {geom.sino_shape}")
    if not np.all(np.isfinite(sino)):
        raise DomainError("sinogram contains non-finite values")
    return sino


def radon_forward(
    image,
    geom: Geometry,
    *,
    table: LookupTable | None = None,
    threads: int | None = None,
) -> np.ndarray:
    """Line integrals of ``image`` along every ray of ``geom``.

    Each ray value is the sum of bilinearly interpolated samples times
    ``pixel_size * step``, so an image in inverse micrometers yields a
    dimensionless sinogram.

    Parameters
    ----------
    image : ndarray, shape (N_t, N_t)
    geom : Geometry
    table : LookupTable, optional
        Use precomputed stencils instead of computing them on the fly.
    threads : int, optional
        Numba thread count for this call.

    Returns
    -------
    ndarray, shape (N_t, N_theta)
    """
    image = _check_image(image, geom)
    _calls["radon_forward"] += 1
    scale = geom.pixel_size * geom.step
    with _threads(threads):
        if table is not None:
            _check_table(table, geom)
            return _forward_table(
                np.pad(image, 1).ravel(), table.ptr, table.index, table.wx, table.wy,
                geom.n_pixels, geom.n_angles, scale,
            )
        cos_t, sin_t = geom._trig
        return _forward_otf(np.ascontiguousarray(image), cos_t, sin_t, geom.n_pixels, geom.n_samples, geom.step, scale)


def radon_adjoint(
    sino,
    geom: Geometry,
    *,
    table: LookupTable | None = None,
    threads: int | None = None,
) -> np.ndarray:
    """Exact transpose of :func:`radon_forward` (unfiltered backprojection)."""
    sino = _check_sino(sino, geom)
    _calls["radon_adjoint"] += 1
    scale = geom.pixel_size * geom.step
    with _threads(threads):
        if table is not None:
            _check_table(table, geom)
            return _adjoint_table(
                sino, table.ptr, table.index, table.wx, table.wy, geom.n_pixels, scale, ADJOINT_CHUNKS
            )
        cos_t, sin_t = geom._trig
        return _adjoint_otf(
            sino, cos_t, sin_t, geom.n_pixels, geom.n_samples, geom.step, scale, ADJOINT_CHUNKS
        )


def _check_table(table: LookupTable, geom: Geometry) -> None:
    g = table.geometry
    if (
        g.n_pixels != geom.n_pixels
        or g.step != geom.step
        or g.angles.shape != geom.angles.shape
        or not np.array_equal(g.angles, geom.angles)
    ):
        raise ShapeError("lookup table was built for a different geometry")


def diff_t(sino, pixel_size: float = 1.0) -> np.ndarray:
    """Derivative along the detector axis (axis 0).

    Central differences in the interior, one-sided differences at the two
    edge pixels, divided by ``pixel_size``. Extra trailing axes are allowed.
    """
    sino = np.asarray(sino, dtype=np.float64)
    if sino.ndim < 1 or sino.shape[0] < 3:
        raise ShapeError("diff_t needs at least 3 detector pixels")
    _calls["diff_t"] += 1
    out = np.empty_like(sino)
    out[1:-1] = (sino[2:] - sino[:-2]) * (0.5 / pixel_size)
    out[0] = (sino[1] - sino[0]) / pixel_size
    out[-1] = (sino[-1] - sino[-2]) / pixel_size
    return out


def diff_t_adjoint(sino, pixel_size: float = 1.0) -> np.ndarray:
    """Transpose of :func:`diff_t`."""
    y = np.asarray(sino, dtype=np.float64)
    if y.ndim < 1 or y.shape[0] < 3:
        raise ShapeError("diff_t_adjoint needs at least 3 detector pixels")
    _calls["diff_t_adjoint"] += 1
    n = y.shape[0]
    half = 0.5 / pixel_size
    out = np.zeros_like(y)
    # interior rows i = 1..n-2 send +y/2 to i+1 and -y/2 to i-1
    out[2:] += y[1:-1] * half
    out[: n - 2] -= y[1:-1] * half
    out[0] -= y[0] / pixel_size
    out[1] += y[0] / pixel_size
    out[-2] -= y[-1] / pixel_size
    out[-1] += y[-1] / pixel_size
    return out
