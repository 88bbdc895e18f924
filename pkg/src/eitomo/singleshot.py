"""Single-shot retrieval and filtered backprojection.

Each projection row is normalized by the flat field, deconvolved along the
detector axis with the filter ``1 / (1 + i q z gamma^-1 f'(m)/f(m))`` and
turned into a projected contrast by a logarithm. ``f`` and ``f'`` are the
pixel-averaged flat-field curve and its derivative at the working offset.

Note on ``gamma``: in this retrieval formula ``gamma`` multiplies the
attenuation to give the phase, i.e. it is the reciprocal of the ``gamma`` the
forward model uses. :func:`reconstruct` takes the forward-model value and
converts it, so both reconstruction routes can share one setting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .forward_model import ScanData
from .illumination import IlluminationCurve
from .projector import Geometry, radon_adjoint

__all__ = ["RetrievalConfig", "retrieve", "ramp_filter", "fbp", "reconstruct"]

log = logging.getLogger(__name__)

_TINY = 1e-12


@dataclass(frozen=True)
class RetrievalConfig:
    """Parameters of the single-shot retrieval.

    ``pad`` is the mirror-padding width on each side of a detector row;
    ``None`` means half the row length.
    """

    gamma: float
    z: float
    offset: float
    pixel_size: float = 1.0
    pad: int | None = None

    def __post_init__(self):
        if not (self.gamma > 0 and self.z > 0):
            raise DomainError("gamma and z must be positive")
        if not self.pixel_size > 0:
            raise DomainError("pixel_size must be positive")


def _filter_coefficient(ic: IlluminationCurve, cfg: RetrievalConfig) -> float:
    mean = ic.mean()
    fbar = float(mean.eval(cfg.offset))
    if not fbar > 0:
        raise DomainError("mean flat field is not positive at the working offset")
    return cfg.z / cfg.gamma * float(mean.deriv(cfg.offset)) / fbar


def retrieve(s, ic: IlluminationCurve, cfg: RetrievalConfig, *, stats: dict | None = None) -> np.ndarray:
    """Projected contrast from intensities at one mask offset.

    Parameters
    ----------
    s : ndarray, shape (N_t, N_theta)
        Sample intensities at ``cfg.offset``.
    ic : IlluminationCurve
        Measured flat field.
    cfg : RetrievalConfig
    stats : dict, optional
        Receives ``n_clamped``, the number of non-positive filtered values
        clamped before the logarithm.

    Returns
    -------
    ndarray, shape (N_t, N_theta)
        ``-log(filtered ratio) / gamma``.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != ic.n_pixels:
        raise ShapeError("s must be (N_t, N_theta) matching the flat field")
    n = s.shape[0]
    f_t = ic.eval(np.arange(n), np.full(n, cfg.offset))
    if np.any(f_t <= 0):
        raise DomainError("flat field is not positive at the working offset")
    ratio = s / f_t[:, None]
    a = _filter_coefficient(ic, cfg)
    if a == 0.0:
        filtered = ratio
    else:
        pad = n // 2 if cfg.pad is None else int(cfg.pad)
        padded = np.pad(ratio, ((pad, pad), (0, 0)), mode="symmetric")
        q = 2 * np.pi * np.fft.fftfreq(padded.shape[0], d=cfg.pixel_size)
        kernel = 1.0 / (1.0 + 1j * q * a)
        filtered = np.fft.ifft(np.fft.fft(padded, axis=0) * kernel[:, None], axis=0).real[pad : pad + n]
    bad = filtered <= 0
    n_bad = int(bad.sum())
    if n_bad:
        log.warning("clamped %d non-positive values before the logarithm", n_bad)
        filtered = np.where(bad, _TINY, filtered)
    if stats is not None:
        stats["n_clamped"] = n_bad
    return -np.log(filtered) / cfg.gamma


def ramp_filter(sino, pixel_size: float = 1.0, pad: int | None = None) -> np.ndarray:
    """Ram-Lak filtering along the detector axis.

    Rows are extended by repeating their edge values, then zero-padded to a
    power of two. Mirroring is avoided here: a mirrored margin of width
    ``N_t/2`` copies part of a centred object, and the slowly decaying ramp
    kernel picks that copy up. Uses the band-limited spatial kernel, whose
    transform has the correct DC term, instead of sampling ``|nu|`` directly.
    """
    sino = np.asarray(sino, dtype=np.float64)
    n = sino.shape[0]
    pad = n // 2 if pad is None else int(pad)
    padded = np.pad(sino, ((pad, pad), (0, 0)), mode="edge")
    size = 1 << int(np.ceil(np.log2(2 * padded.shape[0])))
    k = np.concatenate([np.arange(0, size // 2 + 1), np.arange(size // 2 - 1, 0, -1)])
    kern = np.zeros(size)
    kern[0] = 0.25
    odd = k % 2 == 1
    kern[odd] = -1.0 / (np.pi * k[odd]) ** 2
    response = np.fft.fft(kern).real / pixel_size**2
    spec = np.fft.fft(padded, n=size, axis=0) * response[:, None]
    return np.fft.ifft(spec, axis=0).real[pad : pad + n] * pixel_size


def fbp(projections, geom: Geometry, pad: int | None = None) -> np.ndarray:
    """Filtered backprojection for angles evenly covering a half or full turn."""
    projections = np.asarray(projections, dtype=np.float64)
    if projections.shape != geom.sino_shape:
        raise ShapeError(f"projections shape {projections.shape} does not match {geom.sino_shape}")
    if geom.n_angles < 2:
        raise ShapeError("need at least 2 angles")
    q = ramp_filter(projections, geom.pixel_size, pad)
    return radon_adjoint(q, geom) * (np.pi / geom.n_angles / geom.pixel_size)


def reconstruct(scan: ScanData, gamma: float | None = None, *, offset_index: int = 0, stats: dict | None = None) -> np.ndarray:
    """Single-shot reconstruction of ``h`` from a scan.

    ``gamma`` uses the forward-model convention (defaults to ``scan.gamma``);
    the retrieval runs with its reciprocal and the result is rescaled so the
    output is in the same units as the iterative reconstruction.
    """
    gamma = scan.gamma if gamma is None else gamma
    g = scan.geometry
    cfg = RetrievalConfig(1.0 / gamma, scan.z, float(scan.offsets[offset_index]), g.pixel_size)
    proj = retrieve(scan.s_exp[:, :, offset_index], scan.ic, cfg, stats=stats) / gamma
    return fbp(proj, g)
