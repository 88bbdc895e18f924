"""Edge-illumination forward model.

The sample attenuates the beam by ``exp(-P)`` and refraction shifts the
illumination curve by ``z * gamma * dP/dt``, where ``P = R[h]`` is the
projection of the combined contrast. Two nuisance offsets enter the curve
argument as well: a per-angle mask drift ``m_o`` and a per-pixel ring offset
``m_r``::

    s_mod(t, theta, m) = exp(-P) * f(t, m - m_o(theta) - m_r(t) - z*gamma*D)

with ``D = diff_t(P)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, ShapeError
from .illumination import IlluminationCurve
from .projector import Geometry, LookupTable, diff_t, radon_forward

__all__ = ["ModelParams", "ScanData", "ModelState", "evaluate", "forward", "residual", "ATTENUATION_CAP"]

log = logging.getLogger(__name__)

# Projections above this are clipped before exponentiation.
ATTENUATION_CAP = 50.0


@dataclass(eq=False)
class ModelParams:
    """Unknowns of the forward model.

    ``h`` is the image (inverse micrometers), ``m_o`` the per-angle drift and
    ``m_r`` the per-pixel ring offset, both in micrometers. With
    ``ring_enabled`` false, ``m_r`` is held at zero.
    """

    h: np.ndarray
    m_o: np.ndarray
    m_r: np.ndarray
    ring_enabled: bool = False

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.float64)
        self.m_o = np.asarray(self.m_o, dtype=np.float64)
        self.m_r = np.asarray(self.m_r, dtype=np.float64)
        if self.h.ndim != 2 or self.h.shape[0] != self.h.shape[1]:
            raise ShapeError("h must be a square 2D array")
        if self.m_r.shape != (self.h.shape[0],):
            raise ShapeError("m_r must have one entry per detector pixel")
        if self.m_o.ndim != 1:
            raise ShapeError("m_o must be 1D")
        if not self.ring_enabled and np.any(self.m_r != 0):
            raise DomainError("m_r must be zero when ring suppression is disabled")

    @classmethod
    def zeros(cls, n_pixels: int, n_angles: int, ring_enabled: bool = False) -> "ModelParams":
        return cls(np.zeros((n_pixels, n_pixels)), np.zeros(n_angles), np.zeros(n_pixels), ring_enabled)

    def copy(self, **changes) -> "ModelParams":
        out = replace(self, h=self.h.copy(), m_o=self.m_o.copy(), m_r=self.m_r.copy())
        return replace(out, **changes) if changes else out


@dataclass(eq=False)
class ScanData:
    """A measured (or simulated) edge-illumination scan of one slice.

    Attributes
    ----------
    s_exp : ndarray, shape (N_t, N_theta, N_m)
        Sample intensities at each mask offset used.
    offsets : ndarray, shape (N_m,)
        Mask offsets of the sample scan, micrometers.
    ic : IlluminationCurve
        Flat-field curve used to model the data.
    z : float
        Sample-to-detector distance, micrometers.
    gamma : float
        Assumed ratio linking refraction and attenuation, micrometers.
    geometry : Geometry
    """

    s_exp: np.ndarray
    offsets: np.ndarray
    ic: IlluminationCurve
    z: float
    gamma: float
    geometry: Geometry
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.s_exp = np.asarray(self.s_exp, dtype=np.float64)
        self.offsets = np.atleast_1d(np.asarray(self.offsets, dtype=np.float64))
        if self.s_exp.ndim == 2:
            self.s_exp = self.s_exp[..., None]
        g = self.geometry
        if self.s_exp.shape != (g.n_pixels, g.n_angles, self.offsets.size):
            raise ShapeError(
                f"s_exp shape {self.s_exp.shape} does not match "
                f"({g.n_pixels}, {g.n_angles}, {self.offsets.size})"
            )
        if self.ic.n_pixels != g.n_pixels:
            raise ShapeError("illumination curve has the wrong number of pixels")
        if not self.z > 0 or not self.gamma > 0:
            raise DomainError("z and gamma must be positive")
        if not np.all(np.isfinite(self.s_exp)):
            raise DomainError("s_exp contains non-finite values")

    def with_ic(self, ic: IlluminationCurve) -> "ScanData":
        return replace(self, ic=ic)

    def with_gamma(self, gamma: float) -> "ScanData":
        return replace(self, gamma=gamma)

    def subset_angles(self, index) -> "ScanData":
        """Scan restricted to a subset of projection angles."""
        return replace(self, s_exp=self.s_exp[:, index], geometry=self.geometry.subset(index))


@dataclass(eq=False)
class ModelState:
    """Intermediates of one forward evaluation, reused by the gradient."""

    projection: np.ndarray  # P, (N_t, N_theta)
    derivative: np.ndarray  # D, (N_t, N_theta)
    attenuation: np.ndarray  # exp(-min(P, cap)), (N_t, N_theta)
    f: np.ndarray  # (N_t, N_theta, N_m)
    f_prime: np.ndarray  # (N_t, N_theta, N_m)
    s_mod: np.ndarray  # (N_t, N_theta, N_m)
    capped: np.ndarray  # bool mask of clipped projections
    n_capped: int


def _check_params(params: ModelParams, scan: ScanData) -> None:
    g = scan.geometry
    if params.h.shape != g.image_shape or params.m_o.shape != (g.n_angles,):
        raise ShapeError("parameters do not match the scan geometry")
    for name in ("h", "m_o", "m_r"):
        if not np.all(np.isfinite(getattr(params, name))):
            raise DomainError(f"{name} contains non-finite values")


def evaluate(
    params: ModelParams,
    scan: ScanData,
    *,
    table: LookupTable | None = None,
    threads: int | None = None,
) -> ModelState:
    """Evaluate the forward model with one projection and one derivative call."""
    _check_params(params, scan)
    g = scan.geometry
    P = radon_forward(params.h, g, table=table, threads=threads)
    D = diff_t(P, g.pixel_size)
    capped = P > ATTENUATION_CAP
    n_capped = int(capped.sum())
    if n_capped:
        log.warning("attenuation cap active on %d projection values", n_capped)
    att = np.exp(-np.minimum(P, ATTENUATION_CAP))
    shift = params.m_o[None, :] + params.m_r[:, None] + (scan.z * scan.gamma) * D
    arg = scan.offsets[None, None, :] - shift[:, :, None]
    t = np.arange(g.n_pixels)[:, None, None]
    f, fp = scan.ic.eval_with_deriv(t, arg)
    s_mod = att[:, :, None] * f
    return ModelState(P, D, att, f, fp, s_mod, capped, n_capped)


def forward(params: ModelParams, scan: ScanData, **kwargs) -> np.ndarray:
    """Model intensities ``s_mod`` with shape (N_t, N_theta, N_m)."""
    return evaluate(params, scan, **kwargs).s_mod


def residual(scan: ScanData, s_mod) -> np.ndarray:
    """``s_exp - s_mod``."""
    s_mod = np.asarray(s_mod, dtype=np.float64)
    if s_mod.shape != scan.s_exp.shape:
        raise ShapeError(f"s_mod shape {s_mod.shape} does not match s_exp {scan.s_exp.shape}")
    return scan.s_exp - s_mod
