"""Synthetic phantoms, illumination-curve models and edge-illumination scans.

The harness keeps two versions of the flat field apart: the noiseless curve
that generates the sample data, and a separately simulated (noisy) flat-field
measurement handed to the reconstruction. When the measured flat is noisy,
its per-pixel errors are the same at every angle, which is what produces
ring artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError
from .forward_model import ModelParams, ScanData, forward
from .illumination import IlluminationCurve, ic_from_scans
from .projector import Geometry

__all__ = [
    "Disk",
    "PhantomSpec",
    "ICModel",
    "DriftSpec",
    "make_phantom",
    "granules",
    "sample_flatfield",
    "synthesize_scan",
    "Dataset",
    "PRESETS",
    "make_dataset",
]


@dataclass(frozen=True)
class Disk:
    """Disk centred at ``(x, y)`` (column, row in pixels)."""

    x: float
    y: float
    radius: float
    value: float


@dataclass(frozen=True)
class PhantomSpec:
    disks: tuple[Disk, ...] = ()
    background: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "disks", tuple(self.disks))
        for d in self.disks:
            if not d.radius > 0:
                raise DomainError("disk radius must be positive")
            if not (np.isfinite(d.value) and np.isfinite(d.x) and np.isfinite(d.y)):
                raise DomainError("disk parameters must be finite")
        if not np.isfinite(self.background):
            raise DomainError("background must be finite")


_SUB = (np.arange(4) + 0.5) / 4 - 0.5  # 4x4 subpixel offsets


def make_phantom(spec: PhantomSpec, n_pixels: int) -> np.ndarray:
    """Rasterize disks with 4x4 subpixel anti-aliasing.

    Later disks paint over earlier ones. Every disk must lie inside the
    inscribed circle of the image.
    """
    c = (n_pixels - 1) / 2.0
    img = np.full((n_pixels, n_pixels), float(spec.background))
    rows = np.arange(n_pixels)[:, None, None, None] + _SUB[None, None, :, None]
    cols = np.arange(n_pixels)[None, :, None, None] + _SUB[None, None, None, :]
    for d in spec.disks:
        if np.hypot(d.x - c, d.y - c) + d.radius > n_pixels / 2.0 + 1e-9:
            raise DomainError(f"disk at ({d.x}, {d.y}) r={d.radius} leaves the field of view")
        inside = (rows - d.y) ** 2 + (cols - d.x) ** 2 <= d.radius**2
        cover = inside.mean(axis=(2, 3))
        img = img * (1.0 - cover) + d.value * cover
    return img


# Relative contrasts loosely ordered like PMMA > PS > PP.
GRANULE_VALUES = {"PMMA": 1.2e-4, "PS": 0.95e-4, "PP": 0.8e-4}


def granules(n_pixels: int, radius_frac: float = 0.17, values: dict | None = None) -> tuple[PhantomSpec, dict]:
    """Three disks arranged on a triangle, one per material.

    Returns the spec and a mapping material -> Disk, handy for CNR regions.
    """
    values = dict(GRANULE_VALUES if values is None else values)
    c = (n_pixels - 1) / 2.0
    r = radius_frac * n_pixels
    ring = 0.5 * n_pixels - r - 0.06 * n_pixels
    disks = {}
    for k, (name, v) in enumerate(values.items()):
        a = np.pi / 2 + 2 * np.pi * k / len(values)
        disks[name] = Disk(c + ring * np.cos(a), c + ring * np.sin(a), r, v)
    return PhantomSpec(tuple(disks.values())), disks


@dataclass(frozen=True)
class ICModel:
    """Periodic Gaussian illumination curve on a constant pedestal.

    Each detector pixel gets its own peak height, scaled by ``1 + e`` with
    ``e ~ N(0, jitter)`` drawn from ``jitter_seed``; the variation is a fixed
    property of the detector, identical for flat and sample scans.
    """

    peak_counts: float = 1000.0
    pedestal_counts: float = 100.0
    width: float = 8.0  # Gaussian sigma, micrometers
    period: float = 38.0
    center: float = 19.0
    jitter: float = 0.02
    jitter_seed: int = 12345

    def __post_init__(self):
        if self.peak_counts < 0 or self.pedestal_counts < 0:
            raise DomainError("counts must be non-negative")
        if not (self.width > 0 and self.period > 0):
            raise DomainError("width and period must be positive")

    def pixel_gain(self, n_pixels: int) -> np.ndarray:
        rng = np.random.default_rng(self.jitter_seed)
        return 1.0 + self.jitter * rng.standard_normal(n_pixels)

    def mean_counts(self, n_pixels: int, m) -> np.ndarray:
        """Noiseless counts, shape ``(n_pixels,) + m.shape``."""
        m = np.asarray(m, dtype=np.float64)
        d = np.mod(m - self.center + 0.5 * self.period, self.period) - 0.5 * self.period
        shape = 0.0
        for k in (-1, 0, 1):
            shape = shape + np.exp(-0.5 * ((d + k * self.period) / self.width) ** 2)
        gain = self.pixel_gain(n_pixels).reshape((n_pixels,) + (1,) * m.ndim)
        return self.pedestal_counts + self.peak_counts * gain * shape

    def offsets(self, n_steps: int) -> np.ndarray:
        return np.arange(n_steps) * (self.period / n_steps)

    def curve(self, n_pixels: int, n_steps: int = 33) -> IlluminationCurve:
        """Noiseless curve sampled at ``n_steps`` knots."""
        off = self.offsets(n_steps)
        return IlluminationCurve(self.mean_counts(n_pixels, off), off, self.period)

    def working_offset(self, slope: float = 9.0) -> float:
        """Slope position ``slope`` micrometers past the curve maximum."""
        return float(np.mod(self.center + slope, self.period))


@dataclass(frozen=True)
class DriftSpec:
    """Mask drift over the scan: constant, linear ramp or sinusoid."""

    kind: str = "constant"
    amplitude: float = 0.0
    cycles: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "linear", "sinusoid"):
            raise DomainError(f"unknown drift kind {self.kind!r}")
        if not np.isfinite(self.amplitude):
            raise DomainError("drift amplitude must be finite")

    def offsets(self, n_angles: int) -> np.ndarray:
        frac = np.arange(n_angles) / n_angles
        if self.kind == "constant":
            return np.full(n_angles, float(self.amplitude))
        if self.kind == "linear":
            return self.amplitude * frac
        return self.amplitude * np.sin(2 * np.pi * self.cycles * frac)


def _poisson_blocks(mean: np.ndarray, seed: int, tag: int) -> np.ndarray:
    """Poisson draws with one generator per slice along axis 1.

    Block streams come from ``SeedSequence(seed, spawn_key=(tag, block))`` so
    each block's values do not depend on how the others are scheduled.
    """
    out = np.empty_like(mean)
    for b in range(mean.shape[1]):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(tag, b))))
        out[:, b] = rng.poisson(mean[:, b])
    return out


def sample_flatfield(model: ICModel, n_pixels: int, n_steps: int = 33, n_repeats: int = 1, seed: int = 0) -> np.ndarray:
    """Poisson flat-field scans, shape ``(n_pixels, n_steps, n_repeats)``."""
    if n_steps < 4:
        raise DomainError("need at least 4 mask steps")
    if n_repeats < 1:
        raise DomainError("need at least one repeat")
    mean = model.mean_counts(n_pixels, model.offsets(n_steps))
    mean = np.repeat(mean[:, :, None], n_repeats, axis=2)
    # one block per (step, repeat)
    flat = _poisson_blocks(mean.reshape(n_pixels, -1), seed, tag=1)
    return flat.reshape(n_pixels, n_steps, n_repeats)


def synthesize_scan(
    phantom: np.ndarray,
    ic_true: ICModel,
    drift: DriftSpec,
    offsets,
    geom: Geometry,
    z: float,
    gamma: float,
    seed: int = 0,
    *,
    noise: bool = True,
    n_steps: int = 33,
) -> ScanData:
    """Simulate sample intensities for ``phantom``.

    The noiseless data come from :func:`forward_model.forward` at the true
    parameters, using the noiseless curve of ``ic_true`` sampled at
    ``n_steps`` knots; Poisson noise is added on top when ``noise`` is set.
    The returned scan carries that noiseless curve; swap in a measured one
    with :meth:`ScanData.with_ic`.
    """
    offsets = np.atleast_1d(np.asarray(offsets, dtype=np.float64))
    ic = ic_true.curve(geom.n_pixels, n_steps)
    m_o = drift.offsets(geom.n_angles)
    params = ModelParams(phantom, m_o, np.zeros(geom.n_pixels))
    template = ScanData(np.zeros(geom.sino_shape + (offsets.size,)), offsets, ic, z, gamma, geom)
    clean = forward(params, template)
    s_exp = _poisson_blocks(clean, seed, tag=2) if noise else clean
    meta = {"seed": seed, "noise": noise, "drift": drift.kind, "drift_amplitude": drift.amplitude}
    return ScanData(s_exp, offsets, ic, z, gamma, geom, meta=meta)


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

PRESETS = {
    "undersampled-flat": {"flat_repeats": 1, "drift": DriftSpec()},
    "well-sampled-flat": {"flat_repeats": 20, "drift": DriftSpec()},
    "drift": {"flat_repeats": 20, "drift": DriftSpec("sinusoid", 2.0)},
}

DEFAULTS = {
    "n_pixels": 128,
    "n_angles": 360,
    "span": 2 * np.pi,
    "pixel_size": 50.0,
    "z": 600.0,
    "gamma": 5.0,
    "n_steps": 33,
    "slope": 9.0,
    "flat_counts": 200.0,
}


@dataclass(eq=False)
class Dataset:
    """Everything a reconstruction experiment needs, plus the ground truth."""

    scan: ScanData  # carries the measured flat
    phantom: np.ndarray
    true_params: ModelParams
    flat_scans: np.ndarray
    regions: dict
    config: dict = field(default_factory=dict)


def make_dataset(
    preset: str = "well-sampled-flat",
    seed: int = 0,
    *,
    noise: bool = True,
    ic_model: ICModel | None = None,
    **overrides,
) -> Dataset:
    """Build a simulated granule scan for one of :data:`PRESETS`.

    Keyword overrides replace entries of :data:`DEFAULTS` or the preset
    (``flat_repeats``, ``drift``). The flat field and the sample scan use
    independent noise streams derived from ``seed``.
    """
    if preset not in PRESETS:
        raise DomainError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    cfg = {**DEFAULTS, **PRESETS[preset]}
    unknown = set(overrides) - set(cfg)
    if unknown:
        raise DomainError(f"unknown overrides {sorted(unknown)}")
    cfg.update(overrides)
    if not cfg["flat_counts"] > 0:
        raise DomainError("flat_counts must be positive")
    model = ic_model or ICModel()
    n = int(cfg["n_pixels"])
    geom = Geometry.uniform(n, int(cfg["n_angles"]), span=float(cfg["span"]), pixel_size=cfg["pixel_size"])
    spec, disks = granules(n)
    phantom = make_phantom(spec, n)
    m_work = model.working_offset(cfg["slope"])
    scan = synthesize_scan(
        phantom, model, cfg["drift"], [m_work], geom, cfg["z"], cfg["gamma"],
        seed=2 * seed + 1, noise=noise, n_steps=cfg["n_steps"],
    )
    if noise:
        # flats are exposed to ``flat_counts`` mean counts per pixel and step,
        # then rescaled to the exposure of the sample scan
        scale = float(cfg["flat_counts"]) / float(np.mean(scan.ic.samples))
        flat_model = replace(model, peak_counts=model.peak_counts * scale, pedestal_counts=model.pedestal_counts * scale)
        flats = sample_flatfield(flat_model, n, cfg["n_steps"], cfg["flat_repeats"], seed=2 * seed)
        measured = ic_from_scans(flats / scale, model.offsets(cfg["n_steps"]), model.period)
    else:
        scale = 1.0
        flats = np.repeat(scan.ic.samples[:, :, None], cfg["flat_repeats"], axis=2)
        measured = scan.ic
    truth = ModelParams(phantom, cfg["drift"].offsets(geom.n_angles), np.zeros(n))
    cfg = {**cfg, "preset": preset, "seed": seed, "noise": noise, "working_offset": m_work, "flat_scale": scale,
           "drift": {"kind": cfg["drift"].kind, "amplitude": cfg["drift"].amplitude}}
    return Dataset(scan.with_ic(measured), phantom, truth, flats, disks, cfg)
