"""Least-squares reconstruction of the combined contrast.

The cost is the squared misfit between measured and modelled intensities plus
an L2 penalty on the image::

    S = sum ((s_exp - s_mod) / I)**2 + lam * sum (h / h_unit)**2

``I`` (``SolverConfig.intensity_unit``) and ``h_unit`` fix the units in which
``lam`` is expressed. By default intensities are measured relative to the mean
flat-field value and ``h`` in 1e-4 per micrometer (per centimeter); with both
units set to 1 the cost is the plain sum of squares in native units.

Gradients are computed analytically from the intermediates of one forward
evaluation: one projection and one detector derivative going forward, one
backprojection and one derivative transpose going back.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError
from .forward_model import ModelParams, ModelState, ScanData, evaluate
from .lbfgs import minimize_lbfgs
from .projector import LookupTable, diff_t_adjoint, radon_adjoint

__all__ = [
    "SolverConfig",
    "Gradient",
    "ReconResult",
    "cost",
    "grad",
    "cost_and_grad",
    "minimize",
    "gauge_fix",
    "pack",
    "unpack",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Reconstruction settings.

    ``gamma`` overrides the scan's value when given. ``h_unit`` is the unit
    of ``h`` in the cost and in the optimizer's parameter vector (the
    optimizer sees ``h / h_unit``); offsets are always in micrometers.
    ``intensity_unit`` divides the residuals; ``None`` means the mean of the
    scan's flat-field samples.
    """

    lam: float = 1e-2
    gamma: float | None = 5.0
    max_iters: int = 200
    rel_tol: float = 1e-9
    history_size: int = 10
    ring_enabled: bool = False
    drift_enabled: bool = True
    h_unit: float = 1e-4
    intensity_unit: float | None = None
    threads: int | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise DomainError("lam must be >= 0")
        if self.gamma is not None and not self.gamma > 0:
            raise DomainError("gamma must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if self.history_size < 3:
            raise DomainError("history_size must be >= 3")
        if not self.h_unit > 0:
            raise DomainError("h_unit must be positive")
        if self.intensity_unit is not None and not self.intensity_unit > 0:
            raise DomainError("intensity_unit must be positive")


@dataclass
class Gradient:
    h: np.ndarray
    m_o: np.ndarray | None
    m_r: np.ndarray | None


@dataclass
class ReconResult:
    params: ModelParams
    cost_history: np.ndarray
    n_iterations: int
    converged: bool
    wall_time: float
    message: str = ""
    n_evaluations: int = 0
    diagnostics: dict = field(default_factory=dict)


def _scan_for(scan: ScanData, config: SolverConfig) -> ScanData:
    if config.gamma is None or config.gamma == scan.gamma:
        return scan
    return scan.with_gamma(config.gamma)


def _weights(scan: ScanData, config: SolverConfig) -> tuple[float, float]:
    """Factors multiplying the raw squared residual and ``sum(h**2)``."""
    unit = config.intensity_unit
    if unit is None:
        unit = float(np.mean(scan.ic.samples))
        if not unit > 0:
            raise DomainError("flat field has no positive mean; set intensity_unit")
    return 1.0 / unit**2, config.lam / config.h_unit**2


def _cost_from_state(state: ModelState, params: ModelParams, scan: ScanData, weights) -> float:
    w_data, w_reg = weights
    r = scan.s_exp - state.s_mod
    val = float(w_data * np.sum(r * r) + w_reg * np.sum(params.h * params.h))
    if not np.isfinite(val):
        bad = np.argwhere(~np.isfinite(r))
        where = tuple(bad[0]) if bad.size else "regularizer"
        raise NumericError(f"non-finite cost (first bad residual at index {where})")
    return val


def _grad_from_state(state: ModelState, params: ModelParams, scan: ScanData, config: SolverConfig, weights, table):
    g = scan.geometry
    w_data, w_reg = weights
    r2 = (2.0 * w_data) * (scan.s_exp - state.s_mod)
    # sensitivity to the curve argument shift: ds_mod/d(shift) = -exp(-P) f'
    w = r2 * state.attenuation[:, :, None] * state.f_prime
    w_tm = w.sum(axis=2)
    dP = (r2 * state.s_mod).sum(axis=2)
    dP[state.capped] = 0.0
    dP += diff_t_adjoint((scan.z * scan.gamma) * w_tm, g.pixel_size)
    dh = radon_adjoint(dP, g, table=table, threads=config.threads) + (2.0 * w_reg) * params.h
    dmo = w_tm.sum(axis=0) if config.drift_enabled else None
    dmr = w_tm.sum(axis=1) if config.ring_enabled else None
    for name, arr in (("h", dh), ("m_o", dmo), ("m_r", dmr)):
        if arr is not None and not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite gradient in block {name}")
    return Gradient(dh, dmo, dmr)


def cost_and_grad(
    params: ModelParams,
    scan: ScanData,
    config: SolverConfig = SolverConfig(),
    *,
    table: LookupTable | None = None,
) -> tuple[float, Gradient]:
    """Cost and its gradient from a single forward evaluation."""
    scan = _scan_for(scan, config)
    state = evaluate(params, scan, table=table, threads=config.threads)
    w = _weights(scan, config)
    return _cost_from_state(state, params, scan, w), _grad_from_state(state, params, scan, config, w, table)


def cost(params: ModelParams, scan: ScanData, config: SolverConfig = SolverConfig(), *, table=None) -> float:
    """Weighted squared misfit plus ``lam * sum((h / h_unit)**2)``."""
    scan = _scan_for(scan, config)
    state = evaluate(params, scan, table=table, threads=config.threads)
    return _cost_from_state(state, params, scan, _weights(scan, config))


def grad(params: ModelParams, scan: ScanData, config: SolverConfig = SolverConfig(), *, table=None) -> Gradient:
    """Analytic gradient with respect to ``h``, ``m_o`` and ``m_r``.

    Blocks for disabled parameters (drift or ring offsets) are ``None``.
    """
    return cost_and_grad(params, scan, config, table=table)[1]


# --------------------------------------------------------------------------
# parameter vector
# --------------------------------------------------------------------------


def pack(params: ModelParams, config: SolverConfig) -> np.ndarray:
    """Flatten the free parameters: h (row-major, in ``h_unit``), m_o, m_r."""
    parts = [params.h.ravel() / config.h_unit]
    if config.drift_enabled:
        parts.append(params.m_o)
    if config.ring_enabled:
        parts.append(params.m_r)
    return np.concatenate(parts)


def unpack(x: np.ndarray, template: ModelParams, config: SolverConfig) -> ModelParams:
    n = template.h.shape[0]
    k = n * n
    h = x[:k].reshape(n, n) * config.h_unit
    m_o = template.m_o
    if config.drift_enabled:
        m_o = x[k : k + m_o.size]
        k += m_o.size
    m_r = x[k : k + n] if config.ring_enabled else np.zeros(n)
    return ModelParams(h, m_o.copy(), m_r.copy(), ring_enabled=config.ring_enabled)


def _pack_grad(gr: Gradient, config: SolverConfig) -> np.ndarray:
    parts = [gr.h.ravel() * config.h_unit]
    if config.drift_enabled:
        parts.append(gr.m_o)
    if config.ring_enabled:
        parts.append(gr.m_r)
    return np.concatenate(parts)


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------


def gauge_fix(params: ModelParams) -> ModelParams:
    """Move the mean of ``m_r`` into ``m_o`` so that ``mean(m_r) == 0``.

    ``m_o + a`` and ``m_r - a`` give the same model for any constant ``a``;
    this picks one representative.
    """
    a = float(np.mean(params.m_r))
    if a == 0.0:
        return params.copy()
    return params.copy(m_o=params.m_o + a, m_r=params.m_r - a)


def minimize(
    scan: ScanData,
    config: SolverConfig = SolverConfig(),
    initial: ModelParams | None = None,
    *,
    table: LookupTable | None = None,
) -> ReconResult:
    """Reconstruct ``h`` (and the enabled offsets) by L-BFGS.

    Starts from ``initial`` or from all zeros. On line-search failure the
    best point so far is returned with ``converged=False``.
    """
    t0 = time.perf_counter()
    scan = _scan_for(scan, config)
    g = scan.geometry
    if initial is None:
        initial = ModelParams.zeros(g.n_pixels, g.n_angles, config.ring_enabled)
    elif initial.ring_enabled != config.ring_enabled:
        m_r = initial.m_r if config.ring_enabled else np.zeros(g.n_pixels)
        initial = initial.copy(m_r=m_r, ring_enabled=config.ring_enabled)
    n_capped = 0
    weights = _weights(scan, config)

    def fun(x):
        nonlocal n_capped
        p = unpack(x, initial, config)
        state = evaluate(p, scan, table=table, threads=config.threads)
        n_capped += state.n_capped
        val = _cost_from_state(state, p, scan, weights)
        return val, _pack_grad(_grad_from_state(state, p, scan, config, weights, table), config)

    res = minimize_lbfgs(
        fun, pack(initial, config),
        history_size=config.history_size, max_iters=config.max_iters, rel_tol=config.rel_tol,
    )
    params = unpack(res.x, initial, config)
    if config.ring_enabled:
        params = gauge_fix(params)
    diagnostics = {"capped_evaluations": n_capped}
    if not np.any(scan.s_exp):
        diagnostics["all_zero_data"] = True
        log.warning("all measured intensities are zero; the data term pushes h toward infinite attenuation")
    return ReconResult(
        params=params,
        cost_history=np.asarray(res.history),
        n_iterations=res.n_iterations,
        converged=res.converged,
        wall_time=time.perf_counter() - t0,
        message=res.message,
        n_evaluations=res.n_evaluations,
        diagnostics=diagnostics,
    )
