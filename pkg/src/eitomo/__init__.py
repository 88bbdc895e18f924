"""Iterative and single-shot tomographic reconstruction for edge-illumination X-ray imaging."""

import os as _os

import numba as _numba

# Prefer OpenMP over TBB: old TBB builds make numba warn on every first launch.
if "NUMBA_THREADING_LAYER" not in _os.environ and "NUMBA_THREADING_LAYER_PRIORITY" not in _os.environ:
    _numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

from .errors import DomainError, NumericError, ResourceError, ShapeError
from .forward_model import ModelParams, ScanData, evaluate, forward, residual
from .illumination import IlluminationCurve, ic_from_scans, smooth_ic
from .metrics import CNR, Circle, central_crop, cnr, frc, resolution_from_frc, ring_score
from .projector import Geometry, LookupTable, build_lookup, diff_t, diff_t_adjoint, radon_adjoint, radon_forward
from .simulate import DriftSpec, ICModel, PhantomSpec, make_dataset, make_phantom, sample_flatfield, synthesize_scan
from .singleshot import RetrievalConfig, fbp, reconstruct, retrieve
from .solver import ReconResult, SolverConfig, cost, cost_and_grad, gauge_fix, grad, minimize

__version__ = "0.1.0"

__all__ = [
    "CNR",
    "Circle",
    "DomainError",
    "DriftSpec",
    "Geometry",
    "ICModel",
    "IlluminationCurve",
    "LookupTable",
    "ModelParams",
    "NumericError",
    "PhantomSpec",
    "ReconResult",
    "ResourceError",
    "RetrievalConfig",
    "ScanData",
    "ShapeError",
    "SolverConfig",
    "build_lookup",
    "central_crop",
    "cnr",
    "cost",
    "cost_and_grad",
    "diff_t",
    "diff_t_adjoint",
    "evaluate",
    "fbp",
    "forward",
    "frc",
    "gauge_fix",
    "grad",
    "ic_from_scans",
    "make_dataset",
    "make_phantom",
    "minimize",
    "radon_adjoint",
    "radon_forward",
    "reconstruct",
    "residual",
    "resolution_from_frc",
    "retrieve",
    "ring_score",
    "sample_flatfield",
    "smooth_ic",
    "synthesize_scan",
]
