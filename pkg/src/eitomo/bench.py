"""Timing and memory comparison of the two Radon projector variants."""

from __future__ import annotations

import csv
import time
import tracemalloc
from pathlib import Path

import numba
import numpy as np

from .errors import DomainError, ResourceError
from .projector import DEFAULT_LOOKUP_BUDGET, Geometry, build_lookup, lookup_memory_bytes, radon_adjoint, radon_forward

__all__ = ["FIELDS", "parse_sizes", "run_benchmark", "write_csv"]

FIELDS = [
    "n_pixels",
    "n_angles",
    "variant",
    "threads",
    "status",
    "forward_s",
    "adjoint_s",
    "build_s",
    "persistent_bytes",
    "forward_aux_bytes",
    "adjoint_aux_bytes",
    "max_abs_diff",
]


def parse_sizes(text: str) -> list[tuple[int, int]]:
    """``"128x180,256x360"`` -> ``[(128, 180), (256, 360)]``."""
    sizes = []
    for part in text.split(","):
        try:
            n, a = part.lower().split("x")
            sizes.append((int(n), int(a)))
        except ValueError:
            raise DomainError(f"size {part!r} is not of the form NxA") from None
    if not sizes or any(n < 2 or a < 1 for n, a in sizes):
        raise DomainError("sizes must be positive, e.g. 128x180")
    return sizes


def _measure(fn, out_bytes: int) -> int:
    """Peak traced allocation during ``fn()`` beyond its output array."""
    tracemalloc.start()
    tracemalloc.reset_peak()
    try:
        fn()
        peak = tracemalloc.get_traced_memory()[1]
    finally:
        tracemalloc.stop()
    return max(0, peak - out_bytes)


def _best_time(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return float(best)


def run_benchmark(sizes, threads=(1,), variants=("lookup", "onthefly"), *, repeats: int = 3,
                  budget_bytes: int = DEFAULT_LOOKUP_BUDGET, seed: int = 0) -> list[dict]:
    """Time forward and adjoint projections for every size, thread count and variant.

    Memory columns: ``persistent_bytes`` is state kept between calls (the
    lookup table, or the angle cosines and sines for the on-the-fly variant);
    the ``*_aux_bytes`` columns are the peak of everything else allocated
    during one call, excluding the returned array. Lookup tables larger than
    ``budget_bytes`` are not built; their rows have status ``over-budget``.
    """
    for v in variants:
        if v not in ("lookup", "onthefly"):
            raise DomainError(f"unknown variant {v!r}")
    rows = []
    rng = np.random.default_rng(seed)
    max_threads = numba.config.NUMBA_NUM_THREADS
    for n, n_ang in sizes:
        geom = Geometry.uniform(n, n_ang)
        image = rng.random((n, n))
        sino = rng.random(geom.sino_shape)
        img_bytes, sino_bytes = image.nbytes, sino.nbytes
        reference = radon_forward(image, geom)
        radon_adjoint(sino, geom)
        table = None
        build_s = np.nan
        if "lookup" in variants:
            try:
                t0 = time.perf_counter()
                table = build_lookup(geom, budget_bytes)
                build_s = time.perf_counter() - t0
            except ResourceError:
                table = None
        for variant in variants:
            for nt in threads:
                eff = max(1, min(int(nt), max_threads))
                row = {"n_pixels": n, "n_angles": n_ang, "variant": variant, "threads": eff}
                if variant == "lookup" and table is None:
                    row.update(status="over-budget", persistent_bytes=lookup_memory_bytes(geom),
                               forward_s=np.nan, adjoint_s=np.nan, build_s=np.nan,
                               forward_aux_bytes=np.nan, adjoint_aux_bytes=np.nan, max_abs_diff=np.nan)
                    rows.append(row)
                    continue
                tab = table if variant == "lookup" else None

                def fwd():
                    return radon_forward(image, geom, table=tab, threads=eff)

                def adj():
                    return radon_adjoint(sino, geom, table=tab, threads=eff)

                out = fwd()
                adj()
                row.update(
                    status="ok",
                    forward_s=_best_time(fwd, repeats),
                    adjoint_s=_best_time(adj, repeats),
                    build_s=build_s if variant == "lookup" else 0.0,
                    persistent_bytes=tab.memory_bytes if tab is not None else 2 * geom.n_angles * 8,
                    forward_aux_bytes=_measure(fwd, sino_bytes),
                    adjoint_aux_bytes=_measure(adj, img_bytes),
                    max_abs_diff=float(np.max(np.abs(out - reference))),
                )
                rows.append(row)
        del table
    return rows


def write_csv(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in FIELDS})
    return path
