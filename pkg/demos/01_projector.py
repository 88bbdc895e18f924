"""The Radon operator pair and its two implementations.

Run with ``python demos/01_projector.py``. Prints the adjoint dot test, the
agreement of the lookup-table and on-the-fly projectors, and how their
memory requirements scale.
"""

import time

import numpy as np

from eitomo.projector import Geometry, build_lookup, lookup_memory_bytes, radon_adjoint, radon_forward

rng = np.random.default_rng(0)
geom = Geometry.uniform(128, 180, pixel_size=50.0)

# %% Forward and adjoint are exact transposes of each other.
x = rng.standard_normal(geom.image_shape)
y = rng.standard_normal(geom.sino_shape)
lhs = np.vdot(radon_forward(x, geom), y)
rhs = np.vdot(x, radon_adjoint(y, geom))
print(f"<Rx, y> = {lhs:.6f}   <x, R^T y> = {rhs:.6f}   relative gap {abs(lhs - rhs) / abs(lhs):.1e}")

# %% A lookup table stores every interpolation stencil; same numbers, more memory.
table = build_lookup(geom)
same = np.array_equal(radon_forward(x, geom), radon_forward(x, geom, table=table))
print(f"lookup and on-the-fly forward projections identical: {same}")
print(f"table size for 128 x 180: {table.memory_bytes / 2**20:.0f} MiB")

for n in (64, 128, 256, 360):
    mem = lookup_memory_bytes(Geometry.uniform(n, n // 2))
    print(f"  N_t={n:4d}, N_theta={n // 2:4d}: lookup table would need {mem / 2**30:6.3f} GiB")

# %% Timing (single call, after compilation).
for label, tab in (("on-the-fly", None), ("lookup", table)):
    radon_forward(x, geom, table=tab)
    t0 = time.perf_counter()
    radon_forward(x, geom, table=tab)
    print(f"{label:>10s} forward: {1e3 * (time.perf_counter() - t0):.1f} ms")
