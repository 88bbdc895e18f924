import os

# Thread-independence tests need more than one numba thread even on a
# single-core machine; this must happen before numba is imported.
os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_scan():
    """Noise-free 24-pixel scan with mild contrast, shared by solver tests."""
    from eitomo.forward_model import ModelParams, ScanData, forward
    from eitomo.projector import Geometry
    from eitomo.simulate import ICModel

    n, na = 24, 36
    g = Geometry.uniform(n, na, span=2 * np.pi, pixel_size=50.0)
    ic = ICModel().curve(n)
    yy, xx = np.mgrid[:n, :n] - (n - 1) / 2
    h = 1e-4 * np.exp(-(xx**2 + yy**2) / (2 * 4.0**2))
    template = ScanData(np.zeros((n, na, 1)), [28.0], ic, 600.0, 5.0, g)
    truth = ModelParams(h, np.zeros(na), np.zeros(n))
    return ScanData(forward(truth, template), [28.0], ic, 600.0, 5.0, g), truth


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
