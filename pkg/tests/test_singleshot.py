import numpy as np
import pytest

from eitomo.errors import DomainError, ShapeError
from eitomo.forward_model import ModelParams, ScanData, forward
from eitomo.illumination import IlluminationCurve
from eitomo.projector import Geometry, radon_forward
from eitomo.simulate import Disk, ICModel, PhantomSpec, make_phantom
from eitomo.singleshot import RetrievalConfig, fbp, reconstruct, retrieve

PERIOD = 38.0


def symmetric_ic(n_pix, n_steps=32):
    """Curve symmetric about the knot at m = 0, so its mean slope there is exactly 0."""
    k = np.arange(n_steps)
    dist = np.minimum(k, n_steps - k)
    row = 100 + 900 * np.exp(-(dist / 5.0) ** 2)
    gain = 1 + 0.02 * np.sin(np.arange(n_pix))[:, None]
    return IlluminationCurve(row[None, :] * gain, k * (PERIOD / n_steps), PERIOD)


def disk_sinogram(n, radius, value, angles, ps):
    c = (n - 1) / 2
    u = (np.arange(n) - c) * ps
    chord = 2 * np.sqrt(np.clip((radius * ps) ** 2 - u**2, 0, None))
    return np.repeat((value * chord)[:, None], len(angles), axis=1)


# ---- retrieve ---------------------------------------------------------------------------


def test_no_sample_retrieves_zero():
    ic = ICModel().curve(40)
    cfg = RetrievalConfig(gamma=0.2, z=600.0, offset=28.0, pixel_size=50.0)
    s = np.repeat(ic.eval(np.arange(40), np.full(40, 28.0))[:, None], 7, axis=1)
    assert np.max(np.abs(retrieve(s, ic, cfg))) < 1e-12


def test_pure_absorber_reduces_to_log():
    ic = symmetric_ic(24)
    cfg = RetrievalConfig(gamma=0.2, z=600.0, offset=0.0, pixel_size=50.0)
    assert ic.mean().deriv(0.0) == 0.0
    rng = np.random.default_rng(0)
    f = ic.samples[:, 0]
    s = f[:, None] * rng.uniform(0.3, 1.0, (24, 5))
    want = -np.log(s / f[:, None]) / 0.2
    assert np.max(np.abs(retrieve(s, ic, cfg) - want)) < 1e-10


def test_constant_ratio_passes_dc_unchanged():
    ic = ICModel().curve(32)
    cfg = RetrievalConfig(gamma=0.2, z=600.0, offset=28.0, pixel_size=50.0)
    f = ic.eval(np.arange(32), np.full(32, 28.0))
    out = retrieve(0.8 * f[:, None] * np.ones((1, 3)), ic, cfg)
    np.testing.assert_allclose(out, -np.log(0.8) / 0.2, rtol=1e-13)


def weak_pair(amp):
    ic = ICModel().curve(64)
    cfg = RetrievalConfig(gamma=0.2, z=600.0, offset=28.0, pixel_size=50.0)
    f = ic.eval(np.arange(64), np.full(64, 28.0))[:, None]
    rng = np.random.default_rng(11)
    e1, e2 = rng.uniform(-amp / 2, amp / 2, (2, 64, 4))
    h1 = retrieve(f * (1 + e1), ic, cfg)
    h2 = retrieve(f * (1 + e2), ic, cfg)
    h12 = retrieve(f * (1 + e1 + e2), ic, cfg)
    return np.max(np.abs(h12 - h1 - h2)) / np.max(np.abs(h12))


def test_weak_signal_linearity():
    # |s/f - 1| < 1e-3; the logarithm's quadratic term is ~amp/2 relative
    assert weak_pair(1e-3) < 1e-5


def test_weak_signal_linearity_small_amplitude():
    assert weak_pair(1e-5) < 1e-5


def test_retrieve_clamps_and_counts():
    ic = ICModel().curve(16)
    cfg = RetrievalConfig(gamma=0.2, z=600.0, offset=28.0, pixel_size=50.0)
    s = np.ones((16, 2))
    s[5, 0] = -50.0
    stats = {}
    out = retrieve(s, ic, cfg, stats=stats)
    assert stats["n_clamped"] >= 1 and np.all(np.isfinite(out))


def test_retrieve_validation():
    ic = ICModel().curve(16)
    with pytest.raises(DomainError):
        RetrievalConfig(gamma=0.0, z=1.0, offset=0.0)
    with pytest.raises(ShapeError):
        retrieve(np.ones((15, 2)), ic, RetrievalConfig(1.0, 1.0, 28.0))
    dark = IlluminationCurve(np.zeros((16, 8)), np.arange(8) * 4.75, 38.0)
    with pytest.raises(DomainError):
        retrieve(np.ones((16, 2)), dark, RetrievalConfig(1.0, 1.0, 0.0))


# ---- fbp --------------------------------------------------------------------------------


def test_fbp_zero():
    g = Geometry.uniform(32, 10)
    assert not np.any(fbp(np.zeros(g.sino_shape), g))


def test_fbp_analytic_disk():
    n, ps, value, radius = 128, 50.0, 1e-4, 32.0
    g = Geometry.uniform(n, 180, pixel_size=ps)
    img = fbp(disk_sinogram(n, radius, value, g.angles, ps), g)
    c = (n - 1) / 2
    yy, xx = np.mgrid[:n, :n]
    interior = np.hypot(yy - c, xx - c) < radius - 3
    assert abs(img[interior].mean() / value - 1) < 0.03


def smooth_image(n):
    c = (n - 1) / 2
    yy, xx = np.mgrid[:n, :n]
    return np.exp(-((yy - c - 8) ** 2 + (xx - c + 5) ** 2) / (2 * 10.0**2)) + 0.5 * np.exp(
        -((yy - c + 12) ** 2 + (xx - c - 10) ** 2) / (2 * 6.0**2)
    )


def roundtrip_error(n_angles, n=128):
    x = smooth_image(n)
    g = Geometry.uniform(n, n_angles, pixel_size=50.0)
    y = fbp(radon_forward(x, g), g)
    c = (n - 1) / 2
    yy, xx = np.mgrid[:n, :n]
    inside = np.hypot(yy - c, xx - c) <= n / 2
    return np.linalg.norm((y - x)[inside]) / np.linalg.norm(x[inside])


def test_fbp_roundtrip():
    assert roundtrip_error(180) < 0.05


def test_fbp_roundtrip_improves_with_angles():
    errs = [roundtrip_error(k) for k in (45, 90, 180)]
    assert errs[0] > errs[1] > errs[2]


def test_fbp_full_turn_matches_half_turn():
    n = 64
    x = smooth_image(n)
    half = Geometry.uniform(n, 90, span=np.pi)
    full = Geometry.uniform(n, 180, span=2 * np.pi)
    a = fbp(radon_forward(x, half), half)
    b = fbp(radon_forward(x, full), full)
    assert np.linalg.norm(a - b) / np.linalg.norm(a) < 0.02


def test_fbp_errors():
    g = Geometry.uniform(16, 1)
    with pytest.raises(ShapeError):
        fbp(np.zeros((16, 1)), g)
    with pytest.raises(ShapeError):
        fbp(np.zeros((16, 3)), Geometry.uniform(16, 4))


# ---- end to end ---------------------------------------------------------------------------


def test_disk_end_to_end_gamma_5():
    n, value = 128, 1e-4
    g = Geometry.uniform(n, 180, pixel_size=50.0)
    model = ICModel()
    ic = model.curve(n)
    m = model.working_offset()
    h = make_phantom(PhantomSpec((Disk(63.5, 63.5, 28.0, value),)), n)
    template = ScanData(np.zeros((n, 180, 1)), [m], ic, 600.0, 5.0, g)
    scan = ScanData(forward(ModelParams(h, np.zeros(180), np.zeros(n)), template), [m], ic, 600.0, 5.0, g)
    img = reconstruct(scan)
    c = (n - 1) / 2
    yy, xx = np.mgrid[:n, :n]
    interior = np.hypot(yy - c, xx - c) < 28.0 - 4
    assert abs(img[interior].mean() / value - 1) < 0.05


def test_reconstruct_no_sample():
    n = 64
    g = Geometry.uniform(n, 60, span=2 * np.pi, pixel_size=50.0)
    ic = ICModel().curve(n)
    f = ic.eval(np.arange(n), np.full(n, 28.0))
    scan = ScanData(np.repeat(f[:, None], 60, axis=1), [28.0], ic, 600.0, 5.0, g)
    assert np.max(np.abs(reconstruct(scan))) < 1e-10
