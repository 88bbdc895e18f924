import numba
import numpy as np
import pytest

from eitomo.errors import DomainError
from eitomo.forward_model import forward
from eitomo.projector import Geometry, radon_forward
from eitomo.simulate import (
    PRESETS,
    Disk,
    DriftSpec,
    ICModel,
    PhantomSpec,
    granules,
    make_dataset,
    make_phantom,
    sample_flatfield,
    synthesize_scan,
)

# ---- make_phantom ------------------------------------------------------------------------


def test_empty_spec_is_background():
    img = make_phantom(PhantomSpec(background=0.25), 16)
    assert np.all(img == 0.25)


def test_fully_covered_pixel_exact():
    img = make_phantom(PhantomSpec((Disk(10.0, 12.0, 4.0, 3e-4),), background=1e-5), 24)
    assert img[12, 10] == 3e-4 and img[0, 0] == 1e-5


def test_disk_area():
    img = make_phantom(PhantomSpec((Disk(31.5, 31.5, 20.0, 1.0),)), 64)
    assert abs(img.sum() / (np.pi * 20.0**2) - 1) < 0.005


def test_disk_outside_field_of_view():
    with pytest.raises(DomainError):
        make_phantom(PhantomSpec((Disk(2.0, 2.0, 5.0, 1.0),)), 32)
    with pytest.raises(DomainError):
        PhantomSpec((Disk(10.0, 10.0, 0.0, 1.0),))


def test_granules_fit_and_are_disjoint():
    spec, disks = granules(128)
    img = make_phantom(spec, 128)
    assert set(disks) == {"PMMA", "PS", "PP"}
    d = list(disks.values())
    for i in range(3):
        for j in range(i):
            assert np.hypot(d[i].x - d[j].x, d[i].y - d[j].y) > d[i].radius + d[j].radius
    assert np.isclose(img.max(), max(x.value for x in d))


# ---- sample_flatfield -----------------------------------------------------------------------


def test_dark_flat_is_zero():
    flat = sample_flatfield(ICModel(peak_counts=0.0, pedestal_counts=0.0), 8, 12, 3, seed=1)
    assert flat.shape == (8, 12, 3) and not np.any(flat)


def test_flat_mean_within_poisson_band():
    model = ICModel()
    n_rep = 200
    flat = sample_flatfield(model, 16, 33, n_rep, seed=3)
    mean = model.mean_counts(16, model.offsets(33))
    band = 3 * np.sqrt(mean / n_rep)
    inside = np.abs(flat.mean(axis=2) - mean) <= band
    assert inside.mean() > 0.99


def test_flat_determinism():
    a = sample_flatfield(ICModel(), 8, 10, 2, seed=5)
    b = sample_flatfield(ICModel(), 8, 10, 2, seed=5)
    c = sample_flatfield(ICModel(), 8, 10, 2, seed=6)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_flat_validation():
    with pytest.raises(DomainError):
        sample_flatfield(ICModel(), 8, 3)
    with pytest.raises(DomainError):
        ICModel(peak_counts=-1.0)


# ---- synthesize_scan ------------------------------------------------------------------------


def test_empty_noise_free_scan_is_flat():
    model = ICModel()
    g = Geometry.uniform(20, 6, pixel_size=50.0)
    scan = synthesize_scan(np.zeros((20, 20)), model, DriftSpec(), [3.0, 28.0], g, 600.0, 5.0, noise=False)
    want = model.curve(20).eval(np.arange(20)[:, None], np.array([3.0, 28.0])[None, :])
    for ia in range(6):
        assert np.array_equal(scan.s_exp[:, ia], want)


def test_pure_absorber_statistics():
    n = 48
    model = ICModel(peak_counts=20000.0, pedestal_counts=2000.0)
    g = Geometry.uniform(n, 40, pixel_size=50.0)
    h = make_phantom(PhantomSpec((Disk(23.5, 23.5, 15.0, 2e-4),)), n)
    # a negligible z removes refraction, leaving attenuation only
    scan = synthesize_scan(h, model, DriftSpec(), [28.0], g, 1e-9, 5.0, seed=4)
    f = model.curve(n).eval(np.arange(n), np.full(n, 28.0))[:, None]
    expect = np.exp(-radon_forward(h, g)) * f
    z = (scan.s_exp[..., 0] - expect) / np.sqrt(expect)
    assert np.mean(np.abs(z) <= 3) > 0.99 and np.max(np.abs(z)) < 6


def test_noise_free_scan_equals_forward_model():
    ds = make_dataset("drift", 2, noise=False, n_pixels=40, n_angles=30)
    assert np.array_equal(ds.scan.s_exp, forward(ds.true_params, ds.scan))


def test_working_offset_is_slope_past_maximum():
    model = ICModel()
    peak = model.curve(64).argmax_offset()
    assert abs(model.working_offset() - (peak + 9.0)) < 0.05


def test_drift_shapes():
    assert np.all(DriftSpec("constant", 1.5).offsets(4) == 1.5)
    np.testing.assert_allclose(DriftSpec("linear", 2.0).offsets(4), [0, 0.5, 1.0, 1.5])
    s = DriftSpec("sinusoid", 2.0).offsets(8)
    assert abs(s.max() - 2.0) < 1e-12 and abs(s.sum()) < 1e-12
    with pytest.raises(DomainError):
        DriftSpec("wobble")


# ---- datasets -------------------------------------------------------------------------------


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_presets(preset):
    ds = make_dataset(preset, 0, n_pixels=32, n_angles=12)
    assert ds.flat_scans.shape[2] == PRESETS[preset]["flat_repeats"]
    assert ds.scan.ic.n_repeats_averaged == PRESETS[preset]["flat_repeats"]
    assert ds.config["preset"] == preset and ds.config["seed"] == 0
    assert ds.scan.s_exp.shape == (32, 12, 1)


def test_dataset_determinism_across_threads():
    a = make_dataset("undersampled-flat", 7, n_pixels=40, n_angles=20)
    prev = numba.get_num_threads()
    numba.set_num_threads(1)
    try:
        b = make_dataset("undersampled-flat", 7, n_pixels=40, n_angles=20)
    finally:
        numba.set_num_threads(prev)
    assert np.array_equal(a.scan.s_exp, b.scan.s_exp)
    assert np.array_equal(a.flat_scans, b.flat_scans)


def test_flat_exposure_is_rescaled():
    ds = make_dataset("well-sampled-flat", 0, n_pixels=32, n_angles=8, flat_counts=50.0)
    assert abs(ds.flat_scans.mean() / 50.0 - 1) < 0.02
    np.testing.assert_allclose(ds.scan.ic.samples.mean(), ICModel().curve(32).samples.mean(), rtol=0.02)


def test_dataset_validation():
    with pytest.raises(DomainError):
        make_dataset("bogus")
    with pytest.raises(DomainError):
        make_dataset("drift", n_pix=3)
    with pytest.raises(DomainError):
        make_dataset("drift", flat_counts=0.0)
