import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eitomo.errors import DomainError, NumericError
from eitomo.forward_model import ModelParams, ScanData, forward
from eitomo.projector import call_counts, reset_call_counts
from eitomo.solver import SolverConfig, cost, cost_and_grad, gauge_fix, grad, minimize, pack, unpack

from oracles import cost_loops
from problems import fd_check, tiny_problem

NATIVE = dict(intensity_unit=1.0, h_unit=1.0)


# ---- cost ------------------------------------------------------------------------


def test_exact_fit_cost(small_scan):
    scan, truth = small_scan
    assert cost(truth, scan, SolverConfig(lam=0.0)) == 0.0
    cfg = SolverConfig(lam=0.3)
    want = 0.3 * np.sum((truth.h / cfg.h_unit) ** 2)
    assert abs(cost(truth, scan, cfg) - want) <= 1e-15 * want
    native = SolverConfig(lam=0.3, **NATIVE)
    assert cost(truth, scan, native) == 0.3 * np.sum(truth.h**2)


@pytest.mark.parametrize("seed", range(3))
def test_cost_matches_loop_oracle(seed):
    scan, p = tiny_problem(seed)
    lam = 1e3
    got = cost(p, scan, SolverConfig(lam=lam, ring_enabled=True, **NATIVE))
    ic = scan.ic
    want = cost_loops(
        p.h, p.m_o, p.m_r, scan.s_exp, ic.samples, ic.offsets, ic.period, scan.offsets,
        scan.geometry.angles, scan.z, scan.gamma, scan.geometry.pixel_size, lam,
    )
    assert abs(got - want) <= 1e-12 * want


def test_normalised_cost_is_rescaled_native_cost():
    scan, p = tiny_problem(4)
    unit = float(np.mean(scan.ic.samples))
    a = cost(p, scan, SolverConfig(lam=0.0, ring_enabled=True))
    b = cost(p, scan, SolverConfig(lam=0.0, ring_enabled=True, **NATIVE))
    assert abs(a * unit**2 - b) <= 1e-12 * b


def test_gauge_invariance_of_cost():
    scan, p = tiny_problem(5)
    cfg = SolverConfig(ring_enabled=True)
    c0 = cost(p, scan, cfg)
    for a in (-3.7, 0.01, 12.5):
        c1 = cost(p.copy(m_o=p.m_o + a, m_r=p.m_r - a), scan, cfg)
        assert abs(c1 - c0) < 1e-12 * c0


def test_non_finite_cost_raises():
    scan, p = tiny_problem(6)
    bad = ScanData(scan.s_exp * 1e200, scan.offsets, scan.ic, scan.z, scan.gamma, scan.geometry)
    with np.errstate(over="ignore"), pytest.raises(NumericError):
        cost(p, bad, SolverConfig(ring_enabled=True, **NATIVE))


# ---- gradient --------------------------------------------------------------------------


def test_exact_fit_zero_gradient(small_scan):
    scan, truth = small_scan
    gr = grad(truth, scan, SolverConfig(lam=0.0, ring_enabled=True))
    assert not np.any(gr.h) and not np.any(gr.m_o) and not np.any(gr.m_r)


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_finite_differences(seed):
    errs = fd_check(seed)
    assert max(errs.values()) < 1e-4, errs


def test_disabled_blocks_are_omitted():
    scan, p = tiny_problem(1, ring=False)
    gr = grad(p, scan, SolverConfig(ring_enabled=False, drift_enabled=False))
    assert gr.m_o is None and gr.m_r is None
    assert max(fd_check(1, ring=False, drift=False).values()) < 1e-4


def test_gauge_direction_has_zero_derivative():
    scan, p = tiny_problem(9)
    gr = grad(p, scan, SolverConfig(ring_enabled=True))
    d = gr.m_o.sum() - gr.m_r.sum()
    scale = np.abs(gr.m_o).sum() + np.abs(gr.m_r).sum()
    assert abs(d) < 1e-10 * max(scale, 1.0)


def test_one_projection_per_cost_and_gradient():
    scan, p = tiny_problem(2)
    reset_call_counts()
    cost_and_grad(p, scan, SolverConfig(ring_enabled=True))
    c = call_counts()
    assert c == {"radon_forward": 1, "diff_t": 1, "radon_adjoint": 1, "diff_t_adjoint": 1}


# ---- gauge_fix -------------------------------------------------------------------------


def test_gauge_fix_examples():
    n, na = 8, 4
    h = np.zeros((n, n))
    p = ModelParams(h, np.arange(na, dtype=float), np.array([1.0, -1.0] * 4), True)
    q = gauge_fix(p)
    assert np.array_equal(q.m_o, p.m_o) and np.array_equal(q.m_r, p.m_r)
    p = ModelParams(h, np.zeros(na), np.full(n, 2.5), True)
    q = gauge_fix(p)
    assert np.all(q.m_r == 0) and np.all(q.m_o == 2.5)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), scale=st.sampled_from([0.25, 1.0, 4.0]))
def test_gauge_fix_keeps_forward(seed, scale):
    scan, _ = tiny_problem(0)
    rng = np.random.default_rng(seed)
    # quarter-integer offsets keep the shifts exact in binary
    p = ModelParams(
        2e-4 * rng.random((8, 8)), rng.integers(-16, 16, 4) * scale, rng.integers(-16, 16, 8) * 0.25, True
    )
    q = gauge_fix(p)
    assert abs(np.mean(q.m_r)) < 1e-15
    assert np.array_equal(forward(p, scan), forward(q, scan))


def test_gauge_fix_random_reals():
    scan, p = tiny_problem(3)
    q = gauge_fix(p)
    assert abs(np.mean(q.m_r)) < 1e-14
    s0, s1 = forward(p, scan), forward(q, scan)
    assert np.max(np.abs(s0 - s1)) <= 1e-12 * np.max(np.abs(s0))


# ---- config ----------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kw", [dict(lam=-1.0), dict(max_iters=0), dict(history_size=2), dict(gamma=0.0), dict(intensity_unit=0.0)]
)
def test_config_validation(kw):
    with pytest.raises(DomainError):
        SolverConfig(**kw)


def test_pack_unpack_roundtrip():
    _, p = tiny_problem(0)
    cfg = SolverConfig(ring_enabled=True)
    x = pack(p, cfg)
    assert x.size == 64 + 4 + 8
    q = unpack(x, p, cfg)
    np.testing.assert_allclose(q.h, p.h, rtol=1e-15)
    assert np.array_equal(q.m_o, p.m_o) and np.array_equal(q.m_r, p.m_r)


# ---- minimize ----------------------------------------------------------------------------


def rms(a):
    return float(np.sqrt(np.mean(np.square(a))))


@pytest.fixture(scope="module")
def noise_free_drift():
    from eitomo.simulate import make_dataset

    return make_dataset("drift", 0, noise=False, n_pixels=64, n_angles=120)


@pytest.mark.slow
def test_noise_free_inversion():
    from eitomo.simulate import make_dataset

    ds = make_dataset("well-sampled-flat", 0, noise=False, n_pixels=64, n_angles=120)
    r = minimize(ds.scan, SolverConfig(lam=0.0, drift_enabled=False, max_iters=400))
    err = (r.params.h - ds.phantom)[2:-2, 2:-2]
    assert rms(err) < 0.02 * np.ptp(ds.phantom)
    assert np.all(r.params.m_o == 0)


@pytest.mark.slow
def test_drift_recovery(noise_free_drift):
    ds = noise_free_drift
    r = minimize(ds.scan, SolverConfig(lam=0.0, max_iters=400))
    d = r.params.m_o - ds.true_params.m_o
    true = ds.true_params.m_o - ds.true_params.m_o.mean()
    assert rms(d - d.mean()) < 0.05 * rms(true)


@pytest.mark.slow
def test_cost_history_monotone(noise_free_drift):
    r = minimize(noise_free_drift.scan, SolverConfig(max_iters=60))
    h = r.cost_history
    assert len(h) == r.n_iterations + 1
    assert np.all(np.diff(h) <= 1e-12 * h[:-1])
    assert r.wall_time > 0


@pytest.mark.slow
def test_ring_offsets_need_more_iterations():
    from eitomo.simulate import make_dataset

    ds = make_dataset("well-sampled-flat", 0, n_pixels=64, n_angles=120)
    off = minimize(ds.scan, SolverConfig())
    on = minimize(ds.scan, SolverConfig(ring_enabled=True))
    assert off.n_iterations < on.n_iterations
    assert abs(np.mean(on.params.m_r)) < 1e-12


@pytest.mark.slow
def test_regularisation_shrinks_image():
    from eitomo.simulate import make_dataset

    ds = make_dataset("undersampled-flat", 1, n_pixels=48, n_angles=90)
    energy = [float(np.sum(minimize(ds.scan, SolverConfig(lam=lam)).params.h ** 2)) for lam in (1e-3, 1e-2, 1e-1)]
    assert energy[0] >= energy[1] >= energy[2]


def test_max_iters_respected(small_scan):
    scan, _ = small_scan
    r = minimize(scan, SolverConfig(max_iters=3))
    assert r.n_iterations <= 3 and not r.converged


def test_all_zero_data_flagged(small_scan):
    scan, _ = small_scan
    zero = ScanData(np.zeros_like(scan.s_exp), scan.offsets, scan.ic, scan.z, scan.gamma, scan.geometry)
    r = minimize(zero, SolverConfig(max_iters=5))
    assert r.diagnostics["all_zero_data"]


def test_exact_start_converges_immediately(small_scan):
    scan, truth = small_scan
    r = minimize(scan, SolverConfig(lam=0.0, drift_enabled=False), initial=truth)
    assert r.cost_history[-1] == 0.0
    assert np.array_equal(r.params.h, truth.h)
