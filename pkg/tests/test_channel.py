from dataclasses import replace

import numpy as np
import pytest

from cfhst.channel import (
    build_statistics, draw_realizations, estimation_matrices, hermitize, mmse_estimate,
    psd_sqrt, rician_split, sample_channel,
)
from cfhst.geometry import ScenarioConfig, build_snapshot

from conftest import small_setup


def one_pair(**kw):
    params = dict(n_aps=1, n_tas=1, antennas=2, rail_length=100.0, train_length=10.0)
    params.update(kw)
    cfg = ScenarioConfig(**params)
    snap = build_snapshot(cfg, 30.0)
    return cfg, snap, build_statistics(cfg, snap, np.random.default_rng(7))


def test_scalar_collapse():
    cfg, snap, st = one_pair(antennas=1)
    b_los, b_nlos = rician_split(cfg, snap.large_scale)
    assert abs(st.los[0, 0, 0]) ** 2 == pytest.approx(b_los[0, 0])
    assert st.corr[0, 0, 0, 0].real == pytest.approx(b_nlos[0, 0])


def test_rician_split_variants():
    cfg = ScenarioConfig()
    zeta = np.array([1.0])
    kf = cfg.rician_factor
    los, nlos = rician_split(cfg, zeta)
    assert los[0] == pytest.approx(np.sqrt(kf / (kf + 1)))
    assert nlos[0] == pytest.approx(np.sqrt(1 / (kf + 1)))
    los, nlos = rician_split(cfg.with_(rician_split="conventional"), zeta)
    assert los[0] + nlos[0] == pytest.approx(1.0)


def test_noiseless_estimation_limit():
    R = np.array([[[[2.0, 0.5], [0.5, 1.0]]]], dtype=complex)
    _, Q, C = estimation_matrices(R, np.array([1.0]), 1, 1e-14)
    np.testing.assert_allclose(Q, R, atol=1e-10)
    np.testing.assert_allclose(C, 0, atol=1e-10)


def test_scalar_half_estimate():
    R = np.array([[[[3.0]]]], dtype=complex)
    p, tau = 0.5, 2
    _, Q, C = estimation_matrices(R, np.array([p]), tau, p * tau * 3.0)
    assert Q[0, 0, 0, 0].real == pytest.approx(1.5)
    assert C[0, 0, 0, 0].real == pytest.approx(1.5)


def test_statistics_invariants(small):
    cfg, snap, st, _ = small
    N = cfg.antennas
    np.testing.assert_allclose(st.q + st.c, st.corr, atol=1e-10 * np.abs(st.corr).max())
    np.testing.assert_allclose(np.sum(np.abs(st.los) ** 2, -1), N * st.beta_los, rtol=1e-12)
    np.testing.assert_allclose(np.trace(st.corr, axis1=-2, axis2=-1).real / N, st.beta_nlos,
                               rtol=1e-12)
    for m in (st.corr, st.q, st.c):
        np.testing.assert_allclose(m, np.conj(np.swapaxes(m, -1, -2)), atol=1e-25)
        w = np.linalg.eigvalsh(m)
        assert np.all(w >= -1e-10 * np.abs(m).max())
    assert st.pilot_length == cfg.n_tas


def test_trace_q_grows_with_pilot_power(small):
    cfg, snap, _, _ = small
    lo = build_statistics(cfg, snap, np.random.default_rng(3), np.full(2, 0.1))
    hi = build_statistics(cfg, snap, np.random.default_rng(3), np.full(2, 0.2))
    tq = lambda s: np.trace(s.q, axis1=-2, axis2=-1).real
    assert np.all(tq(hi) >= tq(lo))


def test_uncorrelated_mode():
    cfg = ScenarioConfig(n_aps=3, n_tas=2, correlated=False)
    st = build_statistics(cfg, build_snapshot(cfg, 0.0), np.random.default_rng(0))
    eye = np.eye(cfg.antennas)
    np.testing.assert_allclose(st.corr, st.beta_nlos[..., None, None] * eye)


def test_rejects_indefinite_correlation(monkeypatch):
    import cfhst.channel as ch
    cfg, snap, _, _ = small_setup()
    monkeypatch.setattr(ch, "local_scattering",
                        lambda *a, **k: np.array([[1.0, 2.0], [2.0, 1.0]], dtype=complex))
    with pytest.raises(np.linalg.LinAlgError):
        build_statistics(cfg, snap, np.random.default_rng(0))


def test_psd_sqrt_clips_negative_eigenvalues():
    a = np.diag([4.0, -1e-18]).astype(complex)
    r = psd_sqrt(a)
    np.testing.assert_allclose(r @ r, np.diag([4.0, 0.0]), atol=1e-12)
    np.testing.assert_allclose(hermitize(r), r)


def test_zero_correlation_gives_pure_los():
    _, _, st = one_pair()
    st = replace(st, corr=np.zeros_like(st.corr))
    g = sample_channel(st, np.random.default_rng(0), 5)
    np.testing.assert_array_equal(g, np.broadcast_to(st.los, g.shape))


def test_channel_moments():
    _, _, st = one_pair()
    T = 100_000
    g = sample_channel(st, np.random.default_rng(1), T)
    h = g - st.los
    stderr = np.sqrt(np.real(np.diagonal(st.corr[0, 0])) / T)
    assert np.all(np.abs(g.mean(0)[0, 0] - st.los[0, 0]) < 4 * stderr * np.sqrt(2))
    cov = np.einsum("ta,tb->ab", h[:, 0, 0], h[:, 0, 0].conj()) / T
    assert np.linalg.norm(cov - st.corr[0, 0]) / np.linalg.norm(st.corr[0, 0]) < 0.05


def test_noiseless_estimate_is_exact():
    cfg, snap, _ = one_pair(correlated=False)
    st = build_statistics(cfg.with_(noise_power=0.0), snap, np.random.default_rng(0))
    rng = np.random.default_rng(2)
    g = sample_channel(st, rng, 10)
    ghat, gtilde = mmse_estimate(st, g, rng)
    np.testing.assert_allclose(ghat, g, atol=1e-12 * np.abs(g).max())


def test_estimate_and_error_moments():
    _, _, st = one_pair()
    T = 100_000
    real = draw_realizations(st, np.random.default_rng(4), T)
    np.testing.assert_array_equal(real.g, real.ghat + real.gtilde)
    hhat, gt = real.hhat[:, 0, 0], real.gtilde[:, 0, 0]
    q = np.einsum("ta,tb->ab", hhat, hhat.conj()) / T
    c = np.einsum("ta,tb->ab", gt, gt.conj()) / T
    assert np.linalg.norm(q - st.q[0, 0]) / np.linalg.norm(st.q[0, 0]) < 0.05
    assert np.linalg.norm(c - st.c[0, 0]) / np.linalg.norm(st.c[0, 0]) < 0.05
    cross = np.einsum("ta,tb->ab", hhat, gt.conj()) / T
    scale = np.sqrt(np.linalg.norm(st.q[0, 0]) * np.linalg.norm(st.c[0, 0]))
    assert np.linalg.norm(cross) / scale < 0.03
