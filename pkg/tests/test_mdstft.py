import numpy as np
import pytest

from adaptive_stft import metrics
from adaptive_stft.mdstft import (
    dft_matrix,
    dstft_fixed,
    frame_windows,
    kaiser_stft,
    magnitude,
    mdstft,
    mdstft_backward,
    stft,
)
from adaptive_stft.signalgen import frame_signal
from adaptive_stft.window import WindowParams


def _frames(n_frames=8, support=32, seed=0):
    return np.random.default_rng(seed).standard_normal((n_frames, support))


def test_shapes_and_bins():
    fm = frame_signal(np.random.default_rng(1).standard_normal(1024), 128, 16)
    spec = kaiser_stft(fm, 8.0, 1024.0)
    assert spec.coeffs.shape == (fm.n_frames, 65)
    assert spec.hop == 16
    np.testing.assert_allclose(spec.frequencies()[[0, -1]], [0.0, 512.0])


def test_direct_matches_fft_path():
    x = _frames(10, 128)
    w = np.hanning(128)
    np.testing.assert_allclose(stft(x, w).coeffs, stft(x, w, method="fft").coeffs, atol=1e-9)


def test_dft_matrix_read_only():
    with pytest.raises(ValueError):
        dft_matrix(8)[0, 0] = 0


def test_sinusoid_peak_bin():
    t = np.arange(1024) / 1024.0
    fm = frame_signal(np.sin(2 * np.pi * 64 * t), 128, 16)
    mag = magnitude(kaiser_stft(fm, 8.0, 1024.0))
    assert np.all(np.argmax(mag, axis=1) == 8)


def test_reduction_chain():
    x = _frames(12, 128, seed=3)
    params = WindowParams.full(12, 128, 16, 8.0)
    a = mdstft(x, params).coeffs
    b = dstft_fixed(x, 128.0, 8.0).coeffs
    c = kaiser_stft(x, 8.0).coeffs
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, c)


def test_dstft_theta_range():
    with pytest.raises(ValueError):
        dstft_fixed(_frames(), 0.5, 8.0)
    with pytest.raises(ValueError):
        dstft_fixed(_frames(), 33.0, 8.0)


def test_mdstft_validates_shapes():
    with pytest.raises(ValueError, match="window lengths"):
        mdstft(_frames(8, 32), WindowParams.full(7, 32, 4))
    with pytest.raises(ValueError, match="support"):
        mdstft(_frames(8, 32), WindowParams.full(8, 64, 4))


def test_magnitude_examples():
    np.testing.assert_array_equal(magnitude(np.array([3 + 0j, 3 + 4j, 0j])), [3.0, 5.0, 0.0])


def test_parseval_per_frame():
    n = 64
    x = _frames(5, n, seed=4)
    params = WindowParams(np.array([10.0, 20.5, 33.3, 50.0, 64.0]), 8.0, n, 8)
    spec = mdstft(x, params, soft_width=2.0)
    _, _, w = frame_windows(5, params, 2.0)
    full = np.fft.fft(x * w, axis=1)
    np.testing.assert_allclose(full[:, : n // 2 + 1], spec.coeffs, atol=1e-10)
    two_sided = np.sum(np.abs(full) ** 2, axis=1)
    np.testing.assert_allclose(two_sided, n * np.sum((x * w) ** 2, axis=1), rtol=1e-9)


def test_batched_frames_share_parameters():
    x = np.stack([_frames(6, 32, seed=s) for s in range(3)])
    params = WindowParams(np.linspace(5, 32, 6), 8.0, 32, 4)
    batched = mdstft(x, params, 2.0).coeffs
    for b in range(3):
        np.testing.assert_array_equal(batched[b], mdstft(x[b], params, 2.0).coeffs)


def test_zero_upstream_gives_zero_gradient():
    x = _frames()
    params = WindowParams(np.linspace(4, 32, 8), 8.0, 32, 4)
    up = np.zeros((8, 17))
    np.testing.assert_array_equal(mdstft_backward(x, params, 2.0, up).d_lengths, np.zeros(8))


def test_locality_of_frame_gradient():
    x = _frames()
    params = WindowParams(np.linspace(4, 32, 8), 8.0, 32, 4)
    up = np.random.default_rng(2).standard_normal((8, 17))
    up[3] = 0.0
    g = mdstft_backward(x, params, 2.0, up).d_lengths
    assert g[3] == 0.0
    assert np.count_nonzero(g) > 5


def _loss(x, lengths, soft, weights):
    params = WindowParams(lengths, 8.0, x.shape[-1], 4)
    return float(np.sum(weights * magnitude(mdstft(x, params, soft))))


@pytest.mark.parametrize("seed", range(3))
def test_backward_matches_finite_differences_linear_loss(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((8, 32))
    lengths = rng.uniform(6, 31, 8)
    weights = rng.standard_normal((8, 17))
    params = WindowParams(lengths, 8.0, 32, 4)
    g = mdstft_backward(x, params, 2.0, weights).d_lengths
    h = 1e-3
    fd = np.array([
        (_loss(x, lengths + h * e, 2.0, weights) - _loss(x, lengths - h * e, 2.0, weights)) / (2 * h)
        for e in np.eye(8)])
    np.testing.assert_allclose(g, fd, rtol=1e-3, atol=1e-6)


def test_backward_bsq_chain():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((8, 32))
    lengths = rng.uniform(6, 31, 8)
    params = WindowParams(lengths, 8.0, 32, 4)
    mag = magnitude(mdstft(x, params, 2.0))
    g = mdstft_backward(x, params, 2.0, metrics.bsq_grad(mag)).d_lengths

    def f(lens):
        return metrics.bsq_loss(magnitude(mdstft(x, WindowParams(lens, 8.0, 32, 4), 2.0)))

    h = 1e-3
    fd = np.array([(f(lengths + h * e) - f(lengths - h * e)) / (2 * h) for e in np.eye(8)])
    np.testing.assert_allclose(g, fd, rtol=1e-3, atol=1e-8)


def test_beta_gradient():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((4, 16))
    weights = rng.standard_normal((4, 9))
    lengths = np.array([5.0, 9.5, 12.0, 16.0])

    def f(beta):
        return float(np.sum(weights * magnitude(mdstft(x, WindowParams(lengths, beta, 16, 4), 2.0))))

    g = mdstft_backward(x, WindowParams(lengths, 6.0, 16, 4), 2.0, weights, with_beta=True).d_beta
    h = 1e-5
    assert g == pytest.approx((f(6.0 + h) - f(6.0 - h)) / (2 * h), rel=1e-5)
