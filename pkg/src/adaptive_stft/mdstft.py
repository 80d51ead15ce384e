"""Forward and backward passes for the fixed and per-frame-window STFTs.

All transforms accept frames of shape ``(..., n_T, N)``; leading axes are a
batch that shares one set of window parameters. Spectra are one-sided with
``N // 2 + 1`` bins and computed as an explicit DFT matrix product so the
backward pass is just the conjugate transpose.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .signalgen import FrameMatrix
from .window import (
    WindowParams,
    kaiser_window,
    mask_matrix,
    modulated_kaiser,
    resampled_time,
    window_grad_wrt_beta,
    window_grad_wrt_length,
)

MAG_EPS = 1e-12


@dataclass
class Spectrogram:
    coeffs: np.ndarray
    support: int
    hop: int
    sample_rate: float

    @property
    def n_bins(self) -> int:
        return self.coeffs.shape[-1]

    def magnitude(self) -> np.ndarray:
        return magnitude(self)

    def frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.sample_rate / self.support


@dataclass
class SpectrogramGrad:
    d_lengths: np.ndarray
    d_beta: float | None = None


@lru_cache(maxsize=16)
def dft_matrix(support: int) -> np.ndarray:
    """``N x (N//2 + 1)`` matrix with entries ``exp(-2j*pi*f*n/N)``."""
    n = np.arange(support)[:, None]
    f = np.arange(support // 2 + 1)[None, :]
    # reduce f*n mod N first so large products keep full phase accuracy
    mat = np.exp(-2j * np.pi * ((f * n) % support) / support)
    mat.setflags(write=False)
    return mat


def _frames_array(frames) -> np.ndarray:
    return frames.frames if isinstance(frames, FrameMatrix) else np.asarray(frames, dtype=float)


def _hop_of(frames, default: int) -> int:
    return frames.hop if isinstance(frames, FrameMatrix) else default


def _dft(windowed: np.ndarray, method: str) -> np.ndarray:
    if method == "direct":
        return windowed @ dft_matrix(windowed.shape[-1])
    if method == "fft":
        return np.fft.rfft(windowed, axis=-1)
    raise ValueError(f"unknown DFT method {method!r}")


def stft(frames, window, sample_rate: float = 1.0, method: str = "direct") -> Spectrogram:
    """Windowed one-sided DFT of every frame with one shared window."""
    x = _frames_array(frames)
    window = np.asarray(window, dtype=float)
    if window.ndim != 1 or window.size != x.shape[-1]:
        raise ValueError(f"window length {window.size} does not match support {x.shape[-1]}")
    coeffs = _dft(x * window, method)
    return Spectrogram(coeffs, x.shape[-1], _hop_of(frames, 1), sample_rate)


def kaiser_stft(frames, beta: float, sample_rate: float = 1.0) -> Spectrogram:
    """Vanilla STFT with a full-support Kaiser window."""
    support = _frames_array(frames).shape[-1]
    return stft(frames, kaiser_window(support, beta), sample_rate)


def frame_windows(n_frames: int, params: WindowParams, soft_width: float = 0.0):
    bt = resampled_time(n_frames, params.support)
    mask = mask_matrix(bt, params.lengths, soft_width)
    return bt, mask, modulated_kaiser(mask, params.lengths, bt, params.beta)


def mdstft(frames, params: WindowParams, soft_width: float = 0.0, sample_rate: float = 1.0,
           method: str = "direct") -> Spectrogram:
    """STFT where frame ``i`` uses a Kaiser window of length ``params.lengths[i]``."""
    x = _frames_array(frames)
    n_frames, support = x.shape[-2:]
    if support != params.support:
        raise ValueError(f"frames have support {support}, params expect {params.support}")
    if params.n_frames != n_frames:
        raise ValueError(f"{params.n_frames} window lengths for {n_frames} frames")
    _, _, windows = frame_windows(n_frames, params, soft_width)
    coeffs = _dft(x * windows, method)
    return Spectrogram(coeffs, support, _hop_of(frames, params.hop), sample_rate)


def dstft_fixed(frames, theta: float, beta: float, soft_width: float = 0.0,
                sample_rate: float = 1.0) -> Spectrogram:
    """Differentiable STFT with a single window length shared by all frames."""
    x = _frames_array(frames)
    n_frames, support = x.shape[-2:]
    if not 1 <= theta <= support:
        raise ValueError(f"theta must lie in [1, {support}], got {theta}")
    params = WindowParams(np.full(n_frames, float(theta)), beta, support, _hop_of(frames, 1))
    return mdstft(frames, params, soft_width, sample_rate)


def magnitude(spec) -> np.ndarray:
    coeffs = spec.coeffs if isinstance(spec, Spectrogram) else np.asarray(spec)
    return np.abs(coeffs)


def mdstft_backward(frames, params: WindowParams, soft_width: float, upstream,
                    with_beta: bool = False) -> SpectrogramGrad:
    """Pull ``dL/d|coeffs|`` back to the per-frame window lengths.

    Cells with ``|coeffs| <= MAG_EPS`` pass no gradient. With batched frames the
    gradients are summed over the batch because the parameters are shared.
    """
    x = _frames_array(frames)
    upstream = np.asarray(upstream, dtype=float)
    n_frames, support = x.shape[-2:]
    bt, mask, windows = frame_windows(n_frames, params, soft_width)
    coeffs = (x * windows) @ dft_matrix(support)
    if upstream.shape != coeffs.shape:
        raise ValueError(f"upstream shape {upstream.shape} != spectrogram shape {coeffs.shape}")
    mag = np.abs(coeffs)
    safe = np.where(mag > MAG_EPS, mag, 1.0)
    g_coeffs = np.where(mag > MAG_EPS, upstream / safe, 0.0) * np.conj(coeffs)
    # d|C|/d(windowed[n]) = Re(conj(C) * E[n, f]) / |C|
    g_windowed = np.real(g_coeffs @ dft_matrix(support).T)
    g_window = x * g_windowed
    if g_window.ndim > 2:
        g_window = g_window.reshape(-1, n_frames, support).sum(axis=0)
    d_len = np.sum(g_window * window_grad_wrt_length(mask, params.lengths, bt, params.beta), axis=1)
    d_beta = None
    if with_beta:
        d_beta = float(np.sum(g_window * window_grad_wrt_beta(mask, params.lengths, bt, params.beta)))
    return SpectrogramGrad(d_len, d_beta)

