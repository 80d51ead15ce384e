"""Spectrogram quality: the balanced spectrum quality (BSQ) loss and Renyi entropy.

BSQ is built from a magnitude matrix ``mag[t, f]``:

* per-row (fixed time) and per-column (fixed frequency) mean and sample std,
* balanced coefficient of variation ``c = mean / (std + eps)``,
* rational quality coefficients ``q = mean(c / max(c))`` for rows and columns,
* the harmonic mean of the two coefficients.

Lower is better. All reductions run in a fixed order so reports reproduce
bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EPS = 1e-12
DEFAULT_ALPHA = 3.0


class DegenerateSpectrogram(ValueError):
    pass


@dataclass
class QualityReport:
    q_f: float
    q_t: float
    bsq: float
    renyi: float
    eps_guard_hits: int = 0

    def line(self) -> str:
        return f"q_f={self.q_f!r} q_t={self.q_t!r} bsq={self.bsq!r} renyi={self.renyi!r}"


def _check(mag):
    mag = np.asarray(mag, dtype=float)
    if mag.ndim != 2 or mag.shape[0] < 2 or mag.shape[1] < 2:
        raise ValueError(f"need a T x F magnitude matrix with T, F >= 2, got shape {mag.shape}")
    return mag


def col_row_means(mag):
    """Return ``(mu_f, mu_t)``: mean over frequency per frame, mean over time per bin."""
    mag = _check(mag)
    return mag.mean(axis=1), mag.mean(axis=0)


def col_row_stds(mag, mu_f, mu_t):
    """Sample standard deviations (``F-1`` and ``T-1`` denominators)."""
    mag = _check(mag)
    n_t, n_f = mag.shape
    sigma_f = np.sqrt(np.sum((mag - mu_f[:, None]) ** 2, axis=1) / (n_f - 1))
    sigma_t = np.sqrt(np.sum((mag - mu_t[None, :]) ** 2, axis=0) / (n_t - 1))
    return sigma_f, sigma_t


def balanced_cv(mu, sigma, eps: float = EPS):
    if eps <= 0:
        raise ValueError("eps must be positive")
    return np.asarray(mu, dtype=float) / (np.asarray(sigma, dtype=float) + eps)


def _quality(c):
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        raise ValueError("empty coefficient vector")
    top = c.max()
    if not top > 0:
        raise DegenerateSpectrogram("degenerate spectrogram")
    return float(np.mean(c / top))


def quality_coeffs(c_f, c_t):
    """Max-normalised averages of the two coefficient-of-variation vectors."""
    return _quality(c_f), _quality(c_t)


def bsq(q_f: float, q_t: float) -> float:
    return 2.0 * q_f * q_t / (q_f + q_t)


def bsq_loss(mag, eps: float = EPS) -> float:
    mag = _check(mag)
    mu_f, mu_t = col_row_means(mag)
    sigma_f, sigma_t = col_row_stds(mag, mu_f, mu_t)
    q_f, q_t = quality_coeffs(balanced_cv(mu_f, sigma_f, eps), balanced_cv(mu_t, sigma_t, eps))
    return bsq(q_f, q_t)


def _quality_grad(c):
    # d mean(c / c[a]) / dc with a = first argmax; the argmax also gets the quotient term
    n = c.size
    a = int(np.argmax(c))
    top = c[a]
    grad = np.full(n, 1.0 / (n * top))
    grad[a] -= np.sum(c) / (n * top * top)
    return grad


def _cv_grad(mag, axis, mu, sigma, dc, eps):
    # c = mu / (sigma + eps); returns dL/dmag contribution given dL/dc along `axis`
    n = mag.shape[axis]
    shape = (-1, 1) if axis == 1 else (1, -1)
    d_mu = dc / (sigma + eps)
    d_sigma = -dc * mu / (sigma + eps) ** 2
    safe = np.where(sigma > 0, sigma, 1.0)
    d_sigma_d_mag = np.where(
        (sigma > 0).reshape(shape), (mag - mu.reshape(shape)) / ((n - 1) * safe.reshape(shape)), 0.0)
    return d_mu.reshape(shape) / n + d_sigma.reshape(shape) * d_sigma_d_mag


def bsq_grad(mag, eps: float = EPS, upstream: float = 1.0) -> np.ndarray:
    """Analytic ``upstream * dBSQ/dmag``.

    Rows/columns with zero std pass no gradient through the std (subgradient 0);
    ties for the maximum go to the lowest index.
    """
    mag = _check(mag)
    if upstream == 0:
        return np.zeros_like(mag)
    mu_f, mu_t = col_row_means(mag)
    sigma_f, sigma_t = col_row_stds(mag, mu_f, mu_t)
    c_f = balanced_cv(mu_f, sigma_f, eps)
    c_t = balanced_cv(mu_t, sigma_t, eps)
    q_f, q_t = quality_coeffs(c_f, c_t)
    denom = (q_f + q_t) ** 2
    d_qf = 2.0 * q_t * q_t / denom
    d_qt = 2.0 * q_f * q_f / denom
    g = _cv_grad(mag, 1, mu_f, sigma_f, d_qf * _quality_grad(c_f), eps)
    g = g + _cv_grad(mag, 0, mu_t, sigma_t, d_qt * _quality_grad(c_t), eps)
    return upstream * g


def renyi_entropy(mag, alpha: float = DEFAULT_ALPHA) -> float:
    """Order-``alpha`` Renyi entropy (bits) of the normalised energy ``mag**2``."""
    if alpha <= 0 or alpha == 1:
        raise ValueError("alpha must be positive and != 1")
    energy = np.asarray(mag, dtype=float) ** 2
    total = energy.sum()
    if not total > 0:
        raise DegenerateSpectrogram("renyi entropy of an all-zero spectrogram")
    p = energy / total
    return float(math.log2(np.sum(p**alpha)) / (1.0 - alpha))


def quality_report(mag, alpha: float = DEFAULT_ALPHA, eps: float = EPS) -> QualityReport:
    mag = _check(mag)
    mu_f, mu_t = col_row_means(mag)
    sigma_f, sigma_t = col_row_stds(mag, mu_f, mu_t)
    q_f, q_t = quality_coeffs(balanced_cv(mu_f, sigma_f, eps), balanced_cv(mu_t, sigma_t, eps))
    hits = int(np.count_nonzero(sigma_f == 0) + np.count_nonzero(sigma_t == 0))
    return QualityReport(q_f, q_t, bsq(q_f, q_t), renyi_entropy(mag, alpha), hits)


def cv_vectors(mag, eps: float = EPS):
    """Per-row and per-column balanced coefficients of variation, for export."""
    mu_f, mu_t = col_row_means(mag)
    sigma_f, sigma_t = col_row_stds(mag, mu_f, mu_t)
    return balanced_cv(mu_f, sigma_f, eps), balanced_cv(mu_t, sigma_t, eps)
