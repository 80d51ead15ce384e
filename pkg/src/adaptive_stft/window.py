"""Kaiser windows with per-frame, continuous, learnable lengths.

A frame's window is the Kaiser curve stretched to length ``lengths[i]`` and
evaluated on the integer grid ``0..N-1``; grid points at or beyond the length
are masked to exactly zero. With ``soft_width > 0`` the mask becomes a
raised-cosine gate over ``[length - soft_width, length]`` so the length
receives gradient through the cut-off too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# I0 and I1 overflow float64 slightly above this argument.
BESSEL_OVERFLOW = 713.98
LENGTH_FLOOR = 1.0 + 1e-6
DEFAULT_BETA = 8.0
DEFAULT_SOFT_WIDTH = 2.0

_SERIES_MAX_TERMS = 2000


def _series(x, first, ratio):
    x = np.asarray(x, dtype=float)
    q = 0.25 * x * x
    term = first(x)
    total = term.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, _SERIES_MAX_TERMS):
            term = term * q / ratio(k)
            total = total + term
            if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
    return total


def bessel_i0(x):
    """Modified Bessel function of the first kind, order 0, by power series.

    Accurate to ~1e-15 relative for ``|x| < BESSEL_OVERFLOW``; returns inf above it.
    """
    out = _series(x, lambda a: np.ones_like(a), lambda k: float(k * k))
    return out if np.ndim(out) else float(out)


def bessel_i1(x):
    """Order-1 counterpart of :func:`bessel_i0` (odd function, ``I0' = I1``)."""
    out = _series(x, lambda a: 0.5 * a, lambda k: float(k * (k + 1)))
    return out if np.ndim(out) else float(out)


def _i1_over_x(x):
    # I1(x)/x, finite at x=0 where it equals 1/2
    return _series(x, lambda a: np.full_like(a, 0.5), lambda k: float(k * (k + 1)))


def kaiser_window(support: int, beta: float) -> np.ndarray:
    """Symmetric Kaiser window of ``support`` points."""
    if support < 2:
        raise ValueError("kaiser window needs support >= 2")
    n = np.arange(support, dtype=float)
    arg = 1.0 - (1.0 - 2.0 * n / (support - 1)) ** 2
    return bessel_i0(beta * np.sqrt(np.maximum(arg, 0.0))) / bessel_i0(beta)


@dataclass
class WindowParams:
    lengths: np.ndarray
    beta: float = DEFAULT_BETA
    support: int = 128
    hop: int = 16

    def __post_init__(self):
        self.lengths = np.asarray(self.lengths, dtype=float).ravel()
        if self.beta < 0:
            raise ValueError("beta must be >= 0")

    @classmethod
    def full(cls, n_frames: int, support: int, hop: int, beta: float = DEFAULT_BETA):
        return cls(np.full(n_frames, float(support)), beta, support, hop)

    @property
    def n_frames(self) -> int:
        return self.lengths.size

    def clamp(self) -> "WindowParams":
        self.lengths = clamp_lengths(self.lengths, self.support)
        return self


def clamp_lengths(lengths, support: int) -> np.ndarray:
    return np.clip(np.asarray(lengths, dtype=float), LENGTH_FLOOR, float(support))


def resampled_time(n_frames: int, support: int) -> np.ndarray:
    """``n_frames x support`` matrix whose every row is ``0, 1, ..., support-1``."""
    if n_frames < 1 or support < 2:
        raise ValueError("resampled_time needs n_frames >= 1 and support >= 2")
    return np.tile(np.arange(support, dtype=float), (n_frames, 1))


@dataclass
class MaskMatrix:
    keep: np.ndarray
    gate: np.ndarray
    soft_width: float = 0.0

    def kept_prefix(self) -> np.ndarray:
        return self.keep.sum(axis=1)


def mask_matrix(bt: np.ndarray, lengths, soft_width: float = 0.0) -> MaskMatrix:
    """Keep ``bt < length`` per row; the gate is 1/0 (hard) or a raised-cosine ramp (soft)."""
    if soft_width < 0:
        raise ValueError("soft_width must be >= 0")
    lengths = np.asarray(lengths, dtype=float)[:, None]
    keep = bt < lengths
    if soft_width == 0:
        return MaskMatrix(keep, keep.astype(float), 0.0)
    phase = (bt - (lengths - soft_width)) / soft_width
    ramp = 0.5 * (1.0 + np.cos(np.pi * np.clip(phase, 0.0, 1.0)))
    gate = np.where(keep, ramp, 0.0)
    return MaskMatrix(keep, gate, float(soft_width))


def _kaiser_geometry(bt, lengths):
    lengths = np.asarray(lengths, dtype=float)[:, None]
    denom = np.maximum(lengths - 1.0, 1e-12)
    u = 1.0 - 2.0 * bt / denom
    arg = 1.0 - u * u
    return u, arg, denom


def modulated_kaiser(mask: MaskMatrix, lengths, bt: np.ndarray, beta: float) -> np.ndarray:
    """Per-frame Kaiser windows stretched to ``lengths`` and multiplied by the mask gate."""
    _, arg, _ = _kaiser_geometry(bt, lengths)
    s = np.sqrt(np.maximum(arg, 0.0))
    smooth = bessel_i0(beta * s) / bessel_i0(beta)
    return np.where(mask.keep, smooth * mask.gate, 0.0)


def window_grad_wrt_length(mask: MaskMatrix, lengths, bt: np.ndarray, beta: float) -> np.ndarray:
    """Elementwise ``dW[i, j] / d lengths[i]``.

    The hard mask is piecewise constant and contributes nothing; in soft mode the
    gate's own derivative is added by the product rule.
    """
    lengths = np.asarray(lengths, dtype=float)
    u, arg, denom = _kaiser_geometry(bt, lengths)
    inside = arg > 0
    s = np.sqrt(np.maximum(arg, 0.0))
    i0_beta = bessel_i0(beta)
    smooth = bessel_i0(beta * s) / i0_beta
    d_smooth = -(beta * beta / i0_beta) * _i1_over_x(beta * s) * (2.0 * u * bt / denom**2)
    d_smooth = np.where(inside, d_smooth, 0.0)

    grad = d_smooth * mask.gate
    if mask.soft_width > 0:
        w = mask.soft_width
        phase = (bt - (lengths[:, None] - w)) / w
        in_band = (phase > 0.0) & (phase < 1.0)
        d_gate = np.where(in_band, 0.5 * np.pi / w * np.sin(np.pi * phase), 0.0)
        grad = grad + smooth * d_gate
    return np.where(mask.keep, grad, 0.0)


def window_grad_wrt_beta(mask: MaskMatrix, lengths, bt: np.ndarray, beta: float) -> np.ndarray:
    """Elementwise ``dW / d beta`` for the Kaiser shape parameter."""
    _, arg, _ = _kaiser_geometry(bt, lengths)
    s = np.sqrt(np.maximum(arg, 0.0))
    i0_beta = bessel_i0(beta)
    num = s * bessel_i1(beta * s) * i0_beta - bessel_i0(beta * s) * bessel_i1(beta)
    return np.where(mask.keep, mask.gate * num / i0_beta**2, 0.0)


def save_lengths(params: WindowParams, path) -> None:
    lines = [f"# beta={params.beta!r} support={params.support}"]
    lines.extend(repr(float(v)) for v in params.lengths)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_lengths(path, hop: int = 16) -> WindowParams:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing '# beta=... support=...' header")
    fields = dict(tok.split("=", 1) for tok in lines[0].lstrip("#").split() if "=" in tok)
    try:
        beta = float(fields["beta"])
        support = int(fields["support"])
    except (KeyError, ValueError):
        raise ValueError(f"{path}: malformed header {lines[0]!r}") from None
    lengths = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            lengths.append(float(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric line {line!r}") from None
    if not lengths:
        raise ValueError(f"{path}: no window lengths")
    return WindowParams(np.array(lengths), beta, support, hop)
