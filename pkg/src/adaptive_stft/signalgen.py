"""Synthetic variable-speed vibration signals, framing, and signal files.

Index convention: everything here is 0-based. Frame ``i`` column ``j`` holds
``x[j + i * hop]``; in 1-based notation that is ``x_{1 + j + i*hop}`` with
``j`` running from 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HEALTHY, INNER_RACE, OUTER_RACE, BALL = 0, 1, 2, 3
CLASS_NAMES = ("H", "IR", "OR", "B")


class SignalFormatError(ValueError):
    """Raised for malformed signal or matrix files."""


@dataclass
class Signal:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).ravel()
        if self.samples.size == 0:
            raise ValueError("empty signal")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("signal contains non-finite samples")

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class SpeedProfile:
    """Linear shaft-speed ramp, in rev/s, held at ``f_end`` after ``duration``."""

    kind: str
    f_start: float
    f_end: float
    duration: float

    def __post_init__(self):
        if self.kind not in ("linear_up", "linear_down"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.f_start <= 0 or self.f_end <= 0:
            raise ValueError("profile frequencies must be positive")
        if self.duration <= 0:
            raise ValueError("profile duration must be positive")

    @classmethod
    def ramp(cls, f_start: float, f_end: float, duration: float) -> "SpeedProfile":
        kind = "linear_down" if f_end < f_start else "linear_up"
        return cls(kind, f_start, f_end, duration)

    def frequency(self, t):
        """Instantaneous frequency (Hz) at time ``t``."""
        t = np.asarray(t, dtype=float)
        frac = np.clip(t / self.duration, 0.0, 1.0)
        return self.f_start + (self.f_end - self.f_start) * frac

    def revolutions(self, t):
        """Integral of :meth:`frequency` from 0 to ``t`` (closed form)."""
        t = np.asarray(t, dtype=float)
        slope = (self.f_end - self.f_start) / self.duration
        tc = np.clip(t, 0.0, self.duration)
        ramp = self.f_start * tc + 0.5 * slope * tc**2
        return ramp + self.f_end * np.maximum(t - self.duration, 0.0)


@dataclass(frozen=True)
class FaultSpec:
    class_id: int
    impulses_per_rev: float
    resonance_hz: float
    decay: float
    snr_db: float = math.inf
    impulse_amplitude: float = 1.0

    def __post_init__(self):
        if self.class_id not in (HEALTHY, INNER_RACE, OUTER_RACE, BALL):
            raise ValueError(f"class_id must be in 0..3, got {self.class_id}")
        if self.impulses_per_rev < 0:
            raise ValueError("impulses_per_rev must be >= 0")
        if self.resonance_hz <= 0:
            raise ValueError("resonance_hz must be positive")
        if self.decay <= 0:
            raise ValueError("decay must be positive")


@dataclass
class FrameMatrix:
    frames: np.ndarray
    hop: int
    support: int
    pad_len: int = 0

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


def _check_nyquist(freq: float, sample_rate: float, what: str):
    if freq >= sample_rate / 2:
        raise ValueError(f"{what}={freq} Hz is at or above Nyquist ({sample_rate / 2} Hz)")


def gen_chirp(profile: SpeedProfile, sample_rate: float, n_samples: int,
              amplitude: float = 1.0) -> Signal:
    """Linear-frequency sweep ``amplitude * sin(2*pi*revolutions(t))``."""
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    _check_nyquist(profile.f_start, sample_rate, "f_start")
    _check_nyquist(profile.f_end, sample_rate, "f_end")
    t = np.arange(n_samples) / sample_rate
    return Signal(amplitude * np.sin(2 * np.pi * profile.revolutions(t)), sample_rate)


def impulse_onsets(profile: SpeedProfile, impulses_per_rev: float, duration: float) -> np.ndarray:
    """Times in ``[0, duration)`` at which ``impulses_per_rev * revolutions(t)`` hits an integer."""
    if impulses_per_rev <= 0:
        return np.empty(0)
    total = impulses_per_rev * float(profile.revolutions(duration))
    targets = np.arange(math.ceil(total)) / impulses_per_rev
    # revolutions() is strictly increasing, so invert it by bisection on each target.
    lo = np.zeros_like(targets)
    hi = np.full_like(targets, duration)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = profile.revolutions(mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    onsets = hi
    return onsets[onsets < duration]


def gen_fault_signal(profile: SpeedProfile, fault: FaultSpec, sample_rate: float,
                     n_samples: int, rng_seed: int, amplitude: float = 1.0) -> Signal:
    """Chirp plus speed-locked decaying resonance bursts plus white noise at ``fault.snr_db``."""
    _check_nyquist(fault.resonance_hz, sample_rate, "resonance_hz")
    base = gen_chirp(profile, sample_rate, n_samples, amplitude).samples
    t = np.arange(n_samples) / sample_rate
    duration = n_samples / sample_rate

    bursts = np.zeros(n_samples)
    # bursts below exp(-30) of their peak are dropped
    tail = int(math.ceil(30.0 / fault.decay * sample_rate)) + 1
    for onset in impulse_onsets(profile, fault.impulses_per_rev, duration):
        start = int(math.ceil(onset * sample_rate))
        stop = min(n_samples, start + tail)
        dt = t[start:stop] - onset
        bursts[start:stop] += np.exp(-fault.decay * dt) * np.sin(2 * np.pi * fault.resonance_hz * dt)
    clean = base + fault.impulse_amplitude * bursts

    if math.isinf(fault.snr_db) and fault.snr_db > 0:
        return Signal(clean, sample_rate)
    rng = np.random.default_rng(rng_seed)
    power = np.mean(base**2) if np.any(base) else np.mean(clean**2)
    noise_std = math.sqrt(power / 10 ** (fault.snr_db / 10.0))
    return Signal(clean + noise_std * rng.standard_normal(n_samples), sample_rate)


def frame_count(padded_len: int, support: int, hop: int, mode: str = "strict") -> int:
    """Number of frames for a padded length.

    ``mode="strict"`` keeps the trailing ``-1``: ``floor(1 + (L' - N - 1) / hop)``.
    ``mode="conventional"`` is ``floor((L' - N) / hop) + 1``.
    """
    if hop < 1:
        raise ValueError("hop must be >= 1")
    if mode == "strict":
        return 1 + (padded_len - support - 1) // hop
    if mode == "conventional":
        return (padded_len - support) // hop + 1
    raise ValueError(f"unknown framecount mode {mode!r}")


def _padded_length(length: int, support: int, hop: int, mode: str) -> int:
    # smallest L' >= length that makes the frame-count quotient exact and yields a frame
    base = support + 1 if mode == "strict" else support
    if length <= base:
        return base
    return base + hop * math.ceil((length - base) / hop)


def frame_signal(x: Signal | np.ndarray, support: int, hop: int, pad: str = "zero",
                 framecount: str = "strict") -> FrameMatrix:
    """Slice ``x`` into ``n_T`` rows of ``support`` samples spaced ``hop`` apart.

    ``pad="zero"`` right-pads with zeros to the smallest admissible length;
    ``pad="none"`` uses the signal as is and drops the remainder.
    """
    samples = x.samples if isinstance(x, Signal) else np.asarray(x, dtype=float)
    if hop < 1:
        raise ValueError("hop must be >= 1")
    if support < 1:
        raise ValueError("support must be >= 1")
    length = samples.size
    if pad == "zero":
        padded_len = _padded_length(length, support, hop, framecount)
    elif pad == "none":
        padded_len = length
    else:
        raise ValueError(f"unknown pad mode {pad!r}")
    n_frames = frame_count(padded_len, support, hop, framecount)
    if n_frames < 1:
        raise ValueError(f"no complete frame: length {padded_len}, support {support}")
    padded = np.zeros(max(padded_len, length))
    padded[:length] = samples
    idx = np.arange(n_frames)[:, None] * hop + np.arange(support)[None, :]
    return FrameMatrix(padded[idx], hop, support, padded_len - length)


def save_signal(signal: Signal, path) -> None:
    lines = [f"# sample_rate={signal.sample_rate!r}"]
    lines.extend(repr(float(v)) for v in signal.samples)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_signal(path) -> Signal:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise SignalFormatError(f"{path}: missing sample_rate")
    header = lines[0].lstrip("#").strip()
    key, sep, value = header.partition("=")
    if key.strip() != "sample_rate" or not sep:
        raise SignalFormatError(f"{path}: missing sample_rate")
    try:
        sample_rate = float(value)
    except ValueError:
        raise SignalFormatError(f"{path}: malformed header {lines[0]!r}") from None
    values = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise SignalFormatError(f"{path}:{lineno}: non-numeric line {line!r}") from None
    if not values:
        raise SignalFormatError(f"{path}: empty signal")
    return Signal(np.array(values), sample_rate)
