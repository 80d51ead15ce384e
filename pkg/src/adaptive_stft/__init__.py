"""Adaptive-window STFT toolkit: per-frame learnable window lengths, the balanced
spectrum quality loss, and a small domain-transfer training harness."""

from .mdstft import Spectrogram, dstft_fixed, kaiser_stft, magnitude, mdstft, mdstft_backward, stft
from .metrics import QualityReport, bsq_grad, bsq_loss, quality_report, renyi_entropy
from .signalgen import FrameMatrix, Signal, frame_signal, gen_chirp, gen_fault_signal, load_signal, save_signal
from .window import WindowParams, bessel_i0, kaiser_window, mask_matrix, modulated_kaiser

__version__ = "0.1.0"

__all__ = [
    "FrameMatrix", "QualityReport", "Signal", "Spectrogram", "WindowParams",
    "bessel_i0", "bsq_grad", "bsq_loss", "dstft_fixed", "frame_signal", "gen_chirp",
    "gen_fault_signal", "kaiser_stft", "kaiser_window", "load_signal", "magnitude",
    "mask_matrix", "mdstft", "mdstft_backward", "modulated_kaiser", "quality_report",
    "renyi_entropy", "save_signal", "stft",
]
