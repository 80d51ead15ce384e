"""Figures written next to the CSV outputs. Headless (Agg) and deterministic."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .signalgen import CLASS_NAMES  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "savefig.bbox": "tight",
}
# PNG metadata carries no timestamp, so reruns are byte-identical
_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def spectrogram(mag, path, sample_rate: float, hop: int, title: str = ""):
    mag = np.asarray(mag)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3))
        n_frames, n_bins = mag.shape
        extent = (0, n_frames * hop / sample_rate, 0, sample_rate / 2)
        im = ax.imshow(20 * np.log10(mag.T + 1e-12), origin="lower", aspect="auto",
                       extent=extent, cmap="magma")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("frequency [Hz]")
        if title:
            ax.set_title(title)
        fig.colorbar(im, ax=ax, label="dB")
        _save(fig, path)


def window_lengths(lengths, path, support: int):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 2.5))
        ax.plot(np.arange(len(lengths)), lengths, lw=1)
        ax.set_ylim(0, support * 1.05)
        ax.set_xlabel("frame")
        ax.set_ylabel("window length [samples]")
        _save(fig, path)


def bsq_trajectory(values, path, initial: float | None = None):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4, 2.5))
        series = ([initial] if initial is not None else []) + list(values)
        ax.plot(np.arange(len(series)), series, lw=1)
        ax.set_xlabel("iteration")
        ax.set_ylabel("BSQ (hard mask)")
        _save(fig, path)


def training_history(history, path):
    epochs = [r.epoch for r in history]
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 3, figsize=(10, 2.8))
        axes[0].plot(epochs, [r.total for r in history], label="total")
        axes[0].plot(epochs, [r.l_cl for r in history], label="classification")
        axes[0].plot(epochs, [r.l_m for r in history], label="domain metric")
        axes[0].legend()
        axes[1].plot(epochs, [r.l_sbsq for r in history], label="source BSQ")
        axes[1].plot(epochs, [r.l_tbsq for r in history], label="target BSQ")
        axes[1].legend()
        axes[2].plot(epochs, [r.target_acc for r in history])
        axes[2].set_ylabel("target accuracy")
        for ax in axes:
            ax.set_xlabel("epoch")
        _save(fig, path)


def confusion(mat, path):
    mat = np.asarray(mat)
    k = mat.shape[0]
    names = CLASS_NAMES[:k]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(3.2, 3))
        ax.imshow(mat, cmap="Blues")
        for i in range(k):
            for j in range(k):
                ax.text(j, i, str(mat[i, j]), ha="center", va="center", fontsize=8)
        ax.set_xticks(range(k), names)
        ax.set_yticks(range(k), names)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        _save(fig, path)
