"""Cross-domain training with learnable per-frame windows.

The objective is

    total = L_cl + lambda0(epoch) * L_m + lambda1 * L_src_bsq + lambda2 * L_tgt_bsq

where ``L_cl`` is label-smoothed cross-entropy on the source batch, ``L_m`` a
joint-kernel MMD between (feature, softmax) pairs of the two domains, and the
BSQ terms are averaged over each domain's spectrograms. Source and target
each own a window-length vector; the classifier is shared. Every gradient is
analytic (numpy only).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import metrics
from .mdstft import magnitude, mdstft, mdstft_backward
from .signalgen import (
    FaultSpec,
    SpeedProfile,
    frame_signal,
    gen_fault_signal,
)
from .window import DEFAULT_BETA, DEFAULT_SOFT_WIDTH, WindowParams, clamp_lengths


class DivergenceError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 20
    hop: int = 16
    support: int = 128
    max_epoch: int = 200
    seed: int = 3407
    lr_net: float = 0.001
    lr_window: float = 100.0
    lambda0_mode: str = "schedule"
    lambda1: float = 1.0
    lambda2: float = 0.01
    sample_len: int = 3072
    window: str = "kaiser"
    beta: float = DEFAULT_BETA
    soft_width: float = DEFAULT_SOFT_WIDTH
    smoothing: float = 0.1
    weight_decay: float = 0.01
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    window_optimizer: str = "sgd"
    hidden: int = 64
    pool: tuple = (8, 8)
    n_classes: int = 4
    divergence_limit: float = 1e6

    def __post_init__(self):
        for name in ("batch_size", "hop", "support", "max_epoch", "sample_len", "hidden", "n_classes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lr_net <= 0 or self.lr_window <= 0:
            raise ValueError("learning rates must be positive")
        if not 0 <= self.smoothing < 1:
            raise ValueError("smoothing must lie in [0, 1)")
        if self.lambda0_mode not in ("schedule", "off"):
            raise ValueError(f"lambda0_mode must be 'schedule' or 'off', got {self.lambda0_mode!r}")
        if self.window_optimizer not in ("sgd", "adamw"):
            raise ValueError("window_optimizer must be 'sgd' or 'adamw'")
        if self.window != "kaiser":
            raise ValueError("only the kaiser window is supported")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


# --------------------------------------------------------------------------
# losses and schedules


def lambda0(epoch: float, max_epoch: float) -> float:
    """Domain-term weight ``4 - 4 / (sqrt(epoch / max_epoch) + 1)``: 0 at start, 2 at the end."""
    if not 0 <= epoch <= max_epoch:
        raise ValueError(f"epoch {epoch} outside [0, {max_epoch}]")
    s = math.sqrt(epoch / max_epoch)
    # same value as 4 - 4/(s+1) without the cancellation, so 0, 4/3 and 2 come out exact
    return 4.0 * s / (s + 1.0)


def total_loss(l_cl, l_m, l_sbsq, l_tbsq, epoch, cfg: TrainConfig) -> float:
    lam0 = lambda0(epoch, cfg.max_epoch) if cfg.lambda0_mode == "schedule" else 0.0
    return l_cl + lam0 * l_m + cfg.lambda1 * l_sbsq + cfg.lambda2 * l_tbsq


def softmax(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(z):
    z = np.asarray(z, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _smoothed_targets(labels, n_classes, smoothing):
    labels = np.atleast_1d(np.asarray(labels))
    if np.any((labels < 0) | (labels >= n_classes)) or not np.all(labels == labels.astype(int)):
        raise ValueError(f"class ids must be integers in [0, {n_classes})")
    off = smoothing / (n_classes - 1) if n_classes > 1 else 0.0
    q = np.full((labels.size, n_classes), off)
    q[np.arange(labels.size), labels.astype(int)] = 1.0 - smoothing
    return q


def smoothed_cross_entropy(logits, label, smoothing: float = 0.1) -> float:
    """Cross-entropy against ``1 - smoothing`` on the true class, ``smoothing/(K-1)`` elsewhere."""
    if not 0 <= smoothing < 1:
        raise ValueError("smoothing must lie in [0, 1)")
    logits = np.atleast_2d(np.asarray(logits, dtype=float))
    q = _smoothed_targets(label, logits.shape[-1], smoothing)
    return float(np.mean(-np.sum(q * _log_softmax(logits), axis=-1)))


def smoothed_cross_entropy_grad(logits, labels, smoothing: float = 0.1):
    """Gradient of the batch-mean smoothed cross-entropy w.r.t. the logits."""
    logits = np.atleast_2d(np.asarray(logits, dtype=float))
    q = _smoothed_targets(labels, logits.shape[-1], smoothing)
    return (softmax(logits) - q) / logits.shape[0]


def gaussian_kernel(a, b, bandwidth: float):
    d2 = np.sum((np.asarray(a)[:, None, :] - np.asarray(b)[None, :, :]) ** 2, axis=-1)
    return np.exp(-d2 / (2.0 * bandwidth**2))


def median_bandwidths(features, n_kernels: int = 5, ratio: float = 2.0):
    """Bandwidths spaced by ``ratio`` and centred on the median pairwise distance."""
    x = np.asarray(features, dtype=float)
    d2 = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1)
    off = d2[np.triu_indices(len(x), k=1)]
    med = math.sqrt(float(np.median(off))) if off.size and np.median(off) > 0 else 1.0
    half = (n_kernels - 1) / 2.0
    return tuple(med * ratio ** (k - half) for k in range(n_kernels))


def _joint_kernel(x, p, feature_bw, output_bw):
    k1 = np.mean([gaussian_kernel(x, x, bw) for bw in feature_bw], axis=0)
    k2 = gaussian_kernel(p, p, output_bw)
    return k1, k2


def _domain_weights(n):
    return np.concatenate([np.full(n, 1.0 / n), np.full(n, -1.0 / n)])


def domain_metric(x_s, z_s, x_t, z_t, kernel_bandwidths=None, output_bandwidth: float = 1.0) -> float:
    """Biased joint MMD between source and target (feature, softmax(logits)) pairs.

    ``kernel_bandwidths`` are the feature-kernel bandwidths; ``None`` picks five
    around the median pairwise distance of the pooled batch.
    """
    x_s, x_t = np.atleast_2d(x_s), np.atleast_2d(x_t)
    if len(x_s) != len(x_t) or len(z_s) != len(z_t) or len(x_s) != len(z_s):
        raise ValueError("source and target batches must have equal size")
    x = np.concatenate([x_s, x_t])
    p = softmax(np.concatenate([z_s, z_t]))
    bws = median_bandwidths(x) if kernel_bandwidths is None else tuple(kernel_bandwidths)
    k1, k2 = _joint_kernel(x, p, bws, output_bandwidth)
    w = _domain_weights(len(x_s))
    return float(w @ (k1 * k2) @ w)


def domain_metric_grad(x_s, z_s, x_t, z_t, kernel_bandwidths=None, output_bandwidth: float = 1.0):
    """Return ``(value, dx_s, dz_s, dx_t, dz_t)``; bandwidths are held constant."""
    n = len(x_s)
    x = np.concatenate([x_s, x_t])
    z = np.concatenate([z_s, z_t])
    p = softmax(z)
    bws = median_bandwidths(x) if kernel_bandwidths is None else tuple(kernel_bandwidths)
    k2 = gaussian_kernel(p, p, output_bandwidth)
    w = _domain_weights(n)
    ww = np.outer(w, w)

    kernels = [gaussian_kernel(x, x, bw) for bw in bws]
    k1 = np.mean(kernels, axis=0)
    value = float(np.sum(ww * k1 * k2))

    # d/dx_i of sum_ij ww_ij k1_ij k2_ij, using symmetry of ww, k1, k2
    dx = np.zeros_like(x)
    for kern, bw in zip(kernels, bws):
        a = ww * k2 * kern / (len(bws) * bw**2)
        dx += -2.0 * (a.sum(axis=1)[:, None] * x - a @ x)
    b = ww * k1 * k2 / output_bandwidth**2
    dp = -2.0 * (b.sum(axis=1)[:, None] * p - b @ p)
    dz = p * (dp - np.sum(dp * p, axis=1, keepdims=True))
    return value, dx[:n], dz[:n], dx[n:], dz[n:]


# --------------------------------------------------------------------------
# classifier


def pool_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Adaptive average pooling as an ``n_out x n_in`` matrix (bins may overlap)."""
    mat = np.zeros((n_out, n_in))
    for i in range(n_out):
        lo = (i * n_in) // n_out
        hi = -((-(i + 1) * n_in) // n_out)
        mat[i, lo:hi] = 1.0 / (hi - lo)
    return mat


class TinyClassifier:
    """Pool magnitude to ``P x Q``, log-compress, one tanh hidden layer, linear logits."""

    def __init__(self, n_frames: int, n_bins: int, cfg: TrainConfig, rng: np.random.Generator):
        p_rows, p_cols = cfg.pool
        self.row_pool = pool_matrix(n_frames, p_rows)
        self.col_pool = pool_matrix(n_bins, p_cols).T
        n_in = p_rows * p_cols
        lim1 = math.sqrt(6.0 / (n_in + cfg.hidden))
        lim2 = math.sqrt(6.0 / (cfg.hidden + cfg.n_classes))
        self.params = {
            "W1": rng.uniform(-lim1, lim1, (n_in, cfg.hidden)),
            "b1": np.zeros(cfg.hidden),
            "W2": rng.uniform(-lim2, lim2, (cfg.hidden, cfg.n_classes)),
            "b2": np.zeros(cfg.n_classes),
        }

    def features(self, mag):
        pooled = self.row_pool @ mag @ self.col_pool
        return np.log1p(pooled.reshape(pooled.shape[0], -1)), pooled

    def forward(self, mag):
        """Return ``(features, logits, cache)`` for a batch ``(B, n_T, F)``."""
        x, pooled = self.features(mag)
        h = np.tanh(x @ self.params["W1"] + self.params["b1"])
        z = h @ self.params["W2"] + self.params["b2"]
        return x, z, (pooled, x, h)

    def backward(self, cache, dx_extra, dz):
        """Return ``(param_grads, dmag)`` given upstream on features and logits."""
        pooled, x, h = cache
        W1, W2 = self.params["W1"], self.params["W2"]
        grads = {"W2": h.T @ dz, "b2": dz.sum(axis=0)}
        dpre = (dz @ W2.T) * (1.0 - h * h)
        grads["W1"] = x.T @ dpre
        grads["b1"] = dpre.sum(axis=0)
        dx = dpre @ W1.T + dx_extra
        dpooled = (dx / (1.0 + pooled.reshape(dx.shape))).reshape(pooled.shape)
        dmag = self.row_pool.T @ dpooled @ self.col_pool.T
        return grads, dmag

    def predict(self, mag):
        return np.argmax(self.forward(mag)[1], axis=1)


# --------------------------------------------------------------------------
# state, optimizer, data


@dataclass
class Dataset:
    signals: np.ndarray
    labels: np.ndarray | None
    sample_rate: float

    def __post_init__(self):
        self.signals = np.atleast_2d(np.asarray(self.signals, dtype=float))
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if len(self.labels) != len(self.signals):
                raise ValueError("labels and signals differ in length")

    def __len__(self):
        return len(self.signals)


@dataclass
class TrainState:
    net: TinyClassifier
    theta_src: WindowParams
    theta_tgt: WindowParams
    moments: dict = field(default_factory=dict)
    step: int = 0
    epoch: int = 0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def snapshot(self) -> "TrainState":
        return copy.deepcopy(self)


def _adamw(param, grad, moments, key, lr, cfg: TrainConfig, step: int, decay: float):
    b1, b2 = cfg.adam_betas
    m, v = moments.get(key, (np.zeros_like(param), np.zeros_like(param)))
    m = b1 * m + (1 - b1) * grad
    v = b2 * v + (1 - b2) * grad * grad
    moments[key] = (m, v)
    m_hat = m / (1 - b1**step)
    v_hat = v / (1 - b2**step)
    return param * (1 - lr * decay) - lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def optimizer_step(state: TrainState, grads: dict, cfg: TrainConfig) -> TrainState:
    """AdamW on the classifier (``lr_net``, weight decay); windows step with ``lr_window``.

    ``grads`` maps classifier parameter names plus ``"theta_src"``/``"theta_tgt"``
    to arrays. Window lengths never see weight decay and are clamped to
    ``(1, support]`` afterwards.
    """
    for key, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient for {key!r} at step {state.step}")
    state.step += 1
    for key, param in state.net.params.items():
        if key in grads:
            state.net.params[key] = _adamw(param, grads[key], state.moments, key, cfg.lr_net,
                                           cfg, state.step, cfg.weight_decay)
    for key in ("theta_src", "theta_tgt"):
        if key not in grads:
            continue
        params = getattr(state, key)
        if cfg.window_optimizer == "adamw":
            new = _adamw(params.lengths, grads[key], state.moments, key, cfg.lr_window,
                         cfg, state.step, 0.0)
        else:
            new = params.lengths - cfg.lr_window * grads[key]
        params.lengths = clamp_lengths(new, params.support)
    return state


def init_state(cfg: TrainConfig) -> TrainState:
    rng = np.random.default_rng(cfg.seed)
    probe = frame_signal(np.zeros(cfg.sample_len), cfg.support, cfg.hop)
    n_frames = probe.n_frames
    net = TinyClassifier(n_frames, cfg.support // 2 + 1, cfg, rng)
    theta_src = WindowParams.full(n_frames, cfg.support, cfg.hop, cfg.beta)
    theta_tgt = WindowParams.full(n_frames, cfg.support, cfg.hop, cfg.beta)
    return TrainState(net, theta_src, theta_tgt, rng=rng)


def frame_batch(signals, cfg: TrainConfig) -> np.ndarray:
    return np.stack([frame_signal(s, cfg.support, cfg.hop).frames for s in np.atleast_2d(signals)])


# --------------------------------------------------------------------------
# training


@dataclass
class EpochRecord:
    epoch: int
    l_cl: float
    l_m: float
    l_sbsq: float
    l_tbsq: float
    lambda0: float
    total: float
    target_acc: float

    HEADER = ("epoch", "l_cl", "l_m", "l_sbsq", "l_tbsq", "lambda0", "total", "target_acc")

    def row(self):
        return tuple(getattr(self, k) for k in self.HEADER)


def _bsq_batch(mag, eps=metrics.EPS):
    losses = np.array([metrics.bsq_loss(m, eps) for m in mag])
    grads = np.stack([metrics.bsq_grad(m, eps) for m in mag]) / len(mag)
    return float(losses.mean()), grads


def batch_objective(state: TrainState, frames_s, labels_s, frames_t, epoch: int, cfg: TrainConfig,
                    need_grad: bool = True):
    """Forward (and backward) for one source/target batch pair.

    Returns ``(components, grads)`` where ``components`` holds the four loss terms,
    ``lambda0`` and ``total``.
    """
    net = state.net
    spec_s = mdstft(frames_s, state.theta_src, cfg.soft_width)
    spec_t = mdstft(frames_t, state.theta_tgt, cfg.soft_width)
    mag_s, mag_t = magnitude(spec_s), magnitude(spec_t)

    l_sbsq, g_sbsq = _bsq_batch(mag_s)
    l_tbsq, g_tbsq = _bsq_batch(mag_t)
    x_s, z_s, cache_s = net.forward(mag_s)
    x_t, z_t, cache_t = net.forward(mag_t)
    l_cl = smoothed_cross_entropy(z_s, labels_s, cfg.smoothing)
    lam0 = lambda0(epoch, cfg.max_epoch) if cfg.lambda0_mode == "schedule" else 0.0
    if lam0 > 0 or not need_grad:
        l_m, dx_s, dz_s, dx_t, dz_t = domain_metric_grad(x_s, z_s, x_t, z_t)
    else:
        l_m = domain_metric(x_s, z_s, x_t, z_t)
        dx_s = dz_s = dx_t = dz_t = None
    total = l_cl + lam0 * l_m + cfg.lambda1 * l_sbsq + cfg.lambda2 * l_tbsq
    comps = {"l_cl": l_cl, "l_m": l_m, "l_sbsq": l_sbsq, "l_tbsq": l_tbsq,
             "lambda0": lam0, "total": total}
    if not need_grad:
        return comps, None

    dz_s_total = smoothed_cross_entropy_grad(z_s, labels_s, cfg.smoothing)
    dx_s_total = np.zeros_like(x_s)
    dz_t_total = np.zeros_like(z_t)
    dx_t_total = np.zeros_like(x_t)
    if lam0 > 0:
        dz_s_total = dz_s_total + lam0 * dz_s
        dx_s_total = lam0 * dx_s
        dz_t_total = lam0 * dz_t
        dx_t_total = lam0 * dx_t

    grads_s, dmag_s = net.backward(cache_s, dx_s_total, dz_s_total)
    grads_t, dmag_t = net.backward(cache_t, dx_t_total, dz_t_total)
    grads = {k: grads_s[k] + grads_t[k] for k in grads_s}
    dmag_s = dmag_s + cfg.lambda1 * g_sbsq
    dmag_t = dmag_t + cfg.lambda2 * g_tbsq
    grads["theta_src"] = mdstft_backward(frames_s, state.theta_src, cfg.soft_width, dmag_s).d_lengths
    grads["theta_tgt"] = mdstft_backward(frames_t, state.theta_tgt, cfg.soft_width, dmag_t).d_lengths
    return comps, grads


def evaluate(state: TrainState, test: Dataset, cfg: TrainConfig, batch: int = 100):
    """Accuracy and ``K x K`` confusion matrix (rows: true class) using the target windows, hard mask."""
    if test.labels is None:
        raise ValueError("evaluation needs labels")
    k = cfg.n_classes
    if np.any((test.labels < 0) | (test.labels >= k)):
        raise ValueError(f"test labels outside the {k} trained classes")
    preds = []
    for start in range(0, len(test), batch):
        frames = frame_batch(test.signals[start:start + batch], cfg)
        mag = magnitude(mdstft(frames, state.theta_tgt, 0.0))
        preds.append(state.net.predict(mag))
    pred = np.concatenate(preds)
    confusion = confusion_matrix(test.labels, pred, k)
    return float(np.trace(confusion) / confusion.sum()), confusion


def confusion_matrix(labels, preds, n_classes: int) -> np.ndarray:
    mat = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(mat, (np.asarray(labels, dtype=int), np.asarray(preds, dtype=int)), 1)
    return mat


def train(src: Dataset, tgt: Dataset, cfg: TrainConfig, test: Dataset | None = None,
          state: TrainState | None = None, progress=None):
    """Run ``cfg.max_epoch`` epochs; returns ``(state, history)``.

    ``tgt`` labels, if present, are never read. ``test`` (labelled target data)
    only feeds the ``target_acc`` history column.
    """
    if src.labels is None:
        raise ValueError("source dataset needs labels")
    if state is None:
        state = init_state(cfg)
    src_frames = frame_batch(src.signals, cfg)
    tgt_frames = frame_batch(tgt.signals, cfg)
    n_batches = min(len(src), len(tgt)) // cfg.batch_size
    if n_batches < 1:
        raise ValueError("datasets smaller than one batch")

    history = []
    for epoch in range(cfg.max_epoch):
        state.epoch = epoch
        order_s = state.rng.permutation(len(src))
        order_t = state.rng.permutation(len(tgt))
        sums = dict.fromkeys(("l_cl", "l_m", "l_sbsq", "l_tbsq", "total"), 0.0)
        lam0 = 0.0
        for b in range(n_batches):
            idx_s = order_s[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            idx_t = order_t[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            comps, grads = batch_objective(state, src_frames[idx_s], src.labels[idx_s],
                                           tgt_frames[idx_t], epoch, cfg)
            if not math.isfinite(comps["total"]) or comps["total"] > cfg.divergence_limit:
                raise DivergenceError(f"loss {comps['total']} at epoch {epoch}, batch {b}")
            optimizer_step(state, grads, cfg)
            for key in sums:
                sums[key] += comps[key]
            lam0 = comps["lambda0"]
        acc = evaluate(state, test, cfg)[0] if test is not None else float("nan")
        rec = EpochRecord(epoch, sums["l_cl"] / n_batches, sums["l_m"] / n_batches,
                          sums["l_sbsq"] / n_batches, sums["l_tbsq"] / n_batches, lam0,
                          sums["total"] / n_batches, acc)
        history.append(rec)
        if progress is not None:
            progress(rec)
    state.epoch = cfg.max_epoch
    return state, history


# --------------------------------------------------------------------------
# synthetic two-domain benchmark

SAMPLE_RATE = 12800.0
SOURCE_RESONANCE_HZ = 1500.0
# per class: impulses per revolution, burst decay (1/s), burst amplitude
CLASS_PARAMS = (
    (0.0, 2000.0, 1.0),
    (5.4, 2000.0, 10.0),
    (3.6, 2000.0, 5.0),
    (2.2, 2000.0, 2.5),
)


def domain_faults(domain: str):
    """Fault parameters per class: the target machine resonates 1.4x higher and is noisier."""
    if domain == "source":
        scale, snr = 1.0, 10.0
    elif domain == "target":
        scale, snr = 1.4, 5.0
    else:
        raise ValueError(f"unknown domain {domain!r}")
    return [FaultSpec(c, ipr, SOURCE_RESONANCE_HZ * scale, decay, snr, amp)
            for c, (ipr, decay, amp) in enumerate(CLASS_PARAMS)]


def make_domain(domain: str, per_class: int, seed: int, sample_len: int = 3072,
                sample_rate: float = SAMPLE_RATE, n_classes: int = 4) -> Dataset:
    """Balanced labelled dataset of accelerating/decelerating fault signals."""
    if per_class <= 0:
        raise ValueError("per_class must be positive")
    faults = domain_faults(domain)[:n_classes]
    rng = np.random.default_rng(seed)
    duration = sample_len / sample_rate
    signals, labels = [], []
    for fault in faults:
        for _ in range(per_class):
            lo, hi = sorted(rng.uniform(15.0, 40.0, size=2))
            if rng.random() < 0.5:
                lo, hi = hi, lo
            profile = SpeedProfile.ramp(lo, hi, duration)
            sig = gen_fault_signal(profile, fault, sample_rate, sample_len,
                                   int(rng.integers(2**31)))
            signals.append(sig.samples)
            labels.append(fault.class_id)
    return Dataset(np.array(signals), np.array(labels), sample_rate)


# --------------------------------------------------------------------------
# persistence


def write_history(path, history) -> None:
    from .textio import fmt

    lines = [",".join(EpochRecord.HEADER)]
    for rec in history:
        vals = rec.row()
        lines.append(",".join([str(vals[0])] + [fmt(v) for v in vals[1:]]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_checkpoint(state: TrainState, path) -> None:
    """Plain-text sections ``[name] shape=a,b`` followed by one row per line."""
    from .textio import fmt

    sections = dict(state.net.params)
    sections["theta_src"] = state.theta_src.lengths
    sections["theta_tgt"] = state.theta_tgt.lengths
    out = [f"# support={state.theta_src.support} hop={state.theta_src.hop} beta={state.theta_src.beta!r}"]
    for name, arr in sections.items():
        arr = np.asarray(arr, dtype=float)
        out.append(f"[{name}] shape={','.join(str(s) for s in arr.shape)}")
        rows = arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr[:, None]
        out.extend(",".join(fmt(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def load_checkpoint(path, cfg: TrainConfig) -> TrainState:
    state = init_state(cfg)
    sections, name, shape, rows = {}, None, None, []

    def flush():
        if name is not None:
            sections[name] = np.array(rows, dtype=float).reshape(shape)

    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            flush()
            head, _, spec = line.partition(" shape=")
            name = head.strip("[]")
            shape = tuple(int(s) for s in spec.split(","))
            rows = []
        else:
            rows.append([float(v) for v in line.split(",")])
    flush()
    for key in state.net.params:
        if sections[key].shape != state.net.params[key].shape:
            raise ValueError(f"checkpoint {key} has shape {sections[key].shape}")
        state.net.params[key] = sections[key]
    state.theta_src.lengths = sections["theta_src"]
    state.theta_tgt.lengths = sections["theta_tgt"]
    return state
