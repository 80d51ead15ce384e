"""Acceptance criteria. Each test prints one PASS/FAIL line; the lines are repeated
in the terminal summary. Criteria 7, 8 and 10 drive the CLI end to end and take
roughly 15 minutes together (``-m "not slow"`` skips them)."""

import math
import statistics
import time

import numpy as np
import pytest

from adaptive_stft import metrics
from adaptive_stft.cli import main
from adaptive_stft.mdstft import kaiser_stft, magnitude, mdstft, mdstft_backward
from adaptive_stft.optimize import optimize_window
from adaptive_stft.signalgen import FaultSpec, SpeedProfile, frame_count, frame_signal, gen_fault_signal
from adaptive_stft.transfer import domain_metric, lambda0, median_bandwidths, softmax
from adaptive_stft.window import (
    WindowParams,
    mask_matrix,
    modulated_kaiser,
    resampled_time,
    window_grad_wrt_length,
)

SEEDS = (3407, 3408, 3409)
EPOCHS = 30


def test_criterion_01_reduction_chain(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(20):
        fm = frame_signal(rng.standard_normal(int(rng.integers(600, 3073))), 128, 16)
        full = WindowParams.full(fm.n_frames, 128, 16, 8.0)
        diff = np.abs(mdstft(fm, full).coeffs - kaiser_stft(fm, 8.0).coeffs).max()
        worst = max(worst, float(diff))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    assert record(1, "reduction chain", ok, f"max |diff|={worst:.3g} over 20 signals, {elapsed:.2f}s")


def _bsq_of_lengths(frames, lengths):
    params = WindowParams(lengths, 8.0, frames.shape[-1], 16)
    return metrics.bsq_loss(magnitude(mdstft(frames, params, 2.0)))


def test_criterion_02_gradient_correctness(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    h = 1e-3
    worst_loss = 0.0
    for _ in range(10):
        frames = rng.standard_normal((8, 128))
        lengths = rng.uniform(4.0, 127.0, 8)
        params = WindowParams(lengths, 8.0, 128, 16)
        mag = magnitude(mdstft(frames, params, 2.0))
        g = mdstft_backward(frames, params, 2.0, metrics.bsq_grad(mag)).d_lengths
        fd = np.array([(_bsq_of_lengths(frames, lengths + h * e) - _bsq_of_lengths(frames, lengths - h * e))
                       / (2 * h) for e in np.eye(8)])
        worst_loss = max(worst_loss, float(np.max(np.abs(g - fd) / np.abs(fd))))

    # five-point stencil: a two-point difference at small h is dominated by roundoff
    hw = 1e-3
    worst_win = 0.0
    bt = resampled_time(8, 128)
    for _ in range(10):
        lengths = rng.uniform(4.0, 127.0, 8)
        grad = window_grad_wrt_length(mask_matrix(bt, lengths, 2.0), lengths, bt, 8.0)

        def win(lens):
            return modulated_kaiser(mask_matrix(bt, lens, 2.0), lens, bt, 8.0)

        fd = (8 * (win(lengths + hw) - win(lengths - hw))
              - (win(lengths + 2 * hw) - win(lengths - 2 * hw))) / (12 * hw)
        keep = mask_matrix(bt, lengths).keep
        interior = keep & (bt < np.floor(lengths)[:, None] - 1) & (np.abs(fd) > 1e-8)
        worst_win = max(worst_win, float(np.max(np.abs(grad[interior] - fd[interior]) / np.abs(fd[interior]))))
    elapsed = time.perf_counter() - t0
    ok = worst_loss <= 1e-3 and worst_win <= 1e-5 and elapsed < 10.0
    assert record(2, "gradient correctness", ok,
                  f"loss max rel err={worst_loss:.2e}, window max rel err={worst_win:.2e}, {elapsed:.2f}s")


def test_criterion_03_bsq_invariants(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    failures = []
    worst_scale = 0.0
    for i in range(100):
        shape = tuple(rng.integers(2, 41, size=2))
        kind = i % 3
        if kind == 0:
            mag = rng.uniform(0.0, 1.0, shape)
        elif kind == 1:
            mag = rng.exponential(1.0, shape)
        else:
            mag = np.abs(rng.standard_normal(shape)) ** 3
        k = 10 ** rng.uniform(-2, 2)
        r, s = metrics.quality_report(mag), metrics.quality_report(k * mag)
        scale_err = max(abs(r.q_f - s.q_f), abs(r.q_t - s.q_t), abs(r.bsq - s.bsq), abs(r.renyi - s.renyi))
        worst_scale = max(worst_scale, scale_err)
        if scale_err > 1e-9:
            failures.append(f"scale #{i}")
        if not (0 < r.q_f <= 1 and 0 < r.q_t <= 1 and 0 < r.bsq <= 1):
            failures.append(f"range #{i}")
        if not min(r.q_f, r.q_t) <= r.bsq <= max(r.q_f, r.q_t):
            failures.append(f"bound #{i}")
        if metrics.bsq_loss(np.full(shape, rng.uniform(0.1, 10.0))) != 1.0:
            failures.append(f"uniform #{i}")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 1.0
    assert record(3, "BSQ invariants", ok,
                  f"100 matrices, max scale err={worst_scale:.2e}, failures={failures[:5]}, {elapsed:.2f}s")


def test_criterion_04_lambda0_schedule(record):
    vals = [lambda0(e, 200) for e in range(201)]
    exact = lambda0(0, 200) == 0.0 and lambda0(200, 200) == 2.0 and lambda0(50, 200) == 4 / 3
    monotone = all(b > a for a, b in zip(vals, vals[1:]))
    ok = exact and monotone
    assert record(4, "lambda0 schedule", ok,
                  f"l(0)={vals[0]!r} l(200)={vals[200]!r} l(50)={vals[50]!r} monotone={monotone}")


def _enumerate_frames(padded_len, support, hop):
    # 1-based: frame i ends at x[1 + support + i*hop], which must exist
    count, i = 0, 0
    while 1 + support + i * hop <= padded_len:
        count += 1
        i += 1
    return count


def test_criterion_05_frame_count(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    mismatches = 0
    for _ in range(1000):
        support = int(rng.integers(2, 513))
        hop = int(rng.integers(1, 257))
        padded = support + 1 + int(rng.integers(0, 4000))
        n = frame_count(padded, support, hop)
        if n != _enumerate_frames(padded, support, hop):
            mismatches += 1
        elif frame_signal(np.zeros(padded), support, hop, pad="none").n_frames != n:
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 1.0
    assert record(5, "frame count", ok, f"{mismatches} mismatches in 1000 triples, {elapsed:.2f}s")


def test_criterion_06_ordering(record):
    t0 = time.perf_counter()
    fs = 12800.0
    profile = SpeedProfile.ramp(15.0, 40.0, 3072 / fs)
    sig = gen_fault_signal(profile, FaultSpec(1, 5.4, 1500.0, 2000.0, 20.0, 10.0), fs, 3072, 7)
    fm = frame_signal(sig, 128, 16)
    start = WindowParams.full(fm.n_frames, 128, 16, 8.0)
    md = optimize_window(fm.frames, start, 200)
    ds = optimize_window(fm.frames, start, 200, shared=True)
    mags = {
        "stft": magnitude(kaiser_stft(fm, 8.0)),
        "dstft": magnitude(mdstft(fm, ds.params)),
        "mdstft": magnitude(mdstft(fm, md.params)),
    }
    bsq = {k: metrics.bsq_loss(v) for k, v in mags.items()}
    ren = {k: metrics.renyi_entropy(v) for k, v in mags.items()}
    elapsed = time.perf_counter() - t0
    ok = (bsq["mdstft"] < bsq["dstft"] and ren["mdstft"] <= ren["dstft"] <= ren["stft"]
          and elapsed < 60.0)
    detail = (f"BSQ mdstft={bsq['mdstft']:.5f} dstft={bsq['dstft']:.5f} stft={bsq['stft']:.5f}; "
              f"Renyi mdstft={ren['mdstft']:.5f} dstft={ren['dstft']:.5f} stft={ren['stft']:.5f}; "
              f"dstft length={ds.params.lengths[0]:.2f}; {elapsed:.1f}s")
    assert record(6, "quality ordering", ok, detail)


def _pairwise_oracle(x_s, z_s, x_t, z_t):
    # plain loops; median bandwidth recomputed independently
    x = [list(r) for r in np.concatenate([x_s, x_t])]
    p = [list(r) for r in softmax(np.concatenate([z_s, z_t]))]
    m = len(x)

    def sq(a, b):
        return sum((ai - bi) ** 2 for ai, bi in zip(a, b))

    med = math.sqrt(statistics.median(sq(x[i], x[j]) for i in range(m) for j in range(i + 1, m)))
    bws = [med * 2.0 ** (k - 2) for k in range(5)]
    n = m // 2
    total = 0.0
    for i in range(m):
        for j in range(m):
            k1 = sum(math.exp(-sq(x[i], x[j]) / (2 * bw * bw)) for bw in bws) / len(bws)
            k2 = math.exp(-sq(p[i], p[j]) / 2.0)
            sign = (1 if i < n else -1) * (1 if j < n else -1)
            total += sign * k1 * k2 / (n * n)
    return total


def test_criterion_09_domain_metric(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    x_s, z_s = rng.standard_normal((10, 16)), rng.standard_normal((10, 4))
    x_t, z_t = rng.standard_normal((10, 16)) + 3.0, rng.standard_normal((10, 4))
    same = domain_metric(x_s, z_s, x_s, z_s)
    shifted = domain_metric(x_s, z_s, x_t, z_t)
    oracle = _pairwise_oracle(x_s, z_s, x_t, z_t)
    assert median_bandwidths(np.concatenate([x_s, x_t]))[2] > 0
    elapsed = time.perf_counter() - t0
    ok = abs(same) <= 1e-10 and shifted > 0 and abs(shifted - oracle) <= 1e-12 and elapsed < 1.0
    assert record(9, "domain metric", ok,
                  f"M(A,A)={same:.2e}, shifted={shifted:.6f}, |impl-oracle|={abs(shifted - oracle):.2e}")


# -- end-to-end training runs through the CLI ---------------------------------


class Runs:
    def __init__(self, root):
        self.root = root
        self.cache = {}

    def data(self, seed):
        path = self.root / f"data_{seed}"
        if not path.exists():
            assert main(["synth", "--seed", str(seed), "--per-class", "100", "--out", str(path),
                         "--no-figures"]) == 0
        return path

    def transfer(self, seed, ablation=False, tag=""):
        key = (seed, ablation, tag)
        if key not in self.cache:
            out = self.root / f"run_{seed}_{'abl' if ablation else 'full'}{tag}"
            args = ["transfer", "--data", str(self.data(seed)), "--seed", str(seed),
                    "--max-epoch", str(EPOCHS), "--out", str(out)]
            if ablation:
                args += ["--lambda0", "off", "--lambda1", "0", "--lambda2", "0", "--no-figures"]
            t0 = time.perf_counter()
            assert main(args) == 0
            self.cache[key] = (out, time.perf_counter() - t0)
        return self.cache[key]


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    return Runs(tmp_path_factory.mktemp("acceptance"))


def _history(out):
    lines = (out / "history.csv").read_text().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, map(float, ln.split(",")))) for ln in lines[1:]]


def _accuracy(out):
    first = (out / "report.txt").read_text().splitlines()[0]
    return float(first.split("=")[1])


@pytest.mark.slow
def test_criterion_07_bsq_descent(record, runs):
    out, elapsed = runs.transfer(3407)
    hist = _history(out)
    s0, s1 = hist[0]["l_sbsq"], hist[-1]["l_sbsq"]
    t0, t1 = hist[0]["l_tbsq"], hist[-1]["l_tbsq"]
    ok = len(hist) == EPOCHS and s1 < s0 and t1 < t0 and elapsed < 600
    assert record(7, "BSQ descent", ok,
                  f"source {s0:.6f}->{s1:.6f}, target {t0:.6f}->{t1:.6f}, {elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_08_transfer_benefit(record, runs):
    t0 = time.perf_counter()
    full, abl = [], []
    for seed in SEEDS:
        full.append(_accuracy(runs.transfer(seed)[0]))
        abl.append(_accuracy(runs.transfer(seed, ablation=True)[0]))
    elapsed = time.perf_counter() - t0
    gap = 100 * (np.mean(full) - np.mean(abl))
    ok = gap >= 5.0 and np.mean(full) >= 0.80
    detail = (f"full={[round(a, 4) for a in full]} mean={np.mean(full):.4f}; "
              f"ablation={[round(a, 4) for a in abl]} mean={np.mean(abl):.4f}; "
              f"gap={gap:.2f} points; {elapsed:.0f}s")
    assert record(8, "transfer benefit", ok, detail)


@pytest.mark.slow
def test_criterion_10_determinism(record, runs):
    first, _ = runs.transfer(3407)
    second, _ = runs.transfer(3407, tag="_repeat")
    same = (first / "history.csv").read_bytes() == (second / "history.csv").read_bytes()
    assert record(10, "determinism", same, f"history CSVs byte-identical={same}")
