"""Command-line interface.

Subcommands: ``synth``, ``transform``, ``optimize-window``, ``transfer``, ``metrics``.
Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .config import ConfigError, RunConfig, read_config_file, resolve
from .mdstft import kaiser_stft, magnitude, mdstft
from .optimize import optimize_window
from .signalgen import SignalFormatError, Signal, frame_signal, load_signal, save_signal
from .textio import MatrixFormatError, fmt, read_matrix, write_matrix
from .transfer import (
    Dataset,
    DivergenceError,
    evaluate,
    make_domain,
    save_checkpoint,
    train,
    write_history,
)
from .window import WindowParams, load_lengths, save_lengths

log = logging.getLogger("adaptive_stft")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGENCE = 0, 2, 3, 4


class DataError(RuntimeError):
    pass


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-figures", dest="figures", action="store_const", const=False,
                   help="skip PNG figures")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_dsp(p: argparse.ArgumentParser):
    p.add_argument("--support", type=int, help="frame length N in samples")
    p.add_argument("--hop", type=int, help="hop (stride) in samples")
    p.add_argument("--beta", type=float, help="Kaiser shape parameter")
    p.add_argument("--soft-width", dest="soft_width", type=float)
    p.add_argument("--framecount", choices=("strict", "conventional"))
    p.add_argument("--pad", choices=("zero", "none"))
    p.add_argument("--alpha", type=float, help="Renyi entropy order")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptive-stft", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write the synthetic two-domain dataset")
    _add_common(p)
    p.add_argument("--classes", type=int)
    p.add_argument("--per-class", dest="per_class", type=int)
    p.add_argument("--sample-len", dest="sample_len", type=int)

    p = sub.add_parser("transform", help="spectrogram + quality report for one signal")
    _add_common(p)
    _add_dsp(p)
    p.add_argument("--signal")
    p.add_argument("--mode", choices=("stft", "dstft", "mdstft"))
    p.add_argument("--theta", type=float, help="shared window length for dstft mode")
    p.add_argument("--lengths", help="per-frame window lengths file for mdstft mode")
    p.add_argument("--complex", action="store_true", help="also write interleaved re,im CSV")

    p = sub.add_parser("optimize-window", help="descend BSQ over per-frame window lengths")
    _add_common(p)
    _add_dsp(p)
    p.add_argument("--signal")
    p.add_argument("--iters", type=int)
    p.add_argument("--lr", dest="lr_window", type=float)
    p.add_argument("--shared", action="store_true", help="one length for all frames")

    p = sub.add_parser("transfer", help="train and evaluate on a synth dataset")
    _add_common(p)
    p.add_argument("--data", help="directory written by synth")
    p.add_argument("--max-epoch", dest="max_epoch", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lambda0", choices=("on", "off"))
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--lr-net", dest="lr_net", type=float)
    p.add_argument("--lr-window", dest="lr_window", type=float)
    p.add_argument("--support", type=int)
    p.add_argument("--hop", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--soft-width", dest="soft_width", type=float)
    p.add_argument("--window-optimizer", dest="window_optimizer", choices=("sgd", "adamw"))

    p = sub.add_parser("metrics", help="quality report for spectrogram CSVs")
    _add_common(p)
    p.add_argument("files", nargs="+")
    p.add_argument("--alpha", type=float)
    p.add_argument("--compare", action="store_true", help="print a table ranked by BSQ")
    p.add_argument("--cv-out", dest="cv_out", help="directory for per-row/column CV vectors")
    return parser


_NOT_CONFIG = {"command", "config", "verbose", "complex", "shared", "files", "compare", "cv_out"}


def _resolve(args) -> RunConfig:
    file_values = read_config_file(args.config) if args.config else {}
    flags = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    return resolve(file_values, flags)


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc}") from None
    return out


def _plotting():
    from . import plotting

    return plotting


# --------------------------------------------------------------------------


def cmd_synth(args, cfg: RunConfig) -> int:
    out = _outdir(cfg)
    splits = (("source", "source", cfg.seed), ("target", "target", cfg.seed + 1),
              ("target_test", "target", cfg.seed + 2))
    for split, domain, seed in splits:
        data = make_domain(domain, cfg.per_class, seed, cfg.sample_len, cfg.sample_rate, cfg.classes)
        folder = out / split
        folder.mkdir(exist_ok=True)
        rows = ["file,label,domain"]
        for i, (samples, label) in enumerate(zip(data.signals, data.labels)):
            name = f"{split}/sig_{i:05d}.txt"
            save_signal(Signal(samples, data.sample_rate), out / name)
            rows.append(f"{name},{label},{domain}")
        (out / f"{split}_manifest.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        print(f"{split}: {len(data)} signals")
    cfg.dump(out / "run.cfg")
    return EXIT_OK


def _frames(signal: Signal, cfg: RunConfig):
    try:
        return frame_signal(signal, cfg.support, cfg.hop, cfg.pad, cfg.framecount)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def _require_signal(cfg: RunConfig) -> Signal:
    if not cfg.signal:
        raise ConfigError("--signal is required")
    path = Path(cfg.signal)
    if not path.is_file():
        raise DataError(f"signal file not found: {path}")
    return load_signal(path)


def _peak_bin(mag) -> int:
    return int(np.argmax(mag.mean(axis=0)))


def cmd_transform(args, cfg: RunConfig) -> int:
    signal = _require_signal(cfg)
    frames = _frames(signal, cfg)
    if cfg.mode == "stft":
        spec = kaiser_stft(frames, cfg.beta, signal.sample_rate)
    else:
        if cfg.mode == "dstft":
            theta = cfg.theta if cfg.theta > 0 else float(cfg.support)
            if not 1 <= theta <= cfg.support:
                raise ConfigError(f"--theta must lie in [1, {cfg.support}]")
            params = WindowParams(np.full(frames.n_frames, theta), cfg.beta, cfg.support, cfg.hop)
        elif cfg.lengths:
            if not Path(cfg.lengths).is_file():
                raise DataError(f"lengths file not found: {cfg.lengths}")
            params = load_lengths(cfg.lengths, cfg.hop)
            if params.n_frames != frames.n_frames or params.support != cfg.support:
                raise DataError(f"lengths file has {params.n_frames} lengths (support "
                                f"{params.support}); signal gives {frames.n_frames} frames "
                                f"(support {cfg.support})")
            cfg.beta = params.beta
        else:
            log.warning("no --lengths given; using full-length windows")
            params = WindowParams.full(frames.n_frames, cfg.support, cfg.hop, cfg.beta)
        spec = mdstft(frames, params, 0.0, signal.sample_rate)

    mag = magnitude(spec)
    out = _outdir(cfg)
    header = {"n": cfg.support, "hop": cfg.hop, "fs": fmt(signal.sample_rate)}
    write_matrix(out / "spectrogram.csv", mag, header)
    if args.complex:
        inter = np.empty((mag.shape[0], 2 * mag.shape[1]))
        inter[:, 0::2] = spec.coeffs.real
        inter[:, 1::2] = spec.coeffs.imag
        write_matrix(out / "spectrogram_complex.csv", inter, header)
    report = metrics.quality_report(mag, cfg.alpha)
    peak = _peak_bin(mag)
    print(f"{report.line()} peak_bin={peak} peak_hz={fmt(peak * signal.sample_rate / cfg.support)}")
    (out / "metrics.txt").write_text(report.line() + f" peak_bin={peak}\n", encoding="utf-8")
    cfg.dump(out / "run.cfg")
    if cfg.figures:
        _plotting().spectrogram(mag, out / "spectrogram.png", signal.sample_rate, cfg.hop,
                                title=cfg.mode)
    return EXIT_OK


def cmd_optimize_window(args, cfg: RunConfig) -> int:
    signal = _require_signal(cfg)
    frames = _frames(signal, cfg)
    params = WindowParams.full(frames.n_frames, cfg.support, cfg.hop, cfg.beta)
    result = optimize_window(frames.frames, params, cfg.iters, cfg.lr_window, cfg.soft_width,
                             shared=args.shared)
    out = _outdir(cfg)
    save_lengths(result.params, out / "lengths.txt")
    rows = ["iter,bsq,step"]
    rows.extend(f"{i + 1},{fmt(b)},{fmt(s)}" for i, (b, s) in enumerate(zip(result.bsq, result.steps)))
    (out / "trajectory.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    final = result.bsq[-1] if result.bsq else result.initial_bsq
    print(f"initial_bsq={fmt(result.initial_bsq)} final_bsq={fmt(final)} iters={cfg.iters}")
    cfg.dump(out / "run.cfg")
    if cfg.figures:
        plotting = _plotting()
        plotting.bsq_trajectory(result.bsq, out / "trajectory.png", result.initial_bsq)
        plotting.window_lengths(result.params.lengths, out / "lengths.png", cfg.support)
    return EXIT_OK


def _read_manifest(data_dir: Path, split: str, with_labels: bool = True):
    manifest = data_dir / f"{split}_manifest.csv"
    if not manifest.is_file():
        raise DataError(f"missing manifest {manifest}")
    signals, labels, rate = [], [], None
    lines = manifest.read_text(encoding="utf-8").splitlines()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) < 2:
            raise DataError(f"{manifest}:{lineno}: malformed row {line!r}")
        sig = load_signal(data_dir / parts[0])
        if rate is None:
            rate = sig.sample_rate
        signals.append(sig.samples)
        labels.append(int(parts[1]))
    if not signals:
        raise DataError(f"{manifest}: no signals")
    if len({s.size for s in signals}) != 1:
        raise DataError(f"{manifest}: signals differ in length")
    return Dataset(np.array(signals), np.array(labels) if with_labels else None, rate)


def cmd_transfer(args, cfg: RunConfig) -> int:
    if not cfg.data:
        raise ConfigError("--data is required")
    data_dir = Path(cfg.data)
    src = _read_manifest(data_dir, "source")
    tgt = _read_manifest(data_dir, "target", with_labels=False)
    has_test = (data_dir / "target_test_manifest.csv").is_file()
    test = _read_manifest(data_dir, "target_test") if has_test else _read_manifest(data_dir, "target")
    cfg.sample_len = src.signals.shape[1]
    cfg.classes = int(src.labels.max()) + 1
    tcfg = cfg.train_config()

    def progress(rec):
        log.info("epoch %d total=%.5f l_cl=%.5f l_m=%.5f sbsq=%.5f tbsq=%.5f acc=%.4f",
                 rec.epoch, rec.total, rec.l_cl, rec.l_m, rec.l_sbsq, rec.l_tbsq, rec.target_acc)

    state, history = train(src, tgt, tcfg, test, progress=progress)
    acc, confusion = evaluate(state, test, tcfg)
    out = _outdir(cfg)
    write_history(out / "history.csv", history)
    save_checkpoint(state, out / "checkpoint.txt")
    lines = [f"target_accuracy={fmt(acc)}", "confusion (rows: true, cols: predicted)"]
    lines.extend(" ".join(str(v) for v in row) for row in confusion)
    report = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(report, encoding="utf-8")
    print(report, end="")
    cfg.dump(out / "run.cfg")
    if cfg.figures:
        plotting = _plotting()
        plotting.training_history(history, out / "history.png")
        plotting.confusion(confusion, out / "confusion.png")
    return EXIT_OK


def cmd_metrics(args, cfg: RunConfig) -> int:
    reports = []
    for name in args.files:
        path = Path(name)
        if not path.is_file():
            raise DataError(f"no such file: {path}")
        mag, _ = read_matrix(path)
        if np.any(mag < 0):
            raise DataError(f"{path}: negative magnitudes")
        report = metrics.quality_report(mag, cfg.alpha)
        reports.append((name, report))
        print(f"{report.line()} file={name}")
        if args.cv_out:
            out = Path(args.cv_out)
            out.mkdir(parents=True, exist_ok=True)
            c_f, c_t = metrics.cv_vectors(mag)
            write_matrix(out / f"{path.stem}_cv_rows.csv", c_f[:, None])
            write_matrix(out / f"{path.stem}_cv_cols.csv", c_t[:, None])
    if args.compare:
        print("rank,file,bsq,renyi,q_f,q_t")
        ranked = sorted(reports, key=lambda item: item[1].bsq)
        for rank, (name, r) in enumerate(ranked, start=1):
            print(f"{rank},{name},{fmt(r.bsq)},{fmt(r.renyi)},{fmt(r.q_f)},{fmt(r.q_t)}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "transform": cmd_transform,
    "optimize-window": cmd_optimize_window,
    "transfer": cmd_transfer,
    "metrics": cmd_metrics,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = _resolve(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, FloatingPointError) as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (DataError, SignalFormatError, MatrixFormatError, metrics.DegenerateSpectrogram,
            ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
