"""Window-length descent on the BSQ loss alone (no classifier)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .mdstft import magnitude, mdstft, mdstft_backward
from .window import DEFAULT_SOFT_WIDTH, WindowParams, clamp_lengths


@dataclass
class DescentResult:
    params: WindowParams
    bsq: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    initial_bsq: float = float("nan")


def hard_bsq(frames, params: WindowParams) -> float:
    return metrics.bsq_loss(magnitude(mdstft(frames, params, 0.0)))


def soft_bsq_and_grad(frames, params: WindowParams, soft_width: float):
    mag = magnitude(mdstft(frames, params, soft_width))
    upstream = metrics.bsq_grad(mag)
    grad = mdstft_backward(frames, params, soft_width, upstream).d_lengths
    return metrics.bsq_loss(mag), grad


def optimize_window(frames, params: WindowParams, iters: int, lr: float = 100.0,
                    soft_width: float = DEFAULT_SOFT_WIDTH, shared: bool = False,
                    max_halvings: int = 30, tol: float = 1e-6) -> DescentResult:
    """Gradient descent on window lengths, gradient from the soft mask.

    A step is accepted only if the hard-mask BSQ does not rise by more than
    ``tol``; otherwise the step is halved up to ``max_halvings`` times and, failing
    that, skipped. ``shared=True`` ties all frames to one length (fixed-window
    baseline) and steps along the summed gradient.
    """
    if iters < 0:
        raise ValueError("iters must be >= 0")
    params = WindowParams(params.lengths.copy(), params.beta, params.support, params.hop)
    if shared:
        params.lengths[:] = params.lengths.mean()
    current = hard_bsq(frames, params)
    result = DescentResult(params, initial_bsq=current)
    for _ in range(iters):
        _, grad = soft_bsq_and_grad(frames, params, soft_width)
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError("non-finite window gradient")
        if shared:
            grad = np.full_like(grad, grad.sum())
        step = lr
        accepted = 0.0
        for _ in range(max_halvings + 1):
            trial = WindowParams(clamp_lengths(params.lengths - step * grad, params.support),
                                 params.beta, params.support, params.hop)
            value = hard_bsq(frames, trial)
            if value <= current + tol:
                params.lengths = trial.lengths
                current = value
                accepted = step
                break
            step *= 0.5
        result.bsq.append(current)
        result.steps.append(accepted)
    return result
