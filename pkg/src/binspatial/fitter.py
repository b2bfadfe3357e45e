"""Gradient-descent fit of a two-parameter binaural renderer (level and time difference).

The renderer is :func:`binspatial.scene.render`; its parameter Jacobian is
chained with the waveform gradients from :mod:`binspatial.grad`.

For broadband sources the delay landscape is sinc-shaped: outside a basin
about a sample or two wide it is flat and rippled, and descent from a distant
start stalls in a side lobe. Fits therefore run a coarse-to-fine schedule.
Early stages minimise the same combined loss with low-passed copies of the
source and the target, which widens the basin; the last stage uses the
full-band signals. A schedule of ``((1.0, n),)`` descends on the unmodified
objective only.

The signal losses are in dB, so their gradient grows like 1/error near an
exact match and a fixed step keeps overshooting. Steps that would raise the
loss are therefore halved until they do not.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from binspatial import grad, losses, metrics
from binspatial.config import LossWeights, SpatialKind, StftConfig, max_lag_for
from binspatial.errors import DelayTooLarge, DivergenceDetected
from binspatial.scene import render
from binspatial.signal import BinauralSignal

LN10_40 = np.log(10.0) / 40.0

# (cutoff as a fraction of Nyquist, descent steps); the last stage should be full band.
DEFAULT_SCHEDULE = ((1 / 16, 40), (1 / 4, 40), (1.0, 80))
MAX_HALVINGS = 8
# Gradients below this (in loss units per dB or per sample) count as zero.
GRAD_TOL = 1e-12

ILD_TOLERANCE_DB = 0.05
DIVERGENCE_LIMIT = 1e6
# Beyond this the rendered gains overflow; treated as divergence.
MAX_GAIN_DB = 600.0


@dataclass(frozen=True)
class RendererParams:
    gain_diff_db: float = 0.0
    delay_samples: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.gain_diff_db, self.delay_samples])


@dataclass(frozen=True)
class FitOptions:
    learning_rate: float | tuple = (0.3, 0.003)
    max_iters: int = 500
    tol: float = 1e-9
    schedule: tuple = DEFAULT_SCHEDULE
    stft: StftConfig = field(default_factory=StftConfig)
    max_lag: int | None = None
    level_db: float = 0.0


@dataclass
class FitResult:
    final_params: RendererParams
    loss_trajectory: np.ndarray
    final_delta_ild_db: float
    final_itd_error_samples: int
    iterations_used: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "final_params": asdict(self.final_params),
            "loss_trajectory": [float(v) for v in self.loss_trajectory],
            "final_delta_ild_db": float(self.final_delta_ild_db),
            "final_itd_error_samples": int(self.final_itd_error_samples),
            "iterations_used": int(self.iterations_used),
            "converged": bool(self.converged),
        }


def fitter_weights() -> LossWeights:
    """alpha = 1 signal loss plus ITD (beta = 1) and ILD (beta = 0.1) terms."""
    return LossWeights(alpha=1.0, beta=1.0, spatial_kind=SpatialKind.ITD,
                       extra_spatial=((SpatialKind.ILD, 0.1),))


class _Renderer:
    """:func:`binspatial.scene.render` for one source, with its parameter Jacobian.

    The zero-padded source spectrum is computed once; each call costs four
    inverse transforms (two delayed channels and their delay derivatives).
    """

    def __init__(self, mono, sample_rate_hz: int, level_db: float = 0.0):
        self.mono = np.asarray(mono, dtype=np.float64)
        self.t = self.mono.size
        self.n = 2 * self.t
        self.sample_rate_hz = sample_rate_hz
        self.level = 10.0 ** (level_db / 20.0)
        self.spectrum = np.fft.rfft(self.mono, self.n)
        self.omega = -2j * np.pi * np.arange(self.spectrum.size) / self.n
        self.norm = np.linalg.norm(self.mono)

    def _channel(self, delay: float):
        # Unit-energy delayed copy and its derivative in ``delay``.
        if not abs(delay) < self.t / 4:
            raise DelayTooLarge(f"|delay|={abs(delay)} must be < T/4 = {self.t / 4}")
        shifted = self.spectrum * np.exp(self.omega * delay)
        slope = shifted * self.omega
        shifted[-1] = shifted[-1].real
        slope[-1] = slope[-1].real
        dy = np.fft.irfft(slope, self.n)[: self.t]
        if delay == 0:
            y = self.mono.copy()
            return y, dy - y * (np.dot(y, dy) / self.norm**2)
        y = np.fft.irfft(shifted, self.n)[: self.t]
        ny = np.linalg.norm(y)
        scale = self.norm / ny
        return y * scale, scale * (dy - y * (np.dot(y, dy) / ny**2))

    def __call__(self, params: RendererParams):
        """``(signal, d_gain, d_delay)``; the derivatives are (2, T) arrays."""
        g_l = self.level * 10.0 ** (params.gain_diff_db / 40.0)
        g_r = self.level * 10.0 ** (-params.gain_diff_db / 40.0)
        ul, dul = self._channel(-params.delay_samples / 2.0)
        ur, dur = self._channel(params.delay_samples / 2.0)
        signal = BinauralSignal(g_l * ul, g_r * ur, self.sample_rate_hz)
        d_gain = np.stack([LN10_40 * signal.left, -LN10_40 * signal.right])
        d_delay = np.stack([-0.5 * g_l * dul, 0.5 * g_r * dur])
        return signal, d_gain, d_delay


def render_with_jacobian(mono, params: RendererParams, sample_rate_hz: int, level_db: float = 0.0):
    """Rendered signal plus its derivatives w.r.t. (gain_diff_db, delay_samples)."""
    return _Renderer(mono, sample_rate_hz, level_db)(params)


def lowpass(x, cutoff: float) -> np.ndarray:
    """Zero-phase raised-cosine low-pass (``cutoff`` as a fraction of Nyquist).

    Applied on a length-2T transform and truncated back to T samples.
    """
    x = np.asarray(x, dtype=np.float64)
    t = x.shape[-1]
    n = 2 * t
    f = np.arange(n // 2 + 1) / (n // 2)
    ramp = np.clip((cutoff - f) / (0.2 * cutoff), 0.0, 1.0)
    mask = 0.5 - 0.5 * np.cos(np.pi * ramp)
    return np.fft.irfft(np.fft.rfft(x, n, axis=-1) * mask, n, axis=-1)[..., :t]


def _stage_problem(mono, target: BinauralSignal, band: float):
    if band >= 1.0:
        return mono, target
    lp = lowpass(target.as_array().T, band)
    return lowpass(mono, band), BinauralSignal(lp[0], lp[1], target.sample_rate_hz)


def loss_and_param_grad(renderer: _Renderer, target: BinauralSignal, params: RendererParams,
                        weights: LossWeights, stft: StftConfig = StftConfig(), max_lag: int | None = None,
                        ref_cache: dict | None = None):
    """Combined loss of the rendered estimate and its gradient in (gain_diff_db, delay_samples)."""
    estimate, d_gain, d_delay = renderer(params)
    res = grad.loss_value_and_grad(grad.LossKind.COMBINED, target, estimate, weights, stft, max_lag, ref_cache)
    g = np.stack([res.grad_left, res.grad_right])
    return res.value, np.array([np.sum(g * d_gain), np.sum(g * d_delay)])


def _cue_errors(mono, target, params, max_lag, level_db):
    est = render(mono, params.gain_diff_db, params.delay_samples, target.sample_rate_hz, level_db)
    d_ild = losses.ild_loss(target, est)
    itd_err = abs(metrics.itd_lag(target, max_lag=max_lag) - metrics.itd_lag(est, max_lag=max_lag))
    return float(d_ild), int(itd_err)


def fit_renderer(source, target: BinauralSignal, init: RendererParams = RendererParams(),
                 weights: LossWeights | None = None, opt: FitOptions = FitOptions()) -> FitResult:
    """Fit (gain_diff_db, delay_samples) so the rendered source matches ``target``.

    Each stage of ``opt.schedule`` runs gradient descent with the fixed
    per-parameter rates ``opt.learning_rate`` (the delay rate divided by
    band squared). A step that would raise the loss is halved until it does
    not, at most ``MAX_HALVINGS`` times; the stage ends when no descent step
    is found, when the loss drops by less than ``opt.tol`` over 10 steps, or
    after its iteration count. Every loss evaluation counts towards
    ``opt.max_iters``.

    ``loss_trajectory`` holds the accepted full-band losses. ``converged``
    means the final level error is below 0.05 dB and the GCC-PHAT ITD of the
    fit matches the target's.
    """
    mono = np.asarray(source, dtype=np.float64)
    weights = weights or fitter_weights()
    max_lag = opt.max_lag if opt.max_lag is not None else max_lag_for(target.sample_rate_hz)
    if not abs(init.delay_samples) <= max_lag:
        raise ValueError(f"|delay_samples|={abs(init.delay_samples)} exceeds max_lag={max_lag}")
    if mono.size != target.num_samples:
        raise ValueError(f"source has {mono.size} samples, target {target.num_samples}")
    lr = np.broadcast_to(np.asarray(opt.learning_rate, dtype=np.float64), (2,))
    theta = init.as_array().astype(np.float64)
    trajectory: list[float] = []
    budget = max(int(opt.max_iters), 0)
    used = 0
    if budget == 0:
        d_ild, itd_err = _cue_errors(mono, target, init, max_lag, opt.level_db)
        return FitResult(init, np.array([]), d_ild, itd_err, 0, False)

    # Iteration 0: a stationary start needs no fitting.
    value, g = loss_and_param_grad(_Renderer(mono, target.sample_rate_hz, opt.level_db), target, init,
                                   weights, opt.stft, max_lag)
    if np.max(np.abs(g)) < GRAD_TOL:
        d_ild, itd_err = _cue_errors(mono, target, init, max_lag, opt.level_db)
        converged = bool(d_ild < ILD_TOLERANCE_DB and itd_err == 0)
        return FitResult(init, np.array([value]), d_ild, itd_err, 0, converged)

    for band, stage_iters in opt.schedule:
        if used >= budget:
            break
        stage_mono, stage_target = _stage_problem(mono, target, band)
        renderer = _Renderer(stage_mono, target.sample_rate_hz, opt.level_db)
        cache: dict = {}

        def evaluate(th):
            nonlocal used
            used += 1
            if not (np.all(np.isfinite(th)) and abs(th[0]) <= MAX_GAIN_DB):
                raise DivergenceDetected(f"parameters {th} at evaluation {used}")
            value, g = loss_and_param_grad(renderer, stage_target, RendererParams(*th), weights,
                                           opt.stft, max_lag, cache)
            if not np.isfinite(value) or abs(value) > DIVERGENCE_LIMIT:
                raise DivergenceDetected(f"loss {value} at evaluation {used}")
            return value, g

        rate = lr * np.array([1.0, 1.0 / band**2])
        value, g = evaluate(theta)
        history = [value]
        for _ in range(stage_iters):
            if np.max(np.abs(g)) < GRAD_TOL or used >= budget:
                break
            step = rate * g
            for _ in range(MAX_HALVINGS):
                cand = theta - step
                cand[1] = float(np.clip(cand[1], -max_lag, max_lag))
                cand_value, cand_g = evaluate(cand)
                if cand_value <= value or used >= budget:
                    break
                step = step / 2
            if cand_value > value:
                break
            theta, value, g = cand, cand_value, cand_g
            history.append(value)
            if band >= 1.0:
                trajectory.append(value)
            if len(history) > 10 and history[-11] - history[-1] < opt.tol:
                break
        if band >= 1.0 and not trajectory:
            trajectory.append(value)

    final = RendererParams(float(theta[0]), float(theta[1]))
    d_ild, itd_err = _cue_errors(mono, target, final, max_lag, opt.level_db)
    converged = bool(d_ild < ILD_TOLERANCE_DB and itd_err == 0)
    return FitResult(final, np.array(trajectory), d_ild, itd_err, used, converged)
