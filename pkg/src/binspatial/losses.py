"""Training losses: signal-level (SNR, SI-SNR) and spatial (ILD, IPD, ITD) terms.

All signal-level quantities are returned in dB with the loss orientation
(negated) where the name says ``loss``. Spatial losses are nonnegative.
"""

from __future__ import annotations

import numpy as np

from binspatial import dsp
from binspatial.config import SNR_CLAMP, LossWeights, SpatialKind, StftConfig, max_lag_for
from binspatial.errors import LengthMismatch, SignalTooShort, ZeroChannel, ZeroEstimate, ZeroReference
from binspatial.signal import BinauralSignal, check_compatible

DB = 10.0 / np.log(10.0)


def _pair(reference, estimate) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(reference, dtype=np.float64)
    s_hat = np.asarray(estimate, dtype=np.float64)
    if s.shape != s_hat.shape:
        raise LengthMismatch(f"reference {s.shape} vs estimate {s_hat.shape}")
    return s, s_hat


def snr(reference, estimate) -> float:
    """``10 log10(||s||^2 / max(||s - s_hat||^2, 1e-10 ||s||^2))``, capped at 100 dB."""
    s, s_hat = _pair(reference, estimate)
    power = float(np.dot(s, s))
    if power == 0.0:
        raise ZeroReference("reference has zero energy")
    err = s - s_hat
    noise = max(float(np.dot(err, err)), SNR_CLAMP * power)
    return DB * np.log(power / noise)


def si_snr(reference, estimate) -> float:
    """Scale-invariant SNR of zero-mean versions of both inputs."""
    s, s_hat = _pair(reference, estimate)
    s = s - s.mean()
    s_hat = s_hat - s_hat.mean()
    power = float(np.dot(s, s))
    if power == 0.0:
        raise ZeroReference("reference has zero energy after mean removal")
    if not np.any(s_hat):
        raise ZeroEstimate("estimate has zero energy after mean removal")
    target = (np.dot(s_hat, s) / power) * s
    err = s_hat - target
    t_pow = float(np.dot(target, target))
    noise = max(float(np.dot(err, err)), SNR_CLAMP * t_pow)
    return DB * np.log(t_pow / noise)


def snr_loss(reference: BinauralSignal, estimate: BinauralSignal) -> float:
    """Negative channel-averaged SNR."""
    check_compatible(reference, estimate)
    return -(0.5 * snr(reference.right, estimate.right) + 0.5 * snr(reference.left, estimate.left))


def si_snr_loss(reference: BinauralSignal, estimate: BinauralSignal) -> float:
    check_compatible(reference, estimate)
    return -(0.5 * si_snr(reference.right, estimate.right) + 0.5 * si_snr(reference.left, estimate.left))


def binaural_signal_loss(reference: BinauralSignal, estimate: BinauralSignal,
                         weights: LossWeights = LossWeights()) -> float:
    return (weights.snr_weight * snr_loss(reference, estimate)
            + weights.si_snr_weight * si_snr_loss(reference, estimate))


def ild(signal: BinauralSignal) -> float:
    """Level difference ``10 log10(||l||^2 / ||r||^2)`` in dB."""
    el = float(np.dot(signal.left, signal.left))
    er = float(np.dot(signal.right, signal.right))
    if el == 0.0 or er == 0.0:
        raise ZeroChannel("ILD undefined for a silent channel")
    return DB * (np.log(el) - np.log(er))


def ild_loss(reference: BinauralSignal, estimate: BinauralSignal) -> float:
    check_compatible(reference, estimate)
    return abs(ild(reference) - ild(estimate))


def fold_atan(im, re) -> np.ndarray:
    """``atan(im / re)`` with re == 0 mapped to sign(im) * pi/2 and 0/0 to 0.

    Unlike ``arctan2`` this folds phase differences onto [-pi/2, pi/2].
    """
    im = np.asarray(im, dtype=np.float64)
    re = np.asarray(re, dtype=np.float64)
    out = np.sign(im) * (np.pi / 2)
    nz = re != 0
    out[nz] = np.arctan(im[nz] / re[nz])
    return out


def cross_spectrum(signal: BinauralSignal, config: StftConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(S_l, S_r, S_l * conj(S_r)) for a binaural signal."""
    if signal.num_samples < config.window_len:
        raise SignalTooShort(f"{signal.num_samples} samples < window length {config.window_len}")
    sl = dsp.stft(signal.left, config).frames
    sr = dsp.stft(signal.right, config).frames
    return sl, sr, sl * np.conj(sr)


def ipd(signal: BinauralSignal, config: StftConfig = StftConfig()) -> np.ndarray:
    """Per-bin phase difference, (U, V) radians."""
    _, _, z = cross_spectrum(signal, config)
    return fold_atan(z.imag, z.real)


def ipd_loss(reference: BinauralSignal, estimate: BinauralSignal,
             config: StftConfig = StftConfig()) -> float:
    """Mean squared IPD difference over every time-frequency bin (no activity mask)."""
    check_compatible(reference, estimate)
    diff = ipd(reference, config) - ipd(estimate, config)
    return float(np.mean(diff**2))


def _default_lag(signal: BinauralSignal, max_lag):
    return max_lag_for(signal.sample_rate_hz) if max_lag is None else int(max_lag)


def itd_loss(reference: BinauralSignal, estimate: BinauralSignal, max_lag: int | None = None) -> float:
    """Mean squared difference of GCC-PHAT coefficients over lags -max_lag..max_lag."""
    check_compatible(reference, estimate)
    max_lag = _default_lag(reference, max_lag)
    c_ref = dsp.gcc_phat(reference, max_lag).coeffs
    c_est = dsp.gcc_phat(estimate, max_lag).coeffs
    return float(np.mean((c_ref - c_est) ** 2))


def spatial_loss(kind: SpatialKind | str, reference: BinauralSignal, estimate: BinauralSignal,
                 stft: StftConfig = StftConfig(), max_lag: int | None = None) -> float:
    kind = SpatialKind(kind)
    if kind is SpatialKind.ILD:
        return ild_loss(reference, estimate)
    if kind is SpatialKind.IPD:
        return ipd_loss(reference, estimate, stft)
    if kind is SpatialKind.ITD:
        return itd_loss(reference, estimate, max_lag)
    return 0.0


def combined_loss(reference: BinauralSignal, estimate: BinauralSignal, weights: LossWeights,
                  stft: StftConfig = StftConfig(), max_lag: int | None = None) -> float:
    """``alpha * signal_loss + sum(beta_k * spatial_loss_k)``.

    Terms with a zero weight are skipped entirely, so ``beta == 0`` returns
    exactly the weighted signal loss.
    """
    total = 0.0
    if weights.alpha != 0:
        total += weights.alpha * binaural_signal_loss(reference, estimate, weights)
    for kind, beta in weights.spatial_terms():
        if beta != 0:
            total += beta * spatial_loss(kind, reference, estimate, stft, max_lag)
    return total
