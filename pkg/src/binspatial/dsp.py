"""Spectral primitives: Hann window, STFT, GCC-PHAT, cross-correlation, fractional delay.

FFT convention: forward transforms are unscaled, inverse transforms carry 1/N.

Lag convention: a positive lag means the right channel lags the left one.
Delaying the right channel by +d samples moves the correlation peak to lag +d.
The cross-spectrum is therefore formed as ``conj(L) * R``, which is the
complex conjugate of ``L * conj(R)`` and only mirrors the lag axis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from binspatial.config import StftConfig
from binspatial.errors import DelayTooLarge, LagTooLarge, SignalTooShort
from binspatial.signal import BinauralSignal

# PHAT denominator floor, relative to the largest cross-spectrum magnitude.
PHAT_REL_EPS = 1e-12
PHAT_ABS_EPS = 1e-30
# Floor on the norm product of the plain correlation.
PLAIN_EPS = 1e-30


class CorrelationMethod(str, enum.Enum):
    GCC_PHAT = "gcc_phat"
    PLAIN = "plain"


@dataclass(frozen=True)
class Spectrogram:
    frames: np.ndarray  # complex, (U, V)
    config: StftConfig
    sample_rate_hz: int | None = None

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_bins(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class LagCorrelation:
    coeffs: np.ndarray
    method: CorrelationMethod
    sample_rate_hz: int

    @property
    def max_lag(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.max_lag, self.max_lag + 1)

    def at(self, lag: int) -> float:
        return float(self.coeffs[lag + self.max_lag])

    def peak_lag(self) -> int:
        return argmax_lag(self.coeffs)


def next_pow2(n: int) -> int:
    return 1 << max(int(n) - 1, 0).bit_length()


def correlation_length(num_samples: int) -> int:
    """Transform length for linear correlation of two length-T signals."""
    return next_pow2(2 * num_samples)


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window ``0.5 - 0.5 cos(2 pi k / n)``."""
    if n < 1:
        raise ValueError("window length must be >= 1")
    k = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)


def num_frames(num_samples: int, config: StftConfig) -> int:
    return (num_samples - config.window_len) // config.hop + 1


def stft(channel, config: StftConfig = StftConfig(), sample_rate_hz: int | None = None) -> Spectrogram:
    """One-sided STFT without centre padding: frame u covers [u*hop, u*hop + window_len)."""
    x = np.asarray(channel, dtype=np.float64)
    if x.size < config.window_len:
        raise SignalTooShort(f"{x.size} samples < window length {config.window_len}")
    frames = np.lib.stride_tricks.sliding_window_view(x, config.window_len)[:: config.hop]
    spec = np.fft.rfft(frames * hann_window(config.window_len), n=config.fft_len, axis=-1)
    return Spectrogram(spec, config, sample_rate_hz)


def spectral_energy(spectrum, n: int) -> float:
    """Time-domain energy of a real length-``n`` signal from its one-sided spectrum."""
    spectrum = np.asarray(spectrum)
    power = np.abs(spectrum) ** 2
    weights = np.full(power.shape[-1], 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    return float(np.sum(power * weights) / n)


def lag_indices(max_lag: int, n: int) -> np.ndarray:
    """Circular-buffer positions of lags -max_lag..max_lag."""
    return np.arange(-max_lag, max_lag + 1) % n


def check_lag(num_samples: int, max_lag: int) -> None:
    if num_samples < 2:
        raise SignalTooShort("correlation needs at least 2 samples")
    if max_lag < 0 or max_lag >= num_samples:
        raise LagTooLarge(f"max_lag={max_lag} must lie in [0, {num_samples})")


def phat_floor(magnitude: np.ndarray) -> float:
    peak = float(np.max(magnitude)) if magnitude.size else 0.0
    return PHAT_REL_EPS * peak if peak > 0 else PHAT_ABS_EPS


def gcc_phat(signal: BinauralSignal, max_lag: int) -> LagCorrelation:
    """GCC-PHAT over the whole signal, lags -max_lag..max_lag.

    Uses zero padding to the next power of two >= 2T so that the correlation
    is linear rather than circular.
    """
    check_lag(signal.num_samples, max_lag)
    coeffs = gcc_phat_forward(signal.left, signal.right, max_lag)[0]
    return LagCorrelation(coeffs, CorrelationMethod.GCC_PHAT, signal.sample_rate_hz)


def gcc_phat_forward(left: np.ndarray, right: np.ndarray, max_lag: int):
    """GCC-PHAT coefficients plus the intermediates needed to differentiate them.

    Returns ``(coeffs, n, L, R, cross, magnitude, eps)``.
    """
    n = correlation_length(left.size)
    lf = np.fft.rfft(left, n)
    rf = np.fft.rfft(right, n)
    cross = np.conj(lf) * rf
    mag = np.abs(cross)
    eps = phat_floor(mag)
    r = np.fft.irfft(cross / (mag + eps), n)
    return r[lag_indices(max_lag, n)], n, lf, rf, cross, mag, eps


def cross_correlation(signal: BinauralSignal, max_lag: int) -> LagCorrelation:
    """Plain cross-correlation normalised by ``||l|| * ||r||``.

    ``c[t] = sum_n l[n] r[n + t] / (||l|| ||r|| + eps)``
    """
    check_lag(signal.num_samples, max_lag)
    n = correlation_length(signal.num_samples)
    cross = np.conj(np.fft.rfft(signal.left, n)) * np.fft.rfft(signal.right, n)
    r = np.fft.irfft(cross, n)
    norm = np.linalg.norm(signal.left) * np.linalg.norm(signal.right) + PLAIN_EPS
    return LagCorrelation(r[lag_indices(max_lag, n)] / norm, CorrelationMethod.PLAIN, signal.sample_rate_hz)


def correlate(signal: BinauralSignal, max_lag: int, method=CorrelationMethod.GCC_PHAT) -> LagCorrelation:
    method = CorrelationMethod(method)
    if method is CorrelationMethod.GCC_PHAT:
        return gcc_phat(signal, max_lag)
    return cross_correlation(signal, max_lag)


def argmax_lag(coeffs) -> int:
    """Lag of the largest coefficient; ties go to the smallest |lag|, then the negative one."""
    coeffs = np.asarray(coeffs)
    max_lag = (coeffs.size - 1) // 2
    best = np.flatnonzero(coeffs == coeffs.max()) - max_lag
    return int(min(best, key=lambda t: (abs(t), t)))


def _phase_ramp(num_bins: int, n: int, delay: float) -> np.ndarray:
    k = np.arange(num_bins)
    return np.exp(-2j * np.pi * k * delay / n)


def fractional_delay(channel, delay: float) -> np.ndarray:
    """Delay by ``delay`` samples (may be fractional or negative) with a linear phase ramp.

    The ramp is applied on a zero-padded length-2T transform and the result
    truncated back to T samples. The Nyquist bin is kept real.
    """
    x = np.asarray(channel, dtype=np.float64)
    t = x.size
    if not abs(delay) < t / 4:
        raise DelayTooLarge(f"|delay|={abs(delay)} must be < T/4 = {t / 4}")
    n = 2 * t
    spec = np.fft.rfft(x, n) * _phase_ramp(n // 2 + 1, n, delay)
    spec[-1] = spec[-1].real
    return np.fft.irfft(spec, n)[:t]


def fractional_delay_derivative(channel, delay: float) -> np.ndarray:
    """Derivative of :func:`fractional_delay` with respect to ``delay``."""
    x = np.asarray(channel, dtype=np.float64)
    t = x.size
    if not abs(delay) < t / 4:
        raise DelayTooLarge(f"|delay|={abs(delay)} must be < T/4 = {t / 4}")
    n = 2 * t
    k = np.arange(n // 2 + 1)
    spec = np.fft.rfft(x, n) * _phase_ramp(k.size, n, delay) * (-2j * np.pi * k / n)
    spec[-1] = spec[-1].real
    return np.fft.irfft(spec, n)[:t]
