"""Loss values with exact gradients w.r.t. the estimate, and finite-difference checks.

Gradients are hand-written adjoints of the forward code in :mod:`binspatial.losses`.
For a complex intermediate ``Z`` we carry ``H`` such that ``dL = Re(sum(conj(H) * dZ))``.
The adjoint of a zero-padded ``rfft`` is then ``Re(sum_k H_k exp(+2j pi k n / N))``.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from binspatial import dsp, losses
from binspatial.config import SNR_CLAMP, LossWeights, SpatialKind, StftConfig, max_lag_for
from binspatial.errors import GradCheckFailed
from binspatial.signal import BinauralSignal, check_compatible

DB = losses.DB


class LossKind(str, enum.Enum):
    SNR = "snr"
    SI_SNR = "si_snr"
    SIGNAL = "signal"
    ILD = "ild"
    IPD = "ipd"
    ITD = "itd"
    COMBINED = "combined"


THRESHOLDS = {
    LossKind.SNR: 1e-6,
    LossKind.SI_SNR: 1e-6,
    LossKind.SIGNAL: 1e-6,
    LossKind.ILD: 1e-6,
    LossKind.IPD: 1e-5,
    LossKind.ITD: 1e-4,
}

_SPATIAL_TO_KIND = {SpatialKind.ILD: LossKind.ILD, SpatialKind.IPD: LossKind.IPD, SpatialKind.ITD: LossKind.ITD}

DEFAULT_COMBINED = LossWeights.preset(SpatialKind.ITD)


@dataclass(frozen=True)
class GradResult:
    value: float
    grad_left: np.ndarray
    grad_right: np.ndarray

    def channel(self, ch: int) -> np.ndarray:
        return self.grad_left if ch == 0 else self.grad_right


@dataclass
class GradCheckReport:
    loss_kind: str
    max_abs_error: float
    max_rel_error: float
    num_points_checked: int
    step_size: float
    threshold: float
    trials: int = 1
    num_skipped: int = 0

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_error <= self.threshold)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _rfft_adjoint(h: np.ndarray, n: int, length: int) -> np.ndarray:
    """Gradient w.r.t. real x of ``Re sum(conj(h) * rfft(x, n))``, along the last axis."""
    y = np.array(h, dtype=np.complex128)
    stop = n // 2 if n % 2 == 0 else y.shape[-1]
    y[..., 1:stop] *= 0.5
    return n * np.fft.irfft(y, n)[..., :length]


def _irfft_adjoint(g: np.ndarray, n: int) -> np.ndarray:
    """``H`` for ``W`` given ``dL/dr`` where ``r = irfft(W, n)``."""
    h = np.fft.rfft(g, n) / n
    stop = n // 2 if n % 2 == 0 else h.size
    h[1:stop] *= 2.0
    return h


def snr_with_grad(reference, estimate) -> tuple[float, np.ndarray]:
    """SNR in dB and its gradient w.r.t. the estimate."""
    s, s_hat = np.asarray(reference, float), np.asarray(estimate, float)
    value = losses.snr(s, s_hat)
    power = float(np.dot(s, s))
    err = s - s_hat
    noise = float(np.dot(err, err))
    if noise <= SNR_CLAMP * power:
        return value, np.zeros_like(s_hat)
    return value, 2.0 * DB * err / noise


def si_snr_with_grad(reference, estimate) -> tuple[float, np.ndarray]:
    s, s_hat = np.asarray(reference, float), np.asarray(estimate, float)
    value = losses.si_snr(s, s_hat)
    s0 = s - s.mean()
    x = s_hat - s_hat.mean()
    power = float(np.dot(s0, s0))
    a = float(np.dot(x, s0)) / power
    err = x - a * s0
    noise = float(np.dot(err, err))
    if noise <= SNR_CLAMP * a * a * power or a == 0.0:
        return value, np.zeros_like(s_hat)
    g = DB * (2.0 * s0 / (a * power) - 2.0 * err / noise)
    return value, g - g.mean()


def _channel_loss(fn, reference: BinauralSignal, estimate: BinauralSignal):
    # -(SNR_r / 2 + SNR_l / 2), summed in the same order as the losses module
    vr, gr = fn(reference.right, estimate.right)
    vl, gl = fn(reference.left, estimate.left)
    return -(0.5 * vr + 0.5 * vl), -0.5 * gl, -0.5 * gr


def _signal_grad(kind: LossKind, reference: BinauralSignal, estimate: BinauralSignal,
                 weights: LossWeights):
    if kind is LossKind.SNR:
        return _channel_loss(snr_with_grad, reference, estimate)
    if kind is LossKind.SI_SNR:
        return _channel_loss(si_snr_with_grad, reference, estimate)
    v1, l1, r1 = _channel_loss(snr_with_grad, reference, estimate)
    v2, l2, r2 = _channel_loss(si_snr_with_grad, reference, estimate)
    ws, wi = weights.snr_weight, weights.si_snr_weight
    return ws * v1 + wi * v2, ws * l1 + wi * l2, ws * r1 + wi * r2


def _cached(cache, key, compute):
    if cache is None:
        return compute()
    if key not in cache:
        cache[key] = compute()
    return cache[key]


def _ild_grad(reference: BinauralSignal, estimate: BinauralSignal, cache=None):
    diff = _cached(cache, "ild", lambda: losses.ild(reference)) - losses.ild(estimate)
    value = abs(diff)
    if diff == 0.0:
        return value, np.zeros(estimate.num_samples), np.zeros(estimate.num_samples)
    sign = np.sign(diff)
    el = np.dot(estimate.left, estimate.left)
    er = np.dot(estimate.right, estimate.right)
    # d|ref - est| / d est = -sign(ref - est) * d ILD(est)
    return value, -sign * DB * 2.0 * estimate.left / el, sign * DB * 2.0 * estimate.right / er


def _stft_adjoint(h: np.ndarray, config: StftConfig, num_samples: int) -> np.ndarray:
    frames = _rfft_adjoint(h, config.fft_len, config.window_len) * dsp.hann_window(config.window_len)
    out = np.zeros(num_samples)
    starts = np.arange(frames.shape[0]) * config.hop
    np.add.at(out, starts[:, None] + np.arange(config.window_len)[None, :], frames)
    return out


def _ipd_grad(reference: BinauralSignal, estimate: BinauralSignal, config: StftConfig, cache=None):
    ipd_ref = _cached(cache, ("ipd", config), lambda: losses.ipd(reference, config))
    sl, sr, z = losses.cross_spectrum(estimate, config)
    phi = losses.fold_atan(z.imag, z.real)
    diff = ipd_ref - phi
    value = float(np.mean(diff**2))
    g = -2.0 * diff / phi.size
    # Wherever Re(z) != 0 the folded phase has the derivative of arg(S_l) - arg(S_r).
    live = (z.real != 0) & (np.abs(z) > 0)
    g = np.where(live, g, 0.0)
    pl = np.abs(sl) ** 2
    pr = np.abs(sr) ** 2
    hl = np.where(live, 1j * g * sl / np.where(live, pl, 1.0), 0.0)
    hr = np.where(live, -1j * g * sr / np.where(live, pr, 1.0), 0.0)
    n = estimate.num_samples
    return value, _stft_adjoint(hl, config, n), _stft_adjoint(hr, config, n)


def _itd_grad(reference: BinauralSignal, estimate: BinauralSignal, max_lag: int, cache=None):
    dsp.check_lag(estimate.num_samples, max_lag)
    c_ref = _cached(cache, ("gcc", max_lag), lambda: dsp.gcc_phat(reference, max_lag).coeffs)
    t = estimate.num_samples
    c, n, lf, rf, x, mag, eps = dsp.gcc_phat_forward(estimate.left, estimate.right, max_lag)
    value = float(np.mean((c_ref - c) ** 2))
    idx = dsp.lag_indices(max_lag, n)
    g = np.zeros(n)
    g[idx] = -2.0 * (c_ref - c) / idx.size
    hw = _irfft_adjoint(g, n)
    # eps is held constant in the derivative.
    safe = np.where(mag > 0, mag, 1.0)
    radial = np.where(mag > 0, np.real(np.conj(hw) * x) / (safe * (mag + eps) ** 2), 0.0)
    hx = hw / (mag + eps) - radial * x
    hl = np.conj(hx) * rf
    hr = hx * lf
    return value, _rfft_adjoint(hl, n, t), _rfft_adjoint(hr, n, t)


def _grad_parts(kind: LossKind, reference, estimate, weights, stft, max_lag, cache=None):
    if kind in (LossKind.SNR, LossKind.SI_SNR, LossKind.SIGNAL):
        return _signal_grad(kind, reference, estimate, weights)
    if kind is LossKind.ILD:
        return _ild_grad(reference, estimate, cache)
    if kind is LossKind.IPD:
        return _ipd_grad(reference, estimate, stft, cache)
    if kind is LossKind.ITD:
        return _itd_grad(reference, estimate, max_lag, cache)
    total = 0.0
    gl = np.zeros(estimate.num_samples)
    gr = np.zeros(estimate.num_samples)
    if weights.alpha != 0:
        v, sl, sr = _signal_grad(LossKind.SIGNAL, reference, estimate, weights)
        total += weights.alpha * v
        gl += weights.alpha * sl
        gr += weights.alpha * sr
    for spatial, beta in weights.spatial_terms():
        if beta != 0:
            v, pl, pr = _grad_parts(_SPATIAL_TO_KIND[spatial], reference, estimate, weights, stft, max_lag, cache)
            total += beta * v
            gl += beta * pl
            gr += beta * pr
    return total, gl, gr


def loss_value(kind, reference: BinauralSignal, estimate: BinauralSignal,
               weights: LossWeights | None = None, stft: StftConfig = StftConfig(),
               max_lag: int | None = None) -> float:
    """Value of loss ``kind``, computed by :mod:`binspatial.losses`."""
    kind = LossKind(kind)
    if max_lag is None:
        max_lag = max_lag_for(reference.sample_rate_hz)
    if kind is LossKind.SNR:
        return losses.snr_loss(reference, estimate)
    if kind is LossKind.SI_SNR:
        return losses.si_snr_loss(reference, estimate)
    if kind is LossKind.SIGNAL:
        return losses.binaural_signal_loss(reference, estimate, weights or LossWeights())
    if kind is LossKind.ILD:
        return losses.ild_loss(reference, estimate)
    if kind is LossKind.IPD:
        return losses.ipd_loss(reference, estimate, stft)
    if kind is LossKind.ITD:
        return losses.itd_loss(reference, estimate, max_lag)
    return losses.combined_loss(reference, estimate, weights or DEFAULT_COMBINED, stft, max_lag)


def loss_value_and_grad(kind, reference: BinauralSignal, estimate: BinauralSignal,
                        weights: LossWeights | None = None, stft: StftConfig = StftConfig(),
                        max_lag: int | None = None, ref_cache: dict | None = None) -> GradResult:
    """Loss value and its gradient w.r.t. both channels of ``estimate``.

    ``weights`` is used by the signal and combined losses; the combined loss
    defaults to alpha = 1 with a beta = 1 ITD term. Kinks (``|.|`` at zero,
    clamped SNR) get a zero subgradient. The value is computed by the same
    operations as :mod:`binspatial.losses`. ``ref_cache`` (a dict) keeps
    reference-side quantities between calls with the same reference.
    """
    kind = LossKind(kind)
    check_compatible(reference, estimate)
    if max_lag is None:
        max_lag = max_lag_for(reference.sample_rate_hz)
    if weights is None:
        weights = DEFAULT_COMBINED if kind is LossKind.COMBINED else LossWeights()
    value, gl, gr = _grad_parts(kind, reference, estimate, weights, stft, max_lag, ref_cache)
    return GradResult(float(value), gl, gr)


def _as_loss(kind_or_fn, weights, stft, max_lag) -> Callable[[BinauralSignal, BinauralSignal], float]:
    if callable(kind_or_fn) and not isinstance(kind_or_fn, (str, LossKind)):
        return kind_or_fn
    kind = LossKind(kind_or_fn)
    return lambda ref, est: loss_value(kind, ref, est, weights, stft, max_lag)


def _perturbed(estimate: BinauralSignal, ch: int, i: int, delta: float) -> BinauralSignal:
    left, right = estimate.left.copy(), estimate.right.copy()
    (left if ch == 0 else right)[i] += delta
    return BinauralSignal(left, right, estimate.sample_rate_hz)


def finite_diff_grad(kind, reference: BinauralSignal, estimate: BinauralSignal, step: float,
                     coords, weights: LossWeights | None = None, stft: StftConfig = StftConfig(),
                     max_lag: int | None = None) -> np.ndarray:
    """Central differences at ``coords``, a sequence of (channel, index) pairs.

    ``kind`` may be a :class:`LossKind` or any callable ``f(reference, estimate)``.
    Returns one derivative per coordinate, in order.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    f = _as_loss(kind, weights, stft, max_lag)
    out = np.empty(len(coords))
    for j, (ch, i) in enumerate(coords):
        up = f(reference, _perturbed(estimate, ch, i, step))
        down = f(reference, _perturbed(estimate, ch, i, -step))
        out[j] = (up - down) / (2.0 * step)
    return out


FOLD_MARGIN = 1e-3
# Distance to a zero spectral bin, in single-sample steps, below which a check is skipped.
SINGULAR_MARGIN = 1000.0


def _covering_frames(i: int, num_samples: int, config: StftConfig) -> slice:
    last = min(i // config.hop, dsp.num_frames(num_samples, config) - 1)
    first = max(0, -(-(i - config.window_len + 1) // config.hop))
    return slice(first, last + 1)


def ipd_unsafe(estimate: BinauralSignal, ch: int, i: int, step: float,
               stft: StftConfig = StftConfig(), margin: float = FOLD_MARGIN,
               singular_margin: float = SINGULAR_MARGIN) -> bool:
    """True where central differences cannot resolve the IPD slope at sample (ch, i).

    Two cases: perturbing by +-step moves some bin by more than ``margin`` rad
    (a jump across the +-pi/2 fold; smooth bins move by O(step)), or a frame
    covering the sample has an STFT bin within ``singular_margin`` steps of
    zero, where the phase itself is undefined.
    """
    channel = estimate.left if ch == 0 else estimate.right
    frames = dsp.stft(channel, stft).frames[_covering_frames(i, estimate.num_samples, stft)]
    if frames.size and np.min(np.abs(frames)) < singular_margin * step:
        return True
    base = losses.ipd(estimate, stft)
    for delta in (step, -step):
        moved = losses.ipd(_perturbed(estimate, ch, i, delta), stft)
        if np.max(np.abs(moved - base)) > margin:
            return True
    return False


def threshold_for(kind, weights: LossWeights | None = None) -> float:
    kind = LossKind(kind)
    if kind is not LossKind.COMBINED:
        return THRESHOLDS[kind]
    weights = weights or DEFAULT_COMBINED
    kinds = [LossKind.SIGNAL] + [_SPATIAL_TO_KIND[k] for k, b in weights.spatial_terms() if b != 0]
    return max(THRESHOLDS[k] for k in kinds)


def _uses(spatial: SpatialKind, kind: LossKind, weights: LossWeights) -> bool:
    if kind is _SPATIAL_TO_KIND[spatial]:
        return True
    return kind is LossKind.COMBINED and any(k is spatial and b != 0 for k, b in weights.spatial_terms())


def near_phat_singularity(estimate: BinauralSignal, step: float, margin: float = SINGULAR_MARGIN) -> bool:
    """True if some cross-spectrum bin lies within ``margin`` single-sample steps of zero.

    PHAT whitening is singular at a zero bin; central differences that straddle
    such a bin measure curvature rather than slope.
    """
    n = dsp.correlation_length(estimate.num_samples)
    lf = np.fft.rfft(estimate.left, n)
    rf = np.fft.rfft(estimate.right, n)
    reach = step * (np.abs(lf) + np.abs(rf))
    return bool(np.any(np.abs(np.conj(lf) * rf) < margin * reach))


def random_pair(rng: np.random.Generator, num_samples: int, sample_rate_hz: int = 44100,
                ) -> tuple[BinauralSignal, BinauralSignal]:
    """Seeded reference/estimate pair with distinct interaural cues and ~5 dB SNR."""
    ref = rng.standard_normal((2, num_samples))
    ref[1] = 0.7 * np.roll(ref[0], 7) + 0.5 * ref[1]
    est = 0.9 * ref + 0.4 * rng.standard_normal((2, num_samples))
    est[1] += 0.4 * np.roll(ref[1], 2)
    return (BinauralSignal(ref[0], ref[1], sample_rate_hz),
            BinauralSignal(est[0], est[1], sample_rate_hz))


def relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """|a - f| / max(|a|, |f|, 1e-2 * max|f|) per coordinate.

    The floor keeps round-off on near-zero coordinates from dominating.
    """
    floor = 1e-2 * max(float(np.max(np.abs(numeric))), 1e-300)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def grad_check(kind, trials: int = 10, num_samples: int = 4096, seed: int = 0, num_coords: int = 64,
               weights: LossWeights | None = None, stft: StftConfig = StftConfig(),
               max_lag: int | None = None, sample_rate_hz: int = 44100, raise_on_fail: bool = True,
               corrupt: bool = False) -> GradCheckReport:
    """Compare analytic and central-difference gradients on seeded random pairs.

    Each trial draws its own pair from ``default_rng([seed, trial])`` and
    checks ``num_coords`` random sample coordinates with step
    ``1e-4 * RMS(estimate)``. For IPD losses, coordinates next to the fold or
    to a zero STFT bin are skipped and replaced (see :func:`ipd_unsafe`); for ITD losses,
    pairs near a PHAT singularity are redrawn. ``corrupt`` flips
    the sign of one analytic coordinate, to exercise the failure path.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    kind = LossKind(kind)
    if weights is None:
        weights = DEFAULT_COMBINED if kind is LossKind.COMBINED else LossWeights()
    if max_lag is None:
        max_lag = max_lag_for(sample_rate_hz)
    threshold = threshold_for(kind, weights)
    skip_folds = _uses(SpatialKind.IPD, kind, weights)
    guard_phat = _uses(SpatialKind.ITD, kind, weights)
    max_abs = max_rel = 0.0
    checked = skipped = 0
    step = 0.0
    draw = 0
    for trial in range(trials):
        while True:
            rng = np.random.default_rng([seed, draw])
            draw += 1
            reference, estimate = random_pair(rng, num_samples, sample_rate_hz)
            step = 1e-4 * float(np.sqrt(np.mean(estimate.as_array() ** 2)))
            if not (guard_phat and near_phat_singularity(estimate, step)):
                break
            skipped += 1
        result = loss_value_and_grad(kind, reference, estimate, weights, stft, max_lag)
        coords = []
        for j in rng.permutation(2 * num_samples):
            ch, i = divmod(int(j), num_samples)
            if skip_folds and ipd_unsafe(estimate, ch, i, step, stft):
                skipped += 1
                continue
            coords.append((ch, i))
            if len(coords) == num_coords:
                break
        analytic = np.array([result.channel(ch)[i] for ch, i in coords])
        if corrupt and trial == 0:
            worst = int(np.argmax(np.abs(analytic)))
            analytic[worst] = -analytic[worst]
        numeric = finite_diff_grad(kind, reference, estimate, step, coords, weights, stft, max_lag)
        max_abs = max(max_abs, float(np.max(np.abs(analytic - numeric))))
        max_rel = max(max_rel, float(np.max(relative_errors(analytic, numeric))))
        checked += len(coords)
    report = GradCheckReport(kind.value, max_abs, max_rel, checked, step, threshold, trials, skipped)
    if raise_on_fail and not report.passed:
        raise GradCheckFailed(report)
    return report
