from __future__ import annotations

import math

import numpy as np
import pytest

from binspatial import losses
from binspatial.config import LossWeights, SpatialKind, StftConfig
from binspatial.errors import LengthMismatch, ZeroChannel, ZeroEstimate, ZeroReference
from binspatial.signal import BinauralSignal

from conftest import noise_pair


def test_snr_closed_form():
    s = np.array([3.0, 4.0])
    e = np.array([3.0, 3.0])
    # ||s||^2 = 25, ||s - e||^2 = 1
    assert losses.snr(s, e) == pytest.approx(10 * math.log10(25), abs=1e-12)


def test_snr_cap_and_errors():
    s = np.array([1.0, -2.0, 0.5])
    assert losses.snr(s, s) == pytest.approx(100.0, abs=1e-9)
    assert losses.si_snr(s, s) == pytest.approx(100.0, abs=1e-9)
    with pytest.raises(ZeroReference):
        losses.snr(np.zeros(3), s)
    with pytest.raises(ZeroEstimate):
        losses.si_snr(s, np.ones(3))
    with pytest.raises(LengthMismatch):
        losses.snr(s, s[:2])


def test_si_snr_closed_form():
    s = np.array([1.0, -1.0, 1.0, -1.0])
    n = np.array([1.0, 1.0, -1.0, -1.0])  # orthogonal to s, both zero mean
    # estimate = 2 s + n: target 2 s (energy 16), error n (energy 4)
    assert losses.si_snr(s, 2 * s + n) == pytest.approx(10 * math.log10(4), abs=1e-12)


@pytest.mark.parametrize("scale", [1e-3, 1.0, 1e3])
def test_si_snr_scale_invariance(rng, scale):
    s, e = rng.standard_normal((2, 1000))
    assert losses.si_snr(s, scale * e) == pytest.approx(losses.si_snr(s, e), abs=1e-10)


def test_signal_loss_weights(rng):
    ref, est = noise_pair(rng, 512), noise_pair(rng, 512)
    est = BinauralSignal(ref.left + 0.3 * est.left, ref.right + 0.5 * est.right, ref.sample_rate_hz)
    expected = -0.9 * 0.5 * (losses.snr(ref.left, est.left) + losses.snr(ref.right, est.right)) \
        - 0.1 * 0.5 * (losses.si_snr(ref.left, est.left) + losses.si_snr(ref.right, est.right))
    assert losses.binaural_signal_loss(ref, est) == pytest.approx(expected, abs=1e-12)


def test_ild_closed_form():
    x = np.array([1.0, -2.0, 0.5, 0.0])
    sig = BinauralSignal(2 * x, x, 8000)
    assert losses.ild(sig) == pytest.approx(20 * math.log10(2), abs=1e-12)
    swapped = BinauralSignal(x, 2 * x, 8000)
    assert losses.ild(swapped) == pytest.approx(-20 * math.log10(2), abs=1e-12)
    with pytest.raises(ZeroChannel):
        losses.ild(BinauralSignal(x, np.zeros(4), 8000))


def test_fold_atan():
    im = np.array([1.0, -1.0, 0.0, 1.0, 1.0])
    re = np.array([0.0, 0.0, 0.0, 1.0, -1.0])
    np.testing.assert_allclose(losses.fold_atan(im, re), [np.pi / 2, -np.pi / 2, 0.0, np.pi / 4, -np.pi / 4])


def test_ipd_of_phase_shifted_tone():
    cfg = StftConfig(window_len=64, hop=32, fft_len=64)
    n = np.arange(256)
    k0 = 5
    left = np.cos(2 * np.pi * k0 * n / 64 + 0.3)
    right = np.cos(2 * np.pi * k0 * n / 64)
    got = losses.ipd(BinauralSignal(left, right, 8000), cfg)
    # Direct DFT of one windowed frame of each channel.
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(64) / 64)
    for u in range(got.shape[0]):
        seg = slice(32 * u, 32 * u + 64)
        basis = np.exp(-2j * np.pi * k0 * np.arange(64) / 64)
        sl = np.sum(left[seg] * w * basis)
        sr = np.sum(right[seg] * w * basis)
        z = sl * np.conj(sr)
        assert got[u, k0] == pytest.approx(math.atan(z.imag / z.real), abs=1e-12)
        assert got[u, k0] == pytest.approx(0.3, abs=1e-9)


def test_ipd_loss_against_loop(rng):
    cfg = StftConfig(window_len=32, hop=8, fft_len=32)
    ref, est = noise_pair(rng, 160), noise_pair(rng, 160)
    a, b = losses.ipd(ref, cfg), losses.ipd(est, cfg)
    total, count = 0.0, 0
    for u in range(a.shape[0]):
        for v in range(a.shape[1]):
            total += (a[u, v] - b[u, v]) ** 2
            count += 1
    assert losses.ipd_loss(ref, est, cfg) == pytest.approx(total / count, rel=1e-12)


def test_ipd_range(rng):
    phase = losses.ipd(noise_pair(rng, 4096))
    assert phase.min() >= -np.pi / 2 and phase.max() <= np.pi / 2


def test_identity_losses_vanish(stereo):
    assert losses.ild_loss(stereo, stereo) == 0.0
    assert losses.ipd_loss(stereo, stereo) == 0.0
    assert losses.itd_loss(stereo, stereo) == 0.0


def test_itd_loss_common_rescaling(stereo, rng):
    est = noise_pair(rng)
    base = losses.itd_loss(stereo, est)
    assert base > 0
    for c in (1e-3, 7.0):
        assert losses.itd_loss(stereo, est.scaled(c)) == pytest.approx(base, abs=1e-9)


def test_itd_loss_mean_over_lags(stereo, rng):
    from binspatial import dsp

    est = noise_pair(rng)
    a = dsp.gcc_phat(stereo, 10).coeffs
    b = dsp.gcc_phat(est, 10).coeffs
    assert losses.itd_loss(stereo, est, 10) == pytest.approx(sum((a - b) ** 2) / 21, rel=1e-12)


def test_combined_loss_composition(stereo, rng):
    est = BinauralSignal(stereo.left + 0.2 * rng.standard_normal(4096), stereo.right, stereo.sample_rate_hz)
    w = LossWeights(alpha=1.0, beta=0.7, spatial_kind=SpatialKind.IPD, extra_spatial=((SpatialKind.ILD, 0.1),))
    expected = losses.binaural_signal_loss(stereo, est) + 0.7 * losses.ipd_loss(stereo, est) \
        + 0.1 * losses.ild_loss(stereo, est)
    assert losses.combined_loss(stereo, est, w) == pytest.approx(expected, abs=1e-12)
    assert losses.combined_loss(stereo, est, LossWeights(beta=0.0, spatial_kind="itd")) == \
        losses.binaural_signal_loss(stereo, est)


def test_length_mismatch(stereo):
    short = BinauralSignal(stereo.left[:100], stereo.right[:100], stereo.sample_rate_hz)
    with pytest.raises(LengthMismatch):
        losses.ild_loss(stereo, short)
