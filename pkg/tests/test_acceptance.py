"""Acceptance criteria 1-10, one test each.

Every test prints a single ``ACCEPTANCE <n> PASS|FAIL: ...`` line (also
collected into the pytest terminal summary) and then asserts.
"""

from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np

from binspatial import config, dsp, fitter, grad, losses, metrics, scene
from binspatial.config import LossWeights, SpatialKind, StftConfig
from binspatial.fitter import FitOptions, RendererParams
from binspatial.grad import LossKind
from binspatial.signal import BinauralSignal

from conftest import ACCEPTANCE_RESULTS

SR = 44100
LAG_QUANTUM_US = 1e6 / SR


def verdict(number: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_RESULTS[number] = line
    print(line)
    assert ok, line


def direct_correlation(left, right, max_lag):
    t = left.size
    out = np.zeros(2 * max_lag + 1)
    for j, lag in enumerate(range(-max_lag, max_lag + 1)):
        lo, hi = max(0, -lag), min(t, t - lag)
        out[j] = np.dot(left[lo:hi], right[lo + lag:hi + lag])
    return out


def oracle_si_snr(s, e):
    s = s - s.mean()
    e = e - e.mean()
    target = (e @ s) / (s @ s) * s
    noise = e - target
    return 10 * math.log10(max(target @ target, 0) / max(noise @ noise, 1e-10 * (target @ target)))


def test_1_correlation_oracle():
    rng = np.random.default_rng(1)
    left, right = rng.standard_normal((2, 1024))
    start = time.perf_counter()
    got = dsp.cross_correlation(BinauralSignal(left, right, SR), 44).coeffs
    raw = direct_correlation(left, right, 44)
    elapsed = time.perf_counter() - start
    oracle = raw / (np.linalg.norm(left) * np.linalg.norm(right) + 1e-30)
    err = float(np.max(np.abs(got - oracle)))
    verdict(1, err < 1e-9 and elapsed < 1.0, f"max |FFT - direct| = {err:.2e} (< 1e-9), {elapsed:.3f} s (< 1 s)")


def test_2_itd_recovery():
    start = time.perf_counter()
    estimates = []
    for seed in range(50):
        x = np.random.default_rng(seed).standard_normal(SR // 2)
        right = np.concatenate([np.zeros(20), x[:-20]])
        estimates.append(metrics.itd_estimate(BinauralSignal(x, right, SR)) * 1e6)
    elapsed = time.perf_counter() - start
    worst = max(abs(e - 453.5) for e in estimates)
    hits = sum(abs(e - 453.5) <= LAG_QUANTUM_US for e in estimates)
    verdict(2, hits == 50 and elapsed < 10.0,
            f"{hits}/50 seeds within one lag quantum of 453.5 us (worst {worst:.3f} us), {elapsed:.2f} s (< 10 s)")


def test_3_ild_recovery():
    mono = scene.generate_test_signal("white_noise", 1.0, SR, seed=3)
    rendered = losses.ild(scene.render(mono, 6.0206, 0.0, SR))
    delayed = losses.ild(scene.render(mono, 6.0206, 9.4, SR))
    closed = losses.ild(BinauralSignal(2 * mono, mono, SR))  # amplitude ratio 2 -> 20 log10 2
    errs = [abs(rendered - 6.0206), abs(delayed - 6.0206), abs(closed - 6.0206)]
    verdict(3, max(errs) < 1e-6, f"|ild - 6.0206| = {errs[0]:.1e} / {errs[1]:.1e} (delayed) / "
            f"{errs[2]:.1e} (ratio-2 closed form), all < 1e-6 dB")


def test_4_paper_constants():
    stft = StftConfig()
    checks = {
        "stft 1024/256/1024": (stft.window_len, stft.hop, stft.fft_len) == (1024, 256, 1024),
        "hann window": np.allclose(dsp.hann_window(4), [0.0, 0.5, 1.0, 0.5], rtol=0, atol=1e-15),
        "tau 1 ms": config.TAU_S == 1e-3 and config.EvalConfig().tau_s == 1e-3,
        "max_lag 44": config.max_lag_for(SR) == 44 and config.EvalConfig().max_lag(SR) == 44,
        "alpha 1": LossWeights().alpha == 1.0 and config.ALPHA == 1.0,
        "beta presets": {k: LossWeights.preset(k).beta for k in ("ild", "ipd", "itd")}
        == {"ild": 0.1, "ipd": 1.0, "itd": 1.0},
        "FR 1 dB": config.EvalConfig().fr_threshold_db == 1.0,
        "signal 0.9/0.1": (LossWeights().snr_weight, LossWeights().si_snr_weight) == (0.9, 0.1),
    }
    bad = [k for k, ok in checks.items() if not ok]
    verdict(4, not bad, "defaults match" if not bad else f"mismatched: {bad}")


def test_5_gradient_checks():
    start = time.perf_counter()
    lines, ok = [], True
    for kind in LossKind:
        r = grad.grad_check(kind, trials=10, num_samples=4096, num_coords=64, seed=0, raise_on_fail=False)
        ok &= r.passed and r.num_points_checked == 640
        lines.append(f"{kind.value} {r.max_rel_error:.1e}/{r.threshold:.0e}")
    elapsed = time.perf_counter() - start
    verdict(5, ok and elapsed < 60.0, f"{'; '.join(lines)}; {elapsed:.1f} s (< 60 s)")


def test_6_loss_identities():
    rng = np.random.default_rng(6)
    ref = BinauralSignal(*rng.standard_normal((2, 8192)), SR)
    est = BinauralSignal(*rng.standard_normal((2, 8192)), SR)
    spatial = max(losses.ild_loss(ref, ref), losses.ipd_loss(ref, ref), losses.itd_loss(ref, ref))
    capped = (abs(losses.snr_loss(ref, ref) + config.SNR_CAP_DB) < 1e-9
              and abs(losses.si_snr_loss(ref, ref) + config.SNR_CAP_DB) < 1e-9)
    base = losses.si_snr(ref.left, est.left)
    scale_err = max(abs(losses.si_snr(ref.left, c * est.left) - base) for c in (1e-3, 1.0, 1e3))
    itd_base = losses.itd_loss(ref, est)
    itd_err = max(abs(losses.itd_loss(ref, est.scaled(c)) - itd_base) for c in (1e-3, 0.5, 1e3))
    ok = spatial <= 1e-12 and capped and scale_err <= 1e-12 and itd_err <= 1e-9
    verdict(6, ok, f"identity spatial losses {spatial:.1e} (<= 1e-12), signal metrics capped at 100 dB: {capped}, "
            f"si_snr scale drift {scale_err:.1e} dB, itd_loss rescale drift {itd_err:.1e} (<= 1e-9)")


def test_7_fitter_convergence():
    mono = scene.generate_test_signal("white_noise", 2.0, SR, seed=0)
    target = scene.render(mono, -4.0, 15.3, SR)
    weights = LossWeights(alpha=1.0, beta=1.0, spatial_kind=SpatialKind.ITD,
                          extra_spatial=((SpatialKind.ILD, 0.1),))
    start = time.perf_counter()
    result = fitter.fit_renderer(mono, target, RendererParams(0.0, 0.0), weights, FitOptions(max_iters=500))
    elapsed = time.perf_counter() - start
    delay_err = abs(result.final_params.delay_samples - 15.3)
    ok = (result.final_delta_ild_db < 0.05 and delay_err < 0.5 and result.iterations_used <= 500
          and elapsed < 30.0)
    verdict(7, ok, f"dILD {result.final_delta_ild_db:.4f} dB (< 0.05), delay error {delay_err:.4f} samples (< 0.5), "
            f"{result.iterations_used} iterations (<= 500), {elapsed:.1f} s (< 30 s)")


def test_8_failure_rate():
    fr = metrics.failure_rate([0.5, 1.5, 2.0])
    boundary = metrics.failure_rate([1.0])
    err = abs(Fraction(fr) - Fraction(100, 3))
    verdict(8, err <= Fraction(1, 10**9) and boundary == 0.0,
            f"FR([0.5, 1.5, 2.0]) = {fr!r} (|err| {float(err):.1e}), FR([1.0]) = {boundary}")


def test_9_end_to_end():
    # Integer ITDs (even, so each ear shifts by whole samples) keep the oracle independent of the delay filter.
    spec = scene.SceneSpec.from_dict({
        "sources": [
            {"signal": "white_noise", "gain_diff_db": 2.5, "itd_s": 10 / SR},
            {"signal": "white_noise", "gain_diff_db": -6.0, "itd_s": -20 / SR, "level_db": 10.0},
            {"signal": {"kind": "tone", "freq_hz": 1000}, "gain_diff_db": 4.0, "itd_s": 4 / SR, "level_db": -10.0},
        ],
        "duration_s": 1.0,
    })
    mixture, target = scene.mix_scene(spec)
    truth = scene.ground_truth(spec)

    # Oracle: rebuild every source from its ground truth with plain integer shifts.
    left_sum, right_sum = np.zeros(spec.num_samples), np.zeros(spec.num_samples)
    for src, gt in zip(spec.sources, truth):
        mono = scene.generate_test_signal(src.signal, spec.duration_s, SR, src.seed)
        half = int(round(gt["itd_samples"] / 2))
        amp = 10 ** (src.level_db / 20)
        for sign, gain_sign, acc in ((-1, 1, left_sum), (1, -1, right_sum)):
            shift = sign * half
            y = np.zeros_like(mono)
            if shift >= 0:
                y[shift:] = mono[: mono.size - shift]
            else:
                y[:shift] = mono[-shift:]
            y *= np.linalg.norm(mono) / np.linalg.norm(y)
            acc += amp * 10 ** (gain_sign * gt["gain_diff_db"] / 40) * y
    target_gt = truth[spec.target_index]
    ild_mix = 10 * math.log10((left_sum @ left_sum) / (right_sum @ right_sum))
    oracle_dild = abs(target_gt["ild_db"] - ild_mix)
    dominant = max(zip(spec.sources, truth), key=lambda p: p[0].level_db)[1]
    oracle_ditd_us = abs(target_gt["itd_us"] - dominant["itd_us"])

    same = metrics.evaluate_pair(mixture, target, target)
    si_mix = 0.5 * (oracle_si_snr(target.left, mixture.left) + oracle_si_snr(target.right, mixture.right))
    zero_ok = (same.delta_ild_db == same.delta_ipd_rad == same.delta_itd_gcc_us == same.delta_itd_us == 0.0
               and abs(same.si_snr_improvement_db - (config.SNR_CAP_DB - si_mix)) < 1e-9)

    mix = metrics.evaluate_pair(mixture, target, mixture)
    dild_err = abs(mix.delta_ild_db - oracle_dild)
    ditd_err = max(abs(mix.delta_itd_gcc_us - oracle_ditd_us), abs(mix.delta_itd_us - oracle_ditd_us))
    ok = zero_ok and dild_err < 1e-9 and ditd_err <= LAG_QUANTUM_US
    verdict(9, ok, f"estimate=target: zero deltas and SI-SNRi = cap - SI-SNR(mix) -> {zero_ok}; estimate=mixture: "
            f"dILD {mix.delta_ild_db:.6f} dB vs oracle (err {dild_err:.1e} < 1e-9), "
            f"dITD {mix.delta_itd_gcc_us:.2f}/{mix.delta_itd_us:.2f} us vs oracle {oracle_ditd_us:.2f} us")


def test_10_parseval():
    rng = np.random.default_rng(10)
    worst = 0.0
    for t in (1024, 4096, 65536):
        x = rng.standard_normal(t)
        energy = float(x @ x)
        worst = max(worst, abs(dsp.spectral_energy(np.fft.rfft(x), t) - energy) / energy)
        spec = dsp.stft(x, StftConfig())
        w = dsp.hann_window(1024)
        framed = sum(float(np.sum((x[u * 256: u * 256 + 1024] * w) ** 2)) for u in range(spec.num_frames))
        from_spec = sum(dsp.spectral_energy(spec.frames[u], 1024) for u in range(spec.num_frames))
        worst = max(worst, abs(from_spec - framed) / framed)
    verdict(10, worst <= 1e-10, f"worst relative energy mismatch {worst:.1e} over T in (1024, 4096, 65536) "
            f"(full-signal and per-frame STFT)")
