from __future__ import annotations

import numpy as np
import pytest

from binspatial import losses, metrics, scene
from binspatial.scene import SceneSpec, SourceSpec


def test_test_signals_are_unit_rms():
    for kind in ("white_noise", {"kind": "tone", "freq_hz": 500}, {"kind": "chirp", "f0_hz": 50, "f1_hz": 5000}):
        x = scene.generate_test_signal(kind, 0.5, 16000, seed=2)
        assert x.size == 8000
        assert np.sqrt(np.mean(x**2)) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        scene.generate_test_signal("pink_noise", 1.0)


def test_render_ild_is_exact():
    mono = scene.generate_test_signal("white_noise", 0.5, seed=1)
    for gain, delay in ((6.0206, 0.0), (-4.0, 15.3), (3.5, -7.25)):
        sig = scene.render(mono, gain, delay, 44100)
        assert losses.ild(sig) == pytest.approx(gain, abs=1e-9)


def test_render_delay_direction():
    mono = scene.generate_test_signal("white_noise", 0.5, seed=1)
    sig = scene.render(mono, 0.0, 12.0, 44100)
    assert metrics.itd_lag(sig) == 12
    # Integer shifts: left is the source advanced 6 samples, right delayed 6, each rescaled.
    lagged, lead = sig.right[12:], sig.left[:-12]
    k = (lagged @ lead) / (lead @ lead)
    np.testing.assert_allclose(lagged, k * lead, atol=1e-10)
    assert k == pytest.approx(1.0, abs=1e-3)


def test_render_zero_delay_keeps_source():
    mono = scene.generate_test_signal("white_noise", 0.1, seed=1)
    sig = scene.render(mono, 0.0, 0.0, 44100)
    np.testing.assert_array_equal(sig.left, mono)
    np.testing.assert_array_equal(sig.right, mono)


def test_level_db():
    mono = scene.generate_test_signal("white_noise", 0.1, seed=1)
    quiet = scene.render(mono, 0.0, 0.0, 44100, level_db=-20)
    np.testing.assert_allclose(quiet.left, 0.1 * mono, rtol=1e-12)


def test_source_spec_validation():
    with pytest.raises(ValueError):
        SourceSpec(itd_s=2e-3)
    with pytest.raises(ValueError):
        SourceSpec(signal={"kind": "speech"})
    with pytest.raises(ValueError):
        SceneSpec(sources=())
    with pytest.raises(ValueError):
        SceneSpec(sources=(SourceSpec(),) * 5)
    with pytest.raises(ValueError):
        SceneSpec(sources=(SourceSpec(),), target_index=1)


def test_scene_dict_roundtrip_and_seeds():
    doc = {"sources": [{"signal": "white_noise", "gain_diff_db": 2}, {"signal": "white_noise"}],
           "duration_s": 0.1, "noise_level_db": -40}
    spec = SceneSpec.from_dict(doc, base_seed=10)
    assert [s.seed for s in spec.sources] == [10, 11]
    assert SceneSpec.from_dict(spec.to_dict()) == spec


def test_mix_is_additive_and_deterministic():
    spec = SceneSpec.from_dict({"sources": [{"signal": "white_noise", "itd_s": 2e-4},
                                            {"signal": {"kind": "tone", "freq_hz": 300}, "gain_diff_db": -5},
                                            {"signal": "white_noise", "level_db": -6, "itd_s": -5e-4}],
                                "duration_s": 0.2, "target_index": 1, "noise_level_db": -30})
    parts, noise = scene.render_scene(spec)
    mix, target = scene.mix_scene(spec)
    total = parts[0].as_array() + parts[1].as_array() + parts[2].as_array() + noise.as_array()
    np.testing.assert_allclose(mix.as_array(), total, atol=1e-12)
    assert target == parts[1]
    again, _ = scene.mix_scene(spec)
    assert again == mix


def test_ground_truth():
    spec = SceneSpec(sources=(SourceSpec(gain_diff_db=3.0, itd_s=5e-4), SourceSpec(seed=1)), duration_s=0.1)
    gt = scene.ground_truth(spec)
    assert gt[0]["is_target"] and not gt[1]["is_target"]
    assert gt[0]["itd_samples"] == pytest.approx(22.05)
    assert gt[0]["itd_us"] == pytest.approx(500.0)
    assert gt[0]["ild_db"] == 3.0
