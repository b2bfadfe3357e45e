"""Synthetic binaural scenes with exactly known interaural cues.

A mono source is rendered by splitting a level difference and a time
difference symmetrically across the two ears: the left channel gets
``+gain_diff/2`` dB and ``-delay/2`` samples, the right ``-gain_diff/2`` dB and
``+delay/2`` samples. Positive delay therefore means the right ear lags.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import chirp

from binspatial import dsp
from binspatial.config import DEFAULT_DURATION_S, DEFAULT_SAMPLE_RATE
from binspatial.signal import BinauralSignal

MAX_ITD_S = 1e-3
NOISE_STREAM = 1
SIGNAL_KINDS = ("white_noise", "tone", "chirp", "file")


def _unit_rms(x: np.ndarray) -> np.ndarray:
    rms = np.sqrt(np.mean(x * x))
    if rms == 0:
        raise ValueError("cannot normalise a silent signal")
    return x / rms


def generate_test_signal(kind: dict | str, duration_s: float, sample_rate_hz: int = DEFAULT_SAMPLE_RATE,
                         seed: int = 0) -> np.ndarray:
    """Deterministic unit-RMS mono test signal.

    ``kind`` is ``"white_noise"`` or a dict such as ``{"kind": "tone", "freq_hz": 1000}``,
    ``{"kind": "chirp", "f0_hz": 100, "f1_hz": 8000}`` or ``{"kind": "file", "path": ...}``.
    """
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    if isinstance(kind, str):
        kind = {"kind": kind}
    name = kind["kind"]
    n = int(round(duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    if name == "white_noise":
        x = np.random.default_rng(seed).standard_normal(n)
    elif name == "tone":
        x = np.sin(2 * np.pi * kind["freq_hz"] * t)
    elif name == "chirp":
        x = chirp(t, f0=kind["f0_hz"], t1=duration_s, f1=kind["f1_hz"], method="linear")
    elif name == "file":
        from binspatial.wave_io import read_mono

        data, rate = read_mono(kind["path"])
        if rate != sample_rate_hz:
            raise ValueError(f"{kind['path']}: {rate} Hz, scene runs at {sample_rate_hz} Hz")
        x = np.zeros(n)
        x[: min(n, data.size)] = data[:n]
    else:
        raise ValueError(f"unknown signal kind {name!r}")
    return _unit_rms(x)


def _delayed_unit_energy(mono: np.ndarray, delay: float) -> np.ndarray:
    # Rescaled to the source energy so truncation at the edges cannot leak into the ILD.
    if delay == 0:
        return mono.copy()
    y = dsp.fractional_delay(mono, delay)
    return y * (np.linalg.norm(mono) / np.linalg.norm(y))


def render(mono, gain_diff_db: float, delay_samples: float, sample_rate_hz: int,
           level_db: float = 0.0) -> BinauralSignal:
    """Binaural rendering of ``mono`` with the given level and time differences.

    Each channel keeps the energy of the scaled source, so ``ild()`` of the
    result equals ``gain_diff_db``.
    """
    mono = np.asarray(mono, dtype=np.float64)
    level = 10.0 ** (level_db / 20.0)
    g_left = level * 10.0 ** (gain_diff_db / 40.0)
    g_right = level * 10.0 ** (-gain_diff_db / 40.0)
    left = g_left * _delayed_unit_energy(mono, -delay_samples / 2.0)
    right = g_right * _delayed_unit_energy(mono, delay_samples / 2.0)
    return BinauralSignal(left, right, sample_rate_hz)


@dataclass(frozen=True)
class SourceSpec:
    signal: dict = field(default_factory=lambda: {"kind": "white_noise"})
    gain_diff_db: float = 0.0
    itd_s: float = 0.0
    level_db: float = 0.0
    seed: int = 0
    max_itd_s: float = MAX_ITD_S

    def __post_init__(self):
        sig = {"kind": self.signal} if isinstance(self.signal, str) else dict(self.signal)
        if sig.get("kind") not in SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {sig.get('kind')!r}")
        object.__setattr__(self, "signal", sig)
        for name in ("gain_diff_db", "itd_s", "level_db"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if abs(self.itd_s) > self.max_itd_s:
            raise ValueError(f"|itd_s|={abs(self.itd_s)} exceeds {self.max_itd_s} s")

    @classmethod
    def from_dict(cls, d: dict) -> "SourceSpec":
        return cls(**{k: d[k] for k in ("signal", "gain_diff_db", "itd_s", "level_db", "seed", "max_itd_s") if k in d})

    def to_dict(self) -> dict:
        return {"signal": dict(self.signal), "gain_diff_db": self.gain_diff_db, "itd_s": self.itd_s,
                "level_db": self.level_db, "seed": self.seed}


def render_source(mono, spec: SourceSpec, sample_rate_hz: int = DEFAULT_SAMPLE_RATE) -> BinauralSignal:
    return render(mono, spec.gain_diff_db, spec.itd_s * sample_rate_hz, sample_rate_hz, spec.level_db)


@dataclass(frozen=True)
class SceneSpec:
    sources: tuple
    target_index: int = 0
    duration_s: float = DEFAULT_DURATION_S
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE
    noise_level_db: float | None = None
    noise_seed: int = 0

    def __post_init__(self):
        sources = tuple(s if isinstance(s, SourceSpec) else SourceSpec.from_dict(s) for s in self.sources)
        object.__setattr__(self, "sources", sources)
        if not 1 <= len(sources) <= 4:
            raise ValueError(f"a scene holds 1 to 4 sources, got {len(sources)}")
        if not 0 <= self.target_index < len(sources):
            raise ValueError(f"target_index {self.target_index} out of range")
        if not self.duration_s > 0:
            raise ValueError("duration must be positive")
        if int(self.sample_rate_hz) != self.sample_rate_hz or self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be a positive integer")

    @property
    def num_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))

    @classmethod
    def from_dict(cls, d: dict, base_seed: int = 0) -> "SceneSpec":
        """Build from a JSON document; missing seeds become ``base_seed + index``."""
        sources = []
        for k, s in enumerate(d["sources"]):
            s = dict(s)
            s.setdefault("seed", base_seed + k)
            sources.append(SourceSpec.from_dict(s))
        d = dict(d)
        d.setdefault("noise_seed", base_seed)
        keys = ("target_index", "duration_s", "sample_rate_hz", "noise_level_db", "noise_seed")
        return cls(sources=tuple(sources), **{k: d[k] for k in keys if k in d})

    def to_dict(self) -> dict:
        return {
            "sources": [s.to_dict() for s in self.sources],
            "target_index": self.target_index,
            "duration_s": self.duration_s,
            "sample_rate_hz": self.sample_rate_hz,
            "noise_level_db": self.noise_level_db,
            "noise_seed": self.noise_seed,
        }


def render_scene(scene: SceneSpec) -> tuple[list[BinauralSignal], BinauralSignal | None]:
    """Rendered sources in order, plus the diffuse noise (None if disabled)."""
    rendered = []
    for spec in scene.sources:
        mono = generate_test_signal(spec.signal, scene.duration_s, scene.sample_rate_hz, spec.seed)
        rendered.append(render_source(mono, spec, scene.sample_rate_hz))
    noise = None
    if scene.noise_level_db is not None:
        # A separate stream, so noise never repeats a white-noise source with the same seed.
        rng = np.random.default_rng([scene.noise_seed, NOISE_STREAM])
        amp = 10.0 ** (scene.noise_level_db / 20.0)
        left, right = amp * rng.standard_normal((2, scene.num_samples))
        noise = BinauralSignal(left, right, scene.sample_rate_hz)
    return rendered, noise


def mix_scene(scene: SceneSpec) -> tuple[BinauralSignal, BinauralSignal]:
    """(mixture, target reference); the mixture is the plain sum of everything rendered."""
    rendered, noise = render_scene(scene)
    left = np.zeros(scene.num_samples)
    right = np.zeros(scene.num_samples)
    for part in rendered + ([noise] if noise is not None else []):
        left += part.left
        right += part.right
    return BinauralSignal(left, right, scene.sample_rate_hz), rendered[scene.target_index]


def ground_truth(scene: SceneSpec) -> list[dict]:
    """Resolved cues per source, as rendered."""
    out = []
    for k, s in enumerate(scene.sources):
        out.append({
            "index": k,
            "is_target": k == scene.target_index,
            "gain_diff_db": s.gain_diff_db,
            "ild_db": s.gain_diff_db,
            "itd_s": s.itd_s,
            "itd_us": s.itd_s * 1e6,
            "itd_samples": s.itd_s * scene.sample_rate_hz,
        })
    return out
