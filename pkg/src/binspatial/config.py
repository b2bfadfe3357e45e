"""Default hyperparameters and configuration records.

The constants here are the published training/evaluation settings: a
1024-sample Hann STFT with hop 256, a 1 ms lag window for the time-difference
terms, signal loss = 0.9 SNR + 0.1 SI-SNR, alpha = 1 and per-cue betas of
0.1 (ILD), 1 (IPD) and 1 (ITD), and a 1 dB failure threshold.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

DEFAULT_SAMPLE_RATE = 44100
DEFAULT_DURATION_S = 6.0

STFT_WINDOW = 1024
STFT_HOP = 256
STFT_FFT = 1024

TAU_S = 1e-3

SNR_WEIGHT = 0.9
SI_SNR_WEIGHT = 0.1

ALPHA = 1.0

FR_THRESHOLD_DB = 1.0

# Denominator clamp of SNR / SI-SNR, relative to signal energy (100 dB cap).
SNR_CLAMP = 1e-10
SNR_CAP_DB = 100.0


class SpatialKind(str, enum.Enum):
    NONE = "none"
    ILD = "ild"
    IPD = "ipd"
    ITD = "itd"


BETA_PRESETS = {
    SpatialKind.ILD: 0.1,
    SpatialKind.IPD: 1.0,
    SpatialKind.ITD: 1.0,
}


def max_lag_for(sample_rate_hz: int, tau_s: float = TAU_S) -> int:
    """Lag window in samples for a maximum delay of ``tau_s`` seconds."""
    return int(round(tau_s * sample_rate_hz))


@dataclass(frozen=True)
class StftConfig:
    window_len: int = STFT_WINDOW
    hop: int = STFT_HOP
    fft_len: int = STFT_FFT

    def __post_init__(self):
        if not 1 <= self.hop <= self.window_len <= self.fft_len:
            raise ValueError(
                f"need 1 <= hop <= window_len <= fft_len, got "
                f"hop={self.hop}, window_len={self.window_len}, fft_len={self.fft_len}"
            )

    @property
    def num_bins(self) -> int:
        return self.fft_len // 2 + 1


@dataclass(frozen=True)
class LossWeights:
    """Weights of the multi-task objective ``alpha * signal + beta * spatial``.

    ``extra_spatial`` adds further ``(kind, beta)`` spatial terms on top of the
    main one, e.g. an ITD term together with a small ILD term.
    """

    alpha: float = ALPHA
    beta: float = 0.0
    spatial_kind: SpatialKind = SpatialKind.NONE
    snr_weight: float = SNR_WEIGHT
    si_snr_weight: float = SI_SNR_WEIGHT
    extra_spatial: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "spatial_kind", SpatialKind(self.spatial_kind))
        extra = tuple((SpatialKind(k), float(b)) for k, b in self.extra_spatial)
        object.__setattr__(self, "extra_spatial", extra)
        if self.alpha < 0 or self.beta < 0 or any(b < 0 for _, b in extra):
            raise ValueError("loss weights must be nonnegative")
        if abs(self.snr_weight + self.si_snr_weight - 1.0) > 1e-12:
            raise ValueError("snr_weight + si_snr_weight must equal 1")

    @classmethod
    def preset(cls, kind: SpatialKind | str) -> "LossWeights":
        """alpha = 1 with the published beta for ``kind`` (beta = 0 for none)."""
        kind = SpatialKind(kind)
        return cls(alpha=ALPHA, beta=BETA_PRESETS.get(kind, 0.0), spatial_kind=kind)

    def spatial_terms(self) -> list[tuple[SpatialKind, float]]:
        terms = []
        if self.spatial_kind is not SpatialKind.NONE:
            terms.append((self.spatial_kind, float(self.beta)))
        terms.extend((k, b) for k, b in self.extra_spatial if k is not SpatialKind.NONE)
        return terms


@dataclass(frozen=True)
class EvalConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    tau_s: float = TAU_S
    weights: LossWeights = field(default_factory=LossWeights)
    fr_threshold_db: float = FR_THRESHOLD_DB
    output_format: str = "json"

    def __post_init__(self):
        if not self.tau_s > 0:
            raise ValueError("tau_s must be positive")
        if not abs(self.fr_threshold_db) < float("inf"):
            raise ValueError("fr_threshold_db must be finite")
        if self.output_format not in ("json", "csv"):
            raise ValueError(f"unknown output format {self.output_format!r}")

    def max_lag(self, sample_rate_hz: int) -> int:
        return max_lag_for(sample_rate_hz, self.tau_s)
