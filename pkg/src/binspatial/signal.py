from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from binspatial.errors import LengthMismatch


@dataclass(frozen=True, eq=False)
class BinauralSignal:
    """Two equal-length channels plus a sample rate.

    Samples are stored as float64 arrays. Construction validates that both
    channels have the same length T >= 1 and contain only finite values.
    """

    left: np.ndarray
    right: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        left = np.asarray(self.left, dtype=np.float64).reshape(-1)
        right = np.asarray(self.right, dtype=np.float64).reshape(-1)
        if left.shape != right.shape:
            raise LengthMismatch(f"left has {left.size} samples, right has {right.size}")
        if left.size < 1:
            raise ValueError("a binaural signal needs at least one sample")
        if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
            raise ValueError("samples must be finite")
        rate = int(self.sample_rate_hz)
        if rate <= 0 or rate != self.sample_rate_hz:
            raise ValueError(f"sample rate must be a positive integer, got {self.sample_rate_hz!r}")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "sample_rate_hz", rate)

    @classmethod
    def from_array(cls, data, sample_rate_hz: int) -> "BinauralSignal":
        """Build from a (T, 2) array."""
        data = np.asarray(data)
        if data.ndim != 2 or data.shape[1] != 2:
            raise ValueError(f"expected shape (T, 2), got {data.shape}")
        return cls(data[:, 0], data[:, 1], sample_rate_hz)

    def __len__(self) -> int:
        return self.left.size

    @property
    def num_samples(self) -> int:
        return self.left.size

    @property
    def duration_s(self) -> float:
        return self.left.size / self.sample_rate_hz

    def as_array(self) -> np.ndarray:
        return np.stack([self.left, self.right], axis=1)

    def scaled(self, gain: float) -> "BinauralSignal":
        return BinauralSignal(gain * self.left, gain * self.right, self.sample_rate_hz)

    def __add__(self, other: "BinauralSignal") -> "BinauralSignal":
        check_compatible(self, other)
        return BinauralSignal(self.left + other.left, self.right + other.right, self.sample_rate_hz)

    def __sub__(self, other: "BinauralSignal") -> "BinauralSignal":
        check_compatible(self, other)
        return BinauralSignal(self.left - other.left, self.right - other.right, self.sample_rate_hz)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinauralSignal):
            return NotImplemented
        return (
            self.sample_rate_hz == other.sample_rate_hz
            and np.array_equal(self.left, other.left)
            and np.array_equal(self.right, other.right)
        )

    __hash__ = None


def check_compatible(*signals: BinauralSignal) -> None:
    """Raise LengthMismatch unless all signals share length and sample rate."""
    first = signals[0]
    for other in signals[1:]:
        if other.num_samples != first.num_samples:
            raise LengthMismatch(f"{first.num_samples} vs {other.num_samples} samples")
        if other.sample_rate_hz != first.sample_rate_hz:
            raise LengthMismatch(f"{first.sample_rate_hz} Hz vs {other.sample_rate_hz} Hz")
