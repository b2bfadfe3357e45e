"""Evaluation metrics: cue errors, ITD estimation, SI-SNR improvement, failure rate."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from binspatial import dsp, losses
from binspatial.config import EvalConfig, StftConfig
from binspatial.dsp import CorrelationMethod
from binspatial.errors import EmptyList
from binspatial.signal import BinauralSignal, check_compatible

REPORT_FIELDS = (
    "item_id",
    "si_snr_db",
    "snr_db",
    "delta_ild_db",
    "delta_ipd_rad",
    "delta_itd_gcc_us",
    "delta_itd_us",
    "si_snr_improvement_db",
)


@dataclass(frozen=True)
class MetricReport:
    si_snr_db: float
    snr_db: float
    delta_ild_db: float
    delta_ipd_rad: float
    delta_itd_gcc_us: float
    delta_itd_us: float
    si_snr_improvement_db: float
    item_id: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in REPORT_FIELDS}


def itd_lag(signal: BinauralSignal, method=CorrelationMethod.GCC_PHAT, max_lag: int | None = None) -> int:
    """Peak lag in samples; positive when the right channel lags."""
    if max_lag is None:
        max_lag = EvalConfig().max_lag(signal.sample_rate_hz)
    return dsp.correlate(signal, max_lag, method).peak_lag()


def itd_estimate(signal: BinauralSignal, method=CorrelationMethod.GCC_PHAT, max_lag: int | None = None) -> float:
    """Interaural time difference in seconds (argmax of the correlation over +-max_lag)."""
    return itd_lag(signal, method, max_lag) / signal.sample_rate_hz


def delta_itd(reference: BinauralSignal, estimate: BinauralSignal,
              method=CorrelationMethod.GCC_PHAT, max_lag: int | None = None) -> float:
    """|ITD(reference) - ITD(estimate)| in microseconds.

    GCC-PHAT gives the ITD-GCC variant, the plain correlation the classic one.
    """
    check_compatible(reference, estimate)
    lags = abs(itd_lag(reference, method, max_lag) - itd_lag(estimate, method, max_lag))
    return lags * 1e6 / reference.sample_rate_hz


def delta_ild(reference: BinauralSignal, estimate: BinauralSignal) -> float:
    return losses.ild_loss(reference, estimate)


def delta_ipd(reference: BinauralSignal, estimate: BinauralSignal, config: StftConfig = StftConfig()) -> float:
    return losses.ipd_loss(reference, estimate, config)


def channel_snr(reference: BinauralSignal, estimate: BinauralSignal) -> float:
    check_compatible(reference, estimate)
    return 0.5 * losses.snr(reference.right, estimate.right) + 0.5 * losses.snr(reference.left, estimate.left)


def channel_si_snr(reference: BinauralSignal, estimate: BinauralSignal) -> float:
    check_compatible(reference, estimate)
    return 0.5 * losses.si_snr(reference.right, estimate.right) + 0.5 * losses.si_snr(reference.left, estimate.left)


def si_snr_improvement(mixture: BinauralSignal, reference: BinauralSignal, estimate: BinauralSignal) -> float:
    check_compatible(mixture, reference, estimate)
    return channel_si_snr(reference, estimate) - channel_si_snr(reference, mixture)


def failure_rate(improvements, threshold_db: float = EvalConfig().fr_threshold_db) -> float:
    """Percentage of items whose SI-SNR improvement is strictly below ``threshold_db``."""
    values = np.asarray(list(improvements), dtype=np.float64)
    if values.size == 0:
        raise EmptyList("failure rate of an empty list")
    return 100.0 * int(np.count_nonzero(values < threshold_db)) / values.size


def evaluate_pair(mixture: BinauralSignal, reference: BinauralSignal, estimate: BinauralSignal,
                  config: EvalConfig = EvalConfig(), item_id: str = "") -> MetricReport:
    check_compatible(mixture, reference, estimate)
    max_lag = config.max_lag(reference.sample_rate_hz)
    return MetricReport(
        si_snr_db=channel_si_snr(reference, estimate),
        snr_db=channel_snr(reference, estimate),
        delta_ild_db=delta_ild(reference, estimate),
        delta_ipd_rad=delta_ipd(reference, estimate, config.stft),
        delta_itd_gcc_us=delta_itd(reference, estimate, CorrelationMethod.GCC_PHAT, max_lag),
        delta_itd_us=delta_itd(reference, estimate, CorrelationMethod.PLAIN, max_lag),
        si_snr_improvement_db=si_snr_improvement(mixture, reference, estimate),
        item_id=item_id,
    )


def aggregate(reports, threshold_db: float = EvalConfig().fr_threshold_db) -> dict:
    """Arithmetic means over items plus the failure rate of the set."""
    reports = list(reports)
    if not reports:
        raise EmptyList("no reports to aggregate")
    out = {"item_id": "__mean__", "count": len(reports)}
    for name in REPORT_FIELDS[1:]:
        out[name] = float(np.mean([getattr(r, name) for r in reports]))
    out["failure_rate_pct"] = failure_rate([r.si_snr_improvement_db for r in reports], threshold_db)
    return out
