"""Comparison metrics of simulated traces"""

import logging
import math

import numpy as np
import scipy.signal

from vsc.models.schemas import Metrics
from vsc.services.simulation import SimTrace

logger = logging.getLogger(__name__)

SNR_SPLIT_HZ = 12.0


def controller_snr(u: np.ndarray, dt: float, split_hz: float = SNR_SPLIT_HZ) -> float:
    """
    Signal-to-noise ratio of a controller output in dB.

    Power below split_hz counts as signal and power above it as noise, both
    taken from the periodogram. Returns NaN when the trace carries no power.
    """
    u = np.asarray(u, dtype=float)
    if u.size < 2 or dt <= 0:
        return math.nan
    freqs, power = scipy.signal.periodogram(u, fs=1.0 / dt)
    low = float(np.sum(power[freqs <= split_hz]))
    high = float(np.sum(power[freqs > split_hz]))
    if low == 0.0 and high == 0.0:
        return math.nan
    if high == 0.0:
        return math.inf
    if low == 0.0:
        return -math.inf
    return 10.0 * math.log10(low / high)


def compute_metrics(trace: SimTrace) -> Metrics:
    """
    ME, SSE, MCO and SNR of one trace.

    SSE sums over the recording grid of the trace.
    MCO and SNR use the controller output before saturation.
    """
    if len(trace) == 0:
        raise ValueError("cannot compute metrics of an empty trace")
    e = np.asarray(trace.e, dtype=float)
    u = np.asarray(trace.u_pre_sat, dtype=float)
    metrics = Metrics(
        me=float(np.max(np.abs(e))),
        sse=float(np.sum(e ** 2)),
        mco=float(np.max(np.abs(u))),
        snr=controller_snr(u, trace.dt),
    )
    logger.info(
        f"Metrics '{trace.method}': ME={metrics.me:.4g} SSE={metrics.sse:.4g} "
        f"MCO={metrics.mco:.4g} SNR={metrics.snr:.4g}"
    )
    return metrics


def compare_metrics(first: Metrics, second: Metrics, names: tuple[str, str]) -> dict[str, str]:
    """Winner per metric: lower ME/SSE/MCO and higher SNR win; ties and NaN report 'tie'"""
    winners = {}
    for key, higher_better in (("me", False), ("sse", False), ("mco", False), ("snr", True)):
        a, b = getattr(first, key), getattr(second, key)
        if math.isnan(a) or math.isnan(b) or a == b:
            winners[key] = "tie"
        elif (a > b) == higher_better:
            winners[key] = names[0]
        else:
            winners[key] = names[1]
    return winners


def comparison_orderings(scheduled: Metrics, pid: Metrics, u_max: float) -> dict[str, bool]:
    """
    Orderings a scheduled run must show against the gain-fixed PID.

    Lower SSE and MCO than the PID, MCO below the actuator limit and a
    higher SNR. NaN comparisons count as failed.
    """
    return {
        "sse_below_pid": scheduled.sse < pid.sse,
        "mco_below_pid": scheduled.mco < pid.mco,
        "mco_below_saturation": scheduled.mco < u_max,
        "snr_above_pid": scheduled.snr > pid.snr,
    }
