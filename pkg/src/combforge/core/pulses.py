from dataclasses import asdict, dataclass
from typing import Any, Dict, List

import numpy as np

from combforge.core.errors import InvalidParameter, NoPulses
from combforge.core.types import DriveConfig, TimeSeries

DETECTION_FRACTION = 0.05
SUPPORT_FRACTION = 0.005


@dataclass(frozen=True)
class PulseMetrics:
    peak_time: float
    peak_height: float
    fwhm: float
    signed_area: float
    peak_index: int

    def as_row(self) -> Dict[str, Any]:
        return asdict(self)


def _refine_peak(a: np.ndarray, p: int) -> float:
    if p <= 0 or p >= a.size - 1:
        return float(p)
    y0, y1, y2 = a[p - 1], a[p], a[p + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0:
        return float(p)
    return p + 0.5 * (y0 - y2) / denom


def _crossing(a: np.ndarray, p: int, level: float, direction: int) -> float:
    """Fractional index where |V| falls below level walking away from p."""
    if direction < 0:
        below = np.flatnonzero(a[:p] < level)
        if below.size == 0:
            return 0.0
        i = int(below[-1])
        return i + (level - a[i]) / (a[i + 1] - a[i])
    below = np.flatnonzero(a[p + 1 :] < level)
    if below.size == 0:
        return float(a.size - 1)
    i = p + 1 + int(below[0])
    return i - (level - a[i]) / (a[i - 1] - a[i])


def _support(a: np.ndarray, p: int, level: float) -> tuple[int, int]:
    left = np.flatnonzero(a[:p] < level)
    right = np.flatnonzero(a[p + 1 :] < level)
    lo = int(left[-1]) + 1 if left.size else 0
    hi = p + 1 + int(right[0]) if right.size else a.size
    return lo, hi


def voltage_pulse_metrics(series: TimeSeries, drive: DriveConfig) -> List[PulseMetrics]:
    """Peak time, signed height, FWHM and time-integral of every pulse in a voltage record.

    A pulse is a contiguous run of samples with |V| above 5% of the global
    maximum; its area is integrated between the surrounding points where
    |V| drops below 0.5% of that pulse's own peak.
    """
    if series.kind != "voltage":
        raise InvalidParameter(f"pulse metrics need a voltage series, got kind={series.kind}")
    if series.duration < drive.period * (1 - 1e-9):
        raise InvalidParameter("pulse metrics need at least one retained drive period")
    v = series.values
    a = np.abs(v)
    global_max = float(a.max())
    if not np.isfinite(global_max) or global_max == 0.0:
        raise NoPulses("voltage series is identically zero")
    above = (a > DETECTION_FRACTION * global_max).astype(np.int8)
    edges = np.diff(np.concatenate(([0], above, [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    if starts.size == 0:
        raise NoPulses("no sample exceeds the detection threshold")

    pulses: List[PulseMetrics] = []
    for s, e in zip(starts, stops):
        p = int(s + np.argmax(a[s:e]))
        height = float(v[p])
        peak = abs(height)
        left = _crossing(a, p, 0.5 * peak, -1)
        right = _crossing(a, p, 0.5 * peak, +1)
        lo, hi = _support(a, p, SUPPORT_FRACTION * peak)
        pulses.append(
            PulseMetrics(
                peak_time=series.t0 + series.dt * _refine_peak(a, p),
                peak_height=height,
                fwhm=series.dt * (right - left),
                signed_area=float(np.sum(v[lo:hi]) * series.dt),
                peak_index=p,
            )
        )
    return pulses
