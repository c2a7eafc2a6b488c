"""Harmonic power of commensurate voltage records delivered to a resistive load.

V(Omega) = sum_i V_i exp(i*Omega*t_i) dt, PSD = |V|^2/T. For a record spanning
an integer number of drive periods every comb line k*nu falls on exactly one
frequency bin of width 1/T, so integrating the PSD around the line is a single
bin; the positive and negative frequency lines are folded together, giving
P_k = 2|V(k*nu)|^2 / (T^2 * R_L).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Literal, Sequence, Tuple

import numpy as np

from combforge.core.errors import BandwidthExceeded, InvalidParameter, MixedConfig, NonCommensurate
from combforge.core.types import TimeSeries

logger = logging.getLogger(__name__)

Parity = Literal["even", "odd"]

COMMENSURATE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Harmonic:
    index: int
    frequency: float
    power: float
    parity: Parity


@dataclass(frozen=True, eq=False)
class Spectrum:
    drive_frequency: float
    harmonics: Tuple[Harmonic, ...]
    record_duration: float
    load_resistance: float
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def k_max(self) -> int:
        return len(self.harmonics)

    @property
    def powers(self) -> np.ndarray:
        return np.array([h.power for h in self.harmonics], dtype=np.float64)

    @property
    def total_power(self) -> float:
        return float(np.sum(self.powers))

    def power_at(self, k: int) -> float:
        if not 1 <= k <= self.k_max:
            raise InvalidParameter(f"harmonic {k} outside 1..{self.k_max}")
        return self.harmonics[k - 1].power

    def dominant_parity(self, k_limit: int | None = None) -> Parity:
        powers = self.powers[: k_limit or self.k_max]
        even = float(np.sum(powers[1::2]))
        odd = float(np.sum(powers[0::2]))
        return "even" if even >= odd else "odd"


def _parity(k: int) -> Parity:
    return "even" if k % 2 == 0 else "odd"


def _drive_frequency(series: TimeSeries, drive_frequency: float | None) -> float:
    nu = drive_frequency if drive_frequency is not None else series.metadata.get("drive_frequency_Hz")
    if nu is None or not nu > 0:
        raise InvalidParameter("drive frequency unknown: pass drive_frequency or use a simulated series")
    return float(nu)


def check_commensurate(series: TimeSeries, drive_frequency: float) -> int:
    """Number of whole drive periods covered by the record."""
    periods = series.duration * drive_frequency
    whole = round(periods)
    if whole < 1 or abs(periods - whole) > COMMENSURATE_TOLERANCE * max(whole, 1):
        raise NonCommensurate(
            f"record spans {periods:.12g} drive periods; harmonic powers need an integer number"
        )
    return whole


def _phase_grid(n: int, t0: float, dt: float, drive_frequency: float) -> np.ndarray:
    return 2 * math.pi * drive_frequency * (t0 + dt * np.arange(n))


def _sums(values: np.ndarray, angles: np.ndarray) -> np.ndarray:
    # einsum without optimize runs its own single-threaded loop, so sums do not depend on BLAS threading
    re = np.einsum("ij,j->i", values, np.cos(angles))
    im = np.einsum("ij,j->i", values, np.sin(angles))
    return re + 1j * im


def harmonic_transform(
    values: np.ndarray,
    t0: float,
    dt: float,
    drive_frequency: float,
    k_max: int,
) -> np.ndarray:
    """V(k*nu) for k = 1..k_max of every row of a 2-D block of records (volt-seconds)."""
    block = np.atleast_2d(np.asarray(values, dtype=np.float64))
    theta = _phase_grid(block.shape[1], t0, dt, drive_frequency)
    out = np.empty((block.shape[0], k_max), dtype=np.complex128)
    for k in range(1, k_max + 1):
        out[:, k - 1] = _sums(block, k * theta) * dt
    return out


def fourier_component(series: TimeSeries, frequency: float, drive_frequency: float | None = None) -> complex:
    """Discrete V(Omega) with Omega = 2*pi*frequency (frequency in Hz), e^{+i Omega t} kernel."""
    check_commensurate(series, _drive_frequency(series, drive_frequency))
    angles = 2 * math.pi * frequency * series.times
    return complex(_sums(series.values[np.newaxis, :], angles)[0] * series.dt)


def line_powers(amplitudes: np.ndarray, duration: float, load_resistance: float) -> np.ndarray:
    return 2.0 * np.abs(amplitudes) ** 2 / (duration * duration * load_resistance)


def spectrum_from_powers(
    powers: Sequence[float],
    drive_frequency: float,
    duration: float,
    load_resistance: float,
    **metadata: Any,
) -> Spectrum:
    harmonics = tuple(
        Harmonic(k, k * drive_frequency, float(p), _parity(k)) for k, p in enumerate(powers, start=1)
    )
    return Spectrum(drive_frequency, harmonics, duration, load_resistance, dict(metadata))


def check_bandwidth(dt: float, drive_frequency: float, k_max: int) -> None:
    if k_max < 1:
        raise InvalidParameter(f"k_max must be positive, got {k_max}")
    usable = 1.0 / (4.0 * dt)
    if k_max * drive_frequency > usable:
        raise BandwidthExceeded(
            f"k_max*nu={k_max * drive_frequency:.4g} Hz exceeds usable bandwidth {usable:.4g} Hz; "
            "refine the time step or lower k_max"
        )


def harmonic_power(
    series: TimeSeries,
    drive_frequency: float,
    k_max: int,
    load_resistance: float,
) -> Spectrum:
    if not load_resistance > 0:
        raise InvalidParameter(f"load resistance must satisfy R_L > 0, got {load_resistance}")
    check_commensurate(series, drive_frequency)
    check_bandwidth(series.dt, drive_frequency, k_max)
    amplitudes = harmonic_transform(series.values, series.t0, series.dt, drive_frequency, k_max)[0]
    powers = line_powers(amplitudes, series.duration, load_resistance)
    return spectrum_from_powers(powers, drive_frequency, series.duration, load_resistance)


def average_spectrum(spectra: Sequence[Spectrum]) -> Spectrum:
    if not spectra:
        raise InvalidParameter("average_spectrum needs at least one spectrum")
    ref = spectra[0]
    for other in spectra[1:]:
        if (
            other.drive_frequency != ref.drive_frequency
            or other.k_max != ref.k_max
            or other.load_resistance != ref.load_resistance
        ):
            raise MixedConfig(
                "spectra disagree on drive frequency, k_max or load resistance: "
                f"({ref.drive_frequency}, {ref.k_max}, {ref.load_resistance}) vs "
                f"({other.drive_frequency}, {other.k_max}, {other.load_resistance})"
            )
    if len(spectra) == 1:
        return ref
    stacked = np.stack([s.powers for s in spectra])
    return spectrum_from_powers(
        stacked.mean(axis=0),
        ref.drive_frequency,
        ref.record_duration,
        ref.load_resistance,
        n_averaged=len(spectra),
    )


def spectrum_percentiles(powers: np.ndarray, quantiles: Sequence[float] = (5.0, 95.0)) -> Dict[str, list]:
    """Per-harmonic percentile bands over a block of realization powers (rows = realizations)."""
    block = np.atleast_2d(powers)
    return {f"p{q:g}": np.percentile(block, q, axis=0).tolist() for q in quantiles}
