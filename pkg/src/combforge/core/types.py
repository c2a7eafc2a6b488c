"""Physical records shared by the solver, the ensemble and the spectrum code.

All records are frozen dataclasses validated on construction. Internal state
of the solver is dimensionless (tau = 2*pi*nu*t, flux in units of the flux
quantum, currents in units of I_+); SI values only appear here and in the
TimeSeries / Spectrum outputs.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Literal

import numpy as np

from combforge.core.errors import InvalidGrid, InvalidParameter

SeriesKind = Literal["phase", "voltage"]

GRID_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PhysicalConstants:
    flux_quantum: float = 2.067833848e-15

    def __post_init__(self) -> None:
        if not self.flux_quantum > 0:
            raise InvalidParameter("flux quantum must satisfy Phi_0 > 0")


PHYSICAL = PhysicalConstants()


@dataclass(frozen=True)
class SquidParams:
    shunt_resistance: float
    critical_current_sum: float
    junction_capacitance: float = 0.0
    asymmetry: float = 0.0
    loop_inductance: float = 0.0
    area_perturbation: float = 0.0

    def __post_init__(self) -> None:
        if not self.shunt_resistance > 0:
            raise InvalidParameter(f"shunt resistance must satisfy R > 0, got {self.shunt_resistance}")
        if not self.critical_current_sum > 0:
            raise InvalidParameter(f"critical current must satisfy I_+ > 0, got {self.critical_current_sum}")
        if not self.junction_capacitance >= 0:
            raise InvalidParameter(f"capacitance must satisfy C >= 0, got {self.junction_capacitance}")
        if not abs(self.asymmetry) < 1:
            raise InvalidParameter(f"asymmetry must satisfy |r| < 1, got {self.asymmetry}")
        if not self.loop_inductance >= 0:
            raise InvalidParameter(f"loop inductance must satisfy L_g >= 0, got {self.loop_inductance}")
        if not 1 + self.area_perturbation > 0:
            raise InvalidParameter(f"area perturbation must satisfy 1 + zeta_A > 0, got {self.area_perturbation}")

    @property
    def critical_current(self) -> float:
        # per-junction I_0 under the symmetric-junction convention
        return 0.5 * self.critical_current_sum

    def screening(self, constants: PhysicalConstants = PHYSICAL) -> float:
        """L_g*I_0/Phi_0, the amplitude of the flux correction."""
        return self.loop_inductance * self.critical_current / constants.flux_quantum

    def screening_beta(self, constants: PhysicalConstants = PHYSICAL) -> float:
        return math.pi * self.screening(constants)

    def with_changes(self, **changes: Any) -> "SquidParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DriveConfig:
    frequency: float
    amplitude: float = 0.9
    bias: float = 1e-3

    def __post_init__(self) -> None:
        if not self.frequency > 0:
            raise InvalidParameter(f"drive frequency must satisfy nu > 0, got {self.frequency}")
        if not 0 <= self.amplitude <= 1:
            raise InvalidParameter(f"drive amplitude must satisfy 0 <= epsilon <= 1, got {self.amplitude}")
        if not 0 <= self.bias < 1:
            raise InvalidParameter(f"bias must satisfy 0 <= delta < 1, got {self.bias}")

    @property
    def period(self) -> float:
        return 1.0 / self.frequency

    def node_time(self, k: int = 0) -> float:
        """Instant t_k = (2k+1)/(4 nu) at which the nominal flux crosses Phi_0/2."""
        return (2 * k + 1) / (4.0 * self.frequency)

    def flags(self) -> Dict[str, bool]:
        return {
            "no_drive": self.amplitude == 0,
            "no_preferred_direction": self.bias == 0,
        }


@dataclass(frozen=True)
class SimGrid:
    step: float
    periods_total: int
    periods_transient: int = 1

    def __post_init__(self) -> None:
        if not self.step > 0:
            raise InvalidGrid(f"time step must satisfy dtau > 0, got {self.step}")
        if self.periods_total < 1:
            raise InvalidGrid(f"periods_total must be positive, got {self.periods_total}")
        if not 0 <= self.periods_transient < self.periods_total:
            raise InvalidGrid(
                f"periods_transient must satisfy 0 <= transient < total, got "
                f"{self.periods_transient} of {self.periods_total}"
            )
        samples = round(2 * math.pi / self.step)
        if samples < 1 or abs(samples * self.step - 2 * math.pi) > GRID_TOLERANCE * 2 * math.pi:
            raise InvalidGrid(
                f"time step dtau={self.step!r} does not divide 2*pi to within {GRID_TOLERANCE:g}; "
                "use SimGrid.snapped()"
            )

    @classmethod
    def from_samples(cls, samples_per_period: int, periods_total: int, periods_transient: int = 1) -> "SimGrid":
        if samples_per_period < 1:
            raise InvalidGrid(f"samples_per_period must be positive, got {samples_per_period}")
        return cls(2 * math.pi / samples_per_period, periods_total, periods_transient)

    @classmethod
    def snapped(cls, target_step: float, periods_total: int, periods_transient: int = 1) -> "SimGrid":
        """Grid whose step is the divisor of 2*pi closest to target_step."""
        if not target_step > 0:
            raise InvalidGrid(f"time step must satisfy dtau > 0, got {target_step}")
        return cls.from_samples(max(1, round(2 * math.pi / target_step)), periods_total, periods_transient)

    @property
    def samples_per_period(self) -> int:
        return round(2 * math.pi / self.step)

    @property
    def n_steps(self) -> int:
        return self.periods_total * self.samples_per_period

    @property
    def retained_periods(self) -> int:
        return self.periods_total - self.periods_transient

    @property
    def retained_samples(self) -> int:
        return self.retained_periods * self.samples_per_period

    def sample_spacing(self, drive: DriveConfig) -> float:
        """Seconds per step: dt = dtau / (2*pi*nu)."""
        return self.step / (2 * math.pi * drive.frequency)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    t0: float
    dt: float
    values: np.ndarray
    kind: SeriesKind = "voltage"
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise InvalidParameter(f"sample spacing must satisfy dt > 0, got {self.dt}")
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise InvalidParameter("time series values must be a non-empty 1-D sequence")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def duration(self) -> float:
        return self.dt * self.values.size

    def with_values(self, values: np.ndarray, **metadata: Any) -> "TimeSeries":
        merged = {**self.metadata, **metadata}
        return TimeSeries(self.t0, self.dt, values, self.kind, merged)


@dataclass(frozen=True)
class StepperCoefficients:
    c: float
    alpha: float

    def __post_init__(self) -> None:
        if not self.c >= 0:
            raise InvalidParameter(f"capacitance coefficient must satisfy c >= 0, got {self.c}")
        if not self.alpha > 0:
            raise InvalidParameter(f"drive strength must satisfy alpha > 0, got {self.alpha}")

    @classmethod
    def derive(
        cls,
        params: SquidParams,
        drive: DriveConfig,
        r_eff: float,
        constants: PhysicalConstants = PHYSICAL,
    ) -> "StepperCoefficients":
        if not r_eff > 0:
            raise InvalidParameter(f"effective resistance must be positive, got {r_eff}")
        c = 2 * math.pi * r_eff * params.junction_capacitance * drive.frequency
        alpha = params.critical_current_sum * r_eff / (constants.flux_quantum * drive.frequency)
        return cls(c, alpha)
