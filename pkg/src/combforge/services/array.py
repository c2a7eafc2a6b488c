"""Array-level relations: load coupling and the analytic switch-time model."""
import math
from dataclasses import dataclass
from typing import NamedTuple

from combforge.core.dynamics import simulate_squid
from combforge.core.errors import InvalidParameter, OutOfRange
from combforge.core.types import PHYSICAL, DriveConfig, PhysicalConstants, SimGrid, SquidParams, TimeSeries


@dataclass(frozen=True)
class ArrayConfig:
    n_squids: int
    load_resistance: float
    base: SquidParams
    drive: DriveConfig
    grid: SimGrid

    def __post_init__(self) -> None:
        if self.n_squids < 1:
            raise InvalidParameter(f"array size must satisfy N >= 1, got {self.n_squids}")
        if not self.load_resistance > 0:
            raise InvalidParameter(f"load resistance must satisfy R_L > 0, got {self.load_resistance}")

    @property
    def r_eff(self) -> float:
        return effective_resistance(self.base.shunt_resistance, self.load_resistance, self.n_squids)


def effective_resistance(r: float, r_load: float, n: int) -> float:
    """Shunt resistance seen by each of N SQUIDs driving R_L: R*R_L/(R_L + N*R)."""
    if not r > 0 or not r_load > 0:
        raise InvalidParameter("effective resistance needs R > 0 and R_L > 0")
    if n < 1:
        raise InvalidParameter(f"array size must satisfy N >= 1, got {n}")
    return r * r_load / (r_load + n * r)


class SwitchTime(NamedTuple):
    exact: float
    linearized: float


def predicted_switch_time(zeta_a: float, drive: DriveConfig, k: int = 0) -> SwitchTime:
    """Instant the k-th node crossing happens for a SQUID of area A_0*(1+zeta_A).

    Even k are rising flux edges, odd k falling ones; a larger SQUID crosses
    the node earlier on a rising edge and later on a falling one.
    """
    if k < 0:
        raise InvalidParameter(f"crossing index must satisfy k >= 0, got {k}")
    if drive.amplitude == 0:
        raise OutOfRange("drive amplitude is zero; the flux never crosses the node")
    if not 1 + zeta_a > 0:
        raise InvalidParameter(f"area perturbation must satisfy 1 + zeta_A > 0, got {zeta_a}")
    x = zeta_a / (drive.amplitude * (1 + zeta_a))
    if abs(x) > 1:
        raise OutOfRange(f"arccos argument {x:.4f} outside [-1, 1]: SQUID never reaches the node")
    nu = drive.frequency
    angle = math.acos(x) / (2 * math.pi * nu)
    if k % 2 == 0:
        exact = angle + k / (2 * nu)
    else:
        exact = (k + 1) / (2 * nu) - angle
    sign = 1 if k % 2 == 0 else -1
    linearized = drive.node_time(k) - sign * zeta_a / (2 * math.pi * nu * drive.amplitude)
    return SwitchTime(exact, linearized)


def switch_time_spread(sigma_a: float, drive: DriveConfig) -> float:
    """Standard deviation lambda_A = sigma_A/(2*pi*epsilon*nu) of the switch times."""
    if not sigma_a >= 0:
        raise InvalidParameter(f"area spread must satisfy sigma_A >= 0, got {sigma_a}")
    if sigma_a == 0:
        return 0.0
    if drive.amplitude == 0:
        raise OutOfRange("drive amplitude is zero; switch times are undefined")
    return sigma_a / (2 * math.pi * drive.amplitude * drive.frequency)


def ideal_array_voltage(config: ArrayConfig, constants: PhysicalConstants = PHYSICAL) -> TimeSeries:
    """V_tot = N*V for N identical SQUIDs coupled to the load."""
    single = simulate_squid(config.base, config.drive, config.grid, config.r_eff, constants)
    return single.with_values(config.n_squids * single.values, n_squids=config.n_squids)
