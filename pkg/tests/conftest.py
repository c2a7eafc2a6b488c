import pytest

from combforge.core.types import DriveConfig, SimGrid, SquidParams
from combforge.services.array import ArrayConfig

# Nb/AlOx/Nb junction pair driven at 1 GHz into a 50 ohm line
SHUNT_OHM = 20.0
CRITICAL_CURRENT_SUM_A = 1e-4
LOAD_OHM = 50.0
N_SQUIDS = 50
NU = 1e9


@pytest.fixture
def nb_params() -> SquidParams:
    return SquidParams(shunt_resistance=SHUNT_OHM, critical_current_sum=CRITICAL_CURRENT_SUM_A)


@pytest.fixture
def drive() -> DriveConfig:
    return DriveConfig(frequency=NU, amplitude=0.9, bias=1e-3)


@pytest.fixture
def default_grid() -> SimGrid:
    return SimGrid.snapped(1e-4, periods_total=2, periods_transient=1)


@pytest.fixture
def coarse_grid() -> SimGrid:
    return SimGrid.from_samples(16384, periods_total=2, periods_transient=1)


@pytest.fixture
def array_config(nb_params, drive, default_grid) -> ArrayConfig:
    return ArrayConfig(N_SQUIDS, LOAD_OHM, nb_params, drive, default_grid)


@pytest.fixture
def coarse_array(nb_params, drive, coarse_grid) -> ArrayConfig:
    return ArrayConfig(N_SQUIDS, LOAD_OHM, nb_params, drive, coarse_grid)
