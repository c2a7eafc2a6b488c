import numpy as np
import pytest

from combforge.core.dynamics import simulate_squid
from combforge.core.errors import InvalidParameter, OutOfRange
from combforge.core.pulses import voltage_pulse_metrics
from combforge.core.types import DriveConfig
from combforge.services.array import (
    ArrayConfig,
    effective_resistance,
    ideal_array_voltage,
    predicted_switch_time,
    switch_time_spread,
)


def test_effective_resistance():
    assert effective_resistance(20.0, 50.0, 50) == pytest.approx(1000 / 1050)
    assert effective_resistance(20.0, 50.0, 1) == pytest.approx(1000 / 70)
    with pytest.raises(InvalidParameter):
        effective_resistance(20.0, 50.0, 0)
    with pytest.raises(InvalidParameter):
        effective_resistance(20.0, -1.0, 5)


def test_array_config_validation(nb_params, drive, default_grid):
    with pytest.raises(InvalidParameter):
        ArrayConfig(0, 50.0, nb_params, drive, default_grid)
    config = ArrayConfig(500, 50.0, nb_params, drive, default_grid)
    assert config.r_eff == pytest.approx(1000 / 10050)


def test_nominal_switch_times(drive):
    rising = predicted_switch_time(0.0, drive, 0)
    assert rising.exact == pytest.approx(0.25e-9)
    assert rising.linearized == pytest.approx(0.25e-9)
    falling = predicted_switch_time(0.0, drive, 1)
    assert falling.exact == pytest.approx(0.75e-9)
    assert falling.linearized == pytest.approx(0.75e-9)


def test_larger_squid_switches_early_on_rising_edge(drive):
    shifted = predicted_switch_time(0.01, drive, 0)
    assert shifted.linearized - 0.25e-9 == pytest.approx(-1.768e-12, abs=1e-15)
    assert shifted.exact == pytest.approx(shifted.linearized, abs=0.02e-12)
    times = [predicted_switch_time(z, drive, 0).exact for z in (-0.02, -0.01, 0.0, 0.01, 0.02)]
    assert times == sorted(times, reverse=True)
    late = predicted_switch_time(0.01, drive, 1)
    assert late.exact > 0.75e-9
    assert late.linearized - 0.75e-9 == pytest.approx(1.768e-12, abs=1e-15)


def test_switch_time_out_of_range(drive):
    with pytest.raises(OutOfRange, match="never reaches the node"):
        predicted_switch_time(10.0, drive)
    with pytest.raises(OutOfRange):
        predicted_switch_time(0.0, DriveConfig(1e9, 0.0, 1e-3))
    with pytest.raises(InvalidParameter):
        predicted_switch_time(0.0, drive, -1)


def test_switch_time_spread(drive):
    assert switch_time_spread(0.01, drive) == pytest.approx(1.7684e-12, rel=1e-4)
    assert switch_time_spread(0.0, DriveConfig(1e9, 0.0, 1e-3)) == 0.0
    with pytest.raises(OutOfRange):
        switch_time_spread(0.01, DriveConfig(1e9, 0.0, 1e-3))


def test_simulated_shift_tracks_switch_time(array_config):
    def first_peak(zeta):
        params = array_config.base.with_changes(area_perturbation=zeta)
        series = simulate_squid(params, array_config.drive, array_config.grid, array_config.r_eff)
        return voltage_pulse_metrics(series, array_config.drive)[0].peak_time

    predicted = predicted_switch_time(0.02, array_config.drive).linearized - array_config.drive.node_time(0)
    simulated = first_peak(0.02) - first_peak(0.0)
    assert simulated < 0
    assert simulated == pytest.approx(predicted, rel=0.3)


def test_ideal_array_is_n_copies(array_config):
    single = simulate_squid(array_config.base, array_config.drive, array_config.grid, array_config.r_eff)
    total = ideal_array_voltage(array_config)
    assert total.metadata["n_squids"] == 50
    assert np.array_equal(total.values, 50 * single.values)
