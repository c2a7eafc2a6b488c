import numpy as np
import pytest

from combforge.core.dynamics import simulate_phase, simulate_squid
from combforge.core.errors import InvalidParameter, NoPulses
from combforge.core.pulses import voltage_pulse_metrics
from combforge.core.types import PHYSICAL, TimeSeries
from combforge.services.array import effective_resistance

R_EFF_50 = effective_resistance(20.0, 50.0, 50)


@pytest.fixture
def pulses(nb_params, drive, default_grid):
    series = simulate_squid(nb_params, drive, default_grid, R_EFF_50)
    return series, voltage_pulse_metrics(series, drive)


def test_two_pulses_per_period(pulses):
    _, found = pulses
    assert len(found) == 2
    assert all(p.peak_height > 0 for p in found)


def test_each_pulse_carries_half_a_flux_quantum(pulses):
    _, found = pulses
    for p in found:
        assert p.signed_area == pytest.approx(PHYSICAL.flux_quantum / 2, rel=0.01)


def test_pulses_follow_the_nodes(pulses, drive):
    series, (first, second) = pulses
    period_start = series.t0 - series.dt
    assert drive.node_time(0) < first.peak_time - period_start < drive.node_time(0) + 0.1 * drive.period
    # symmetric SQUID: the falling-edge pulse repeats the rising-edge one half a period later
    assert second.peak_time - first.peak_time == pytest.approx(0.5 * drive.period, abs=2 * series.dt)
    assert second.peak_height == pytest.approx(first.peak_height, rel=1e-3)
    assert 0 < first.fwhm < 0.05 * drive.period


def test_row_has_every_metric(pulses):
    _, found = pulses
    assert set(found[0].as_row()) == {"peak_time", "peak_height", "fwhm", "signed_area", "peak_index"}


def test_flat_series_has_no_pulses(drive, default_grid):
    dt = default_grid.sample_spacing(drive)
    flat = TimeSeries(0.0, dt, np.zeros(default_grid.samples_per_period))
    with pytest.raises(NoPulses):
        voltage_pulse_metrics(flat, drive)


def test_rejects_phase_and_short_records(nb_params, drive, default_grid):
    phase = simulate_phase(nb_params, drive, default_grid, R_EFF_50)
    with pytest.raises(InvalidParameter, match="voltage series"):
        voltage_pulse_metrics(phase, drive)
    short = TimeSeries(0.0, default_grid.sample_spacing(drive), np.ones(100))
    with pytest.raises(InvalidParameter, match="drive period"):
        voltage_pulse_metrics(short, drive)


def test_asymmetric_squid_pulses_alternate_in_sign(nb_params, drive, default_grid):
    skewed = nb_params.with_changes(asymmetry=0.01)
    first, second = voltage_pulse_metrics(simulate_squid(skewed, drive, default_grid, R_EFF_50), drive)
    assert np.sign(first.peak_height) == -np.sign(second.peak_height)
    assert np.sign(first.signed_area) == -np.sign(second.signed_area)
    for p in (first, second):
        assert abs(p.signed_area) == pytest.approx(PHYSICAL.flux_quantum / 2, rel=0.03)


@pytest.mark.parametrize(
    "loop_inductance, capacitance, r_eff",
    [
        (0.0, 0.0, R_EFF_50),
        (10e-12, 0.0, R_EFF_50),
        (0.0, 1e-12, R_EFF_50),
        (10e-12, 1e-12, R_EFF_50),
        (0.0, 0.0, effective_resistance(20.0, 50.0, 5)),
    ],
)
def test_pulse_area_does_not_depend_on_circuit(nb_params, drive, default_grid, loop_inductance, capacitance, r_eff):
    params = nb_params.with_changes(loop_inductance=loop_inductance, junction_capacitance=capacitance)
    found = voltage_pulse_metrics(simulate_squid(params, drive, default_grid, r_eff), drive)
    assert len(found) == 2
    for p in found:
        assert p.signed_area == pytest.approx(PHYSICAL.flux_quantum / 2, rel=0.01)
