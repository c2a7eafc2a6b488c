import json

import numpy as np

from combforge.core.pulses import PulseMetrics
from combforge.core.types import TimeSeries
from combforge.core.utils import file_hash
from combforge.repositories.artifacts import ArtifactStore, emit_timeseries_csv
from combforge.services.spectrum import spectrum_from_powers


def test_timeseries_csv_round_trips_exactly(tmp_path):
    values = [0.1, -2.5e-7, 1.0 / 3.0]
    series = TimeSeries(1e-9, 1e-12, values)
    path = emit_timeseries_csv(series, str(tmp_path / "v.csv"))
    raw = open(path, "rb").read()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert len(lines) == 4
    assert lines[0] == "t_s,V_V"
    parsed = np.loadtxt(path, delimiter=",", skiprows=1)
    assert parsed[:, 1].tolist() == values
    assert parsed[:, 0].tolist() == series.times.tolist()


def test_phase_header_and_zero_column(tmp_path):
    series = TimeSeries(0.0, 1.0, np.zeros(3), kind="phase")
    path = emit_timeseries_csv(series, str(tmp_path / "phi.csv"))
    lines = open(path, encoding="utf-8").read().splitlines()
    assert lines[0] == "t_s,phi_rad"
    assert [line.split(",")[1] for line in lines[1:]] == ["0", "0", "0"]


def test_spectrum_csv_lists_every_harmonic(tmp_path):
    store = ArtifactStore(str(tmp_path))
    spectrum = spectrum_from_powers([1e-12, 2e-12, 0.0], 1e9, 1e-9, 50.0)
    lines = open(store.spectrum(spectrum, "spectrum.csv"), encoding="utf-8").read().splitlines()
    assert lines[0] == "k,f_Hz,P_W,parity"
    assert [line.split(",")[0] for line in lines[1:]] == ["1", "2", "3"]
    assert lines[2].split(",")[3] == "even"


def test_pulse_csv(tmp_path):
    store = ArtifactStore(str(tmp_path))
    metrics = PulseMetrics(2.5e-10, 1e-4, 1.6e-11, 1.03e-15, 17)
    lines = open(store.pulses([("Lg_0pH", metrics)], "pulses.csv"), encoding="utf-8").read().splitlines()
    assert lines[0] == "label,peak_time_s,peak_height_V,fwhm_s,signed_area_Wb"
    assert lines[1].startswith("Lg_0pH,")


def test_manifest_hashes_tracked_files(tmp_path):
    store = ArtifactStore(str(tmp_path))
    store.timeseries(TimeSeries(0.0, 1.0, [1.0, 2.0]), "b.csv")
    store.write_json("a.json", {"x": 1})
    store.write_error({"error_type": "X"})
    manifest_path = store.write_manifest({"seed": 3}, runtime_seconds=0.5)
    manifest = json.load(open(manifest_path, encoding="utf-8"))
    assert store.files == ["a.json", "b.csv"]
    assert manifest["content"]["seed"] == 3
    assert manifest["content"]["files"] == {
        "a.json": file_hash(str(tmp_path / "a.json")),
        "b.csv": file_hash(str(tmp_path / "b.csv")),
    }
    assert set(manifest["run"]) == {"generated_at", "runtime_seconds"}


def test_identical_inputs_give_identical_bytes(tmp_path):
    series = TimeSeries(0.0, 1e-12, np.linspace(-1.0, 1.0, 50))
    a = emit_timeseries_csv(series, str(tmp_path / "a" / "v.csv"))
    b = emit_timeseries_csv(series, str(tmp_path / "b" / "v.csv"))
    assert open(a, "rb").read() == open(b, "rb").read()
