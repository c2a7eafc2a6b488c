import json
import math
import os

import pytest

from combforge.core.errors import NonConvergence
from combforge.services import scenarios
from combforge.services.cli import SCENARIO_IDS, main
from combforge.services.scenarios import run_scenario

COARSE_STEP = 2 * math.pi / 4096


def read(path):
    with open(path, "rb") as f:
        return f.read()


def test_help_lists_every_scenario(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for sid in SCENARIO_IDS:
        assert sid in out


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split("\t")[0] for line in lines] == SCENARIO_IDS
    assert len(SCENARIO_IDS) == 8


def test_unknown_scenario_is_a_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["scenario", "fig9_nothing", "--out", str(tmp_path)])
    assert info.value.code == 2
    assert "fig2_inductance_pulses" in capsys.readouterr().err


def test_scenario_output_is_reproducible(tmp_path):
    first = run_scenario("fig2_inductance_pulses", str(tmp_path / "a"))
    second = run_scenario("fig2_inductance_pulses", str(tmp_path / "b"), workers=1)
    assert first.status == second.status == 0
    assert first.files == second.files
    assert "pulses.csv" in first.files
    assert "waveform_Lg_10pH.csv" in first.files
    for name in first.files:
        assert read(os.path.join(first.out_dir, name)) == read(os.path.join(second.out_dir, name))
    manifest_a = json.loads(read(os.path.join(first.out_dir, "manifest.json")))
    manifest_b = json.loads(read(os.path.join(second.out_dir, "manifest.json")))
    assert manifest_a["content"] == manifest_b["content"]
    assert manifest_a["content"]["scenario"] == "fig2_inductance_pulses"


def test_inductance_delays_and_sharpens_the_pulse(tmp_path):
    report = run_scenario("fig2_inductance_pulses", str(tmp_path))
    labels = ["Lg_0pH", "Lg_2pH", "Lg_5pH", "Lg_10pH"]
    times = [report.summary[label]["peak_time_s"] for label in labels]
    heights = [report.summary[label]["peak_height_V"] for label in labels]
    assert times == sorted(times) and len(set(times)) == 4
    assert heights == sorted(heights) and len(set(heights)) == 4


def test_module_error_writes_error_record(tmp_path, monkeypatch, capsys):
    def boom(*args):
        exc = NonConvergence("total flux did not converge at step 12")
        exc.bin_index = 3
        raise exc

    monkeypatch.setitem(scenarios.RUNNERS, "pulses", boom)
    assert main(["scenario", "fig4_capacitance_pulses", "--out", str(tmp_path)]) == 1
    record = json.loads(read(tmp_path / "error.json"))
    assert record["error_type"] == "NonConvergence"
    assert record["scenario"] == "fig4_capacitance_pulses"
    assert record["bin_index"] == 3
    assert "NonConvergence" in capsys.readouterr().err
    assert not (tmp_path / "manifest.json").exists()


def test_simulate_writes_requested_outputs(tmp_path):
    config = tmp_path / "run.yaml"
    config.write_text(
        f"time_step: {COARSE_STEP!r}\nk_max: 100\noutputs: [waveform, phase, spectrum, pulses]\n",
        encoding="utf-8",
    )
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(config), "--out", str(out)]) == 0
    for name in ("waveform.csv", "phase.csv", "spectrum.csv", "pulses.csv", "manifest.json", "resolved_config.json"):
        assert (out / name).exists(), name
    manifest = json.loads(read(out / "manifest.json"))
    assert manifest["content"]["summary"]["dominant_parity"] == "even"
    assert manifest["content"]["summary"]["n_pulses"] == 2
    assert len(read(out / "spectrum.csv").decode().splitlines()) == 101


def test_simulate_runs_an_ensemble(tmp_path):
    out = tmp_path / "ens"
    argv = [
        "simulate",
        "--set", f"time_step={COARSE_STEP!r}",
        "--set", "sigma_area=0.01",
        "--set", "n_bins=11",
        "--set", "n_realizations=20",
        "--set", "k_max=50",
        "--out", str(out),
    ]
    assert main(argv) == 0
    summary = json.loads(read(out / "manifest.json"))["content"]["summary"]
    assert summary["reduced_accuracy"] is True
    assert summary["P_20_W"] > 0


def test_invalid_override_exits_with_record(tmp_path, capsys):
    out = tmp_path / "bad"
    assert main(["simulate", "--set", "asymmetry=1.5", "--out", str(out)]) == 1
    record = json.loads(read(out / "error.json"))
    assert record["error_type"] == "ConfigValidationError"
    assert "|r| < 1" in record["message"]
    assert "|r| < 1" in capsys.readouterr().err


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "combforge" in capsys.readouterr().out


@pytest.mark.parametrize("key", ["preferential_asymmetry", "asymmetry"])
def test_simulate_skewed_array_without_spread(tmp_path, key):
    out = tmp_path / key
    argv = [
        "simulate",
        "--set", f"time_step={COARSE_STEP!r}",
        "--set", f"{key}=0.01",
        "--set", "k_max=40",
        "--set", "outputs=[spectrum]",
        "--out", str(out),
    ]
    assert main(argv) == 0
    summary = json.loads(read(out / "manifest.json"))["content"]["summary"]
    assert summary["dominant_parity"] == "odd"


def test_both_asymmetry_keys_give_one_device(tmp_path):
    base = ["simulate", "--set", f"time_step={COARSE_STEP!r}", "--set", "k_max=40", "--set", "outputs=[spectrum]"]
    assert main(base + ["--set", "preferential_asymmetry=0.01", "--out", str(tmp_path / "a")]) == 0
    assert main(base + ["--set", "asymmetry=0.01", "--out", str(tmp_path / "b")]) == 0
    assert read(tmp_path / "a" / "spectrum.csv") == read(tmp_path / "b" / "spectrum.csv")
