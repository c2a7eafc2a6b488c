"""Named parameter-sweep runs and the single-config `simulate` pipeline.

Each scenario is a frozen RunConfig overlay plus a list of labelled cases
(the swept parameter values). The sweep values are listed in DESIGN.md.
"""
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, Tuple

import numpy as np

from combforge import __version__
from combforge.config import RunConfig, build_config
from combforge.core.dynamics import simulate_phase, simulate_squid
from combforge.core.errors import CombForgeError, NoPulses
from combforge.core.pulses import PulseMetrics, voltage_pulse_metrics
from combforge.core.types import TimeSeries
from combforge.core.utils import content_hash
from combforge.repositories.artifacts import ArtifactStore
from combforge.services.array import ideal_array_voltage
from combforge.services.ensemble import EnsembleResult, build_table, sample_realization, typical_voltage
from combforge.services.spectrum import Spectrum, harmonic_power

logger = logging.getLogger(__name__)

QUICK_REALIZATIONS = 500
SCALING_HARMONIC = 20
SMALL_N = (1, 2, 5)
LARGE_N = (50, 500)
PICO_HENRY = 1e-12
FEMTO_FARAD = 1e-15


class ScenarioId(str, Enum):
    fig2_inductance_pulses = "fig2_inductance_pulses"
    fig3_inductance_spectrum = "fig3_inductance_spectrum"
    fig4_capacitance_pulses = "fig4_capacitance_pulses"
    fig5_area_pulses = "fig5_area_pulses"
    fig6_area_spectrum = "fig6_area_spectrum"
    fig7_asymmetry_pulses = "fig7_asymmetry_pulses"
    fig8_realistic_spectrum = "fig8_realistic_spectrum"
    n_scaling_sweep = "n_scaling_sweep"


Case = Tuple[str, Mapping[str, Any]]


@dataclass(frozen=True)
class Scenario:
    id: ScenarioId
    title: str
    runner: str
    overlay: Mapping[str, Any] = field(default_factory=dict)
    cases: Tuple[Case, ...] = ()
    waveforms: bool = True
    spectra: bool = False


def _inductance_cases() -> Tuple[Case, ...]:
    return tuple((f"Lg_{v:g}pH", {"loop_inductance_H": v * PICO_HENRY}) for v in (0, 2, 5, 10))


SCENARIOS: Dict[ScenarioId, Scenario] = {
    ScenarioId.fig2_inductance_pulses: Scenario(
        ScenarioId.fig2_inductance_pulses,
        "Single-SQUID voltage pulse versus loop inductance",
        "pulses",
        cases=_inductance_cases(),
    ),
    ScenarioId.fig3_inductance_spectrum: Scenario(
        ScenarioId.fig3_inductance_spectrum,
        "Comb power of an ideal N=50 array versus loop inductance",
        "spectrum",
        cases=_inductance_cases(),
        waveforms=False,
        spectra=True,
    ),
    ScenarioId.fig4_capacitance_pulses: Scenario(
        ScenarioId.fig4_capacitance_pulses,
        "Single-SQUID voltage pulse versus junction capacitance",
        "pulses",
        cases=tuple((f"C_{v:g}fF", {"junction_capacitance_F": v * FEMTO_FARAD}) for v in (0, 100, 1000, 2500)),
    ),
    ScenarioId.fig5_area_pulses: Scenario(
        ScenarioId.fig5_area_pulses,
        "Typical array voltage under area disorder",
        "ensemble",
        cases=tuple((f"sigmaA_{v:g}", {"sigma_area": v}) for v in (0.0, 0.01, 0.03, 0.05)),
    ),
    ScenarioId.fig6_area_spectrum: Scenario(
        ScenarioId.fig6_area_spectrum,
        "Average comb power under area disorder",
        "ensemble",
        cases=tuple((f"sigmaA_{v:g}", {"sigma_area": v}) for v in (0.0, 0.01, 0.05)),
        waveforms=False,
        spectra=True,
    ),
    ScenarioId.fig7_asymmetry_pulses: Scenario(
        ScenarioId.fig7_asymmetry_pulses,
        "Typical array voltage and average comb power under asymmetry disorder around r_0 = 0.01",
        "ensemble",
        overlay={"preferential_asymmetry": 0.01},
        cases=tuple((f"sigmaR_{v:g}", {"sigma_asymmetry": v}) for v in (0.0, 0.005, 0.01)),
        spectra=True,
    ),
    ScenarioId.fig8_realistic_spectrum: Scenario(
        ScenarioId.fig8_realistic_spectrum,
        "Realistic array: 10 pH loops with area and asymmetry disorder",
        "realistic",
        # 41 x 41 cells on a coarser grid keep the combined table within laptop memory
        overlay={
            "loop_inductance_H": 10 * PICO_HENRY,
            "preferential_asymmetry": 0.01,
            "sigma_area": 0.01,
            "sigma_asymmetry": 0.005,
            "n_bins": 41,
            "time_step": 4e-4,
        },
        cases=(("realistic", {}),),
        spectra=True,
    ),
    ScenarioId.n_scaling_sweep: Scenario(
        ScenarioId.n_scaling_sweep,
        "Harmonic power of an ideal array versus array size",
        "scaling",
        cases=tuple((f"N_{n}", {"n_squids": n}) for n in SMALL_N + LARGE_N),
        waveforms=False,
        spectra=True,
    ),
}


@dataclass(frozen=True)
class ScenarioReport:
    status: int
    out_dir: str
    files: List[str]
    summary: Dict[str, Any] = field(default_factory=dict)
    error: Dict[str, Any] | None = None


def _pulse_rows(label: str, series: TimeSeries, config: RunConfig) -> List[Tuple[str, PulseMetrics]]:
    try:
        return [(label, p) for p in voltage_pulse_metrics(series, config.drive())]
    except NoPulses:
        logger.warning("No pulses detected label=%s", label)
        return []


def _spectrum_summary(spectrum: Spectrum) -> Dict[str, Any]:
    summary: Dict[str, Any] = {"dominant_parity": spectrum.dominant_parity(min(40, spectrum.k_max))}
    for k in (SCALING_HARMONIC, 100):
        if k <= spectrum.k_max:
            summary[f"P_{k}_W"] = spectrum.power_at(k)
    return summary


def _waveform_summary(series: TimeSeries, pulses: List[Tuple[str, PulseMetrics]]) -> Dict[str, Any]:
    summary: Dict[str, Any] = {
        "v_max_V": float(series.values.max()),
        "v_min_V": float(series.values.min()),
        "n_pulses": len(pulses),
    }
    if pulses:
        first = pulses[0][1]
        summary.update(peak_time_s=first.peak_time, peak_height_V=first.peak_height, fwhm_s=first.fwhm)
    return summary


def _run_pulses(scenario: Scenario, configs: List[Tuple[str, RunConfig]], store: ArtifactStore, workers: int | None):
    rows: List[Tuple[str, PulseMetrics]] = []
    summary: Dict[str, Any] = {}
    for label, cfg in configs:
        array = cfg.array()
        series = simulate_squid(array.base, array.drive, array.grid, array.r_eff)
        store.timeseries(series, f"waveform_{label}.csv")
        pulses = _pulse_rows(label, series, cfg)
        rows.extend(pulses)
        summary[label] = _waveform_summary(series, pulses)
    store.pulses(rows, "pulses.csv")
    return summary


def _run_spectrum(scenario: Scenario, configs: List[Tuple[str, RunConfig]], store: ArtifactStore, workers: int | None):
    summary: Dict[str, Any] = {}
    for label, cfg in configs:
        series = ideal_array_voltage(cfg.array())
        spectrum = harmonic_power(series, cfg.drive_frequency_Hz, cfg.k_max, cfg.load_resistance_ohm)
        store.spectrum(spectrum, f"spectrum_{label}.csv")
        summary[label] = _spectrum_summary(spectrum)
    return summary


def _ensemble(cfg: RunConfig, workers: int | None, k_max: int | None):
    array = cfg.array()
    spec = cfg.disorder()
    table = build_table(spec, array, workers=workers, budget=cfg.bin_budget)
    return table, typical_voltage(table, spec, array, k_max)


def _emit_ensemble(
    scenario: Scenario,
    label: str,
    cfg: RunConfig,
    result: EnsembleResult,
    store: ArtifactStore,
    rows: List[Tuple[str, PulseMetrics]],
) -> Dict[str, Any]:
    entry: Dict[str, Any] = {"reduced_accuracy": bool(result.metadata.get("reduced_accuracy"))}
    if scenario.waveforms:
        store.timeseries(result.typical_voltage, f"typical_{label}.csv")
        pulses = _pulse_rows(label, result.typical_voltage, cfg)
        rows.extend(pulses)
        entry.update(_waveform_summary(result.typical_voltage, pulses))
    if scenario.spectra and result.spectra is not None:
        store.spectrum(result.spectra.average, f"spectrum_{label}.csv")
        store.write_json(f"spectrum_bands_{label}.json", result.spectra.percentiles)
        entry["average"] = _spectrum_summary(result.spectra.average)
    return entry


def _run_ensemble(scenario: Scenario, configs: List[Tuple[str, RunConfig]], store: ArtifactStore, workers: int | None):
    rows: List[Tuple[str, PulseMetrics]] = []
    summary: Dict[str, Any] = {}
    for label, cfg in configs:
        _, result = _ensemble(cfg, workers, cfg.k_max if scenario.spectra else None)
        summary[label] = _emit_ensemble(scenario, label, cfg, result, store, rows)
    if scenario.waveforms:
        store.pulses(rows, "pulses.csv")
    return summary


def _run_realistic(scenario: Scenario, configs: List[Tuple[str, RunConfig]], store: ArtifactStore, workers: int | None):
    (label, cfg), = configs
    table, result = _ensemble(cfg, workers, cfg.k_max)
    rows: List[Tuple[str, PulseMetrics]] = []
    entry = _emit_ensemble(scenario, label, cfg, result, store, rows)
    single = sample_realization(table, cfg.disorder(), cfg.n_squids, 0)
    store.timeseries(single, f"waveform_single_{label}.csv")
    store.spectrum(result.spectra.single, f"spectrum_single_{label}.csv")
    store.pulses(rows, "pulses.csv")
    entry["single"] = _spectrum_summary(result.spectra.single)
    return {label: entry}


def fit_exponent(n_values: Tuple[int, ...], powers: List[float]) -> float:
    """Least-squares slope of log P against log N."""
    slope, _ = np.polyfit(np.log(np.asarray(n_values, dtype=float)), np.log(np.asarray(powers)), 1)
    return float(slope)


def _run_scaling(scenario: Scenario, configs: List[Tuple[str, RunConfig]], store: ArtifactStore, workers: int | None):
    rows: List[Tuple[int, float, float, float]] = []
    summary: Dict[str, Any] = {}
    for label, cfg in configs:
        array = cfg.array()
        spectrum = harmonic_power(ideal_array_voltage(array), cfg.drive_frequency_Hz, cfg.k_max, cfg.load_resistance_ohm)
        store.spectrum(spectrum, f"spectrum_{label}.csv")
        rows.append((cfg.n_squids, array.r_eff, spectrum.power_at(SCALING_HARMONIC), spectrum.total_power))
    store.scaling(rows, "scaling.csv")
    by_n = {n: p for n, _, p, _ in rows}
    total_by_n = {n: t for n, _, _, t in rows}
    summary["harmonic"] = SCALING_HARMONIC
    summary["gamma_small"] = fit_exponent(SMALL_N, [by_n[n] for n in SMALL_N])
    summary["gamma_large"] = fit_exponent(LARGE_N, [by_n[n] for n in LARGE_N])
    summary["gamma_total_small"] = fit_exponent(SMALL_N, [total_by_n[n] for n in SMALL_N])
    summary["gamma_total_large"] = fit_exponent(LARGE_N, [total_by_n[n] for n in LARGE_N])
    summary["crossover_N"] = configs[0][1].load_resistance_ohm / configs[0][1].shunt_resistance_ohm
    return summary


RUNNERS: Dict[str, Callable[..., Dict[str, Any]]] = {
    "pulses": _run_pulses,
    "spectrum": _run_spectrum,
    "ensemble": _run_ensemble,
    "realistic": _run_realistic,
    "scaling": _run_scaling,
}


def scenario_configs(scenario: Scenario, out_dir: str, quick: bool = False, seed: int | None = None) -> List[Tuple[str, RunConfig]]:
    values: Dict[str, Any] = {**scenario.overlay, "output_dir": out_dir}
    if seed is not None:
        values["seed"] = seed
    if quick:
        values["n_realizations"] = QUICK_REALIZATIONS
    base = build_config(values)
    return [(label, base.with_overrides(**changes)) for label, changes in scenario.cases]


def run_scenario(
    scenario_id: ScenarioId | str,
    out_dir: str,
    quick: bool = False,
    seed: int | None = None,
    workers: int | None = None,
) -> ScenarioReport:
    """Run one named scenario into out_dir; module errors become error.json and status 1."""
    scenario = SCENARIOS[ScenarioId(scenario_id)]
    store = ArtifactStore(out_dir)
    start = time.perf_counter()
    logger.info("Scenario start id=%s out=%s quick=%s seed=%s", scenario.id.value, out_dir, quick, seed)
    try:
        configs = scenario_configs(scenario, out_dir, quick, seed)
        provenance = {
            "scenario": scenario.id.value,
            "title": scenario.title,
            "version": __version__,
            "quick": quick,
            "cases": {label: cfg.reproducible_dump() for label, cfg in configs},
        }
        store.write_json("resolved_config.json", provenance)
        summary = RUNNERS[scenario.runner](scenario, configs, store, workers)
    except CombForgeError as exc:
        record = {**exc.to_record(), "scenario": scenario.id.value}
        store.write_error(record)
        logger.error("Scenario failed id=%s error=%s: %s", scenario.id.value, record["error_type"], exc)
        return ScenarioReport(1, out_dir, store.files, error=record)
    runtime = time.perf_counter() - start
    content = {
        "scenario": scenario.id.value,
        "version": __version__,
        "seed": configs[0][1].seed,
        "config_hash": content_hash(provenance),
        "quick": quick,
        "reduced_accuracy": quick or configs[0][1].n_realizations < 1000,
        "summary": summary,
    }
    store.write_manifest(content, runtime)
    logger.info("Scenario done id=%s files=%d cost=%.3fs", scenario.id.value, len(store.files), runtime)
    return ScenarioReport(0, out_dir, store.files, summary)


def run_simulation(config: RunConfig, store: ArtifactStore | None = None) -> ScenarioReport:
    """One config: the ideal array when no disorder is set, otherwise its ensemble."""
    store = store or ArtifactStore(config.output_dir)
    start = time.perf_counter()
    array = config.array()
    outputs = set(config.outputs)
    summary: Dict[str, Any] = {"r_eff_ohm": array.r_eff}
    try:
        if config.has_disorder:
            k_max = config.k_max if "spectrum" in outputs else None
            _, result = _ensemble(config, config.threads, k_max)
            voltage = result.typical_voltage
            spectrum = result.spectra.average if result.spectra is not None else None
            summary["reduced_accuracy"] = bool(result.metadata["reduced_accuracy"])
        else:
            voltage = ideal_array_voltage(array)
            spectrum = None
            if "spectrum" in outputs:
                spectrum = harmonic_power(voltage, config.drive_frequency_Hz, config.k_max, config.load_resistance_ohm)
        if "waveform" in outputs:
            store.timeseries(voltage, "waveform.csv")
        if "phase" in outputs:
            phase = simulate_phase(array.base, array.drive, array.grid, array.r_eff)
            store.timeseries(phase, "phase.csv")
        if "pulses" in outputs:
            pulses = _pulse_rows("array", voltage, config)
            store.pulses(pulses, "pulses.csv")
            summary.update(_waveform_summary(voltage, pulses))
        if spectrum is not None:
            store.spectrum(spectrum, "spectrum.csv")
            summary.update(_spectrum_summary(spectrum))
    except CombForgeError as exc:
        record = {**exc.to_record(), "config": config.config_hash()}
        store.write_error(record)
        logger.error("Simulation failed error=%s: %s", record["error_type"], exc)
        return ScenarioReport(1, store.root, store.files, error=record)
    runtime = time.perf_counter() - start
    content = {
        "version": __version__,
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "summary": summary,
    }
    store.write_manifest(content, runtime)
    return ScenarioReport(0, store.root, store.files, summary)


def describe_scenarios() -> List[Tuple[str, str]]:
    return [(s.id.value, s.title) for s in SCENARIOS.values()]
