"""Disorder ensembles by binning and resampling.

Each disorder axis is sampled on n_bins equal-width bins spanning [-4 sigma, +4 sigma].
One SQUID is simulated per bin center; a realization of an N-SQUID array is the sum
of the waveforms of the bins its N Gaussian draws fall into. Because the sum is
linear, every realization is fully described by its per-bin counts and the
realization spectra follow from the per-bin Fourier components.
"""
import logging
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Sequence, Tuple

import numpy as np
from scipy import special

from combforge.core.dynamics import simulate_squid
from combforge.core.errors import BudgetExceeded, InvalidParameter
from combforge.core.types import PHYSICAL, PhysicalConstants, SquidParams, TimeSeries
from combforge.core.utils import chunked
from combforge.services.array import ArrayConfig
from combforge.services.spectrum import (
    Spectrum,
    check_bandwidth,
    harmonic_transform,
    line_powers,
    spectrum_from_powers,
    spectrum_percentiles,
)
from combforge.settings import settings

logger = logging.getLogger(__name__)

Axis = Literal["area", "asymmetry"]
AXES: Tuple[Axis, ...] = ("area", "asymmetry")
# stream tag mixed into the seed so each axis draws from its own independent sequence
AXIS_CODES: Dict[str, int] = {"area": 0, "asymmetry": 1}
SUPPORT_SIGMAS = 4.0
DEFAULT_BIN_BUDGET = 10_000
REDUCED_ACCURACY_REALIZATIONS = 1000
REALIZATION_CHUNK = 256


@dataclass(frozen=True)
class DisorderSpec:
    sigma_area: float = 0.0
    sigma_asymmetry: float = 0.0
    preferential_asymmetry: float = 0.0
    n_bins: int = 201
    n_realizations: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.sigma_area >= 0:
            raise InvalidParameter(f"area spread must satisfy sigma_A >= 0, got {self.sigma_area}")
        if not self.sigma_asymmetry >= 0:
            raise InvalidParameter(f"asymmetry spread must satisfy sigma_r >= 0, got {self.sigma_asymmetry}")
        if not abs(self.preferential_asymmetry) + SUPPORT_SIGMAS * self.sigma_asymmetry < 1:
            raise InvalidParameter(
                "asymmetry support must satisfy |r_0| + 4*sigma_r < 1, got "
                f"r_0={self.preferential_asymmetry}, sigma_r={self.sigma_asymmetry}"
            )
        if self.n_bins < 1:
            raise InvalidParameter(f"n_bins must be positive, got {self.n_bins}")
        if self.n_realizations < 1:
            raise InvalidParameter(f"n_realizations must be positive, got {self.n_realizations}")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameter(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def sigma(self, axis: Axis) -> float:
        return self.sigma_area if axis == "area" else self.sigma_asymmetry

    def bins_for(self, axis: Axis) -> int:
        return 1 if self.sigma(axis) == 0 else self.n_bins

    def centers(self, axis: Axis) -> np.ndarray:
        """Midpoints of the equal-width bins over [-4 sigma, +4 sigma]; [0] without disorder."""
        sigma = self.sigma(axis)
        if sigma == 0:
            return np.zeros(1)
        width = 2 * SUPPORT_SIGMAS * sigma / self.n_bins
        return -SUPPORT_SIGMAS * sigma + (np.arange(self.n_bins) + 0.5) * width

    @property
    def disordered_axes(self) -> Tuple[Axis, ...]:
        return tuple(a for a in AXES if self.sigma(a) > 0)


def draw_perturbations(spec: DisorderSpec, axis: Axis, realization_index: int, n: int) -> np.ndarray:
    """N Gaussian draws of zeta for one realization, keyed by (seed, realization, axis).

    The Philox stream is counter based, so the i-th draw depends only on the key
    and i, never on which worker asks for it or in what order.
    """
    sigma = spec.sigma(axis)
    if sigma == 0:
        return np.zeros(n)
    key = np.random.SeedSequence([spec.seed, realization_index, AXIS_CODES[axis]])
    gen = np.random.Generator(np.random.Philox(key))
    return sigma * special.ndtri(gen.random(n))


def bin_indices(spec: DisorderSpec, axis: Axis, draws: np.ndarray) -> np.ndarray:
    """Index of the bin containing each draw; draws beyond 4 sigma land in the outermost bin."""
    sigma = spec.sigma(axis)
    if sigma == 0:
        return np.zeros(len(draws), dtype=np.int64)
    n = spec.n_bins
    width = 2 * SUPPORT_SIGMAS * sigma / n
    clipped = np.clip(draws, -SUPPORT_SIGMAS * sigma, SUPPORT_SIGMAS * sigma)
    return np.clip(np.floor((clipped + SUPPORT_SIGMAS * sigma) / width), 0, n - 1).astype(np.int64)


@dataclass(frozen=True, eq=False)
class WaveformTable(ABC):
    """Per-cell single-SQUID voltages on one shared time grid."""

    waveforms: np.ndarray
    t0: float
    dt: float
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_cells(self) -> int:
        return int(self.waveforms.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.waveforms.shape[1])

    def series(self, cell: int, **metadata: Any) -> TimeSeries:
        return TimeSeries(self.t0, self.dt, self.waveforms[cell], "voltage", {**self.metadata, **metadata})

    @abstractmethod
    def cell_indices(self, spec: DisorderSpec, realization_index: int, n: int) -> np.ndarray:
        """Flattened cell index of each of the n SQUIDs in one realization."""


@dataclass(frozen=True, eq=False)
class BinTable(WaveformTable):
    axis: Axis = "area"
    centers: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def cell_indices(self, spec: DisorderSpec, realization_index: int, n: int) -> np.ndarray:
        draws = draw_perturbations(spec, self.axis, realization_index, n)
        return bin_indices(spec, self.axis, draws)


@dataclass(frozen=True, eq=False)
class DisorderGrid(WaveformTable):
    """Area x asymmetry cells stored row-major (area outer, asymmetry inner)."""

    area_centers: np.ndarray = field(default_factory=lambda: np.zeros(1))
    asymmetry_centers: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def cell_indices(self, spec: DisorderSpec, realization_index: int, n: int) -> np.ndarray:
        area = bin_indices(spec, "area", draw_perturbations(spec, "area", realization_index, n))
        asym = bin_indices(spec, "asymmetry", draw_perturbations(spec, "asymmetry", realization_index, n))
        return area * len(self.asymmetry_centers) + asym


def nominal_params(base: SquidParams, spec: DisorderSpec) -> SquidParams:
    """The array's undisordered SQUID: base parameters with r = r_0.

    r_0 and the base asymmetry name the same quantity; a nonzero value on either
    side is the nominal r, and two different nonzero values are refused.
    """
    r0 = spec.preferential_asymmetry
    if r0 == 0 or r0 == base.asymmetry:
        return base
    if base.asymmetry != 0:
        raise InvalidParameter(
            f"preferential asymmetry r_0={r0} conflicts with the SQUID asymmetry r={base.asymmetry}"
        )
    return base.with_changes(asymmetry=float(r0))


def _perturbed(nominal: SquidParams, zeta_a: float | None, zeta_r: float | None) -> SquidParams:
    changes: Dict[str, float] = {}
    if zeta_a is not None:
        changes["area_perturbation"] = float(zeta_a)
    if zeta_r is not None:
        changes["asymmetry"] = float(nominal.asymmetry + zeta_r)
    return nominal.with_changes(**changes)


def _simulate_cells(
    cells: Sequence[SquidParams],
    labels: Sequence[Any],
    config: ArrayConfig,
    constants: PhysicalConstants,
    workers: int | None,
) -> Tuple[np.ndarray, float, float, Dict[str, Any]]:
    r_eff = config.r_eff
    n_workers = min(settings.worker_count(workers), len(cells))
    waveforms = np.empty((len(cells), config.grid.retained_samples))
    metas: List[Dict[str, Any]] = [{} for _ in cells]
    t0 = dt = 0.0

    def run(i: int) -> TimeSeries:
        try:
            return simulate_squid(cells[i], config.drive, config.grid, r_eff, constants)
        except Exception as exc:
            exc.bin_index = i
            exc.bin_center = labels[i]
            exc.add_note(f"while simulating bin {i} at center {labels[i]}")
            raise

    with ThreadPoolExecutor(max_workers=n_workers) as executor:
        futures = {executor.submit(run, i): i for i in range(len(cells))}
        try:
            for future in as_completed(futures):
                i = futures[future]
                series = future.result()
                waveforms[i] = series.values
                metas[i] = series.metadata
                t0, dt = series.t0, series.dt
        except Exception:
            for pending in futures:
                pending.cancel()
            raise
    meta = dict(metas[0])
    meta["flux_iterations_max"] = max(int(m.get("flux_iterations_max", 0)) for m in metas)
    meta["workers"] = n_workers
    waveforms.flags.writeable = False
    return waveforms, t0, dt, meta


def build_bins(
    axis: Axis,
    spec: DisorderSpec,
    config: ArrayConfig,
    constants: PhysicalConstants = PHYSICAL,
    workers: int | None = None,
) -> BinTable:
    if axis not in AXES:
        raise InvalidParameter(f"unknown disorder axis {axis!r}; expected one of {AXES}")
    centers = spec.centers(axis)
    nominal = nominal_params(config.base, spec)
    if spec.sigma(axis) == 0:
        cells = [nominal]
    elif axis == "area":
        cells = [_perturbed(nominal, c, None) for c in centers]
    else:
        cells = [_perturbed(nominal, None, c) for c in centers]
    start = time.perf_counter()
    waveforms, t0, dt, meta = _simulate_cells(cells, centers.tolist(), config, constants, workers)
    logger.info(
        "Bins built axis=%s n_bins=%d sigma=%g workers=%d cost=%.3fs",
        axis,
        len(centers),
        spec.sigma(axis),
        meta["workers"],
        time.perf_counter() - start,
    )
    meta.update(axis=axis, n_bins=len(centers), sigma=spec.sigma(axis))
    return BinTable(waveforms, t0, dt, meta, axis=axis, centers=centers)


def build_disorder_grid(
    spec: DisorderSpec,
    config: ArrayConfig,
    constants: PhysicalConstants = PHYSICAL,
    workers: int | None = None,
    budget: int = DEFAULT_BIN_BUDGET,
) -> DisorderGrid:
    area_centers = spec.centers("area")
    asym_centers = spec.centers("asymmetry")
    total = len(area_centers) * len(asym_centers)
    if total > budget:
        raise BudgetExceeded(
            f"combined disorder grid needs {total} simulations "
            f"({len(area_centers)} x {len(asym_centers)}), budget is {budget}; lower n_bins"
        )
    nominal = nominal_params(config.base, spec)
    # an axis without spread keeps the nominal value
    area_shift = area_centers if spec.sigma_area > 0 else [None]
    asym_shift = asym_centers if spec.sigma_asymmetry > 0 else [None]
    cells = [_perturbed(nominal, a, r) for a in area_shift for r in asym_shift]
    labels = [(float(a), float(r)) for a in area_centers for r in asym_centers]
    start = time.perf_counter()
    waveforms, t0, dt, meta = _simulate_cells(cells, labels, config, constants, workers)
    logger.info(
        "Disorder grid built cells=%d (%d x %d) workers=%d cost=%.3fs",
        total,
        len(area_centers),
        len(asym_centers),
        meta["workers"],
        time.perf_counter() - start,
    )
    meta.update(axis="combined", n_bins=total, sigma_area=spec.sigma_area, sigma_asymmetry=spec.sigma_asymmetry)
    return DisorderGrid(waveforms, t0, dt, meta, area_centers=area_centers, asymmetry_centers=asym_centers)


def _weighted_sum(table: WaveformTable, weights: np.ndarray) -> np.ndarray:
    # fixed bin order keeps the reduction bit-stable
    total = np.zeros(table.n_samples)
    for cell in np.flatnonzero(weights):
        total += weights[cell] * table.waveforms[cell]
    return total


def realization_from_draws(table: WaveformTable, indices: Sequence[int], **metadata: Any) -> TimeSeries:
    """Array voltage of the SQUIDs whose (flattened) cells are given: V_tot = sum_i V_{cell(i)}."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise InvalidParameter("a realization needs at least one SQUID")
    if idx.min() < 0 or idx.max() >= table.n_cells:
        raise InvalidParameter(f"cell index outside 0..{table.n_cells - 1}")
    counts = np.bincount(idx, minlength=table.n_cells).astype(np.float64)
    return TimeSeries(
        table.t0, table.dt, _weighted_sum(table, counts), "voltage", {**table.metadata, "n_squids": int(idx.size), **metadata}
    )


def sample_realization(table: WaveformTable, spec: DisorderSpec, n: int, realization_index: int) -> TimeSeries:
    if n < 1:
        raise InvalidParameter(f"array size must satisfy N >= 1, got {n}")
    indices = table.cell_indices(spec, realization_index, n)
    return realization_from_draws(table, indices, realization_index=realization_index, seed=spec.seed)


@dataclass(frozen=True)
class EnsembleSpectra:
    average: Spectrum
    single: Spectrum
    percentiles: Dict[str, list]


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    typical_voltage: TimeSeries
    spectra: EnsembleSpectra | None = None
    metadata: Dict[str, Any] = field(default_factory=dict)


def _ensemble_spectra(
    table: WaveformTable,
    spec: DisorderSpec,
    config: ArrayConfig,
    k_max: int,
    cells: np.ndarray,
) -> EnsembleSpectra:
    nu = config.drive.frequency
    check_bandwidth(table.dt, nu, k_max)
    duration = table.dt * table.n_samples
    bins = harmonic_transform(table.waveforms, table.t0, table.dt, nu, k_max)
    powers = np.empty((spec.n_realizations, k_max))
    for block in chunked(range(spec.n_realizations), REALIZATION_CHUNK):
        amplitudes = bins[cells[block.start : block.stop]].sum(axis=1)
        powers[block.start : block.stop] = line_powers(amplitudes, duration, config.load_resistance)
    average = spectrum_from_powers(
        powers.mean(axis=0), nu, duration, config.load_resistance, n_averaged=spec.n_realizations
    )
    single = spectrum_from_powers(powers[0], nu, duration, config.load_resistance, realization_index=0)
    return EnsembleSpectra(average, single, spectrum_percentiles(powers))


def typical_voltage(
    table: WaveformTable,
    spec: DisorderSpec,
    config: ArrayConfig,
    k_max: int | None = None,
) -> EnsembleResult:
    """V_typ = (1/N_real) sum_j V^(j), with realization spectra when k_max is given."""
    if spec.n_realizations < REDUCED_ACCURACY_REALIZATIONS:
        logger.warning(
            "Reduced accuracy n_realizations=%d (< %d); ensemble statistics are noisy",
            spec.n_realizations,
            REDUCED_ACCURACY_REALIZATIONS,
        )
    start = time.perf_counter()
    n = config.n_squids

    cells = np.stack([table.cell_indices(spec, j, n) for j in range(spec.n_realizations)])
    counts = np.bincount(cells.ravel(), minlength=table.n_cells)
    weights = counts.astype(np.float64) / spec.n_realizations
    meta = {
        **table.metadata,
        "n_squids": n,
        "seed": spec.seed,
        "n_realizations": spec.n_realizations,
        "reduced_accuracy": spec.n_realizations < REDUCED_ACCURACY_REALIZATIONS,
    }
    voltage = TimeSeries(table.t0, table.dt, _weighted_sum(table, weights), "voltage", meta)
    spectra = None
    if k_max is not None:
        spectra = _ensemble_spectra(table, spec, config, k_max, cells)
    logger.info(
        "Ensemble averaged cells=%d n_realizations=%d n_squids=%d spectra=%s cost=%.3fs",
        table.n_cells,
        spec.n_realizations,
        n,
        k_max is not None,
        time.perf_counter() - start,
    )
    return EnsembleResult(voltage, spectra, meta)


def combined_disorder_realization(
    spec: DisorderSpec,
    config: ArrayConfig,
    realization_index: int = 0,
    grid: DisorderGrid | None = None,
    constants: PhysicalConstants = PHYSICAL,
    budget: int = DEFAULT_BIN_BUDGET,
) -> TimeSeries:
    """One array realization with independent Gaussian area and asymmetry disorder."""
    grid = grid if grid is not None else build_disorder_grid(spec, config, constants, budget=budget)
    return sample_realization(grid, spec, config.n_squids, realization_index)


def build_table(
    spec: DisorderSpec,
    config: ArrayConfig,
    constants: PhysicalConstants = PHYSICAL,
    workers: int | None = None,
    budget: int = DEFAULT_BIN_BUDGET,
) -> WaveformTable:
    """Bin table for whichever axes carry disorder; a combined grid when both do."""
    axes = spec.disordered_axes
    if len(axes) == 2:
        return build_disorder_grid(spec, config, constants, workers, budget)
    if spec.bins_for("area") * spec.bins_for("asymmetry") > budget:
        raise BudgetExceeded(f"{spec.n_bins} bins exceed the simulation budget {budget}")
    return build_bins(axes[0] if axes else "area", spec, config, constants, workers)
