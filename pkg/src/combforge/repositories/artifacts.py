import csv
import json
import logging
import os
import threading
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Sequence, Tuple

from combforge.core.pulses import PulseMetrics
from combforge.core.types import TimeSeries
from combforge.core.utils import file_hash, format_float
from combforge.services.spectrum import Spectrum

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
ERROR_NAME = "error.json"

TIMESERIES_HEADERS = {"voltage": ["t_s", "V_V"], "phase": ["t_s", "phi_rad"]}
SPECTRUM_HEADER = ["k", "f_Hz", "P_W", "parity"]
PULSE_HEADER = ["label", "peak_time_s", "peak_height_V", "fwhm_s", "signed_area_Wb"]
SCALING_HEADER = ["N", "R_eff_ohm", "P_k_W", "P_total_W"]


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def emit_timeseries_csv(series: TimeSeries, path: str) -> str:
    times = series.times.tolist()
    values = series.values.tolist()
    return write_csv(path, TIMESERIES_HEADERS[series.kind], zip(times, values))


def emit_spectrum_csv(spectrum: Spectrum, path: str) -> str:
    rows = ((h.index, float(h.frequency), float(h.power), h.parity) for h in spectrum.harmonics)
    return write_csv(path, SPECTRUM_HEADER, rows)


def emit_pulses_csv(pulses: Sequence[Tuple[str, PulseMetrics]], path: str) -> str:
    rows = ((label, p.peak_time, p.peak_height, p.fwhm, p.signed_area) for label, p in pulses)
    return write_csv(path, PULSE_HEADER, rows)


def emit_scaling_csv(rows: Sequence[Tuple[int, float, float, float]], path: str) -> str:
    return write_csv(path, SCALING_HEADER, ((int(n), float(r), float(p), float(t)) for n, r, p, t in rows))


class ArtifactStore:
    """Owns one output directory: every file written through it lands in the manifest."""

    def __init__(self, root: str):
        self.root = root
        self._lock = threading.Lock()
        self._files: List[str] = []
        os.makedirs(root, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.root, name)

    def _track(self, name: str) -> str:
        with self._lock:
            if name not in self._files:
                self._files.append(name)
        return self.path(name)

    @property
    def files(self) -> List[str]:
        return sorted(self._files)

    def write_json(self, name: str, payload: Dict[str, Any], track: bool = True) -> str:
        path = self._track(name) if track else self.path(name)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(payload, f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write("\n")
        return path

    def timeseries(self, series: TimeSeries, name: str) -> str:
        return emit_timeseries_csv(series, self._track(name))

    def spectrum(self, spectrum: Spectrum, name: str) -> str:
        return emit_spectrum_csv(spectrum, self._track(name))

    def pulses(self, pulses: Sequence[Tuple[str, PulseMetrics]], name: str) -> str:
        return emit_pulses_csv(pulses, self._track(name))

    def scaling(self, rows: Sequence[Tuple[int, float, float, float]], name: str) -> str:
        return emit_scaling_csv(rows, self._track(name))

    def write_manifest(self, content: Dict[str, Any], runtime_seconds: float) -> str:
        """manifest.json: hashed `content` is reproducible, `run` holds wall-clock facts."""
        files = {name: file_hash(self.path(name)) for name in self.files}
        payload = {
            "content": {**content, "files": files},
            "run": {
                "generated_at": datetime.now(timezone.utc).isoformat(),
                "runtime_seconds": runtime_seconds,
            },
        }
        path = self.write_json(MANIFEST_NAME, payload, track=False)
        logger.info("Manifest written dir=%s files=%d runtime=%.3fs", self.root, len(files), runtime_seconds)
        return path

    def write_error(self, record: Dict[str, Any]) -> str:
        return self.write_json(ERROR_NAME, record, track=False)
