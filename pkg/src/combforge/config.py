import logging
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from combforge import __version__
from combforge.core.errors import ConfigParseError, ConfigValidationError
from combforge.core.types import DriveConfig, SimGrid, SquidParams
from combforge.core.utils import content_hash
from combforge.repositories.artifacts import ArtifactStore
from combforge.services.array import ArrayConfig
from combforge.services.ensemble import DEFAULT_BIN_BUDGET, DisorderSpec

logger = logging.getLogger(__name__)

OutputKind = Literal["waveform", "phase", "spectrum", "pulses"]
RESOLVED_CONFIG_NAME = "resolved_config.json"


class RunConfig(BaseModel):
    """Every knob of a run, SI values under unit-suffixed keys.

    Defaults are the niobium array of the reference device: R = 20 ohm,
    I_+ = 100 uA, delta = 1e-3, epsilon = 0.9, R_L = 50 ohm, N = 50, nu = 1 GHz.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    shunt_resistance_ohm: float = 20.0
    junction_capacitance_F: float = 0.0
    critical_current_sum_A: float = 1e-4
    asymmetry: float = 0.0
    loop_inductance_H: float = 0.0
    area_perturbation: float = 0.0

    drive_frequency_Hz: float = 1e9
    drive_amplitude: float = 0.9
    bias: float = 1e-3

    # target step; the grid snaps to the nearest divisor of 2*pi
    time_step: float = 1e-4
    periods_total: int = 2
    periods_transient: int = 1

    n_squids: int = 50
    load_resistance_ohm: float = 50.0

    sigma_area: float = 0.0
    sigma_asymmetry: float = 0.0
    preferential_asymmetry: float = 0.0
    n_bins: int = 201
    n_realizations: int = 10_000
    seed: int = 0
    bin_budget: int = DEFAULT_BIN_BUDGET

    k_max: int = 200
    outputs: List[OutputKind] = ["waveform", "spectrum", "pulses"]
    output_dir: str = "out"
    threads: Optional[int] = None

    @model_validator(mode="after")
    def _check_domain(self) -> "RunConfig":
        if self.asymmetry != 0 and self.preferential_asymmetry != 0 and self.asymmetry != self.preferential_asymmetry:
            raise ValueError(
                f"asymmetry={self.asymmetry} and preferential_asymmetry={self.preferential_asymmetry} "
                "both set the nominal r; give one of them or equal values"
            )
        self.array()
        self.disorder()
        if self.k_max < 1:
            raise ValueError(f"k_max must be positive, got {self.k_max}")
        if self.threads is not None and self.threads < 1:
            raise ValueError(f"threads must be positive, got {self.threads}")
        if self.bin_budget < 1:
            raise ValueError(f"bin_budget must be positive, got {self.bin_budget}")
        return self

    @property
    def nominal_asymmetry(self) -> float:
        """r of the undisordered SQUID: whichever of asymmetry / preferential_asymmetry is set."""
        return self.preferential_asymmetry or self.asymmetry

    def squid_params(self) -> SquidParams:
        return SquidParams(
            shunt_resistance=self.shunt_resistance_ohm,
            critical_current_sum=self.critical_current_sum_A,
            junction_capacitance=self.junction_capacitance_F,
            asymmetry=self.nominal_asymmetry,
            loop_inductance=self.loop_inductance_H,
            area_perturbation=self.area_perturbation,
        )

    def drive(self) -> DriveConfig:
        return DriveConfig(self.drive_frequency_Hz, self.drive_amplitude, self.bias)

    def grid(self) -> SimGrid:
        return SimGrid.snapped(self.time_step, self.periods_total, self.periods_transient)

    def array(self) -> ArrayConfig:
        return ArrayConfig(self.n_squids, self.load_resistance_ohm, self.squid_params(), self.drive(), self.grid())

    def disorder(self) -> DisorderSpec:
        return DisorderSpec(
            sigma_area=self.sigma_area,
            sigma_asymmetry=self.sigma_asymmetry,
            preferential_asymmetry=self.nominal_asymmetry,
            n_bins=self.n_bins,
            n_realizations=self.n_realizations,
            seed=self.seed,
        )

    @property
    def has_disorder(self) -> bool:
        return self.sigma_area > 0 or self.sigma_asymmetry > 0

    def reproducible_dump(self) -> Dict[str, Any]:
        """Values that determine the numerical results; where they are written and how many threads ran do not."""
        return self.model_dump(mode="json", exclude={"output_dir", "threads"})

    def config_hash(self) -> str:
        return content_hash(self.reproducible_dump())

    def with_overrides(self, **changes: Any) -> "RunConfig":
        return build_config({**self.model_dump(), **changes})


def _validation_error(exc: ValidationError) -> ConfigValidationError:
    first = exc.errors()[0]
    key = ".".join(str(p) for p in first["loc"]) or None
    if first["type"] == "extra_forbidden":
        return ConfigValidationError(f"unknown config key {key!r}", key=key)
    msg = first["msg"].removeprefix("Value error, ")
    return ConfigValidationError(f"{key}: {msg}" if key else msg, key=key)


def build_config(values: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(values)
    except ValidationError as exc:
        raise _validation_error(exc) from exc


def _read_file(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc.strerror}", path=path) from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigParseError(f"config {path} is not valid YAML/JSON: {exc}", path=path, line=line) from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigParseError(f"config {path} must be a mapping, got {type(raw).__name__}", path=path, line=1)
    return raw


def parse_overrides(overrides: Sequence[str]) -> Dict[str, Any]:
    """`key=value` pairs; values are YAML scalars or flow lists."""
    parsed: Dict[str, Any] = {}
    for item in overrides:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigParseError(f"override {item!r} is not of the form key=value", key=key or None)
        try:
            parsed[key] = yaml.safe_load(raw) if raw.strip() else None
        except yaml.YAMLError as exc:
            raise ConfigParseError(f"override {key} has an unparsable value {raw!r}", key=key) from exc
    return parsed


def resolve_config(path: str | None, overrides: Sequence[str] = ()) -> Tuple[RunConfig, Dict[str, Any]]:
    file_values = _read_file(path) if path else {}
    override_values = parse_overrides(overrides)
    config = build_config({**file_values, **override_values})
    provenance = {
        "version": __version__,
        "config_hash": config.config_hash(),
        "resolved": config.reproducible_dump(),
        "output_dir": config.output_dir,
        "sources": {"file": path, "file_values": file_values, "overrides": override_values},
    }
    return config, provenance


def load_config(path: str | None, overrides: Sequence[str] = (), echo: bool = True) -> RunConfig:
    config, provenance = resolve_config(path, overrides)
    if echo:
        ArtifactStore(config.output_dir).write_json(RESOLVED_CONFIG_NAME, provenance)
    logger.info(
        "Config loaded path=%s overrides=%d hash=%s",
        path,
        len(provenance["sources"]["overrides"]),
        provenance["config_hash"][:12],
    )
    return config
