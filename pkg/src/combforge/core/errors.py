from typing import Any, Dict


class CombForgeError(Exception):
    """Base class for every error raised by combforge."""

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"error_type": type(self).__name__, "message": str(self)}
        for attr in ("bin_index", "bin_center", "path", "line", "key"):
            value = getattr(self, attr, None)
            if value is not None:
                record[attr] = value
        return record


class InvalidParameter(CombForgeError, ValueError):
    pass


class InvalidGrid(InvalidParameter):
    pass


class OutOfRange(InvalidParameter):
    pass


class NonConvergence(CombForgeError, RuntimeError):
    pass


class NoPulses(CombForgeError, ValueError):
    pass


class BudgetExceeded(CombForgeError, RuntimeError):
    pass


class SpectrumError(CombForgeError, ValueError):
    pass


class NonCommensurate(SpectrumError):
    pass


class BandwidthExceeded(SpectrumError):
    pass


class MixedConfig(SpectrumError):
    pass


class ConfigError(CombForgeError, ValueError):
    pass


class ConfigParseError(ConfigError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None, key: str | None = None):
        super().__init__(message)
        self.path = path
        self.line = line
        self.key = key


class ConfigValidationError(ConfigError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
