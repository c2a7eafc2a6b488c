import os

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class Settings:
    def __init__(self) -> None:
        self.threads = self._parse_threads(os.getenv("COMB_FORGE_THREADS", ""))
        level = os.getenv("COMB_FORGE_LOG_LEVEL", "INFO").strip().upper()
        self.log_level = level if level in LOG_LEVELS else "INFO"

    def _parse_threads(self, raw: str) -> int | None:
        raw = raw.strip()
        if not raw:
            return None
        try:
            value = int(raw)
        except ValueError:
            return None
        return value if value > 0 else None

    def worker_count(self, requested: int | None = None) -> int:
        """Workers for bin simulations: the request, capped by COMB_FORGE_THREADS."""
        count = requested or os.cpu_count() or 1
        if self.threads is not None:
            count = min(count, self.threads)
        return max(int(count), 1)


settings = Settings()
