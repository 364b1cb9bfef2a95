"""
Configuration module for the staged tree learning toolkit
Handles environment variable loading and provides configuration settings
"""

import os
from pathlib import Path
from typing import Optional
from dotenv import load_dotenv


class ConfigurationError(ValueError):
    """Raised when an environment variable holds an unusable value"""


class Settings:
    """Application settings loaded from environment variables"""

    def __init__(self, env_file: Optional[Path] = None):
        # Load environment variables from config.env file
        env_file = env_file or Path("config.env")
        if env_file.exists():
            load_dotenv(env_file)
        else:
            # Fallback to .env file if config.env doesn't exist
            load_dotenv()

    @staticmethod
    def _int(name: str, default: int, minimum: int = 0) -> int:
        raw = os.getenv(name)
        if raw is None or raw.strip() == "":
            return default
        try:
            value = int(raw)
        except ValueError:
            raise ConfigurationError(f"{name} must be an integer, got {raw!r}")
        if value < minimum:
            raise ConfigurationError(f"{name} must be >= {minimum}, got {value}")
        return value

    # Logging Configuration
    @property
    def log_level(self) -> str:
        return os.getenv("STAGED_LOG_LEVEL", "INFO").upper()

    # Worker Configuration
    @property
    def max_workers(self) -> int:
        """Cap on worker processes used by benchmark replicates"""
        return self._int("STAGED_MAX_WORKERS", os.cpu_count() or 1, minimum=1)

    # Search Configuration
    @property
    def saturated_max_leaves(self) -> int:
        """Largest leaf count a saturated-start search accepts without --force"""
        return self._int("STAGED_SATURATED_MAX_LEAVES", 2 ** 14, minimum=1)

    @property
    def cli_saturated_max_leaves(self) -> int:
        """Stricter guard for `learn --mode bhc-saturated` (binary p <= 10)"""
        return self._int("STAGED_CLI_SATURATED_MAX_LEAVES", 2 ** 10, minimum=1)

    @property
    def bench_timeout_seconds(self) -> int:
        return self._int("STAGED_BENCH_TIMEOUT", 120, minimum=1)

    @property
    def default_seed(self) -> int:
        return self._int("STAGED_SEED", 0)

    # Output Configuration
    @property
    def dot_max_vertices(self) -> int:
        return self._int("STAGED_DOT_MAX_VERTICES", 4096, minimum=1)

    @property
    def output_dir(self) -> Path:
        return Path(os.getenv("STAGED_OUTPUT_DIR", "."))

    # Environment Configuration
    @property
    def environment(self) -> str:
        return os.getenv("ENVIRONMENT", "development")

    @property
    def debug(self) -> bool:
        return os.getenv("DEBUG", "false").lower() in ("true", "1", "yes", "on")

    def resolve_output(self, path: Path) -> Path:
        """Place bare file names under the configured output directory"""
        path = Path(path)
        if path.is_absolute() or path.parent != Path("."):
            return path
        return self.output_dir / path

    def ensure_output_directory(self):
        """Ensure the output directory exists"""
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def get_config_summary(self) -> dict:
        """Get a summary of current configuration"""
        return {
            "log_level": self.log_level,
            "max_workers": self.max_workers,
            "saturated_max_leaves": self.saturated_max_leaves,
            "cli_saturated_max_leaves": self.cli_saturated_max_leaves,
            "bench_timeout_seconds": self.bench_timeout_seconds,
            "default_seed": self.default_seed,
            "dot_max_vertices": self.dot_max_vertices,
            "output_dir": str(self.output_dir),
            "environment": self.environment,
            "debug": self.debug,
        }


# Global settings instance
settings = Settings()
