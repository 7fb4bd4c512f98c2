"""Settings management for fctl."""

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class FctlSettings(BaseSettings):
    """Runtime settings for the fctl toolkit.

    Values are read from ``FCTL_``-prefixed environment variables or a
    ``.env`` file. Experiment hyperparameters do not live here; they belong
    to :class:`fctl.training.config.TrainConfig`.

    Attributes:
        log_level: Root log level used by the command-line entry point
        output_dir: Directory receiving reports, curves and checkpoints
        workers: Number of processes used to run independent seeds
    """

    model_config = SettingsConfigDict(
        env_prefix="FCTL_", env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )

    log_level: str = "INFO"
    output_dir: Path = Path("fctl-runs")
    workers: int = Field(1, ge=1)

    def get_logging_config(self) -> dict:
        """Get logging configuration as a dictionary.

        Returns:
            Keyword arguments for ``logging.basicConfig``
        """
        return {
            "level": self.log_level.upper(),
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        }
