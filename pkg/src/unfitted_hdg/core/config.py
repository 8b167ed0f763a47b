"""
Configuration settings for the unfitted HDG solver.
"""
import logging
import os
from typing import List, Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Config:
    """Environment-level configuration.

    The output directory is the only value read from the environment; every
    other setting comes from config/settings.yaml or the run file.
    """

    OUTPUT_DIR = os.getenv("UNFITTED_HDG_OUTPUT_DIR")

    LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    @classmethod
    def output_dir(cls, default: str) -> str:
        """Resolve the output directory, honouring the environment override."""
        override = os.getenv("UNFITTED_HDG_OUTPUT_DIR", cls.OUTPUT_DIR)
        return override or default


def configure_logging(
    level: str = "INFO", log_file: Optional[str] = None, quiet: bool = False
) -> None:
    """
    Configure root logging for command-line runs.

    Args:
        level: Logging level name from settings
        log_file: Optional log file path
        quiet: Raise the level to WARNING
    """
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=logging.WARNING if quiet else getattr(logging, level.upper(), logging.INFO),
        format=Config.LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
