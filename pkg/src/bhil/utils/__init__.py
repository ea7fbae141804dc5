"""Utility functions for Borehole Imaging Lab"""

from .logging import get_logger, setup_logging
from .parallel import configure_threads, ordered_map
from .validation import prepare_output_dir, validate_artifact_path

__all__ = ["setup_logging", "get_logger", "configure_threads", "ordered_map", "prepare_output_dir", "validate_artifact_path"]
