"""
Path validation utilities for Borehole Imaging Lab artifacts
"""

import logging
import pathlib

logger = logging.getLogger(__name__)


def validate_artifact_path(path: str, out_dir: str | pathlib.Path) -> pathlib.Path | None:
    """
    Validate and resolve an artifact path within an output directory.

    Args:
        path: The artifact path, usually relative to the output directory
        out_dir: The experiment output directory

    Returns:
        Resolved Path object if valid, None if invalid
    """
    if not path:
        logger.warning("Empty artifact path provided")
        return None

    root = pathlib.Path(out_dir).resolve()

    try:
        artifact = pathlib.Path(path)
        if not artifact.is_absolute():
            artifact = root / artifact
        resolved = artifact.resolve()

        # every artifact must be listed relative to the manifest directory
        try:
            resolved.relative_to(root)
        except ValueError:
            logger.warning(f"Artifact '{path}' is outside output directory '{root}'")
            return None

        return resolved

    except Exception as e:
        logger.warning(f"Invalid artifact path '{path}': {e}")
        return None


def prepare_output_dir(out_dir: str | pathlib.Path) -> pathlib.Path | None:
    """
    Create the output directory if needed and check that it is usable.

    Args:
        out_dir: Path to the output directory

    Returns:
        The resolved directory, or None if it cannot be used
    """
    try:
        directory = pathlib.Path(out_dir).resolve()
        if directory.exists() and not directory.is_dir():
            logger.error(f"Output path is not a directory: {directory}")
            return None

        directory.mkdir(parents=True, exist_ok=True)
        logger.info(f"Output directory: {directory}")
        return directory

    except Exception as e:
        logger.error(f"Failed to prepare output directory '{out_dir}': {e}")
        return None


def relative_artifact_name(path: pathlib.Path, out_dir: pathlib.Path) -> str:
    """Artifact name as recorded in the manifest (posix, relative)"""
    return path.resolve().relative_to(out_dir.resolve()).as_posix()
