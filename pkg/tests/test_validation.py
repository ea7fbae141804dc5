"""
Tests for artifact path validation utilities
"""

import pathlib
import tempfile

from bhil.utils.validation import prepare_output_dir, relative_artifact_name, validate_artifact_path


def test_validate_artifact_path_basic():
    """Test a relative artifact name resolves inside the output directory"""
    with tempfile.TemporaryDirectory() as temp_dir:
        result = validate_artifact_path("image.bhil", temp_dir)
        assert result is not None
        assert result.name == "image.bhil"
        assert result.parent == pathlib.Path(temp_dir).resolve()


def test_validate_artifact_path_outside_directory():
    """Test that paths escaping the output directory are rejected"""
    with tempfile.TemporaryDirectory() as temp_dir:
        assert validate_artifact_path("../../etc/passwd", temp_dir) is None
        assert validate_artifact_path("/etc/passwd", temp_dir) is None


def test_validate_artifact_path_empty():
    """Test validation with empty path"""
    assert validate_artifact_path("", ".") is None


def test_validate_artifact_path_subdirectory():
    """Test artifacts in subdirectories"""
    with tempfile.TemporaryDirectory() as temp_dir:
        result = validate_artifact_path("slices/image.csv", temp_dir)
        assert result is not None
        assert relative_artifact_name(result, pathlib.Path(temp_dir)) == "slices/image.csv"


def test_prepare_output_dir_creates_directory():
    """Test output directory creation"""
    with tempfile.TemporaryDirectory() as temp_dir:
        target = pathlib.Path(temp_dir) / "a" / "b"
        result = prepare_output_dir(target)
        assert result is not None
        assert result.is_dir()


def test_prepare_output_dir_rejects_file():
    """Test that an existing file cannot be used as output directory"""
    with tempfile.TemporaryDirectory() as temp_dir:
        target = pathlib.Path(temp_dir) / "file.txt"
        target.write_text("x")
        assert prepare_output_dir(target) is None
