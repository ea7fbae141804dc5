"""
Tests for stage decorators
"""

import pytest

from bhil.commands.decorators import command
from bhil.core.registry import METADATA_ATTR


def test_command_decorator_basic():
    """Test basic command decorator functionality"""

    @command()
    def write_slices(ctx):
        """Write image slices"""
        return {}

    metadata = getattr(write_slices, METADATA_ATTR)
    assert metadata["name"] == "write-slices"
    assert metadata["description"] == "Write image slices"
    assert metadata["function"] is write_slices
    assert metadata["outputs"] == []


def test_command_decorator_custom_name():
    """Test command decorator with custom name and outputs"""

    @command(name="custom", description="Custom stage", outputs=["a.jsonl"])
    def some_function(ctx):
        return {}

    metadata = getattr(some_function, METADATA_ATTR)
    assert metadata["name"] == "custom"
    assert metadata["description"] == "Custom stage"
    assert metadata["outputs"] == ["a.jsonl"]


def test_command_decorator_preserves_function():
    """Test that the decorated function still runs"""

    @command(name="echo")
    def echo(ctx):
        return {"ctx": ctx}

    assert echo(3) == {"ctx": 3}


def test_command_decorator_rejects_wrong_arity():
    """Test that stages must take exactly one argument"""
    with pytest.raises(TypeError):

        @command(name="bad")
        def bad(ctx, extra):
            return {}
