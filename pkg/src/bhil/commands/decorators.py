"""
Stage registration decorators
"""

import inspect
import logging
from collections.abc import Callable
from typing import Any, TypeVar

from ..core.registry import METADATA_ATTR

logger = logging.getLogger(__name__)

F = TypeVar("F", bound=Callable[..., Any])


def command(
    name: str | None = None,
    description: str | None = None,
    outputs: list[str] | None = None,
) -> Callable[[F], F]:
    """
    Decorator to mark a function as a pipeline stage.

    Args:
        name: Command name on the CLI. Defaults to the function name with '-' for '_'.
        description: Defaults to the function docstring.
        outputs: Artifact names the stage writes, shown by --list-commands.

    Example:
        @command(name="simulate", description="Born-model the scenario's data")
        def simulate(ctx: RunContext) -> dict[str, Any]:
            ...
    """

    def decorator(func: F) -> F:
        command_name = name or func.__name__.replace("_", "-")
        parameters = list(inspect.signature(func).parameters)
        if len(parameters) != 1:
            raise TypeError(f"stage {command_name} must take exactly one RunContext argument")
        setattr(  # noqa: B010
            func,
            METADATA_ATTR,
            {
                "name": command_name,
                "description": description or (func.__doc__ or "").strip(),
                "outputs": outputs or [],
                "function": func,
            },
        )
        logger.debug(f"Command decorated: {command_name}")
        return func

    return decorator
