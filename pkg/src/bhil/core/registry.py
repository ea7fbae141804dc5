"""
Command registry for pipeline stages
"""

import importlib
import logging
import pkgutil
from collections.abc import Callable
from typing import Any

logger = logging.getLogger(__name__)

METADATA_ATTR = "_bhil_command_metadata"


class CommandRegistry:
    """
    Registry for pipeline stages with decorator-based registration
    """

    def __init__(self) -> None:
        self._commands: dict[str, Callable] = {}
        self._descriptions: dict[str, str] = {}

    def command(self) -> Callable[[Callable], Callable]:
        """
        Decorator to register a function as a stage.

        The function must already carry the metadata set by the @command
        decorator from commands.decorators.
        """

        def decorator(func: Callable) -> Callable:
            if hasattr(func, METADATA_ATTR):
                metadata = getattr(func, METADATA_ATTR)
                name = metadata["name"]
                if name in self._commands and self._commands[name] is not func:
                    logger.warning(f"Command {name} registered twice; keeping the latest")
                self._commands[name] = func
                self._descriptions[name] = metadata["description"]
                logger.debug(f"Registered command: {name}")
            else:
                logger.warning(
                    f"Function {func.__name__} does not have command metadata. Use @command decorator first."
                )
            return func

        return decorator

    def register_function(
        self, func: Callable, name: str | None = None, description: str | None = None
    ) -> None:
        """
        Manually register a function as a stage (alternative to the decorator)

        Args:
            func: Stage function taking a RunContext
            name: Command name (defaults to the function name with '-' for '_')
            description: Optional description (defaults to the docstring)
        """
        command_name = name or func.__name__.replace("_", "-")
        self._commands[command_name] = func
        self._descriptions[command_name] = description or (func.__doc__ or "").strip()
        logger.debug(f"Manually registered command: {command_name}")

    def get_command(self, name: str) -> Callable | None:
        """Get a registered command by name"""
        return self._commands.get(name)

    def list_commands(self) -> list[str]:
        """List all registered command names"""
        return list(self._commands.keys())

    @property
    def commands(self) -> list[dict[str, Any]]:
        """Name and description of every command"""
        return [{"name": n, "description": self._descriptions[n]} for n in self._commands]

    def auto_discover_commands(self, module_or_package: Any) -> None:
        """
        Discover and register stages from a module or package.

        Args:
            module_or_package: Module, package or dotted name to scan
        """
        if isinstance(module_or_package, str):
            module_or_package = importlib.import_module(module_or_package)

        if hasattr(module_or_package, "__path__"):
            for _, modname, _ in pkgutil.iter_modules(
                module_or_package.__path__, module_or_package.__name__ + "."
            ):
                try:
                    submodule = importlib.import_module(modname)
                    self._scan_module(submodule)
                except ImportError as e:
                    logger.warning(f"Could not import {modname}: {e}")
        else:
            self._scan_module(module_or_package)

    def _scan_module(self, module: Any) -> None:
        """Scan a module for functions decorated with @command"""
        for name in dir(module):
            obj = getattr(module, name)
            if callable(obj) and hasattr(obj, METADATA_ATTR):
                self.command()(obj)
