"""Pipeline stages for the bhil CLI"""

from .decorators import command

__all__ = ["command"]

try:
    from . import pipeline

    __all__.append("pipeline")
except ImportError:
    pass
