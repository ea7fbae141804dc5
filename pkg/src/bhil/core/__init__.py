"""Models, grids, acquisition geometries and the command registry"""

from .geometry import AcquisitionGeometry, Axis, Crosswell, DataVolume, DenseArray, Walkaway
from .model import GridSpec, ReflectivityGrid, VelocityModel
from .registry import CommandRegistry

__all__ = [
    "AcquisitionGeometry",
    "Axis",
    "Crosswell",
    "DataVolume",
    "DenseArray",
    "Walkaway",
    "GridSpec",
    "ReflectivityGrid",
    "VelocityModel",
    "CommandRegistry",
]
