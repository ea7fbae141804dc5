"""
Borehole Imaging Lab - Born modeling, backprojection and canonical-relation
diagnostics for dense-array, crosswell and walkaway borehole seismics
"""

__version__ = "0.1.0"
__author__ = "Richard Chukwu"
__email__ = "richinex@gmail.com"

from .config import Scenario, dump_scenario, parse_scenario
from .core.geometry import Crosswell, DataVolume, DenseArray, Walkaway
from .core.model import ConstantModel, GaussianLensModel, GradientModel, GridSpec, point_scatterers
from .exceptions import AssumptionViolation, BHILError, ConfigError, GridFormatError, NumericalError
from .imaging.migration import born_adjoint, filtered_backprojection, normal_psf
from .scatter.born import born_forward
from .scatter.wavelet import Ricker

__all__ = [
    "Scenario",
    "parse_scenario",
    "dump_scenario",
    "DenseArray",
    "Crosswell",
    "Walkaway",
    "DataVolume",
    "ConstantModel",
    "GradientModel",
    "GaussianLensModel",
    "GridSpec",
    "point_scatterers",
    "Ricker",
    "born_forward",
    "born_adjoint",
    "filtered_backprojection",
    "normal_psf",
    "BHILError",
    "ConfigError",
    "AssumptionViolation",
    "NumericalError",
    "GridFormatError",
]
