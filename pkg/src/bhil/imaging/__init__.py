"""Backprojection, point-spread functions and artifact studies"""

from .artifacts import ArtifactReport, detect_ghosts, frequency_scaling_study
from .migration import ImageGrid, born_adjoint, filtered_backprojection, normal_psf

__all__ = [
    "ArtifactReport",
    "ImageGrid",
    "born_adjoint",
    "detect_ghosts",
    "filtered_backprojection",
    "frequency_scaling_study",
    "normal_psf",
]
