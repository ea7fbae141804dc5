"""Born forward modeling and data-side mutes"""

from .born import born_forward
from .mutes import DirectArrival, DirectionalCone, apply_mutes
from .wavelet import Ricker

__all__ = ["born_forward", "DirectArrival", "DirectionalCone", "apply_mutes", "Ricker"]
