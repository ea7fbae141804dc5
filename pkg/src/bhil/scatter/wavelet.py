"""
Ricker source wavelet with closed-form derivatives.
"""

from dataclasses import dataclass
from typing import Any

import numpy as np

from ..exceptions import ConfigError


@dataclass(frozen=True)
class Ricker:
    """
    Zero-phase Ricker wavelet w(t) = amplitude * (1 - 2u^2) exp(-u^2), u = pi f t.

    The Born source needs w''; it is evaluated analytically at any delay, so no
    sampled data is ever differentiated.
    """

    f_peak: float
    amplitude: float = 1.0
    support_halfwidth: float | None = None

    kind = "ricker"

    def __post_init__(self) -> None:
        if not self.f_peak > 0:
            raise ConfigError(f"f_peak must be > 0, got {self.f_peak}")
        if self.support_halfwidth is None:
            # |u| <= 4: w'' has decayed to ~3e-5 of its peak
            object.__setattr__(self, "support_halfwidth", 4.0 / (np.pi * self.f_peak))
        if not self.support_halfwidth > 0:
            raise ConfigError("support_halfwidth must be > 0")

    @property
    def halfwidth(self) -> float:
        return float(self.support_halfwidth)  # type: ignore[arg-type]

    @property
    def f_max(self) -> float:
        """Highest frequency with appreciable energy (2.5 f_peak)."""
        return 2.5 * self.f_peak

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        u2 = (np.pi * self.f_peak * np.asarray(t, dtype=float)) ** 2
        return self.amplitude * (1.0 - 2.0 * u2) * np.exp(-u2)

    def second_derivative(self, t: np.ndarray) -> np.ndarray:
        a = np.pi * self.f_peak
        u2 = (a * np.asarray(t, dtype=float)) ** 2
        return self.amplitude * a * a * (-8.0 * u2 * u2 + 24.0 * u2 - 6.0) * np.exp(-u2)

    def spectrum_peak(self) -> float:
        """Frequency of the spectrum maximum; equals f_peak for a Ricker."""
        return float(self.f_peak)

    def spectrum(self, f: np.ndarray) -> np.ndarray:
        """Amplitude spectrum |W(f)|."""
        f = np.asarray(f, dtype=float)
        r = (f / self.f_peak) ** 2
        return self.amplitude * 2.0 / (np.sqrt(np.pi) * self.f_peak) * r * np.exp(-r)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "f_peak": self.f_peak,
            "amplitude": self.amplitude,
            "support_halfwidth": self.halfwidth,
        }
