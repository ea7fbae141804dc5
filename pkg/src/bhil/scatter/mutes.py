"""
Data-side mutes: a directional cone cutoff in the (rho, tau) plane and a
smooth direct-arrival cutoff.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
from scipy import fft
from scipy.signal.windows import tukey

from ..core.geometry import AcquisitionGeometry, DataVolume
from ..exceptions import AssumptionViolation, ConfigError

logger = logging.getLogger(__name__)

MIN_WINDOW_SAMPLES = 8


@dataclass(frozen=True)
class DirectionalCone:
    """
    Remove arrivals whose borehole slowness lies in a cone around rho0.

    rho0 is the projection onto the borehole of the unit propagation direction
    of the offending arrival; the (k, f) plane is made dimensionless by c_ref.
    """

    receiver_window_center: float
    window_halfwidth: float
    cone_axis: float
    cone_halfangle: float
    taper_fraction: float = 0.2
    window_taper: float = 0.25
    c_ref: float = 1.0

    kind = "directional_cone"

    def __post_init__(self) -> None:
        if not 0.0 < self.cone_halfangle < 0.5 * np.pi:
            raise AssumptionViolation("Assumption 3.2", f"cone_halfangle must lie in (0, pi/2), got {self.cone_halfangle}")
        if not self.taper_fraction > 0:
            raise AssumptionViolation("Assumption 3.2", f"cone taper_fraction must be > 0, got {self.taper_fraction}")
        if not 0.0 < self.window_taper <= 1.0:
            raise ConfigError(f"window_taper must lie in (0, 1], got {self.window_taper}")
        if not self.window_halfwidth > 0:
            raise ConfigError(f"window_halfwidth must be > 0, got {self.window_halfwidth}")
        if not -1.0 <= self.cone_axis <= 1.0:
            raise AssumptionViolation("Assumption 3.2", f"cone_axis is a direction cosine, got {self.cone_axis}")
        if not self.c_ref > 0:
            raise ConfigError(f"c_ref must be > 0, got {self.c_ref}")

    @property
    def psi0(self) -> float:
        return float(np.arctan2(-self.cone_axis, 1.0))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **asdict(self)}


@dataclass(frozen=True)
class DirectArrival:
    """Zero samples with c0 t <= |S - R| + epsilon_time * c0, then a cosine ramp over taper_time."""

    epsilon_time: float
    taper_time: float

    kind = "direct_arrival"

    def __post_init__(self) -> None:
        if not self.epsilon_time > 0:
            raise AssumptionViolation("Direct-arrival mute", f"epsilon must be > 0, got {self.epsilon_time}")
        if not self.taper_time > 0:
            raise ConfigError(f"taper_time must be > 0, got {self.taper_time}")

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **asdict(self)}


MuteSpec = DirectionalCone | DirectArrival


def build_mute(config: dict[str, Any]) -> MuteSpec:
    params = dict(config)
    kind = params.pop("kind", None)
    if kind == DirectionalCone.kind:
        return DirectionalCone(**params)
    if kind == DirectArrival.kind:
        return DirectArrival(**params)
    raise ConfigError(f"unknown mute kind {kind!r}; expected 'directional_cone' or 'direct_arrival'")


def _cosine_ramp(x: np.ndarray) -> np.ndarray:
    """0 for x <= 0, 1 for x >= 1, raised cosine between."""
    x = np.clip(x, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * x))


def cone_weights(spec: DirectionalCone, k: np.ndarray, f: np.ndarray) -> np.ndarray:
    """chi2 on the (k, f >= 0) grid."""
    psi = np.arctan2(spec.c_ref * k[:, None], f[None, :])
    diff = np.mod(psi - spec.psi0 + 0.5 * np.pi, np.pi) - 0.5 * np.pi
    taper = spec.taper_fraction * spec.cone_halfangle
    return _cosine_ramp((np.abs(diff) - spec.cone_halfangle) / taper)


def _append_mute(data: DataVolume, spec: MuteSpec) -> DataVolume:
    return data.with_samples(data.samples, mutes=list(data.metadata.get("mutes", [])) + [spec.to_dict()])


def apply_directional_mute(data: DataVolume, spec: DirectionalCone) -> DataVolume:
    """
    Per source: taper the receiver window, filter in (k, f) with the cone
    cutoff, and replace the windowed part of the gather with the result.
    """
    geometry = data.geometry
    r = geometry.receivers.samples()
    lo = spec.receiver_window_center - spec.window_halfwidth
    hi = spec.receiver_window_center + spec.window_halfwidth
    if lo < geometry.receivers.lo - 1e-12 or hi > geometry.receivers.hi + 1e-12:
        raise ConfigError(
            f"mute window ({lo:.4g}, {hi:.4g}) exceeds the receiver range "
            f"({geometry.receivers.lo}, {geometry.receivers.hi})"
        )
    inside = np.nonzero((r >= lo) & (r <= hi))[0]
    if inside.size < MIN_WINDOW_SAMPLES:
        raise ConfigError(
            f"mute window holds {inside.size} receivers; at least {MIN_WINDOW_SAMPLES} are needed to realise a cone"
        )
    n_win = inside.size
    chi1 = tukey(n_win, alpha=spec.window_taper)
    n_r = 1 << int(np.ceil(np.log2(n_win)))
    n_t = 1 << int(np.ceil(np.log2(2 * geometry.time_axis.n)))
    k = fft.fftfreq(n_r, d=geometry.receivers.step)
    f = fft.rfftfreq(n_t, d=geometry.time_axis.step)
    chi2 = cone_weights(spec, k, f)

    traces = data.as_traces()
    out = traces.copy()
    for isrc in range(traces.shape[0]):
        gather = traces[isrc, inside] * chi1[:, None]
        spectrum = fft.fft(fft.rfft(gather, n=n_t, axis=1), n=n_r, axis=0)
        filtered = fft.irfft(fft.ifft(spectrum * chi2, axis=0), n=n_t, axis=1)
        out[isrc, inside] = traces[isrc, inside] * (1.0 - chi1[:, None]) + filtered[:n_win, : traces.shape[2]]
    logger.debug(f"Directional mute around rho0={spec.cone_axis} applied to {traces.shape[0]} gathers")
    muted = data.with_samples(out.reshape(data.samples.shape))
    return _append_mute(muted, spec)


def direct_arrival_weights(
    geometry: AcquisitionGeometry, c0_ref: float, spec: DirectArrival
) -> np.ndarray:
    """(n_sources, n_receivers, n_t) multiplier."""
    S = geometry.source_positions()
    R = geometry.receiver_positions()
    offset = np.linalg.norm(S[:, None, :] - R[None, :, :], axis=-1)
    t = geometry.time_axis.samples()
    t_edge = offset[..., None] / c0_ref + spec.epsilon_time
    return _cosine_ramp((t[None, None, :] - t_edge) / spec.taper_time)


def apply_direct_arrival_mute(
    data: DataVolume, geometry: AcquisitionGeometry, c0_ref: float, spec: DirectArrival
) -> DataVolume:
    """Attenuate the direct arrival with a smooth cutoff in c0 t - |S - R|."""
    if not c0_ref > 0:
        raise ConfigError(f"c0_ref must be > 0, got {c0_ref}")
    weights = direct_arrival_weights(geometry, c0_ref, spec)
    muted = data.as_traces() * weights
    return _append_mute(data.with_samples(muted.reshape(data.samples.shape)), spec)


def apply_mutes(
    data: DataVolume, mutes: list[MuteSpec], c0_ref: float
) -> DataVolume:
    """Apply mutes in order; each one is appended to the mute log."""
    for spec in mutes:
        if isinstance(spec, DirectionalCone):
            data = apply_directional_mute(data, spec)
        else:
            data = apply_direct_arrival_mute(data, data.geometry, c0_ref, spec)
    return data
