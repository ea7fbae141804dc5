"""
Born forward modeling of single-scattering borehole data.

For constant c0 the kernel is the exact free-space one,

    d(S, R, t) = sum_y dc(y) w''(t - (A + B)/c0) (2 / c0^3) / (16 pi^2 A B) cellvol

For a variable background A/c0 and B/c0 are replaced by table times and the
spreading by the pseudo-spreading amplitude 2/c0(y)^3 / (16 pi^2 c0(y)^2 t_inc t_ref).
"""

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..core.geometry import AcquisitionGeometry, DataVolume, isochron_window_check
from ..core.model import ConstantModel, GridSpec, ReflectivityGrid, VelocityModel
from ..exceptions import ConfigError, NumericalError
from ..raytrace.traveltime import TableSet
from .kernels import born_forward_kernel, dummy_tables
from .mutes import MuteSpec, apply_mutes
from .wavelet import Ricker

logger = logging.getLogger(__name__)

GREEN_FUNCTION = "green_function"
PSEUDO_SPREADING = "pseudo_spreading"


@dataclass
class KernelInputs:
    """Station, cell and kinematic arrays handed to the compiled kernels."""

    src: np.ndarray
    rec: np.ndarray
    ts: np.ndarray
    tr: np.ndarray
    cspeed: np.ndarray
    c0: float
    use_tables: bool
    amplitude_convention: str


def kernel_inputs(
    model: VelocityModel,
    geometry: AcquisitionGeometry,
    spec: GridSpec,
    tables: TableSet | None = None,
    support: np.ndarray | None = None,
) -> KernelInputs:
    """
    Collect kernel inputs for the constant or tabled path.

    Raises:
        ConfigError: variable background without tables, or tables on another grid
        NumericalError: masked table cells inside the support
    """
    src = np.ascontiguousarray(geometry.source_positions())
    rec = np.ascontiguousarray(geometry.receiver_positions())
    if isinstance(model, ConstantModel):
        ts, tr, cs = dummy_tables()
        return KernelInputs(src, rec, ts, tr, cs, float(model.c), False, GREEN_FUNCTION)
    if tables is None:
        raise ConfigError(f"{model.kind} background needs traveltime tables for every station")
    if tables.spec != spec:
        raise ConfigError("traveltime tables were built on a different grid")
    if len(tables.sources) != len(src) or len(tables.receivers) != len(rec):
        raise ConfigError("traveltime tables do not match the geometry's stations")
    if support is not None:
        uncovered = np.argwhere(support & ~tables.valid())
        if uncovered.size:
            listing = ", ".join(str(tuple(int(i) for i in c)) for c in uncovered[:10])
            raise NumericalError(
                f"{len(uncovered)} reflectivity cells have no valid traveltime: {listing}"
                + (" ..." if len(uncovered) > 10 else "")
            )
    ts, tr = tables.stacked()
    cs = np.ascontiguousarray(model.speed(spec.flat_centers()))
    return KernelInputs(src, rec, ts, tr, cs, 0.0, True, PSEUDO_SPREADING)


def wavelet_args(wavelet: Ricker) -> tuple[float, float, float]:
    return float(np.pi * wavelet.f_peak), float(wavelet.amplitude), wavelet.halfwidth


def born_forward(
    model: VelocityModel,
    reflectivity: ReflectivityGrid,
    geometry: AcquisitionGeometry,
    wavelet: Ricker,
    mutes: list[MuteSpec] | None = None,
    tables: TableSet | None = None,
    c0_ref: float | None = None,
) -> DataVolume:
    """
    Single-scattering data of a reflectivity grid.

    Args:
        model: Background speed
        reflectivity: dc on a grid
        geometry: Acquisition geometry
        wavelet: Source wavelet (w'' is applied analytically)
        mutes: Mutes applied in order after modeling
        tables: Traveltime tables, required unless the background is constant
        c0_ref: Reference speed for the direct-arrival mute (defaults to c0 or
            the speed at the shallowest receiver)

    Returns:
        DataVolume whose metadata records the amplitude convention, the
        wavelet and the mute log
    """
    spec = reflectivity.spec
    support = reflectivity.support_mask()
    inputs = kernel_inputs(model, geometry, spec, tables, support)
    a, amp, halfwidth = wavelet_args(wavelet)
    axis = geometry.time_axis
    out = np.zeros((geometry.n_sources, geometry.receivers.n, axis.n))

    flat = np.nonzero(support.reshape(-1))[0]
    if flat.size:
        cells = np.ascontiguousarray(spec.flat_centers()[flat])
        weights = np.ascontiguousarray(reflectivity.values.reshape(-1)[flat] * spec.cell_volume)
        if inputs.use_tables:
            ts = np.ascontiguousarray(inputs.ts[:, flat])
            tr = np.ascontiguousarray(inputs.tr[:, flat])
            cs = np.ascontiguousarray(inputs.cspeed[flat])
        else:
            ts, tr, cs = inputs.ts, inputs.tr, inputs.cspeed
            isochron_window_check(geometry, cells, inputs.c0, halfwidth)
        born_forward_kernel(
            inputs.src, inputs.rec, cells, weights, ts, tr, cs, inputs.c0, inputs.use_tables,
            axis.first, axis.step, axis.n, a, amp, halfwidth, out,
        )
        if not np.all(np.isfinite(out)):
            raise NumericalError("forward modeling produced non-finite samples")

    metadata: dict[str, Any] = {
        "amplitude_convention": inputs.amplitude_convention,
        "wavelet": wavelet.to_dict(),
        "mutes": [],
    }
    data = DataVolume(geometry, out.reshape(geometry.data_shape), metadata)
    logger.info(
        f"Born forward: {flat.size} scattering cells, {geometry.n_sources}x{geometry.receivers.n} traces "
        f"({inputs.amplitude_convention})"
    )
    if mutes:
        if c0_ref is None:
            c0_ref = inputs.c0 if not inputs.use_tables else float(model.speed(geometry.receiver_positions()[0]))
        data = apply_mutes(data, list(mutes), c0_ref)
    return data
