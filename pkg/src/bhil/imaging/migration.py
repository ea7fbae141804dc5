"""
Backprojection: the exact discrete adjoint of born_forward, its ramp-filtered
variant and numerical point-spread functions of the normal operator.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import fft

from ..core.geometry import AcquisitionGeometry, DataVolume
from ..core.model import GridSpec, ReflectivityGrid, VelocityModel, point_scatterers
from ..exceptions import ConfigError, ShapeMismatchError
from ..raytrace.traveltime import TableSet
from ..scatter.born import born_forward, kernel_inputs, wavelet_args
from ..scatter.kernels import born_adjoint_kernel
from ..scatter.mutes import MuteSpec
from ..scatter.wavelet import Ricker

logger = logging.getLogger(__name__)

RAMP_ORDERS = (0, 1, 2)


@dataclass
class ImageGrid:
    spec: GridSpec
    values: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.spec.dims:
            raise ShapeMismatchError(f"image shape {self.values.shape} does not match dims {self.spec.dims}")
        if not np.all(np.isfinite(self.values)):
            raise ShapeMismatchError("image holds non-finite values")

    def argmax(self) -> tuple[int, int, int]:
        return tuple(int(i) for i in np.unravel_index(int(np.argmax(self.values)), self.values.shape))  # type: ignore[return-value]

    def argmax_position(self) -> np.ndarray:
        return self.spec.position_of(self.argmax())

    def value_at(self, position: Sequence[float]) -> float:
        return float(self.values[self.spec.index_of(position)])


def model_inner(a: np.ndarray, b: np.ndarray, spec: GridSpec) -> float:
    """Cell-volume weighted inner product on the model grid."""
    return float(np.dot(np.ravel(a), np.ravel(b)) * spec.cell_volume)


def _wavelet_of(data: DataVolume, wavelet: Ricker | None) -> Ricker:
    if wavelet is not None:
        return wavelet
    meta = data.metadata.get("wavelet")
    if not meta:
        raise ConfigError("data carries no wavelet metadata; pass the wavelet explicitly")
    return Ricker(f_peak=meta["f_peak"], amplitude=meta["amplitude"], support_halfwidth=meta["support_halfwidth"])


def born_adjoint(
    data: DataVolume,
    model: VelocityModel,
    geometry: AcquisitionGeometry,
    spec: GridSpec,
    wavelet: Ricker | None = None,
    tables: TableSet | None = None,
) -> ImageGrid:
    """
    F* d: the forward kernel summed over traces in gather form, times dt.

    Cells without a valid traveltime on the tabled path are left at zero and
    listed in the image metadata.
    """
    if data.geometry != geometry or data.samples.shape != geometry.data_shape:
        raise ShapeMismatchError(
            f"data axes {data.samples.shape} do not match the geometry {geometry.data_shape}"
        )
    wavelet = _wavelet_of(data, wavelet)
    inputs = kernel_inputs(model, geometry, spec, tables)
    a, amp, halfwidth = wavelet_args(wavelet)
    axis = geometry.time_axis
    cells = spec.flat_centers()
    image = np.zeros(spec.size)
    traces = np.ascontiguousarray(data.as_traces(), dtype=float)
    metadata: dict[str, Any] = {"operator": "adjoint", "amplitude_convention": inputs.amplitude_convention}

    if inputs.use_tables:
        valid = tables.valid().reshape(-1)  # type: ignore[union-attr]
        keep = np.nonzero(valid)[0]
        sub = np.zeros(keep.size)
        born_adjoint_kernel(
            inputs.src, inputs.rec, np.ascontiguousarray(cells[keep]), traces,
            np.ascontiguousarray(inputs.ts[:, keep]), np.ascontiguousarray(inputs.tr[:, keep]),
            np.ascontiguousarray(inputs.cspeed[keep]), inputs.c0, True,
            axis.first, axis.step, axis.n, a, amp, halfwidth, sub,
        )
        image[keep] = sub
        if keep.size < spec.size:
            metadata["uncovered_cells"] = int(spec.size - keep.size)
            logger.warning(f"{spec.size - keep.size} image cells lack traveltimes and stay zero")
    else:
        born_adjoint_kernel(
            inputs.src, inputs.rec, cells, traces, inputs.ts, inputs.tr, inputs.cspeed, inputs.c0, False,
            axis.first, axis.step, axis.n, a, amp, halfwidth, image,
        )
    return ImageGrid(spec, image.reshape(spec.dims), metadata)


def ramp_filter(data: DataVolume, order: int) -> DataVolume:
    """Multiply the time spectrum by |2 pi f|^order; order 0 returns the data unchanged."""
    if order not in RAMP_ORDERS:
        raise ConfigError(f"ramp_order must be one of {RAMP_ORDERS}, got {order}")
    if order == 0:
        return data
    nt = data.geometry.time_axis.n
    n_fft = 1 << int(np.ceil(np.log2(2 * nt)))
    f = fft.rfftfreq(n_fft, d=data.dt)
    spectrum = fft.rfft(data.samples, n=n_fft, axis=-1) * (2.0 * np.pi * f) ** order
    filtered = fft.irfft(spectrum, n=n_fft, axis=-1)[..., :nt]
    return data.with_samples(filtered, ramp_order=order)


def filtered_backprojection(
    data: DataVolume,
    model: VelocityModel,
    geometry: AcquisitionGeometry,
    spec: GridSpec,
    ramp_order: int = 2,
    wavelet: Ricker | None = None,
    tables: TableSet | None = None,
) -> ImageGrid:
    """
    Ramp-filter the data in time, then backproject.

    The ramp |2 pi f|^2 equals -d^2/dt^2, which keeps the point-scatterer
    response positive. With ramp_order 0 this is born_adjoint exactly.
    """
    filtered = ramp_filter(data, ramp_order)
    image = born_adjoint(filtered, model, geometry, spec, wavelet or _wavelet_of(data, None), tables)
    image.metadata.update(operator="filtered_backprojection", ramp_order=ramp_order)
    return image


def normal_psf(
    model: VelocityModel,
    geometry: AcquisitionGeometry,
    scatterer: Sequence[float],
    wavelet: Ricker,
    spec: GridSpec,
    depth_floor: float,
    ramp_order: int = 2,
    mutes: list[MuteSpec] | None = None,
    tables: TableSet | None = None,
) -> ImageGrid:
    """Filtered backprojection of the data of a unit point scatterer."""
    reflectivity: ReflectivityGrid = point_scatterers(
        spec, [(tuple(scatterer), 1.0)], depth_floor, sources=geometry.source_positions(), epsilon=geometry.epsilon
    )
    data = born_forward(model, reflectivity, geometry, wavelet, mutes=mutes, tables=tables)
    image = filtered_backprojection(data, model, geometry, spec, ramp_order, wavelet, tables)
    image.metadata.update(scatterer=[float(v) for v in scatterer], f_peak=wavelet.f_peak)
    return image


def fwhm(image: ImageGrid, axis: int, peak_index: Sequence[int] | None = None) -> float:
    """Full width at half maximum, in cells, of the line through the peak along an axis."""
    peak = tuple(peak_index) if peak_index is not None else image.argmax()
    line_index = list(peak)
    line_index[axis] = slice(None)  # type: ignore[call-overload]
    line = image.values[tuple(line_index)]
    i0 = peak[axis]
    half = 0.5 * line[i0]
    if half <= 0:
        return 0.0

    def edge(step: int) -> float:
        i = i0
        while 0 <= i + step < line.size and line[i + step] > half:
            i += step
        if not 0 <= i + step < line.size:
            return float(i)
        # linear crossing between i and i + step
        frac = (line[i] - half) / (line[i] - line[i + step])
        return i + step * frac

    return float(edge(1) - edge(-1))
