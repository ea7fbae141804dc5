"""
The .bhil binary grid format.

Layout (little-endian):

    magic    4s   b"BHIL"
    version  u2   1
    dtype    u1   1 = float64, 2 = float32
    ndim     u1
    per axis: name 16s, n u8, origin f8, step f8
    meta_len u4   followed by meta_len bytes of UTF-8 JSON
    payload  C-order samples
"""

import json
import logging
import pathlib
import struct
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..core.geometry import DataVolume
from ..core.model import GridSpec, ReflectivityGrid
from ..exceptions import GridFormatError

logger = logging.getLogger(__name__)

MAGIC = b"BHIL"
VERSION = 1
_DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<f4")}
_CODES = {np.dtype("float64"): 1, np.dtype("float32"): 2}
_HEAD = struct.Struct("<4sHBB")
_AXIS = struct.Struct("<16sQdd")
_META = struct.Struct("<I")


@dataclass(frozen=True)
class GridAxis:
    name: str
    n: int
    origin: float
    step: float


@dataclass
class GridFile:
    values: np.ndarray
    axes: list[GridAxis]
    metadata: dict[str, Any] = field(default_factory=dict)

    def grid_spec(self) -> GridSpec:
        if len(self.axes) != 3:
            raise GridFormatError(f"a model grid has 3 axes, this file has {len(self.axes)}")
        return GridSpec(
            tuple(a.origin for a in self.axes),  # type: ignore[arg-type]
            tuple(a.step for a in self.axes),  # type: ignore[arg-type]
            tuple(a.n for a in self.axes),  # type: ignore[arg-type]
        )


def spec_axes(spec: GridSpec) -> list[GridAxis]:
    return [GridAxis(f"y{i + 1}", spec.dims[i], spec.origin[i], spec.spacing[i]) for i in range(3)]


def volume_axes(data: DataVolume) -> list[GridAxis]:
    g = data.geometry
    names = ["s2", "s1"] if len(g.source_shape) == 2 else ["s"]
    axes = [GridAxis(name, n, 0.0, 1.0) for name, n in zip(names, g.source_shape)]
    axes.append(GridAxis("r", g.receivers.n, g.receivers.first, g.receivers.step))
    axes.append(GridAxis("t", g.time_axis.n, g.time_axis.first, g.time_axis.step))
    return axes


def _as_grid_file(obj: Any, metadata: dict[str, Any] | None) -> GridFile:
    if isinstance(obj, GridFile):
        return obj
    if isinstance(obj, DataVolume):
        meta = {"object": "data_volume", "geometry": obj.geometry.to_dict(), **obj.metadata}
        return GridFile(obj.samples, volume_axes(obj), {**meta, **(metadata or {})})
    if hasattr(obj, "spec") and hasattr(obj, "values"):
        meta = dict(getattr(obj, "metadata", {}))
        meta["object"] = "reflectivity" if isinstance(obj, ReflectivityGrid) else "image"
        return GridFile(obj.values, spec_axes(obj.spec), {**meta, **(metadata or {})})
    raise GridFormatError(f"cannot write object of type {type(obj).__name__}")


def write_grid(path: str | pathlib.Path, obj: Any, metadata: dict[str, Any] | None = None) -> pathlib.Path:
    """
    Write a grid, image, reflectivity or data volume.

    Raises:
        GridFormatError: zero-length axis, unsupported dtype or shape mismatch
    """
    grid = _as_grid_file(obj, metadata)
    values = np.asarray(grid.values)
    if values.dtype not in _CODES:
        raise GridFormatError(f"unsupported dtype {values.dtype}; use float64 or float32")
    if values.ndim != len(grid.axes) or any(a.n != n for a, n in zip(grid.axes, values.shape)):
        raise GridFormatError(f"axes {[a.n for a in grid.axes]} do not describe shape {values.shape}")
    if any(a.n == 0 for a in grid.axes):
        raise GridFormatError(f"zero-length axis in shape {values.shape}")

    meta = json.dumps(grid.metadata, sort_keys=True, default=_json_default).encode("utf-8")
    parts = [_HEAD.pack(MAGIC, VERSION, _CODES[values.dtype], values.ndim)]
    for a in grid.axes:
        parts.append(_AXIS.pack(a.name.encode("ascii")[:16], a.n, a.origin, a.step))
    parts.append(_META.pack(len(meta)))
    parts.append(meta)
    parts.append(np.ascontiguousarray(values, dtype=values.dtype.newbyteorder("<")).tobytes())

    path = pathlib.Path(path)
    path.write_bytes(b"".join(parts))
    logger.debug(f"Wrote {path.name}: shape {values.shape}")
    return path


def read_grid(path: str | pathlib.Path) -> GridFile:
    """
    Read a .bhil file.

    Raises:
        GridFormatError: bad magic, unknown version or dtype, truncated payload
    """
    blob = pathlib.Path(path).read_bytes()
    if len(blob) < _HEAD.size or blob[:4] != MAGIC:
        raise GridFormatError(f"{path}: not a BHIL grid")
    _, version, code, ndim = _HEAD.unpack_from(blob, 0)
    if version != VERSION:
        raise GridFormatError(f"{path}: unsupported BHIL version {version}")
    if code not in _DTYPES:
        raise GridFormatError(f"{path}: unknown dtype code {code}")
    offset = _HEAD.size
    if len(blob) < offset + ndim * _AXIS.size + _META.size:
        raise GridFormatError(f"{path}: truncated header")

    axes = []
    for _ in range(ndim):
        name, n, origin, step = _AXIS.unpack_from(blob, offset)
        axes.append(GridAxis(name.rstrip(b"\0").decode("ascii"), int(n), origin, step))
        offset += _AXIS.size
    (meta_len,) = _META.unpack_from(blob, offset)
    offset += _META.size
    if len(blob) < offset + meta_len:
        raise GridFormatError(f"{path}: truncated metadata")
    metadata = json.loads(blob[offset : offset + meta_len].decode("utf-8")) if meta_len else {}
    offset += meta_len

    dtype = _DTYPES[code]
    shape = tuple(a.n for a in axes)
    expected = int(np.prod(shape)) * dtype.itemsize
    if len(blob) - offset != expected:
        raise GridFormatError(
            f"{path}: payload holds {len(blob) - offset} bytes, header promises {expected}"
        )
    values = np.frombuffer(blob, dtype=dtype, offset=offset).reshape(shape).copy()
    return GridFile(values, axes, metadata)


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serialisable")
