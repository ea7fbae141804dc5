"""
Acquisition geometries for borehole seismics and the sampled data volume.

Receivers always sit in the vertical borehole {(0, 0, r)}; the source set
depends on the geometry kind. Open intervals are sampled cell-centered.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..exceptions import AssumptionViolation, ConfigError, ShapeMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Axis:
    """Cell-centered sampling of the open interval (lo, hi) with n samples."""

    lo: float
    hi: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError(f"axis count must be >= 1, got {self.n}")
        if not self.hi > self.lo:
            raise ConfigError(f"axis range ({self.lo}, {self.hi}) is empty")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / self.n

    @property
    def first(self) -> float:
        return self.lo + 0.5 * self.step

    def samples(self) -> np.ndarray:
        return self.first + self.step * np.arange(self.n)

    def to_dict(self) -> dict[str, Any]:
        return {"lo": self.lo, "hi": self.hi, "n": self.n}


@dataclass(frozen=True)
class AcquisitionGeometry:
    receivers: Axis
    time_axis: Axis
    epsilon: float | None = None

    kind = "abstract"

    def __post_init__(self) -> None:
        if self.time_axis.lo <= 0:
            raise ConfigError(f"time axis must start after 0, got t_min={self.time_axis.lo}")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", 0.05 * max(self.receivers.hi, self._source_extent()))
        if not self.epsilon > 0:
            raise AssumptionViolation("Source exclusion", f"epsilon must be > 0, got {self.epsilon}")
        offsets = np.linalg.norm(self.source_positions()[:, :2], axis=-1)
        bad = np.nonzero(offsets <= self.epsilon)[0]
        if bad.size:
            S = self.source_positions()[bad[0]]
            raise AssumptionViolation(
                "Source exclusion",
                f"source inside exclusion radius: {tuple(float(v) for v in S)} has |(s1,s2)| <= {self.epsilon:.4g}",
            )

    def _source_extent(self) -> float:
        raise NotImplementedError

    @property
    def data_dim(self) -> int:
        return 3

    @property
    def source_shape(self) -> tuple[int, ...]:
        raise NotImplementedError

    @property
    def n_sources(self) -> int:
        return int(np.prod(self.source_shape))

    @property
    def data_shape(self) -> tuple[int, ...]:
        return self.source_shape + (self.receivers.n, self.time_axis.n)

    def source_positions(self) -> np.ndarray:
        """Sources (n_sources, 3) in data-layout order."""
        raise NotImplementedError

    def receiver_positions(self) -> np.ndarray:
        r = self.receivers.samples()
        return np.column_stack([np.zeros_like(r), np.zeros_like(r), r])

    def flat_source_index(self, source_index: int | Sequence[int]) -> int:
        index = int(np.asarray(source_index).reshape(-1)[0])
        if not 0 <= index < self.n_sources:
            raise IndexError(f"source index {source_index} out of range")
        return index

    def positions(
        self, source_index: int | Sequence[int], receiver_index: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """Source and receiver coordinates for the indexed trace."""
        if not 0 <= receiver_index < self.receivers.n:
            raise IndexError(f"receiver index {receiver_index} out of range")
        S = self.source_positions()[self.flat_source_index(source_index)]
        R = self.receiver_positions()[receiver_index]
        return S, R

    def trace_pairs(self) -> np.ndarray:
        """(n_traces, 2) flat (source, receiver) index pairs in data order."""
        isrc, irec = np.meshgrid(np.arange(self.n_sources), np.arange(self.receivers.n), indexing="ij")
        return np.column_stack([isrc.ravel(), irec.ravel()])

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "receivers": self.receivers.to_dict(),
            "time_axis": self.time_axis.to_dict(),
            "epsilon": self.epsilon,
        }


@dataclass(frozen=True)
class DenseArray(AcquisitionGeometry):
    s1_range: tuple[float, float] = (-1.0, 1.0)
    s2_range: tuple[float, float] = (-1.0, 1.0)
    n_s1: int = 8
    n_s2: int = 8

    kind = "dense"

    def _source_extent(self) -> float:
        return max(abs(v) for v in (*self.s1_range, *self.s2_range))

    @property
    def data_dim(self) -> int:
        return 4

    @property
    def source_shape(self) -> tuple[int, ...]:
        return (self.n_s2, self.n_s1)

    def source_positions(self) -> np.ndarray:
        s1 = Axis(*self.s1_range, self.n_s1).samples()
        s2 = Axis(*self.s2_range, self.n_s2).samples()
        S2, S1 = np.meshgrid(s2, s1, indexing="ij")
        return np.column_stack([S1.ravel(), S2.ravel(), np.zeros(S1.size)])

    def flat_source_index(self, source_index: int | Sequence[int]) -> int:
        if isinstance(source_index, (int, np.integer)):
            return super().flat_source_index(source_index)
        i, j = (int(v) for v in source_index)
        if not (0 <= i < self.n_s1 and 0 <= j < self.n_s2):
            raise IndexError(f"source index {(i, j)} out of range")
        return j * self.n_s1 + i

    def to_dict(self) -> dict[str, Any]:
        data = super().to_dict()
        data.update(s1_range=list(self.s1_range), s2_range=list(self.s2_range), n_s1=self.n_s1, n_s2=self.n_s2)
        return data


@dataclass(frozen=True)
class Crosswell(AcquisitionGeometry):
    """Sources on the vertical line (s0, 0, s)."""

    s0: float = 1.0
    s_range: tuple[float, float] = (0.0, 2.0)
    n_s: int = 16

    kind = "crosswell"

    def __post_init__(self) -> None:
        if not self.s0 > 0:
            raise ConfigError(f"crosswell offset s0 must be > 0, got {self.s0}")
        super().__post_init__()

    def _source_extent(self) -> float:
        return max(abs(self.s_range[1]), abs(self.s_range[0]))

    @property
    def source_shape(self) -> tuple[int, ...]:
        return (self.n_s,)

    def source_positions(self) -> np.ndarray:
        s = Axis(*self.s_range, self.n_s).samples()
        return np.column_stack([np.full_like(s, self.s0), np.zeros_like(s), s])

    def to_dict(self) -> dict[str, Any]:
        data = super().to_dict()
        data.update(s0=self.s0, s_range=list(self.s_range), n_s=self.n_s)
        return data


@dataclass(frozen=True)
class Walkaway(AcquisitionGeometry):
    """Surface sources (s, 0, 0) with 0 < s_min < s < s_max."""

    s_range: tuple[float, float] = (0.2, 2.0)
    n_s: int = 16

    kind = "walkaway"

    def __post_init__(self) -> None:
        if not self.s_range[0] > 0:
            raise AssumptionViolation(
                "Walkaway offsets", f"s_min must be > 0, got {self.s_range[0]}"
            )
        super().__post_init__()

    def _source_extent(self) -> float:
        return abs(self.s_range[1])

    @property
    def source_shape(self) -> tuple[int, ...]:
        return (self.n_s,)

    def source_positions(self) -> np.ndarray:
        s = Axis(*self.s_range, self.n_s).samples()
        return np.column_stack([s, np.zeros_like(s), np.zeros_like(s)])

    def to_dict(self) -> dict[str, Any]:
        data = super().to_dict()
        data.update(s_range=list(self.s_range), n_s=self.n_s)
        return data


GEOMETRY_KINDS: dict[str, type[AcquisitionGeometry]] = {
    "dense": DenseArray,
    "crosswell": Crosswell,
    "walkaway": Walkaway,
}


def build_geometry(config: dict[str, Any]) -> AcquisitionGeometry:
    """
    Build an acquisition geometry from a config mapping.

    Args:
        config: {'kind': 'dense'|'crosswell'|'walkaway', 'receivers': {lo, hi, n},
            'time_axis': {lo, hi, n}, 'epsilon': optional, plus the kind's source fields}

    Returns:
        The validated geometry
    """
    params = dict(config)
    kind = params.pop("kind", None)
    if kind not in GEOMETRY_KINDS:
        raise ConfigError(f"unknown geometry kind {kind!r}; expected one of {sorted(GEOMETRY_KINDS)}")
    receivers = params.pop("receivers")
    time_axis = params.pop("time_axis")
    for key in ("s1_range", "s2_range", "s_range"):
        if key in params:
            params[key] = tuple(params[key])
    geometry = GEOMETRY_KINDS[kind](
        receivers=receivers if isinstance(receivers, Axis) else Axis(**receivers),
        time_axis=time_axis if isinstance(time_axis, Axis) else Axis(**time_axis),
        **params,
    )
    logger.debug(f"Built {kind} geometry with {geometry.n_sources} sources, {geometry.receivers.n} receivers")
    return geometry


def isochron_window_check(
    geometry: AcquisitionGeometry, support_points: np.ndarray, c0: float, halfwidth: float = 0.0
) -> tuple[float, float]:
    """
    Range of isochron times A + B over the support; warns when it leaves the time axis.

    Returns:
        (earliest, latest) arrival time including the wavelet halfwidth
    """
    if len(support_points) == 0:
        return (0.0, 0.0)
    S = geometry.source_positions()
    R = geometry.receiver_positions()
    A = np.linalg.norm(support_points[None, :, :] - S[:, None, :], axis=-1)
    B = np.linalg.norm(support_points[None, :, :] - R[:, None, :], axis=-1)
    # A + B per (source, receiver, point), one source at a time
    sums = [a[None, :] + B for a in A]
    t_lo = min(float(s.min()) for s in sums) / c0 - halfwidth
    t_hi = max(float(s.max()) for s in sums) / c0 + halfwidth
    axis = geometry.time_axis
    if t_lo < axis.lo or t_hi > axis.hi:
        logger.warning(
            f"Time axis ({axis.lo}, {axis.hi}) does not cover isochron times ({t_lo:.4g}, {t_hi:.4g})"
        )
    return t_lo, t_hi


def nyquist_check(time_axis: Axis, f_max: float) -> None:
    if time_axis.step > 1.0 / (4.0 * f_max):
        raise AssumptionViolation(
            "Nyquist",
            f"dt={time_axis.step:.4g} exceeds 1/(4 f_max)={1.0 / (4.0 * f_max):.4g}",
        )


@dataclass
class DataVolume:
    """Sampled d(s, r, t); 4-D for the dense array, 3-D otherwise."""

    geometry: AcquisitionGeometry
    samples: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples)
        if self.samples.shape != self.geometry.data_shape:
            raise ShapeMismatchError(
                f"data shape {self.samples.shape} does not match geometry {self.geometry.data_shape}"
            )

    @property
    def dt(self) -> float:
        return self.geometry.time_axis.step

    def t_axis(self) -> np.ndarray:
        return self.geometry.time_axis.samples()

    def as_traces(self) -> np.ndarray:
        """(n_sources, n_receivers, n_t) view in data order."""
        g = self.geometry
        return self.samples.reshape(g.n_sources, g.receivers.n, g.time_axis.n)

    def with_samples(self, samples: np.ndarray, **metadata: Any) -> "DataVolume":
        meta = {k: (list(v) if isinstance(v, list) else v) for k, v in self.metadata.items()}
        meta.update(metadata)
        return DataVolume(self.geometry, samples, meta)

    def inner(self, other: "DataVolume") -> float:
        """dt-weighted Euclidean inner product."""
        return float(np.dot(self.samples.ravel(), other.samples.ravel()) * self.dt)
