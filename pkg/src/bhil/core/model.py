"""
Background sound-speed models and gridded reflectivity perturbations.

Positions are arrays whose last axis has length 3, (x1, x2, x3) with x3 the
depth below the surface. Every evaluation is vectorised over leading axes.
"""

import logging
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..exceptions import AssumptionViolation, ConfigError

logger = logging.getLogger(__name__)

CENTER_TOL = 1e-9


class VelocityModel(ABC):
    """Smooth background speed c0(x) with an analytic gradient"""

    kind: str = "abstract"

    @abstractmethod
    def speed(self, x: np.ndarray) -> np.ndarray:
        """c0 at positions x (..., 3)"""

    @abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray:
        """grad c0 at positions x (..., 3)"""

    def speed_bounds(self) -> tuple[float, float]:
        """Global lower and upper bound of c0 where known analytically"""
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"kind": self.kind}
        data.update(
            {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(self).items()}
        )
        return data


@dataclass(frozen=True)
class ConstantModel(VelocityModel):
    c: float = 1.0
    kind = "constant"

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise AssumptionViolation("Positive speed", f"constant speed must be > 0, got {self.c}")

    def speed(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.c)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=float))

    def speed_bounds(self) -> tuple[float, float]:
        return self.c, self.c


@dataclass(frozen=True)
class GradientModel(VelocityModel):
    """c(x) = a + b*x3"""

    a: float = 1.0
    b: float = 0.5
    kind = "gradient"

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise AssumptionViolation("Positive speed", f"surface speed a must be > 0, got {self.a}")

    def speed(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.a + self.b * x[..., 2]

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = np.zeros_like(x)
        g[..., 2] = self.b
        return g


@dataclass(frozen=True)
class GaussianLensModel(VelocityModel):
    """c(x) = c_bg * (1 - amplitude * exp(-|x - center|^2 / (2 width^2)))"""

    c_bg: float = 1.0
    amplitude: float = 0.3
    center: tuple[float, float, float] = (0.0, 0.0, 1.5)
    width: float = 0.45
    kind = "gaussian_lens"

    def __post_init__(self) -> None:
        if not self.c_bg > 0:
            raise AssumptionViolation("Positive speed", f"c_bg must be > 0, got {self.c_bg}")
        if not 0 < self.amplitude < 1:
            raise AssumptionViolation(
                "Positive speed",
                f"lens amplitude must lie in (0, 1), got {self.amplitude}",
            )
        if not self.width > 0:
            raise ConfigError(f"lens width must be > 0, got {self.width}")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))

    def _bump(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = np.asarray(x, dtype=float) - np.asarray(self.center)
        return d, np.exp(-np.sum(d * d, axis=-1) / (2.0 * self.width**2))

    def speed(self, x: np.ndarray) -> np.ndarray:
        _, bump = self._bump(x)
        return self.c_bg * (1.0 - self.amplitude * bump)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        d, bump = self._bump(x)
        scale = self.c_bg * self.amplitude * bump / self.width**2
        return scale[..., None] * d

    def speed_bounds(self) -> tuple[float, float]:
        return self.c_bg * (1.0 - self.amplitude), self.c_bg


def eval_speed(model: VelocityModel, x: np.ndarray) -> np.ndarray:
    return model.speed(x)


def eval_gradient(model: VelocityModel, x: np.ndarray) -> np.ndarray:
    return model.gradient(x)


def build_model(spec: dict[str, Any]) -> VelocityModel:
    """Construct a model from a {'kind': ..., **params} mapping."""
    params = dict(spec)
    kind = params.pop("kind", None)
    classes: dict[str, type[VelocityModel]] = {
        "constant": ConstantModel,
        "gradient": GradientModel,
        "gaussian_lens": GaussianLensModel,
    }
    if kind not in classes:
        raise ConfigError(f"unknown model kind {kind!r}; expected one of {sorted(classes)}")
    if "center" in params:
        params["center"] = tuple(params["center"])
    return classes[kind](**params)


def domain_check(model: VelocityModel, lo: Sequence[float], hi: Sequence[float], n: int = 9) -> None:
    """Reject models whose speed is not positive on the box [lo, hi]."""
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi, strict=True)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    c = model.speed(pts)
    if not np.all(np.isfinite(c)) or np.min(c) <= 0:
        raise AssumptionViolation(
            "Positive speed", f"c0 reaches {np.min(c):.4g} inside the computational domain"
        )


@dataclass(frozen=True)
class GridSpec:
    """Cell-centered regular grid; origin is the center of cell (0, 0, 0)."""

    origin: tuple[float, float, float]
    spacing: tuple[float, float, float]
    dims: tuple[int, int, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "spacing", tuple(float(v) for v in self.spacing))
        object.__setattr__(self, "dims", tuple(int(v) for v in self.dims))
        if len(self.origin) != 3 or len(self.spacing) != 3 or len(self.dims) != 3:
            raise ConfigError("grid origin, spacing and dims need three entries")
        if min(self.spacing) <= 0:
            raise ConfigError(f"grid spacing must be positive, got {self.spacing}")
        if min(self.dims) < 1:
            raise ConfigError(f"grid dims must be >= 1, got {self.dims}")

    @classmethod
    def from_bounds(
        cls, lo: Sequence[float], hi: Sequence[float], dims: Sequence[int]
    ) -> "GridSpec":
        """Grid whose first and last cell centers sit on lo and hi."""
        spacing = tuple(
            (b - a) / (n - 1) if n > 1 else 1.0 for a, b, n in zip(lo, hi, dims, strict=True)
        )
        return cls(tuple(lo), spacing, tuple(dims))  # type: ignore[arg-type]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.dims

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def upper(self) -> tuple[float, float, float]:
        return tuple(o + (n - 1) * d for o, d, n in zip(self.origin, self.spacing, self.dims))  # type: ignore[return-value]

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.asarray(self.upper) - np.asarray(self.origin)))

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + self.spacing[i] * np.arange(self.dims[i])

    def centers(self) -> np.ndarray:
        """Cell centers, shape dims + (3,)"""
        return np.stack(np.meshgrid(*(self.axis(i) for i in range(3)), indexing="ij"), axis=-1)

    def flat_centers(self) -> np.ndarray:
        return np.ascontiguousarray(self.centers().reshape(-1, 3))

    def fractional_index(self, position: Sequence[float]) -> np.ndarray:
        return (np.asarray(position, dtype=float) - np.asarray(self.origin)) / np.asarray(
            self.spacing
        )

    def index_of(self, position: Sequence[float]) -> tuple[int, int, int]:
        """Nearest cell index; raises IndexError outside the grid."""
        idx = np.rint(self.fractional_index(position)).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.dims)):
            raise IndexError(f"position {tuple(position)} lies outside the grid")
        return tuple(int(i) for i in idx)  # type: ignore[return-value]

    def position_of(self, index: Sequence[float]) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(index, dtype=float) * np.asarray(self.spacing)

    def refine(self, factor: int = 2) -> "GridSpec":
        """Same extent, spacing divided by factor."""
        dims = tuple((n - 1) * factor + 1 if n > 1 else 1 for n in self.dims)
        spacing = tuple(d / factor for d in self.spacing)
        return GridSpec(self.origin, spacing, dims)  # type: ignore[arg-type]

    @property
    def symmetric_in_y2(self) -> bool:
        """True when the cell centers are mirror images under y2 -> -y2."""
        lo, hi = self.origin[1], self.upper[1]
        return abs(lo + hi) <= CENTER_TOL * max(1.0, abs(hi))

    def to_dict(self) -> dict[str, Any]:
        return {"origin": list(self.origin), "spacing": list(self.spacing), "dims": list(self.dims)}


@dataclass
class ReflectivityGrid:
    """Speed perturbation density dc per cell, supported below depth_floor."""

    spec: GridSpec
    values: np.ndarray
    depth_floor: float
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.spec.dims:
            raise ConfigError(f"values shape {self.values.shape} does not match dims {self.spec.dims}")
        if not self.depth_floor > 0:
            raise AssumptionViolation(
                "Assumption 3.1", f"depth_floor must be > 0, got {self.depth_floor}"
            )
        mask = self.support_mask()
        if np.any(mask):
            shallowest = float(np.min(self.spec.centers()[..., 2][mask]))
            if shallowest < self.depth_floor - CENTER_TOL:
                raise AssumptionViolation(
                    "Assumption 3.1",
                    f"reflectivity support reaches depth {shallowest:.4g} above depth_floor {self.depth_floor}",
                )

    def support_mask(self) -> np.ndarray:
        return self.values != 0

    def support_points(self) -> np.ndarray:
        return self.spec.centers()[self.support_mask()]

    def integral(self) -> float:
        return float(np.sum(self.values) * self.spec.cell_volume)

    def scaled(self, a: float) -> "ReflectivityGrid":
        return ReflectivityGrid(self.spec, a * self.values, self.depth_floor, dict(self.metadata))

    def mirrored(self) -> "ReflectivityGrid":
        """Reflection y2 -> -y2 (requires a y2-symmetric grid)."""
        if not self.spec.symmetric_in_y2:
            raise ConfigError("mirroring needs a grid whose y2 axis is symmetric about 0")
        return ReflectivityGrid(
            self.spec, self.values[:, ::-1, :].copy(), self.depth_floor, dict(self.metadata)
        )


def zero_reflectivity(spec: GridSpec, depth_floor: float) -> ReflectivityGrid:
    return ReflectivityGrid(spec, np.zeros(spec.dims), depth_floor)


def _hat_weights(spec: GridSpec, position: Sequence[float]) -> list[tuple[tuple[int, int, int], float]]:
    frac = spec.fractional_index(position)
    nearest = np.rint(frac)
    if np.all(np.abs(frac - nearest) <= CENTER_TOL):
        return [(tuple(int(v) for v in nearest), 1.0)]  # type: ignore[list-item]
    base = np.floor(frac).astype(int)
    t = frac - base
    weights = []
    for corner in np.ndindex(2, 2, 2):
        w = float(np.prod([t[k] if corner[k] else 1.0 - t[k] for k in range(3)]))
        if w > 0:
            weights.append((tuple(int(base[k] + corner[k]) for k in range(3)), w))
    return weights  # type: ignore[return-value]


def point_scatterers(
    spec: GridSpec,
    points: Sequence[tuple[Sequence[float], float]],
    depth_floor: float,
    sources: np.ndarray | None = None,
    epsilon: float | None = None,
) -> ReflectivityGrid:
    """
    Realise point scatterers on the grid.

    A point on a cell center occupies that single cell; other points are spread
    with the separable trilinear hat. Values are densities, so the grid integral
    of each point equals its amplitude.

    Args:
        spec: Target grid
        points: (position, amplitude) pairs
        depth_floor: Minimum depth of the reflectivity support
        sources: Optional (n, 3) source positions for the exclusion-ball check
        epsilon: Exclusion radius around every source

    Returns:
        ReflectivityGrid holding the scatterers
    """
    if not depth_floor > 0:
        raise AssumptionViolation("Assumption 3.1", f"depth_floor must be > 0, got {depth_floor}")
    values = np.zeros(spec.dims)
    for position, amplitude in points:
        position = tuple(float(v) for v in position)
        if position[2] < depth_floor:
            raise AssumptionViolation(
                "Assumption 3.1",
                f"scatterer at depth {position[2]:.4g} violates Assumption 3.1 (depth_floor {depth_floor})",
            )
        if sources is not None and epsilon is not None and len(sources):
            dist = np.linalg.norm(np.asarray(sources) - np.asarray(position), axis=-1)
            if np.min(dist) <= epsilon:
                raise AssumptionViolation(
                    "Source exclusion",
                    f"scatterer {position} lies within {epsilon:.4g} of a source",
                )
        for index, weight in _hat_weights(spec, position):
            if any(i < 0 or i >= n for i, n in zip(index, spec.dims)):
                raise ConfigError(f"scatterer {position} is not inside the reflectivity grid")
            values[index] += amplitude * weight / spec.cell_volume
    logger.debug(f"Placed {len(points)} point scatterers on a {spec.dims} grid")
    return ReflectivityGrid(spec, values, depth_floor, {"points": [list(p) + [a] for p, a in points]})
