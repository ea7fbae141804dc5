"""
Scenario configuration: one TOML file describes one experiment.

Sections: [model], [geometry], [reflectivity], [wavelet], [[mutes]], [grid],
[raytrace], [analysis], plus top-level name, output_dir and seed.
"""

import json
import logging
import pathlib
import tomllib
from collections.abc import Sequence
from typing import Annotated, Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .core.geometry import AcquisitionGeometry, Axis, build_geometry, isochron_window_check, nyquist_check
from .core.model import (
    ConstantModel,
    GridSpec,
    ReflectivityGrid,
    VelocityModel,
    build_model,
    domain_check,
    point_scatterers,
)
from .exceptions import AssumptionViolation, ConfigError
from .scatter.mutes import MuteSpec, build_mute
from .scatter.wavelet import Ricker

logger = logging.getLogger(__name__)

Vec3 = tuple[float, float, float]
STAGES = (
    "simulate",
    "migrate",
    "psf",
    "trace-rays",
    "classify-caustics",
    "analyze-canonical",
    "tic-check",
    "artifact-study",
)
_TAGS = {
    "constant", "gradient", "gaussian_lens", "dense", "crosswell", "walkaway",
    "directional_cone", "direct_arrival",
}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConstantSection(_Section):
    kind: Literal["constant"] = "constant"
    c: float = 1.0


class GradientSection(_Section):
    kind: Literal["gradient"]
    a: float = 1.0
    b: float = 0.5


class LensSection(_Section):
    kind: Literal["gaussian_lens"]
    c_bg: float = 1.0
    amplitude: float = 0.3
    center: Vec3 = (0.0, 0.0, 1.5)
    width: float = 0.45


class AxisSection(_Section):
    lo: float
    hi: float
    n: int

    def build(self) -> Axis:
        return Axis(self.lo, self.hi, self.n)


class _GeometryBase(_Section):
    receivers: AxisSection = AxisSection(lo=0.2, hi=2.0, n=32)
    time_axis: AxisSection = AxisSection(lo=0.05, hi=6.0, n=2048)
    epsilon: float | None = None


class DenseSection(_GeometryBase):
    kind: Literal["dense"]
    s1_range: tuple[float, float] = (-1.0, 1.0)
    s2_range: tuple[float, float] = (-1.0, 1.0)
    n_s1: int = 8
    n_s2: int = 8


class CrosswellSection(_GeometryBase):
    kind: Literal["crosswell"]
    s0: float = 1.0
    s_range: tuple[float, float] = (0.0, 2.0)
    n_s: int = 16


class WalkawaySection(_GeometryBase):
    kind: Literal["walkaway"]
    s_range: tuple[float, float] = (0.2, 2.0)
    n_s: int = 16


class ScattererSection(_Section):
    position: Vec3
    amplitude: float = 1.0


class ReflectivitySection(_Section):
    depth_floor: float = 0.3
    scatterers: list[ScattererSection] = [ScattererSection(position=(0.5, 0.3, 1.0))]

    @field_validator("depth_floor")
    @classmethod
    def _floor_positive(cls, v: float) -> float:
        if not v > 0:
            raise AssumptionViolation("Assumption 3.1", f"depth_floor must be > 0, got {v}")
        return v


class WaveletSection(_Section):
    kind: Literal["ricker"] = "ricker"
    f_peak: float = 20.0
    amplitude: float = 1.0
    support_halfwidth: float | None = None


class ConeSection(_Section):
    kind: Literal["directional_cone"]
    receiver_window_center: float
    window_halfwidth: float
    cone_axis: float
    cone_halfangle: float
    taper_fraction: float = 0.2
    window_taper: float = 0.25
    c_ref: float = 1.0


class DirectArrivalSection(_Section):
    kind: Literal["direct_arrival"]
    epsilon_time: float
    taper_time: float


class GridSection(_Section):
    origin: Vec3
    spacing: Vec3
    dims: tuple[int, int, int]

    def build(self) -> GridSpec:
        return GridSpec(self.origin, self.spacing, self.dims)


class ChartSection(_Section):
    """Lagrangian chart over (x1, x2, p3)."""

    lo: Vec3 = (-0.8, -0.8, 0.0)
    hi: Vec3 = (0.8, 0.8, 0.95)
    dims: tuple[int, int, int] = (17, 17, 20)

    def build(self) -> GridSpec:
        return GridSpec.from_bounds(self.lo, self.hi, self.dims)


class RaytraceSection(_Section):
    n_rays: int | None = None
    dp: float | None = None
    multipath_tol: float | None = None
    max_rays: int = 40000
    grazing_dirs: int = 64
    grazing_tol: float = 0.05
    reciprocity_pairs: int = 20
    r_values: list[float] = [0.6, 0.8, 1.0, 1.2, 1.4]
    chart: ChartSection = ChartSection()
    sheet_rays: int = 4000
    depth_max: float = 3.0


class AnalysisSection(_Section):
    trace_rays: bool = True
    caustic_classify: bool = False
    singularity_census: bool = True
    census_points: int = 200
    tic_check: bool = True
    tic_samples: int = 10000
    variable_diagnostics: bool = False
    artifact_study: bool = False
    frequencies: list[float] = [10.0, 15.0, 20.0, 30.0]
    ramp_order: Literal[0, 1, 2] = 2
    mute_angle: float = 0.1
    psf_scatterer: Vec3 | None = None
    relative_floor: float = Field(default=0.0, ge=0.0, lt=1.0)


ModelSection = Annotated[ConstantSection | GradientSection | LensSection, Field(discriminator="kind")]
GeometrySection = Annotated[DenseSection | CrosswellSection | WalkawaySection, Field(discriminator="kind")]
MuteSection = Annotated[ConeSection | DirectArrivalSection, Field(discriminator="kind")]


class Scenario(_Section):
    """A validated experiment description."""

    name: str = "scenario"
    output_dir: str = "out"
    seed: int = Field(default=0, ge=0, lt=2**64)
    model: ModelSection = ConstantSection()
    geometry: GeometrySection
    reflectivity: ReflectivitySection = ReflectivitySection()
    wavelet: WaveletSection = WaveletSection()
    mutes: list[MuteSection] = []
    grid: GridSection
    raytrace: RaytraceSection = RaytraceSection()
    analysis: AnalysisSection = AnalysisSection()

    @model_validator(mode="after")
    def _cross_validate(self) -> "Scenario":
        model = self.build_model()
        geometry = self.build_geometry()
        spec = self.grid_spec()
        if not isinstance(model, ConstantModel):
            stations = np.vstack([geometry.source_positions(), geometry.receiver_positions()])
            lo = np.minimum(np.asarray(spec.origin), stations.min(axis=0))
            hi = np.maximum(np.asarray(spec.upper), stations.max(axis=0))
            domain_check(model, lo, hi)
        reflectivity = self.build_reflectivity()
        wavelet = self.build_wavelet()
        nyquist_check(geometry.time_axis, wavelet.f_max)
        if self.analysis.artifact_study:
            nyquist_check(geometry.time_axis, Ricker(max(self.analysis.frequencies)).f_max)
        self.build_mutes()
        if isinstance(model, ConstantModel):
            isochron_window_check(geometry, reflectivity.support_points(), model.c, wavelet.halfwidth)
        return self

    def build_model(self) -> VelocityModel:
        return build_model(self.model.model_dump())

    def build_geometry(self) -> AcquisitionGeometry:
        return build_geometry(self.geometry.model_dump())

    def grid_spec(self) -> GridSpec:
        return self.grid.build()

    def build_reflectivity(self) -> ReflectivityGrid:
        geometry = self.build_geometry()
        return point_scatterers(
            self.grid_spec(),
            [(s.position, s.amplitude) for s in self.reflectivity.scatterers],
            self.reflectivity.depth_floor,
            sources=geometry.source_positions(),
            epsilon=geometry.epsilon,
        )

    def build_wavelet(self, f_peak: float | None = None) -> Ricker:
        w = self.wavelet
        if f_peak is not None:
            return Ricker(f_peak, w.amplitude)
        return Ricker(w.f_peak, w.amplitude, w.support_halfwidth)

    def build_mutes(self) -> list[MuteSpec]:
        return [build_mute(m.model_dump()) for m in self.mutes]

    def psf_scatterer(self) -> Vec3:
        if self.analysis.psf_scatterer is not None:
            return self.analysis.psf_scatterer
        if not self.reflectivity.scatterers:
            raise ConfigError("analysis.psf_scatterer is required when the reflectivity has no scatterers")
        return self.reflectivity.scatterers[0].position

    def resolved(self) -> "Scenario":
        """Copy with every derived default written out."""
        geometry = self.build_geometry()
        wavelet = self.build_wavelet()
        return self.model_copy(
            update={
                "geometry": self.geometry.model_copy(update={"epsilon": geometry.epsilon}),
                "wavelet": self.wavelet.model_copy(update={"support_halfwidth": wavelet.halfwidth}),
            }
        )


def _dotted(loc: Sequence[Any]) -> str:
    return ".".join(str(part) for part in loc if part not in _TAGS)


def validate_scenario(data: dict[str, Any]) -> Scenario:
    """
    Validate a raw mapping.

    Raises:
        ConfigError: unknown keys or ill-typed values (naming the dotted key)
        AssumptionViolation: cross-field invariants
    """
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        errors = e.errors()
        first = errors[0]
        key = _dotted(first["loc"])
        if first["type"] == "extra_forbidden":
            raise ConfigError(f"unknown key '{key}'")
        if first["type"] == "missing":
            raise ConfigError(f"missing key '{key}'")
        raise ConfigError(f"invalid value for '{key}': {first['msg']}")


def _parse_literal(value: str) -> Any:
    try:
        return tomllib.loads(f"v = {value}")["v"]
    except tomllib.TOMLDecodeError:
        return value


def apply_overrides(data: dict[str, Any], overrides: Sequence[str]) -> dict[str, Any]:
    """Apply key=value overrides with dotted keys; values are read as TOML literals."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node: Any = data
        for part in parts[:-1]:
            if isinstance(node, list):
                node = node[int(part)]
            else:
                node = node.setdefault(part, {})
        last = parts[-1]
        if isinstance(node, list):
            node[int(last)] = _parse_literal(value.strip())
        else:
            node[last] = _parse_literal(value.strip())
        logger.debug(f"Override {key} = {value}")
    return data


def load_raw(path: str | pathlib.Path) -> dict[str, Any]:
    path = pathlib.Path(path)
    text = path.read_bytes()
    if path.suffix == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: malformed JSON: {e}")
    try:
        return tomllib.loads(text.decode("utf-8"))
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: malformed TOML: {e}")


def parse_scenario(path: str | pathlib.Path, overrides: Sequence[str] = ()) -> Scenario:
    """
    Read a .toml or .json scenario file, apply overrides and validate.

    Returns:
        The scenario with every derived default resolved
    """
    data = apply_overrides(load_raw(path), overrides)
    scenario = validate_scenario(data).resolved()
    logger.info(f"Loaded scenario '{scenario.name}' from {path}")
    return scenario


def dump_scenario(scenario: Scenario, path: str | pathlib.Path | None = None) -> str:
    """Resolved config as sorted JSON; written to path when given."""
    text = json.dumps(scenario.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
    if path is not None:
        pathlib.Path(path).write_text(text, encoding="utf-8")
    return text
