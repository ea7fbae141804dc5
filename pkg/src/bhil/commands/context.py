"""
Shared state of one pipeline run
"""

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..canonical.relations import SampleSpec
from ..config import STAGES, Scenario
from ..core.geometry import AcquisitionGeometry, DataVolume
from ..core.model import ConstantModel, GridSpec, ReflectivityGrid, VelocityModel
from ..raytrace.lagrangian import LagrangianFamily, sample_lagrangian_family
from ..raytrace.traveltime import TableSet, build_table_set
from ..reports import ReportWriter

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    """Scenario, writer and lazily built intermediates shared by the stages."""

    scenario: Scenario
    writer: ReportWriter
    threads: int = 1
    cache: dict[str, Any] = field(default_factory=dict)

    def rng(self, stage: str) -> np.random.Generator:
        """Per-stage stream, independent of which other stages ran."""
        return np.random.default_rng([self.scenario.seed, STAGES.index(stage)])

    def _cached(self, key: str, build: Any) -> Any:
        if key not in self.cache:
            self.cache[key] = build()
        return self.cache[key]

    @property
    def model(self) -> VelocityModel:
        return self._cached("model", self.scenario.build_model)

    @property
    def geometry(self) -> AcquisitionGeometry:
        return self._cached("geometry", self.scenario.build_geometry)

    @property
    def grid(self) -> GridSpec:
        return self._cached("grid", self.scenario.grid_spec)

    @property
    def reflectivity(self) -> ReflectivityGrid:
        return self._cached("reflectivity", self.scenario.build_reflectivity)

    @property
    def is_constant(self) -> bool:
        return isinstance(self.model, ConstantModel)

    def tables(self) -> TableSet | None:
        """Traveltime tables for every station; None for a constant background."""
        if self.is_constant:
            return None

        def build() -> TableSet:
            rt = self.scenario.raytrace
            logger.info(f"Building traveltime tables for {self.geometry.n_sources + self.geometry.receivers.n} stations")
            return build_table_set(
                self.model,
                self.geometry.source_positions(),
                self.geometry.receiver_positions(),
                self.grid,
                workers=self.threads,
                n_rays=rt.n_rays,
                dp=rt.dp,
                multipath_tol=rt.multipath_tol,
                max_rays=rt.max_rays,
            )

        return self._cached("tables", build)

    def family(self) -> LagrangianFamily:
        rt = self.scenario.raytrace

        def build() -> LagrangianFamily:
            return sample_lagrangian_family(
                self.model, rt.r_values, rt.chart.build(), n_rays=rt.sheet_rays, depth_max=rt.depth_max
            )

        return self._cached("family", build)

    def sample_spec(self) -> SampleSpec:
        """Sampling ranges of the canonical relation matching the scenario."""
        g = self.scenario.geometry
        grid = self.grid
        c = self.model.c if isinstance(self.model, ConstantModel) else 1.0
        common: dict[str, Any] = {
            "kind": g.kind,
            "r_range": (g.receivers.lo, g.receivers.hi),
            "y_lo": grid.origin,
            "y_hi": grid.upper,
            "c": c,
            "mute_angle": self.scenario.analysis.mute_angle,
            "epsilon": float(self.geometry.epsilon),  # type: ignore[arg-type]
        }
        if g.kind == "dense":
            return SampleSpec(s_range=g.s1_range, s2_range=g.s2_range, **common)
        if g.kind == "crosswell":
            return SampleSpec(s_range=g.s_range, s0=g.s0, **common)
        return SampleSpec(s_range=g.s_range, **common)

    def data(self) -> DataVolume:
        if "data" not in self.cache:
            from .pipeline import simulate

            simulate(self)
        return self.cache["data"]
