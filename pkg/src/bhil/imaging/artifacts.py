"""
Ghost detection in backprojected images and the frequency-scaling study of
ghost strength.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import stats
from scipy.ndimage import maximum_filter

from ..core.geometry import AcquisitionGeometry, nyquist_check
from ..core.model import GridSpec, VelocityModel
from ..exceptions import ConfigError
from ..raytrace.traveltime import TableSet
from ..scatter.mutes import MuteSpec
from ..scatter.wavelet import Ricker
from .migration import ImageGrid, normal_psf

logger = logging.getLogger(__name__)

MAD_FACTOR = 6.0
RELATIVE_FLOOR = 0.0
MIRROR_TOL_CELLS = 2.0
DEFAULT_FREQUENCIES = (10.0, 15.0, 20.0, 30.0)


@dataclass(frozen=True)
class Peak:
    index: tuple[int, int, int]
    position: tuple[float, float, float]
    amplitude: float

    def to_dict(self) -> dict[str, Any]:
        return {"index": list(self.index), "position": list(self.position), "amplitude": self.amplitude}


@dataclass(frozen=True)
class GhostPair:
    true_index: int
    ghost: Peak
    amplitude_ratio: float
    mirror_residual: float
    paired_by: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "true_index": self.true_index,
            "ghost_position": list(self.ghost.position),
            "ghost_amplitude": self.ghost.amplitude,
            "amplitude_ratio": self.amplitude_ratio,
            "mirror_residual_cells": self.mirror_residual,
            "paired_by": self.paired_by,
        }


@dataclass
class ArtifactReport:
    """Peaks of an image and ghost/primary pairing; peaks are sorted by amplitude, descending."""

    true_peaks: list[Peak]
    detected_peaks: list[Peak]
    ghost_pairs: list[GhostPair]
    floor: float
    relative_floor: float
    frequency_slopes: list[dict[str, Any]] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def mirror_residual(self) -> list[float]:
        return [pair.mirror_residual for pair in self.ghost_pairs]

    @property
    def n_ghosts(self) -> int:
        return len(self.ghost_pairs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "floor": self.floor,
            "relative_floor": self.relative_floor,
            "true_peaks": [p.to_dict() for p in self.true_peaks],
            "detected_peaks": [p.to_dict() for p in self.detected_peaks],
            "ghost_pairs": [g.to_dict() for g in self.ghost_pairs],
            "mirror_residual": self.mirror_residual,
            "frequency_slopes": self.frequency_slopes,
            **self.metadata,
        }


def noise_floor(values: np.ndarray, relative_floor: float = RELATIVE_FLOOR) -> float:
    """median + 6 MAD of |values|, raised to relative_floor * max when that is positive."""
    mag = np.abs(values)
    median = float(np.median(mag))
    mad = float(np.median(np.abs(mag - median)))
    return max(median + MAD_FACTOR * mad, relative_floor * float(mag.max()))


def _cell_distance(spec: GridSpec, a: Sequence[float], b: Sequence[float]) -> float:
    return float(np.linalg.norm((np.asarray(a) - np.asarray(b)) / np.asarray(spec.spacing)))


def _mirror(position: Sequence[float]) -> np.ndarray:
    return np.array([position[0], -position[1], position[2]], dtype=float)


def local_maxima(image: ImageGrid, floor: float, min_separation: float) -> list[Peak]:
    """Local maxima of the signed image above floor, merged when closer than min_separation cells."""
    values = image.values
    size = 2 * max(int(np.ceil(min_separation)), 1) + 1
    is_max = (maximum_filter(values, size=size, mode="nearest") == values) & (values > floor)
    candidates = np.argwhere(is_max)
    order = np.argsort(-values[tuple(candidates.T)], kind="stable")
    kept: list[Peak] = []
    for idx in candidates[order]:
        index = tuple(int(i) for i in idx)
        position = tuple(float(v) for v in image.spec.position_of(index))
        if any(_cell_distance(image.spec, position, p.position) < min_separation for p in kept):
            continue
        kept.append(Peak(index, position, float(values[index])))  # type: ignore[arg-type]
    return kept


def detect_ghosts(
    image: ImageGrid,
    true_peaks: Sequence[Sequence[float]],
    relative_floor: float = RELATIVE_FLOOR,
    min_separation: float = 3.0,
    mirror_tol: float = MIRROR_TOL_CELLS,
) -> ArtifactReport:
    """
    Detect peaks and pair every peak that is not a true one with a true peak.

    A detected peak within min_separation cells of a true position is that
    true peak. Ghosts are paired with the true peak whose reflection
    (y1, -y2, y3) lies within mirror_tol cells, else with the nearest true peak.

    Args:
        image: Image to inspect
        true_peaks: Positions of the true scatterers
        relative_floor: Optional fraction of the image maximum below which peaks
            are ignored; 0 keeps the median + 6 MAD floor alone
        min_separation: Merge radius in cells
        mirror_tol: Reflection residual accepted for mirror pairing, in cells

    Returns:
        ArtifactReport; empty when nothing rises above the floor
    """
    spec = image.spec
    if not np.any(image.values):
        return ArtifactReport([], [], [], 0.0, relative_floor, metadata={"empty": True})
    floor = noise_floor(image.values, relative_floor)
    detected = local_maxima(image, floor, min_separation)

    truth: list[Peak] = []
    matched: set[int] = set()
    for position in true_peaks:
        near = [
            (i, p) for i, p in enumerate(detected)
            if i not in matched and _cell_distance(spec, position, p.position) < min_separation
        ]
        if near:
            i, peak = near[0]
            matched.add(i)
            truth.append(peak)
        else:
            index = spec.index_of(position)
            truth.append(Peak(index, tuple(float(v) for v in position), float(image.values[index])))  # type: ignore[arg-type]

    pairs: list[GhostPair] = []
    for i, ghost in enumerate(detected):
        if i in matched or not truth:
            continue
        residuals = [_cell_distance(spec, ghost.position, _mirror(t.position)) for t in truth]
        j = int(np.argmin(residuals))
        paired_by = "mirror"
        if residuals[j] > mirror_tol:
            j = int(np.argmin([_cell_distance(spec, ghost.position, t.position) for t in truth]))
            paired_by = "nearest"
        primary = abs(truth[j].amplitude)
        ratio = abs(ghost.amplitude) / primary if primary > 0 else float("inf")
        pairs.append(GhostPair(j, ghost, ratio, residuals[j], paired_by))

    logger.info(f"Detected {len(detected)} peaks above floor {floor:.4g}; {len(pairs)} ghost(s)")
    return ArtifactReport(truth, detected, pairs, floor, relative_floor)


def fit_slope(f_peaks: Sequence[float], ratios: Sequence[float]) -> dict[str, Any]:
    """Least-squares slope of log(ratio) against log(f) with a 95% Student-t interval."""
    x = np.log(np.asarray(f_peaks, dtype=float))
    y = np.log(np.asarray(ratios, dtype=float))
    n = x.size
    if np.ptp(y) == 0.0:
        slope, intercept, stderr = 0.0, float(y[0]), 0.0
    else:
        fit = stats.linregress(x, y)
        slope, intercept, stderr = float(fit.slope), float(fit.intercept), float(fit.stderr)
    half = float(stats.t.ppf(0.975, n - 2)) * stderr if n > 2 else float("inf")
    return {
        "slope": slope,
        "intercept": intercept,
        "stderr": stderr,
        "ci95": [slope - half, slope + half],
        "n": n,
    }


def frequency_scaling_study(
    model: VelocityModel,
    geometry: AcquisitionGeometry,
    scatterer: Sequence[float],
    spec: GridSpec,
    depth_floor: float,
    f_peaks: Sequence[float] = DEFAULT_FREQUENCIES,
    ramp_order: int = 2,
    mutes: list[MuteSpec] | None = None,
    tables: TableSet | None = None,
    track_tol: float = MIRROR_TOL_CELLS,
) -> ArtifactReport:
    """
    Rerun normal_psf per wavelet frequency and fit the ghost/primary ratio
    against f on log-log axes.

    Ghosts found at the lowest frequency are tracked across runs by position;
    a ghost that drops below the floor at some frequency gets no slope.

    Raises:
        ConfigError: fewer than 3 frequencies
        AssumptionViolation: a wavelet violates the Nyquist check
    """
    f_sorted = sorted(float(f) for f in f_peaks)
    if len(f_sorted) < 3:
        raise ConfigError(f"frequency study needs at least 3 frequencies, got {len(f_sorted)}")
    if f_sorted[-1] < 2.0 * f_sorted[0]:
        logger.warning(f"frequencies {f_sorted} span less than one octave")
    for f in f_sorted:
        nyquist_check(geometry.time_axis, Ricker(f).f_max)

    reports: list[ArtifactReport] = []
    for f in f_sorted:
        image = normal_psf(model, geometry, scatterer, Ricker(f), spec, depth_floor, ramp_order, mutes, tables)
        reports.append(detect_ghosts(image, [scatterer]))
        logger.info(f"f_peak={f}: {reports[-1].n_ghosts} ghost(s)")

    base = reports[0]
    slopes: list[dict[str, Any]] = []
    for pair in base.ghost_pairs:
        ratios = []
        for report in reports:
            hits = [
                g for g in report.ghost_pairs
                if _cell_distance(spec, g.ghost.position, pair.ghost.position) <= track_tol
            ]
            if not hits:
                break
            ratios.append(hits[0].amplitude_ratio)
        if len(ratios) != len(reports):
            logger.warning(f"ghost at {pair.ghost.position} is not present at every frequency; no slope fitted")
            continue
        slopes.append(
            {"ghost_position": list(pair.ghost.position), "ratios": ratios, **fit_slope(f_sorted, ratios)}
        )

    result = ArtifactReport(
        base.true_peaks,
        base.detected_peaks,
        base.ghost_pairs,
        base.floor,
        base.relative_floor,
        frequency_slopes=slopes,
        metadata={"f_peaks": f_sorted, "primary_only": not base.ghost_pairs},
    )
    return result
