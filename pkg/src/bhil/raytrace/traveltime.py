"""
Two-point traveltimes by shooting and traveltime tables from dense ray fans.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.ndimage import minimum_filter
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from ..core.model import GridSpec, VelocityModel
from ..utils.parallel import ordered_map
from .tracer import (
    EXITED_SURFACE,
    Fan,
    TakeoffDirection,
    default_step,
    fibonacci_directions,
    hermite,
    trace_fan,
)

logger = logging.getLogger(__name__)

UNIQUE = "unique"
MULTIPATH = "multipath_detected"
FAILED = "failed"


@dataclass
class TwoPointResult:
    time: float
    takeoff: TakeoffDirection | None
    status: str
    residual: float
    arrivals: list[tuple[float, TakeoffDirection]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "time": self.time,
            "status": self.status,
            "residual": self.residual,
            "takeoff": None if self.takeoff is None else [self.takeoff.theta, self.takeoff.phi],
            "arrivals": [[t, d.theta, d.phi] for t, d in self.arrivals],
        }


def _segment_speeds(model: VelocityModel, z: np.ndarray, y: np.ndarray, n: int = 33) -> np.ndarray:
    s = np.linspace(0.0, 1.0, n)[:, None]
    return model.speed(z + s * (y - z))


def straight_line_time(model: VelocityModel, z: np.ndarray, y: np.ndarray, n: int = 33) -> float:
    """Integral of 1/c along the segment z -> y (Simpson)."""
    from scipy.integrate import simpson

    s = np.linspace(0.0, 1.0, n)
    slowness = 1.0 / _segment_speeds(model, z, y, n)
    return float(simpson(slowness, x=s) * np.linalg.norm(y - z))


class _Shooter:
    """Closest approach of rays from z to a target y, in a frame around the segment."""

    def __init__(self, model: VelocityModel, z: np.ndarray, y: np.ndarray, dp: float | None) -> None:
        self.model = model
        self.z = z
        self.y = y
        self.d = float(np.linalg.norm(y - z))
        nu0 = (y - z) / self.d
        axis = np.eye(3)[int(np.argmin(np.abs(nu0)))]
        pole = axis - np.dot(axis, nu0) * nu0
        pole /= np.linalg.norm(pole)
        self.frame = np.column_stack([nu0, np.cross(pole, nu0), pole])
        c_min = float(np.min(_segment_speeds(model, z, y)))
        c_max = float(np.max(_segment_speeds(model, z, y)))
        self.p_max = 2.0 * self.d / c_min
        self.dp = dp or min(0.01 * self.d / c_max, 0.02 / c_max)

    def directions(self, q: np.ndarray) -> np.ndarray:
        theta, phi = q[..., 0], q[..., 1]
        local = np.stack(
            [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)], axis=-1
        )
        return local @ self.frame.T

    def approach(self, q: np.ndarray, refine: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Miss vectors, traveltimes and covectors at closest approach for angles q (m, 2)."""
        fan = trace_fan(self.model, self.z, self.directions(q), self.p_max, self.dp, stop_at_surface=False)
        return closest_approach(self.model, fan, self.y, refine)


def closest_approach(
    model: VelocityModel, fan: Fan, y: np.ndarray, refine: bool = True
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = fan.n_rays
    valid = fan.valid_mask()
    dist = np.linalg.norm(fan.x - y, axis=-1)
    dist = np.where(valid, dist, np.inf)
    k = np.argmin(dist, axis=0)
    h = float(fan.p[1] - fan.p[0])
    miss = np.empty((m, 3))
    times = np.empty(m)
    covec = np.empty((m, 3))
    for j in range(m):
        kj = int(k[j])
        best = (float(dist[kj, j]), 0.0, kj)
        if refine:
            for k0 in (kj - 1, kj):
                if k0 < 0 or k0 + 1 >= int(fan.n_valid[j]):
                    continue
                x0, x1 = fan.x[k0, j], fan.x[k0 + 1, j]
                v0 = model.speed(x0) ** 2 * fan.xi[k0, j]
                v1 = model.speed(x1) ** 2 * fan.xi[k0 + 1, j]
                res = minimize_scalar(
                    lambda s: float(np.linalg.norm(hermite(x0, v0, x1, v1, h, s) - y)),
                    bounds=(0.0, 1.0),
                    method="bounded",
                    options={"xatol": 1e-12},
                )
                if res.fun < best[0]:
                    best = (float(res.fun), float(res.x), k0)
        _, s, k0 = best
        if s > 0.0:
            x0, x1 = fan.x[k0, j], fan.x[k0 + 1, j]
            v0 = model.speed(x0) ** 2 * fan.xi[k0, j]
            v1 = model.speed(x1) ** 2 * fan.xi[k0 + 1, j]
            point = hermite(x0, v0, x1, v1, h, s)
            covec[j] = (1 - s) * fan.xi[k0, j] + s * fan.xi[k0 + 1, j]
        else:
            point = fan.x[k0, j]
            covec[j] = fan.xi[k0, j]
        miss[j] = point - y
        times[j] = fan.p[k0] + s * h
    return miss, times, covec


def _scan_seeds(shooter: _Shooter, n_scan: int, width: float, n_seeds: int) -> np.ndarray:
    grid = np.linspace(-width, width, n_scan)
    T, P = np.meshgrid(grid, np.pi / 2 + grid, indexing="ij")
    q = np.column_stack([T.ravel(), P.ravel()])
    miss, _, _ = shooter.approach(q, refine=False)
    field_ = np.linalg.norm(miss, axis=-1).reshape(n_scan, n_scan)
    minima = (field_ == minimum_filter(field_, size=3, mode="nearest")) & np.isfinite(field_)
    order = np.argsort(field_[minima], kind="stable")
    candidates = np.column_stack([T[minima], P[minima]])[order]
    seeds = [np.array([0.0, np.pi / 2])]
    for cand in candidates:
        if len(seeds) >= n_seeds:
            break
        if all(np.linalg.norm(cand - s) > 1e-9 for s in seeds):
            seeds.append(cand)
    # pad with fixed perturbations when the scan finds few minima
    offsets = [(0.15, 0), (-0.15, 0), (0, 0.15), (0, -0.15), (0.3, 0.3), (-0.3, -0.3), (0.3, -0.3), (-0.3, 0.3)]
    for dt_, dp_ in offsets:
        if len(seeds) >= n_seeds:
            break
        seeds.append(np.array([dt_, np.pi / 2 + dp_]))
    return np.array(seeds)


def arrival_status(times: Sequence[float], time_tol: float = 1e-6) -> str:
    """Multipath when converged arrival times spread by more than time_tol relative to the first."""
    t_min = min(times)
    return MULTIPATH if max(times) - t_min > time_tol * t_min else UNIQUE


def two_point_traveltime(
    model: VelocityModel,
    z: Sequence[float],
    y: Sequence[float],
    dp: float | None = None,
    max_iter: int = 40,
    n_starts: int = 9,
    scan: int = 21,
    scan_width: float = 0.6,
    angle_tol: float = 1e-3,
    time_tol: float = 1e-6,
) -> TwoPointResult:
    """
    Minimal traveltime between z and y by shooting with damped Gauss-Newton.

    Starts from the straight-line take-off and the best local minima of a
    coarse fan scan (n_starts initialisations in total). Distinct converged
    take-offs whose times spread by more than time_tol identify a multipath.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    shooter = _Shooter(model, z, y, dp)
    if shooter.d == 0.0:
        raise ValueError("two-point traveltime needs z != y")
    tol_conv = 1e-8 * max(shooter.d, 1.0)

    q = _scan_seeds(shooter, scan, scan_width, n_starts)
    m = q.shape[0]
    lam = np.ones(m)
    active = np.ones(m, dtype=bool)
    best_r = np.full(m, np.inf)
    best_q = q.copy()
    best_t = np.full(m, np.nan)
    best_k = np.full((m, 3), np.nan)
    step_q = np.zeros((m, 2))
    eps = 1e-6

    for it in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        trial = best_q[idx] - lam[idx, None] * step_q[idx]
        trials = np.concatenate([trial, trial + [eps, 0.0], trial + [0.0, eps]])
        miss, times, covec = shooter.approach(trials)
        n = idx.size
        r0 = miss[:n]
        J = np.stack([(miss[n : 2 * n] - r0) / eps, (miss[2 * n :] - r0) / eps], axis=-1)
        norms = np.linalg.norm(r0, axis=-1)
        for a, j in enumerate(idx):
            if norms[a] < best_r[j]:
                best_r[j] = norms[a]
                best_q[j] = trial[a]
                best_t[j] = times[a]
                best_k[j] = covec[a]
                step_q[j] = np.linalg.lstsq(J[a], r0[a], rcond=None)[0]
                lam[j] = min(1.0, 2.0 * lam[j]) if it else 1.0
            else:
                lam[j] *= 0.5
            if best_r[j] < tol_conv or lam[j] < 1e-6:
                active[j] = False

    converged = np.nonzero(best_r < 1e-6 * max(shooter.d, 1.0))[0]
    if converged.size == 0:
        j = int(np.argmin(best_r))
        logger.debug(f"Two-point shooting failed from {z.tolist()} to {y.tolist()}, residual {best_r[j]:.3g}")
        return TwoPointResult(float(best_t[j]), None, FAILED, float(best_r[j]))

    arrivals: list[tuple[float, np.ndarray]] = []
    for j in converged[np.argsort(best_t[converged], kind="stable")]:
        nu = shooter.directions(best_q[j])
        if all(np.arccos(np.clip(np.dot(nu, other), -1, 1)) > angle_tol for _, other in arrivals):
            arrivals.append((float(best_t[j]), nu))
    t_min, nu_min = arrivals[0]
    status = arrival_status([t for t, _ in arrivals], time_tol)
    if status == UNIQUE and len(arrivals) > 1:
        logger.debug(f"{len(arrivals)} distinct take-offs with equal times reaching {y.tolist()}")
    return TwoPointResult(
        time=t_min,
        takeoff=TakeoffDirection.from_vector(nu_min),
        status=status,
        residual=float(np.min(best_r[converged])),
        arrivals=[(t, TakeoffDirection.from_vector(nu)) for t, nu in arrivals],
    )


@dataclass
class TravelTimeTable:
    station: np.ndarray
    spec: GridSpec
    times: np.ndarray
    valid: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def masked_cells(self, support: np.ndarray) -> np.ndarray:
        """Indices of support cells without a valid time."""
        return np.argwhere(support & ~self.valid)

    def flat_times(self) -> np.ndarray:
        return np.ascontiguousarray(self.times.reshape(-1))


def _fan_samples(
    model: VelocityModel,
    station: np.ndarray,
    directions: np.ndarray,
    p_max: float,
    dp: float,
    domain: tuple[np.ndarray, np.ndarray],
    stride: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    fan = trace_fan(model, station, directions, p_max, dp, domain=domain)
    valid = fan.valid_mask()
    valid[0] = False
    keep = np.zeros_like(valid)
    keep[::stride] = True
    sel = valid & keep
    ray_id = np.broadcast_to(np.arange(fan.n_rays)[None, :], sel.shape)
    return fan.x[sel], fan.xi[sel], np.broadcast_to(fan.p[:, None], sel.shape)[sel], ray_id[sel]


def build_traveltime_table(
    model: VelocityModel,
    station: Sequence[float],
    spec: GridSpec,
    n_rays: int | None = None,
    dp: float | None = None,
    multipath_tol: float | None = None,
    neighbors: int = 12,
    workers: int | None = None,
    max_rays: int = 40000,
) -> TravelTimeTable:
    """
    Minimal-time table t(station, y) on the cells of spec.

    A dense fan is traced from the station; each cell collects the ray samples
    within 1.5 cells and extrapolates their times to the center with the local
    point-source expansion. Cells that no ray reaches, or whose estimates
    disagree by more than multipath_tol (several branches), are masked.
    """
    station = np.asarray(station, dtype=float)
    h = min(spec.spacing)
    centers = spec.flat_centers()
    lo = np.minimum(np.asarray(spec.origin), station) - 2 * h
    hi = np.maximum(np.asarray(spec.upper), station) + 2 * h
    lo[2] = min(lo[2], 0.0)
    span = float(np.max(np.linalg.norm(centers - station, axis=-1)))
    speeds = model.speed(centers)
    c_min, c_max = float(np.min(speeds)), float(np.max(speeds))
    c_max = max(c_max, float(model.speed(station)))

    surface_station = station[2] <= 0.0
    if n_rays is None:
        dtheta = h / max(span, h)
        n_rays = int(np.ceil((2.0 if surface_station else 4.0) * np.pi / dtheta**2))
    if n_rays > max_rays:
        logger.warning(f"Traveltime fan capped at {max_rays} rays (requested {n_rays})")
        n_rays = max_rays
    dp = dp or default_step(h, c_max)
    stride = max(1, int(0.5 * h / (c_max * dp)))
    p_max = 1.25 * span / c_min
    directions = fibonacci_directions(n_rays, lower_only=surface_station)

    chunks = np.array_split(directions, max(1, int(np.ceil(n_rays / 1500))))
    parts = ordered_map(
        lambda d: _fan_samples(model, station, d, p_max, dp, (lo, hi), stride), chunks, workers
    )
    xs = np.concatenate([p[0] for p in parts])
    ks = np.concatenate([p[1] for p in parts])
    ts = np.concatenate([p[2] for p in parts])
    logger.debug(f"Table fan from {station.tolist()}: {n_rays} rays, {xs.shape[0]} samples")

    tree = cKDTree(xs)
    radius = 1.5 * h
    dist, nb = tree.query(centers, k=neighbors, distance_upper_bound=radius)
    found = np.isfinite(dist)
    nb = np.where(found, nb, 0)
    delta = centers[:, None, :] - xs[nb]
    xi = ks[nb]
    c_s = model.speed(xs[nb])
    t_s = ts[nb]
    along = np.sum(xi * delta, axis=-1)
    second = (np.sum(delta**2, axis=-1) - (c_s * along) ** 2) / (2.0 * c_s**2 * t_s)
    est = np.where(found, t_s + along + second, np.nan)

    count = found.sum(axis=1)
    weights = np.where(found, 1.0 / np.maximum(dist, 1e-3 * h), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        times = np.nansum(np.nan_to_num(est) * weights, axis=1) / weights.sum(axis=1)
        spread = np.nanmax(est, axis=1) - np.nanmin(est, axis=1)
    tol = multipath_tol if multipath_tol is not None else 0.25 * h / c_min
    valid = (count >= 3) & (spread <= tol)

    near = np.linalg.norm(centers - station, axis=-1) < 3.0 * h
    for i in np.nonzero(near)[0]:
        if np.any(centers[i] != station):
            times[i] = straight_line_time(model, station, centers[i])
            valid[i] = True

    n_multi = int(np.sum((count >= 3) & (spread > tol)))
    n_unreached = int(np.sum(count < 3) - np.sum(near & (count < 3)))
    logger.info(
        f"Table for station {station.tolist()}: {int(valid.sum())}/{valid.size} cells valid, "
        f"{n_multi} multipath, {n_unreached} unreached"
    )
    return TravelTimeTable(
        station=station,
        spec=spec,
        times=np.where(valid, times, np.nan).reshape(spec.dims),
        valid=valid.reshape(spec.dims),
        metadata={"n_rays": n_rays, "dp": dp, "multipath_tol": tol, "n_multipath": n_multi},
    )


def reciprocity_check(
    model: VelocityModel,
    table: TravelTimeTable,
    n_pairs: int,
    rng: np.random.Generator,
    tol: float | None = None,
) -> dict[str, Any]:
    """
    Compare table times with two-point times traced from the cell back to the station.
    """
    cells = np.argwhere(table.valid)
    h = min(table.spec.spacing)
    if tol is None:
        tol = 2.0 * h / float(np.min(model.speed(table.spec.flat_centers())))
    picks = cells[rng.choice(len(cells), size=min(n_pairs, len(cells)), replace=False)]
    errors = []
    for index in picks:
        y = table.spec.position_of(index)
        if np.linalg.norm(y - table.station) < 1e-12:
            continue
        back = two_point_traveltime(model, y, table.station)
        if back.status == FAILED:
            continue
        errors.append(abs(back.time - float(table.times[tuple(index)])))
    max_err = float(max(errors)) if errors else 0.0
    return {"pairs": len(errors), "max_error": max_err, "tol": tol, "passed": max_err <= tol}


@dataclass
class TableSet:
    """Traveltime tables for every source and receiver of a geometry."""

    sources: list[TravelTimeTable]
    receivers: list[TravelTimeTable]

    @property
    def spec(self) -> GridSpec:
        return self.sources[0].spec

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        ts = np.stack([t.flat_times() for t in self.sources])
        tr = np.stack([t.flat_times() for t in self.receivers])
        return ts, tr

    def valid(self) -> np.ndarray:
        mask = np.ones(self.spec.dims, dtype=bool)
        for table in self.sources + self.receivers:
            mask &= table.valid
        return mask


def build_table_set(
    model: VelocityModel,
    sources: np.ndarray,
    receivers: np.ndarray,
    spec: GridSpec,
    workers: int | None = None,
    **kwargs: Any,
) -> TableSet:
    src = [build_traveltime_table(model, s, spec, workers=workers, **kwargs) for s in sources]
    rec = [build_traveltime_table(model, r, spec, workers=workers, **kwargs) for r in receivers]
    return TableSet(src, rec)


def grazing_report(
    model: VelocityModel,
    points: np.ndarray,
    n_dirs: int = 64,
    tol: float = 0.05,
    dp: float | None = None,
) -> dict[str, Any]:
    """
    Trace upward fans from subsurface points and flag rays that reach the
    surface at grazing incidence (|dx3/dp| < tol * c).
    """
    directions = -fibonacci_directions(n_dirs, lower_only=True)
    violations = []
    for point in np.atleast_2d(points):
        c = float(model.speed(point))
        depth = float(point[2])
        step = dp or max(depth, 1e-3) / (100.0 * c)
        fan = trace_fan(model, point, directions, p_max=6.0 * max(depth, 1e-3) / c, dp=step)
        exited = fan.status == EXITED_SURFACE
        if not np.any(exited):
            continue
        c_exit = model.speed(fan.crossing_x[exited])
        vertical = np.abs(c_exit**2 * fan.crossing_xi[exited, 2])
        bad = vertical < tol * c_exit
        for v, x in zip(vertical[bad], fan.crossing_x[exited][bad]):
            violations.append({"from": point.tolist(), "surface_point": x.tolist(), "dx3_dp": float(v)})
    if violations:
        logger.warning(f"{len(violations)} rays reach the surface at grazing incidence")
    return {"points": int(np.atleast_2d(points).shape[0]), "tol": tol, "violations": violations}
