"""
Hamiltonian ray tracing parametrised by traveltime.

The flow of H(x, xi) = 1/2 c(x)^2 |xi|^2 is integrated with classic fixed-step
RK4 in Cartesian phase space:

    dx/dp  = c^2 xi
    dxi/dp = -c |xi|^2 grad c

On the characteristic set |xi| c = 1 the parameter p is traveltime. Rays are
traced in batches: every array carries a leading ray axis.
"""

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import brentq

from ..core.model import VelocityModel
from ..exceptions import NumericalError

logger = logging.getLogger(__name__)

INTERIOR = "interior"
EXITED_SURFACE = "exited_surface"
EXITED_DOMAIN = "exited_domain"
FAILED = "failed"


@dataclass(frozen=True)
class TakeoffDirection:
    """Azimuth theta and polar angle phi of the unit take-off vector."""

    theta: float
    phi: float

    def unit(self) -> np.ndarray:
        return np.array(
            [
                np.sin(self.phi) * np.cos(self.theta),
                np.sin(self.phi) * np.sin(self.theta),
                np.cos(self.phi),
            ]
        )

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "TakeoffDirection":
        v = np.asarray(v, dtype=float)
        v = v / np.linalg.norm(v)
        return cls(float(np.arctan2(v[1], v[0])), float(np.arccos(np.clip(v[2], -1.0, 1.0))))

    @property
    def alpha(self) -> tuple[float, float]:
        """Horizontal components (nu1, nu2) of the take-off vector."""
        nu = self.unit()
        return float(nu[0]), float(nu[1])


@dataclass(frozen=True)
class PhaseSpacePoint:
    x: np.ndarray
    xi: np.ndarray

    def shell_residual(self, model: VelocityModel) -> float:
        """| |xi| c(x) - 1 |"""
        return float(abs(np.linalg.norm(self.xi) * model.speed(self.x) - 1.0))

    def to_dict(self) -> dict[str, Any]:
        return {"x": [float(v) for v in self.x], "xi": [float(v) for v in self.xi]}


@dataclass
class Ray:
    start: PhaseSpacePoint
    takeoff: TakeoffDirection
    p: np.ndarray
    x: np.ndarray
    xi: np.ndarray
    status: str
    crossing: PhaseSpacePoint | None = None
    crossing_p: float | None = None
    model: VelocityModel | None = field(default=None, repr=False)

    @property
    def samples(self) -> list[tuple[float, PhaseSpacePoint]]:
        return [(float(p), PhaseSpacePoint(x, xi)) for p, x, xi in zip(self.p, self.x, self.xi)]

    def endpoint(self) -> PhaseSpacePoint:
        if self.crossing is not None:
            return self.crossing
        return PhaseSpacePoint(self.x[-1], self.xi[-1])

    def hamiltonian(self) -> np.ndarray:
        assert self.model is not None
        return 0.5 * self.model.speed(self.x) ** 2 * np.sum(self.xi**2, axis=-1)

    def hamiltonian_drift(self) -> float:
        h = self.hamiltonian()
        return float(np.max(np.abs(h - h[0])) / abs(h[0]))


def _rhs(model: VelocityModel, x: np.ndarray, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c = model.speed(x)[..., None]
    grad = model.gradient(x)
    xi2 = np.sum(xi * xi, axis=-1, keepdims=True)
    return c * c * xi, -c * xi2 * grad


def rk4_step(
    model: VelocityModel, x: np.ndarray, xi: np.ndarray, h: float
) -> tuple[np.ndarray, np.ndarray]:
    k1x, k1k = _rhs(model, x, xi)
    k2x, k2k = _rhs(model, x + 0.5 * h * k1x, xi + 0.5 * h * k1k)
    k3x, k3k = _rhs(model, x + 0.5 * h * k2x, xi + 0.5 * h * k2k)
    k4x, k4k = _rhs(model, x + h * k3x, xi + h * k3k)
    return (
        x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
        xi + h / 6.0 * (k1k + 2 * k2k + 2 * k3k + k4k),
    )


def initial_covector(model: VelocityModel, starts: np.ndarray, directions: np.ndarray) -> np.ndarray:
    nu = directions / np.linalg.norm(directions, axis=-1, keepdims=True)
    return nu / model.speed(starts)[..., None]


def hermite(x0: np.ndarray, v0: np.ndarray, x1: np.ndarray, v1: np.ndarray, h: float, s: float) -> np.ndarray:
    """Cubic Hermite position at fraction s of a step of length h."""
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * x0 + h10 * h * v0 + h01 * x1 + h11 * h * v1


@dataclass
class Fan:
    """Batch of rays sampled on a shared parameter grid."""

    p: np.ndarray  # (n_steps + 1,)
    x: np.ndarray  # (n_steps + 1, m, 3)
    xi: np.ndarray  # (n_steps + 1, m, 3)
    n_valid: np.ndarray  # samples per ray before exit
    status: np.ndarray  # (m,) str
    crossing_x: np.ndarray  # (m, 3), nan when interior
    crossing_xi: np.ndarray
    crossing_p: np.ndarray  # (m,)

    @property
    def n_rays(self) -> int:
        return self.x.shape[1]

    def valid_mask(self) -> np.ndarray:
        """(n_steps + 1, m) True for samples taken before exit."""
        return np.arange(self.p.size)[:, None] < self.n_valid[None, :]


def _outside(x: np.ndarray, lo: np.ndarray | None, hi: np.ndarray | None, surface: bool) -> np.ndarray:
    out = np.zeros(x.shape[:-1], dtype=bool)
    if surface:
        out |= x[..., 2] < 0.0
    if lo is not None and hi is not None:
        out |= np.any(x < lo, axis=-1) | np.any(x > hi, axis=-1)
    return out


def _crossing(
    model: VelocityModel,
    x0: np.ndarray,
    xi0: np.ndarray,
    x1: np.ndarray,
    xi1: np.ndarray,
    h: float,
    lo: np.ndarray | None,
    hi: np.ndarray | None,
    surface: bool,
) -> tuple[float, str, int, float]:
    """Fraction of the step where the ray leaves, its status, axis and bound."""
    v0 = model.speed(x0) ** 2 * xi0
    v1 = model.speed(x1) ** 2 * xi1
    candidates: list[tuple[int, float, str]] = []
    if surface and x1[2] < 0.0:
        candidates.append((2, 0.0, EXITED_SURFACE))
    if lo is not None and hi is not None:
        for k in range(3):
            if x1[k] < lo[k]:
                candidates.append((k, float(lo[k]), EXITED_DOMAIN))
            if x1[k] > hi[k]:
                candidates.append((k, float(hi[k]), EXITED_DOMAIN))
    best = (1.0, EXITED_DOMAIN, 2, 0.0)
    for k, bound, status in candidates:
        g0 = x0[k] - bound
        g1 = x1[k] - bound
        if g0 == 0.0:
            s = 0.0
        elif g0 * g1 > 0:
            continue
        else:
            s = brentq(lambda s_: hermite(x0, v0, x1, v1, h, s_)[k] - bound, 0.0, 1.0, xtol=1e-14)
        if s <= best[0]:
            best = (s, status, k, bound)
    return best


def trace_fan(
    model: VelocityModel,
    starts: np.ndarray,
    directions: np.ndarray,
    p_max: float,
    dp: float,
    domain: tuple[np.ndarray, np.ndarray] | None = None,
    stop_at_surface: bool = True,
) -> Fan:
    """
    Trace a batch of rays with fixed-step RK4.

    Args:
        model: Background speed
        starts: (m, 3) or (3,) start positions
        directions: (m, 3) take-off vectors (normalised internally)
        p_max: Final traveltime
        dp: Maximum step; the actual step divides p_max evenly
        domain: Optional (lo, hi) box; leaving it ends the ray
        stop_at_surface: End rays that cross x3 = 0

    Returns:
        Fan with samples, per-ray status and interpolated exit crossings
    """
    if not dp > 0:
        raise NumericalError(f"ray step dp must be > 0, got {dp}")
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    m = directions.shape[0]
    starts = np.broadcast_to(np.asarray(starts, dtype=float), (m, 3)).copy()
    lo, hi = (np.asarray(domain[0], float), np.asarray(domain[1], float)) if domain else (None, None)

    n_steps = max(1, int(np.ceil(p_max / dp - 1e-12)))
    h = p_max / n_steps
    p = h * np.arange(n_steps + 1)
    X = np.full((n_steps + 1, m, 3), np.nan)
    K = np.full((n_steps + 1, m, 3), np.nan)
    X[0] = starts
    K[0] = initial_covector(model, starts, directions)

    n_valid = np.full(m, n_steps + 1)
    status = np.full(m, INTERIOR, dtype=object)
    cross_x = np.full((m, 3), np.nan)
    cross_k = np.full((m, 3), np.nan)
    cross_p = np.full(m, np.nan)
    alive = np.ones(m, dtype=bool)

    x, xi = X[0].copy(), K[0].copy()
    for step in range(1, n_steps + 1):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        xn, kn = rk4_step(model, x[idx], xi[idx], h)
        bad = ~np.all(np.isfinite(xn) & np.isfinite(kn), axis=-1)
        left = _outside(xn, lo, hi, stop_at_surface) & ~bad
        for j in idx[bad]:
            status[j] = FAILED
            n_valid[j] = step
            alive[j] = False
            logger.debug(f"Ray {j} produced a non-finite state at p={p[step]:.4g}")
        for jj in np.nonzero(left)[0]:
            j = idx[jj]
            s, st, _, _ = _crossing(model, x[j], xi[j], xn[jj], kn[jj], h, lo, hi, stop_at_surface)
            v0 = model.speed(x[j]) ** 2 * xi[j]
            v1 = model.speed(xn[jj]) ** 2 * kn[jj]
            cross_x[j] = hermite(x[j], v0, xn[jj], v1, h, s)
            cross_k[j] = (1 - s) * xi[j] + s * kn[jj]
            cross_p[j] = p[step - 1] + s * h
            status[j] = st
            n_valid[j] = step
            alive[j] = False
        keep = ~(bad | left)
        x[idx[keep]] = xn[keep]
        xi[idx[keep]] = kn[keep]
        X[step, idx[keep]] = xn[keep]
        K[step, idx[keep]] = kn[keep]

    return Fan(p, X, K, n_valid, status, cross_x, cross_k, cross_p)


def trace_ray(
    model: VelocityModel,
    start: np.ndarray,
    takeoff: TakeoffDirection,
    p_max: float,
    dp: float,
    domain: tuple[np.ndarray, np.ndarray] | None = None,
    stop_at_surface: bool = True,
) -> Ray:
    """Trace a single ray; a non-finite state raises with the last valid sample."""
    start = np.asarray(start, dtype=float)
    fan = trace_fan(model, start, takeoff.unit()[None, :], p_max, dp, domain, stop_at_surface)
    n = int(fan.n_valid[0])
    x = fan.x[:n, 0]
    xi = fan.xi[:n, 0]
    if fan.status[0] == FAILED:
        raise NumericalError(
            f"ray step failure at p={fan.p[n]:.6g}; last valid sample x={x[-1].tolist()} xi={xi[-1].tolist()}"
        )
    crossing = None
    crossing_p = None
    if fan.status[0] != INTERIOR:
        crossing = PhaseSpacePoint(fan.crossing_x[0], fan.crossing_xi[0])
        crossing_p = float(fan.crossing_p[0])
    return Ray(
        start=PhaseSpacePoint(start, fan.xi[0, 0]),
        takeoff=takeoff,
        p=fan.p[:n],
        x=x,
        xi=xi,
        status=str(fan.status[0]),
        crossing=crossing,
        crossing_p=crossing_p,
        model=model,
    )


def fibonacci_directions(n: int, lower_only: bool = False) -> np.ndarray:
    """Near-uniform unit vectors on the sphere (or the x3 > 0 hemisphere)."""
    i = np.arange(n) + 0.5
    z = 1.0 - i / n if lower_only else 1.0 - 2.0 * i / n
    golden = np.pi * (3.0 - np.sqrt(5.0))
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.column_stack([rho * np.cos(golden * i), rho * np.sin(golden * i), z])


def default_step(min_spacing: float, max_speed: float) -> float:
    """dp = (min cell) / (4 max speed)"""
    return min_spacing / (4.0 * max_speed)
