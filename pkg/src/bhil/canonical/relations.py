"""
Closed-form canonical relations of the constant-speed scattering operator.

Points are parametrised intrinsically by q = (s..., r, y1, y2, y3, omega),
where s has two entries for the dense array and one otherwise. With
u = (y - S)/A and v = (y - R)/B the relation is

    t = (A + B)/c,  sigma_k = omega u . dS/ds_k / c,  rho = omega v3 / c,
    tau = omega,    eta = omega (u + v) / c

The left projection maps q to (s, r, t; sigma, rho, tau) and the right one to
(y; eta).
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import brentq

from ..exceptions import ConfigError

logger = logging.getLogger(__name__)

KINDS = ("dense", "crosswell", "walkaway")
ANALYTIC = "analytic"
FINITE_DIFFERENCE = "finite_difference"
ONE_SIDED = "finite_difference_one_sided"

E3 = np.array([0.0, 0.0, 1.0])


def n_source_params(kind: str) -> int:
    if kind not in KINDS:
        raise ConfigError(f"unknown geometry kind {kind!r}; expected one of {list(KINDS)}")
    return 2 if kind == "dense" else 1


def source_position(kind: str, s: np.ndarray, s0: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Source S(s) and its derivative columns dS/ds_k (3, k)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if kind == "dense":
        return np.array([s[0], s[1], 0.0]), np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    if kind == "crosswell":
        return np.array([s0, 0.0, s[0]]), E3[:, None].copy()
    if kind == "walkaway":
        return np.array([s[0], 0.0, 0.0]), np.array([[1.0], [0.0], [0.0]])
    raise ConfigError(f"unknown geometry kind {kind!r}")


@dataclass
class CanonicalPoint:
    kind: str
    params: np.ndarray
    left_base: np.ndarray
    left_fiber: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    A: float
    B: float
    muted: bool
    c: float = 1.0
    s0: float = 1.0

    @property
    def n_s(self) -> int:
        return n_source_params(self.kind)

    @property
    def s(self) -> np.ndarray:
        return self.params[: self.n_s]

    @property
    def r(self) -> float:
        return float(self.params[self.n_s])

    @property
    def omega(self) -> float:
        return float(self.params[-1])

    @property
    def left(self) -> np.ndarray:
        return np.concatenate([self.left_base, self.left_fiber])

    @property
    def right(self) -> np.ndarray:
        return np.concatenate([self.y, self.eta])

    def unit_vectors(self) -> tuple[np.ndarray, np.ndarray]:
        S, _ = source_position(self.kind, self.s, self.s0)
        R = np.array([0.0, 0.0, self.r])
        return (self.y - S) / self.A, (self.y - R) / self.B

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "params": [float(v) for v in self.params],
            "left": [float(v) for v in self.left],
            "right": [float(v) for v in self.right],
            "muted": self.muted,
        }


def split_params(kind: str, q: np.ndarray) -> tuple[np.ndarray, float, np.ndarray, float]:
    k = n_source_params(kind)
    q = np.asarray(q, dtype=float)
    return q[:k], float(q[k]), q[k + 1 : k + 4], float(q[k + 4])


def eval_canonical(
    kind: str,
    s: Sequence[float] | float,
    r: float,
    y: Sequence[float],
    omega: float,
    c: float = 1.0,
    s0: float = 1.0,
    mute_angle: float = 1e-3,
) -> CanonicalPoint:
    """
    Evaluate the canonical relation at (s, r, y, omega).

    Back-to-back incident and scattered directions (u = -v within mute_angle)
    are flagged muted but still evaluated.
    """
    if omega == 0:
        raise ConfigError("omega must be nonzero")
    y = np.asarray(y, dtype=float)
    if not y[2] > 0:
        raise ConfigError(f"scattering point must lie below the surface, got y3={y[2]}")
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if s_arr.size != n_source_params(kind):
        raise ConfigError(f"{kind} needs {n_source_params(kind)} source coordinates, got {s_arr.size}")
    S, dS = source_position(kind, s_arr, s0)
    R = np.array([0.0, 0.0, float(r)])
    A = float(np.linalg.norm(y - S))
    B = float(np.linalg.norm(y - R))
    u = (y - S) / A
    v = (y - R) / B
    t = (A + B) / c
    sigma = omega * (u @ dS) / c
    rho = omega * v[2] / c
    eta = omega * (u + v) / c
    muted = bool(np.linalg.norm(u + v) < 2.0 * np.sin(0.5 * mute_angle))
    params = np.concatenate([s_arr, [float(r)], y, [float(omega)]])
    return CanonicalPoint(
        kind=kind,
        params=params,
        left_base=np.concatenate([s_arr, [float(r), t]]),
        left_fiber=np.concatenate([sigma, [rho, float(omega)]]),
        y=y,
        eta=eta,
        A=A,
        B=B,
        muted=muted,
        c=c,
        s0=s0,
    )


def point_from_params(kind: str, q: np.ndarray, c: float = 1.0, s0: float = 1.0) -> CanonicalPoint:
    s, r, y, omega = split_params(kind, q)
    return eval_canonical(kind, s, r, y, omega, c=c, s0=s0)


def _projector(w: np.ndarray) -> np.ndarray:
    return np.eye(3) - np.outer(w, w)


def analytic_jacobians(point: CanonicalPoint) -> tuple[np.ndarray, np.ndarray]:
    kind, c, omega = point.kind, point.c, point.omega
    k = point.n_s
    n = k + 5
    _, dS = source_position(kind, point.s, point.s0)
    u, v = point.unit_vectors()
    A, B = point.A, point.B
    Pu, Pv = _projector(u), _projector(v)
    iy = slice(k + 1, k + 4)
    ir, iw = k, k + 4

    JL = np.zeros((2 * (k + 2), n))
    JL[:k, :k] = np.eye(k)
    JL[k, ir] = 1.0
    row_t = k + 1
    JL[row_t, :k] = -(u @ dS) / c
    JL[row_t, ir] = -v[2] / c
    JL[row_t, iy] = (u + v) / c
    for a in range(k):
        row = k + 2 + a
        JL[row, :k] = -omega * (dS[:, a] @ Pu @ dS) / (A * c)
        JL[row, iy] = omega * (Pu @ dS[:, a]) / (A * c)
        JL[row, iw] = (u @ dS[:, a]) / c
    row_rho = 2 * k + 2
    JL[row_rho, ir] = -omega * (E3 @ Pv @ E3) / (B * c)
    JL[row_rho, iy] = omega * (Pv @ E3) / (B * c)
    JL[row_rho, iw] = v[2] / c
    JL[row_rho + 1, iw] = 1.0

    JR = np.zeros((6, n))
    JR[:3, iy] = np.eye(3)
    JR[3:, :k] = -omega * (Pu @ dS) / (A * c)
    JR[3:, ir] = -omega * (Pv @ E3) / (B * c)
    JR[3:, iy] = omega * (Pu / A + Pv / B) / c
    JR[3:, iw] = (u + v) / c
    return JL, JR


def _admissible(kind: str, q: np.ndarray, s_min: float) -> bool:
    k = n_source_params(kind)
    if q[k + 3] <= 0.0 or q[-1] == 0.0:
        return False
    return not (kind == "walkaway" and q[0] <= s_min)


def fd_jacobians(
    point: CanonicalPoint, rel_step: float = 1e-5, s_min: float = 0.0
) -> tuple[np.ndarray, np.ndarray, str]:
    """Centered differences; one-sided where a centered stencil leaves the domain."""
    q0 = point.params
    scale = max(point.A, point.B, 1.0)
    method = FINITE_DIFFERENCE
    cols_l, cols_r = [], []
    for i in range(q0.size):
        h = rel_step * (abs(q0[i]) if i == q0.size - 1 else scale)
        qp, qm = q0.copy(), q0.copy()
        qp[i] += h
        qm[i] -= h
        fwd, bwd = _admissible(point.kind, qp, s_min), _admissible(point.kind, qm, s_min)
        if fwd and bwd:
            lp = point_from_params(point.kind, qp, point.c, point.s0)
            lm = point_from_params(point.kind, qm, point.c, point.s0)
            cols_l.append((lp.left - lm.left) / (2 * h))
            cols_r.append((lp.right - lm.right) / (2 * h))
            continue
        method = ONE_SIDED
        logger.warning(f"FD stencil for parameter {i} leaves the domain; using a one-sided difference")
        sign = 1.0 if fwd else -1.0
        qs = q0.copy()
        qs[i] += sign * h
        ls = point_from_params(point.kind, qs, point.c, point.s0)
        cols_l.append(sign * (ls.left - point.left) / h)
        cols_r.append(sign * (ls.right - point.right) / h)
    return np.column_stack(cols_l), np.column_stack(cols_r), method


@dataclass
class Jacobians:
    JL: np.ndarray
    JR: np.ndarray
    method: str
    extra: dict[str, np.ndarray] = field(default_factory=dict)


def projection_jacobians(point: CanonicalPoint, method: str = ANALYTIC, rel_step: float = 1e-5) -> Jacobians:
    """
    Jacobians of the left and right projections in the intrinsic coordinates.

    method "analytic" uses the closed-form blocks, "finite_difference" centered
    differences of eval_canonical, and "both" returns the analytic pair with the
    FD pair under extra for cross-validation.
    """
    if method == FINITE_DIFFERENCE:
        JL, JR, used = fd_jacobians(point, rel_step)
        return Jacobians(JL, JR, used)
    JL, JR = analytic_jacobians(point)
    if method == "both":
        fl, fr, used = fd_jacobians(point, rel_step)
        return Jacobians(JL, JR, ANALYTIC, {"JL_fd": fl, "JR_fd": fr, "fd_method": np.array(used)})
    if method != ANALYTIC:
        raise ConfigError(f"unknown Jacobian method {method!r}")
    return Jacobians(JL, JR, ANALYTIC)


def dense_minor(point: CanonicalPoint) -> float:
    """Closed form det D eta / D(s1, s2, omega) for the dense array."""
    u, v = point.unit_vectors()
    omega = point.omega
    return float(omega**2 * point.y[2] / point.A**3 * (1.0 + u @ v) / point.c**3)


def crosswell_det(point: CanonicalPoint) -> float:
    """Closed form det D(t, sigma, rho) / D(y) for crosswell."""
    y, s, r = point.y, float(point.s[0]), point.r
    A, B, omega = point.A, point.B, point.omega
    f2 = (y[2] - s) / A + (y[2] - r) / B
    return float(-(omega**2) * point.s0 * y[1] / (A**2 * B**2) * f2 / point.c**3)


def walkaway_det(point: CanonicalPoint) -> float:
    """Closed form det D eta / D(s, r, omega) for walkaway."""
    u, v = point.unit_vectors()
    A, B, omega = point.A, point.B, point.omega
    return float(-(omega**2) * point.y[1] / (A**2 * B**2) * (point.y @ (u + v)) / point.c**3)


def block_det(point: CanonicalPoint, JL: np.ndarray, JR: np.ndarray) -> float:
    """The determinant that each closed form above evaluates, taken from Jacobians."""
    k = point.n_s
    iy = list(range(k + 1, k + 4))
    if point.kind == "dense":
        return float(np.linalg.det(JR[3:][:, [0, 1, k + 4]]))
    if point.kind == "crosswell":
        return float(np.linalg.det(JL[k + 1 : k + 4][:, iy]))
    return float(np.linalg.det(JR[3:][:, [0, 1, k + 4]]))


def closed_form_det(point: CanonicalPoint) -> float:
    return {"dense": dense_minor, "crosswell": crosswell_det, "walkaway": walkaway_det}[point.kind](point)


def critical_surfaces(
    kind: str, s: Sequence[float] | float, r: float, y: Sequence[float], s0: float = 1.0
) -> tuple[float, float]:
    """Defining functions (f1, f2) of the critical surfaces."""
    if kind == "dense":
        raise ConfigError("critical surfaces have no closed form for the dense array")
    y = np.asarray(y, dtype=float)
    S, _ = source_position(kind, np.atleast_1d(np.asarray(s, dtype=float)), s0)
    R = np.array([0.0, 0.0, float(r)])
    A = float(np.linalg.norm(y - S))
    B = float(np.linalg.norm(y - R))
    if kind == "crosswell":
        f2 = (y[2] - S[2]) / A + (y[2] - r) / B
    else:
        f2 = float(y @ ((y - S) / A + (y - R) / B))
    return float(y[1]), float(f2)


def walkaway_exceptional(s: float, r: float, y: Sequence[float]) -> float:
    """s^2 B^2 (y2^2 + y3^2) - r^2 A^2 (y1^2 + y2^2); its zero set is where the right fold can fail."""
    y = np.asarray(y, dtype=float)
    A2 = float(np.sum((y - np.array([s, 0.0, 0.0])) ** 2))
    B2 = float(np.sum((y - np.array([0.0, 0.0, r])) ** 2))
    return s * s * B2 * (y[1] ** 2 + y[2] ** 2) - r * r * A2 * (y[0] ** 2 + y[1] ** 2)


@dataclass(frozen=True)
class SampleSpec:
    """Ranges for sampling intrinsic coordinates."""

    kind: str
    s_range: tuple[float, float] = (0.2, 2.0)
    s2_range: tuple[float, float] = (-1.0, 1.0)
    r_range: tuple[float, float] = (0.2, 2.0)
    y_lo: tuple[float, float, float] = (-1.5, -1.5, 0.3)
    y_hi: tuple[float, float, float] = (1.5, 1.5, 2.5)
    omega_range: tuple[float, float] = (0.5, 2.0)
    s0: float = 1.0
    c: float = 1.0
    mute_angle: float = 0.1
    epsilon: float = 0.05

    def __post_init__(self) -> None:
        n_source_params(self.kind)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n raw parameter vectors (unfiltered)."""
        cols = [rng.uniform(*self.s_range, n)]
        if self.kind == "dense":
            cols.append(rng.uniform(*self.s2_range, n))
        cols.append(rng.uniform(*self.r_range, n))
        for a in range(3):
            cols.append(rng.uniform(self.y_lo[a], self.y_hi[a], n))
        cols.append(rng.uniform(*self.omega_range, n))
        return np.column_stack(cols)

    def admissible(self, q: np.ndarray) -> np.ndarray:
        """Mask of parameter rows obeying source exclusion and the mute condition."""
        k = n_source_params(self.kind)
        s = q[:, :k]
        r = q[:, k]
        y = q[:, k + 1 : k + 4]
        if self.kind == "dense":
            S = np.column_stack([s[:, 0], s[:, 1], np.zeros(len(q))])
            offset = np.linalg.norm(s, axis=1)
        elif self.kind == "crosswell":
            S = np.column_stack([np.full(len(q), self.s0), np.zeros(len(q)), s[:, 0]])
            offset = np.full(len(q), self.s0)
        else:
            S = np.column_stack([s[:, 0], np.zeros(len(q)), np.zeros(len(q))])
            offset = np.abs(s[:, 0])
        R = np.column_stack([np.zeros(len(q)), np.zeros(len(q)), r])
        A = np.linalg.norm(y - S, axis=1)
        B = np.linalg.norm(y - R, axis=1)
        u = (y - S) / A[:, None]
        v = (y - R) / B[:, None]
        unmuted = np.linalg.norm(u + v, axis=1) >= 2.0 * np.sin(0.5 * self.mute_angle)
        return (offset > self.epsilon) & (y[:, 2] > 0) & unmuted & (A > self.epsilon) & (B > self.epsilon)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n admissible parameter vectors."""
        out: list[np.ndarray] = []
        total = 0
        while total < n:
            q = self.draw(rng, max(2 * (n - total), 16))
            q = q[self.admissible(q)]
            out.append(q)
            total += len(q)
        return np.concatenate(out)[:n]

    def point(self, q: np.ndarray) -> CanonicalPoint:
        return point_from_params(self.kind, q, self.c, self.s0)


def _f2_of_y3(spec: SampleSpec, q: np.ndarray, y3: float) -> float:
    k = n_source_params(spec.kind)
    y = q[k + 1 : k + 4].copy()
    y[2] = y3
    return critical_surfaces(spec.kind, q[:k], q[k], y, spec.s0)[1]


def sample_sigma1(
    spec: SampleSpec, n: int, rng: np.random.Generator, surface_tol: float = 1e-2
) -> tuple[np.ndarray, int]:
    """
    Points on {y2 = 0} away from the second critical surface.

    Returns:
        (params (n, d), number of draws excluded as lying on both surfaces)
    """
    k = n_source_params(spec.kind)
    out: list[np.ndarray] = []
    excluded = 0
    while len(out) < n:
        q = spec.draw(rng, 1)
        q[0, k + 2] = 0.0
        if not spec.admissible(q)[0]:
            continue
        f1, f2 = critical_surfaces(spec.kind, q[0, :k], q[0, k], q[0, k + 1 : k + 4], spec.s0)
        if abs(f2) < surface_tol:
            excluded += 1
            continue
        out.append(q[0])
    return np.array(out), excluded


def sample_sigma2(
    spec: SampleSpec,
    n: int,
    rng: np.random.Generator,
    surface_tol: float = 1e-2,
    n_scan: int = 64,
    max_draws: int = 100000,
) -> tuple[np.ndarray, int]:
    """
    Points on the second critical surface, found with brentq along y3.

    Draws with |y2| below surface_tol would sit on both surfaces; they are
    excluded and counted.
    """
    k = n_source_params(spec.kind)
    out: list[np.ndarray] = []
    excluded = 0
    grid = np.linspace(spec.y_lo[2], spec.y_hi[2], n_scan)
    for _ in range(max_draws):
        if len(out) >= n:
            break
        q = spec.draw(rng, 1)[0]
        if abs(q[k + 2]) < surface_tol:
            excluded += 1
            continue
        vals = np.array([_f2_of_y3(spec, q, z) for z in grid])
        change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        if change.size == 0:
            continue
        i = int(change[rng.integers(change.size)])
        q[k + 3] = brentq(lambda z: _f2_of_y3(spec, q, z), grid[i], grid[i + 1], xtol=1e-14, rtol=1e-14)
        if spec.admissible(q[None, :])[0]:
            out.append(q)
    if len(out) < n:
        logger.warning(f"Only {len(out)} of {n} second-surface points found")
    return np.array(out), excluded
