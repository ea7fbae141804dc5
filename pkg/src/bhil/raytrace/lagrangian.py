"""
Flowed-out Lagrangian sheets of rays leaving a borehole receiver.

A sheet collects the phase-space points (x, xi) reached by rays from (0, 0, r)
and resamples them as graphs over the chart (x1, x2, p3), p3 = xi3:

    x3 = f(x1, x2, p3),   (xi1, xi2) = (g1, g2)(x1, x2, p3)

Chart values come from local quadratic least-squares fits to the ray samples
within two chart cells of each node. Nodes where the samples do not describe a
single smooth graph are marked unresolved.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.spatial import cKDTree

from ..core.model import GridSpec, VelocityModel
from .tracer import fibonacci_directions, trace_fan

logger = logging.getLogger(__name__)

FIT_RADIUS = 2.0
MIN_NEIGHBORS = 14

# quadratic monomials in scaled chart offsets (d1, d2, d3)
_QUAD_TERMS = ((), (0,), (1,), (2,), (0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


def _design(d: np.ndarray) -> np.ndarray:
    cols = [np.ones(d.shape[:-1])]
    for term in _QUAD_TERMS[1:]:
        col = np.ones(d.shape[:-1])
        for k in term:
            col = col * d[..., k]
        cols.append(col)
    return np.stack(cols, axis=-1)


@dataclass
class LagrangianSheet:
    """
    Chart representation of the sheet for receiver depth r.

    Arrays are indexed by chart node (i1, i2, i3). df holds (f_x1, f_x2, f_p3)
    and hessian the full second derivative of f in chart coordinates.
    """

    r: float
    chart: GridSpec
    f: np.ndarray
    df: np.ndarray
    hessian: np.ndarray
    g: np.ndarray
    nu: np.ndarray
    distance: np.ndarray
    resolved: np.ndarray
    residual: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def f_p3(self) -> np.ndarray:
        return self.df[..., 2]

    @property
    def f_pp(self) -> np.ndarray:
        return self.hessian[..., 2, 2]

    def node(self, index: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """(x, xi) of the sheet at a chart node."""
        index = tuple(int(i) for i in index)
        x1, x2, p3 = self.chart.position_of(index)
        x = np.array([x1, x2, self.f[index]])
        xi = np.array([self.g[index][0], self.g[index][1], p3])
        return x, xi

    def scales(self) -> tuple[float, float]:
        """Median |f_p3| and median |f_pp| over resolved nodes."""
        if not np.any(self.resolved):
            return 0.0, 0.0
        return (
            float(np.median(np.abs(self.f_p3[self.resolved]))),
            float(np.median(np.abs(self.f_pp[self.resolved]))),
        )


@dataclass
class LagrangianFamily:
    """Sheets for several receiver depths on a shared chart."""

    r: np.ndarray
    sheets: list[LagrangianSheet]

    @property
    def chart(self) -> GridSpec:
        return self.sheets[0].chart

    def stack(self, name: str) -> np.ndarray:
        return np.stack([getattr(s, name) for s in self.sheets])


def sample_lagrangian(
    model: VelocityModel,
    r: float,
    chart: GridSpec,
    n_rays: int = 4000,
    p_max: float | None = None,
    depth_max: float = 3.0,
    dp: float | None = None,
    fit_radius: float = FIT_RADIUS,
    residual_tol: float | None = None,
) -> LagrangianSheet:
    """
    Trace the fan from (0, 0, r) and resample it on the (x1, x2, p3) chart.

    Args:
        model: Background speed
        r: Receiver depth
        chart: GridSpec whose axes are x1, x2 and p3
        n_rays: Fan size (Fibonacci directions on the full sphere)
        p_max: Ray length in traveltime; defaults to reaching the chart corners at depth_max
        depth_max: Deepest point of the tracing box
        dp: RK4 step
        fit_radius: Neighbourhood radius in chart cells
        residual_tol: RMS misfit of f above which a node is unresolved
            (default a quarter of the horizontal chart spacing)

    Returns:
        LagrangianSheet with unresolved nodes masked
    """
    receiver = np.array([0.0, 0.0, float(r)])
    h = np.asarray(chart.spacing)
    lo, hi = np.asarray(chart.origin), np.asarray(chart.upper)
    c_lo = float(np.min(model.speed(np.array([[lo[0], lo[1], r], [hi[0], hi[1], r], receiver]))))
    c_max = float(np.max(model.speed(receiver)))
    corner = float(np.max(np.abs(np.concatenate([lo[:2], hi[:2]]))))
    if p_max is None:
        p_max = 1.5 * float(np.hypot(corner, depth_max)) / max(c_lo, 1e-6)
    dp = dp or 0.5 * min(h[0], h[1]) / c_max
    box = (
        np.array([lo[0] - 3 * h[0], lo[1] - 3 * h[1], -1.0]),
        np.array([hi[0] + 3 * h[0], hi[1] + 3 * h[1], depth_max]),
    )
    fan = trace_fan(model, receiver, fibonacci_directions(n_rays), p_max, dp, domain=box)
    valid = fan.valid_mask()
    valid[0] = False
    X, K = fan.x[valid], fan.xi[valid]
    P = np.broadcast_to(fan.p[:, None], valid.shape)[valid]
    nu0 = fibonacci_directions(n_rays)
    NU = np.broadcast_to(nu0[None, :, :], fan.x.shape)[valid]

    chart_pts = np.column_stack([X[:, 0], X[:, 1], K[:, 2]])
    inside = np.all((chart_pts >= lo - fit_radius * h) & (chart_pts <= hi + fit_radius * h), axis=1)
    chart_pts, X, K, P, NU = chart_pts[inside], X[inside], K[inside], P[inside], NU[inside]
    logger.debug(f"Sheet r={r}: {chart_pts.shape[0]} ray samples inside the chart")

    nodes = chart.flat_centers()
    n_nodes = nodes.shape[0]
    resolved = np.zeros(n_nodes, dtype=bool)
    coef = np.full((n_nodes, len(_QUAD_TERMS), 7), np.nan)
    residual = np.full(n_nodes, np.inf)

    if chart_pts.shape[0] >= MIN_NEIGHBORS:
        tree = cKDTree(chart_pts / h)
        k = min(32, chart_pts.shape[0])
        dist, nb = tree.query(nodes / h, k=k, distance_upper_bound=fit_radius)
        found = np.isfinite(dist)
        count = found.sum(axis=1)
        nb = np.where(found, nb, 0)
        d = (chart_pts[nb] - nodes[:, None, :]) / h
        A = _design(d)
        w = np.where(found, (1.0 - (dist / fit_radius) ** 2) ** 2 + 1e-3, 0.0)
        values = np.stack(
            [X[nb][..., 2], K[nb][..., 0], K[nb][..., 1], P[nb], NU[nb][..., 0], NU[nb][..., 1], NU[nb][..., 2]],
            axis=-1,
        )
        M = np.einsum("nk,nki,nkj->nij", w, A, A)
        B = np.einsum("nk,nki,nkv->niv", w, A, values)
        scale = np.trace(M, axis1=1, axis2=2)
        ok = count >= MIN_NEIGHBORS
        eig = np.linalg.eigvalsh(M[ok])
        good = np.zeros(n_nodes, dtype=bool)
        good[np.nonzero(ok)[0]] = eig[:, 0] > 1e-8 * np.maximum(scale[ok], 1e-300)
        idx = np.nonzero(good)[0]
        if idx.size:
            coef[idx] = np.linalg.solve(M[idx], B[idx])
            fit = np.einsum("nki,ni->nk", A[idx], coef[idx, :, 0])
            err = (fit - values[idx, :, 0]) ** 2
            residual[idx] = np.sqrt(np.sum(w[idx] * err, axis=1) / np.sum(w[idx], axis=1))
        tol = residual_tol if residual_tol is not None else 0.25 * min(h[0], h[1])
        resolved = good & (residual <= tol)

    dims = chart.dims
    c = coef.reshape(dims + coef.shape[1:])
    df = np.stack([c[..., 1, 0] / h[0], c[..., 2, 0] / h[1], c[..., 3, 0] / h[2]], axis=-1)
    hess = np.empty(dims + (3, 3))
    for a in range(3):
        hess[..., a, a] = 2.0 * c[..., 4 + a, 0] / h[a] ** 2
    for col, (a, b) in zip((7, 8, 9), ((0, 1), (0, 2), (1, 2))):
        hess[..., a, b] = hess[..., b, a] = c[..., col, 0] / (h[a] * h[b])
    with np.errstate(invalid="ignore"):
        nu = c[..., 0, 4:7] / np.linalg.norm(c[..., 0, 4:7], axis=-1, keepdims=True)
    sheet = LagrangianSheet(
        r=float(r),
        chart=chart,
        f=c[..., 0, 0],
        df=df,
        hessian=hess,
        g=c[..., 0, 1:3],
        nu=nu,
        distance=c[..., 0, 3],
        resolved=resolved.reshape(dims),
        residual=residual.reshape(dims),
        metadata={"n_rays": n_rays, "p_max": p_max, "dp": dp, "fit_radius": fit_radius},
    )
    logger.info(f"Lagrangian sheet r={r}: {int(resolved.sum())}/{n_nodes} chart nodes resolved")
    return sheet


def sample_lagrangian_family(
    model: VelocityModel, r_values: Sequence[float], chart: GridSpec, **kwargs: Any
) -> LagrangianFamily:
    r = np.asarray(sorted(float(v) for v in r_values))
    sheets = [sample_lagrangian(model, rv, chart, **kwargs) for rv in r]
    return LagrangianFamily(r, sheets)


def retrace_check(
    model: VelocityModel,
    sheet: LagrangianSheet,
    n: int,
    rng: np.random.Generator,
    tol_fraction: float = 1e-4,
    dp: float | None = None,
) -> dict[str, Any]:
    """
    Re-trace rays from (0, 0, r) with the fitted take-off and distance of
    resolved nodes and compare the endpoints with (x1, x2, f).
    """
    cells = np.argwhere(sheet.resolved)
    if len(cells) == 0:
        return {"checked": 0, "fraction_ok": 1.0, "max_error": 0.0}
    picks = cells[rng.choice(len(cells), size=min(n, len(cells)), replace=False)]
    receiver = np.array([0.0, 0.0, sheet.r])
    lo = np.asarray(sheet.chart.origin)
    hi = np.asarray(sheet.chart.upper)
    zs = sheet.f[sheet.resolved]
    diameter = float(np.linalg.norm([hi[0] - lo[0], hi[1] - lo[1], np.ptp(zs) + sheet.r]))
    tol = tol_fraction * max(diameter, 1.0)
    errors = []
    for index in picks:
        index = tuple(index)
        p = float(sheet.distance[index])
        fan = trace_fan(
            model, receiver, sheet.nu[index][None, :], p, dp or p / 400.0, stop_at_surface=False
        )
        target, _ = sheet.node(index)
        errors.append(float(np.linalg.norm(fan.x[-1, 0] - target)))
    errors_ = np.asarray(errors)
    return {
        "checked": int(errors_.size),
        "fraction_ok": float(np.mean(errors_ <= tol)),
        "max_error": float(errors_.max()),
        "tol": tol,
    }
