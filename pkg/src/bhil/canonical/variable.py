"""
Folded-cross-cap diagnostics for the dense array over a variable background.

The canonical relation is parametrised by q = (x1, x2, r, p3, alpha1, alpha2, tau):
(x1, x2, r, p3) locate a point of the receiver flowout through the chart
x3 = f(x1, x2, r, p3), alpha holds the horizontal components of the incident
unit direction at that point and tau is dual to time. The right projection is

    (x1, x2, f; tau (u / c0(x) + xi_ref)),  u = (alpha1, alpha2, sqrt(1 - |alpha|^2))

and the left one (r, s, t_ref + t_inc; rho, sigma, tau), where the source s and
t_inc come from tracing the incident ray back up to the surface. The critical
set is {f_p3 = f_r = 0}.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..core.model import VelocityModel
from ..raytrace.caustics import FOLD, classify_caustics
from ..raytrace.lagrangian import LagrangianFamily
from ..raytrace.tracer import EXITED_SURFACE, trace_fan
from .singularity import RANK_TOL, TRANSVERSE_TOL, nonradiality_margin, numeric_rank

logger = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
VACUOUS_PASS = "vacuous_pass"

DEFAULT_ALPHAS = ((0.0, 0.0), (0.3, 0.0), (0.0, 0.3), (-0.25, 0.2))

# chart-derivative order used below
Q_NAMES = ("x1", "x2", "r", "p3", "alpha1", "alpha2", "tau")


@dataclass
class SigmaPoint:
    """A point of {f_p3 = f_r = 0} with the flowout data interpolated there."""

    x: np.ndarray
    r: float
    p3: float
    df: np.ndarray  # (f_x1, f_x2, f_r, f_p3)
    d_fp3: np.ndarray  # gradient of f_p3 over (x1, x2, r, p3)
    d_fr: np.ndarray  # gradient of f_r over (x1, x2, r, p3)
    g: np.ndarray
    dg: np.ndarray  # (2, 4)
    t_ref: float
    dt_ref: np.ndarray
    nu3: float
    dnu3: np.ndarray
    f_pp: float

    def normals(self) -> np.ndarray:
        """Rows d(f_p3) and d(f_r) in the seven coordinates."""
        out = np.zeros((2, 7))
        out[0, :4] = self.d_fp3
        out[1, :4] = self.d_fr
        return out


@dataclass
class SampleDiagnostics:
    point: dict[str, Any]
    alpha: tuple[float, float]
    rank_right: int
    rank_left: int
    sigma_smooth: bool
    submersion_with_folds: bool
    cross_cap: bool
    minor: float
    minor_relative: float
    f_x1: float
    f_pp: float
    margin_right: float
    margin_left: float
    violations: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return FAIL if self.violations else PASS

    def to_dict(self) -> dict[str, Any]:
        return {
            "point": self.point,
            "alpha": list(self.alpha),
            "rank_dpiR": self.rank_right,
            "rank_dpiL": self.rank_left,
            "sigma_smooth": self.sigma_smooth,
            "submersion_with_folds": self.submersion_with_folds,
            "cross_cap": self.cross_cap,
            "minor": self.minor,
            "minor_relative": self.minor_relative,
            "f_x1": self.f_x1,
            "f_pp": self.f_pp,
            "nonradiality_margin_right": self.margin_right,
            "nonradiality_margin_left": self.margin_left,
            "verdict": self.verdict,
            "violations": self.violations,
        }


@dataclass
class VariableReport:
    verdict: str
    samples: list[SampleDiagnostics]
    skipped: int
    muted: int
    off_sigma: dict[str, int]
    tol_fold: float

    def to_dict(self) -> dict[str, Any]:
        failures: dict[str, int] = {}
        for s in self.samples:
            for v in s.violations:
                failures[v] = failures.get(v, 0) + 1
        return {
            "verdict": self.verdict,
            "n_samples": len(self.samples),
            "skipped_unresolved": self.skipped,
            "muted": self.muted,
            "off_sigma_rank_check": self.off_sigma,
            "tol_fold": self.tol_fold,
            "violations": failures,
            "max_abs_f_x1": max((abs(s.f_x1) for s in self.samples), default=0.0),
        }


def _grad4(arr: np.ndarray, family: LagrangianFamily) -> np.ndarray:
    """Gradient of a stacked (r, x1, x2, p3) field, last axis ordered (x1, x2, r, p3)."""
    h = family.chart.spacing
    if len(family.r) > 1:
        d_r = np.gradient(arr, family.r, axis=0)
    else:
        d_r = np.zeros_like(arr)
    return np.stack(
        [
            np.gradient(arr, h[0], axis=1),
            np.gradient(arr, h[1], axis=2),
            d_r,
            np.gradient(arr, h[2], axis=3),
        ],
        axis=-1,
    )


def _bilinear_root(P: np.ndarray, R: np.ndarray, iters: int = 30) -> tuple[float, float] | None:
    """Common zero of two bilinear interpolants on the unit square; P[i, j] at (a=i, b=j)."""

    def ev(V: np.ndarray, a: float, b: float) -> tuple[float, float, float]:
        v = V[0, 0] * (1 - a) * (1 - b) + V[1, 0] * a * (1 - b) + V[0, 1] * (1 - a) * b + V[1, 1] * a * b
        va = (V[1, 0] - V[0, 0]) * (1 - b) + (V[1, 1] - V[0, 1]) * b
        vb = (V[0, 1] - V[0, 0]) * (1 - a) + (V[1, 1] - V[1, 0]) * a
        return v, va, vb

    a = b = 0.5
    scale = max(np.abs(P).max(), 1e-300), max(np.abs(R).max(), 1e-300)
    for _ in range(iters):
        p, pa, pb = ev(P, a, b)
        r, ra, rb = ev(R, a, b)
        det = pa * rb - pb * ra
        if det == 0.0:
            return None
        da = (p * rb - pb * r) / det
        db = (pa * r - p * ra) / det
        a, b = a - da, b - db
        if abs(da) + abs(db) < 1e-13:
            break
    p, _, _ = ev(P, a, b)
    r, _, _ = ev(R, a, b)
    inside = -1e-9 <= a <= 1 + 1e-9 and -1e-9 <= b <= 1 + 1e-9
    if inside and abs(p) <= 1e-8 * scale[0] and abs(r) <= 1e-8 * scale[1]:
        return float(a), float(b)
    return None


class _FamilyFields:
    """Stacked flowout fields and their chart derivatives."""

    def __init__(self, family: LagrangianFamily) -> None:
        self.family = family
        f = family.stack("f")
        df = family.stack("df")
        hess = family.stack("hessian")
        self.resolved = family.stack("resolved")
        h = family.chart.spacing
        self.f_r = np.gradient(f, family.r, axis=0) if len(family.r) > 1 else np.full_like(f, np.nan)
        self.f_x1 = df[..., 0]
        self.f_x2 = df[..., 1]
        self.f_p3 = df[..., 2]
        self.f_pp = hess[..., 2, 2]
        fr_grad = _grad4(self.f_r, family)
        fp_r = np.gradient(self.f_p3, family.r, axis=0) if len(family.r) > 1 else np.zeros_like(f)
        self.d_fp3 = np.stack([hess[..., 0, 2], hess[..., 1, 2], fp_r, hess[..., 2, 2]], axis=-1)
        self.d_fr = fr_grad
        g = family.stack("g")
        self.g = g
        self.dg = np.stack([_grad4(g[..., 0], family), _grad4(g[..., 1], family)], axis=-2)
        self.t_ref = family.stack("distance")
        self.dt_ref = _grad4(self.t_ref, family)
        self.nu3 = family.stack("nu")[..., 2]
        self.dnu3 = _grad4(self.nu3, family)
        self.h = h

    def corners(self, j: int, i1: int, i2: int, k: int) -> tuple[tuple[int, ...], ...]:
        return ((j, i1, i2, k), (j + 1, i1, i2, k), (j, i1, i2, k + 1), (j + 1, i1, i2, k + 1))

    def interpolate(self, j: int, i1: int, i2: int, k: int, a: float, b: float) -> SigmaPoint:
        c00, c10, c01, c11 = self.corners(j, i1, i2, k)
        w = ((1 - a) * (1 - b), a * (1 - b), (1 - a) * b, a * b)

        def at(arr: np.ndarray) -> np.ndarray:
            return w[0] * arr[c00] + w[1] * arr[c10] + w[2] * arr[c01] + w[3] * arr[c11]

        family = self.family
        r = float((1 - a) * family.r[j] + a * family.r[j + 1])
        x1, x2, p3_lo = family.chart.position_of((i1, i2, k))
        p3 = float(p3_lo + b * self.h[2])
        f = float(at(family.stack("f")))
        return SigmaPoint(
            x=np.array([x1, x2, f]),
            r=r,
            p3=p3,
            df=np.array([at(self.f_x1), at(self.f_x2), at(self.f_r), at(self.f_p3)]),
            d_fp3=at(self.d_fp3),
            d_fr=at(self.d_fr),
            g=at(self.g),
            dg=at(self.dg),
            t_ref=float(at(self.t_ref)),
            dt_ref=at(self.dt_ref),
            nu3=float(at(self.nu3)),
            dnu3=at(self.dnu3),
            f_pp=float(at(self.f_pp)),
        )


def locate_sigma(family: LagrangianFamily, candidate_factor: float = 0.1) -> tuple[list[SigmaPoint], int]:
    """
    Points where f_p3 and f_r vanish together, one per (r, p3) grid cell of
    each chart column.

    Returns:
        (points, count of candidate cells skipped because a corner is unresolved)
    """
    if len(family.r) < 2:
        return [], 0
    fields = _FamilyFields(family)
    res = fields.resolved
    fp, fr = fields.f_p3, fields.f_r
    med_p = float(np.nanmedian(np.abs(fp[res]))) if np.any(res) else 0.0
    med_r = float(np.nanmedian(np.abs(fr[res]))) if np.any(res) else 0.0
    nr = len(family.r)
    n1, n2, n3 = family.chart.dims
    points: list[SigmaPoint] = []
    skipped = 0
    for i1 in range(n1):
        for i2 in range(n2):
            for j in range(nr - 1):
                for k in range(n3 - 1):
                    cs = fields.corners(j, i1, i2, k)
                    ok = [bool(res[c]) for c in cs]
                    if not all(ok):
                        near = any(
                            o and abs(fp[c]) <= candidate_factor * med_p and abs(fr[c]) <= candidate_factor * med_r
                            for o, c in zip(ok, cs)
                        )
                        skipped += int(near)
                        continue
                    P = np.array([[fp[cs[0]], fp[cs[2]]], [fp[cs[1]], fp[cs[3]]]])
                    R = np.array([[fr[cs[0]], fr[cs[2]]], [fr[cs[1]], fr[cs[3]]]])
                    if P.min() > 0 or P.max() < 0 or R.min() > 0 or R.max() < 0:
                        continue
                    root = _bilinear_root(P, R)
                    if root is None:
                        continue
                    pt = fields.interpolate(j, i1, i2, k, *root)
                    if all(np.all(np.isfinite(v)) for v in (pt.dg, pt.dt_ref, pt.dnu3, pt.d_fr, pt.d_fp3)):
                        points.append(pt)
                    else:
                        skipped += 1
    logger.info(f"Critical set: {len(points)} points located, {skipped} candidate cells unresolved")
    return points, skipped


def incident_rays(
    model: VelocityModel, x: np.ndarray, alpha: np.ndarray, step: float = 1e-3, dp: float | None = None
) -> dict[str, np.ndarray]:
    """
    Surface point, traveltime and surface covector of the incident ray through x
    with horizontal direction alpha, and their partials over (x1, x2, x3, alpha1, alpha2).
    """
    base = np.concatenate([x, alpha])
    offsets = [np.zeros(5)]
    for j in range(5):
        e = np.zeros(5)
        e[j] = step
        offsets.extend([e, -e])
    Q = base[None, :] + np.array(offsets)
    up = np.column_stack([-Q[:, 3], -Q[:, 4], -np.sqrt(np.clip(1.0 - Q[:, 3] ** 2 - Q[:, 4] ** 2, 0.0, None))])
    c_lo = float(np.min(model.speed(np.array([x, [x[0], x[1], 0.0]]))))
    p_max = 4.0 * (x[2] + 1.0) / max(c_lo, 1e-6)
    fan = trace_fan(model, Q[:, :3], up, p_max, dp or x[2] / 400.0)
    hit = fan.status == EXITED_SURFACE
    S = fan.crossing_x[:, :2]
    T = fan.crossing_p
    Xi = fan.crossing_xi[:, :2]
    if not np.all(hit):
        nan = np.full(5, np.nan)
        return {"s": S[0], "t": np.array(T[0]), "xi": Xi[0], "ds": np.vstack([nan, nan]), "dt": nan, "dxi": np.vstack([nan, nan])}
    ds = np.column_stack([(S[1 + 2 * j] - S[2 + 2 * j]) / (2 * step) for j in range(5)])
    dt = np.array([(T[1 + 2 * j] - T[2 + 2 * j]) / (2 * step) for j in range(5)])
    dxi = np.column_stack([(Xi[1 + 2 * j] - Xi[2 + 2 * j]) / (2 * step) for j in range(5)])
    return {"s": S[0], "t": np.array(T[0]), "xi": Xi[0], "ds": ds, "dt": dt, "dxi": dxi}


def _chain(df: np.ndarray) -> np.ndarray:
    """d(x1, x2, x3, alpha1, alpha2) / d(x1, x2, r, p3, alpha1, alpha2, tau), shape (5, 7)."""
    M = np.zeros((5, 7))
    M[0, 0] = M[1, 1] = 1.0
    M[2, :4] = df
    M[3, 4] = M[4, 5] = 1.0
    return M


def right_jacobian(model: VelocityModel, pt: SigmaPoint, alpha: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """dpiR (6, 7) and eta."""
    a1, a2 = alpha
    u3 = np.sqrt(1.0 - a1 * a1 - a2 * a2)
    u = np.array([a1, a2, u3])
    xi = np.array([pt.g[0], pt.g[1], pt.p3])
    c = float(model.speed(pt.x))
    grad_c = model.gradient(pt.x)
    eta = tau * (u / c + xi)

    J = np.zeros((6, 7))
    J[0, 0] = J[1, 1] = 1.0
    J[2, :4] = pt.df
    dx = np.array([[1.0, 0.0, pt.df[0]], [0.0, 1.0, pt.df[1]], [0.0, 0.0, pt.df[2]], [0.0, 0.0, pt.df[3]]])
    dxi = np.zeros((3, 4))
    dxi[:2] = pt.dg
    dxi[2, 3] = 1.0
    for m in range(4):
        J[3:, m] = tau * (-u * (grad_c @ dx[m]) / c**2 + dxi[:, m])
    du = np.array([[1.0, 0.0, -a1 / u3], [0.0, 1.0, -a2 / u3]])
    J[3:, 4] = tau * du[0] / c
    J[3:, 5] = tau * du[1] / c
    J[3:, 6] = u / c + xi
    return J, eta


def left_jacobian(
    model: VelocityModel, pt: SigmaPoint, alpha: np.ndarray, tau: float, rays: dict[str, np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """dpiL (8, 7) with rows (r, s1, s2, t, rho, sigma1, sigma2, tau) and the left fiber."""
    C = _chain(pt.df)
    R = np.array([0.0, 0.0, pt.r])
    cR = float(model.speed(R))
    dcR = float(model.gradient(R)[2])
    J = np.zeros((8, 7))
    J[0, 2] = 1.0
    J[1:3] = rays["ds"] @ C
    J[3, :4] = pt.dt_ref
    J[3] += rays["dt"] @ C
    J[4, :4] = tau * pt.dnu3 / cR
    J[4, 2] -= tau * pt.nu3 * dcR / cR**2
    J[4, 6] = pt.nu3 / cR
    J[5:7] = -tau * (rays["dxi"] @ C)
    J[5:7, 6] = -rays["xi"]
    J[7, 6] = 1.0
    fiber = np.array([tau * pt.nu3 / cR, -tau * rays["xi"][0], -tau * rays["xi"][1], tau])
    return J, fiber


def _diagnose(
    model: VelocityModel, pt: SigmaPoint, alpha: np.ndarray, tau: float, tol_fold: float, minor_tol: float
) -> SampleDiagnostics | None:
    JR, eta = right_jacobian(model, pt, alpha, tau)
    rays = incident_rays(model, pt.x, alpha)
    if not np.all(np.isfinite(rays["ds"])):
        return None
    JL, fiber = left_jacobian(model, pt, alpha, tau, rays)
    N = pt.normals()
    violations = []

    rank_r, _, _, Vt = numeric_rank(JR, RANK_TOL)
    rank_l, _, _, VtL = numeric_rank(JL, RANK_TOL)
    if rank_r != 5:
        violations.append("rank_dpiR")
    if rank_l != 6:
        violations.append("corank_dpiL")

    sv_n = np.linalg.svd(N[:, :4], compute_uv=False)
    smooth = bool(sv_n[1] > TRANSVERSE_TOL * max(sv_n[0], 1e-300))
    if not smooth:
        violations.append("critical_set_smooth")

    K = Vt[rank_r:].T if rank_r < 7 else np.zeros((7, 0))
    transverse = False
    if K.shape[1] == 2:
        M = N @ K
        transverse = bool(abs(np.linalg.det(M)) > TRANSVERSE_TOL * max(np.linalg.norm(N) ** 2, 1e-300))
    if not transverse:
        violations.append("submersion_with_folds")

    kL = VtL[-1]
    cross_cap = bool(np.linalg.norm(N @ kL) > TRANSVERSE_TOL * np.linalg.norm(N))
    if not cross_cap:
        violations.append("cross_cap_kernel_transverse")
    if abs(pt.f_pp) <= tol_fold:
        violations.append("fold_f_pp")

    # d(s1, s2, sigma1, sigma2) / d(x1, x2, alpha1, alpha2) with x3 held fixed
    cols = [0, 1, 3, 4]
    block = np.vstack([rays["ds"][:, cols], -tau * rays["dxi"][:, cols]])
    minor = float(np.linalg.det(block))
    norms = np.prod(np.linalg.norm(block, axis=0))
    minor_rel = abs(minor) / norms if norms > 0 else 0.0
    if minor_rel <= minor_tol:
        violations.append("source_ray_minor")

    a_right = eta @ JR[:3]
    a_left = fiber @ JL[:4]
    return SampleDiagnostics(
        point={"x": pt.x.tolist(), "r": pt.r, "p3": pt.p3},
        alpha=(float(alpha[0]), float(alpha[1])),
        rank_right=rank_r,
        rank_left=rank_l,
        sigma_smooth=smooth,
        submersion_with_folds=transverse,
        cross_cap=cross_cap,
        minor=minor,
        minor_relative=float(minor_rel),
        f_x1=float(pt.df[0]),
        f_pp=pt.f_pp,
        margin_right=nonradiality_margin(a_right, N),
        margin_left=nonradiality_margin(a_left, N),
        violations=violations,
    )


def _off_sigma(model: VelocityModel, family: LagrangianFamily, tau: float) -> dict[str, int]:
    """Rank of dpiR at single-sheet fold caustics where f_r does not vanish."""
    if len(family.r) < 2:
        return {"checked": 0, "rank6": 0}
    fields = _FamilyFields(family)
    report = classify_caustics(family)
    checked = rank6 = 0
    for rec in report.records:
        if rec.kind != FOLD:
            continue
        idx = (rec.r_index,) + rec.node
        if not fields.resolved[idx] or not np.all(np.isfinite(fields.dg[idx])):
            continue
        pt = SigmaPoint(
            x=rec.x,
            r=rec.r,
            p3=rec.p3,
            df=np.array([rec.f_x1, rec.f_x2, fields.f_r[idx], rec.f_p3]),
            d_fp3=fields.d_fp3[idx],
            d_fr=fields.d_fr[idx],
            g=rec.xi[:2],
            dg=fields.dg[idx],
            t_ref=float(fields.t_ref[idx]),
            dt_ref=fields.dt_ref[idx],
            nu3=float(fields.nu3[idx]),
            dnu3=fields.dnu3[idx],
            f_pp=rec.f_pp,
        )
        JR, _ = right_jacobian(model, pt, np.zeros(2), tau)
        checked += 1
        rank6 += int(numeric_rank(JR, RANK_TOL)[0] == 6)
    return {"checked": checked, "rank6": rank6}


def dense_variable_diagnostics(
    model: VelocityModel,
    family: LagrangianFamily,
    alphas: Sequence[Sequence[float]] = DEFAULT_ALPHAS,
    tau: float = 1.0,
    mute_angle: float = 0.1,
    tol_fold_factor: float = 1e-2,
    minor_tol: float = 1e-6,
    max_points: int = 200,
) -> VariableReport:
    """
    Test the folded-cross-cap conditions at sampled points of the critical set.

    Args:
        model: Background speed the family was traced in
        family: Receiver flowouts for at least two receiver depths
        alphas: Horizontal components of the incident directions tried at each point
        tau: Frequency variable
        mute_angle: Incident/scattered pairs within this angle of back-scatter are skipped
        tol_fold_factor: |f_pp| tolerance relative to its median over resolved nodes
        minor_tol: Relative threshold for the source-ray minor
        max_points: Cap on critical-set points examined

    Returns:
        VariableReport; vacuous_pass when the critical set is empty
    """
    points, skipped = locate_sigma(family)
    resolved = family.stack("resolved")
    fpp = np.abs(family.stack("hessian")[..., 2, 2][resolved])
    tol_fold = tol_fold_factor * float(np.median(fpp)) if fpp.size else 0.0
    samples: list[SampleDiagnostics] = []
    muted = 0
    for pt in points[:max_points]:
        c = float(model.speed(pt.x))
        xi = np.array([pt.g[0], pt.g[1], pt.p3])
        for alpha in alphas:
            alpha = np.asarray(alpha, dtype=float)
            u = np.array([alpha[0], alpha[1], np.sqrt(1.0 - alpha @ alpha)])
            if np.linalg.norm(u + c * xi) < 2.0 * np.sin(0.5 * mute_angle):
                muted += 1
                continue
            diag = _diagnose(model, pt, alpha, tau, tol_fold, minor_tol)
            if diag is None:
                skipped += 1
                continue
            samples.append(diag)
    off = _off_sigma(model, family, tau)
    if not samples:
        verdict = VACUOUS_PASS
    else:
        verdict = PASS if all(s.verdict == PASS for s in samples) else FAIL
    report = VariableReport(verdict, samples, skipped, muted, off, tol_fold)
    logger.info(f"Dense variable diagnostics: {verdict} over {len(samples)} samples ({skipped} skipped)")
    return report
