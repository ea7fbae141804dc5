"""
Numerical singularity classification of the projections of a canonical relation.

All tests use intrinsic derivatives at a corank-one point: with K the kernel of
the Jacobian J and W its cokernel, the second intrinsic derivative is
W^T (d_a J) b for a, b in K, and the critical set has the normals
n_j = W^T (d_{q_j} J) k. Derivatives of J are centered differences of the
analytic Jacobians.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from .relations import (
    CanonicalPoint,
    SampleSpec,
    analytic_jacobians,
    critical_surfaces,
    n_source_params,
    point_from_params,
    sample_sigma1,
    sample_sigma2,
    walkaway_exceptional,
)

logger = logging.getLogger(__name__)

RANK_TOL = 1e-7
TRANSVERSE_TOL = 1e-6

REGULAR = "regular"
FOLD = "fold"
BLOWDOWN = "blowdown"
SUBMERSION_WITH_FOLDS = "submersion_with_folds"
CROSS_CAP = "cross_cap_candidate"
DEGENERATE = "degenerate_other"

NO_SURFACE = "none"
SIGMA1 = "Sigma1"
SIGMA2 = "Sigma2"
SIGMA12 = "Sigma_intersection"
UNASSIGNED = "unassigned"


@dataclass
class SingularityLabel:
    corank: int
    label: str
    surface: str
    nonradial: bool
    margin: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class SingularityReport:
    left: SingularityLabel
    right: SingularityLabel
    coranks_equal: bool
    point: CanonicalPoint

    def to_dict(self) -> dict[str, Any]:
        return {
            "point": self.point.to_dict(),
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
            "coranks_equal": self.coranks_equal,
        }


def numeric_rank(J: np.ndarray, rank_tol: float = RANK_TOL) -> tuple[int, np.ndarray, np.ndarray, np.ndarray]:
    """Rank with singular values below rank_tol * sigma_max treated as zero."""
    U, sv, Vt = np.linalg.svd(J)
    rank = int(np.sum(sv > rank_tol * sv[0]))
    return rank, U, sv, Vt


def jacobian_derivatives(point: CanonicalPoint, rel_step: float = 1e-5) -> tuple[np.ndarray, np.ndarray]:
    """d JL / d q_j and d JR / d q_j stacked along a leading parameter axis."""
    q0 = point.params
    scale = max(point.A, point.B, 1.0)
    dL, dR = [], []
    for j in range(q0.size):
        h = rel_step * (abs(q0[j]) if j == q0.size - 1 else scale)
        qp, qm = q0.copy(), q0.copy()
        qp[j] += h
        qm[j] -= h
        if point.kind == "walkaway" and j == 0:
            qm[j] = max(qm[j], 0.5 * q0[j])
        if qm[point.n_s + 3] <= 0:
            qm[point.n_s + 3] = q0[point.n_s + 3]
        Lp, Rp = analytic_jacobians(point_from_params(point.kind, qp, point.c, point.s0))
        Lm, Rm = analytic_jacobians(point_from_params(point.kind, qm, point.c, point.s0))
        dL.append((Lp - Lm) / (qp[j] - qm[j]))
        dR.append((Rp - Rm) / (qp[j] - qm[j]))
    return np.stack(dL), np.stack(dR)


def _second(dJ: np.ndarray, w: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """w^T D^2 f(a, b) from stacked Jacobian derivatives."""
    return float(w @ np.einsum("j,jmn,n->m", a, dJ, b))


def _critical_normals(dJ: np.ndarray, W: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Rows W_i^T (d_q J) k_l over all cokernel/kernel pairs."""
    rows = [np.einsum("m,jmn,n->j", W[:, i], dJ, K[:, l]) for i in range(W.shape[1]) for l in range(K.shape[1])]
    return np.array(rows)


def one_form(point: CanonicalPoint, J: np.ndarray, side: str) -> np.ndarray:
    """Canonical one-form pulled back to the intrinsic coordinates."""
    if side == "right":
        return point.eta @ J[:3]
    # sigma.ds + rho.dr + tau.dt
    return point.left_fiber @ J[: point.n_s + 2]


def nonradiality_margin(a: np.ndarray, normals: np.ndarray) -> float:
    """|a restricted to the critical set's tangent space| / |a|"""
    norm_a = float(np.linalg.norm(a))
    if norm_a == 0.0:
        return 0.0
    if normals.size == 0:
        return 1.0
    Q, _ = np.linalg.qr(normals.T)
    tangent = a - Q @ (Q.T @ a)
    return float(np.linalg.norm(tangent) / norm_a)


def _surface(point: CanonicalPoint, tol: float) -> tuple[str, np.ndarray | None]:
    """Surface name and the gradient of its analytic defining function, if any."""
    if point.kind == "dense":
        return NO_SURFACE, None
    k = point.n_s
    scale = max(point.A, point.B, 1.0)
    f1, f2 = critical_surfaces(point.kind, point.s, point.r, point.y, point.s0)
    on1 = abs(f1) <= tol * scale
    on2 = abs(f2) <= tol * (scale if point.kind == "walkaway" else 1.0)
    if on1 and on2:
        return SIGMA12, None
    if on1:
        grad = np.zeros(point.params.size)
        grad[k + 2] = 1.0
        return SIGMA1, grad
    if on2:
        q0 = point.params
        grad = np.zeros(q0.size)
        for j in range(q0.size - 1):
            h = 1e-6 * scale
            qp, qm = q0.copy(), q0.copy()
            qp[j] += h
            qm[j] -= h
            fp = critical_surfaces(point.kind, qp[:k], qp[k], qp[k + 1 : k + 4], point.s0)[1]
            fm = critical_surfaces(point.kind, qm[:k], qm[k], qm[k + 1 : k + 4], point.s0)[1]
            grad[j] = (fp - fm) / (2 * h)
        return SIGMA2, grad
    return NO_SURFACE, None


def _classify_map(
    J: np.ndarray,
    dJ: np.ndarray,
    point: CanonicalPoint,
    side: str,
    surface: str,
    defining: np.ndarray | None,
    rank_tol: float,
) -> SingularityLabel:
    n_out, n_in = J.shape
    rank, U, sv, Vt = numeric_rank(J, rank_tol)
    full = min(n_out, n_in)
    corank = full - rank
    a = one_form(point, J, side)
    if corank == 0:
        return SingularityLabel(0, REGULAR, NO_SURFACE, True, 1.0)
    # singular off every analytic surface (dense array, or numerics)
    if surface == NO_SURFACE:
        surface = UNASSIGNED
    if corank >= 2 or surface == SIGMA12:
        return SingularityLabel(corank, DEGENERATE, surface, False, 0.0)

    K = Vt[rank:].T  # kernel, n_in - rank columns
    W = U[:, rank:]  # cokernel, n_out - rank columns
    normals = _critical_normals(dJ, W, K)
    scale = sv[0] / max(point.A, point.B, 1.0)

    if n_out == n_in:
        k = K[:, 0]
        if np.linalg.norm(normals) <= TRANSVERSE_TOL * scale:
            return SingularityLabel(corank, DEGENERATE, surface, False, 0.0)
        n = defining if defining is not None else normals[0]
        transverse = abs(n @ k) > TRANSVERSE_TOL * np.linalg.norm(n) * np.linalg.norm(k)
        label = FOLD if transverse else BLOWDOWN
        margin = nonradiality_margin(a, n[None, :])
    elif n_in > n_out:
        # submersion with folds: Hessian of the cokernel component on the kernel
        w = W[:, 0]
        H = np.array([[_second(dJ, w, K[:, i], K[:, j]) for j in range(K.shape[1])] for i in range(K.shape[1])])
        H = 0.5 * (H + H.T)
        ok = abs(np.linalg.det(H)) > TRANSVERSE_TOL * max(np.linalg.norm(H) ** 2, 1e-300)
        label = SUBMERSION_WITH_FOLDS if ok else DEGENERATE
        margin = nonradiality_margin(a, normals)
    else:
        # cross cap: d chi has rank q and does not annihilate the kernel
        k = K[:, 0]
        q = W.shape[1]
        dchi = np.array([np.einsum("m,jmn,n->j", W[:, i], dJ, k) for i in range(q)])
        chi_rank = int(np.sum(np.linalg.svd(dchi, compute_uv=False) > rank_tol * max(np.abs(dchi).max(), 1e-300)))
        along = dchi @ k
        ok = chi_rank == q and np.linalg.norm(along) > TRANSVERSE_TOL * np.linalg.norm(dchi)
        label = CROSS_CAP if ok else DEGENERATE
        margin = nonradiality_margin(a, dchi)
    return SingularityLabel(corank, label, surface, margin > TRANSVERSE_TOL, margin)


def classify_singularity(
    point: CanonicalPoint, rank_tol: float = RANK_TOL, surface_tol: float = 1e-8
) -> SingularityReport:
    """
    Classify both projections at a point of the relation.

    Equidimensional corank-one points are folds when the kernel is transverse
    to the critical set and blowdowns when it is tangent. The analytic defining
    function of the critical surface is used when the point lies on one.
    """
    JL, JR = analytic_jacobians(point)
    dL, dR = jacobian_derivatives(point)
    surface, defining = _surface(point, surface_tol)
    left = _classify_map(JL, dL, point, "left", surface, defining, rank_tol)
    right = _classify_map(JR, dR, point, "right", surface, defining, rank_tol)
    equal = left.corank == right.corank
    if not equal:
        logger.warning(f"Coranks differ at {point.params.tolist()}: left {left.corank}, right {right.corank}")
    return SingularityReport(left, right, equal, point)


EXPECTED = {
    ("crosswell", SIGMA1): (FOLD, BLOWDOWN),
    ("crosswell", SIGMA2): (FOLD, FOLD),
    ("walkaway", SIGMA1): (FOLD, BLOWDOWN),
    ("walkaway", SIGMA2): (FOLD, FOLD),
}


def singularity_census(
    spec: SampleSpec, n: int, rng: np.random.Generator, exceptional_tol: float = 1e-3
) -> dict[str, Any]:
    """
    Classify n points on each critical surface and compare with the expected labels.

    Walkaway points within exceptional_tol (relative) of the exceptional set are
    counted separately and not classified.
    """
    if spec.kind == "dense":
        raise ValueError("singularity census needs the crosswell or walkaway geometry")
    k = n_source_params(spec.kind)
    records = []
    summary: dict[str, Any] = {}
    for name, sampler in ((SIGMA1, sample_sigma1), (SIGMA2, sample_sigma2)):
        params, excluded = sampler(spec, n, rng)
        agree = near_exceptional = 0
        for q in params:
            if spec.kind == "walkaway" and name == SIGMA2:
                s, r, y = float(q[0]), float(q[k]), q[k + 1 : k + 4]
                value = walkaway_exceptional(s, r, y)
                size = s * s * float(np.sum((y - [0, 0, r]) ** 2)) * (y[1] ** 2 + y[2] ** 2)
                if abs(value) <= exceptional_tol * size:
                    near_exceptional += 1
                    continue
            report = classify_singularity(point_from_params(spec.kind, q, spec.c, spec.s0))
            expected = EXPECTED[(spec.kind, name)]
            match = (
                (report.left.label, report.right.label) == expected
                and report.coranks_equal
                and report.left.surface == name
            )
            agree += int(match)
            rec = report.to_dict()
            rec.update(sampled_on=name, expected=list(expected), agrees=bool(match))
            records.append(rec)
        classified = len(params) - near_exceptional
        summary[name] = {
            "classified": classified,
            "agree": agree,
            "agreement": agree / classified if classified else 1.0,
            "excluded_intersection": excluded,
            "near_exceptional": near_exceptional,
        }
        logger.info(f"{spec.kind} {name}: {agree}/{classified} labels agree")
    return {"kind": spec.kind, "summary": summary, "records": records}
