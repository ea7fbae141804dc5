"""
Caustic detection and fold classification on Lagrangian sheets.

A caustic of the sheet for receiver r is a zero of f_p3; it is a fold when
f_pp does not vanish there. For an r-indexed family the borehole-level test
additionally checks, where f_r also vanishes, that d(f_p3) and d(f_r) are
independent over (x1, x2, r, p3) and that the (r, p3) Hessian of f is
nondegenerate.
"""

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .lagrangian import LagrangianFamily, LagrangianSheet

logger = logging.getLogger(__name__)

FOLD = "fold"
DEGENERATE = "degenerate"
UNRESOLVED = "unresolved"

NO_CAUSTICS = "no_caustics"
AT_MOST_FOLDS = "at_most_folds"
WORSE_THAN_FOLD = "worse_than_fold"
INCONCLUSIVE = "inconclusive"


@dataclass
class CausticRecord:
    r: float
    r_index: int
    node: tuple[int, int, int]
    x: np.ndarray
    xi: np.ndarray
    f_p3: float
    f_pp: float
    f_x1: float
    f_x2: float
    rank_dpiX: int
    kind: str
    marginal: bool = False

    @property
    def p3(self) -> float:
        return float(self.xi[2])

    @property
    def tangent_plane_slope(self) -> float:
        """|grad_(x1, x2) f| of the image plane at the caustic."""
        return float(np.hypot(self.f_x1, self.f_x2))

    def to_dict(self) -> dict[str, Any]:
        return {
            "r": self.r,
            "x": [float(v) for v in self.x],
            "p3": self.p3,
            "f_p3": self.f_p3,
            "f_pp": self.f_pp,
            "kind": self.kind,
            "rank_dpiX": self.rank_dpiX,
            "f_x1": self.f_x1,
            "tangent_plane_slope": self.tangent_plane_slope,
            "marginal": self.marginal,
        }


@dataclass
class CausticReport:
    verdict: str
    records: list[CausticRecord]
    tol_zero: float
    tol_fold: float
    failing_cells: list[dict[str, Any]] = field(default_factory=list)
    family_check: dict[str, Any] = field(default_factory=dict)

    def counts(self) -> dict[str, int]:
        out = {FOLD: 0, DEGENERATE: 0, UNRESOLVED: 0}
        for rec in self.records:
            out[rec.kind] += 1
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "tol_zero": self.tol_zero,
            "tol_fold": self.tol_fold,
            "counts": self.counts(),
            "failing_cells": self.failing_cells,
            "family_check": self.family_check,
        }


def _rank_dpix(df: np.ndarray, tol: float) -> int:
    jac = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], list(df)])
    sv = np.linalg.svd(jac, compute_uv=False)
    return int(np.sum(sv > max(tol, 1e-12)))


def _lerp(a: np.ndarray, b: np.ndarray, s: float) -> np.ndarray:
    return (1.0 - s) * a + s * b


def _hermite_root(a: float, b: float, m_lo: float, m_hi: float, h: float) -> tuple[float, float]:
    """
    Root of f_p3 on one p3 cell and f_pp there.

    f_p3 is modelled by the cubic Hermite interpolant of its values and its
    p3 derivatives at both nodes, so a multiple root between nodes keeps
    f_pp near zero. Returns (s, f_pp) with s the fraction of the cell.
    """
    if a == 0.0:
        return 0.0, float(m_lo)
    if b == 0.0:
        return 1.0, float(m_hi)
    spline = CubicHermiteSpline([0.0, h], [a, b], [m_lo, m_hi])
    root = brentq(lambda p: float(spline(p)), 0.0, h, xtol=1e-14 * max(h, 1.0))
    return root / h, float(spline(root, 1))


def _sheet_records(
    sheet: LagrangianSheet,
    r_index: int,
    tol_zero: float,
    tol_fold: float,
    candidate: float,
    marginal_factor: float,
) -> tuple[list[CausticRecord], list[dict[str, Any]]]:
    records: list[CausticRecord] = []
    failing: list[dict[str, Any]] = []
    fp = sheet.f_p3
    res = sheet.resolved
    n1, n2, n3 = sheet.chart.dims
    h3 = float(sheet.chart.spacing[2])

    def make(index: tuple[int, int, int], upper: tuple[int, int, int]) -> CausticRecord:
        x_lo, xi_lo = sheet.node(index)
        x_hi, xi_hi = sheet.node(upper)
        s, f_pp_cubic = 0.0, None
        if index != upper:
            s, f_pp_cubic = _hermite_root(fp[index], fp[upper], sheet.f_pp[index], sheet.f_pp[upper], h3)
        df = _lerp(sheet.df[index], sheet.df[upper], s)
        f_pp = float(_lerp(sheet.f_pp[index], sheet.f_pp[upper], s))
        # a fold needs both estimates of f_pp away from zero
        if f_pp_cubic is not None and abs(f_pp_cubic) < abs(f_pp):
            f_pp = f_pp_cubic
        degenerate = abs(f_pp) <= tol_fold
        return CausticRecord(
            r=sheet.r,
            r_index=r_index,
            node=index,
            x=_lerp(x_lo, x_hi, s),
            xi=_lerp(xi_lo, xi_hi, s),
            f_p3=float(df[2]),
            f_pp=f_pp,
            f_x1=float(df[0]),
            f_x2=float(df[1]),
            rank_dpiX=_rank_dpix(df, tol_zero),
            kind=DEGENERATE if degenerate else FOLD,
            marginal=degenerate and abs(f_pp) > marginal_factor * tol_fold,
        )

    for i1 in range(n1):
        for i2 in range(n2):
            crossed = np.zeros(n3, dtype=bool)
            for k in range(n3 - 1):
                lo, hi = (i1, i2, k), (i1, i2, k + 1)
                if res[lo] and res[hi]:
                    a, b = fp[lo], fp[hi]
                    if (a != 0.0 and a * b <= 0.0) or (k == 0 and a == 0.0):
                        records.append(make(lo, hi))
                        crossed[k] = crossed[k + 1] = True
                elif res[lo] != res[hi]:
                    good, bad = (lo, hi) if res[lo] else (hi, lo)
                    if abs(fp[good]) <= candidate:
                        rec = make(good, good)
                        rec.kind = UNRESOLVED
                        records.append(rec)
                        failing.append({"r": sheet.r, "cell": list(bad)})
            # touching zeros without a sign change
            for k in range(n3):
                node = (i1, i2, k)
                if res[node] and not crossed[k] and abs(fp[node]) <= tol_zero:
                    records.append(make(node, node))
    return records, failing


def _family_check(
    family: LagrangianFamily, records: list[CausticRecord], fr_factor: float
) -> dict[str, Any]:
    """Independence and Hessian tests where f_p3 and f_r vanish together."""
    if len(family.sheets) < 3:
        return {"checked": 0, "failures": [], "passed": True, "note": "fewer than 3 receiver depths"}
    h = family.chart.spacing
    F = family.stack("f")
    Fp = family.stack("df")[..., 2]
    f_r = np.gradient(F, family.r, axis=0)
    fp_r = np.gradient(Fp, family.r, axis=0)
    fr_x1 = np.gradient(f_r, h[0], axis=1)
    fr_x2 = np.gradient(f_r, h[1], axis=2)
    f_rr = np.gradient(f_r, family.r, axis=0)
    f_rp = np.gradient(f_r, h[2], axis=3)
    hess = family.stack("hessian")
    resolved = np.all(family.stack("resolved"), axis=0)
    scale = float(np.nanmedian(np.abs(f_r[:, resolved]))) if np.any(resolved) else 0.0
    tol_r = fr_factor * scale

    checked = 0
    failures = []
    for rec in records:
        if rec.kind != FOLD:
            continue
        j = rec.r_index
        idx = (j,) + rec.node
        if not resolved[rec.node] or abs(f_r[idx]) > tol_r:
            continue
        checked += 1
        g_fp = np.array([hess[idx][0, 2], hess[idx][1, 2], fp_r[idx], hess[idx][2, 2]])
        g_fr = np.array([fr_x1[idx], fr_x2[idx], f_rr[idx], f_rp[idx]])
        sv = np.linalg.svd(np.vstack([g_fp, g_fr]), compute_uv=False)
        independent = sv[1] > 1e-6 * max(sv[0], 1e-300)
        det = f_rr[idx] * hess[idx][2, 2] - f_rp[idx] ** 2
        nondegenerate = abs(det) > 1e-6 * (abs(f_rr[idx] * hess[idx][2, 2]) + f_rp[idx] ** 2 + 1e-300)
        if not (independent and nondegenerate):
            failures.append(
                {"r": rec.r, "node": list(rec.node), "independent": bool(independent), "hessian_det": float(det)}
            )
    return {"checked": checked, "failures": failures, "passed": not failures, "tol_f_r": tol_r}


def classify_caustics(
    target: LagrangianSheet | LagrangianFamily,
    tol_zero_factor: float = 1e-3,
    tol_fold_factor: float = 1e-2,
    candidate_factor: float = 0.1,
    marginal_factor: float = 0.1,
    fr_factor: float = 1e-2,
) -> CausticReport:
    """
    Locate and classify caustics on a sheet or an r-indexed family.

    Tolerances are relative to the sheet scales: tol_zero to median |f_p3| and
    tol_fold to median |f_pp| over resolved nodes. The verdict is one of
    no_caustics, at_most_folds, worse_than_fold or inconclusive.
    """
    family = target if isinstance(target, LagrangianFamily) else None
    sheets = family.sheets if family else [target]  # type: ignore[list-item]
    fp_all = np.concatenate([np.abs(s.f_p3[s.resolved]) for s in sheets])
    fpp_all = np.concatenate([np.abs(s.f_pp[s.resolved]) for s in sheets])
    if fp_all.size == 0:
        return CausticReport(INCONCLUSIVE, [], 0.0, 0.0, [{"reason": "no resolved chart nodes"}])
    median_fp = float(np.median(fp_all))
    tol_zero = tol_zero_factor * median_fp
    tol_fold = tol_fold_factor * float(np.median(fpp_all))

    records: list[CausticRecord] = []
    failing: list[dict[str, Any]] = []
    for j, sheet in enumerate(sheets):
        recs, bad = _sheet_records(
            sheet, j, tol_zero, tol_fold, candidate_factor * median_fp, marginal_factor
        )
        records.extend(recs)
        failing.extend(bad)

    family_check = _family_check(family, records, fr_factor) if family else {}
    kinds = {rec.kind for rec in records}
    strict_degenerate = any(rec.kind == DEGENERATE and not rec.marginal for rec in records)
    family_ok = family_check.get("passed", True)

    if not records:
        verdict = NO_CAUSTICS
    elif strict_degenerate:
        verdict = WORSE_THAN_FOLD
    elif DEGENERATE in kinds:
        verdict = INCONCLUSIVE if family_ok else WORSE_THAN_FOLD
    elif UNRESOLVED in kinds:
        verdict = INCONCLUSIVE
    elif not family_ok:
        verdict = WORSE_THAN_FOLD
    else:
        verdict = AT_MOST_FOLDS

    report = CausticReport(verdict, records, tol_zero, tol_fold, failing, family_check)
    logger.info(f"Caustic classification: {verdict} {report.counts()}")
    return report
