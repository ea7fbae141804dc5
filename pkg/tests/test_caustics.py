"""
Tests for Lagrangian sheets and caustic classification
"""

import numpy as np
import pytest

from bhil.core.model import ConstantModel, GridSpec
from bhil.raytrace.caustics import (
    AT_MOST_FOLDS,
    DEGENERATE,
    FOLD,
    INCONCLUSIVE,
    NO_CAUSTICS,
    WORSE_THAN_FOLD,
    classify_caustics,
)
from bhil.raytrace.lagrangian import LagrangianSheet, retrace_check, sample_lagrangian

CHART = GridSpec((-0.2, -0.2, 0.05), (0.1, 0.1, 0.1), (5, 5, 10))


def synthetic_sheet(f_p3, f_pp, resolved=None):
    """Sheet whose chart derivatives are given as functions of p3."""
    p3 = CHART.centers()[..., 2]
    dims = CHART.dims
    df = np.zeros(dims + (3,))
    df[..., 2] = f_p3(p3)
    hessian = np.zeros(dims + (3, 3))
    hessian[..., 2, 2] = f_pp(p3)
    return LagrangianSheet(
        r=1.0,
        chart=CHART,
        f=np.ones(dims),
        df=df,
        hessian=hessian,
        g=np.zeros(dims + (2,)),
        nu=np.zeros(dims + (3,)),
        distance=np.ones(dims),
        resolved=np.ones(dims, dtype=bool) if resolved is None else resolved,
        residual=np.zeros(dims),
    )


def test_monotone_sheet_has_no_caustics():
    report = classify_caustics(synthetic_sheet(lambda p: 1.0 + p, lambda p: np.ones_like(p)))
    assert report.verdict == NO_CAUSTICS
    assert report.records == []


def test_simple_zero_is_a_fold():
    """Test a sign change of f_p3 with f_pp = 1"""
    report = classify_caustics(synthetic_sheet(lambda p: p - 0.5, lambda p: np.ones_like(p)))
    assert report.verdict == AT_MOST_FOLDS
    assert {rec.kind for rec in report.records} == {FOLD}
    assert len(report.records) == 25
    assert all(rec.p3 == pytest.approx(0.5) for rec in report.records)
    assert all(rec.rank_dpiX == 2 for rec in report.records)


def test_vanishing_second_derivative_is_worse_than_fold():
    """Test a zero of f_p3 where f_pp also vanishes"""
    report = classify_caustics(
        synthetic_sheet(lambda p: p - 0.5, lambda p: np.where(np.abs(p - 0.5) < 0.06, 0.0, 1.0))
    )
    assert report.verdict == WORSE_THAN_FOLD
    assert report.counts()[DEGENERATE] == 25


@pytest.mark.parametrize("center", [0.5, 0.45, 0.52])
def test_quartic_zero_is_worse_than_fold(center):
    """Test f quartic in p3 whether its zero sits on a chart node or between two"""
    report = classify_caustics(
        synthetic_sheet(lambda p: 4.0 * (p - center) ** 3, lambda p: 12.0 * (p - center) ** 2)
    )
    assert report.verdict == WORSE_THAN_FOLD
    assert DEGENERATE in {rec.kind for rec in report.records}
    assert FOLD not in {rec.kind for rec in report.records}


def test_fold_between_nodes_keeps_its_curvature():
    """Test root location and f_pp of a cubic f_p3 with a simple zero at 0.53"""
    report = classify_caustics(
        synthetic_sheet(lambda p: (p - 0.53) + (p - 0.53) ** 3, lambda p: 1.0 + 3.0 * (p - 0.53) ** 2)
    )
    assert report.verdict == AT_MOST_FOLDS
    assert len(report.records) == 25
    for rec in report.records:
        assert rec.p3 == pytest.approx(0.53, abs=1e-9)
        assert rec.f_pp == pytest.approx(1.0, abs=1e-6)


def test_unresolved_zero_is_inconclusive():
    """Test that a near-zero next to an unresolved node stays inconclusive"""
    resolved = np.ones(CHART.dims, dtype=bool)
    resolved[..., 5:] = False
    report = classify_caustics(
        synthetic_sheet(lambda p: p - 0.46, lambda p: np.ones_like(p), resolved)
    )
    assert report.verdict == INCONCLUSIVE
    assert len(report.failing_cells) == 25


def test_no_resolved_nodes():
    sheet = synthetic_sheet(lambda p: p, lambda p: p, np.zeros(CHART.dims, dtype=bool))
    assert classify_caustics(sheet).verdict == INCONCLUSIVE


@pytest.mark.slow
def test_constant_speed_sheet():
    """Test the sampled sheet against x3 = r + p3 rho / sqrt(1 - p3^2) and classify it"""
    model = ConstantModel(1.0)
    chart = GridSpec.from_bounds((0.3, 0.3, 0.1), (0.7, 0.7, 0.6), (5, 5, 6))
    sheet = sample_lagrangian(model, 0.5, chart, n_rays=6000, depth_max=2.5)
    assert sheet.resolved.mean() > 0.8

    c = chart.centers()
    rho = np.hypot(c[..., 0], c[..., 1])
    expected = 0.5 + c[..., 2] * rho / np.sqrt(1.0 - c[..., 2] ** 2)
    err = np.abs(sheet.f - expected)[sheet.resolved]
    assert np.median(err) < 0.02

    report = classify_caustics(sheet)
    assert report.verdict == NO_CAUSTICS

    check = retrace_check(model, sheet, 5, np.random.default_rng(0))
    assert check["checked"] == 5
