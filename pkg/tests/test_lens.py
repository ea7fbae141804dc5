"""
Tests for the Gaussian lens background: multipath, masked tables, fold caustics
and the folded-cross-cap diagnostics
"""

import numpy as np
import pytest

from bhil.canonical.variable import VACUOUS_PASS, dense_variable_diagnostics
from bhil.core.model import GaussianLensModel, GridSpec
from bhil.raytrace.caustics import AT_MOST_FOLDS, FOLD, classify_caustics
from bhil.raytrace.lagrangian import sample_lagrangian, sample_lagrangian_family
from bhil.raytrace.traveltime import MULTIPATH, build_traveltime_table, two_point_traveltime

pytestmark = pytest.mark.slow

R_VALUES = [0.3, 0.4, 0.5]
CHART = GridSpec.from_bounds((-0.8, -0.8, 0.2), (0.8, 0.8, 1.0), (17, 17, 17))


@pytest.fixture(scope="module")
def lens():
    return GaussianLensModel(c_bg=1.0, amplitude=0.3, center=(0.0, 0.0, 1.5), width=0.45)


@pytest.fixture(scope="module")
def lens_family(lens):
    return sample_lagrangian_family(lens, R_VALUES, CHART, n_rays=6000, depth_max=3.0)


def test_multipath_behind_the_focus(lens):
    result = two_point_traveltime(lens, (0.0, 0.0, 0.0), (0.05, 0.0, 3.0))
    assert result.status == MULTIPATH
    assert len(result.arrivals) > 1
    times = [t for t, _ in result.arrivals]
    assert result.time == min(times)
    assert max(times) > min(times)


def test_table_behind_the_lens_is_partly_masked(lens):
    spec = GridSpec((-0.3, -0.3, 2.6), (0.1, 0.1, 0.1), (7, 7, 7))
    table = build_traveltime_table(lens, (0.0, 0.0, 0.0), spec)
    assert not table.valid.all()
    assert table.valid.any()
    assert np.all(np.isnan(table.times[~table.valid]))


def test_lens_sheet_has_fold_caustics(lens_family):
    sheet = lens_family.sheets[1]
    fp = np.where(sheet.resolved, sheet.f_p3, np.nan)
    # f_p3 changes sign along p3 somewhere on the chart
    assert np.nanmin(fp) < 0.0 < np.nanmax(fp)
    report = classify_caustics(sheet)
    assert report.counts()[FOLD] > 0
    assert all(abs(rec.f_pp) > report.tol_fold for rec in report.records if rec.kind == FOLD)


def test_lens_family_is_at_most_folds(lens_family):
    report = classify_caustics(lens_family)
    assert report.verdict == AT_MOST_FOLDS
    assert report.family_check["passed"]


def test_lens_verdict_stable_under_refinement(lens, lens_family):
    coarse = classify_caustics(lens_family.sheets[1])
    fine = classify_caustics(sample_lagrangian(lens, R_VALUES[1], CHART.refine(2), n_rays=6000, depth_max=3.0))
    assert coarse.verdict == fine.verdict == AT_MOST_FOLDS


def test_folded_cross_cap_diagnostics_on_the_lens(lens, lens_family):
    """Test the rank drop of the right projection and the fold transversality at each sample"""
    report = dense_variable_diagnostics(lens, lens_family)
    assert report.verdict != VACUOUS_PASS
    assert report.samples
    for sample in report.samples:
        assert sample.rank_right == 5
        assert sample.submersion_with_folds
    summary = report.to_dict()
    assert "max_abs_f_x1" in summary
    row = report.samples[0].to_dict()
    assert "nonradiality_margin_right" in row
    assert "nonradiality_margin_left" in row
