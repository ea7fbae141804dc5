"""
Pipeline stages. Each stage reads the RunContext, writes its artifacts through
the context's ReportWriter and returns a one-line summary.
"""

import logging
from typing import Any

import numpy as np

from ..canonical.singularity import singularity_census
from ..canonical.tic import TableKinematics, check_tic
from ..canonical.variable import dense_variable_diagnostics
from ..core.geometry import DenseArray
from ..imaging.artifacts import detect_ghosts, frequency_scaling_study
from ..imaging.migration import filtered_backprojection, fwhm, normal_psf
from ..raytrace.caustics import classify_caustics
from ..raytrace.lagrangian import retrace_check
from ..raytrace.tracer import fibonacci_directions, trace_fan
from ..raytrace.traveltime import grazing_report, reciprocity_check
from ..scatter.born import born_forward
from .context import RunContext
from .decorators import command

logger = logging.getLogger(__name__)


@command(name="simulate", outputs=["data.bhil", "reflectivity.bhil", "mute_log.jsonl"])
def simulate(ctx: RunContext) -> dict[str, Any]:
    """Born-model the scenario's data and apply its mutes"""
    s = ctx.scenario
    data = born_forward(
        ctx.model,
        ctx.reflectivity,
        ctx.geometry,
        s.build_wavelet(),
        mutes=s.build_mutes(),
        tables=ctx.tables(),
    )
    ctx.cache["data"] = data
    ctx.writer.write_grid("data.bhil", data)
    ctx.writer.write_grid("reflectivity.bhil", ctx.reflectivity)
    ctx.writer.write_jsonl("mute_log.jsonl", data.metadata["mutes"])
    return {
        "stage": "simulate",
        "traces": ctx.geometry.n_sources * ctx.geometry.receivers.n,
        "max_abs": float(np.max(np.abs(data.samples))),
        "amplitude_convention": data.metadata["amplitude_convention"],
        "mutes": len(data.metadata["mutes"]),
    }


@command(name="migrate", outputs=["image.bhil", "image_y2_zero.csv", "image_y2_point.csv", "migrate.jsonl"])
def migrate(ctx: RunContext) -> dict[str, Any]:
    """Filtered backprojection of the simulated data, with ghost detection"""
    s = ctx.scenario
    image = filtered_backprojection(
        ctx.data(), ctx.model, ctx.geometry, ctx.grid, s.analysis.ramp_order, tables=ctx.tables()
    )
    ctx.cache["image"] = image
    truth = [sc.position for sc in s.reflectivity.scatterers]
    report = detect_ghosts(image, truth, relative_floor=s.analysis.relative_floor)
    ctx.writer.write_grid("image.bhil", image)
    ctx.writer.write_image_slices("image", image.values, ctx.grid, s.psf_scatterer())
    summary = {
        "stage": "migrate",
        "ramp_order": s.analysis.ramp_order,
        "argmax_position": [float(v) for v in image.argmax_position()],
        "n_ghosts": report.n_ghosts,
    }
    ctx.writer.write_jsonl("migrate.jsonl", [summary, {"artifacts": report.to_dict()}])
    return summary


@command(name="psf", outputs=["psf.bhil", "psf_y2_zero.csv", "psf_y2_point.csv", "psf.jsonl"])
def psf(ctx: RunContext) -> dict[str, Any]:
    """Numerical point-spread function of the normal operator"""
    s = ctx.scenario
    scatterer = s.psf_scatterer()
    image = normal_psf(
        ctx.model,
        ctx.geometry,
        scatterer,
        s.build_wavelet(),
        ctx.grid,
        s.reflectivity.depth_floor,
        s.analysis.ramp_order,
        s.build_mutes(),
        ctx.tables(),
    )
    peak = image.argmax()
    summary = {
        "stage": "psf",
        "scatterer": list(scatterer),
        "argmax_position": [float(v) for v in image.argmax_position()],
        "fwhm_cells": [fwhm(image, axis, peak) for axis in range(3)],
    }
    ctx.writer.write_grid("psf.bhil", image)
    ctx.writer.write_image_slices("psf", image.values, ctx.grid, scatterer)
    ctx.writer.write_jsonl("psf.jsonl", [summary])
    return summary


@command(name="trace-rays", outputs=["rays.jsonl"])
def trace_rays(ctx: RunContext) -> dict[str, Any]:
    """Hamiltonian drift, no-grazing and traveltime table checks"""
    rt = ctx.scenario.raytrace
    model = ctx.model
    source = ctx.geometry.source_positions()[0]
    directions = fibonacci_directions(64, lower_only=True)
    depth = max(ctx.grid.upper[2], 1.0)
    c0 = float(model.speed(source))
    fan = trace_fan(model, source, directions, p_max=2.0 * depth / c0, dp=rt.dp or 1e-3 * depth / c0)
    valid = fan.valid_mask()
    h = 0.5 * model.speed(fan.x) ** 2 * np.sum(fan.xi**2, axis=-1)
    drift = float(np.max(np.where(valid, np.abs(h - h[:1]) / np.abs(h[:1]), 0.0)))
    records: list[dict[str, Any]] = [{"check": "hamiltonian_drift", "rays": fan.n_rays, "max_relative": drift}]

    grazing = grazing_report(model, ctx.reflectivity.support_points(), rt.grazing_dirs, rt.grazing_tol, rt.dp)
    records.append({"check": "no_grazing", **grazing})

    tables = ctx.tables()
    if tables is not None:
        rng = ctx.rng("trace-rays")
        reciprocity = reciprocity_check(model, tables.sources[0], rt.reciprocity_pairs, rng)
        records.append({"check": "reciprocity", **reciprocity})
        valid_cells = tables.valid()
        records.append(
            {"check": "table_coverage", "cells": int(valid_cells.size), "valid": int(valid_cells.sum())}
        )
    ctx.writer.write_jsonl("rays.jsonl", records)
    return {"stage": "trace-rays", "max_drift": drift, "grazing_violations": len(grazing["violations"])}


@command(name="classify-caustics", outputs=["caustics.jsonl"])
def classify_caustics_stage(ctx: RunContext) -> dict[str, Any]:
    """Sample the receiver Lagrangians and classify their caustics"""
    family = ctx.family()
    report = classify_caustics(family)
    retrace = retrace_check(ctx.model, family.sheets[len(family.sheets) // 2], 20, ctx.rng("classify-caustics"))
    lines: list[dict[str, Any]] = [rec.to_dict() for rec in report.records]
    lines.append({"summary": report.to_dict(), "retrace": retrace})
    ctx.writer.write_jsonl("caustics.jsonl", lines)
    ctx.cache["caustics"] = report
    return {"stage": "classify-caustics", "verdict": report.verdict, **report.counts()}


@command(name="analyze-canonical", outputs=["canonical.jsonl"])
def analyze_canonical(ctx: RunContext) -> dict[str, Any]:
    """Singularity census (constant speed) or dense-array variable diagnostics"""
    a = ctx.scenario.analysis
    kind = ctx.scenario.geometry.kind
    lines: list[dict[str, Any]] = []
    summary: dict[str, Any] = {"stage": "analyze-canonical", "kind": kind}
    if ctx.is_constant and kind != "dense" and a.singularity_census:
        census = singularity_census(ctx.sample_spec(), a.census_points, ctx.rng("analyze-canonical"))
        lines.extend(census["records"])
        lines.append({"summary": census["summary"], "kind": kind})
        summary["agreement"] = {name: v["agreement"] for name, v in census["summary"].items()}
    if kind == "dense" and (a.variable_diagnostics or not ctx.is_constant):
        report = dense_variable_diagnostics(ctx.model, ctx.family(), mute_angle=a.mute_angle)
        lines.extend(sample.to_dict() for sample in report.samples)
        lines.append({"summary": report.to_dict()})
        summary["verdict"] = report.verdict
    if not lines:
        lines.append({"skipped": f"no canonical analysis applies to {kind} with this model"})
    ctx.writer.write_jsonl("canonical.jsonl", lines)
    return summary


@command(name="tic-check", outputs=["tic.jsonl"])
def tic_check(ctx: RunContext) -> dict[str, Any]:
    """Immersion and injectivity of the left projection"""
    a = ctx.scenario.analysis
    spec = ctx.sample_spec()
    kinematics = None
    if not ctx.is_constant:
        if not isinstance(ctx.geometry, DenseArray):
            ctx.writer.write_jsonl("tic.jsonl", [{"skipped": "tabled TIC check needs the dense array"}])
            return {"stage": "tic-check", "skipped": True}
        kinematics = TableKinematics(ctx.tables(), ctx.geometry)  # type: ignore[arg-type]
    report = check_tic(spec, a.tic_samples, ctx.rng("tic-check"), kinematics, workers=ctx.threads)
    ctx.writer.write_jsonl("tic.jsonl", [report.to_dict()])
    return {"stage": "tic-check", "pass": report.passed, "collisions": len(report.collisions)}


@command(name="artifact-study", outputs=["artifacts.jsonl"])
def artifact_study(ctx: RunContext) -> dict[str, Any]:
    """Ghost/primary ratio against wavelet frequency"""
    s = ctx.scenario
    report = frequency_scaling_study(
        ctx.model,
        ctx.geometry,
        s.psf_scatterer(),
        ctx.grid,
        s.reflectivity.depth_floor,
        s.analysis.frequencies,
        s.analysis.ramp_order,
        s.build_mutes(),
        ctx.tables(),
    )
    ctx.writer.write_jsonl("artifacts.jsonl", [report.to_dict()])
    return {
        "stage": "artifact-study",
        "ghosts": report.n_ghosts,
        "slopes": [round(sl["slope"], 6) for sl in report.frequency_slopes],
    }
