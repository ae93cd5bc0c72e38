from __future__ import annotations

import math
from typing import List, Sequence

import numpy as np

from anikern.artifacts import write_kernel_cache, write_kernel_csv, write_margins_csv, write_table
from anikern.estimator import (
    bound_margins,
    fit_offdiagonal_bound,
    kernel_samples_from_field,
    ultracontractivity_slope,
)
from anikern.grid import AnisoGrid
from anikern.kernel_cc import (
    KernelField,
    check_mass,
    check_scaling_identity,
    kernel_cc,
    loglog_slope,
    norm_profile,
    support_grid,
)
from anikern.legendre import lf_evaluator

from .base import Check, CheckContext, CheckOutcome

_HELD_OUT_FLOOR = 1e-6


def base_grid(ctx: CheckContext) -> AnisoGrid:
    return ctx.memo("kernel_base_grid", lambda: ctx.base_grid() or support_grid(ctx.symbol(), 1.0))


def held_out_times(times: Sequence[float]) -> List[float]:
    """Geometric midpoints of consecutive times, or sqrt(2) t for a single time."""
    ordered = sorted(set(float(t) for t in times))
    if len(ordered) == 1:
        return [ordered[0] * math.sqrt(2.0)]
    return [math.sqrt(a * b) for a, b in zip(ordered, ordered[1:])]


def kernel_at(ctx: CheckContext, t: float) -> KernelField:
    """K(t, .) on the base grid dilated to time t, memoized per t."""
    symbol = ctx.symbol()

    def compute() -> KernelField:
        grid = base_grid(ctx).dilated(symbol.weights.exponents, t)
        return kernel_cc(symbol, t, grid, ctx.config.freq_counts)

    return ctx.memo(("kernel", float(t)), compute)


class ScalingIdentityCheck(Check):
    name = "scaling_identity"

    def run(self, ctx: CheckContext) -> CheckOutcome:
        symbol = ctx.symbol()
        grid = base_grid(ctx)
        rows = []
        for t in ctx.config.times:
            deviation = check_scaling_identity(symbol, t, grid.dilated(symbol.weights.exponents, t))
            rows.append((t, deviation))
        worst = max(dev for _, dev in rows)
        detail = {"deviations": [list(r) for r in rows], "worst": worst}
        artifacts = [
            write_table(ctx.artifact("scaling_identity.csv"), ["t", "deviation"], rows),
            ctx.write_report("scaling_identity.json", detail),
        ]
        return CheckOutcome(passed=worst <= 1e-7, detail=detail, artifacts=artifacts)


class KernelMassCheck(Check):
    name = "mass"

    def run(self, ctx: CheckContext) -> CheckOutcome:
        artifacts: List[str] = []
        rows = []
        passed = True
        for t in ctx.config.times:
            field = kernel_at(ctx, t)
            result = check_mass(field)
            rows.append({"t": t, "deviation": result.deviation, "covered": result.covered})
            passed = passed and result.covered and result.deviation <= 1e-8
            artifacts.append(write_kernel_csv(ctx.artifact(f"kernel_t{t:g}.csv"), field))
            artifacts.append(write_kernel_cache(ctx.artifact(f"kernel_t{t:g}.bin"), field))
        detail = {"times": rows}
        artifacts.append(ctx.write_report("mass.json", detail))
        return CheckOutcome(passed=passed, detail=detail, artifacts=artifacts)


class NormSlopesCheck(Check):
    name = "norm_slopes"

    def run(self, ctx: CheckContext) -> CheckOutcome:
        symbol = ctx.symbol()
        mu = float(symbol.weights.mu)
        times = ctx.config.times
        rows = []
        passed = True
        for s in (1.0, 2.0, math.inf):
            slope = loglog_slope(norm_profile(symbol, s, times, base_grid(ctx)))
            expected = -mu * (1.0 - 1.0 / s)
            ok = abs(slope) <= 0.005 if expected == 0 else abs(slope - expected) <= 0.02 * abs(expected)
            passed = passed and ok
            rows.append((s, slope, expected))
        detail = {"slopes": [{"s": s, "slope": got, "expected": want} for s, got, want in rows]}
        artifacts = [
            write_table(ctx.artifact("norm_slopes.csv"), ["s", "slope", "expected"], rows),
            ctx.write_report("norm_slopes.json", detail),
        ]
        return CheckOutcome(passed=passed, detail=detail, artifacts=artifacts)


class UltracontractivityCheck(Check):
    name = "ultracontractivity"

    def run(self, ctx: CheckContext) -> CheckOutcome:
        symbol = ctx.symbol()
        times = list(ctx.config.times)
        if max(times) < 10 * min(times):
            times = [0.25, 0.5, 1.0, 2.0, 4.0]
        slope = ultracontractivity_slope(symbol, times, base_grid(ctx))
        expected = -float(symbol.weights.mu) / 2.0
        detail = {"times": times, "slope": slope, "expected": expected}
        report = ctx.write_report("ultracontractivity.json", detail)
        return CheckOutcome(
            passed=abs(slope - expected) <= 0.02 * abs(expected), detail=detail, artifacts=[report]
        )


class BoundFitCheck(Check):
    """Off-diagonal fit on the constant-coefficient kernels; homogeneity drops the M t term.

    The fit is then evaluated at geometric midpoints of the configured times.
    """

    name = "bound_fit"
    depends_on = ("mass",)

    def run(self, ctx: CheckContext) -> CheckOutcome:
        symbol = ctx.symbol()
        lf = lf_evaluator(symbol)
        samples = []
        for t in ctx.config.times:
            samples.extend(kernel_samples_from_field(kernel_at(ctx, t)))
        fit = fit_offdiagonal_bound(samples, symbol.weights.mu, lf, include_mt=False)
        held_out = []
        for t in held_out_times(ctx.config.times):
            held_out.extend(kernel_samples_from_field(kernel_at(ctx, t), floor=_HELD_OUT_FLOOR))
        held_out_margin = float(np.min(bound_margins(fit, held_out, symbol.weights.mu, lf)))
        detail = fit.model_dump()
        detail["held_out"] = {"times": held_out_times(ctx.config.times), "min_margin": held_out_margin}
        artifacts = [
            ctx.write_report("bound_fit.json", detail),
            write_margins_csv(ctx.artifact("bound_fit_margins.csv"), fit),
        ]
        passed = fit.min_margin >= 0 and fit.M > 0 and held_out_margin >= -1e-6
        return CheckOutcome(passed=passed, detail=detail, artifacts=artifacts)
