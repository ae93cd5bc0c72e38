from __future__ import annotations

import numpy as np

from anikern.aniso_core import (
    check_homogeneity,
    check_positive_definite,
    comparability_constants,
    kappa_for,
    scaling_majorant,
    weighted_degree,
)
from anikern.artifacts import write_lf_csv, write_table
from anikern.errors import SymbolError
from anikern.grid import AnisoGrid
from anikern.legendre import (
    check_lf_homogeneity,
    fenchel_young_slack,
    lf_evaluator,
    lf_grid,
    lf_separable_closed_form,
)

from .base import Check, CheckContext, CheckOutcome


class SymbolCheck(Check):
    name = "symbol_check"

    def run(self, ctx: CheckContext) -> CheckOutcome:
        symbol = ctx.symbol()
        rng = ctx.rng(self.name)
        samples = [(float(t), rng.standard_normal(symbol.dim)) for t in np.exp(rng.uniform(-3, 3, 200))]
        deviation = check_homogeneity(symbol, samples)
        minimum, argmin = check_positive_definite(symbol)
        mu = symbol.weights.mu
        detail = {
            "mu": str(mu),
            "kappa": kappa_for(mu),
            "homogeneity_deviation": deviation,
            "sphere_min": minimum,
            "sphere_argmin": argmin,
            "even": symbol.is_even,
        }
        report = ctx.write_report("symbol_check.json", detail)
        return CheckOutcome(passed=deviation <= 1e-12 and minimum > 0, detail=detail, artifacts=[report])


class AppendixCheck(Check):
    """Fenchel-Young, R^# homogeneity, scaling majorants and R^# comparability under R -> 5R."""

    name = "appendix"

    def run(self, ctx: CheckContext) -> CheckOutcome:
        symbol = ctx.symbol()
        rng = ctx.rng(self.name)
        d = symbol.dim
        xs = rng.standard_normal((10_000, d)) * 3.0
        xis = rng.standard_normal((10_000, d)) * 3.0
        fy = fenchel_young_slack(symbol, xs, xis)

        lf_samples = [(float(t), rng.standard_normal(d)) for t in np.exp(rng.uniform(-2, 2, 64))]
        lf_dev = check_lf_homogeneity(symbol, lf_samples)

        kappa = kappa_for(symbol.weights.mu)
        two_m = [2 * v for v in symbol.weights.m]
        worst_majorant = -np.inf
        points = rng.standard_normal((10_000, d)) * 4.0
        for k in range(d):
            alpha = tuple(1 if j == k else 0 for j in range(d))
            if weighted_degree(alpha, two_m) >= kappa:
                continue
            bound = scaling_majorant(alpha, symbol, 0.1, kappa)
            gap = np.abs(points[:, k]) - 0.1 * symbol.real(points) ** kappa - bound
            worst_majorant = max(worst_majorant, float(np.max(gap)))

        scaled = type(symbol).from_terms(
            symbol.weights, {beta.entries: 5 * c for beta, c in symbol.terms}
        )
        comparison = comparability_constants(lf_evaluator(symbol), lf_evaluator(scaled), symbol.weights, 512)

        passed = (
            fy >= -1e-9
            and lf_dev <= 1e-8
            and worst_majorant <= 0
            and np.isfinite(comparison.constant_C)
            and comparison.constant_c > 0
        )
        detail = {
            "fenchel_young_min_slack": fy,
            "lf_homogeneity_deviation": lf_dev,
            "majorant_worst_gap": worst_majorant,
            "comparability": comparison.model_dump(),
        }
        report = ctx.write_report("appendix.json", detail)
        return CheckOutcome(passed=bool(passed), detail=detail, artifacts=[report])


class LFOracleCheck(Check):
    name = "lf_oracle"

    def run(self, ctx: CheckContext) -> CheckOutcome:
        symbol = ctx.symbol()
        grid = ctx.base_grid() or AnisoGrid(radii=(4.0,) * symbol.dim, counts=(32,) * symbol.dim)
        field = lf_grid(symbol, grid)
        artifacts = [write_lf_csv(ctx.artifact("lf_grid.csv"), field)]
        detail = {"grid": grid.to_dict(), "grid_only_nodes": int(np.sum(field.status != "converged"))}
        try:
            exact = lf_separable_closed_form(symbol, grid.nodes())
        except SymbolError:
            rng = ctx.rng(self.name)
            samples = [(float(t), rng.standard_normal(symbol.dim)) for t in np.exp(rng.uniform(-2, 2, 64))]
            deviation = check_lf_homogeneity(symbol, samples)
            detail.update(oracle="homogeneity", deviation=deviation)
            passed = deviation <= 1e-8
        else:
            error = float(np.max(np.abs(field.values - exact)))
            detail.update(oracle="closed_form", max_abs_error=error)
            rows = zip(grid.nodes().reshape(-1, symbol.dim), field.values.reshape(-1), exact.reshape(-1))
            artifacts.append(
                write_table(
                    ctx.artifact("lf_oracle.csv"),
                    [f"x_{k + 1}" for k in range(symbol.dim)] + ["numeric", "closed_form"],
                    ([*x, v, e] for x, v, e in rows),
                )
            )
            passed = error <= 1e-6
        artifacts.append(ctx.write_report("lf_oracle.json", detail))
        return CheckOutcome(passed=passed, detail=detail, artifacts=artifacts)
