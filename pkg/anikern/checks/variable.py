from __future__ import annotations

from typing import List

import numpy as np

from anikern.aniso_core import kappa_for
from anikern.artifacts import export_coo, write_margins_csv, write_table
from anikern.estimator import (
    check_twisted_form_lower,
    fit_offdiagonal_bound,
    kernel_diagonal_samples,
    kernel_samples_from_columns,
    twisted_sg_profile,
    verify_hypothesis1,
    verify_hypothesis2,
    verify_hypothesis3,
)
from anikern.legendre import lf_evaluator
from anikern.models import HypothesisReport
from anikern.operator_vc import (
    DiscreteOperator,
    TwistMap,
    assemble,
    assemble_reference,
    default_anchors,
    kernel_column,
    make_twist,
    sample_anchor_pairs,
    twist,
)

from .base import Check, CheckContext, CheckOutcome

_VC_TIMES = (0.01, 0.1, 1.0)
_ANCHOR_PAIRS = 3


def plain_operator(ctx: CheckContext) -> DiscreteOperator:
    return ctx.memo("plain_operator", lambda: assemble(ctx.coefficients()))


def reference_operator(ctx: CheckContext) -> DiscreteOperator:
    coeffs = ctx.coefficients()
    return ctx.memo(
        "reference_operator", lambda: assemble_reference(coeffs.reference, coeffs.grid, coeffs.m)
    )


def twist_map(ctx: CheckContext) -> TwistMap:
    coeffs = ctx.coefficients()
    return ctx.memo(
        "twist_map", lambda: make_twist(default_anchors(coeffs.grid, coeffs.m), coeffs.grid, coeffs.m)
    )


def anchored_twists(ctx: CheckContext) -> List[TwistMap]:
    """The default twist plus twists anchored at node pairs drawn with the run seed."""
    coeffs = ctx.coefficients()

    def build() -> List[TwistMap]:
        pairs = sample_anchor_pairs(coeffs.grid, coeffs.m, _ANCHOR_PAIRS, seed=ctx.seed)
        return [twist_map(ctx)] + [make_twist(pair, coeffs.grid, coeffs.m) for pair in pairs]

    return ctx.memo("anchored_twists", build)


def covectors(ctx: CheckContext) -> List[np.ndarray]:
    if ctx.config.lambdas:
        return [np.asarray(lam, dtype=float) for lam in ctx.config.lambdas]
    d = ctx.coefficients().m.dim
    out = []
    for k in range(d):
        for scale in (1.0, -1.0, 2.0, -2.0):
            lam = np.zeros(d)
            lam[k] = scale
            out.append(lam)
    return out


class Hypothesis1Check(Check):
    name = "hypothesis1"

    def run(self, ctx: CheckContext) -> CheckOutcome:
        hd, ld = plain_operator(ctx), reference_operator(ctx)
        report = verify_hypothesis1(hd, ld, ctx.config.shift)
        artifacts = [
            ctx.write_report("hypothesis1.json", report),
            export_coo(ctx.artifact("operator.coo"), hd),
        ]
        return CheckOutcome(passed=report.accepted, detail=report.model_dump(), artifacts=artifacts)


def hypothesis2_report(ctx: CheckContext) -> HypothesisReport:
    return ctx.memo(
        "hypothesis2_report",
        lambda: verify_hypothesis2(
            plain_operator(ctx),
            reference_operator(ctx),
            covectors(ctx),
            anchored_twists(ctx),
            samples=ctx.config.samples,
            seed=ctx.seed,
        ),
    )


class Hypothesis2Check(Check):
    name = "hypothesis2"
    depends_on = ("hypothesis1",)

    def run(self, ctx: CheckContext) -> CheckOutcome:
        report = hypothesis2_report(ctx)
        report_path = ctx.write_report("hypothesis2.json", report)
        return CheckOutcome(passed=report.accepted, detail=report.model_dump(), artifacts=[report_path])


class Hypothesis3Check(Check):
    name = "hypothesis3"
    depends_on = ("hypothesis1",)

    def run(self, ctx: CheckContext) -> CheckOutcome:
        coeffs = ctx.coefficients()
        kappa = ctx.config.kappa or kappa_for(coeffs.m.mu)
        report = verify_hypothesis3(
            plain_operator(ctx),
            reference_operator(ctx),
            kappa,
            covectors(ctx),
            twist_map(ctx),
            samples=ctx.config.samples,
            seed=ctx.seed,
        )
        report_path = ctx.write_report("hypothesis3.json", report)
        return CheckOutcome(passed=report.accepted, detail=report.model_dump(), artifacts=[report_path])


def _fitted_m(ctx: CheckContext) -> float:
    return float(hypothesis2_report(ctx).constants["M"])


class TwistedSemigroupNormCheck(Check):
    name = "twisted_sg_norm"
    depends_on = ("hypothesis2",)

    def run(self, ctx: CheckContext) -> CheckOutcome:
        m_const = _fitted_m(ctx)
        symbol = ctx.symbol()
        base = twist_map(ctx)
        times = sorted(set(ctx.config.times) | set(_VC_TIMES))
        rows = []
        worst = np.inf
        for lam in covectors(ctx):
            twisted = twist(plain_operator(ctx), base.with_lambda(lam))
            r_lam = float(symbol.real(lam))
            for t, slack in twisted_sg_profile(twisted, m_const, r_lam, times):
                rows.append([*lam, t, slack])
                worst = min(worst, slack)
        header = [f"lambda_{k + 1}" for k in range(symbol.dim)] + ["t", "slack"]
        detail = {"M": m_const, "worst_slack": worst}
        artifacts = [
            write_table(ctx.artifact("twisted_sg_norm.csv"), header, rows),
            ctx.write_report("twisted_sg_norm.json", detail),
        ]
        return CheckOutcome(passed=worst >= -1e-9, detail=detail, artifacts=artifacts)


class TwistedFormLowerCheck(Check):
    name = "twisted_form_lower"
    depends_on = ("hypothesis2",)

    def run(self, ctx: CheckContext) -> CheckOutcome:
        m_const = _fitted_m(ctx)
        symbol = ctx.symbol()
        base = twist_map(ctx)
        ratios = []
        for lam in covectors(ctx):
            twisted = twist(plain_operator(ctx), base.with_lambda(lam))
            ratios.append(check_twisted_form_lower(twisted, m_const, float(symbol.real(lam))))
        worst = max(ratios) if ratios else 0.0
        detail = {"M": m_const, "ratios": ratios, "worst_ratio": worst}
        report = ctx.write_report("twisted_form_lower.json", detail)
        return CheckOutcome(passed=worst <= 1.0 + 1e-9, detail=detail, artifacts=[report])


class VariableBoundFitCheck(Check):
    """Bound fit with the M t term on kernel columns of the assembled operator."""

    name = "vc_bound_fit"
    depends_on = ("hypothesis1",)

    def run(self, ctx: CheckContext) -> CheckOutcome:
        hd = plain_operator(ctx)
        symbol = ctx.symbol()
        times = list(ctx.config.times)
        y = np.zeros(hd.grid.dim)
        columns = {t: (y, kernel_column(hd, t, y)) for t in times}
        samples = kernel_samples_from_columns(columns, hd.grid)
        samples.extend(kernel_diagonal_samples(hd, times))
        fit = fit_offdiagonal_bound(samples, symbol.weights.mu, lf_evaluator(symbol), include_mt=True)
        artifacts = [
            ctx.write_report("vc_bound_fit.json", fit),
            write_margins_csv(ctx.artifact("vc_bound_fit_margins.csv"), fit),
        ]
        return CheckOutcome(passed=fit.min_margin >= 0, detail=fit.model_dump(), artifacts=artifacts)
