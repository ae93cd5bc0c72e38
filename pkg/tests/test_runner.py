import json

import pytest

from anikern.checks import CHECKS, NEEDS_COEFFICIENTS, PRESETS, Check, CheckContext, CheckOutcome
from anikern.checks.runner import dependency_closure, run_checks, write_summary
from anikern.models import ExperimentConfig
from anikern.runtime import RunLedger

GAUSSIAN = {"m": [1], "terms": [{"beta": [2], "re": 1.0}]}


class Exploding(Check):
    name = "exploding"

    def run(self, ctx):
        raise RuntimeError("boom")


class Downstream(Check):
    name = "downstream"
    depends_on = ("exploding",)

    def run(self, ctx):
        return CheckOutcome(passed=True)


class Independent(Check):
    name = "independent"

    def run(self, ctx):
        return CheckOutcome(passed=True, detail={"value": 1.5})


@pytest.fixture
def dummy_checks(monkeypatch):
    for cls in (Exploding, Downstream, Independent):
        monkeypatch.setitem(CHECKS, cls.name, cls)


@pytest.fixture
def ctx(tmp_path):
    config = ExperimentConfig.model_validate({"symbol": GAUSSIAN, "output_dir": str(tmp_path / "out")})
    return CheckContext(config, tmp_path)


def test_presets_only_name_registered_checks():
    for names in PRESETS.values():
        assert set(names) <= set(CHECKS)
    assert NEEDS_COEFFICIENTS == set(PRESETS["vc-run"]) | {"hypothesis3"}


def test_dependency_closure():
    assert dependency_closure(["bound_fit"]) == ["bound_fit", "mass"]
    assert set(dependency_closure(["twisted_sg_norm"])) == {"twisted_sg_norm", "hypothesis2", "hypothesis1"}
    with pytest.raises(KeyError):
        dependency_closure(["nonsense"])


@pytest.mark.parametrize("jobs", [1, 3])
def test_failed_dependency_skips_dependents(dummy_checks, ctx, jobs):
    ledger = RunLedger()
    results = run_checks(ctx, ["downstream", "independent"], jobs=jobs, ledger=ledger)
    assert results["exploding"].status == "error"
    assert "boom" in results["exploding"].message
    assert results["downstream"].status == "skipped"
    assert results["independent"].status == "pass"
    assert ledger.snapshot().totals == {"pass": 1, "fail": 0, "error": 1, "skipped": 1}
    assert ctx.result_of("downstream").status == "skipped"


def test_summary_document(dummy_checks, ctx):
    ledger = RunLedger()
    results = run_checks(ctx, ["independent"], ledger=ledger)
    path = write_summary(ctx, results, ledger)
    summary = json.loads(open(path).read())
    assert summary["passed"] is True
    assert summary["checks"]["independent"]["detail"] == {"value": 1.5}


def test_context_memoizes_and_seeds(ctx):
    calls = []
    first = ctx.memo("key", lambda: calls.append(1) or "value")
    second = ctx.memo("key", lambda: calls.append(1) or "other")
    assert first == second == "value"
    assert calls == [1]
    a = ctx.rng("mass").standard_normal(3)
    b = ctx.rng("mass").standard_normal(3)
    assert (a == b).all()
    assert ctx.symbol() is ctx.symbol()
    assert ctx.base_grid() is None
