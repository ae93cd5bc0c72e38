"""Dependency-ordered execution of registered checks on a worker pool."""

from __future__ import annotations

import logging
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from graphlib import TopologicalSorter
from typing import Dict, Iterable, List, Optional

from anikern.artifacts import write_json
from anikern.models import CheckResult
from anikern.runtime import RunLedger

from . import CHECKS
from .base import CheckContext

logger = logging.getLogger(__name__)

_BLOCKING = frozenset({"error", "skipped"})


def dependency_closure(names: Iterable[str]) -> List[str]:
    """Requested checks plus everything they depend on, requested ones first."""
    ordered: List[str] = []
    pending = list(names)
    while pending:
        name = pending.pop(0)
        if name in ordered:
            continue
        if name not in CHECKS:
            raise KeyError(f"unknown check {name!r}")
        ordered.append(name)
        pending.extend(CHECKS[name].depends_on)
    return ordered


def _skipped(name: str, blocker: str) -> CheckResult:
    return CheckResult(name=name, status="skipped", message=f"dependency {blocker} did not complete")


def run_checks(
    ctx: CheckContext,
    names: Iterable[str],
    *,
    jobs: int = 1,
    ledger: Optional[RunLedger] = None,
) -> Dict[str, CheckResult]:
    """Run ``names`` and their dependencies; a check starts once every dependency has a result."""
    ledger = ledger or RunLedger()
    selected = dependency_closure(names)
    graph = TopologicalSorter({name: CHECKS[name].depends_on for name in selected})
    graph.prepare()
    results: Dict[str, CheckResult] = {}

    def finish(result: CheckResult) -> None:
        results[result.name] = result
        ledger.record(result)
        logger.info("check %s: %s (%.2fs)", result.name, result.status, result.seconds)
        graph.done(result.name)

    with ThreadPoolExecutor(max_workers=max(1, jobs), thread_name_prefix="anikern-check") as pool:
        running: Dict[Future, str] = {}
        while graph.is_active():
            for name in graph.get_ready():
                blocker = next(
                    (dep for dep in CHECKS[name].depends_on if ledger.status_of(dep) in _BLOCKING), None
                )
                if blocker is not None:
                    skipped = _skipped(name, blocker)
                    ctx.publish(skipped)
                    finish(skipped)
                    continue
                running[pool.submit(CHECKS[name]().execute, ctx)] = name
            if not running:
                continue
            done, _ = wait(running, return_when=FIRST_COMPLETED)
            for future in done:
                running.pop(future)
                finish(future.result())
    return {name: results[name] for name in selected}


def write_summary(ctx: CheckContext, results: Dict[str, CheckResult], ledger: RunLedger) -> str:
    snapshot = ledger.snapshot()
    payload = {
        "seed": ctx.seed,
        "requested": list(ctx.config.checks),
        "passed": all(r.status == "pass" for r in results.values()),
        "totals": snapshot.totals,
        "provenance": snapshot.provenance,
        "checks": {name: result for name, result in results.items()},
    }
    return write_json(ctx.artifact("summary.json"), payload)
