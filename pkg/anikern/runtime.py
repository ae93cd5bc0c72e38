from __future__ import annotations

import datetime as dt
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from pydantic import BaseModel

from anikern.models import CheckResult


class Provenance(BaseModel):
    symbol_hash: Optional[str] = None
    grid: Optional[Dict[str, Any]] = None
    seed: int = 0
    config_path: Optional[str] = None


@dataclass
class CheckRecord:
    name: str
    status: str
    seconds: float = 0.0
    artifacts: List[str] = field(default_factory=list)
    message: Optional[str] = None
    finished: dt.datetime = field(default_factory=lambda: dt.datetime.now(dt.timezone.utc))


class LedgerSnapshot(BaseModel):
    totals: Dict[str, int]
    checks: Dict[str, Any]
    provenance: Provenance
    last_updated: dt.datetime


class RunLedger:
    """Thread-safe record of check outcomes for one run."""

    def __init__(self, provenance: Optional[Provenance] = None) -> None:
        self._lock = threading.Lock()
        self._records: Dict[str, CheckRecord] = {}
        self._provenance = provenance or Provenance()

    def record(self, result: CheckResult) -> LedgerSnapshot:
        with self._lock:
            self._records[result.name] = CheckRecord(
                name=result.name,
                status=result.status,
                seconds=result.seconds,
                artifacts=list(result.artifacts),
                message=result.message,
            )
            return self._build_snapshot_locked()

    def status_of(self, name: str) -> Optional[str]:
        with self._lock:
            record = self._records.get(name)
            return record.status if record else None

    def snapshot(self) -> LedgerSnapshot:
        with self._lock:
            return self._build_snapshot_locked()

    def _build_snapshot_locked(self) -> LedgerSnapshot:
        totals = {"pass": 0, "fail": 0, "error": 0, "skipped": 0}
        checks: Dict[str, Any] = {}
        for name, record in self._records.items():
            totals[record.status] = totals.get(record.status, 0) + 1
            checks[name] = {
                "status": record.status,
                "seconds": record.seconds,
                "artifacts": record.artifacts,
                "message": record.message,
                "finished": record.finished,
            }
        return LedgerSnapshot(
            totals=totals,
            checks=checks,
            provenance=self._provenance,
            last_updated=dt.datetime.now(dt.timezone.utc),
        )

