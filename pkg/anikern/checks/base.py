from __future__ import annotations

import logging
import threading
import time
import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, ClassVar, Dict, List, Optional, Tuple

import numpy as np

from anikern.aniso_core import Symbol, symbol_hash
from anikern.artifacts import to_builtin, write_json
from anikern.errors import ConfigError
from anikern.grid import AnisoGrid
from anikern.models import CheckResult, CoefficientFieldSpec, ExperimentConfig
from anikern.operator_vc import CoefficientField
from anikern.runtime import Provenance

logger = logging.getLogger(__name__)


@dataclass
class CheckOutcome:
    passed: bool
    detail: Dict[str, Any] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)
    message: Optional[str] = None


class CheckContext:
    """Shared state of one run: the validated config, output paths and memoized heavy objects."""

    def __init__(
        self,
        config: ExperimentConfig,
        base_dir: Path = Path("."),
        config_path: Optional[Path] = None,
    ) -> None:
        self.config = config
        self.base_dir = Path(base_dir)
        self.config_path = config_path
        self.out_dir = Path(config.output_dir)
        self._lock = threading.Lock()
        self._key_locks: Dict[Any, threading.Lock] = {}
        self._memo: Dict[Any, Any] = {}
        self._reports: Dict[str, CheckResult] = {}

    @property
    def seed(self) -> int:
        return self.config.seed

    def rng(self, name: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(name.encode("utf-8"))])

    def memo(self, key: Any, factory: Callable[[], Any]) -> Any:
        with self._lock:
            if key in self._memo:
                return self._memo[key]
            key_lock = self._key_locks.setdefault(key, threading.Lock())
        with key_lock:
            with self._lock:
                if key in self._memo:
                    return self._memo[key]
            value = factory()
            with self._lock:
                self._memo[key] = value
            return value

    def publish(self, result: CheckResult) -> None:
        with self._lock:
            self._reports[result.name] = result

    def result_of(self, name: str) -> Optional[CheckResult]:
        with self._lock:
            return self._reports.get(name)

    def artifact(self, filename: str) -> Path:
        return self.out_dir / filename

    def provenance(self) -> Provenance:
        def build() -> Provenance:
            grid = self.base_grid()
            return Provenance(
                symbol_hash=symbol_hash(self.symbol()),
                grid=grid.to_dict() if grid is not None else None,
                seed=self.seed,
                config_path=str(self.config_path) if self.config_path is not None else None,
            )

        return self.memo("provenance", build)

    def write_report(self, filename: str, detail: Any) -> str:
        """JSON report of one check, stamped with the run provenance."""
        payload = to_builtin(detail)
        payload["provenance"] = self.provenance()
        return write_json(self.artifact(filename), payload)

    def coefficients(self) -> CoefficientField:
        if self.config.coefficients is None:
            raise ConfigError("this check needs a coefficient field in the config")

        def load() -> CoefficientField:
            path = self.base_dir / self.config.coefficients
            spec = CoefficientFieldSpec.model_validate_json(path.read_text(encoding="utf-8"))
            return CoefficientField.from_spec(spec, path.parent)

        return self.memo("coefficients", load)

    def symbol(self) -> Symbol:
        if self.config.symbol is not None:
            return self.memo("symbol", self.config.symbol.to_symbol)
        return self.memo("symbol", lambda: self.coefficients().reference_symbol)

    def base_grid(self) -> Optional[AnisoGrid]:
        return self.config.grid.to_grid() if self.config.grid is not None else None


class Check(ABC):
    name: ClassVar[str]
    depends_on: ClassVar[Tuple[str, ...]] = ()

    def execute(self, ctx: CheckContext) -> CheckResult:
        started = time.perf_counter()
        try:
            outcome = self.run(ctx)
        except Exception as exc:
            logger.exception("check %s raised", self.name)
            result = CheckResult(
                name=self.name,
                status="error",
                seconds=time.perf_counter() - started,
                message=f"{type(exc).__name__}: {exc}",
            )
        else:
            result = CheckResult(
                name=self.name,
                status="pass" if outcome.passed else "fail",
                seconds=time.perf_counter() - started,
                detail=to_builtin(outcome.detail),
                artifacts=outcome.artifacts,
                message=outcome.message,
            )
        ctx.publish(result)
        return result

    @abstractmethod
    def run(self, ctx: CheckContext) -> CheckOutcome:
        """Compute the check and decide its acceptance predicate."""
