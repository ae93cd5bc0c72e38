"""Command line: ``python -m anikern <subcommand> --config experiment.json``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from anikern.aniso_core import kappa_for, symbol_hash
from anikern.checks import NEEDS_COEFFICIENTS, PRESETS, CheckContext
from anikern.checks.runner import run_checks, write_summary
from anikern.config import get_settings
from anikern.errors import AnikernError, ConfigError
from anikern.kernel_cc import nyquist_status, support_grid
from anikern.models import Diagnostics, ExperimentConfig, SymbolSpec
from anikern.runtime import RunLedger

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _format_validation(exc: ValidationError) -> List[str]:
    out = []
    for error in exc.errors():
        loc = ".".join(str(part) for part in error.get("loc", ()))
        out.append(f"{loc}: {error['msg']}" if loc else error["msg"])
    return out


def load_config(path: Path, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError("config failed validation", errors=_format_validation(exc)) from exc
    if config.coefficients is not None and not (path.parent / config.coefficients).is_file():
        raise ConfigError(f"coefficient file {config.coefficients} not found")
    return config


def prepare_context(
    config: ExperimentConfig,
    base_dir: Path,
    checks: Sequence[str],
    config_path: Optional[Path] = None,
) -> CheckContext:
    """Context with every input loaded; raises ConfigError before any artifact is written."""
    missing = sorted(set(checks) & NEEDS_COEFFICIENTS)
    if missing and config.coefficients is None:
        raise ConfigError(f"checks {', '.join(missing)} need a coefficient field in the config")
    ctx = CheckContext(config, base_dir, config_path)
    try:
        if config.coefficients is not None:
            ctx.coefficients()
        ctx.symbol()
    except ValidationError as exc:
        raise ConfigError("coefficient field failed validation", errors=_format_validation(exc)) from exc
    except (AnikernError, OSError) as exc:
        raise ConfigError(f"{type(exc).__name__}: {exc}") from exc
    return ctx


def diagnose(path: Path) -> Diagnostics:
    try:
        config = load_config(path)
        ctx = prepare_context(config, path.parent, config.checks)
    except ConfigError as exc:
        return Diagnostics(valid=False, errors=exc.errors)
    symbol = ctx.symbol()
    mu = symbol.weights.mu
    grid = ctx.base_grid() or support_grid(symbol, 1.0)
    nyquist = {}
    for t in config.times:
        violations = nyquist_status(symbol, t, grid.dilated(symbol.weights.exponents, t), config.freq_counts)
        nyquist[f"{t:g}"] = "; ".join(violations) if violations else "ok"
    derived = {
        "dim": symbol.dim,
        "m": list(symbol.weights.m),
        "mu": str(mu),
        "mu_float": float(mu),
        "kappa": config.kappa or kappa_for(mu),
        "symbol_hash": symbol_hash(symbol),
        "symbol": SymbolSpec.from_symbol(symbol).model_dump(),
        "grid": grid.to_dict(),
        "nyquist": nyquist,
        "checks": list(config.checks),
    }
    return Diagnostics(valid=True, derived=derived)


def execute(path: Path, checks: Optional[Sequence[str]], overrides: Dict[str, Any], jobs: int) -> int:
    config = load_config(path, overrides)
    if checks is not None:
        config = config.model_copy(update={"checks": list(checks)})
    if not config.checks:
        raise ConfigError("config lists no checks to run")
    ctx = prepare_context(config, path.parent, config.checks, config_path=path)
    ledger = RunLedger(ctx.provenance())
    results = run_checks(ctx, config.checks, jobs=jobs, ledger=ledger)
    summary = write_summary(ctx, results, ledger)
    logger.info("summary written to %s", summary)
    return EXIT_OK if all(r.status == "pass" for r in results.values()) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="experiment JSON document")
    common.add_argument("--jobs", type=int, default=None, help="concurrent checks (default: logical cores)")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("--out", type=str, default=None, help="overrides the config output_dir")

    parser = argparse.ArgumentParser(
        prog="anikern",
        description="Heat-kernel experiments for positive-homogeneous operators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, checks in PRESETS.items():
        sub.add_parser(name, parents=[common], help=f"run {', '.join(checks)}")
    sub.add_parser("run", parents=[common], help="run the checks listed in the config")
    sub.add_parser("validate", parents=[common], help="validate the config and list derived quantities")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    logging.basicConfig(
        level=settings.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    if args.command == "validate":
        diagnostics = diagnose(args.config)
        print(diagnostics.model_dump_json(indent=2))
        return EXIT_OK if diagnostics.valid else EXIT_CONFIG

    if args.jobs is not None and args.jobs < 1:
        logger.error("--jobs must be at least 1")
        return EXIT_CONFIG
    checks: Optional[Tuple[str, ...]] = PRESETS.get(args.command)
    overrides = {"seed": args.seed, "output_dir": args.out}
    try:
        return execute(args.config, checks, overrides, args.jobs or settings.jobs)
    except ConfigError as exc:
        logger.error("%s", exc)
        for line in exc.errors:
            if line == str(exc):
                continue
            logger.error("  %s", line)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
