"""Report and data emission: JSON reports, CSV tables, the kernel binary cache and matrix export."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel

from anikern.grid import AnisoGrid
from anikern.kernel_cc import KernelField
from anikern.legendre import LFField
from anikern.models import BoundFit
from anikern.operator_vc import DiscreteOperator

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def to_builtin(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def write_json(path: PathLike, payload: Any) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_builtin(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return str(path)


def write_table(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return str(path)


def write_kernel_csv(path: PathLike, field: KernelField) -> str:
    """Columns t, x_1..x_d, re, im, abs."""
    d = field.grid.dim
    nodes = field.grid.nodes().reshape(-1, d)
    values = field.values.reshape(-1)
    header = ["t"] + [f"x_{k + 1}" for k in range(d)] + ["re", "im", "abs"]
    rows = (
        [field.t, *node, value.real, value.imag, abs(value)] for node, value in zip(nodes, values)
    )
    return write_table(path, header, rows)


def write_kernel_cache(path: PathLike, field: KernelField) -> str:
    """One JSON header line, then the values as little-endian float64 (re, im interleaved)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "grid": field.grid.to_dict(),
        "t": field.t,
        "symbol_hash": field.symbol_hash,
        "layout": "complex-interleaved",
    }
    payload = np.ascontiguousarray(field.values, dtype=np.complex128).view(np.float64)
    with path.open("wb") as handle:
        handle.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        handle.write(payload.astype("<f8").tobytes())
    return str(path)


def read_kernel_cache(path: PathLike) -> KernelField:
    with Path(path).open("rb") as handle:
        header = json.loads(handle.readline().decode("utf-8"))
        raw = np.frombuffer(handle.read(), dtype="<f8")
    grid = AnisoGrid(radii=tuple(header["grid"]["radii"]), counts=tuple(header["grid"]["counts"]))
    values = raw.astype(np.float64).view(np.complex128).reshape(grid.shape)
    return KernelField(grid=grid, t=float(header["t"]), values=values, symbol_hash=header["symbol_hash"])


def write_lf_csv(path: PathLike, field: LFField) -> str:
    d = field.grid.dim
    nodes = field.grid.nodes().reshape(-1, d)
    header = (
        [f"x_{k + 1}" for k in range(d)] + ["lf_value"] + [f"argmax_{k + 1}" for k in range(d)] + ["status"]
    )
    rows = (
        [*node, value, *argmax, status]
        for node, value, argmax, status in zip(
            nodes, field.values.reshape(-1), field.argmax.reshape(-1, d), field.status.reshape(-1)
        )
    )
    return write_table(path, header, rows)


def write_margins_csv(path: PathLike, fit: BoundFit) -> str:
    return write_table(path, ["sample", "margin"], enumerate(fit.margins))


def export_coo(path: PathLike, op: DiscreteOperator) -> str:
    """Coordinate text format: one ``row col re im`` line per stored entry."""
    coo = sp.coo_matrix(op.matrix)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        handle.write(f"# {op.size} {op.size} {coo.nnz}\n")
        for row, col, value in zip(coo.row, coo.col, coo.data):
            handle.write(f"{int(row)} {int(col)} {float(value.real)!r} {float(value.imag)!r}\n")
    logger.debug("exported %d entries to %s", coo.nnz, path)
    return str(path)
