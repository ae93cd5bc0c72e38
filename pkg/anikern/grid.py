from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import List, Sequence, Tuple

import numpy as np

from anikern.errors import GridError


@dataclass(frozen=True)
class AnisoGrid:
    """Node-centred tensor grid on the box prod_k [-r_k, r_k].

    Axis k carries the ``counts[k]`` nodes ``(j - counts[k]/2) h_k`` with
    ``h_k = 2 r_k / counts[k]``, so the origin is a node and ``-r_k`` is the
    first node. Dirichlet discretizations use the interior nodes, i.e. every
    node except ``-r_k``.
    """

    radii: Tuple[float, ...]
    counts: Tuple[int, ...]

    def __post_init__(self) -> None:
        radii = tuple(float(r) for r in self.radii)
        counts = tuple(int(c) for c in self.counts)
        if not radii or len(radii) != len(counts):
            raise GridError("radii and counts must be non-empty and of equal length")
        if any(r <= 0 for r in radii):
            raise GridError(f"radii must be positive, got {radii}")
        if any(c % 2 for c in counts):
            raise GridError("counts must be even")
        if any(c < 4 for c in counts):
            raise GridError("counts must be at least 4")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "counts", counts)

    @property
    def dim(self) -> int:
        return len(self.radii)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.counts

    @cached_property
    def spacing(self) -> np.ndarray:
        return 2.0 * np.array(self.radii) / np.array(self.counts)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def axes(self) -> List[np.ndarray]:
        return [h * (np.arange(n) - n // 2) for h, n in zip(self.spacing, self.counts)]

    @property
    def origin_index(self) -> Tuple[int, ...]:
        return tuple(n // 2 for n in self.counts)

    def nodes(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    @cached_property
    def interior_axes(self) -> List[np.ndarray]:
        return [axis[1:] for axis in self.axes]

    @property
    def interior_shape(self) -> Tuple[int, ...]:
        return tuple(n - 1 for n in self.counts)

    @property
    def interior_size(self) -> int:
        return int(np.prod(self.interior_shape))

    def interior_nodes(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.interior_axes, indexing="ij"), axis=-1)

    def interior_index(self, point: Sequence[float]) -> Tuple[int, ...]:
        """Multi-index of the interior node nearest to ``point``."""
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            raise GridError(f"point must have {self.dim} coordinates")
        index = []
        for axis, x in zip(self.interior_axes, point):
            j = int(np.argmin(np.abs(axis - x)))
            if abs(axis[j] - x) > 0.5 * (axis[1] - axis[0]) + 1e-12:
                raise GridError(f"point {point.tolist()} lies outside the grid")
            index.append(j)
        return tuple(index)

    def dilated(self, exponents: np.ndarray, t: float) -> "AnisoGrid":
        """Same counts on the box scaled by ``t^{exponents}`` (nodes map onto nodes)."""
        scale = np.power(float(t), np.asarray(exponents, dtype=float))
        return AnisoGrid(radii=tuple(np.array(self.radii) * scale), counts=self.counts)

    def to_dict(self) -> dict:
        return {"radii": list(self.radii), "counts": list(self.counts)}
