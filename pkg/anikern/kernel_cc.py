"""Constant-coefficient heat kernels K(t, x) = (2 pi)^{-d} int e^{-i xi.x} e^{-t P(xi)} d xi.

The inverse transform is a Riemann sum over a truncated frequency box computed
with one d-dimensional FFT. Frequencies are laid out so that the FFT output
lattice refines the spatial grid by an integer factor per axis, which puts every
grid node exactly on an output sample.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.fft

from anikern.aniso_core import Symbol, symbol_hash
from anikern.config import get_settings
from anikern.errors import NyquistError
from anikern.grid import AnisoGrid
from anikern.legendre import lf_values

logger = logging.getLogger(__name__)

__all__ = [
    "AnisoGrid",
    "KernelField",
    "MassCheck",
    "check_mass",
    "check_scaling_identity",
    "frequency_box",
    "kernel_cc",
    "loglog_slope",
    "norm_profile",
    "nyquist_status",
    "support_grid",
]


@dataclass(frozen=True)
class KernelField:
    grid: AnisoGrid
    t: float
    values: np.ndarray
    symbol_hash: str

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def at_origin(self) -> complex:
        return complex(self.values[self.grid.origin_index])


class MassCheck(NamedTuple):
    deviation: float
    covered: bool


def _unit_box_boundary(dim: int, per_face: int) -> np.ndarray:
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    free = np.linspace(-1.0, 1.0, per_face)
    mesh = np.stack(np.meshgrid(*([free] * (dim - 1)), indexing="ij"), axis=-1).reshape(-1, dim - 1)
    faces = []
    for k in range(dim):
        for sign in (-1.0, 1.0):
            faces.append(np.insert(mesh, k, sign, axis=1))
    return np.vstack(faces)


def frequency_box(symbol: Symbol, t: float, threshold: Optional[float] = None) -> np.ndarray:
    """Radii L with t R >= threshold on the boundary of prod_k [-L_k, L_k].

    The box is the unit box dilated by s^E; homogeneity makes the boundary minimum
    of R equal to s times its unit-box value, so s is solved for directly.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    threshold = get_settings().freq_threshold if threshold is None else float(threshold)
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    per_face = {1: 1, 2: 4001, 3: 301}.get(symbol.dim, 41)
    boundary_min = float(np.min(symbol.real(_unit_box_boundary(symbol.dim, per_face))))
    s = threshold / (t * boundary_min)
    return np.power(s, symbol.weights.exponents)


def _minimal_freq_counts(freq_radii: np.ndarray, grid: AnisoGrid) -> List[int]:
    counts = []
    for big_l, r in zip(freq_radii, grid.radii):
        n = math.ceil(2.0 * big_l * r / math.pi)
        counts.append(max(4, n + n % 2))
    return counts


def _nyquist_violations(big_l: np.ndarray, grid: AnisoGrid, freq_counts: Sequence[int]) -> List[str]:
    out = []
    for k, (n_freq, r) in enumerate(zip(freq_counts, grid.radii)):
        spacing = 2.0 * big_l[k] / n_freq
        if spacing > math.pi / r * (1.0 + 1e-12):
            out.append(f"axis {k}: frequency spacing {spacing:.4g} exceeds pi/r = {math.pi / r:.4g}")
    return out


def nyquist_status(
    symbol: Symbol,
    t: float,
    grid: AnisoGrid,
    freq_counts: Optional[Sequence[int]] = None,
    threshold: Optional[float] = None,
) -> List[str]:
    """Aliasing violations kernel_cc would raise for this grid; empty when the grid is resolved."""
    big_l = frequency_box(symbol, t, threshold)
    if freq_counts is None:
        freq_counts = _minimal_freq_counts(big_l, grid)
    return _nyquist_violations(big_l, grid, freq_counts)


def kernel_cc(
    symbol: Symbol,
    t: float,
    grid: AnisoGrid,
    freq_counts: Optional[Sequence[int]] = None,
    threshold: Optional[float] = None,
) -> KernelField:
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if grid.dim != symbol.dim:
        raise ValueError(f"grid has dimension {grid.dim}, symbol {symbol.dim}")
    big_l = frequency_box(symbol, t, threshold)
    h = grid.spacing
    if freq_counts is None:
        freq_counts = _minimal_freq_counts(big_l, grid)
    if len(freq_counts) != grid.dim:
        raise ValueError("freq_counts must give one count per axis")
    violations = _nyquist_violations(big_l, grid, freq_counts)
    if violations:
        raise NyquistError(violations[0])

    refine = [max(1, math.ceil(big_l[k] * h[k] / math.pi)) for k in range(grid.dim)]
    lengths = []
    for k, n in enumerate(grid.counts):
        p = max(int(freq_counts[k]), 2 * refine[k] * n)
        lengths.append(p + p % 2)
    xi_axes = [
        2.0 * math.pi * scipy.fft.fftfreq(p, d=h[k] / refine[k]) for k, p in enumerate(lengths)
    ]
    d_xi = np.array([2.0 * math.pi * refine[k] / (h[k] * p) for k, p in enumerate(lengths)])
    mesh = np.stack(np.meshgrid(*xi_axes, indexing="ij"), axis=-1)
    multiplier = np.exp(-t * symbol.evaluate(mesh))
    del mesh
    transformed = scipy.fft.fftn(multiplier, workers=get_settings().fft_workers)
    transformed *= np.prod(d_xi) / (2.0 * math.pi) ** grid.dim
    picks = [
        (refine[k] * (np.arange(n) - n // 2)) % lengths[k] for k, n in enumerate(grid.counts)
    ]
    values = transformed[np.ix_(*picks)]
    return KernelField(grid=grid, t=float(t), values=values, symbol_hash=symbol_hash(symbol))


def _face_max(values: np.ndarray) -> float:
    worst = 0.0
    for axis in range(values.ndim):
        worst = max(
            worst,
            float(np.max(np.abs(np.take(values, 0, axis=axis)))),
            float(np.max(np.abs(np.take(values, -1, axis=axis)))),
        )
    return worst


def check_mass(field: KernelField) -> MassCheck:
    """|sum K dx - 1|; ``covered`` is False when the box clips the kernel's support."""
    mass = complex(np.sum(field.values) * field.grid.cell_volume)
    covered = _face_max(field.values) < 1e-12 * field.peak
    if not covered:
        logger.warning("kernel at t=%g is not negligible on the box faces; mass is unreliable", field.t)
    return MassCheck(deviation=abs(mass - 1.0), covered=covered)


def check_scaling_identity(
    symbol: Symbol,
    t: float,
    grid: AnisoGrid,
    floor: float = 1e-6,
) -> float:
    """Max relative deviation between K(t, x) and t^{-mu} K(1, t^{-E} x) over significant nodes."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    left = kernel_cc(symbol, t, grid).values
    if t == 1:
        return 0.0
    mu = float(symbol.weights.mu)
    rescaled = grid.dilated(symbol.weights.exponents, 1.0 / t)
    right = t ** (-mu) * kernel_cc(symbol, 1.0, rescaled).values
    mask = np.abs(left) > floor * np.max(np.abs(left))
    return float(np.max(np.abs(left[mask] - right[mask]) / np.abs(left[mask])))


def support_grid(
    symbol: Symbol,
    t: float = 1.0,
    decay: float = 80.0,
    min_count: int = 16,
    threshold: Optional[float] = None,
) -> AnisoGrid:
    """Grid whose box reaches R^# = decay along every axis and whose spacing resolves the frequency box."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    d = symbol.dim
    exps = symbol.weights.exponents
    axes = np.vstack([np.eye(d), -np.eye(d)])
    on_axes = lf_values(symbol, axes).reshape(2, d).min(axis=0)
    radii_one = np.power(decay / on_axes, 1.0 - exps)
    freq_one = frequency_box(symbol, 1.0, threshold)
    counts = []
    for r, big_l in zip(radii_one, freq_one):
        n = math.ceil(2.0 * r * big_l / math.pi)
        counts.append(max(min_count, n + n % 2))
    return AnisoGrid(radii=tuple(radii_one * np.power(t, exps)), counts=tuple(counts))


def norm_profile(
    symbol: Symbol,
    s: float,
    times: Sequence[float],
    base_grid: Optional[AnisoGrid] = None,
) -> List[Tuple[float, float]]:
    """Discrete L^s norms of K(t, .) on grids dilated with t so nodes correspond across times."""
    if s < 1:
        raise ValueError(f"s must be at least 1, got {s}")
    base_grid = base_grid or support_grid(symbol, 1.0)
    profile = []
    for t in times:
        grid = base_grid.dilated(symbol.weights.exponents, t)
        magnitude = np.abs(kernel_cc(symbol, t, grid).values)
        if math.isinf(s):
            norm = float(np.max(magnitude))
        else:
            norm = float((np.sum(magnitude**s) * grid.cell_volume) ** (1.0 / s))
        profile.append((float(t), norm))
    return profile


def loglog_slope(pairs: Sequence[Tuple[float, float]]) -> float:
    xs = np.log([p[0] for p in pairs])
    ys = np.log([p[1] for p in pairs])
    return float(np.polyfit(xs, ys, 1)[0])
