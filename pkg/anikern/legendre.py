"""Legendre-Fenchel transform R^#(x) = sup_xi {x.xi - R(xi)} of a symbol's real part.

R is homogeneous but need not be convex, so every evaluation runs a global
coarse scan over a dilated box that provably contains the maximizer, followed by
a batched, eigenvalue-modified Newton ascent from the best scan nodes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from anikern.aniso_core import Symbol, conjugate_dilate, sphere_samples
from anikern.config import get_settings
from anikern.errors import LegendreDivergenceError, SymbolError
from anikern.grid import AnisoGrid
from anikern.models import LFOptions

logger = logging.getLogger(__name__)

_COARSE_NODES = {1: 81, 2: 41, 3: 17}
_CHUNK_BUDGET = 400_000


@dataclass(frozen=True)
class LFResult:
    value: float
    argmax: np.ndarray
    status: Literal["converged", "grid_only"]
    iterations: int


@dataclass(frozen=True)
class LFField:
    grid: AnisoGrid
    values: np.ndarray
    argmax: np.ndarray
    status: np.ndarray


def default_options() -> LFOptions:
    settings = get_settings()
    return LFOptions(n_starts=settings.lf_n_starts, tol=settings.lf_tol)


def _require_positive_definite(symbol: Symbol) -> None:
    min_value, argmin = symbol.positive_definite_min
    if not min_value > 0:
        raise SymbolError(
            f"Legendre transform needs a positive-definite symbol (min {min_value:.3e} at {argmin.tolist()})"
        )


def _objective(symbol: Symbol, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    return np.sum(x * xi, axis=-1) - symbol.real(xi)


def _radius_parameters(symbol: Symbol, x: np.ndarray) -> np.ndarray:
    """Smallest t (to bisection accuracy) with R >= 2|x.xi| on the boundary of t^E(unit ball)."""
    omega = np.abs(sphere_samples(symbol.dim, 256))
    r_omega = symbol.real(sphere_samples(symbol.dim, 256))
    exps = symbol.weights.exponents
    absx = np.abs(x)

    def admissible(t: np.ndarray) -> np.ndarray:
        scaled = absx * np.power(t[:, None], exps)
        pairing = scaled @ omega.T
        return np.all(t[:, None] * r_omega[None, :] >= 2.0 * pairing, axis=1)

    hi = np.ones(len(x))
    for _ in range(2000):
        bad = ~admissible(hi)
        if not bad.any():
            break
        hi[bad] *= 2.0
    lo = hi.copy()
    for _ in range(2000):
        good = admissible(lo)
        if not good.any() or lo.min() < 1e-280:
            break
        lo[good] *= 0.5
    lo = np.minimum(lo, hi)
    for _ in range(40):
        mid = np.sqrt(lo * hi)
        good = admissible(mid)
        hi = np.where(good, mid, hi)
        lo = np.where(good, lo, mid)
    return hi


def _ascend(
    symbol: Symbol,
    x: np.ndarray,
    starts: np.ndarray,
    tol: float,
    max_iter: int,
    scale: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, int]:
    """Batched modified-Newton ascent; x has shape (n, d), starts (n, k, d)."""
    z = starts.copy()
    xb = x[:, None, :]
    eps = np.finfo(float).eps
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grad = xb - symbol.grad_real(z)
        active = np.max(np.abs(grad), axis=-1) >= tol
        if not active.any():
            iterations -= 1
            break
        w, v = np.linalg.eigh(symbol.hess_real(z))
        floor = 1e-12 * np.maximum(1.0, np.max(np.abs(w), axis=-1, keepdims=True))
        w = np.maximum(np.abs(w), floor)
        step = np.einsum("...ij,...j->...i", v, np.einsum("...ji,...j->...i", v, grad) / w)
        f0 = _objective(symbol, xb, z)
        slope = np.sum(grad * step, axis=-1)
        alpha = np.ones(f0.shape)
        slack = 16.0 * eps * (1.0 + np.abs(f0))
        for _ in range(60):
            f1 = _objective(symbol, xb, z + alpha[..., None] * step)
            accept = (f1 >= f0 + 1e-4 * alpha * slope - slack) | ~active
            if accept.all():
                break
            alpha = np.where(accept, alpha, 0.5 * alpha)
        z = np.where(active[..., None], z + alpha[..., None] * step, z)
        if np.any(np.abs(z) > 1e8 * (1.0 + scale[:, None, :])):
            raise LegendreDivergenceError("ascent diverged; the objective looks unbounded")
    return z, np.max(np.abs(xb - symbol.grad_real(z)), axis=-1), iterations


def _lf_batch(
    symbol: Symbol,
    x: np.ndarray,
    opts: LFOptions,
    warm: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    n, d = x.shape
    if opts.coarse_grid_radius_t is not None:
        t_star = np.full(n, opts.coarse_grid_radius_t)
    else:
        t_star = _radius_parameters(symbol, x)
    radii = np.power(t_star[:, None], symbol.weights.exponents)
    nodes = opts.coarse_nodes or _COARSE_NODES.get(d, 11)
    unit = np.stack(np.meshgrid(*([np.linspace(-1.0, 1.0, nodes)] * d), indexing="ij"), axis=-1)
    unit = unit.reshape(-1, d)
    coarse = radii[:, None, :] * unit[None, :, :]
    values = _objective(symbol, x[:, None, :], coarse)
    k = min(opts.n_starts, unit.shape[0])
    best = np.argpartition(-values, k - 1, axis=1)[:, :k]
    starts = [np.take_along_axis(coarse, best[..., None], axis=1), np.zeros((n, 1, d))]
    if warm is not None:
        starts.append(warm.reshape(n, -1, d))
    starts = np.concatenate(starts, axis=1)
    z, gnorm, iterations = _ascend(symbol, x, starts, opts.tol, opts.max_iter, radii)
    objective = _objective(symbol, x[:, None, :], z)
    winner = np.argmax(objective, axis=1)
    rows = np.arange(n)
    value = np.maximum(objective[rows, winner], 0.0)
    return value, z[rows, winner], gnorm[rows, winner] < opts.tol, iterations


def _chunks(n: int, per_point: int) -> Iterable[slice]:
    size = max(1, _CHUNK_BUDGET // max(per_point, 1))
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


def lf_batch(
    symbol: Symbol,
    points,
    opts: Optional[LFOptions] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Values, maximizers and convergence flags of R^# at every row of ``points``."""
    _require_positive_definite(symbol)
    opts = opts or default_options()
    pts = np.asarray(points, dtype=float).reshape(-1, symbol.dim)
    values = np.zeros(len(pts))
    argmax = np.zeros_like(pts)
    converged = np.ones(len(pts), dtype=bool)
    nonzero = np.flatnonzero(np.any(pts != 0, axis=1))
    per_point = (opts.coarse_nodes or _COARSE_NODES.get(symbol.dim, 11)) ** symbol.dim * len(symbol.terms)
    for chunk in _chunks(len(nonzero), per_point):
        idx = nonzero[chunk]
        v, a, c, _ = _lf_batch(symbol, pts[idx], opts)
        values[idx], argmax[idx], converged[idx] = v, a, c
    if not converged.all():
        logger.warning("Legendre ascent stopped above tolerance at %d of %d points", int((~converged).sum()), len(pts))
    return values, argmax, converged


def lf_values(symbol: Symbol, points, opts: Optional[LFOptions] = None) -> np.ndarray:
    values, _, _ = lf_batch(symbol, points, opts)
    return values.reshape(np.shape(points)[:-1])


def lf_evaluator(symbol: Symbol, opts: Optional[LFOptions] = None) -> Callable[[np.ndarray], np.ndarray]:
    return lambda points: lf_values(symbol, points, opts)


def lf_point(symbol: Symbol, x: Sequence[float], opts: Optional[LFOptions] = None) -> LFResult:
    _require_positive_definite(symbol)
    opts = opts or default_options()
    x = np.asarray(x, dtype=float).reshape(1, symbol.dim)
    if not np.any(x):
        return LFResult(value=0.0, argmax=np.zeros(symbol.dim), status="converged", iterations=0)
    value, argmax, converged, iterations = _lf_batch(symbol, x, opts)
    status = "converged" if converged[0] else "grid_only"
    if status == "grid_only":
        logger.warning("Legendre ascent did not reach tol=%.1e at x=%s", opts.tol, x[0].tolist())
    return LFResult(value=float(value[0]), argmax=argmax[0], status=status, iterations=iterations)


def lf_grid(symbol: Symbol, grid: AnisoGrid, opts: Optional[LFOptions] = None) -> LFField:
    """R^# at every grid node; each slice along the first axis warm-starts the next."""
    _require_positive_definite(symbol)
    opts = opts or default_options()
    nodes = grid.nodes()
    d = grid.dim
    values = np.zeros(grid.shape)
    argmax = np.zeros(grid.shape + (d,))
    converged = np.ones(grid.shape, dtype=bool)
    warm: Optional[np.ndarray] = None
    for i in range(grid.shape[0]):
        pts = nodes[i].reshape(-1, d)
        nonzero = np.any(pts != 0, axis=1)
        v = np.zeros(len(pts))
        a = np.zeros_like(pts)
        c = np.ones(len(pts), dtype=bool)
        if nonzero.any():
            w = None if warm is None else warm[nonzero]
            v[nonzero], a[nonzero], c[nonzero], _ = _lf_batch(symbol, pts[nonzero], opts, w)
        values[i] = v.reshape(values[i].shape)
        argmax[i] = a.reshape(argmax[i].shape)
        converged[i] = c.reshape(converged[i].shape)
        warm = a
    status = np.where(converged, "converged", "grid_only")
    return LFField(grid=grid, values=values, argmax=argmax, status=status)


def check_lf_homogeneity(
    symbol: Symbol,
    samples: Iterable[Tuple[float, Sequence[float]]],
    opts: Optional[LFOptions] = None,
) -> float:
    """Max relative deviation of ``t R^#(x)`` from ``R^#(t^{I-E} x)``."""
    samples = list(samples)
    if not samples:
        return 0.0
    ts = np.array([float(t) for t, _ in samples])
    xs = np.array([np.asarray(x, dtype=float) for _, x in samples]).reshape(-1, symbol.dim)
    scaled = np.array([conjugate_dilate(symbol.weights, t, x) for t, x in zip(ts, xs)])
    lhs = ts * lf_values(symbol, xs, opts)
    rhs = lf_values(symbol, scaled, opts)
    return float(np.max(np.abs(lhs - rhs) / (np.abs(lhs) + np.finfo(float).tiny)))


def lf_separable_closed_form(symbol: Symbol, x) -> np.ndarray:
    """Closed form for R = sum_k c_k xi_k^{2 m_k} with c_k > 0."""
    m = symbol.weights.m
    coeffs = np.zeros(symbol.dim)
    for beta, c in symbol.terms:
        axes = [k for k, b in enumerate(beta.entries) if b]
        if len(axes) != 1 or beta.entries[axes[0]] != 2 * m[axes[0]] or c.imag or c.real <= 0:
            raise SymbolError("closed form needs a sum of positive one-axis powers xi_k^(2 m_k)")
        coeffs[axes[0]] += c.real
    if np.any(coeffs == 0):
        raise SymbolError("closed form needs every axis present")
    x = np.abs(np.asarray(x, dtype=float))
    two_m = 2.0 * np.array(m)
    factor = (two_m - 1.0) / two_m * np.power(two_m * coeffs, -1.0 / (two_m - 1.0))
    return np.sum(factor * np.power(x, two_m / (two_m - 1.0)), axis=-1)


def fenchel_young_slack(symbol: Symbol, xs, xis, opts: Optional[LFOptions] = None) -> float:
    """min over pairs of R(xi) + R^#(x) - x.xi; non-negative up to rounding."""
    xs = np.asarray(xs, dtype=float).reshape(-1, symbol.dim)
    xis = np.asarray(xis, dtype=float).reshape(-1, symbol.dim)
    slack = symbol.real(xis) + lf_values(symbol, xs, opts) - np.sum(xs * xis, axis=-1)
    return float(np.min(slack))


def lf_growth_rays(
    symbol: Symbol,
    n_rays: int = 10,
    magnitudes: Sequence[float] = (1.0, 10.0, 100.0, 1e3, 1e4),
    opts: Optional[LFOptions] = None,
) -> np.ndarray:
    """R^# along ``n_rays`` unit directions at increasing magnitudes, shape (rays, magnitudes)."""
    directions = sphere_samples(symbol.dim, n_rays)[:n_rays]
    points = directions[:, None, :] * np.asarray(magnitudes, dtype=float)[None, :, None]
    return lf_values(symbol, points, opts)


def lf_integrability(
    symbol: Symbol,
    q_fn: Callable[[np.ndarray], np.ndarray] = lambda x: np.sum(x**2, axis=-1),
    radius: float = 2.0,
    spacing: float = 0.25,
    doublings: int = 4,
    opts: Optional[LFOptions] = None,
) -> np.ndarray:
    """Trapezoid integrals of Q e^{-R^#} over boxes of radius ``radius * 2^j``."""
    integrals = []
    for j in range(doublings):
        r = radius * 2.0**j
        n = int(round(2 * r / spacing)) + 1
        axis = np.linspace(-r, r, n)
        mesh = np.stack(np.meshgrid(*([axis] * symbol.dim), indexing="ij"), axis=-1)
        integrand = q_fn(mesh) * np.exp(-lf_values(symbol, mesh, opts))
        for _ in range(symbol.dim):
            integrand = trapezoid(integrand, axis, axis=0)
        integrals.append(float(integrand))
    return np.array(integrals)
