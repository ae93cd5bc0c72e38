"""Multi-index arithmetic, anisotropic dilations and positive-homogeneous symbols.

Coordinates are always those of a semi-elliptic basis: the dilation group is
diagonal, ``(t^E x)_k = t^{1/(2 m_k)} x_k``, and a symbol collects monomials of
weighted degree ``|beta:m| = 2``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Dict, Iterable, Mapping, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from anikern.errors import DimensionError, SymbolError
from anikern.models import ComparabilityReport

logger = logging.getLogger(__name__)

IndexLike = Union["MultiIndex", Sequence[int]]
ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class WeightVector:
    m: Tuple[int, ...]

    def __post_init__(self) -> None:
        m = tuple(int(v) for v in self.m)
        if not m:
            raise DimensionError("weight vector needs at least one axis")
        if any(v < 1 for v in m):
            raise DimensionError(f"weights must be positive integers, got {m}")
        object.__setattr__(self, "m", m)

    @property
    def dim(self) -> int:
        return len(self.m)

    @property
    def mu(self) -> Fraction:
        return sum((Fraction(1, 2 * v) for v in self.m), Fraction(0))

    @property
    def dilation_exponents(self) -> Tuple[Fraction, ...]:
        return tuple(Fraction(1, 2 * v) for v in self.m)

    @cached_property
    def exponents(self) -> np.ndarray:
        return np.array([1.0 / (2 * v) for v in self.m])

    @cached_property
    def conjugate_exponents(self) -> np.ndarray:
        """Exponents of ``I - E``, the dilation under which R^# is homogeneous."""
        return 1.0 - self.exponents


@dataclass(frozen=True)
class MultiIndex:
    entries: Tuple[int, ...]

    def __post_init__(self) -> None:
        entries = tuple(int(v) for v in self.entries)
        if any(v < 0 for v in entries):
            raise DimensionError(f"multi-index entries must be non-negative, got {entries}")
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return len(self.entries)

    @property
    def order(self) -> int:
        return sum(self.entries)

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        if other.dim != self.dim:
            raise DimensionError("cannot add multi-indices of different length")
        return MultiIndex(tuple(a + b for a, b in zip(self.entries, other.entries)))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def as_multi_index(beta: IndexLike) -> MultiIndex:
    return beta if isinstance(beta, MultiIndex) else MultiIndex(tuple(beta))


def as_weights(m: Union[WeightVector, Sequence[int]]) -> WeightVector:
    return m if isinstance(m, WeightVector) else WeightVector(tuple(m))


def weighted_degree(beta: IndexLike, m: Union[WeightVector, Sequence[int]]) -> Fraction:
    """Exact ``|beta:m| = sum beta_k / m_k``."""
    beta = as_multi_index(beta)
    m = as_weights(m)
    if beta.dim != m.dim:
        raise DimensionError(f"multi-index has {beta.dim} entries, weights have {m.dim}")
    return sum((Fraction(b, w) for b, w in zip(beta.entries, m.m)), Fraction(0))


def homogeneous_order(m: Union[WeightVector, Sequence[int]]) -> Fraction:
    return as_weights(m).mu


def kappa_for(mu: Fraction) -> int:
    """Smallest integer n with mu / n < 1."""
    return math.floor(Fraction(mu)) + 1


def _as_points(x: Union[np.ndarray, Sequence[float]], dim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != dim:
        raise DimensionError(f"expected points with trailing dimension {dim}, got shape {arr.shape}")
    return arr


def dilate(m: Union[WeightVector, Sequence[int]], t: float, x) -> np.ndarray:
    """Apply ``t^E`` componentwise to ``x`` (any leading batch shape)."""
    m = as_weights(m)
    if not t > 0:
        raise ValueError(f"dilation parameter must be positive, got {t}")
    return _as_points(x, m.dim) * np.power(float(t), m.exponents)


def conjugate_dilate(m: Union[WeightVector, Sequence[int]], t: float, x) -> np.ndarray:
    """Apply ``t^{I-E}``."""
    m = as_weights(m)
    if not t > 0:
        raise ValueError(f"dilation parameter must be positive, got {t}")
    return _as_points(x, m.dim) * np.power(float(t), m.conjugate_exponents)


def sphere_samples(dim: int, n: int) -> np.ndarray:
    """Quasi-uniform points of the Euclidean unit sphere, coordinate axes included."""
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    axes = np.vstack([np.eye(dim), -np.eye(dim)])
    if dim == 2:
        # multiples of 4 keep the axes on the angular lattice
        n = max(4, 4 * math.ceil(n / 4))
        theta = 2.0 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if dim == 3:
        k = np.arange(n) + 0.5
        z = 1.0 - 2.0 * k / n
        phi = np.pi * (1.0 + 5.0**0.5) * k
        r = np.sqrt(1.0 - z**2)
        pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    else:
        pts = np.random.default_rng(0).standard_normal((n, dim))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return np.vstack([axes, pts])


@dataclass(frozen=True)
class Symbol:
    """P(xi) = sum_beta a_beta xi^beta with every |beta:m| = 2."""

    weights: WeightVector
    terms: Tuple[Tuple[MultiIndex, complex], ...]
    strict: bool = field(default=True, compare=False)

    def __post_init__(self) -> None:
        weights = as_weights(self.weights)
        object.__setattr__(self, "weights", weights)
        merged: Dict[Tuple[int, ...], complex] = {}
        for beta, coeff in self.terms:
            beta = as_multi_index(beta)
            degree = weighted_degree(beta, weights)
            if degree != 2:
                raise SymbolError(f"term {beta.entries} has weighted degree {degree}, expected 2")
            merged[beta.entries] = merged.get(beta.entries, 0j) + complex(coeff)
        if not merged:
            raise SymbolError("a symbol needs at least one term")
        terms = tuple((MultiIndex(b), c) for b, c in sorted(merged.items()))
        object.__setattr__(self, "terms", terms)
        if self.strict:
            min_value, argmin = self.positive_definite_min
            if not min_value > 0:
                raise SymbolError(
                    f"real part is not positive-definite: min {min_value:.3e} at {argmin.tolist()}"
                )

    @classmethod
    def from_terms(
        cls,
        m: Union[WeightVector, Sequence[int]],
        terms: Mapping[Tuple[int, ...], complex],
        *,
        strict: bool = True,
    ) -> "Symbol":
        return cls(
            weights=as_weights(m),
            terms=tuple((MultiIndex(tuple(b)), c) for b, c in terms.items()),
            strict=strict,
        )

    @property
    def dim(self) -> int:
        return self.weights.dim

    @property
    def real_part_only(self) -> bool:
        return all(c.imag == 0 for _, c in self.terms)

    @property
    def is_even(self) -> bool:
        return all(beta.order % 2 == 0 for beta, c in self.terms if c != 0)

    @cached_property
    def _powers(self) -> np.ndarray:
        return np.array([beta.entries for beta, _ in self.terms], dtype=int)

    @cached_property
    def _coeffs(self) -> np.ndarray:
        return np.array([c for _, c in self.terms], dtype=complex)

    @staticmethod
    def _monomials(xi: np.ndarray, powers: np.ndarray) -> np.ndarray:
        return np.prod(xi[..., None, :] ** powers, axis=-1)

    def evaluate(self, xi) -> np.ndarray:
        xi = _as_points(xi, self.dim)
        return self._monomials(xi, self._powers) @ self._coeffs

    def real(self, xi) -> np.ndarray:
        xi = _as_points(xi, self.dim)
        return self._monomials(xi, self._powers) @ self._coeffs.real

    def grad_real(self, xi) -> np.ndarray:
        xi = _as_points(xi, self.dim)
        out = np.empty(xi.shape, dtype=float)
        for k in range(self.dim):
            lowered = self._powers.copy()
            factor = lowered[:, k].astype(float)
            lowered[:, k] = np.maximum(lowered[:, k] - 1, 0)
            out[..., k] = self._monomials(xi, lowered) @ (factor * self._coeffs.real)
        return out

    def hess_real(self, xi) -> np.ndarray:
        xi = _as_points(xi, self.dim)
        out = np.empty(xi.shape + (self.dim,), dtype=float)
        for k in range(self.dim):
            for l in range(k, self.dim):
                lowered = self._powers.copy()
                factor = lowered[:, k].astype(float)
                lowered[:, k] = np.maximum(lowered[:, k] - 1, 0)
                factor = factor * lowered[:, l]
                lowered[:, l] = np.maximum(lowered[:, l] - 1, 0)
                value = self._monomials(xi, lowered) @ (factor * self._coeffs.real)
                out[..., k, l] = value
                out[..., l, k] = value
        return out

    @cached_property
    def positive_definite_min(self) -> Tuple[float, np.ndarray]:
        return check_positive_definite(self)

    def to_dict(self) -> dict:
        return {
            "m": list(self.weights.m),
            "terms": [
                {"beta": list(beta.entries), "re": c.real, "im": c.imag}
                for beta, c in self.terms
            ],
        }


def symbol_hash(symbol: Symbol) -> str:
    payload = json.dumps(symbol.to_dict(), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def symbol_from_coefficients(
    coefficients: Mapping[Tuple[Tuple[int, ...], Tuple[int, ...]], float],
    m: Union[WeightVector, Sequence[int]],
    *,
    strict: bool = True,
) -> Symbol:
    """R(xi) = sum A_{alpha beta} xi^{alpha + beta} from principal constant coefficients."""
    m = as_weights(m)
    terms: Dict[Tuple[int, ...], complex] = {}
    for (alpha, beta), value in coefficients.items():
        key = (as_multi_index(alpha) + as_multi_index(beta)).entries
        terms[key] = terms.get(key, 0j) + complex(value)
    terms = {k: v for k, v in terms.items() if v != 0}
    if not terms:
        raise SymbolError("coefficients produce the zero symbol")
    return Symbol.from_terms(m, terms, strict=strict)


def eval_symbol(symbol: Symbol, xi) -> complex:
    value = symbol.evaluate(xi)
    return complex(value) if np.ndim(value) == 0 else value


def check_homogeneity(symbol: Symbol, samples: Iterable[Tuple[float, Sequence[float]]]) -> float:
    """Max relative deviation of ``t P(xi)`` from ``P(t^E xi)`` over the samples."""
    floor = np.finfo(float).tiny
    worst = 0.0
    for t, xi in samples:
        xi = np.asarray(xi, dtype=float)
        lhs = t * symbol.evaluate(xi)
        rhs = symbol.evaluate(dilate(symbol.weights, t, xi))
        worst = max(worst, float(abs(lhs - rhs) / (abs(lhs) + floor)))
    return worst


def check_positive_definite(symbol: Symbol, n_sphere_samples: int | None = None) -> Tuple[float, np.ndarray]:
    """Minimum of R over a unit-sphere sample; positive means positive-definite."""
    d = symbol.dim
    n = 10_000 * d if n_sphere_samples is None else int(n_sphere_samples)
    if n < 2 * d:
        raise ValueError(f"need at least {2 * d} sphere samples, got {n}")
    points = sphere_samples(d, n)
    values = symbol.real(points)
    i = int(np.argmin(values))
    return float(values[i]), points[i]


def comparability_constants(
    q_fn: ArrayFn,
    r_fn: ArrayFn,
    m: Union[WeightVector, Sequence[int]],
    n_samples: int = 4096,
) -> ComparabilityReport:
    """Extreme ratios Q/R on the unit sphere; homogeneity extends them to the whole space."""
    m = as_weights(m)
    points = sphere_samples(m.dim, n_samples)
    q = np.asarray(q_fn(points), dtype=float)
    r = np.asarray(r_fn(points), dtype=float)
    if np.any(r <= 0):
        bad = points[int(np.argmin(r))]
        raise SymbolError(f"reference function is not positive-definite: vanishes near {bad.tolist()}")
    ratio = q / r
    lo, hi = int(np.argmin(ratio)), int(np.argmax(ratio))
    return ComparabilityReport(
        constant_c=float(ratio[lo]),
        constant_C=float(ratio[hi]),
        witness_points=[points[lo].tolist(), points[hi].tolist()],
    )


_MAJORANT_NODES = {1: 401, 2: 101, 3: 31}


def scaling_majorant(
    alpha: IndexLike,
    symbol: Symbol,
    epsilon: float,
    kappa: int,
    *,
    rtol: float = 1e-9,
    max_doublings: int = 60,
) -> float:
    """M_eps with ``|xi^alpha| <= eps R(xi)^kappa + M_eps`` for every xi."""
    alpha = as_multi_index(alpha)
    m = symbol.weights
    if weighted_degree(alpha, [2 * v for v in m.m]) >= kappa:
        raise SymbolError(f"|alpha:2m| must be below kappa={kappa} for a majorant to exist")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    powers = np.array(alpha.entries)

    def objective(xi: np.ndarray) -> np.ndarray:
        return np.prod(np.abs(xi) ** powers, axis=-1) - epsilon * symbol.real(xi) ** kappa

    nodes = _MAJORANT_NODES.get(m.dim, 15)
    unit = np.linspace(-1.0, 1.0, nodes)
    best, best_point = -np.inf, np.zeros(m.dim)
    t, stable = 2.0, 0
    for _ in range(max_doublings):
        radii = dilate(m, t, np.ones(m.dim))
        mesh = np.stack(np.meshgrid(*[unit * r for r in radii], indexing="ij"), axis=-1)
        values = objective(mesh.reshape(-1, m.dim))
        i = int(np.argmax(values))
        previous = best
        if values[i] > best:
            best, best_point = float(values[i]), mesh.reshape(-1, m.dim)[i]
        if np.isfinite(previous) and abs(best - previous) <= rtol * max(abs(best), 1.0):
            stable += 1
            if stable >= 2:
                break
        else:
            stable = 0
        t *= 2.0
    else:
        logger.warning("scaling majorant grid did not stabilise after %d doublings", max_doublings)

    polished = optimize.minimize(
        lambda v: -float(objective(v)),
        best_point,
        method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000},
    )
    best = max(best, -float(polished.fun))
    return max(1.0, best)
