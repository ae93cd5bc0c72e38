"""Dirichlet discretizations of divergence-form operators H = sum D^beta a_{alpha beta}(x) D^alpha.

Unknowns live on the interior nodes of an :class:`AnisoGrid`. Along each axis the
first difference ``D`` maps the unknowns, zero-padded at both ends, to the
staggered midpoints. Even orders compose ``-D^T D``; odd orders finish with
``D`` when both indices of a pair are odd on that axis (staggered evaluation),
otherwise with the centred difference obtained by averaging ``D`` back onto the
nodes. With ``D^alpha = i^{|alpha|} prod_k d_k^{alpha_k}`` (multiplier xi^alpha under the
transform pair used by :mod:`anikern.kernel_cc`) the assembled matrix
``sum B_beta^H diag(a) B_alpha`` reproduces the form
``Q(f, g) = sum_x a (B_alpha f) conj(B_beta g) prod_k h_k`` exactly.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.polynomial import Polynomial

from anikern.aniso_core import (
    Symbol,
    WeightVector,
    as_weights,
    symbol_from_coefficients,
    weighted_degree,
)
from anikern.config import get_settings
from anikern.errors import CoefficientError, DimensionError, GridError, SymbolError, TwistError
from anikern.grid import AnisoGrid
from anikern.models import CoefficientFieldSpec

logger = logging.getLogger(__name__)

Index = Tuple[int, ...]
PairKey = Tuple[Index, Index]

PRINCIPAL_FLOOR = 0.75
_HERMITIAN_TOL = 1e-12


# --------------------------------------------------------------------------- coefficients


def _pair_key(alpha: Sequence[int], beta: Sequence[int]) -> PairKey:
    return tuple(int(a) for a in alpha), tuple(int(b) for b in beta)


def principal_indices(m: WeightVector) -> List[Index]:
    """All multi-indices with |alpha:m| = 1, in lexicographic order."""
    found = []
    for alpha in np.ndindex(*[v + 1 for v in m.m]):
        if weighted_degree(alpha, m) == 1:
            found.append(tuple(int(a) for a in alpha))
    return found


@dataclass(eq=False)
class CoefficientField:
    """Grid samples of a_{alpha beta} plus the constant principal reference A.

    Construction validates the Hermitian pairing, records Gamma (the largest
    coefficient magnitude) and certifies the principal comparability bounds
    ``(3/4) A <= a(x) <= C A`` node by node, recording ``C``.
    """

    m: WeightVector
    grid: AnisoGrid
    pairs: Dict[PairKey, np.ndarray]
    reference: Dict[PairKey, complex]
    gamma: float = field(init=False)
    upper_constant: float = field(init=False)
    lower_ratio: float = field(init=False)

    def __post_init__(self) -> None:
        self.m = as_weights(self.m)
        if self.grid.dim != self.m.dim:
            raise DimensionError(f"grid has dimension {self.grid.dim}, weights {self.m.dim}")
        pairs: Dict[PairKey, np.ndarray] = {}
        for (alpha, beta), values in self.pairs.items():
            key = _pair_key(alpha, beta)
            for index in key:
                if len(index) != self.m.dim:
                    raise DimensionError(f"multi-index {index} does not match dimension {self.m.dim}")
                if weighted_degree(index, self.m) > 1:
                    raise CoefficientError(f"|{index}:m| exceeds 1")
            arr = np.broadcast_to(np.asarray(values, dtype=complex), self.grid.shape).copy()
            if not np.all(np.isfinite(arr)):
                raise CoefficientError(f"coefficient {key} has non-finite samples")
            pairs[key] = arr
        if not pairs:
            raise CoefficientError("a coefficient field needs at least one pair")
        self.pairs = pairs
        self.reference = {_pair_key(a, b): complex(v) for (a, b), v in self.reference.items()}
        self.gamma = max(float(np.max(np.abs(v))) for v in pairs.values())
        self._check_hermitian()
        self.lower_ratio, self.upper_constant = self._certify_principal()

    def _check_hermitian(self) -> None:
        scale = max(self.gamma, 1.0)
        for (alpha, beta), values in self.pairs.items():
            partner = self.pairs.get((beta, alpha))
            if partner is None:
                raise CoefficientError(f"pair {(alpha, beta)} has no Hermitian partner {(beta, alpha)}")
            gap = float(np.max(np.abs(values - np.conj(partner))))
            if gap > _HERMITIAN_TOL * scale:
                raise CoefficientError(
                    f"coefficients {(alpha, beta)} and {(beta, alpha)} are not conjugate (gap {gap:.3e})"
                )
        for (alpha, beta), value in self.reference.items():
            partner = self.reference.get((beta, alpha))
            if partner is None or abs(value - np.conj(partner)) > _HERMITIAN_TOL * scale:
                raise CoefficientError(f"reference pair {(alpha, beta)} is not Hermitian")

    def _reference_matrix(self, principal: List[Index]) -> np.ndarray:
        where = {alpha: i for i, alpha in enumerate(principal)}
        matrix = np.zeros((len(principal), len(principal)), dtype=complex)
        for (alpha, beta), value in self.reference.items():
            if alpha not in where or beta not in where:
                raise CoefficientError(f"reference pair {(alpha, beta)} is not principal")
            matrix[where[alpha], where[beta]] = value
        return matrix

    def principal_block(self) -> np.ndarray:
        """Node-wise principal matrices, shape (nodes, p, p)."""
        principal = principal_indices(self.m)
        where = {alpha: i for i, alpha in enumerate(principal)}
        block = np.zeros((int(np.prod(self.grid.shape)), len(principal), len(principal)), dtype=complex)
        for (alpha, beta), values in self.pairs.items():
            if alpha in where and beta in where:
                block[:, where[alpha], where[beta]] = values.reshape(-1)
        return block

    def _certify_principal(self) -> Tuple[float, float]:
        principal = principal_indices(self.m)
        reference = self._reference_matrix(principal)
        weights, vectors = np.linalg.eigh(reference)
        top = float(np.max(np.abs(weights))) if weights.size else 0.0
        if top == 0.0 or np.min(weights) < -1e-12 * top:
            raise CoefficientError("reference coefficients are not positive semidefinite")
        keep = weights > 1e-12 * top
        range_basis = vectors[:, keep]
        null_basis = vectors[:, ~keep]
        block = self.principal_block()
        if null_basis.size:
            leak = np.einsum("ia,nij,jb->nab", null_basis.conj(), block, np.hstack([range_basis, null_basis]))
            if float(np.max(np.abs(leak))) > 1e-10 * max(self.gamma, 1.0):
                raise CoefficientError("principal coefficients act outside the range of the reference")
        whiten = range_basis / np.sqrt(weights[keep])
        pencil = np.einsum("ia,nij,jb->nab", whiten.conj(), block, whiten)
        pencil = 0.5 * (pencil + np.conj(np.swapaxes(pencil, -1, -2)))
        eig = np.linalg.eigvalsh(pencil)
        lower, upper = float(np.min(eig)), float(np.max(eig))
        if lower < PRINCIPAL_FLOOR - 1e-12:
            node = np.unravel_index(int(np.argmin(eig.min(axis=1))), self.grid.shape)
            raise CoefficientError(
                f"principal coefficients fall below 3/4 of the reference (ratio {lower:.4f} at node {node})"
            )
        return lower, upper

    @property
    def is_principal_only(self) -> bool:
        return all(
            weighted_degree(a, self.m) == 1 and weighted_degree(b, self.m) == 1 for a, b in self.pairs
        )

    @property
    def reference_symbol(self) -> Symbol:
        return symbol_from_coefficients(self.reference, self.m)

    @classmethod
    def constant(
        cls,
        m: Union[WeightVector, Sequence[int]],
        grid: AnisoGrid,
        reference: Mapping[PairKey, complex],
        lower: Optional[Mapping[PairKey, complex]] = None,
    ) -> "CoefficientField":
        pairs = {key: np.full(grid.shape, value, dtype=complex) for key, value in reference.items()}
        for key, value in (lower or {}).items():
            pairs[key] = np.full(grid.shape, value, dtype=complex)
        return cls(m=as_weights(m), grid=grid, pairs=pairs, reference=dict(reference))

    @classmethod
    def modulated(
        cls,
        m: Union[WeightVector, Sequence[int]],
        grid: AnisoGrid,
        reference: Mapping[PairKey, complex],
        factor: np.ndarray,
    ) -> "CoefficientField":
        """Principal coefficients ``factor(x) A``; ``factor`` is sampled on all grid nodes."""
        factor = np.broadcast_to(np.asarray(factor, dtype=float), grid.shape)
        pairs = {key: value * factor for key, value in reference.items()}
        return cls(m=as_weights(m), grid=grid, pairs=pairs, reference=dict(reference))

    @classmethod
    def checkerboard(
        cls,
        m: Union[WeightVector, Sequence[int]],
        grid: AnisoGrid,
        reference: Mapping[PairKey, complex],
        low: float,
        high: float,
        cells: int = 4,
    ) -> "CoefficientField":
        return cls.modulated(m, grid, reference, checkerboard_pattern(grid, low, high, cells))

    @classmethod
    def from_spec(cls, spec: CoefficientFieldSpec, base_dir: Union[str, Path] = ".") -> "CoefficientField":
        grid = spec.grid.to_grid()
        base_dir = Path(base_dir)
        pairs = {}
        for pair in spec.pairs:
            pairs[_pair_key(pair.alpha, pair.beta)] = _load_values(pair.values, grid, base_dir)
        reference = {_pair_key(r.alpha, r.beta): r.value for r in spec.reference}
        return cls(m=as_weights(spec.m), grid=grid, pairs=pairs, reference=reference)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "m": list(self.m.m),
            "grid": self.grid.to_dict(),
            "pairs": [[list(a), list(b)] for a, b in self.pairs],
            "gamma": self.gamma,
            "upper_constant": self.upper_constant,
        }


def checkerboard_pattern(grid: AnisoGrid, low: float, high: float, cells: int = 4) -> np.ndarray:
    parity = np.zeros(grid.shape, dtype=int)
    for k, axis in enumerate(grid.axes):
        cell = np.floor((axis + grid.radii[k]) / (2.0 * grid.radii[k]) * cells).astype(int)
        shape = [1] * grid.dim
        shape[k] = -1
        parity = parity + cell.reshape(shape)
    return np.where(parity % 2 == 0, float(low), float(high))


def _load_values(values: Any, grid: AnisoGrid, base_dir: Path) -> np.ndarray:
    if isinstance(values, (int, float)):
        return np.full(grid.shape, float(values), dtype=complex)
    if isinstance(values, list):
        if len(values) != 2:
            raise CoefficientError("complex constants are written as [re, im]")
        return np.full(grid.shape, complex(values[0], values[1]), dtype=complex)
    if isinstance(values, dict):
        if set(values) != {"checkerboard"} or len(values["checkerboard"]) != 2:
            raise CoefficientError("only {'checkerboard': [low, high]} patterns are understood")
        low, high = values["checkerboard"]
        return checkerboard_pattern(grid, low, high).astype(complex)
    path = Path(values)
    if not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise CoefficientError(f"coefficient blob {path} does not exist")
    arr = np.load(path)
    if arr.shape != grid.shape:
        raise CoefficientError(f"blob {path} has shape {arr.shape}, grid has {grid.shape}")
    return arr.astype(complex)


# --------------------------------------------------------------------------- difference operators


@lru_cache(maxsize=64)
def _forward(n: int, h: float) -> sp.csr_matrix:
    """n x (n-1) first difference of zero-padded interior values."""
    rows = np.arange(n)
    data = [np.ones(n - 1), -np.ones(n - 1)]
    upper = sp.csr_matrix((data[0], (rows[:-1], np.arange(n - 1))), shape=(n, n - 1))
    lower = sp.csr_matrix((data[1], (rows[1:], np.arange(n - 1))), shape=(n, n - 1))
    return ((upper + lower) / h).tocsr()


@lru_cache(maxsize=64)
def _averaging(n: int) -> sp.csr_matrix:
    """(n-1) x n map from staggered midpoints back to interior nodes."""
    rows = np.repeat(np.arange(n - 1), 2)
    cols = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1).reshape(-1)
    return sp.csr_matrix((np.full(2 * (n - 1), 0.5), (rows, cols)), shape=(n - 1, n))


def _axis_derivative(order: int, n: int, h: float, staggered: bool) -> sp.csr_matrix:
    d = _forward(n, h)
    second = (-(d.T @ d)).tocsr()
    even = sp.identity(n - 1, format="csr")
    for _ in range(order // 2):
        even = (second @ even).tocsr()
    if order % 2 == 0:
        return even
    first = d if staggered else (_averaging(n) @ d).tocsr()
    return (first @ even).tocsr()


def _pair_modes(alpha: Index, beta: Index) -> Tuple[bool, ...]:
    return tuple(a % 2 == 1 and b % 2 == 1 for a, b in zip(alpha, beta))


def derivative_matrix(grid: AnisoGrid, alpha: Index, modes: Sequence[bool]) -> sp.csr_matrix:
    """i^{|alpha|} times the Kronecker product of per-axis difference matrices."""
    factor = None
    for k, (order, staggered) in enumerate(zip(alpha, modes)):
        piece = _axis_derivative(int(order), grid.counts[k], float(grid.spacing[k]), staggered)
        factor = piece if factor is None else sp.kron(factor, piece, format="csr")
    return ((1j) ** sum(alpha) * factor).tocsr()


def _coefficient_on(values: np.ndarray, modes: Sequence[bool]) -> np.ndarray:
    """Resample node coefficients onto the evaluation points of a pair."""
    out = values
    for axis, staggered in enumerate(modes):
        if staggered:
            padded = np.concatenate([out, np.take(out, [-1], axis=axis)], axis=axis)
            left = np.take(padded, np.arange(out.shape[axis]), axis=axis)
            right = np.take(padded, np.arange(1, out.shape[axis] + 1), axis=axis)
            out = 0.5 * (left + right)
        else:
            out = np.take(out, np.arange(1, out.shape[axis]), axis=axis)
    return out.reshape(-1)


# --------------------------------------------------------------------------- operators


@dataclass(eq=False)
class DiscreteOperator:
    matrix: Any
    grid: AnisoGrid
    m: WeightVector
    hermitian: bool
    meta: Dict[str, Any] = field(default_factory=dict)
    coefficients: Optional[CoefficientField] = None
    exponent: Optional[np.ndarray] = None
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)
    _spectrum: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, init=False, repr=False)

    @property
    def kind(self) -> str:
        return str(self.meta.get("kind", "plain"))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if sp.issparse(self.matrix) else np.asarray(self.matrix)

    def eigh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cached spectral decomposition of a Hermitian operator."""
        if not self.hermitian:
            raise ValueError("eigh requires a Hermitian operator")
        with self._lock:
            if self._spectrum is None:
                _require_dense(self)
                dense = self.dense()
                self._spectrum = scipy.linalg.eigh(0.5 * (dense + dense.conj().T))
            return self._spectrum

    def eigenvalues(self) -> np.ndarray:
        if self.hermitian:
            return self.eigh()[0]
        _require_dense(self)
        return scipy.linalg.eigvals(self.dense())

    @property
    def shift(self) -> float:
        """Smallest c >= 0 with H + c positive semidefinite."""
        return max(0.0, -float(self.eigh()[0][0]))

    def adjoint_gap(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        if sp.issparse(diff):
            return float(abs(diff).max()) if diff.nnz else 0.0
        return float(np.max(np.abs(diff)))


def _require_dense(op: DiscreteOperator) -> None:
    limit = get_settings().dense_limit
    if op.size > limit:
        raise ValueError(
            f"operator has {op.size} unknowns, above the dense limit {limit}; use kernel_column"
        )


def _flatten(op: DiscreteOperator, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    if f.shape not in (op.grid.interior_shape, (op.size,)):
        raise DimensionError(f"vector of shape {f.shape} does not match {op.grid.interior_shape}")
    return f.reshape(-1)


def assemble(coeffs: CoefficientField) -> DiscreteOperator:
    grid = coeffs.grid
    total = None
    for (alpha, beta), values in coeffs.pairs.items():
        modes = _pair_modes(alpha, beta)
        b_alpha = derivative_matrix(grid, alpha, modes)
        b_beta = derivative_matrix(grid, beta, modes)
        weight = sp.diags(_coefficient_on(values, modes))
        term = b_beta.conj().T @ weight @ b_alpha
        total = term if total is None else total + term
    matrix = total.tocsr()
    matrix.sum_duplicates()
    op = DiscreteOperator(
        matrix=matrix,
        grid=grid,
        m=coeffs.m,
        hermitian=True,
        meta={"kind": "plain", "gamma": coeffs.gamma, "upper_constant": coeffs.upper_constant},
        coefficients=coeffs,
    )
    norm = spla.norm(matrix, ord=np.inf) if matrix.nnz else 0.0
    if op.adjoint_gap() > 1e-12 * max(norm, 1.0):
        raise CoefficientError("assembled operator is not Hermitian")
    logger.debug("assembled operator with %d unknowns and %d non-zeros", op.size, matrix.nnz)
    return op


def assemble_reference(
    reference: Mapping[PairKey, complex],
    grid: AnisoGrid,
    m: Union[WeightVector, Sequence[int]],
) -> DiscreteOperator:
    m = as_weights(m)
    reference = {_pair_key(a, b): complex(v) for (a, b), v in reference.items()}
    symbol = symbol_from_coefficients(reference, m)
    principal = set(principal_indices(m))
    for alpha, beta in reference:
        if alpha not in principal or beta not in principal:
            raise SymbolError(f"reference pair {(alpha, beta)} is not principal")
    try:
        coeffs = CoefficientField.constant(m, grid, reference)
    except CoefficientError as exc:
        raise SymbolError(f"reference coefficients are not admissible: {exc}") from exc
    op = assemble(coeffs)
    op.meta = {"kind": "reference"}
    op.meta["symbol"] = symbol.to_dict()
    return op


def quadratic_form(op: DiscreteOperator, f: np.ndarray) -> complex:
    """<H f, f> with the weighted inner product sum f conj(g) prod_k h_k."""
    f = _flatten(op, f)
    return complex(np.vdot(f, op.matrix @ f) * op.grid.cell_volume)


def discrete_form(coeffs: CoefficientField, f: np.ndarray, g: Optional[np.ndarray] = None) -> complex:
    """Direct evaluation of Q(f, g) = sum_x a (D^alpha f) conj(D^beta g) prod_k h_k."""
    f = np.asarray(f, dtype=complex).reshape(-1)
    g = f if g is None else np.asarray(g, dtype=complex).reshape(-1)
    total = 0j
    for (alpha, beta), values in coeffs.pairs.items():
        modes = _pair_modes(alpha, beta)
        left = derivative_matrix(coeffs.grid, alpha, modes) @ f
        right = derivative_matrix(coeffs.grid, beta, modes) @ g
        total += np.sum(_coefficient_on(values, modes) * left * np.conj(right))
    return complex(total * coeffs.grid.cell_volume)


def semigroup(op: DiscreteOperator, t: float) -> np.ndarray:
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    _require_dense(op)
    if op.hermitian:
        w, v = op.eigh()
        return (v * np.exp(-t * w)) @ v.conj().T
    return scipy.linalg.expm(-t * op.dense())


def _node_position(op: DiscreteOperator, y: Union[Sequence[float], Tuple[int, ...]]) -> int:
    index = op.grid.interior_index(y)
    return int(np.ravel_multi_index(index, op.grid.interior_shape))


def kernel_column(op: DiscreteOperator, t: float, y: Sequence[float]) -> np.ndarray:
    """K_H(t, ., y) = e^{-tH} e_y / prod_k h_k on the interior nodes; y is a point of the box."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    j = _node_position(op, y)
    if op.size <= get_settings().dense_limit:
        if op.hermitian:
            w, v = op.eigh()
            column = v @ (np.exp(-t * w) * v[j].conj())
        else:
            column = semigroup(op, t)[:, j]
    else:
        unit = np.zeros(op.size, dtype=complex)
        unit[j] = 1.0
        column = spla.expm_multiply(-t * op.matrix.tocsc(), unit)
    return (column / op.grid.cell_volume).reshape(op.grid.interior_shape)


def power(op: DiscreteOperator, kappa: int) -> DiscreteOperator:
    kappa = int(kappa)
    if kappa < 1:
        raise ValueError(f"kappa must be at least 1, got {kappa}")
    if kappa == 1:
        return op
    result = op.matrix
    for _ in range(kappa - 1):
        result = result @ op.matrix
    if sp.issparse(result):
        result = result.tocsr()
    return DiscreteOperator(
        matrix=result,
        grid=op.grid,
        m=op.m,
        hermitian=op.hermitian,
        meta={"kind": "power", "kappa": kappa, "base": op.meta},
        coefficients=op.coefficients,
        exponent=op.exponent,
    )


# --------------------------------------------------------------------------- twists


def smoothstep(order: int) -> Polynomial:
    """Polynomial of degree 2 order + 1 rising from 0 to 1 with ``order`` flat derivatives at both ends."""
    x = Polynomial([0.0, 1.0])
    total = Polynomial([0.0])
    for k in range(order + 1):
        total += math.comb(order + k, k) * math.comb(2 * order + 1, order - k) * (-x) ** k
    return x ** (order + 1) * total


@lru_cache(maxsize=16)
def _blend(l: int) -> Tuple[float, Polynomial]:
    """Transition width and the outward profile G with G' = 1 - S on [0, 1]."""
    step = smoothstep(max(l - 1, 0))
    fall = Polynomial([1.0]) - step
    width = 1.0
    probe = np.linspace(0.0, 1.0, 20001)
    for j in range(2, l + 1):
        bound = float(np.max(np.abs(fall.deriv(j - 1)(probe))))
        width = max(width, (bound * (1.0 + 1e-6)) ** (1.0 / (j - 1)))
    return width, fall.integ()


@dataclass(frozen=True)
class AxisCutoff:
    """psi equal to the identity on [low, high], flattening to constants over ``width`` on each side."""

    low: float
    high: float
    width: float
    l: int

    def _profile(self) -> Polynomial:
        return _blend(self.l)[1]

    def derivative(self, s: np.ndarray, j: int = 0) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        w = self.width
        profile = self._profile()
        right = np.clip((s - self.high) / w, 0.0, 1.0)
        left = np.clip((self.low - s) / w, 0.0, 1.0)
        if j == 0:
            out = np.clip(s, self.low, self.high)
            out = out + w * profile(right) - w * profile(left)
            return out
        shape = profile.deriv(j)
        inside_r = (s > self.high) & (s < self.high + w)
        inside_l = (s < self.low) & (s > self.low - w)
        out = np.zeros_like(s)
        if j == 1:
            out[(s >= self.low) & (s <= self.high)] = 1.0
        out[inside_r] = shape(right[inside_r]) / w ** (j - 1)
        out[inside_l] = (-1.0) ** (j - 1) * shape(left[inside_l]) / w ** (j - 1)
        return out

    def __call__(self, s: np.ndarray) -> np.ndarray:
        return self.derivative(s, 0)


@dataclass(frozen=True, eq=False)
class TwistMap:
    cutoffs: Tuple[AxisCutoff, ...]
    anchors: Tuple[Tuple[float, ...], Tuple[float, ...]]
    l: int
    lam: np.ndarray
    derivative_max: float
    sup_psi: Tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.cutoffs)

    def with_lambda(self, lam: Sequence[float]) -> "TwistMap":
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.dim,):
            raise DimensionError(f"lambda must have {self.dim} components")
        return replace(self, lam=lam)

    def phi(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.stack([c(points[..., k]) for k, c in enumerate(self.cutoffs)], axis=-1)

    def psi_on_axes(self, grid: AnisoGrid) -> List[np.ndarray]:
        return [c(axis) for c, axis in zip(self.cutoffs, grid.interior_axes)]

    def exponent(self, grid: AnisoGrid) -> np.ndarray:
        """lambda(phi(x)) on the interior nodes, flattened."""
        return (self.phi(grid.interior_nodes()) @ self.lam).reshape(-1)


def transition_width(l: int) -> float:
    return _blend(int(l))[0]


def default_anchors(
    grid: AnisoGrid, m: Union[WeightVector, Sequence[int]], l: Optional[int] = None
) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    """Symmetric anchors (-a, a) leaving room for the cutoff transitions on every axis."""
    m = as_weights(m)
    width = transition_width(max(2 * v for v in m.m) if l is None else l)
    reach = [max(0.0, min(0.25 * r, r - width - 2.0 * h)) for r, h in zip(grid.radii, grid.spacing)]
    return tuple(-a for a in reach), tuple(reach)


def sample_anchor_pairs(
    grid: AnisoGrid,
    m: Union[WeightVector, Sequence[int]],
    n: int,
    seed: int = 0,
    l: Optional[int] = None,
) -> List[Tuple[Tuple[float, ...], Tuple[float, ...]]]:
    """``n`` random pairs of interior nodes whose cutoff transitions fit inside the box."""
    m = as_weights(m)
    width = transition_width(max(2 * v for v in m.m) if l is None else l)
    rng = np.random.default_rng(seed)
    admissible = []
    for axis, r, h in zip(grid.interior_axes, grid.radii, grid.spacing):
        keep = axis[np.abs(axis) <= r - width - h]
        if keep.size == 0:
            raise TwistError(f"no interior node leaves room for a transition of width {width:.3f}")
        admissible.append(keep)
    pairs = []
    for _ in range(n):
        x = tuple(float(rng.choice(axis)) for axis in admissible)
        y = tuple(float(rng.choice(axis)) for axis in admissible)
        pairs.append((x, y))
    return pairs


def make_twist(
    anchors: Tuple[Sequence[float], Sequence[float]],
    grid: AnisoGrid,
    m: Union[WeightVector, Sequence[int]],
    l: Optional[int] = None,
    sweep_points: int = 20001,
) -> TwistMap:
    m = as_weights(m)
    x, y = (np.asarray(a, dtype=float) for a in anchors)
    if x.shape != (grid.dim,) or y.shape != (grid.dim,):
        raise DimensionError(f"anchors must have {grid.dim} coordinates")
    l = max(2 * v for v in m.m) if l is None else int(l)
    if l < 1:
        raise ValueError("l must be at least 1")
    width, _ = _blend(l)
    cutoffs = []
    sweep_max = 0.0
    sup_psi = []
    for k in range(grid.dim):
        r = grid.radii[k]
        low, high = float(min(x[k], y[k])), float(max(x[k], y[k]))
        if low < -r or high > r:
            raise GridError(f"anchor coordinate outside the box on axis {k}")
        if low - width < -r or high + width > r:
            raise TwistError(
                f"axis {k}: anchors [{low:g}, {high:g}] leave no room for a transition of width "
                f"{width:.3f} inside [-{r:g}, {r:g}]"
            )
        cutoff = AxisCutoff(low=low, high=high, width=width, l=l)
        mesh = np.linspace(-r, r, sweep_points)
        for j in range(1, l + 1):
            sweep_max = max(sweep_max, float(np.max(np.abs(cutoff.derivative(mesh, j)))))
        sup_psi.append(float(np.max(np.abs(cutoff(mesh)))))
        cutoffs.append(cutoff)
    if sweep_max > 1.0 + 1e-9:
        raise TwistError(f"cutoff derivatives reach {sweep_max:.6g}, above 1")
    tm = TwistMap(
        cutoffs=tuple(cutoffs),
        anchors=(tuple(x.tolist()), tuple(y.tolist())),
        l=l,
        lam=np.zeros(grid.dim),
        derivative_max=sweep_max,
        sup_psi=tuple(sup_psi),
    )
    gap = (tm.phi(x) - tm.phi(y)) - (x - y)
    if float(np.max(np.abs(gap))) > 1e-12 * max(1.0, float(np.max(np.abs(x - y)))):
        raise TwistError("cutoff does not preserve the anchor difference")
    return tm


def twist(op: DiscreteOperator, tm: TwistMap) -> DiscreteOperator:
    """H_{lambda,phi} = e^{lambda(phi)} H e^{-lambda(phi)}."""
    if op.kind == "twisted":
        raise ValueError("operator is already twisted")
    exponent = tm.exponent(op.grid)
    limit = get_settings().twist_overflow
    peak = float(np.max(np.abs(exponent))) if exponent.size else 0.0
    if peak > limit:
        reach = float(np.max(np.linalg.norm(tm.phi(op.grid.interior_nodes()), axis=-1)))
        raise TwistError(
            f"max |lambda(phi)| = {peak:.1f} exceeds {limit:g}",
            max_lambda=limit / reach if reach > 0 else math.inf,
        )
    if peak == 0.0:
        matrix = op.matrix.copy()
    else:
        plus = sp.diags(np.exp(exponent))
        minus = sp.diags(np.exp(-exponent))
        matrix = plus @ op.matrix @ minus
        if sp.issparse(matrix):
            matrix = matrix.tocsr()
    return DiscreteOperator(
        matrix=matrix,
        grid=op.grid,
        m=op.m,
        hermitian=op.hermitian and peak == 0.0,
        meta={
            "kind": "twisted",
            "lambda": tm.lam.tolist(),
            "anchors": [list(a) for a in tm.anchors],
            "base": op.meta,
        },
        coefficients=op.coefficients,
        exponent=exponent,
    )


def twisted_kernel_column(
    op: DiscreteOperator, tm: TwistMap, t: float, y: Sequence[float]
) -> np.ndarray:
    return kernel_column(twist(op, tm), t, y)


# --------------------------------------------------------------------------- rescaling


def rescale(coeffs: CoefficientField, s: float) -> CoefficientField:
    """Coefficients of H_s: x -> a(s^{-E} x) sampled on the box dilated by s^E."""
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    if not coeffs.is_principal_only:
        raise CoefficientError("rescaling needs principal-only coefficients")
    if s == 1:
        return coeffs
    grid = coeffs.grid.dilated(coeffs.m.exponents, s)
    return CoefficientField(
        m=coeffs.m,
        grid=grid,
        pairs={key: values.copy() for key, values in coeffs.pairs.items()},
        reference=dict(coeffs.reference),
    )

