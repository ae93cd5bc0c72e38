"""Empirical checks of the form hypotheses, semigroup bounds and kernel bound fits.

Every constant produced here is grid- and sample-dependent: a finite sweep can
falsify an inequality but never prove it, so reports speak of constants that are
consistent with the sampled data.
"""

from __future__ import annotations

import itertools
import logging
import math
from fractions import Fraction
from typing import Callable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.sparse as sp

from anikern.aniso_core import Symbol, WeightVector, as_weights, dilate, kappa_for
from anikern.config import get_settings
from anikern.errors import BoundInfeasibleError, GridError, TwistError
from anikern.grid import AnisoGrid
from anikern.kernel_cc import KernelField, loglog_slope, norm_profile
from anikern.models import BoundFit, HolderEstimate, HypothesisReport
from anikern.operator_vc import DiscreteOperator, TwistMap, power, semigroup, twist

logger = logging.getLogger(__name__)

Sample = Tuple[float, Sequence[float], Sequence[float], float]
TwistBuilder = Union[TwistMap, Callable[[np.ndarray], TwistMap]]
TwistBuilders = Union[TwistBuilder, Sequence[TwistBuilder]]

_SUB_FLOOR = 1e-300
_M_MAX = 1e6
_THETAS = 16


# --------------------------------------------------------------------------- test families


def relative_spread(values: Sequence[float]) -> float:
    """(max - min) / |mean|; zero for constant or all-zero input."""
    arr = np.asarray(values, dtype=float)
    spread = float(np.max(arr) - np.min(arr))
    if spread == 0.0:
        return 0.0
    return spread / max(abs(float(np.mean(arr))), np.finfo(float).tiny)


def default_test_family(
    grid: AnisoGrid,
    m: Union[WeightVector, Sequence[int]],
    seed: int = 0,
    n: int = 32,
) -> np.ndarray:
    """Unit-norm functions on the interior nodes: random band-limited sums and localized bumps.

    Returns an array of shape ``(n, *grid.interior_shape)``.
    """
    m = as_weights(m)
    rng = np.random.default_rng(seed)
    nodes = grid.interior_nodes()
    family = np.empty((n,) + grid.interior_shape, dtype=complex)
    n_band = (n + 1) // 2
    for i in range(n):
        if i < n_band:
            modes = [rng.integers(1, max(2, c // 4) + 1, size=3) for c in grid.counts]
            f = np.zeros(grid.interior_shape, dtype=complex)
            for j in range(3):
                term = rng.standard_normal() + 1j * rng.standard_normal()
                for k, axis in enumerate(grid.interior_axes):
                    shape = [1] * grid.dim
                    shape[k] = -1
                    wave = np.sin(modes[k][j] * np.pi * (axis + grid.radii[k]) / (2.0 * grid.radii[k]))
                    term = term * wave.reshape(shape)
                f = f + term
        else:
            centre = np.array([rng.uniform(-0.5 * r, 0.5 * r) for r in grid.radii])
            scale = rng.uniform(0.5, 2.0)
            widths = dilate(m, scale, np.ones(m.dim)) * np.maximum(4.0 * grid.spacing, 0.08 * np.array(grid.radii))
            f = np.exp(-np.sum(((nodes - centre) / widths) ** 2, axis=-1)).astype(complex)
        family[i] = f / np.linalg.norm(f)
    return family


def dilation_family(
    profile: Callable[[np.ndarray], np.ndarray],
    grid: AnisoGrid,
    m: Union[WeightVector, Sequence[int]],
    times: Sequence[float],
) -> np.ndarray:
    """f_t(x) = profile(t^E x) on the interior nodes, one row per t."""
    m = as_weights(m)
    nodes = grid.interior_nodes()
    return np.stack([np.asarray(profile(dilate(m, t, nodes)), dtype=complex) for t in times])


def _as_columns(op: DiscreteOperator, family: np.ndarray) -> np.ndarray:
    """Family as an (unknowns, n) matrix."""
    family = np.asarray(family, dtype=complex)
    if family.shape[1:] == op.grid.interior_shape:
        return family.reshape(family.shape[0], -1).T
    if family.ndim == 2 and family.shape[1] == op.size:
        return family.T
    raise GridError(f"test family of shape {family.shape} does not match {op.grid.interior_shape}")


def _forms(matrix, columns: np.ndarray) -> np.ndarray:
    """f^H A f for every column f (the shared factor prod h cancels in every ratio used here)."""
    return np.einsum("ij,ij->j", columns.conj(), matrix @ columns)


def _same_grid(a: DiscreteOperator, b: DiscreteOperator) -> None:
    if a.grid != b.grid or a.size != b.size:
        raise GridError("operators live on different grids")


def _reference_symbol(ld: DiscreteOperator) -> Symbol:
    if ld.coefficients is None:
        raise ValueError("reference operator carries no coefficients")
    return ld.coefficients.reference_symbol


def _builders(twist_builders: TwistBuilders) -> List[Callable[[np.ndarray], TwistMap]]:
    if isinstance(twist_builders, TwistMap) or callable(twist_builders):
        twist_builders = [twist_builders]
    out = [b.with_lambda if isinstance(b, TwistMap) else b for b in twist_builders]
    if not out:
        raise ValueError("at least one twist is needed")
    return out


def _hermitian_part(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.conj().T)


def _same_matrix(a: DiscreteOperator, b: DiscreteOperator) -> bool:
    diff = a.matrix - b.matrix
    if sp.issparse(diff):
        return diff.count_nonzero() == 0
    return not np.any(diff)


# --------------------------------------------------------------------------- hypotheses


def verify_hypothesis1(hd: DiscreteOperator, ld: DiscreteOperator, shift: float = 0.0) -> HypothesisReport:
    """Extreme Rayleigh quotients of Hd + shift against Ld (off its kernel) and against Ld + I."""
    _same_grid(hd, ld)
    identical = hd is ld or _same_matrix(hd, ld)
    if identical and shift == 0:
        return HypothesisReport(
            which="H1",
            constants={"c_low": 1.0, "C_high": 1.0, "shift": 0.0},
            samples=hd.size,
            worst_case=0,
            accepted=True,
            notes=["operator coincides with its reference"],
        )
    h = _hermitian_part(hd.dense()) + shift * np.eye(hd.size)
    w, v = ld.eigh()
    keep = w > 1e-12 * max(float(np.max(np.abs(w))), 1.0)
    whiten = v[:, keep] / np.sqrt(w[keep])
    pencil = np.linalg.eigh(_hermitian_part(whiten.conj().T @ h @ whiten))
    c_low = float(pencil[0][0])
    upper = scipy.linalg.eigh(h, ld.dense() + np.eye(ld.size), eigvals_only=True)
    c_high = float(upper[-1])
    notes = [] if keep.all() else [f"{int((~keep).sum())} kernel directions of the reference excluded"]
    return HypothesisReport(
        which="H1",
        constants={"c_low": c_low, "C_high": c_high, "shift": float(shift)},
        samples=int(keep.sum()),
        worst_case=0,
        accepted=c_low >= 0.5 - 1e-9,
        notes=notes,
    )


def _candidate_vectors(matrices: Sequence[np.ndarray], top: int = 2) -> np.ndarray:
    picks = []
    for matrix in matrices:
        _, vecs = np.linalg.eigh(matrix)
        picks.append(vecs[:, -top:])
    return np.hstack(picks)


def _comparison_ratios(
    h: np.ndarray, h_lam: np.ndarray, columns: np.ndarray, one_plus_r: float
) -> np.ndarray:
    q = _forms(h, columns).real
    q_lam = _forms(h_lam, columns)
    norms = np.einsum("ij,ij->j", columns.conj(), columns).real
    excess = np.maximum(np.abs(q_lam - q) - 0.25 * q, 0.0)
    return 4.0 * excess / (one_plus_r * norms)


def verify_hypothesis2(
    hd: DiscreteOperator,
    ld: DiscreteOperator,
    lambdas: Sequence[Sequence[float]],
    twist_builder: TwistBuilders,
    samples: int = 48,
    seed: int = 0,
) -> HypothesisReport:
    """Smallest M with |Q_lam(f) - Q(f)| <= (Q(f) + M (1 + R(lam)) |f|^2) / 4 over the probed f.

    ``twist_builder`` is one twist or a sequence of twists (for instance anchored
    at sampled node pairs); M is the maximum over all of them. Probes are a
    random family plus, per covector and twist, the top eigenvectors of
    ``Herm(e^{i theta}(H_lam - H)) - H/4`` over a grid of phases.
    """
    _same_grid(hd, ld)
    symbol = _reference_symbol(ld)
    builders = _builders(twist_builder)
    h = hd.dense()
    thetas = np.linspace(0.0, 2.0 * np.pi, _THETAS, endpoint=False)
    small = _as_columns(hd, default_test_family(hd.grid, hd.m, seed, samples))
    large = _as_columns(hd, default_test_family(hd.grid, hd.m, seed, 2 * samples))
    best_small = best_large = 0.0
    worst_case = 0
    notes = ["M is consistent with the sampled covectors only"]
    if len(builders) > 1:
        notes.append(f"maximum over {len(builders)} twists")
    for lam in lambdas:
        lam = np.asarray(lam, dtype=float)
        one_plus_r = 1.0 + float(symbol.real(lam))
        for build in builders:
            try:
                h_lam = twist(hd, build(lam)).dense()
            except TwistError as exc:
                logger.warning("skipping lambda=%s: %s", lam.tolist(), exc)
                notes.append(f"skipped lambda {lam.tolist()} (overflow guard)")
                continue
            diff = h_lam - h
            probes = _candidate_vectors(
                [_hermitian_part(np.exp(1j * th) * diff) - 0.25 * _hermitian_part(h) for th in thetas]
            )
            refined = _comparison_ratios(h, h_lam, probes, one_plus_r)
            on_small = _comparison_ratios(h, h_lam, small, one_plus_r)
            on_large = _comparison_ratios(h, h_lam, large, one_plus_r)
            candidate = float(max(np.max(refined), np.max(on_small)))
            if candidate > best_small:
                worst_case = int(np.argmax(np.concatenate([on_small, refined])))
            best_small = max(best_small, candidate)
            best_large = max(best_large, float(max(np.max(refined), np.max(on_large))))
    spread = relative_spread([best_small, best_large])
    accepted = math.isfinite(best_large) and spread <= 0.1
    return HypothesisReport(
        which="H2",
        constants={"M": best_large, "M_half_sample": best_small},
        samples=small.shape[1] + large.shape[1],
        worst_case=worst_case,
        accepted=accepted,
        notes=notes,
    )


def verify_hypothesis3(
    hd: DiscreteOperator,
    ld: DiscreteOperator,
    kappa: int,
    lambdas: Sequence[Sequence[float]],
    twist_builder: TwistBuilders,
    samples: int = 48,
    seed: int = 0,
) -> HypothesisReport:
    """C with Q_{Lambda^kappa}(f) <= C (|<H_lam^kappa f, f>| + (1 + R(lam))^kappa |f|^2) over the probes."""
    _same_grid(hd, ld)
    symbol = _reference_symbol(ld)
    builders = _builders(twist_builder)
    expected_kappa = kappa_for(symbol.weights.mu)
    l_kappa = power(ld, kappa).dense()
    small = _as_columns(hd, default_test_family(hd.grid, hd.m, seed, samples))
    large = _as_columns(hd, default_test_family(hd.grid, hd.m, seed, 2 * samples))
    best_small = best_large = 0.0
    worst_case = 0
    notes: List[str] = []
    if kappa != expected_kappa:
        logger.warning("kappa=%d differs from %d, the smallest n with mu/n < 1", kappa, expected_kappa)
        notes.append(f"kappa {kappa} differs from the order-derived value {expected_kappa}")
    lambdas = list(lambdas) or [np.zeros(hd.grid.dim)]
    for lam, build in itertools.product(lambdas, builders):
        lam = np.asarray(lam, dtype=float)
        try:
            h_lam = power(twist(hd, build(lam)), kappa).dense()
        except TwistError as exc:
            logger.warning("skipping lambda=%s: %s", lam.tolist(), exc)
            notes.append(f"skipped lambda {lam.tolist()} (overflow guard)")
            continue
        weight = (1.0 + float(symbol.real(lam))) ** kappa
        denominators = [_hermitian_part(h_lam) + weight * np.eye(hd.size)]
        probes = []
        for denominator in denominators:
            try:
                _, vecs = scipy.linalg.eigh(_hermitian_part(l_kappa), denominator)
                probes.append(vecs[:, -4:])
            except np.linalg.LinAlgError:
                notes.append(f"pencil for lambda {lam.tolist()} is not definite; random probes only")

        def ratios(columns: np.ndarray) -> np.ndarray:
            top = _forms(l_kappa, columns).real
            norms = np.einsum("ij,ij->j", columns.conj(), columns).real
            return top / (np.abs(_forms(h_lam, columns)) + weight * norms)

        refined = ratios(np.hstack(probes)) if probes else np.zeros(1)
        on_small = ratios(small)
        candidate = float(max(np.max(refined), np.max(on_small)))
        if candidate > best_small:
            worst_case = int(np.argmax(np.concatenate([on_small, refined])))
        best_small = max(best_small, candidate)
        best_large = max(best_large, float(max(np.max(refined), np.max(ratios(large)))))
    spread = relative_spread([best_small, best_large])
    return HypothesisReport(
        which="H3",
        constants={"C": best_large, "C_half_sample": best_small, "kappa": float(kappa)},
        samples=small.shape[1] + large.shape[1],
        worst_case=worst_case,
        accepted=math.isfinite(best_large) and spread <= 0.1,
        notes=notes,
    )


# --------------------------------------------------------------------------- twisted semigroups


def twisted_sg_profile(
    hd_twisted: DiscreteOperator, m_const: float, r_lambda: float, times: Sequence[float]
) -> List[Tuple[float, float]]:
    """(t, M (1 + R(lam)) t / 4 - log ||e^{-t H_lam}||) for each t."""
    rate = m_const * (1.0 + r_lambda) / 4.0
    out = []
    for t in times:
        sigma = float(scipy.linalg.norm(semigroup(hd_twisted, t), 2))
        out.append((float(t), rate * t - math.log(sigma)))
    return out


def check_twisted_sg_norm(
    hd_twisted: DiscreteOperator, m_const: float, r_lambda: float, times: Sequence[float]
) -> float:
    """Worst slack of the twisted semigroup norm bound; acceptable when >= -1e-9."""
    return min(slack for _, slack in twisted_sg_profile(hd_twisted, m_const, r_lambda, times))


def check_twisted_form_lower(
    hd_twisted: DiscreteOperator,
    m_const: float,
    r_lambda: float,
    n_samples: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Ratio of -min Re<H_lam f, f> / |f|^2 to (M/4)(1 + R(lam)); the bound holds when it is <= 1."""
    if n_samples is None or hd_twisted.size <= get_settings().dense_limit:
        lowest = float(np.linalg.eigvalsh(_hermitian_part(hd_twisted.dense()))[0])
    else:
        columns = _as_columns(hd_twisted, default_test_family(hd_twisted.grid, hd_twisted.m, seed, n_samples))
        norms = np.einsum("ij,ij->j", columns.conj(), columns).real
        lowest = float(np.min(_forms(hd_twisted.matrix, columns).real / norms))
    bound = 0.25 * m_const * (1.0 + r_lambda)
    deficit = max(0.0, -lowest)
    if bound == 0.0:
        return 0.0 if deficit == 0.0 else math.inf
    return deficit / bound


# --------------------------------------------------------------------------- bound fit


def fit_offdiagonal_bound(
    samples: Sequence[Sample],
    mu: Union[Fraction, float],
    lf: Callable[[np.ndarray], np.ndarray],
    include_mt: bool = False,
    C: Optional[float] = None,
) -> BoundFit:
    """Fit |K(t,x,y)| <= C t^{-mu} exp(-t M R^#((x-y)/t) [+ M t]).

    Unless the caller passes ``C``, it is pinned just above the largest diagonal
    value of t^mu |K|; every sample then bounds M linearly, and the largest M
    inside the feasible interval is reported. With C fixed, extra samples only
    add constraints, so M never increases. A new diagonal sample above the
    current peak re-pins C upwards and loosens every constraint, so M may grow.
    """
    if not samples:
        raise ValueError("no samples to fit")
    t = np.array([s[0] for s in samples], dtype=float)
    x = np.array([np.atleast_1d(s[1]) for s in samples], dtype=float)
    y = np.array([np.atleast_1d(s[2]) for s in samples], dtype=float)
    value = np.array([s[3] for s in samples], dtype=float)
    keep = value >= _SUB_FLOOR
    if not keep.any():
        raise BoundInfeasibleError("every sample is below the underflow floor")
    t, x, y, value = t[keep], x[keep], y[keep], value[keep]
    mu = float(mu)
    scaled = t**mu * value
    diagonal = np.all(x == y, axis=1)
    if C is not None:
        if C <= 0:
            raise ValueError("C must be positive")
        c = float(C)
    elif diagonal.any():
        c = float(np.max(scaled[diagonal])) * (1.0 + 1e-6)
    else:
        logger.warning("no diagonal samples; pinning C to the largest scaled sample")
        c = float(np.max(scaled)) * (1.0 + 1e-6)
    room = math.log(c) - np.log(scaled)
    shape = t * np.asarray(lf((x - y) / t[:, None]), dtype=float)
    coefficient = shape - (t if include_mt else 0.0)

    hi, lo = math.inf, 0.0
    up = coefficient > 0
    if up.any():
        hi = float(np.min(room[up] / coefficient[up]))
    down = coefficient < 0
    if down.any():
        lo = max(lo, float(np.max(room[down] / coefficient[down])))
    flat = coefficient == 0
    if flat.any() and float(np.min(room[flat])) < 0:
        raise BoundInfeasibleError("a sample with no decay exceeds the prefactor")
    if lo > hi or lo > _M_MAX:
        raise BoundInfeasibleError(f"no M in [0, {_M_MAX:g}] majorizes every sample (lo={lo:.4g}, hi={hi:.4g})")
    if math.isinf(hi):
        m_fit = lo
    else:
        m_fit = min(hi, _M_MAX)
        margins = room - coefficient * m_fit
        while m_fit > lo and float(np.min(margins)) < 0:
            m_fit = max(lo, np.nextafter(m_fit, -math.inf) * (1.0 - 1e-15))
            margins = room - coefficient * m_fit
    margins = room - coefficient * m_fit
    return BoundFit(
        C=c,
        M=float(max(m_fit, 0.0)),
        n_points=int(keep.sum()),
        min_margin=float(np.min(margins)),
        includes_Mt_term=include_mt,
        margins=margins.tolist(),
    )


def bound_margins(
    fit: BoundFit,
    samples: Sequence[Sample],
    mu: Union[Fraction, float],
    lf: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """Log-margins of a fitted bound on other samples, e.g. held out at fresh times."""
    samples = [s for s in samples if s[3] >= _SUB_FLOOR]
    if not samples:
        raise ValueError("no samples above the underflow floor")
    t = np.array([s[0] for s in samples], dtype=float)
    x = np.array([np.atleast_1d(s[1]) for s in samples], dtype=float)
    y = np.array([np.atleast_1d(s[2]) for s in samples], dtype=float)
    value = np.array([s[3] for s in samples], dtype=float)
    exponent = t * np.asarray(lf((x - y) / t[:, None]), dtype=float)
    if fit.includes_Mt_term:
        exponent = exponent - t
    return math.log(fit.C) - float(mu) * np.log(t) - fit.M * exponent - np.log(value)


def kernel_samples_from_field(field: KernelField, floor: float = 1e-12) -> List[Sample]:
    """(t, x, 0, |K|) for every node with |K| above ``floor`` times the peak."""
    magnitude = np.abs(field.values)
    mask = magnitude > floor * float(np.max(magnitude))
    nodes = field.grid.nodes()[mask]
    origin = np.zeros(field.grid.dim)
    return [(field.t, node, origin, float(v)) for node, v in zip(nodes, magnitude[mask])]


def kernel_samples_from_columns(
    columns: Mapping[float, Tuple[Sequence[float], np.ndarray]],
    grid: AnisoGrid,
    floor: float = 1e-12,
) -> List[Sample]:
    """Samples from kernel columns keyed by t, each given as (y, K(t, ., y) on interior nodes)."""
    nodes = grid.interior_nodes().reshape(-1, grid.dim)
    out: List[Sample] = []
    for t, (y, column) in columns.items():
        magnitude = np.abs(np.asarray(column)).reshape(-1)
        mask = magnitude > floor * float(np.max(magnitude))
        y_node = nodes[np.ravel_multi_index(grid.interior_index(y), grid.interior_shape)]
        out.extend((float(t), node, y_node, float(v)) for node, v in zip(nodes[mask], magnitude[mask]))
    return out


def kernel_diagonal_samples(op: DiscreteOperator, times: Sequence[float]) -> List[Sample]:
    """(t, x, x, K_H(t, x, x)) at every interior node; these pin C for variable coefficients."""
    nodes = op.grid.interior_nodes().reshape(-1, op.grid.dim)
    out: List[Sample] = []
    for t in times:
        diagonal = np.abs(np.diag(semigroup(op, t))) / op.grid.cell_volume
        out.extend((float(t), node, node, float(v)) for node, v in zip(nodes, diagonal) if v > 0)
    return out


# --------------------------------------------------------------------------- functional inequalities


def _symbol_form(symbol: Symbol, grid: AnisoGrid, columns: np.ndarray) -> np.ndarray:
    """(2 pi)^{-d} int R |f^|^2 on the zero-padded grid, with f^ from an FFT."""
    shape = tuple(2 * n for n in grid.counts)
    h = grid.spacing
    xi = np.stack(
        np.meshgrid(*[2.0 * np.pi * scipy.fft.fftfreq(p, d=hk) for p, hk in zip(shape, h)], indexing="ij"),
        axis=-1,
    )
    weight = symbol.real(xi)
    d_xi = np.prod([2.0 * np.pi / (p * hk) for p, hk in zip(shape, h)])
    out = []
    for f in columns.T:
        full = np.zeros(grid.counts, dtype=complex)
        full[tuple(slice(1, None) for _ in grid.counts)] = f.reshape(grid.interior_shape)
        transformed = scipy.fft.fftn(full, s=shape) * grid.cell_volume
        out.append(float(np.sum(weight * np.abs(transformed) ** 2) * d_xi / (2.0 * np.pi) ** grid.dim))
    return np.array(out)


def _energies(ld: Union[DiscreteOperator, Symbol], family: np.ndarray, grid: Optional[AnisoGrid]):
    if isinstance(ld, DiscreteOperator):
        columns = _as_columns(ld, family)
        return columns, _forms(ld.matrix, columns).real * ld.grid.cell_volume, ld.grid.cell_volume
    if grid is None:
        raise ValueError("a grid is required when the reference is given as a symbol")
    columns = np.asarray(family, dtype=complex).reshape(len(family), -1).T
    return columns, _symbol_form(ld, grid, columns), grid.cell_volume


def nash_constant(
    ld: Union[DiscreteOperator, Symbol],
    mu: Union[Fraction, float],
    test_family: np.ndarray,
    grid: Optional[AnisoGrid] = None,
) -> float:
    """max |f|_2^{1+1/mu} / (Q(f)^{1/2} |f|_1^{1/mu}) over the family; functions with Q(f) = 0 are skipped."""
    mu = float(mu)
    columns, energy, volume = _energies(ld, test_family, grid)
    l2 = np.sqrt(np.sum(np.abs(columns) ** 2, axis=0) * volume)
    l1 = np.sum(np.abs(columns), axis=0) * volume
    usable = energy > 1e-14 * np.max(np.abs(energy))
    if not usable.any():
        raise ValueError("every test function has zero energy")
    ratio = l2[usable] ** (1.0 + 1.0 / mu) / (np.sqrt(energy[usable]) * l1[usable] ** (1.0 / mu))
    return float(np.max(ratio))


def gn_check(
    ld: Union[DiscreteOperator, Symbol],
    mu: Union[Fraction, float],
    test_family: np.ndarray,
    grid: Optional[AnisoGrid] = None,
) -> float:
    """max |f|_inf / (Q(f)^{mu/2} |f|_2^{1-mu}) over the family."""
    mu = float(mu)
    if mu >= 1:
        raise ValueError("GN analogue requires μ_Λ<1")
    columns, energy, volume = _energies(ld, test_family, grid)
    sup = np.max(np.abs(columns), axis=0)
    l2 = np.sqrt(np.sum(np.abs(columns) ** 2, axis=0) * volume)
    usable = energy > 1e-14 * np.max(np.abs(energy))
    ratio = sup[usable] / (energy[usable] ** (mu / 2.0) * l2[usable] ** (1.0 - mu))
    return float(np.max(ratio))


def ultracontractivity_slope(
    symbol: Symbol, times: Sequence[float], base_grid: Optional[AnisoGrid] = None
) -> float:
    """Log-log slope of |K(t, .)|_2 = |e^{-t Lambda}|_{2 -> inf}; the theory predicts -mu/2."""
    if max(times) < 10.0 * min(times):
        raise ValueError("times must span at least one decade")
    return loglog_slope(norm_profile(symbol, 2.0, times, base_grid))


def holder_exponent(
    columns: Union[np.ndarray, Sequence[np.ndarray]],
    grid: AnisoGrid,
    mu: Union[Fraction, float],
    separations: Sequence[int] = (1, 2, 4, 8),
    axis: int = 0,
) -> HolderEstimate:
    """Slope of log sup|K(x + s h e_axis) - K(x)| against log(s h) over kernel columns at one t."""
    mu = float(mu)
    if mu >= 1:
        raise ValueError("Hölder order (1 - mu)/2 needs mu < 1")
    stack = np.asarray(columns)
    if stack.shape == grid.interior_shape:
        stack = stack[None]
    h = float(grid.spacing[axis])
    length = stack.shape[axis + 1]
    deltas, moduli = [], []
    for s in separations:
        if s >= length:
            continue
        ahead = np.take(stack, np.arange(s, length), axis=axis + 1)
        behind = np.take(stack, np.arange(0, length - s), axis=axis + 1)
        modulus = float(np.max(np.abs(ahead - behind)))
        if modulus > 0:
            deltas.append(s * h)
            moduli.append(modulus)
    if len(deltas) < 4:
        raise ValueError("need at least four usable separations for a Hölder fit")
    coeffs, cov = np.polyfit(np.log(deltas), np.log(moduli), 1, cov=True)
    floor = (1.0 - mu) / 2.0
    alpha = float(coeffs[0])
    return HolderEstimate(
        alpha=alpha,
        stderr=float(math.sqrt(max(cov[0, 0], 0.0))),
        floor=floor,
        accepted=alpha >= floor - 0.1,
    )
