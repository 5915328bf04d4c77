"""Estimator-independent lower bounds from the moment table.

The odd derivatives ξ⁽¹⁾, ξ⁽³⁾, ... are orthogonalized implicitly through
their Gram matrix, whose entries are ±μ₂ₙ. Normalizers are ratios of
Gram determinants, projection coefficients are bordered determinants, and the
bound terms follow from a recursion on the contractions Uₙ.
"""
import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

import config
from services.errors import DegenerateGram, InvalidOrder, ZeroFisherInformation
from services.matcore import HermitianOperator, as_matrix, center_operator, hs_inner_real, trace_product
from services.states import ConjugatePair, DensityMatrix, SqrtState, boundary_safe, evolve_sqrt_state, sqrt_embed
from services.statmoments import DerivativeStack, MomentTable, derivative_stack, stat_summary

logger = logging.getLogger(__name__)

StateLike = Union[DensityMatrix, SqrtState]


@dataclass(frozen=True)
class BoundReport:
    """Per-order quantities of the odd-order bound.

    ``terms`` and ``even_term`` are in the units of the order-1 product
    (ΔT²+δT²)(ΔH²-δH²); ``cumulative_rhs`` sums the non-degenerate odd terms,
    the first of which is 1/4. ``even_term`` is estimator_term_even times
    μ₂/2.
    """

    orders: List[int]
    d_values: Dict[int, float]
    n_values: Dict[int, Optional[float]]
    u_values: Dict[int, Optional[float]]
    f_values: Dict[Tuple[int, int], float]
    terms: Dict[int, float]
    cumulative_by_order: Dict[int, float]
    cumulative_rhs: float
    degenerate_orders: List[int]
    kappa: Optional[Dict[int, float]] = None
    even_term: Optional[float] = None
    notes: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class ConjugationDiagnostics:
    projection: float
    kappa_per_order: Dict[int, float]
    contractions: Dict[int, float]
    expected_contractions: Dict[int, float]
    boundary_safe: Optional[bool]


def _check_odd(n: int) -> None:
    if n < 1 or n % 2 == 0:
        raise InvalidOrder(f"Order must be a positive odd integer, got {n}")


def _pivoted_det(matrix: np.ndarray) -> float:
    """Determinant from an LU factorization with partial pivoting."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(matrix)
    swaps = int(np.sum(piv != np.arange(len(piv))))
    return float((-1) ** swaps * np.prod(np.diag(lu)))


def gram_matrix(table: MomentTable, n: int) -> np.ndarray:
    """Reversed Gram matrix of ξ⁽¹⁾, ξ⁽³⁾, ..., ξ⁽ⁿ⁾ without alternating signs.

    Entry (i, j) is μ_{2n-2i-2j}; the first row runs μ₂ₙ ... μₙ₊₁ and the last
    row μₙ₊₁ ... μ₂.
    """
    _check_odd(n)
    size = (n + 1) // 2
    return np.array(
        [[table.mu_at(2 * n - 2 * i - 2 * j) for j in range(size)] for i in range(size)],
        dtype=float,
    )


def gram_determinant(table: MomentTable, n: int) -> float:
    """D₂ₙ, the Gram determinant of the odd derivatives through order n."""
    return _pivoted_det(gram_matrix(table, n))


def _diagonal_product(table: MomentTable, n: int) -> float:
    return float(np.prod([table.mu_at(2 * j) for j in range(1, n + 1, 2)]))


def hadamard_ratio(table: MomentTable, n: int) -> float:
    """D₂ₙ divided by the product of its diagonal; lies in [0, 1]."""
    diagonal = _diagonal_product(table, n)
    if diagonal <= 0.0:
        return 0.0
    return gram_determinant(table, n) / diagonal


def degenerate_orders(table: MomentTable, n_max: int, threshold: float = config.DEGENERACY_THRESHOLD) -> List[int]:
    """Odd orders ≤ n_max whose Gram matrix is numerically singular.

    Once an order is degenerate every higher odd order is reported degenerate
    too, matching the nested Krylov spans.
    """
    result: List[int] = []
    for n in range(1, n_max + 1, 2):
        if result or hadamard_ratio(table, n) <= threshold:
            result.append(n)
    return result


def is_degenerate(table: MomentTable, n: int, threshold: float = config.DEGENERACY_THRESHOLD) -> bool:
    _check_odd(n)
    return n in degenerate_orders(table, n, threshold)


def _require_fisher(table: MomentTable) -> float:
    mu2 = table.mu_at(2)
    if mu2 <= config.ZERO_FISHER_THRESHOLD:
        logger.error(f"mu_2 = {mu2:.3e}: state commutes with the generator")
        raise ZeroFisherInformation(f"mu_2 = {mu2:.3e} is at or below {config.ZERO_FISHER_THRESHOLD}")
    return mu2


def normalizer(table: MomentTable, n: int, threshold: float = config.DEGENERACY_THRESHOLD) -> float:
    """Nₙ = ‖ψₙ‖² = D₂ₙ / D₂ₙ₋₄, with N₁ = μ₂.

    Raises:
        ZeroFisherInformation: μ₂ vanishes
        DegenerateGram: order n is degenerate
    """
    _check_odd(n)
    mu2 = _require_fisher(table)
    if n == 1:
        return mu2
    if n in degenerate_orders(table, n, threshold):
        raise DegenerateGram(n)
    return gram_determinant(table, n) / gram_determinant(table, n - 2)


def projection_coeff(table: MomentTable, n: int, k: int, threshold: float = config.DEGENERACY_THRESHOLD) -> float:
    """Fₙ,ₖ = ⟨ξ⁽ⁿ⁾, ψₖ⟩ / Nₖ for odd k < n, as a bordered determinant over D₂ₖ."""
    _check_odd(n)
    _check_odd(k)
    if k >= n:
        raise InvalidOrder(f"projection_coeff needs k < n, got n={n}, k={k}")
    _require_fisher(table)
    if k in degenerate_orders(table, k, threshold):
        raise DegenerateGram(k)
    size = (k + 1) // 2
    bordered = np.empty((size, size), dtype=float)
    for j in range(size):
        bordered[0, j] = table.mu_at(n + k - 2 * j)
    for i in range(1, size):
        for j in range(size):
            bordered[i, j] = table.mu_at(2 * k - 2 * i - 2 * j)
    sign = (-1) ** ((n + k) // 2 - 1)
    return sign * _pivoted_det(bordered) / gram_determinant(table, k)


def u_recursion(table: MomentTable, n_max: int, threshold: float = config.DEGENERACY_THRESHOLD) -> Dict[int, Optional[float]]:
    """Contractions Uₙ of the estimator gradient with ψₙ for conjugate pairs.

    U₁ = 1 and Uₙ = (-1)^((n-1)/2) n μₙ₋₁ - Σₖ Fₙ,ₖ Uₖ over odd k < n.
    Degenerate orders map to None.
    """
    _check_odd(n_max)
    _require_fisher(table)
    degenerate = set(degenerate_orders(table, n_max, threshold))
    values: Dict[int, Optional[float]] = {}
    for n in range(1, n_max + 1, 2):
        if n in degenerate:
            values[n] = None
            continue
        if n == 1:
            values[n] = 1.0
            continue
        m = (n - 1) // 2
        u = (-1) ** m * n * table.mu_at(n - 1)
        for k in range(1, n, 2):
            u -= projection_coeff(table, n, k, threshold) * values[k]
        values[n] = u
    return values


def bound_of_order(
    table: MomentTable,
    n_max: int,
    threshold: float = config.DEGENERACY_THRESHOLD,
    verbose: bool = False,
) -> BoundReport:
    """Cumulative odd-order bound through order n_max.

    Args:
        table: moment table with max_order >= n_max
        n_max: highest odd order included
        threshold: Hadamard-ratio degeneracy threshold
        verbose: add a note comparing the third-order numerator with the
            printed variant μ₄²/μ₂ - 3μ₂

    Returns:
        BoundReport; degenerate orders contribute nothing
    """
    _check_odd(n_max)
    mu2 = _require_fisher(table)
    orders = list(range(1, n_max + 1, 2))
    degenerate = degenerate_orders(table, n_max, threshold)
    u_values = u_recursion(table, n_max, threshold)

    d_values: Dict[int, float] = {}
    n_values: Dict[int, Optional[float]] = {}
    f_values: Dict[Tuple[int, int], float] = {}
    terms: Dict[int, float] = {}
    cumulative_by_order: Dict[int, float] = {}
    cumulative = 0.0
    for n in orders:
        d_values[n] = gram_determinant(table, n)
        if n in degenerate:
            n_values[n] = None
            terms[n] = 0.0
            logger.debug(f"bound_of_order: order {n} degenerate, D={d_values[n]:.3e}")
        else:
            n_values[n] = normalizer(table, n, threshold)
            for k in range(1, n, 2):
                f_values[(n, k)] = projection_coeff(table, n, k, threshold)
            terms[n] = 0.25 * mu2 * u_values[n] ** 2 / n_values[n]
            cumulative += terms[n]
        cumulative_by_order[n] = cumulative

    if degenerate:
        logger.debug(f"Degenerate odd orders {degenerate}; their terms are dropped")

    notes: List[str] = []
    if verbose and n_max >= 3 and 3 not in degenerate:
        printed = table.mu_at(4) ** 2 / mu2 - 3.0 * mu2
        notes.append(
            f"third-order numerator: implemented (mu4 - 3 mu2^2)/mu2 = {u_values[3]:.12g}, "
            f"printed variant mu4^2/mu2 - 3 mu2 = {printed:.12g}"
        )

    return BoundReport(
        orders=orders,
        d_values=d_values,
        n_values=n_values,
        u_values=u_values,
        f_values=f_values,
        terms=terms,
        cumulative_by_order=cumulative_by_order,
        cumulative_rhs=cumulative,
        degenerate_orders=degenerate,
        notes=notes,
    )


def third_order_closed_form(table: MomentTable, threshold: float = config.DEGENERACY_THRESHOLD) -> float:
    """Third-order bound ¼[1 + (μ₄ - 3μ₂²)² / (μ₆μ₂ - μ₄²)]."""
    mu2 = _require_fisher(table)
    if is_degenerate(table, 3, threshold):
        raise DegenerateGram(3)
    mu4, mu6 = table.mu_at(4), table.mu_at(6)
    return 0.25 * (1.0 + (mu4 - 3.0 * mu2**2) ** 2 / (mu6 * mu2 - mu4**2))


def _as_sqrt(state: StateLike) -> SqrtState:
    return state if isinstance(state, SqrtState) else sqrt_embed(state)


def estimator_gradient(t_est: HermitianOperator, xi: StateLike) -> np.ndarray:
    """∇t = T̃ξ + ξT̃ for the estimator centered in the state."""
    mxi = as_matrix(_as_sqrt(xi))
    tt = center_operator(t_est, mxi).matrix
    return tt @ mxi + mxi @ tt


def gradient_norm_sq(t_est: HermitianOperator, xi: StateLike) -> float:
    """‖∇t‖², equal to 2(ΔT² + δT²)."""
    grad = estimator_gradient(t_est, xi)
    return hs_inner_real(grad, grad, context="gradient norm")


def order1_product(state: StateLike, pair: ConjugatePair) -> float:
    """(ΔT² + δT²)(ΔH² - δH²), at least 1/4 for an exact conjugate pair."""
    xi = _as_sqrt(state)
    h_stats = stat_summary(pair.h, xi)
    t_stats = stat_summary(pair.t_est, xi)
    return t_stats.skew_second_kind * h_stats.wysi


def symmetric_order1_form(state: StateLike, pair: ConjugatePair) -> Tuple[float, float]:
    """Both sides of the weaker inequality ΔT²ΔH² ≥ ¼ + δT²δH²."""
    xi = _as_sqrt(state)
    h_stats = stat_summary(pair.h, xi)
    t_stats = stat_summary(pair.t_est, xi)
    return t_stats.variance * h_stats.variance, 0.25 + t_stats.delta_sq * h_stats.delta_sq


def conjugation_diagnostics(
    rho: Optional[DensityMatrix],
    pair: ConjugatePair,
    stack: DerivativeStack,
) -> ConjugationDiagnostics:
    """Checks that only hold when i[H, T] = I on the populated levels.

    The projection ∇t·ξ̇ should equal 1, κₙ = tr(ξ⁽ⁿ⁾T̃ξ⁽ⁿ⁾) should not move
    under evolution, and for odd n the contraction ∇t·ξ⁽ⁿ⁾ should equal
    (-1)^((n-1)/2) n μₙ₋₁.
    """
    xi = stack.xi
    tt = center_operator(pair.t_est, xi).matrix
    grad = tt @ xi + xi @ tt
    projection = hs_inner_real(grad, stack[1], context="gradient projection")
    kappa = {
        n: trace_product(stack[n], tt, stack[n], context=f"kappa_{n}")
        for n in range(1, stack.max_order + 1)
    }
    contractions: Dict[int, float] = {}
    expected: Dict[int, float] = {}
    for n in range(1, stack.max_order + 1, 2):
        contractions[n] = hs_inner_real(grad, stack[n], context=f"contraction_{n}")
        half = (n - 1) // 2
        mu_prev = hs_inner_real(stack[half], stack[half], context=f"mu_{n - 1}")
        expected[n] = (-1) ** half * n * mu_prev
    safe = None
    if rho is not None and pair.boundary_band > 0:
        safe = boundary_safe(rho, pair)
        if not safe:
            logger.warning("State populates the truncation boundary; conjugation checks are unreliable")
    return ConjugationDiagnostics(
        projection=projection,
        kappa_per_order=kappa,
        contractions=contractions,
        expected_contractions=expected,
        boundary_safe=safe,
    )


def kappa_drift(
    xi: SqrtState,
    pair: ConjugatePair,
    times: Sequence[float],
    n_max: int,
) -> Tuple[List[Dict[int, float]], Dict[int, float]]:
    """κₙ along a time grid and its relative spread per order.

    The spread is (max - min) / max(max|κₙ|, μ₂ₙ), since κₙ vanishes for
    parity-symmetric states.
    """
    per_time: List[Dict[int, float]] = []
    scales: Dict[int, float] = {}
    for t in times:
        stack = derivative_stack(evolve_sqrt_state(xi, pair.h, t), pair.h, n_max)
        diagnostics = conjugation_diagnostics(None, pair, stack)
        per_time.append(diagnostics.kappa_per_order)
        for n in range(1, n_max + 1):
            mu = hs_inner_real(stack[n], stack[n])
            scales[n] = max(scales.get(n, 0.0), mu)
    drift: Dict[int, float] = {}
    for n in range(1, n_max + 1):
        values = [k[n] for k in per_time]
        scale = max(max(abs(v) for v in values), scales[n], np.finfo(float).tiny)
        drift[n] = (max(values) - min(values)) / scale
    return per_time, drift


def estimator_term_even(
    state: Optional[StateLike],
    pair: ConjugatePair,
    stack: DerivativeStack,
    n: int = 2,
    threshold: float = config.DEGENERACY_THRESHOLD,
) -> float:
    """Estimator-dependent order-2 term (∇t·ξ̂⁽²⁾)² / (2‖ξ̂⁽²⁾‖²).

    ξ̂⁽²⁾ is ξ⁽²⁾ with its components along ξ and ξ̇ removed. The value is on
    the same scale as direct_bhattacharyya; even_term_product_units converts
    it for the BoundReport. It is never folded into the odd-order bound.
    """
    if n != 2:
        raise InvalidOrder(f"Only the order-2 even term is supported, got {n}")
    if stack.max_order < 2:
        raise InvalidOrder("Derivative stack must reach order 2")
    xi = stack.xi if state is None else as_matrix(_as_sqrt(state))
    mu2 = hs_inner_real(stack[1], stack[1], context="mu_2")
    if mu2 <= config.ZERO_FISHER_THRESHOLD:
        raise ZeroFisherInformation(f"mu_2 = {mu2:.3e}")
    hat = (
        stack[2]
        - hs_inner_real(stack[2], xi) * xi
        - hs_inner_real(stack[2], stack[1]) / mu2 * stack[1]
    )
    norm_sq = hs_inner_real(hat, hat, context="|xi_hat^(2)|^2")
    raw = hs_inner_real(stack[2], stack[2])
    if raw <= 0.0 or norm_sq <= threshold * raw:
        logger.debug("estimator_term_even: order 2 degenerate")
        return 0.0
    tt = center_operator(pair.t_est, xi).matrix
    grad = tt @ xi + xi @ tt
    contraction = hs_inner_real(grad, hat, context="gradient . xi_hat^(2)")
    return 0.5 * contraction**2 / norm_sq


def even_term_product_units(term: float, mu2: float) -> float:
    """Scale an even term by μ₂/2 so the order-1 term reads 1/4."""
    return 0.5 * mu2 * term


def commutator_ladder_defect(pair: ConjugatePair, xi: Optional[StateLike] = None, k_max: int = 4) -> float:
    """Worst relative residual of [H̃ᵏ, T] = -k i H̃ᵏ⁻¹ away from the boundary.

    For each k the residual is restricted to the leading block that the
    truncation defect cannot reach within k applications of H.
    """
    h = pair.h.matrix
    if xi is not None:
        h = center_operator(pair.h, _as_sqrt(xi)).matrix
    t = pair.t_est.matrix
    dim = h.shape[0]
    worst = 0.0
    power_prev = np.eye(dim, dtype=complex)
    for k in range(1, k_max + 1):
        power = power_prev @ h
        residual = power @ t - t @ power + 1j * k * power_prev
        cut = dim - pair.boundary_band - k
        if cut < 1:
            break
        scale = max(1.0, k * float(np.max(np.abs(power_prev))))
        worst = max(worst, float(np.max(np.abs(residual[:cut, :cut]))) / scale)
        power_prev = power
    return worst


def attach_diagnostics(report: BoundReport, kappa: Optional[Dict[int, float]] = None, even_term: Optional[float] = None) -> BoundReport:
    return replace(report, kappa=kappa, even_term=even_term)
