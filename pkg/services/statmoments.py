"""Moments of observables and of the time derivatives of ξ.

The derivative stack holds ξ⁽ⁿ⁾ = (-i)ⁿ adⁿ_H̃ ξ, with H centered in the
state, and the moment table holds μ₂ₙ = tr(ξ⁽ⁿ⁾ξ⁽ⁿ⁾) together with the
cross products tr(ξ⁽ʳ⁾ξ⁽ˢ⁾).
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

import numpy as np

import config
from services.errors import InvalidOrder, MissingMomentError
from services.matcore import (
    HermitianOperator,
    MatrixLike,
    as_matrix,
    center_operator,
    commutator,
    hs_inner_real,
    trace_product,
)
from services.states import SqrtState

logger = logging.getLogger(__name__)

# (-i)^n cycles with period 4
MINUS_I_POWERS = (1.0 + 0.0j, -1.0j, -1.0 + 0.0j, 1.0j)


@dataclass(frozen=True)
class StatSummary:
    mean: float
    variance: float
    delta_sq: float
    wysi: float
    skew_second_kind: float
    wysi_commutator: float


@dataclass(frozen=True, eq=False)
class DerivativeStack:
    max_order: int
    vectors: Tuple[np.ndarray, ...]

    @property
    def xi(self) -> np.ndarray:
        return self.vectors[0]

    def __getitem__(self, n: int) -> np.ndarray:
        return self.vectors[n]


@dataclass(frozen=True)
class MomentTable:
    """μ₂ₙ for n = 0..max_order (mu[0] = tr(ξξ) = 1) and all cross products."""

    max_order: int
    mu: Dict[int, float]
    cross: Dict[Tuple[int, int], float]

    def mu_at(self, index: int) -> float:
        try:
            return self.mu[index]
        except KeyError:
            raise MissingMomentError(
                f"mu_{index} is not in the table (max order {self.max_order})"
            ) from None


def expectation(x: MatrixLike, xi: SqrtState) -> float:
    """tr(ξ x ξ)."""
    return trace_product(xi, x, xi, context="expectation")


def stat_summary(x: MatrixLike, xi: SqrtState) -> StatSummary:
    """Variance, its WYSI split and the skew information of the second kind.

    Args:
        x: Hermitian observable
        xi: square-root state

    Returns:
        StatSummary where variance = wysi + delta_sq
    """
    mxi = as_matrix(xi)
    x_tilde = center_operator(x, xi)
    mean = expectation(x, xi)
    xt = x_tilde.matrix
    variance = trace_product(xt, xt, mxi, mxi, context="variance")
    delta_sq = trace_product(xt, mxi, xt, mxi, context="delta_sq")
    wysi = variance - delta_sq
    comm = commutator(mxi, xt)
    wysi_commutator = -0.5 * trace_product(comm, comm, context="wysi commutator")
    if abs(wysi - wysi_commutator) > config.WYSI_CROSSCHECK_TOL * max(1.0, abs(variance)):
        logger.warning(f"WYSI formulas disagree: {wysi:.15g} vs {wysi_commutator:.15g}")
    return StatSummary(
        mean=mean,
        variance=variance,
        delta_sq=delta_sq,
        wysi=wysi,
        skew_second_kind=variance + delta_sq,
        wysi_commutator=wysi_commutator,
    )


def derivative_stack(xi: SqrtState, h: HermitianOperator, n_max: int) -> DerivativeStack:
    """ξ, ξ⁽¹⁾, ..., ξ⁽ⁿᵐᵃˣ⁾ by repeated commutation with the centered generator."""
    if n_max < 1:
        raise InvalidOrder(f"n_max must be >= 1, got {n_max}")
    h_tilde = center_operator(h, xi).matrix
    nested = as_matrix(xi).copy()
    vectors = [as_matrix(xi).copy()]
    for n in range(1, n_max + 1):
        nested = commutator(h_tilde, nested)
        v = MINUS_I_POWERS[n % 4] * nested
        v = 0.5 * (v + v.conj().T)
        v.flags.writeable = False
        vectors.append(v)
    logger.debug(f"derivative_stack: built orders 0..{n_max} at dim {h_tilde.shape[0]}")
    return DerivativeStack(max_order=n_max, vectors=tuple(vectors))


def moment_table(stack: DerivativeStack) -> MomentTable:
    """μ₂ₙ and the full cross-product table of a derivative stack."""
    cross: Dict[Tuple[int, int], float] = {}
    for r in range(stack.max_order + 1):
        for s in range(r, stack.max_order + 1):
            value = hs_inner_real(stack[r], stack[s], context=f"tr(xi^({r}) xi^({s}))")
            cross[(r, s)] = value
            cross[(s, r)] = value
    mu = {2 * n: cross[(n, n)] for n in range(stack.max_order + 1)}
    return MomentTable(max_order=stack.max_order, mu=mu, cross=cross)


def closed_form_moments(xi: SqrtState, h: HermitianOperator) -> Tuple[float, float, float]:
    """μ₂, μ₄, μ₆ from traces of powers of H̃ against ξ, without commutators."""
    mxi = as_matrix(xi)
    ht = center_operator(h, xi).matrix
    powers = [np.eye(ht.shape[0], dtype=complex)]
    for _ in range(6):
        powers.append(powers[-1] @ ht)

    def sandwich(a: int, b: int) -> float:
        return trace_product(powers[a], mxi, powers[b], mxi, context=f"tr(H^{a} xi H^{b} xi)")

    mu2 = 2.0 * (sandwich(2, 0) - sandwich(1, 1))
    mu4 = 2.0 * (sandwich(4, 0) - 4.0 * sandwich(3, 1) + 3.0 * sandwich(2, 2))
    mu6 = 2.0 * (
        sandwich(6, 0) - 6.0 * sandwich(5, 1) + 15.0 * sandwich(4, 2) - 10.0 * sandwich(3, 3)
    )
    return mu2, mu4, mu6


def fisher_metric_scalar(stack: DerivativeStack) -> float:
    """Scalar Fisher metric 2 tr(ξ̇ξ̇) of the square-root embedding."""
    return 2.0 * hs_inner_real(stack[1], stack[1], context="fisher metric")


def sign_law_defect(table: MomentTable) -> float:
    """Worst relative violation of tr(ξ⁽ʳ⁾ξ⁽ˢ⁾) = (-1)^((r-s)/2) μ_{r+s}.

    Pairs with odd r + s must vanish; they are measured against
    sqrt(μ_{2r} μ_{2s}). Only pairs with r + s ≤ 2·max_order have a
    reference moment.
    """
    worst = 0.0
    for (r, s), value in table.cross.items():
        scale = max(np.sqrt(abs(table.mu[2 * r] * table.mu[2 * s])), np.finfo(float).tiny)
        if (r + s) % 2:
            expected = 0.0
        else:
            expected = (-1) ** ((r - s) // 2) * table.mu[r + s]
        worst = max(worst, abs(value - expected) / scale)
    return worst


def hamiltonian_central_moments(h: HermitianOperator, xi: SqrtState, powers: Iterable[int] = (2, 4)) -> Dict[int, float]:
    """⟨H̃ᵏ⟩ = tr(H̃ᵏ ξξ) for each requested power k."""
    mxi = as_matrix(xi)
    ht = center_operator(h, xi).matrix
    result = {}
    for k in powers:
        result[k] = trace_product(np.linalg.matrix_power(ht, k), mxi, mxi, context=f"<H^{k}>")
    return result
