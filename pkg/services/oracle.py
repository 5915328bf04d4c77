"""Brute-force Gram–Schmidt oracle for the determinant route.

Hermitian matrices are mapped to real vectors in the orthonormal basis
{E_ii, (E_ij + E_ji)/√2, i(E_ij - E_ji)/√2}, so the Euclidean dot product
equals tr(AB). Two chains are orthogonalized:

* the hat chain ξ, ξ⁽¹⁾, ξ⁽²⁾, ... used for the direct Bhattacharyya sum,
* the odd chain ξ⁽¹⁾, ξ⁽³⁾, ... whose residuals ψₙ have ‖ψₙ‖² = Nₙ.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

import config
from services.errors import InvalidOrder
from services.matcore import HermitianOperator, as_matrix, center_operator
from services.states import SqrtState
from services.statmoments import DerivativeStack

logger = logging.getLogger(__name__)


def hermitian_to_vector(matrix: np.ndarray) -> np.ndarray:
    m = as_matrix(matrix)
    upper = np.triu_indices(m.shape[0], 1)
    return np.concatenate(
        [m.diagonal().real, np.sqrt(2.0) * m[upper].real, np.sqrt(2.0) * m[upper].imag]
    )


def vector_to_hermitian(vector: np.ndarray, dim: int) -> np.ndarray:
    upper = np.triu_indices(dim, 1)
    n_off = len(upper[0])
    m = np.diag(vector[:dim].astype(complex))
    off = (vector[dim:dim + n_off] + 1j * vector[dim + n_off:]) / np.sqrt(2.0)
    m[upper] = off
    m[(upper[1], upper[0])] = off.conj()
    return m


@dataclass(frozen=True, eq=False)
class OrthogonalSystem:
    """Orthogonalized derivative chains; degenerate members are zero vectors."""

    dim: int
    threshold: float
    raw: Tuple[np.ndarray, ...]
    hat_vectors: Tuple[np.ndarray, ...]
    hat_norms: Tuple[float, ...]
    degenerate_hat: Set[int]
    psi_vectors: Dict[int, np.ndarray]
    psi_norms: Dict[int, float]
    degenerate_psi: Set[int]

    @property
    def max_order(self) -> int:
        return len(self.raw) - 1


def _orthogonalize(vectors: Sequence[np.ndarray], threshold: float) -> Tuple[List[np.ndarray], List[float], List[bool]]:
    """Modified Gram–Schmidt with one re-orthogonalization pass.

    A vector is degenerate when the running product of residual-to-raw norm
    ratios drops to ``threshold``; this product equals the Gram determinant
    over the product of the Gram diagonal. Degeneracy is hereditary.
    """
    basis: List[np.ndarray] = []
    residuals: List[np.ndarray] = []
    norms: List[float] = []
    flags: List[bool] = []
    ratio = 1.0
    for v in vectors:
        raw_norm = float(v @ v)
        w = v.astype(float, copy=True)
        for _ in range(2):
            for q in basis:
                w -= (w @ q) / (q @ q) * q
        res_norm = float(w @ w)
        ratio = ratio * res_norm / raw_norm if raw_norm > 0.0 else 0.0
        degenerate = bool(flags and flags[-1]) or ratio <= threshold
        if degenerate:
            w = np.zeros_like(w)
            res_norm = 0.0
        else:
            basis.append(w)
        residuals.append(w)
        norms.append(res_norm)
        flags.append(degenerate)
    return residuals, norms, flags


def build_orthogonal_system(stack: DerivativeStack, threshold: float = config.DEGENERACY_THRESHOLD) -> OrthogonalSystem:
    dim = stack.xi.shape[0]
    raw = tuple(hermitian_to_vector(v) for v in stack.vectors)

    hat, hat_norms, hat_flags = _orthogonalize(raw, threshold)
    odd_orders = list(range(1, stack.max_order + 1, 2))
    psi, psi_norms, psi_flags = _orthogonalize([raw[n] for n in odd_orders], threshold)

    system = OrthogonalSystem(
        dim=dim,
        threshold=threshold,
        raw=raw,
        hat_vectors=tuple(hat),
        hat_norms=tuple(hat_norms),
        degenerate_hat={n for n, flag in enumerate(hat_flags) if flag},
        psi_vectors=dict(zip(odd_orders, psi)),
        psi_norms=dict(zip(odd_orders, psi_norms)),
        degenerate_psi={n for n, flag in zip(odd_orders, psi_flags) if flag},
    )
    logger.debug(
        f"build_orthogonal_system: dim {dim}, orders 0..{stack.max_order}, "
        f"degenerate psi {sorted(system.degenerate_psi)}"
    )
    return system


def hat_matrix(system: OrthogonalSystem, n: int) -> np.ndarray:
    """ξ̂⁽ⁿ⁾ as a Hermitian matrix."""
    return vector_to_hermitian(system.hat_vectors[n], system.dim)


def reorthogonalize(system: OrthogonalSystem) -> OrthogonalSystem:
    """Run the hat-chain orthogonalization again on its own output.

    Degenerate (zero) members are skipped; the result should differ from the
    input only by roundoff.
    """
    kept = [n for n in range(len(system.hat_vectors)) if n not in system.degenerate_hat]
    again, norms, _ = _orthogonalize([system.hat_vectors[n] for n in kept], 0.0)
    hat = list(system.hat_vectors)
    hat_norms = list(system.hat_norms)
    for n, v, norm in zip(kept, again, norms):
        hat[n] = v
        hat_norms[n] = norm
    return OrthogonalSystem(
        dim=system.dim,
        threshold=system.threshold,
        raw=system.raw,
        hat_vectors=tuple(hat),
        hat_norms=tuple(hat_norms),
        degenerate_hat=set(system.degenerate_hat),
        psi_vectors=dict(system.psi_vectors),
        psi_norms=dict(system.psi_norms),
        degenerate_psi=set(system.degenerate_psi),
    )


def _gradient_vector(t_est: HermitianOperator, xi: SqrtState) -> np.ndarray:
    mxi = as_matrix(xi)
    tt = center_operator(t_est, mxi).matrix
    return hermitian_to_vector(tt @ mxi + mxi @ tt)


def _check_orders(system: OrthogonalSystem, orders: Iterable[int]) -> List[int]:
    orders = sorted(set(orders))
    for n in orders:
        if n < 1 or n > system.max_order:
            raise InvalidOrder(f"Order {n} outside 1..{system.max_order}")
    return orders


def direct_bhattacharyya(
    system: OrthogonalSystem,
    t_est: HermitianOperator,
    xi: SqrtState,
    orders: Iterable[int],
) -> float:
    """½ Σₙ (∇t·ξ̂⁽ⁿ⁾)² / ‖ξ̂⁽ⁿ⁾‖², a lower bound on ΔT² + δT².

    Degenerate members of the hat chain are skipped.
    """
    grad = _gradient_vector(t_est, xi)
    total = 0.0
    for n in _check_orders(system, orders):
        if n in system.degenerate_hat:
            continue
        v = system.hat_vectors[n]
        total += float(grad @ v) ** 2 / system.hat_norms[n]
    return 0.5 * total


def optimal_weights(
    system: OrthogonalSystem,
    t_est: HermitianOperator,
    xi: SqrtState,
    orders: Optional[Iterable[int]] = None,
) -> Dict[int, float]:
    """λₙ minimizing ‖∇t + Σₙ λₙ ξ̂⁽ⁿ⁾‖², solved by least squares.

    Defaults to every non-degenerate order of the hat chain.
    """
    if orders is None:
        orders = range(1, system.max_order + 1)
    used = [n for n in _check_orders(system, orders) if n not in system.degenerate_hat]
    if not used:
        return {}
    grad = _gradient_vector(t_est, xi)
    basis = np.column_stack([system.hat_vectors[n] for n in used])
    weights, *_ = np.linalg.lstsq(basis, -grad, rcond=None)
    return dict(zip(used, (float(w) for w in weights)))


def min_variance_oracle(
    system: OrthogonalSystem,
    t_est: HermitianOperator,
    xi: SqrtState,
    orders: Optional[Iterable[int]] = None,
) -> float:
    """Minimum of Var[R] over the weights, ‖∇t‖² - 2·direct_bhattacharyya."""
    if orders is None:
        orders = range(1, system.max_order + 1)
    orders = _check_orders(system, orders)
    grad = _gradient_vector(t_est, xi)
    weights = optimal_weights(system, t_est, xi, orders)
    residual = grad.copy()
    for n, w in weights.items():
        residual += w * system.hat_vectors[n]
    return float(residual @ residual)


def psi_projection_coeff(system: OrthogonalSystem, n: int, k: int) -> float:
    """⟨ξ⁽ⁿ⁾, ψₖ⟩ / ‖ψₖ‖², the oracle counterpart of Fₙ,ₖ."""
    if k in system.degenerate_psi:
        raise InvalidOrder(f"psi_{k} is degenerate")
    return float(system.raw[n] @ system.psi_vectors[k]) / system.psi_norms[k]
