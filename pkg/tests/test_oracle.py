"""
Unit tests for the Gram–Schmidt oracle and its agreement with the determinant route.
"""
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from services.bounds import degenerate_orders, gradient_norm_sq, hadamard_ratio, normalizer, projection_coeff
from services.errors import InvalidOrder
from services.matcore import HermitianOperator, hs_inner_real
from services.oracle import (
    build_orthogonal_system,
    direct_bhattacharyya,
    hat_matrix,
    hermitian_to_vector,
    min_variance_oracle,
    optimal_weights,
    psi_projection_coeff,
    reorthogonalize,
    vector_to_hermitian,
)
from services.states import diagonal_state, random_hamiltonian, random_mixed, sqrt_embed, thermal_state, truncated_conjugate_pair
from services.statmoments import derivative_stack, moment_table, stat_summary

# Hadamard ratio above which both routes are compared at full precision
WELL_CONDITIONED = 1e-4


def random_instance(dim, seed, n_max=7):
    xi = sqrt_embed(random_mixed(dim, seed))
    h = random_hamiltonian(dim, seed + 1)
    t_est = random_hamiltonian(dim, seed + 2)
    stack = derivative_stack(xi, h, n_max)
    return xi, t_est, stack


class TestVectorization:
    """Real coordinates of Hermitian matrices."""

    def test_dot_product_is_trace(self):
        """v(A)·v(B) = tr(AB)."""
        a = random_hamiltonian(4, 1)
        b = random_hamiltonian(4, 2)
        assert hermitian_to_vector(a.matrix) @ hermitian_to_vector(b.matrix) == pytest.approx(
            hs_inner_real(a, b), abs=1e-14
        )

    def test_inverse(self):
        """vector_to_hermitian undoes hermitian_to_vector."""
        a = random_hamiltonian(5, 3).matrix
        np.testing.assert_allclose(vector_to_hermitian(hermitian_to_vector(a), 5), a, atol=1e-15)


class TestOrthogonalSystem:
    """Hat and ψ chains."""

    def test_qubit_psi3_degenerate(self):
        """The qubit has one odd direction; ξ̂⁽³⁾ and ψ₃ vanish."""
        h = HermitianOperator.from_matrix(np.array([[0.0, 0.5], [0.5, 0.0]]))
        xi = sqrt_embed(diagonal_state([0.75, 0.25]))
        system = build_orthogonal_system(derivative_stack(xi, h, 3))
        assert system.degenerate_psi == {3}
        assert 3 in system.degenerate_hat
        np.testing.assert_array_equal(system.psi_vectors[3], 0.0)

    def test_hat_vectors_orthogonal(self):
        """Non-degenerate hat vectors are mutually orthogonal."""
        xi, _, stack = random_instance(5, 10, 5)
        system = build_orthogonal_system(stack)
        kept = [n for n in range(6) if n not in system.degenerate_hat]
        for i in kept:
            for j in kept:
                if i < j:
                    a, b = system.hat_vectors[i], system.hat_vectors[j]
                    assert abs(a @ b) <= 1e-10 * np.linalg.norm(system.raw[i]) * np.linalg.norm(system.raw[j])

    def test_second_hat_vector(self):
        """ξ̂⁽²⁾ = ξ⁽²⁾ + μ₂ξ with norm² μ₄ - μ₂²."""
        xi, _, stack = random_instance(4, 11, 3)
        table = moment_table(stack)
        system = build_orthogonal_system(stack)
        expected = stack[2] + table.mu[2] * stack.xi
        np.testing.assert_allclose(hat_matrix(system, 2), expected, atol=1e-12)
        assert system.hat_norms[2] == pytest.approx(table.mu[4] - table.mu[2] ** 2, rel=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), dim=st.integers(2, 8))
    def test_agrees_with_determinant_route(self, seed, dim):
        """Degeneracy, Nₙ and Fₙ,ₖ match the moment determinants."""
        _, _, stack = random_instance(dim, seed)
        table = moment_table(stack)
        system = build_orthogonal_system(stack)
        assert sorted(system.degenerate_psi) == degenerate_orders(table, 7)
        for n in (3, 5, 7):
            if n in system.degenerate_psi:
                continue
            if hadamard_ratio(table, n) < WELL_CONDITIONED:
                continue
            assert normalizer(table, n) == pytest.approx(system.psi_norms[n], rel=1e-8)
            for k in range(1, n, 2):
                det_f = projection_coeff(table, n, k)
                assert abs(det_f - psi_projection_coeff(system, n, k)) <= 1e-8 * max(1.0, abs(det_f))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), dim=st.integers(2, 8))
    def test_reorthogonalization_idempotent(self, seed, dim):
        """A second pass moves no vector beyond roundoff."""
        _, _, stack = random_instance(dim, seed, 5)
        system = build_orthogonal_system(stack)
        again = reorthogonalize(system)
        for n, (before, after) in enumerate(zip(system.hat_vectors, again.hat_vectors)):
            assert np.linalg.norm(after - before) <= 1e-12 * max(np.linalg.norm(system.raw[n]), 1e-300)


class TestBhattacharyya:
    """Direct sum, minimum variance and weights."""

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), dim=st.integers(2, 8))
    def test_bessel_inequality(self, seed, dim):
        """ΔT² + δT² ≥ ½Σ(∇t·ξ̂⁽ⁿ⁾)²/‖ξ̂⁽ⁿ⁾‖² for orders 1..5."""
        xi, t_est, stack = random_instance(dim, seed, 5)
        system = build_orthogonal_system(stack)
        stats = stat_summary(t_est, xi)
        assert direct_bhattacharyya(system, t_est, xi, range(1, 6)) <= stats.skew_second_kind + 1e-9

    def test_shift_invariance(self):
        """T and T + cI give the same sum."""
        xi, t_est, stack = random_instance(5, 20, 5)
        system = build_orthogonal_system(stack)
        shifted = HermitianOperator.from_matrix(t_est.matrix + 3.7 * np.eye(5))
        base = direct_bhattacharyya(system, t_est, xi, [1, 2, 3])
        assert direct_bhattacharyya(system, shifted, xi, [1, 2, 3]) == pytest.approx(base, abs=1e-12)

    def test_identity_estimator(self):
        """T = I carries no information."""
        xi, _, stack = random_instance(4, 21, 3)
        system = build_orthogonal_system(stack)
        identity = HermitianOperator.from_matrix(np.eye(4))
        assert direct_bhattacharyya(system, identity, xi, [1, 2, 3]) == pytest.approx(0.0, abs=1e-20)

    def test_min_variance_identity(self):
        """min Var[R] = 2(ΔT² + δT²) - 2·direct sum."""
        xi, t_est, stack = random_instance(6, 22, 5)
        system = build_orthogonal_system(stack)
        orders = [1, 2, 3, 4, 5]
        direct = direct_bhattacharyya(system, t_est, xi, orders)
        stats = stat_summary(t_est, xi)
        expected = 2 * (stats.variance + stats.delta_sq) - 2 * direct
        assert min_variance_oracle(system, t_est, xi, orders) == pytest.approx(expected, abs=1e-10)

    def test_first_weight(self):
        """λ₁ = -(∇t·ξ̇)/μ₂."""
        xi, t_est, stack = random_instance(4, 23, 3)
        system = build_orthogonal_system(stack)
        mu2 = moment_table(stack).mu[2]
        contraction_sq = 2.0 * direct_bhattacharyya(system, t_est, xi, [1]) * mu2
        weight = optimal_weights(system, t_est, xi, [1])[1]
        assert weight**2 == pytest.approx(contraction_sq / mu2**2, rel=1e-10)

    def test_conjugate_pair_first_order(self):
        """For the oscillator the first-order sum is 1/(2μ₂)."""
        pair = truncated_conjugate_pair(32)
        xi = sqrt_embed(thermal_state(32, 0.2))
        stack = derivative_stack(xi, pair.h, 3)
        system = build_orthogonal_system(stack)
        mu2 = moment_table(stack).mu[2]
        assert direct_bhattacharyya(system, pair.t_est, xi, [1]) == pytest.approx(0.5 / mu2, rel=1e-6)
        assert gradient_norm_sq(pair.t_est, xi) >= 1.0 / mu2 - 1e-6

    def test_order_out_of_range(self):
        """Orders beyond the stack are rejected."""
        xi, t_est, stack = random_instance(3, 24, 3)
        system = build_orthogonal_system(stack)
        with pytest.raises(InvalidOrder):
            direct_bhattacharyya(system, t_est, xi, [5])


if __name__ == '__main__':
    pytest.main([__file__, "-v"])
