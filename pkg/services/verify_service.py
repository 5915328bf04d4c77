"""Randomized property suite over every module.

Each property reports the worst margin ``allowed - observed`` over all
instances, where ``allowed`` is the property's base threshold multiplied by
the suite tolerance. Instance seeds derive from (seed, dim, sample) so a run
is reproducible and independent of evaluation order.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

import config
from services.bounds import (
    commutator_ladder_defect,
    conjugation_diagnostics,
    degenerate_orders,
    estimator_term_even,
    gradient_norm_sq,
    hadamard_ratio,
    bound_of_order,
    is_degenerate,
    kappa_drift,
    normalizer,
    order1_product,
    third_order_closed_form,
    projection_coeff,
)
from services.matcore import (
    HermitianOperator,
    commutator,
    hs_inner,
    hs_inner_real,
    matrix_sqrt,
    unitary_evolve,
)
from services.oracle import (
    build_orthogonal_system,
    direct_bhattacharyya,
    hat_matrix,
    min_variance_oracle,
    psi_projection_coeff,
    reorthogonalize,
)
from services.states import (
    boundary_safe,
    diagonal_state,
    evolve_sqrt_state,
    make_conjugate_pair,
    make_density,
    random_hamiltonian,
    random_mixed,
    random_pure,
    sqrt_embed,
    square_state,
    thermal_state,
    truncated_conjugate_pair,
)
from services.statmoments import (
    closed_form_moments,
    derivative_stack,
    moment_table,
    sign_law_defect,
    stat_summary,
)

logger = logging.getLogger(__name__)

TINY = np.finfo(float).tiny
# Hadamard ratio below which determinant-route tolerances are widened
WELL_CONDITIONED_RATIO = 1e-4


@dataclass
class PropertyResult:
    name: str
    base_tolerance: float
    allowed: float
    worst_observed: float = 0.0
    worst_margin: Optional[float] = None
    checked: int = 0
    skipped: int = 0
    failures: int = 0
    passed: bool = True


@dataclass
class SuiteReport:
    seed: int
    dims: List[int]
    samples: int
    tolerance: float
    properties: List[PropertyResult] = field(default_factory=list)
    passed: bool = True


class PropertyTracker:
    """Accumulates observations per property."""

    def __init__(self, tolerance: float):
        self.tolerance = tolerance
        self.results: Dict[str, PropertyResult] = {}

    def _result(self, name: str, base: float) -> PropertyResult:
        if name not in self.results:
            self.results[name] = PropertyResult(name=name, base_tolerance=base, allowed=base * self.tolerance)
        return self.results[name]

    def check(self, name: str, observed: float, base: float, widen: float = 1.0) -> bool:
        """Record ``observed`` against ``base * tolerance * widen``."""
        result = self._result(name, base)
        allowed = base * self.tolerance * widen
        margin = allowed - observed
        result.checked += 1
        result.worst_observed = max(result.worst_observed, observed)
        if result.worst_margin is None or margin < result.worst_margin:
            result.worst_margin = margin
        if not margin >= 0.0:
            result.failures += 1
            result.passed = False
            logger.debug(f"property {name} failed: observed {observed:.3e} > allowed {allowed:.3e}")
            return False
        return True

    def skip(self, name: str, base: float) -> None:
        self._result(name, base).skipped += 1

    def report(self, seed: int, dims: Sequence[int], samples: int) -> SuiteReport:
        properties = [self.results[name] for name in sorted(self.results)]
        return SuiteReport(
            seed=seed,
            dims=list(dims),
            samples=samples,
            tolerance=self.tolerance,
            properties=properties,
            passed=all(p.passed for p in properties),
        )


def instance_seeds(seed: int, dim: int, sample: int, count: int = 4) -> List[int]:
    state = np.random.SeedSequence([seed, dim, sample]).generate_state(count, dtype=np.uint64)
    return [int(s) for s in state]


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), TINY)


def _widen(ratio: float) -> float:
    return max(1.0, WELL_CONDITIONED_RATIO / max(ratio, TINY))


def _check_matcore(tracker: PropertyTracker, rho, h, t_est, rng: np.random.Generator) -> None:
    dim = h.dim
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    b = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    scale = float(np.linalg.norm(a) * np.linalg.norm(b))
    tracker.check("matcore.hs_conjugate_symmetry", abs(hs_inner(a, b) - np.conj(hs_inner(b, a))) / scale, 1e-12)

    root = matrix_sqrt(rho.op).matrix
    tracker.check("matcore.sqrt_squares_back", float(np.max(np.abs(root @ root - rho.matrix))), 1e-10)

    lhs = hs_inner_real(HermitianOperator.from_matrix(1j * commutator(h, rho)), t_est)
    rhs = hs_inner_real(rho, HermitianOperator.from_matrix(1j * commutator(h, t_est)))
    norm = float(np.linalg.norm(rho.matrix) * np.linalg.norm(t_est.matrix))
    tracker.check("matcore.ad_anti_self_adjoint", abs(lhs + rhs) / max(norm, TINY), 1e-10)

    evolved = make_density(unitary_evolve(h, rho, 0.7))
    tracker.check("matcore.evolution_preserves_purity", abs(evolved.purity - rho.purity), 1e-10)
    spectrum_before = np.linalg.eigvalsh(rho.matrix)
    spectrum_after = np.linalg.eigvalsh(evolved.matrix)
    tracker.check("matcore.evolution_preserves_spectrum", float(np.max(np.abs(spectrum_after - spectrum_before))), 1e-10)


def _check_states(tracker: PropertyTracker, rho, xi, dim: int, seeds: List[int]) -> None:
    back = square_state(xi)
    tracker.check("states.sqrt_embed_roundtrip", float(np.max(np.abs(back.matrix - rho.matrix))), 1e-10)
    tracker.check("states.sqrt_unit_norm", abs(hs_inner_real(xi, xi) - 1.0), 1e-10)
    again = random_mixed(dim, seeds[0])
    tracker.check("states.generator_determinism", float(np.max(np.abs(again.matrix - rho.matrix))), 0.0)
    h = random_hamiltonian(dim, seeds[1])
    norm = float(np.max(np.abs(np.linalg.eigvalsh(h.matrix))))
    tracker.check("states.hamiltonian_unit_norm", abs(norm - 1.0), 1e-12)


def _check_statmoments(tracker: PropertyTracker, xi, h, t_est, table, stack) -> None:
    for label, op in (("H", h), ("T", t_est)):
        stats = stat_summary(op, xi)
        tracker.check("statmoments.wysi_dual_formula", abs(stats.wysi - stats.wysi_commutator), 1e-10)
        tracker.check("statmoments.wysi_nonnegative", max(0.0, -stats.wysi), 1e-12)
        if label == "H":
            mu2 = table.mu[2]
            tracker.check("statmoments.mu2_equals_twice_wysi", abs(mu2 - 2.0 * stats.wysi) / max(1.0, mu2), 1e-10)

    closed = closed_form_moments(xi, h)
    for value, index in zip(closed, (2, 4, 6)):
        tracker.check("statmoments.closed_form_moments", _rel(value, table.mu[index]), 1e-9)

    for n in range(stack.max_order):
        scale = np.sqrt(table.mu[2 * n] * table.mu[2 * n + 2])
        tracker.check("statmoments.consecutive_orthogonality", abs(table.cross[(n, n + 1)]) / max(scale, TINY), 1e-10)
    tracker.check("statmoments.sign_law", sign_law_defect(table), 1e-9)

    for t in (0.3, 1.7):
        moved = moment_table(derivative_stack(evolve_sqrt_state(xi, h, t), h, 5))
        worst = max(_rel(moved.mu[i], table.mu[i]) for i in (2, 4, 6, 8, 10))
        tracker.check("statmoments.moments_time_invariant", worst, 1e-8)


def _check_bounds(tracker: PropertyTracker, table, system, threshold: float) -> None:
    n_max = table.max_order
    for n in range(1, n_max + 1, 2):
        d = hadamard_ratio(table, n)
        tracker.check("bounds.gram_determinant_nonnegative", max(0.0, -d), 1e-9)

    det_route = degenerate_orders(table, n_max, threshold)
    oracle_route = sorted(system.degenerate_psi)
    tracker.check("bounds.degeneracy_agrees_with_oracle", 0.0 if det_route == oracle_route else 1.0, 0.5)

    for n in range(3, n_max + 1, 2):
        if n in det_route or n in system.degenerate_psi:
            tracker.skip("bounds.normalizer_matches_oracle", 1e-8)
            continue
        widen = _widen(hadamard_ratio(table, n))
        tracker.check("bounds.normalizer_matches_oracle", _rel(normalizer(table, n, threshold), system.psi_norms[n]), 1e-8, widen)
        for k in range(1, n, 2):
            det_f = projection_coeff(table, n, k, threshold)
            oracle_f = psi_projection_coeff(system, n, k)
            scale = max(1.0, abs(det_f), abs(oracle_f))
            tracker.check("bounds.projection_coeff_matches_oracle", abs(det_f - oracle_f) / scale, 1e-8, widen)

    if is_degenerate(table, 3, threshold):
        tracker.skip("bounds.third_order_closed_form", 1e-10)
    else:
        report = bound_of_order(table, 3, threshold)
        r3 = hadamard_ratio(table, 3)
        tracker.check("bounds.third_order_closed_form", _rel(report.cumulative_rhs, third_order_closed_form(table, threshold)), 1e-10, _widen(r3))

    report = bound_of_order(table, n_max, threshold)
    values = [report.cumulative_by_order[n] for n in report.orders]
    drops = [max(0.0, a - b) for a, b in zip(values, values[1:])]
    tracker.check("bounds.cumulative_monotone", max(drops, default=0.0), 1e-12)


def _check_oracle(tracker: PropertyTracker, system, t_est, xi) -> None:
    orders = [n for n in range(1, min(5, system.max_order) + 1)]
    grad_sq = gradient_norm_sq(t_est, xi)
    stats = stat_summary(t_est, xi)
    tracker.check("oracle.gradient_norm_identity", _rel(grad_sq, 2.0 * stats.skew_second_kind), 1e-10)

    direct = direct_bhattacharyya(system, t_est, xi, orders)
    tracker.check("oracle.bessel_inequality", max(0.0, direct - 0.5 * grad_sq) / max(1.0, grad_sq), 1e-9)

    minimum = min_variance_oracle(system, t_est, xi, orders)
    tracker.check("oracle.min_variance_identity", abs(minimum - (grad_sq - 2.0 * direct)) / max(1.0, grad_sq), 1e-9)

    shifted = HermitianOperator.from_matrix(t_est.matrix + 3.7 * np.eye(t_est.dim))
    moved = direct_bhattacharyya(system, shifted, xi, orders)
    tracker.check("oracle.shift_invariance", abs(moved - direct) / max(1.0, direct), 1e-10)

    again = reorthogonalize(system)
    worst = 0.0
    for n, (before, after) in enumerate(zip(system.hat_vectors, again.hat_vectors)):
        raw_norm = max(float(np.linalg.norm(system.raw[n])), TINY)
        worst = max(worst, float(np.linalg.norm(after - before)) / raw_norm)
    tracker.check("oracle.reorthogonalization_idempotent", worst, 1e-12)


def _check_second_order(tracker: PropertyTracker, h, t_est, xi, stack, table, system, threshold: float) -> None:
    expected = stack[2] + table.mu[2] * stack.xi
    defect = float(np.max(np.abs(hat_matrix(system, 2) - expected)))
    tracker.check("oracle.second_hat_vector", defect / max(1.0, float(np.max(np.abs(expected)))), 1e-10)

    raw_sq = float(system.raw[2] @ system.raw[2])
    if 2 in system.degenerate_hat or system.hat_norms[2] <= 1e-6 * raw_sq:
        tracker.skip("bounds.even_term_matches_oracle", 1e-8)
        return
    term = estimator_term_even(None, make_conjugate_pair(h, t_est), stack, 2, threshold)
    oracle = direct_bhattacharyya(system, t_est, stack.xi, [2])
    scale = max(term, oracle, 1e-4 * gradient_norm_sq(t_est, xi), TINY)
    tracker.check("bounds.even_term_matches_oracle", abs(term - oracle) / scale, 1e-8)


def _check_pure_state(tracker: PropertyTracker, dim: int, seed: int, h) -> None:
    xi = sqrt_embed(random_pure(dim, seed))
    stats = stat_summary(h, xi)
    tracker.check("statmoments.pure_state_delta_vanishes", abs(stats.delta_sq), 1e-11)


def check_instance(tracker: PropertyTracker, dim: int, seeds: List[int], threshold: float = config.DEGENERACY_THRESHOLD) -> None:
    """Run every per-instance property on one random (ρ, H, T) triple."""
    rho = random_mixed(dim, seeds[0])
    h = random_hamiltonian(dim, seeds[1])
    t_est = random_hamiltonian(dim, seeds[2])
    rng = np.random.default_rng(seeds[3])
    xi = sqrt_embed(rho)
    stack = derivative_stack(xi, h, config.VERIFY_MAX_ORDER)
    table = moment_table(stack)
    system = build_orthogonal_system(stack, threshold)

    _check_matcore(tracker, rho, h, t_est, rng)
    _check_states(tracker, rho, xi, dim, seeds)
    _check_statmoments(tracker, xi, h, t_est, table, stack)
    _check_bounds(tracker, table, system, threshold)
    _check_oracle(tracker, system, t_est, xi)
    _check_second_order(tracker, h, t_est, xi, stack, table, system, threshold)
    _check_pure_state(tracker, dim, seeds[3], h)


def check_conjugate_pair(tracker: PropertyTracker) -> None:
    """Truncated-oscillator physics on a boundary-safe thermal state."""
    for dim in (8, 16, config.CONJUGATE_CHECK_DIM):
        pair = truncated_conjugate_pair(dim)
        interior = pair.defect.copy()
        corner = interior[dim - 1, dim - 1]
        interior[dim - 1, dim - 1] = 0.0
        tracker.check("states.conjugate_defect_localized", float(np.max(np.abs(interior))), 1e-10)
        tracker.check("states.conjugate_defect_corner", abs(corner + dim) / dim, 1e-12)

    dim = config.CONJUGATE_CHECK_DIM
    pair = truncated_conjugate_pair(dim)
    rho = thermal_state(dim, config.CONJUGATE_CHECK_RATIO)
    tracker.check("states.thermal_boundary_safe", 0.0 if boundary_safe(rho, pair) else 1.0, 0.5)

    xi = sqrt_embed(rho)
    stack = derivative_stack(xi, pair.h, 3)
    diagnostics = conjugation_diagnostics(rho, pair, stack)
    tracker.check("bounds.conjugate_projection_unit", abs(diagnostics.projection - 1.0), 1e-6)
    tracker.check("bounds.order1_product_quarter", max(0.0, 0.25 - order1_product(xi, pair)), 1e-3)
    for n, value in diagnostics.contractions.items():
        expected = diagnostics.expected_contractions[n]
        tracker.check("bounds.odd_contraction_law", abs(value - expected) / max(1.0, abs(expected)), 1e-6)
    _, drift = kappa_drift(xi, pair, config.CONJUGATE_CHECK_TIMES, 3)
    tracker.check("bounds.kappa_constant", max(drift.values()), 1e-4)
    tracker.check("bounds.commutator_ladder", commutator_ladder_defect(pair, xi), 1e-9)


def check_qubit(tracker: PropertyTracker) -> None:
    """σx/2 against diag(0.75, 0.25): order 3 degenerate, bound exactly 1/4."""
    h = HermitianOperator.from_matrix(np.array([[0.0, 0.5], [0.5, 0.0]]))
    xi = sqrt_embed(diagonal_state([0.75, 0.25]))
    table = moment_table(derivative_stack(xi, h, 3))
    report = bound_of_order(table, 3)
    tracker.check("bounds.qubit_degenerate_orders", 0.0 if report.degenerate_orders == [3] else 1.0, 0.5)
    tracker.check("bounds.qubit_quarter", abs(report.cumulative_rhs - 0.25), 1e-15)


def run_verify(
    seed: int = config.VERIFY_SEED,
    dims: Sequence[int] = config.VERIFY_DIMS,
    samples: int = config.VERIFY_SAMPLES,
    tolerance: float = config.VERIFY_TOLERANCE,
) -> SuiteReport:
    """Evaluate every property on ``samples`` random instances per dimension.

    Args:
        seed: master seed
        dims: dimensions to sample (each >= 2)
        samples: instances per dimension
        tolerance: multiplier on every property's base threshold

    Returns:
        SuiteReport with per-property worst margins
    """
    if tolerance < 0:
        raise ValueError(f"tolerance must be >= 0, got {tolerance}")
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    tracker = PropertyTracker(tolerance)
    started = time.perf_counter()

    check_qubit(tracker)
    check_conjugate_pair(tracker)
    for dim in dims:
        for sample in range(samples):
            check_instance(tracker, dim, instance_seeds(seed, dim, sample))
        logger.debug(f"run_verify: dim {dim} done")

    report = tracker.report(seed, dims, samples)
    failed = [p.name for p in report.properties if not p.passed]
    logger.info(
        f"run_verify: {len(report.properties)} properties, {len(failed)} failed, "
        f"{time.perf_counter() - started:.1f}s"
    )
    if failed:
        logger.warning(f"Failed properties: {failed}")
    return report
