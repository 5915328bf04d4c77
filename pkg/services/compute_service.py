"""Compute pipeline: ProblemSpec in, RunReport out."""
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

import config
from services.bounds import (
    BoundReport,
    ConjugationDiagnostics,
    attach_diagnostics,
    bound_of_order,
    conjugation_diagnostics,
    estimator_term_even,
    even_term_product_units,
    order1_product,
    symmetric_order1_form,
)
from services.errors import QcrbError
from services.matcore import HermitianOperator
from services.oracle import build_orthogonal_system
from services.spec_service import ProblemSpec, matrix_to_array, serialize_spec
from services.states import (
    ConjugatePair,
    DensityMatrix,
    diagonal_state,
    evolve_sqrt_state,
    make_conjugate_pair,
    make_density,
    random_hamiltonian,
    random_mixed,
    random_pure,
    sqrt_embed,
    square_state,
    truncated_conjugate_pair,
)
from services.statmoments import (
    MomentTable,
    StatSummary,
    closed_form_moments,
    derivative_stack,
    hamiltonian_central_moments,
    moment_table,
    stat_summary,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Problem:
    """Operators built from a ProblemSpec."""

    h: HermitianOperator
    rho: DensityMatrix
    pair: Optional[ConjugatePair] = None


@dataclass
class TimeRecord:
    index: int
    time: float
    moments: MomentTable
    closed_form: Tuple[float, float, float]
    bound: BoundReport
    hamiltonian_stats: StatSummary
    hamiltonian_moments: Dict[int, float]
    oracle_psi_norms: Dict[int, float]
    estimator_stats: Optional[StatSummary] = None
    order1_product: Optional[float] = None
    symmetric_form: Optional[Tuple[float, float]] = None
    diagnostics: Optional[ConjugationDiagnostics] = None


@dataclass
class RunReport:
    schema_version: int
    version: str
    spec_fingerprint: str
    provenance: Dict[str, Any]
    records: List[TimeRecord]
    invariants: Dict[str, float]
    notes: List[str] = field(default_factory=list)


def spec_fingerprint(spec: ProblemSpec) -> str:
    return hashlib.sha256(serialize_spec(spec).encode("utf-8")).hexdigest()


def build_problem(spec: ProblemSpec) -> Problem:
    """Instantiate the generator, the initial state and the estimator pair."""
    oscillator = None
    source = spec.hamiltonian
    if source.kind == "explicit":
        h = HermitianOperator.from_matrix(matrix_to_array(source.matrix))
    elif source.kind == "gue":
        h = random_hamiltonian(spec.dimension, source.seed)
    else:
        oscillator = truncated_conjugate_pair(spec.dimension)
        h = oscillator.h

    state = spec.state
    if state.kind == "explicit":
        rho = make_density(matrix_to_array(state.matrix))
    elif state.kind == "diagonal":
        rho = diagonal_state(state.weights)
    elif state.kind == "ginibre":
        rho = random_mixed(spec.dimension, state.seed)
    else:
        rho = random_pure(spec.dimension, state.seed)

    pair = None
    if spec.estimator is not None:
        if spec.estimator.kind == "conjugate":
            pair = oscillator
        else:
            t_est = HermitianOperator.from_matrix(matrix_to_array(spec.estimator.matrix))
            pair = make_conjugate_pair(h, t_est)
    return Problem(h=h, rho=rho, pair=pair)


def _relative_spread(values: List[float]) -> float:
    scale = max(max(abs(v) for v in values), np.finfo(float).tiny)
    return (max(values) - min(values)) / scale


def _compute_at(problem: Problem, spec: ProblemSpec, index: int, t: float, xi0) -> TimeRecord:
    n_max = spec.n_max
    stack_order = max(n_max, 3)
    threshold = spec.tolerances.degeneracy

    xi = evolve_sqrt_state(xi0, problem.h, t)
    stack = derivative_stack(xi, problem.h, stack_order)
    table = moment_table(stack)
    bound = bound_of_order(table, n_max, threshold, verbose=logger.isEnabledFor(logging.DEBUG))
    system = build_orthogonal_system(stack, threshold)

    record = TimeRecord(
        index=index,
        time=t,
        moments=table,
        closed_form=closed_form_moments(xi, problem.h),
        bound=bound,
        hamiltonian_stats=stat_summary(problem.h, xi),
        hamiltonian_moments=hamiltonian_central_moments(problem.h, xi),
        oracle_psi_norms={n: v for n, v in system.psi_norms.items() if n <= n_max},
    )
    if problem.pair is not None:
        rho_t = square_state(xi)
        diagnostics = conjugation_diagnostics(rho_t, problem.pair, stack)
        even = None
        if spec.include_even_order_2:
            even = even_term_product_units(estimator_term_even(xi, problem.pair, stack, 2, threshold), table.mu[2])
        record.bound = attach_diagnostics(bound, kappa=diagnostics.kappa_per_order, even_term=even)
        record.estimator_stats = stat_summary(problem.pair.t_est, xi)
        record.order1_product = order1_product(xi, problem.pair)
        record.symmetric_form = symmetric_order1_form(xi, problem.pair)
        record.diagnostics = diagnostics
    return record


def _invariants(records: List[TimeRecord]) -> Dict[str, float]:
    invariants: Dict[str, float] = {}
    indices = sorted(records[0].moments.mu)
    invariants["moment_drift"] = max(
        _relative_spread([r.moments.mu[i] for r in records]) for i in indices
    )
    closed = 0.0
    for r in records:
        for value, index in zip(r.closed_form, (2, 4, 6)):
            reference = r.moments.mu[index]
            closed = max(closed, abs(value - reference) / max(abs(reference), np.finfo(float).tiny))
    invariants["closed_form_defect"] = closed
    if records[0].diagnostics is not None:
        drift = 0.0
        for n, mu_index in ((n, 2 * n) for n in records[0].diagnostics.kappa_per_order):
            values = [r.diagnostics.kappa_per_order[n] for r in records]
            scale = max(max(abs(v) for v in values), records[0].moments.mu[mu_index], np.finfo(float).tiny)
            drift = max(drift, (max(values) - min(values)) / scale)
        invariants["kappa_drift"] = drift
    return invariants


def run_compute(spec: ProblemSpec) -> RunReport:
    """Evaluate moments, bounds and diagnostics at every requested time.

    Raises:
        QcrbError: any typed failure, with ``time_index`` set when it happened
            at a grid point
    """
    problem = build_problem(spec)
    xi0 = sqrt_embed(problem.rho)
    logger.info(
        f"run_compute: dim {spec.dimension}, H {spec.hamiltonian.kind}, state {spec.state.kind}, "
        f"orders {list(spec.orders)}, {len(spec.times)} times"
    )

    records: List[TimeRecord] = []
    for index, t in enumerate(spec.times):
        try:
            records.append(_compute_at(problem, spec, index, t, xi0))
        except QcrbError as e:
            e.time_index = index
            logger.error(f"run_compute failed at time index {index} (t={t}): {e}")
            raise

    notes: List[str] = []
    if problem.pair is not None and problem.pair.boundary_band > 0:
        if any(r.diagnostics.boundary_safe is False for r in records):
            notes.append("state populates the truncation boundary; conjugation diagnostics are unreliable")
    if abs(problem.rho.purity - 1.0) <= 1e-10:
        notes.append("pure state: delta_sq vanishes and mu_2 = 2 <H^2>")
    for r in records:
        notes.extend(r.bound.notes)

    provenance = {
        "hamiltonian_seed": spec.hamiltonian.seed,
        "state_seed": spec.state.seed,
        "state_hash": xi0.source_hash,
    }
    report = RunReport(
        schema_version=config.SCHEMA_VERSION,
        version=config.VERSION,
        spec_fingerprint=spec_fingerprint(spec),
        provenance=provenance,
        records=records,
        invariants=_invariants(records),
        notes=notes,
    )
    logger.info(
        f"run_compute: done, cumulative bound at t0 = {records[0].bound.cumulative_rhs:.12g}, "
        f"degenerate orders {records[0].bound.degenerate_orders}"
    )
    return report
