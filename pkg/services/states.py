"""Density matrices, square-root embedding and reference instances."""
import hashlib
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

import config
from services.errors import InvalidDimension, NotPositiveSemidefinite, TraceDeviationTooLarge
from services.matcore import (
    HermitianOperator,
    MatrixLike,
    as_matrix,
    commutator,
    hs_inner_real,
    matrix_sqrt,
    to_complex_matrix,
    unitary_evolve,
)

logger = logging.getLogger(__name__)

SEED_MODULUS = 2**64


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Unit-trace positive semidefinite Hermitian matrix."""

    op: HermitianOperator
    purity: float
    eigen_floor: float

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    @property
    def dim(self) -> int:
        return self.op.dim


@dataclass(frozen=True, eq=False)
class SqrtState:
    """ξ = √ρ with tr(ξξ) = 1; ``source_hash`` identifies the density matrix."""

    xi: HermitianOperator
    source_hash: str

    @property
    def matrix(self) -> np.ndarray:
        return self.xi.matrix

    @property
    def dim(self) -> int:
        return self.xi.dim


@dataclass(frozen=True, eq=False)
class ConjugatePair:
    """Generator h and estimator t_est with defect i[h, t_est] - I.

    For the truncated oscillator the defect is supported on the last
    ``boundary_band`` levels; a pair built from explicit operators carries
    ``boundary_band = 0`` and makes no localization claim.
    """

    h: HermitianOperator
    t_est: HermitianOperator
    defect: np.ndarray
    boundary_band: int

    def __post_init__(self):
        defect = np.array(self.defect, dtype=complex, copy=True)
        defect.flags.writeable = False
        object.__setattr__(self, "defect", defect)

    @property
    def dim(self) -> int:
        return self.h.dim


def _fingerprint(matrix: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(matrix).tobytes()).hexdigest()[:16]


def make_density(matrix: MatrixLike) -> DensityMatrix:
    """Validate a density matrix, renormalizing small trace deviations.

    Raises:
        NotHermitian: defect above HERMITIAN_TOL
        TraceDeviationTooLarge: |tr - 1| above TRACE_RENORM_TOL
        NotPositiveSemidefinite: eigenvalue below -EIGEN_CLAMP
    """
    op = HermitianOperator.from_matrix(to_complex_matrix(matrix))
    trace = float(np.trace(op.matrix).real)
    if abs(trace - 1.0) > config.TRACE_RENORM_TOL:
        raise TraceDeviationTooLarge(f"Trace {trace:.12g} deviates from 1 by more than {config.TRACE_RENORM_TOL}")
    if trace != 1.0:
        op = HermitianOperator.from_matrix(op.matrix / trace)
    eigenvalues = np.linalg.eigvalsh(op.matrix)
    if eigenvalues[0] < -config.EIGEN_CLAMP:
        raise NotPositiveSemidefinite(f"Density matrix has eigenvalue {eigenvalues[0]:.3e}")
    purity = hs_inner_real(op, op, context="purity")
    return DensityMatrix(op=op, purity=purity, eigen_floor=float(max(eigenvalues[0], 0.0)))


def sqrt_embed(rho: DensityMatrix) -> SqrtState:
    """Map ρ to its unique PSD square root ξ."""
    xi = matrix_sqrt(rho.op)
    norm = hs_inner_real(xi, xi, context="tr(xi xi)")
    if abs(norm - 1.0) > config.SQRT_NORM_TOL:
        logger.warning(f"sqrt_embed: tr(xi xi) = {norm:.15g} deviates from 1")
    return SqrtState(xi=xi, source_hash=_fingerprint(rho.matrix))


def square_state(xi: SqrtState) -> DensityMatrix:
    """Inverse of sqrt_embed: ρ = ξ²."""
    return make_density(xi.matrix @ xi.matrix)


def evolve_sqrt_state(xi: SqrtState, h: HermitianOperator, t: float) -> SqrtState:
    """ξ(t) = e^{-iHt} ξ e^{iHt}; √ρ(t) equals the evolved √ρ(0)."""
    if t == 0.0:
        return xi
    evolved = HermitianOperator.from_matrix(unitary_evolve(h, xi, t))
    return SqrtState(xi=evolved, source_hash=xi.source_hash)


def _check_dim(dim: int, minimum: int = 2) -> None:
    if int(dim) != dim or dim < minimum:
        raise InvalidDimension(f"Dimension must be an integer >= {minimum}, got {dim}")


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_mixed(dim: int, seed: int) -> DensityMatrix:
    """Full-rank random state ρ = GG†/tr(GG†) with Ginibre G.

    Draws whose smallest eigenvalue falls below MIN_EIGEN_FLOOR are
    regenerated with seed + 1.
    """
    _check_dim(dim)
    current = int(seed) % SEED_MODULUS
    while True:
        g = _complex_normal(np.random.default_rng(current), (dim, dim))
        w = g @ g.conj().T
        rho = make_density(w / np.trace(w).real)
        if rho.eigen_floor >= config.MIN_EIGEN_FLOOR:
            return rho
        logger.debug(f"random_mixed: seed {current} gave eigen floor {rho.eigen_floor:.3e}, regenerating")
        current = (current + 1) % SEED_MODULUS


def random_pure(dim: int, seed: int) -> DensityMatrix:
    """Haar-random pure state |ψ⟩⟨ψ|."""
    _check_dim(dim)
    psi = _complex_normal(np.random.default_rng(int(seed) % SEED_MODULUS), dim)
    psi = psi / np.linalg.norm(psi)
    return make_density(np.outer(psi, psi.conj()))


def random_hamiltonian(dim: int, seed: int) -> HermitianOperator:
    """GUE-style Hermitian matrix rescaled to spectral norm 1."""
    _check_dim(dim)
    g = _complex_normal(np.random.default_rng(int(seed) % SEED_MODULUS), (dim, dim))
    h = 0.5 * (g + g.conj().T)
    spectral_norm = float(np.max(np.abs(np.linalg.eigvalsh(h))))
    return HermitianOperator.from_matrix(h / spectral_norm)


def diagonal_state(weights: Sequence[float]) -> DensityMatrix:
    return make_density(np.diag(np.asarray(weights, dtype=float)))


def thermal_state(dim: int, ratio: float) -> DensityMatrix:
    """Diagonal state with geometric populations ratio**k, normalized."""
    _check_dim(dim)
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    weights = ratio ** np.arange(dim, dtype=float)
    return diagonal_state(weights / weights.sum())


def _annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def truncated_conjugate_pair(dim: int) -> ConjugatePair:
    """Truncated oscillator with h := P and t_est := X.

    X = (a + a†)/√2 and P = i(a† - a)/√2 on the first ``dim`` ladder states.
    The defect i[P, X] - I vanishes except at the last diagonal entry, -dim.
    """
    _check_dim(dim, minimum=config.MIN_CONJUGATE_DIM)
    a = _annihilation(dim)
    x = HermitianOperator.from_matrix((a + a.conj().T) / np.sqrt(2.0))
    p = HermitianOperator.from_matrix(1j * (a.conj().T - a) / np.sqrt(2.0))
    defect = 1j * commutator(p, x) - np.eye(dim)
    return ConjugatePair(h=p, t_est=x, defect=defect, boundary_band=config.BOUNDARY_BAND)


def make_conjugate_pair(h: HermitianOperator, t_est: HermitianOperator, boundary_band: int = 0) -> ConjugatePair:
    """Pair an arbitrary generator and estimator, recording the defect."""
    if h.dim != t_est.dim:
        raise InvalidDimension(f"Generator dim {h.dim} differs from estimator dim {t_est.dim}")
    defect = 1j * commutator(h, t_est) - np.eye(h.dim)
    return ConjugatePair(h=h, t_est=t_est, defect=defect, boundary_band=boundary_band)


def boundary_safe(rho: DensityMatrix, pair: ConjugatePair, eps: float = config.BOUNDARY_EPS) -> bool:
    """True when the population on the top boundary_band + 2 levels is at most eps."""
    band = min(pair.boundary_band + 2, rho.dim)
    population = float(np.sum(np.real(np.diag(as_matrix(rho)))[-band:]))
    return population <= eps
