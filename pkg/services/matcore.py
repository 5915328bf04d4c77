"""Dense complex matrix kernel with Hilbert-Schmidt geometry.

Everything above this module sees matrices either as plain complex
``numpy`` arrays (``ComplexMatrix``) or as validated ``HermitianOperator``
values. Functions accept any object exposing a ``matrix`` attribute
(HermitianOperator, DensityMatrix, SqrtState) wherever a matrix is expected.
"""
import logging
from dataclasses import dataclass
from typing import Any, Tuple, Union

import numpy as np
import scipy.linalg

import config
from services.errors import (
    DimensionMismatch,
    ImaginaryResidueError,
    InvalidMatrix,
    NotHermitian,
    NotPositiveSemidefinite,
)

logger = logging.getLogger(__name__)

ComplexMatrix = np.ndarray
MatrixLike = Union["HermitianOperator", np.ndarray, Any]


def _freeze(matrix: np.ndarray) -> np.ndarray:
    frozen = np.array(matrix, dtype=complex, copy=True)
    frozen.flags.writeable = False
    return frozen


def as_matrix(x: MatrixLike) -> np.ndarray:
    """Return the complex array behind ``x`` without copying when possible."""
    return np.asarray(getattr(x, "matrix", x), dtype=complex)


def to_complex_matrix(x: MatrixLike) -> ComplexMatrix:
    """Validate that ``x`` is a finite square matrix and return a read-only copy.

    Raises:
        InvalidMatrix: not two-dimensional, not square, empty or non-finite
    """
    m = as_matrix(x)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InvalidMatrix(f"Expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrix("Matrix contains non-finite entries")
    return _freeze(m)


def hermiticity_defect(x: MatrixLike) -> float:
    m = as_matrix(x)
    return float(np.max(np.abs(m - m.conj().T)))


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"Shapes differ: {a.shape} vs {b.shape}")


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Hermitian matrix, symmetrized on construction.

    Build instances with ``HermitianOperator.from_matrix``; the stored matrix
    is read-only and exactly equal to its conjugate transpose.
    """

    matrix: np.ndarray
    hermiticity_defect: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "matrix", _freeze(self.matrix))

    @classmethod
    def from_matrix(cls, matrix: MatrixLike, tol: float = config.HERMITIAN_TOL) -> "HermitianOperator":
        """Validate and symmetrize a matrix.

        Args:
            matrix: square complex matrix
            tol: allowed defect relative to max(1, max|entry|)

        Returns:
            HermitianOperator holding (A + A†)/2

        Raises:
            NotHermitian: defect above tolerance
        """
        m = to_complex_matrix(matrix)
        defect = hermiticity_defect(m)
        scale = max(1.0, float(np.max(np.abs(m))))
        if defect > tol * scale:
            raise NotHermitian(f"Hermiticity defect {defect:.3e} exceeds {tol * scale:.3e}")
        return cls(matrix=0.5 * (m + m.conj().T), hermiticity_defect=defect)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Ascending eigenvalues and orthonormal eigenvectors (columns)."""
        return scipy.linalg.eigh(self.matrix)


def _is_hermitian(x: MatrixLike) -> bool:
    # HermitianOperator, DensityMatrix and SqrtState are validated on construction
    if not isinstance(x, np.ndarray) and hasattr(x, "matrix"):
        return True
    m = as_matrix(x)
    return hermiticity_defect(m) <= config.HERMITIAN_TOL * max(1.0, float(np.max(np.abs(m))))


def hs_inner(a: MatrixLike, b: MatrixLike) -> Union[float, complex]:
    """Hilbert-Schmidt inner product tr(a† b).

    Returns a float when both arguments are Hermitian and the imaginary part
    is negligible relative to ‖a‖‖b‖, otherwise the complex value.
    """
    ma, mb = as_matrix(a), as_matrix(b)
    _check_same_dim(ma, mb)
    value = complex(np.vdot(ma, mb))
    if _is_hermitian(a) and _is_hermitian(b):
        scale = max(1.0, abs(value.real), float(np.linalg.norm(ma) * np.linalg.norm(mb)))
        if abs(value.imag) <= config.HS_REAL_TOL * scale:
            return float(value.real)
    return value


def _checked_real(value: complex, scale: float, context: str) -> float:
    allowed = config.IMAG_RESIDUE_TOL * max(scale, abs(value.real), np.finfo(float).tiny)
    if abs(value.imag) > allowed:
        logger.error(f"Imaginary residue {value.imag:.3e} on {context or 'trace'}")
        raise ImaginaryResidueError(
            f"Imaginary residue {value.imag:.3e} exceeds {allowed:.3e} on {context or 'trace'}"
        )
    return float(value.real)


def hs_inner_real(a: MatrixLike, b: MatrixLike, context: str = "") -> float:
    """tr(ab) for Hermitian a, b, aborting on a non-negligible imaginary part."""
    ma, mb = as_matrix(a), as_matrix(b)
    _check_same_dim(ma, mb)
    scale = float(np.linalg.norm(ma) * np.linalg.norm(mb))
    return _checked_real(complex(np.vdot(ma, mb)), scale, context)


def trace_product(*factors: MatrixLike, context: str = "") -> float:
    """Real trace of a matrix product whose trace is physically real.

    The residue check is relative to the product of Frobenius norms, which
    bounds |tr(A1 ... Ak)|.
    """
    mats = [as_matrix(f) for f in factors]
    for m in mats[1:]:
        _check_same_dim(mats[0], m)
    product = mats[0]
    for m in mats[1:]:
        product = product @ m
    scale = float(np.prod([np.linalg.norm(m) for m in mats]))
    return _checked_real(complex(np.trace(product)), scale, context)


def matrix_sqrt(a: MatrixLike) -> HermitianOperator:
    """Unique PSD square root via eigendecomposition.

    Eigenvalues with |λ| ≤ EIGEN_CLAMP are set to zero.

    Raises:
        NotPositiveSemidefinite: an eigenvalue below -EIGEN_CLAMP
    """
    op = a if isinstance(a, HermitianOperator) else HermitianOperator.from_matrix(a)
    w, v = op.eigh()
    if w[0] < -config.EIGEN_CLAMP:
        raise NotPositiveSemidefinite(f"Smallest eigenvalue {w[0]:.3e} is negative")
    w = np.where(np.abs(w) <= config.EIGEN_CLAMP, 0.0, w)
    root = (v * np.sqrt(w)) @ v.conj().T
    return HermitianOperator.from_matrix(root)


def commutator(a: MatrixLike, b: MatrixLike) -> ComplexMatrix:
    ma, mb = as_matrix(a), as_matrix(b)
    _check_same_dim(ma, mb)
    return ma @ mb - mb @ ma


def ad_power(h: MatrixLike, x: MatrixLike, n: int) -> ComplexMatrix:
    """n-fold nested commutator [h, [h, ... [h, x]]]; n = 0 returns x."""
    if n < 0:
        raise ValueError(f"ad_power needs n >= 0, got {n}")
    result = as_matrix(x).copy()
    for _ in range(n):
        result = commutator(h, result)
    return result


def unitary_evolve(h: MatrixLike, x: MatrixLike, t: float) -> ComplexMatrix:
    """Heisenberg-picture conjugation e^{-iht} x e^{iht}."""
    if not np.isfinite(t):
        raise ValueError(f"Evolution time must be finite, got {t}")
    op = h if isinstance(h, HermitianOperator) else HermitianOperator.from_matrix(h)
    mx = as_matrix(x)
    _check_same_dim(op.matrix, mx)
    w, v = op.eigh()
    u = (v * np.exp(-1j * w * t)) @ v.conj().T
    return u @ mx @ u.conj().T


def center_operator(x: MatrixLike, xi: MatrixLike) -> HermitianOperator:
    """x - tr(ξ x ξ) I, the observable shifted to zero mean in the state ξ²."""
    mx, mxi = as_matrix(x), as_matrix(xi)
    _check_same_dim(mx, mxi)
    mean = trace_product(mxi, mx, mxi, context="center_operator mean")
    return HermitianOperator.from_matrix(mx - mean * np.eye(mx.shape[0]))
