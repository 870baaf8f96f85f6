"""Small dense linear-algebra helpers shared across modules."""

from __future__ import annotations

import numpy as np

DEFAULT_TOL = 1e-10


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def frobenius(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def skew_norm(a: np.ndarray) -> float:
    """Frobenius norm of the anti-hermitian part."""
    return float(np.linalg.norm(a - dagger(a))) / 2.0


def min_eigenvalue(a: np.ndarray) -> float:
    """Smallest eigenvalue of the hermitian part of ``a``."""
    return float(np.linalg.eigvalsh(hermitize(a))[0])


def trace_norm(a: np.ndarray) -> float:
    """Sum of singular values (nuclear norm)."""
    return float(np.linalg.svd(a, compute_uv=False).sum())


def as_complex_matrix(a, name: str = "matrix") -> np.ndarray:
    from .errors import ValidationError

    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr.view(float))):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def check_density(rho, dim: int | None = None, tol: float = 1e-8) -> np.ndarray:
    """Validate a density matrix: hermitian, PSD and unit trace within ``tol``."""
    from .errors import DimensionMismatch, ValidationError

    arr = as_complex_matrix(rho, "density")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(
            f"density has dimension {arr.shape[0]}, expected {dim}"
        )
    if skew_norm(arr) > tol:
        raise ValidationError("density is not hermitian within tolerance")
    arr = hermitize(arr)
    tr = float(arr.trace().real)
    if abs(tr - 1.0) > tol:
        raise ValidationError(f"density trace is {tr}, expected 1")
    if min_eigenvalue(arr) < -tol:
        raise ValidationError("density is not positive semidefinite")
    return arr
