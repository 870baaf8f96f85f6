"""Quantum transition matrices (QTMs) and block-diagonal vector states.

A QTM on ``n`` sites with internal dimension ``k`` is an ``n x n`` grid of
``k x k`` complex blocks ``B[i -> j]`` (transition from site ``i`` to site
``j``) satisfying, for every source site ``i``,

    sum_j B[i -> j]^* B[i -> j] = I_k.

It acts on vector states -- lists of positive semidefinite blocks
``rho_1 .. rho_n`` with total trace one -- by

    apply(B, S)_j = sum_i B[i -> j] S_i B[i -> j]^*,

which is the channel induced on densities of the form
``sum_i rho_i (x) |i><i|``.  Sites are indexed ``0 .. n_sites - 1``
throughout the API; model files use 1-based labels (see `model_io`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ._linalg import (
    DEFAULT_TOL,
    dagger,
    frobenius,
    hermitize,
    min_eigenvalue,
    skew_norm,
)
from .errors import (
    ColumnNotNormalized,
    DimensionMismatch,
    NotStochastic,
    ValidationError,
)

__all__ = [
    "QTM",
    "VectorState",
    "validate_qtm",
    "apply",
    "embed_classical",
]


@dataclass(frozen=True)
class VectorState:
    """Blocks ``rho_1 .. rho_n`` with each ``rho_i`` PSD and total trace 1.

    The blocks are symmetrized to ``(rho + rho^*)/2`` at construction when
    the anti-hermitian part is below ``tol``; larger skew parts are
    rejected.  This guards against hermiticity drift in long iterations.
    """

    blocks: np.ndarray  # shape (n, k, k)
    tol: float = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.blocks, dtype=complex)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValidationError(
                f"vector state needs shape (n, k, k), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr.view(float))):
            raise ValidationError("vector state has non-finite entries")
        for i, b in enumerate(arr):
            if skew_norm(b) > self.tol:
                raise ValidationError(f"block {i} is not hermitian within tolerance")
        arr = np.stack([hermitize(b) for b in arr])
        total = float(sum(b.trace().real for b in arr))
        if abs(total - 1.0) > self.tol:
            raise ValidationError(f"total trace is {total}, expected 1")
        for i, b in enumerate(arr):
            if min_eigenvalue(b) < -self.tol:
                raise ValidationError(f"block {i} is not positive semidefinite")
        arr.setflags(write=False)
        object.__setattr__(self, "blocks", arr)

    @property
    def n_sites(self) -> int:
        return self.blocks.shape[0]

    @property
    def internal_dim(self) -> int:
        return self.blocks.shape[1]

    def site_traces(self) -> np.ndarray:
        """Real trace of each block (the classical site distribution)."""
        return np.array([b.trace().real for b in self.blocks])

    def block_diagonal(self) -> np.ndarray:
        """The state as an (nk, nk) block-diagonal matrix, site-major."""
        n, k = self.n_sites, self.internal_dim
        out = np.zeros((n * k, n * k), dtype=complex)
        for i, b in enumerate(self.blocks):
            out[i * k : (i + 1) * k, i * k : (i + 1) * k] = b
        return out

    @staticmethod
    def maximally_mixed(n_sites: int, internal_dim: int) -> "VectorState":
        blocks = np.stack(
            [np.eye(internal_dim, dtype=complex) / (n_sites * internal_dim)]
            * n_sites
        )
        return VectorState(blocks)

    @staticmethod
    def point_mass(site: int, density: np.ndarray, n_sites: int) -> "VectorState":
        """All mass at ``site`` with internal state ``density``."""
        density = np.asarray(density, dtype=complex)
        k = density.shape[0]
        blocks = np.zeros((n_sites, k, k), dtype=complex)
        blocks[site] = density
        return VectorState(blocks)


@dataclass(frozen=True)
class QTM:
    """A validated quantum transition matrix.

    Instances are produced by `validate_qtm`; ``blocks`` maps
    ``(from_site, to_site)`` to a ``k x k`` array, absent keys meaning
    zero.  ``unital`` records whether every row Gram sum
    ``sum_i B[i -> j] B[i -> j]^*`` equals the identity.  All arrays are
    read-only; instances are safe to share between threads.
    """

    n_sites: int
    internal_dim: int
    blocks: Mapping[tuple[int, int], np.ndarray]
    unital: bool

    def block(self, from_site: int, to_site: int) -> np.ndarray:
        b = self.blocks.get((from_site, to_site))
        if b is None:
            return np.zeros((self.internal_dim, self.internal_dim), dtype=complex)
        return b

    def transitions_from(self, site: int) -> list[tuple[int, np.ndarray]]:
        return [
            (dst, blk) for (src, dst), blk in sorted(self.blocks.items())
            if src == site
        ]

    def block_matrix(self) -> np.ndarray:
        """The (nk, nk) block matrix with block (row j, column i) = B[i -> j]."""
        n, k = self.n_sites, self.internal_dim
        out = np.zeros((n * k, n * k), dtype=complex)
        for (src, dst), blk in self.blocks.items():
            out[dst * k : (dst + 1) * k, src * k : (src + 1) * k] = blk
        return out


def validate_qtm(
    n_sites: int,
    internal_dim: int,
    blocks: Mapping[tuple[int, int], np.ndarray],
    tol: float = DEFAULT_TOL,
) -> QTM:
    """Check block shapes and column normalization; compute the unital flag.

    Raises `DimensionMismatch` for malformed blocks and
    `ColumnNotNormalized` (with the offending source site and residual
    Frobenius norm) when ``sum_j B[i -> j]^* B[i -> j]`` differs from the
    identity by more than ``tol``.
    """
    if n_sites < 1 or internal_dim < 1:
        raise ValidationError("n_sites and internal_dim must be positive")
    k = internal_dim
    eye = np.eye(k, dtype=complex)
    clean: dict[tuple[int, int], np.ndarray] = {}
    for (src, dst), blk in blocks.items():
        if not (0 <= src < n_sites and 0 <= dst < n_sites):
            raise DimensionMismatch(
                f"block ({src}, {dst}) is outside 0..{n_sites - 1}"
            )
        arr = np.asarray(blk, dtype=complex)
        if arr.shape != (k, k):
            raise DimensionMismatch(
                f"block ({src}, {dst}) has shape {arr.shape}, expected {(k, k)}"
            )
        if not np.all(np.isfinite(arr.view(float))):
            raise ValidationError(f"block ({src}, {dst}) has non-finite entries")
        if frobenius(arr) == 0.0:
            continue  # absent and zero blocks are the same thing
        arr = arr.copy()
        arr.setflags(write=False)
        clean[(src, dst)] = arr

    for src in range(n_sites):
        gram = sum(
            (dagger(blk) @ blk for (s, _), blk in clean.items() if s == src),
            start=np.zeros((k, k), dtype=complex),
        )
        residual = frobenius(gram - eye)
        if residual > tol:
            raise ColumnNotNormalized(src, residual)

    unital = True
    for dst in range(n_sites):
        gram = sum(
            (blk @ dagger(blk) for (_, d), blk in clean.items() if d == dst),
            start=np.zeros((k, k), dtype=complex),
        )
        if frobenius(gram - eye) > tol:
            unital = False
            break

    return QTM(n_sites=n_sites, internal_dim=k, blocks=clean, unital=unital)


def apply(qtm: QTM, state: VectorState) -> VectorState:
    """One step of the induced walk: output block j = sum_i B[i->j] S_i B[i->j]^*."""
    if (state.n_sites, state.internal_dim) != (qtm.n_sites, qtm.internal_dim):
        raise DimensionMismatch(
            f"state shape ({state.n_sites}, {state.internal_dim}) does not match "
            f"QTM ({qtm.n_sites}, {qtm.internal_dim})"
        )
    k = qtm.internal_dim
    out = np.zeros((qtm.n_sites, k, k), dtype=complex)
    for (src, dst), blk in qtm.blocks.items():
        out[dst] += blk @ state.blocks[src] @ dagger(blk)
    return VectorState(out, tol=max(state.tol, DEFAULT_TOL))


def embed_classical(
    p: np.ndarray, internal_dim: int, tol: float = 1e-12
) -> QTM:
    """Embed a column-stochastic matrix ``p`` as blocks ``sqrt(p[j, i]) I_k``.

    ``p[j, i]`` is the probability of moving from site ``i`` to site ``j``
    (columns index the source).  The result is unital exactly when ``p``
    is bistochastic.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise NotStochastic(f"expected a square matrix, got shape {p.shape}")
    if np.any(p < -tol):
        raise NotStochastic("matrix has negative entries")
    colsums = p.sum(axis=0)
    if np.any(np.abs(colsums - 1.0) > tol):
        raise NotStochastic(f"columns must sum to 1, got {colsums}")
    n = p.shape[0]
    eye = np.eye(internal_dim, dtype=complex)
    blocks = {
        (src, dst): np.sqrt(p[dst, src]) * eye
        for src in range(n)
        for dst in range(n)
        if p[dst, src] > 0.0
    }
    return validate_qtm(n, internal_dim, blocks)
