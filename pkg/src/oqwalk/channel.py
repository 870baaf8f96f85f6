"""Kraus and matrix (superoperator) representations of the induced channel.

The row-major ``vec`` convention is used throughout: ``vec(A)`` stacks the
rows of ``A``, so that ``vec(A X B^T) = (A (x) B) vec(X)`` and the matrix
representation of a Kraus channel ``rho -> sum_i A_i rho A_i^*`` is

    [Phi] = sum_i A_i (x) conj(A_i).

Many texts stack columns instead, which swaps the Kronecker factors; all
identities in this package assume row stacking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._linalg import DEFAULT_TOL, dagger, frobenius
from .errors import DimensionMismatch, ShapeMismatch, ValidationError
from .qtm import QTM, VectorState

__all__ = [
    "vec",
    "unvec",
    "KrausSet",
    "ChannelMatrix",
    "site_kraus",
    "matrix_representation",
    "adjoint_representation",
    "channel_matrix",
    "compose",
]


def vec(a: np.ndarray) -> np.ndarray:
    """Row-major vectorization: [[a, b], [c, d]] -> (a, b, c, d)."""
    return np.asarray(a, dtype=complex).reshape(-1)


def unvec(v: np.ndarray, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Inverse of `vec`; assumes a square matrix unless ``shape`` is given."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    if shape is None:
        d = int(round(np.sqrt(v.size)))
        if d * d != v.size:
            raise DimensionMismatch(f"vector of length {v.size} is not square")
        shape = (d, d)
    return v.reshape(shape)


@dataclass(frozen=True)
class KrausSet:
    """Operators ``A_1 .. A_m`` with ``sum_i A_i^* A_i = I`` within ``tol``.

    ``n_sites``/``internal_dim`` record the site factorization when the set
    represents a walk on several sites (``dim = n_sites * internal_dim``);
    a bare channel has ``n_sites = 1``.
    """

    operators: np.ndarray  # shape (m, d, d)
    n_sites: int = 1
    internal_dim: int | None = None
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        ops = np.asarray(self.operators, dtype=complex)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise ValidationError(
                f"Kraus set needs shape (m, d, d), got {ops.shape}"
            )
        d = ops.shape[1]
        k = self.internal_dim if self.internal_dim is not None else d // self.n_sites
        if self.n_sites * k != d:
            raise DimensionMismatch(
                f"n_sites * internal_dim = {self.n_sites * k} != dim {d}"
            )
        gram = np.einsum("mji,mjk->ik", ops.conj(), ops)
        residual = frobenius(gram - np.eye(d))
        if residual > self.tol:
            raise ValidationError(
                f"Kraus operators are not trace preserving (residual {residual:.3e})"
            )
        ops = ops.copy()
        ops.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "internal_dim", k)

    @property
    def dim(self) -> int:
        return self.operators.shape[1]


@dataclass(frozen=True)
class ChannelMatrix:
    """Dense matrix representation acting on row-major vectorized operators."""

    matrix: np.ndarray
    n_sites: int
    internal_dim: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.n_sites * self.internal_dim
        if m.shape != (d * d, d * d):
            raise DimensionMismatch(
                f"matrix has shape {m.shape}, expected {(d * d, d * d)}"
            )
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def order(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.n_sites * self.internal_dim

    def power(self, r: int) -> "ChannelMatrix":
        return ChannelMatrix(
            np.linalg.matrix_power(self.matrix, r), self.n_sites, self.internal_dim
        )

    def __matmul__(self, other: "ChannelMatrix") -> "ChannelMatrix":
        if (self.n_sites, self.internal_dim) != (other.n_sites, other.internal_dim):
            raise ShapeMismatch("channel matrices act on different spaces")
        return ChannelMatrix(
            self.matrix @ other.matrix, self.n_sites, self.internal_dim
        )

    def apply_matrix(self, x: np.ndarray) -> np.ndarray:
        """Apply the channel to a (dim, dim) operator."""
        return unvec(self.matrix @ vec(x), (self.dim, self.dim))

    def apply_blocks(self, blocks: np.ndarray) -> np.ndarray:
        """Apply to a site-blocked operator, returning the diagonal site blocks.

        ``blocks`` has shape (n_sites, k, k); the input is embedded as the
        block-diagonal operator sum_i E_ii (x) blocks_i.  Off-diagonal site
        sectors of the image are discarded (they vanish for channels built
        from walks, which preserve the block-diagonal form).
        """
        n, k = self.n_sites, self.internal_dim
        full = np.zeros((self.dim, self.dim), dtype=complex)
        for i in range(n):
            full[i * k : (i + 1) * k, i * k : (i + 1) * k] = blocks[i]
        image = self.apply_matrix(full)
        return np.stack(
            [image[i * k : (i + 1) * k, i * k : (i + 1) * k] for i in range(n)]
        )

    def apply_state(self, state: VectorState) -> np.ndarray:
        """Image blocks of a vector state (not re-wrapped, may be mid-iteration)."""
        return self.apply_blocks(state.blocks)


def site_kraus(qtm: QTM) -> KrausSet:
    """One (nk x nk) Kraus operator per nonzero block.

    The block ``B[i -> j]`` is placed at block-row ``j``, block-column
    ``i`` of the operator (site-major ordering), so the induced channel
    moves mass from site ``i`` to site ``j``.
    """
    n, k = qtm.n_sites, qtm.internal_dim
    ops = []
    for (src, dst), blk in sorted(qtm.blocks.items()):
        e = np.zeros((n, n), dtype=complex)
        e[dst, src] = 1.0
        ops.append(np.kron(e, blk))
    return KrausSet(np.stack(ops), n_sites=n, internal_dim=k)


def matrix_representation(kraus: KrausSet) -> ChannelMatrix:
    """``[Phi] = sum_i A_i (x) conj(A_i)`` for the row-major vec convention."""
    d = kraus.dim
    m = np.zeros((d * d, d * d), dtype=complex)
    for a in kraus.operators:
        m += np.kron(a, a.conj())
    return ChannelMatrix(m, kraus.n_sites, kraus.internal_dim)


def adjoint_representation(kraus: KrausSet) -> ChannelMatrix:
    """Representation of the Hilbert-Schmidt adjoint ``rho -> sum_i A_i^* rho A_i``."""
    d = kraus.dim
    m = np.zeros((d * d, d * d), dtype=complex)
    for a in kraus.operators:
        ad = dagger(a)
        m += np.kron(ad, ad.conj())
    return ChannelMatrix(m, kraus.n_sites, kraus.internal_dim)


def channel_matrix(qtm: QTM) -> ChannelMatrix:
    """Matrix representation of the channel induced by a QTM."""
    return matrix_representation(site_kraus(qtm))


def compose(qtms: Sequence[QTM]) -> ChannelMatrix:
    """Product of matrix representations; the first list element acts first.

    ``compose([B1, B2])`` represents the two-step evolution that applies
    ``B1`` and then ``B2``, i.e. the matrix ``[Phi_B2] [Phi_B1]``.
    """
    if not qtms:
        raise ShapeMismatch("compose needs at least one QTM")
    shapes = {(q.n_sites, q.internal_dim) for q in qtms}
    if len(shapes) != 1:
        raise ShapeMismatch(f"QTMs act on different spaces: {sorted(shapes)}")
    out = channel_matrix(qtms[0])
    for q in qtms[1:]:
        out = channel_matrix(q) @ out
    return out
