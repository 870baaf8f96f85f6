"""Singular spectra, ergodicity decisions and contraction diagnostics.

A finite family of unital QTMs is ergodic (every product whose factors
visit the family infinitely often has its columns equalize) exactly when
the second singular value of each member's matrix representation is
below one.  This module computes those spectra, the column distance

    d2(column j) = ( sum_i || G_ij - I/n ||_F^2 )^(1/2),

where ``G_ij`` is the image block at site ``i`` of the per-site identity
probe at ``j``, Dobrushin-coefficient lower bounds, and the column
Gram/spectrum identity used to prove the product bound.

For a single QTM the probe blocks are the column Grams
``B[j -> i] B[j -> i]^*``.  Products of QTMs are not QTMs blockwise, so
the probe definition is what makes column diagnostics well defined for
composed channels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._linalg import dagger, frobenius, trace_norm
from .channel import ChannelMatrix, KrausSet, channel_matrix, compose, vec
from .errors import (
    NotConverged,
    NotUnital,
    NumericalFailure,
    ShapeMismatch,
    ValidationError,
)
from .qtm import QTM, VectorState

__all__ = [
    "SingularSpectrum",
    "ChainSpec",
    "ErgodicityDecision",
    "PowerIterationResult",
    "WeakErgodicityResult",
    "singular_values",
    "is_ergodic",
    "column_distance",
    "column_equalization_gap",
    "invariant_state",
    "dobrushin_coefficient",
    "weak_ergodicity_check",
    "column_gram_spectrum_residual",
]

ERGODIC_BAND = 1e-9


@dataclass(frozen=True)
class SingularSpectrum:
    """Full singular spectrum of a channel matrix, sorted non-increasing."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(np.diff(v) > 1e-12):
            raise ValidationError("singular values must be non-increasing")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def sigma1(self) -> float:
        return float(self.values[0])

    @property
    def sigma2(self) -> float:
        return float(self.values[1]) if self.values.size > 1 else 0.0

    def multiplicities(self, decimals: int = 9) -> dict[float, int]:
        vals, counts = np.unique(np.round(self.values, decimals), return_counts=True)
        return {float(v): int(c) for v, c in zip(vals[::-1], counts[::-1])}


@dataclass(frozen=True)
class ChainSpec:
    """A finite QTM family plus a schedule of indices (a chain prefix)."""

    family: tuple[QTM, ...]
    schedule: tuple[int, ...]

    def __post_init__(self):
        family = tuple(self.family)
        schedule = tuple(int(i) for i in self.schedule)
        if not family:
            raise ShapeMismatch("chain needs at least one QTM")
        shapes = {(q.n_sites, q.internal_dim) for q in family}
        if len(shapes) != 1:
            raise ShapeMismatch(f"family members act on different spaces: {sorted(shapes)}")
        if any(i < 0 or i >= len(family) for i in schedule):
            raise ValidationError("schedule indexes outside the family")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "schedule", schedule)

    @staticmethod
    def homogeneous(qtm: QTM, length: int) -> "ChainSpec":
        return ChainSpec((qtm,), (0,) * length)

    def prefix_channel(self, r: int) -> ChannelMatrix:
        """Matrix of the first ``r`` scheduled steps (first index acts first)."""
        if r < 1 or r > len(self.schedule):
            raise ValidationError(f"prefix length {r} outside 1..{len(self.schedule)}")
        return compose([self.family[i] for i in self.schedule[:r]])


@dataclass(frozen=True)
class ErgodicityDecision:
    ergodic: bool
    sigma2_values: tuple[float, ...]
    witness: int | None = None
    borderline: bool = False

    def __str__(self):
        if self.ergodic:
            return f"ergodic (max sigma2 = {max(self.sigma2_values):.6g})"
        tag = " [borderline]" if self.borderline else ""
        return (
            f"not ergodic (member {self.witness}, "
            f"sigma2 = {self.sigma2_values[self.witness]:.6g}){tag}"
        )


@dataclass(frozen=True)
class PowerIterationResult:
    state: object  # VectorState for QTM input, ndarray density for KrausSet
    iterations: int
    residual: float


@dataclass(frozen=True)
class WeakErgodicityResult:
    witness: int | None
    n_max: int
    bound: float  # scale-free contraction bound at the stopping power

    @property
    def undecided(self) -> bool:
        return self.witness is None


def singular_values(m: ChannelMatrix | QTM | np.ndarray) -> SingularSpectrum:
    """Singular spectrum (square roots of the eigenvalues of M^* M)."""
    if isinstance(m, QTM):
        m = channel_matrix(m)
    mat = m.matrix if isinstance(m, ChannelMatrix) else np.asarray(m, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {mat.shape}")
    try:
        vals = np.linalg.svd(mat, compute_uv=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    return SingularSpectrum(vals)


def is_ergodic(family: Sequence[QTM], band: float = ERGODIC_BAND) -> ErgodicityDecision:
    """Decide ergodicity of a unital family by the sigma2 < 1 criterion.

    Raises `NotUnital` if any member fails the hypothesis of the
    criterion.  Members with sigma2 within ``band`` of 1 are reported as
    not ergodic with the borderline flag set.
    """
    sigma2 = []
    for j, q in enumerate(family):
        if not q.unital:
            raise NotUnital(j, f"family member {j} is not unital")
        sigma2.append(singular_values(q).sigma2)
    threshold = 1.0 - band
    for j, s in enumerate(sigma2):
        if s >= threshold:
            return ErgodicityDecision(
                ergodic=False,
                sigma2_values=tuple(sigma2),
                witness=j,
                borderline=abs(s - 1.0) <= band,
            )
    return ErgodicityDecision(ergodic=True, sigma2_values=tuple(sigma2))


def _column_probe_blocks(m: ChannelMatrix, j: int) -> np.ndarray:
    """Image blocks of the per-site identity probe E_jj (x) I_k."""
    n, k = m.n_sites, m.internal_dim
    probe = np.zeros((n, k, k), dtype=complex)
    probe[j] = np.eye(k)
    return m.apply_blocks(probe)


def column_distance(walk: QTM | ChannelMatrix, j: int) -> float:
    """Distance of column ``j``'s Gram blocks from the flat column I/n."""
    if isinstance(walk, QTM):
        n, k = walk.n_sites, walk.internal_dim
        grams = np.zeros((n, k, k), dtype=complex)
        for (src, dst), blk in walk.blocks.items():
            if src == j:
                grams[dst] = blk @ dagger(blk)
    else:
        n, k = walk.n_sites, walk.internal_dim
        grams = _column_probe_blocks(walk, j)
    if not (0 <= j < n):
        raise ValidationError(f"column {j} outside 0..{n - 1}")
    flat = np.eye(k, dtype=complex) / n
    return float(np.sqrt(sum(frobenius(g - flat) ** 2 for g in grams)))


def column_equalization_gap(chain: ChainSpec, r: int) -> float:
    """Largest Frobenius gap between two probe blocks in the same row.

    The ``r``-step product of the scheduled QTMs is probed column by
    column with per-site identities; the gap is
    ``max_{i, j, j'} || G_ij - G_ij' ||_F`` and tends to zero exactly for
    ergodic chains.
    """
    m = chain.prefix_channel(r)
    n = m.n_sites
    columns = [_column_probe_blocks(m, j) for j in range(n)]
    gap = 0.0
    for i in range(n):
        for a in range(n):
            for b in range(a + 1, n):
                gap = max(gap, frobenius(columns[a][i] - columns[b][i]))
    return gap


def invariant_state(
    walk: QTM | KrausSet,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    initial=None,
) -> PowerIterationResult:
    """Power-iterate the channel until successive images are ``tol``-close.

    For a `QTM` the iteration runs on vector states starting from the
    maximally mixed one (blocks ``I/(kn)``); for a `KrausSet` it runs on
    densities starting from ``I/d``.  The fixed point reached doubles as
    a convergence diagnostic: failure to converge signals periodicity,
    reducibility or slow mixing and raises `NotConverged`.
    """
    if isinstance(walk, QTM):
        n, k = walk.n_sites, walk.internal_dim
        if initial is None:
            current = VectorState.maximally_mixed(n, k).blocks.copy()
        elif isinstance(initial, VectorState):
            current = initial.blocks.copy()
        else:
            current = np.asarray(initial, dtype=complex).copy()
        transitions = sorted(walk.blocks.items())
        residual = np.inf
        for it in range(1, max_iter + 1):
            new = np.zeros_like(current)
            for (src, dst), blk in transitions:
                new[dst] += blk @ current[src] @ dagger(blk)
            residual = float(np.linalg.norm(new - current))
            current = new
            if residual < tol:
                return PowerIterationResult(VectorState(current), it, residual)
        raise NotConverged(max_iter, residual)

    if isinstance(walk, KrausSet):
        d = walk.dim
        current = (
            np.eye(d, dtype=complex) / d
            if initial is None
            else np.asarray(initial, dtype=complex).copy()
        )
        ops = walk.operators
        residual = np.inf
        for it in range(1, max_iter + 1):
            new = np.einsum("mij,jl,mkl->ik", ops, current, ops.conj())
            residual = float(np.linalg.norm(new - current))
            current = new
            if residual < tol:
                return PowerIterationResult(current, it, residual)
        raise NotConverged(max_iter, residual)

    raise ValidationError(f"cannot power-iterate a {type(walk).__name__}")


def _random_vector_state_blocks(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    weights = rng.dirichlet(np.ones(n))
    blocks = np.zeros((n, k, k), dtype=complex)
    for i in range(n):
        g = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
        h = g @ dagger(g)
        blocks[i] = weights[i] * h / h.trace().real
    return blocks


def _pure_site_extremes(n: int, k: int) -> list[np.ndarray]:
    out = []
    for i in range(n):
        for u in range(k):
            blocks = np.zeros((n, k, k), dtype=complex)
            blocks[i, u, u] = 1.0
            out.append(blocks)
    return out


def _to_state_vec(m: ChannelMatrix, blocks: np.ndarray) -> np.ndarray:
    n, k = m.n_sites, m.internal_dim
    full = np.zeros((m.dim, m.dim), dtype=complex)
    for i in range(n):
        full[i * k : (i + 1) * k, i * k : (i + 1) * k] = blocks[i]
    return vec(full)


def _separation_bound(m: ChannelMatrix, samples: int, seed: int) -> float:
    """max over probed state pairs of tr|T rho - T eta| / 2 (scale free, in [0, 1]).

    The supremum of a convex function over the convex body of vector
    states is attained at extreme points, so all site-pure basis pairs
    are enumerated and ``samples`` random pairs are added; the result is
    a certified lower bound of the true supremum.
    """
    n, k = m.n_sites, m.internal_dim
    rng = np.random.default_rng(seed)
    probes = [_to_state_vec(m, b) for b in _pure_site_extremes(n, k)]
    best = 0.0
    images = [m.matrix @ p for p in probes]
    for a in range(len(images)):
        for b in range(a + 1, len(images)):
            diff = (images[a] - images[b]).reshape(m.dim, m.dim)
            best = max(best, trace_norm(diff) / 2.0)
    for _ in range(samples):
        x = _to_state_vec(m, _random_vector_state_blocks(rng, n, k))
        y = _to_state_vec(m, _random_vector_state_blocks(rng, n, k))
        diff = (m.matrix @ (x - y)).reshape(m.dim, m.dim)
        best = max(best, trace_norm(diff) / 2.0)
    return best


def dobrushin_coefficient(m: ChannelMatrix, samples: int = 200, seed: int = 0) -> float:
    """Lower bound for sup over state pairs of ||T rho - T eta||_1 / 2.

    The trace norm here is the normalized one, ``||X||_1 = tr sqrt(X^*X)
    / (k n)``, so the bound lives in ``[0, 1/(kn)]``.  It is exact on the
    enumerated pure-site extreme pairs and can only underestimate the
    supremum elsewhere.
    """
    return _separation_bound(m, samples, seed) / m.dim


def weak_ergodicity_check(
    qtm: QTM,
    n_max: int,
    samples: int = 200,
    seed: int = 0,
    threshold: float = 1.0 - 1e-6,
) -> WeakErgodicityResult:
    """Search for a power whose contraction bound certifies weak ergodicity.

    Returns the first ``n0 <= n_max`` whose scale-free separation bound
    (the Dobrushin pair form measured with the unnormalized trace norm,
    so that 1 means no contraction at all) drops to ``threshold`` or
    below, or an undecided result carrying the last bound.  The bound is
    a sampled lower bound, so a returned witness is a heuristic
    certificate: pairs outside the sample could contract less.
    """
    base = channel_matrix(qtm)
    power = base
    bound = 1.0
    for n0 in range(1, n_max + 1):
        bound = _separation_bound(power, samples, seed + n0)
        if bound <= threshold:
            return WeakErgodicityResult(witness=n0, n_max=n_max, bound=bound)
        power = base @ power
    return WeakErgodicityResult(witness=None, n_max=n_max, bound=bound)


def column_gram_spectrum_residual(qtm: QTM, j: int) -> float:
    """Residual of the identity linking column Gram deviation to the spectrum.

    For a unital QTM, ``sum_i ||B[j -> i]^* B[j -> i] - I/n||_2^2`` equals
    ``sum_{i >= 2} |d_ij|^2 sigma_i^2`` where the ``d_ij`` expand the j-th
    per-site identity column in an orthonormal eigenbasis of
    ``[Phi]^* [Phi]`` whose leading vector is ``vec(I)/sqrt(kn)``.  Both
    sides are evaluated independently and the absolute difference is
    returned.  The eigenbasis from the dense solver need not contain the
    designated leading vector when the top eigenvalue is degenerate, so
    its component is removed by projection before expanding.
    """
    if not qtm.unital:
        raise NotUnital(j, "the identity requires a unital QTM")
    n, k = qtm.n_sites, qtm.internal_dim
    if not (0 <= j < n):
        raise ValidationError(f"column {j} outside 0..{n - 1}")
    flat = np.eye(k, dtype=complex) / n
    lhs = 0.0
    for dst in range(n):
        blk = qtm.block(j, dst)
        lhs += frobenius(dagger(blk) @ blk - flat) ** 2

    m = channel_matrix(qtm)
    gram = dagger(m.matrix) @ m.matrix
    try:
        eigvals, eigvecs = np.linalg.eigh(gram)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc

    eta1 = vec(np.eye(m.dim, dtype=complex)) / np.sqrt(m.dim)
    # unitality makes eta1 an exact top eigenvector; verify numerically
    if frobenius(gram @ eta1 - eta1) > 1e-8:
        raise NumericalFailure("leading eigenvector drifted from vec(I)/sqrt(kn)")
    probe = np.zeros((n, k, k), dtype=complex)
    probe[j] = np.eye(k)
    v = _to_state_vec(m, probe)
    v_perp = v - (eta1.conj() @ v) * eta1
    coeffs = eigvecs.conj().T @ v_perp
    rhs = float(np.sum(np.abs(coeffs) ** 2 * eigvals).real)
    return abs(lhs - rhs)
