"""Closed forms for nearest-neighbor walks with commuting normal matrices.

When the left and right transition matrices commute and are normal they
share a unitary eigenbasis ``U``.  Every path probability then depends
only on the number of left and right moves and on the diagonal weights
``d_u = (U^* rho U)_{uu}`` of the initial density: the walk is a mixture
over modes ``u`` of classical walks with step weights
``(lambda_u, mu_u) = (|left eigenvalue|^2, |right eigenvalue|^2)``.
Site occupation, first visits, the gambler's ruin and birth-and-death
absorption probabilities all reduce to per-mode scalar formulas combined
with the weights; off-diagonal eigenmatrices never contribute to a trace
and are never materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._linalg import check_density, dagger, frobenius
from .errors import (
    NotCommuting,
    NotNormal,
    NotNormalized,
    NumericalFailure,
    SeriesUndetermined,
    StartNotOrigin,
    ValidationError,
)

__all__ = [
    "CommutingPair",
    "EigenWeights",
    "BirthDeathSpec",
    "diagonalize_pair",
    "eigen_weights",
    "site_probability",
    "first_visit_probability",
    "gambler_ruin",
    "birth_death",
]

COMMUTE_TOL = 1e-10
DIVERGENCE_CAP = 1e12


def _joint_diagonalize(mats: Sequence[np.ndarray], cluster_tol: float = 1e-8) -> np.ndarray:
    """Common unitary eigenbasis of a commuting family of normal matrices.

    Splits the space by the eigenvalues of each matrix's hermitian and
    anti-hermitian parts in turn, refining blocks recursively; ties
    (clustered eigenvalues) simply defer to the next matrix.
    """
    dim = mats[0].shape[0]
    if all(frobenius(m - np.diag(np.diag(m))) < 1e-13 for m in mats):
        return np.eye(dim, dtype=complex)  # already diagonal: keep the basis
    hermitians = []
    for m in mats:
        hermitians.append(0.5 * (m + dagger(m)))
        hermitians.append(0.5j * (dagger(m) - m))
    u = np.eye(dim, dtype=complex)
    blocks = [np.arange(dim)]
    for h in hermitians:
        new_blocks = []
        for idx in blocks:
            if len(idx) == 1:
                new_blocks.append(idx)
                continue
            sub = dagger(u[:, idx]) @ h @ u[:, idx]
            vals, vecs = np.linalg.eigh(0.5 * (sub + dagger(sub)))
            u[:, idx] = u[:, idx] @ vecs
            start = 0
            for t in range(1, len(idx) + 1):
                if t == len(idx) or vals[t] - vals[start] > cluster_tol:
                    new_blocks.append(idx[start:t])
                    start = t
        blocks = new_blocks
    return u


@dataclass(frozen=True)
class CommutingPair:
    """A simultaneously diagonalized (left, right) pair of normal matrices.

    ``left_diag``/``right_diag`` hold the eigenvalues in the shared basis
    ``unitary``; the squared moduli are the per-mode step weights and sum
    to one mode by mode.
    """

    left: np.ndarray
    right: np.ndarray
    unitary: np.ndarray
    left_diag: np.ndarray
    right_diag: np.ndarray

    @property
    def dim(self) -> int:
        return self.left.shape[0]

    @property
    def left_weights(self) -> np.ndarray:
        """Per-mode probability of a left move: |left eigenvalue|^2."""
        return np.abs(self.left_diag) ** 2

    @property
    def right_weights(self) -> np.ndarray:
        return np.abs(self.right_diag) ** 2


def diagonalize_pair(
    left: np.ndarray, right: np.ndarray, tol: float = COMMUTE_TOL
) -> CommutingPair:
    """Validate and jointly diagonalize a commuting pair.

    Raises `NotNormal`, `NotCommuting` or `NotNormalized` when the inputs
    fail the hypotheses; near-misses are rejected rather than projected
    because every downstream closed form silently breaks otherwise.
    """
    left = np.asarray(left, dtype=complex)
    right = np.asarray(right, dtype=complex)
    if left.shape != right.shape or left.ndim != 2 or left.shape[0] != left.shape[1]:
        raise ValidationError(
            f"expected two square matrices of equal size, got {left.shape} and {right.shape}"
        )
    for name, m in (("left", left), ("right", right)):
        if frobenius(m @ dagger(m) - dagger(m) @ m) > tol:
            raise NotNormal(f"{name} matrix is not normal")
    comm = frobenius(left @ right - right @ left)
    if comm > tol:
        raise NotCommuting(comm)
    k = left.shape[0]
    gram = dagger(left) @ left + dagger(right) @ right
    if frobenius(gram - np.eye(k)) > tol:
        raise NotNormalized(
            f"left*left + right*right differs from identity by {frobenius(gram - np.eye(k)):.3e}"
        )
    u = _joint_diagonalize([left, right])
    dl = dagger(u) @ left @ u
    dr = dagger(u) @ right @ u
    off = max(
        frobenius(dl - np.diag(np.diag(dl))), frobenius(dr - np.diag(np.diag(dr)))
    )
    if off > 1e-9:  # pragma: no cover - the recursion handles ties
        raise NumericalFailure(f"joint diagonalization left residual {off:.3e}")
    return CommutingPair(
        left=left,
        right=right,
        unitary=u,
        left_diag=np.diag(dl).copy(),
        right_diag=np.diag(dr).copy(),
    )


@dataclass(frozen=True)
class EigenWeights:
    """Diagonal weights of a density in the shared eigenbasis.

    ``weights[u] = (U^* rho U)_{uu}`` are nonnegative and sum to one;
    ``left_weights[u] + right_weights[u] = 1`` mode by mode.
    """

    weights: np.ndarray
    left_weights: np.ndarray
    right_weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < -1e-10):
            raise ValidationError("mode weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-10:
            raise ValidationError(f"mode weights sum to {w.sum()}, expected 1")
        norm = self.left_weights + self.right_weights
        if np.any(np.abs(norm - 1.0) > 1e-10):
            raise ValidationError("per-mode step weights do not sum to 1")


def eigen_weights(pair: CommutingPair, rho: np.ndarray) -> EigenWeights:
    rho = check_density(rho, dim=pair.dim)
    rotated = dagger(pair.unitary) @ rho @ pair.unitary
    return EigenWeights(
        weights=np.clip(np.diag(rotated).real, 0.0, None),
        left_weights=pair.left_weights,
        right_weights=pair.right_weights,
    )


def _log_binomial(n: int, r: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)


def _mode_path_probability(lam: float, mu: float, lefts: int, rights: int, n: int) -> float:
    """binom(n, rights) * lam^lefts * mu^rights, stable for large n."""
    if (lam == 0.0 and lefts > 0) or (mu == 0.0 and rights > 0):
        return 0.0
    log_term = _log_binomial(n, rights)
    if lam > 0.0:
        log_term += lefts * math.log(lam)
    if mu > 0.0:
        log_term += rights * math.log(mu)
    return math.exp(log_term)


def site_probability(
    pair: CommutingPair, rho: np.ndarray, start: int, site: int, steps: int
) -> float:
    """Probability of occupying ``site`` after ``steps`` steps from ``start``.

    Zero whenever ``(steps + site - start) / 2`` is not an integer in
    ``[0, steps]`` (parity or range violation); otherwise
    ``binom(steps, r) * sum_u d_u lambda_u^l mu_u^r`` with ``r`` right
    moves and ``l = steps - r`` left moves.
    """
    if steps < 0:
        raise ValidationError("steps must be nonnegative")
    w = eigen_weights(pair, rho)
    twice_r = steps + site - start
    if twice_r % 2 != 0:
        return 0.0
    rights = twice_r // 2
    if rights < 0 or rights > steps:
        return 0.0
    lefts = steps - rights
    total = sum(
        float(d) * _mode_path_probability(float(l), float(m), lefts, rights, steps)
        for d, l, m in zip(w.weights, w.left_weights, w.right_weights)
    )
    return float(total)


def first_visit_probability(
    pair: CommutingPair, rho: np.ndarray, site: int, steps: int, start: int = 0
) -> float:
    """Probability that the first visit to ``site`` happens at step ``steps``.

    Uses the hitting-time identity ``b_n = (|site| / n) p_site^(n)``,
    valid mode by mode for walks started at the origin; ``start != 0``
    raises `StartNotOrigin`.
    """
    if start != 0:
        raise StartNotOrigin("the first-visit closed form needs start = 0")
    if site == 0:
        raise ValidationError("the target site must be nonzero")
    if steps < abs(site):
        return 0.0
    return abs(site) / steps * site_probability(pair, rho, 0, site, steps)


def gambler_ruin(pair: CommutingPair, rho: np.ndarray, start: int) -> float:
    """Probability of ever reaching site 0 from ``start`` >= 1.

    Mode u contributes 1 when its leftward weight dominates
    (lambda_u >= mu_u) and (lambda_u / mu_u)^start otherwise; the result
    is the weight-averaged sum.
    """
    if start < 1:
        raise ValidationError("start must be at least 1")
    w = eigen_weights(pair, rho)
    total = 0.0
    for d, lam, mu in zip(w.weights, w.left_weights, w.right_weights):
        if lam >= mu:
            total += float(d)
        else:
            total += float(d) * (lam / mu) ** start
    return float(min(total, 1.0))


@dataclass(frozen=True)
class BirthDeathSpec:
    """Site-dependent commuting left/right pairs sharing one eigenbasis.

    ``pairs[i]`` holds the matrices acting at site ``i + 1``; sites past
    the listed prefix reuse the last pair, so the tail of the ratio
    series is geometric and can be summed in closed form.
    """

    pairs: tuple[tuple[np.ndarray, np.ndarray], ...]
    unitary: np.ndarray
    left_weights: np.ndarray  # shape (m, k)
    right_weights: np.ndarray

    @property
    def dim(self) -> int:
        return self.unitary.shape[0]

    @staticmethod
    def from_pairs(
        pairs: Sequence[tuple[np.ndarray, np.ndarray]], tol: float = COMMUTE_TOL
    ) -> "BirthDeathSpec":
        if not pairs:
            raise ValidationError("need at least one (left, right) pair")
        mats = []
        clean = []
        for left, right in pairs:
            left = np.asarray(left, dtype=complex)
            right = np.asarray(right, dtype=complex)
            clean.append((left, right))
            mats.extend([left, right])
        k = mats[0].shape[0]
        for m in mats:
            if m.shape != (k, k):
                raise ValidationError("all matrices must share one dimension")
            if frobenius(m @ dagger(m) - dagger(m) @ m) > tol:
                raise NotNormal("every matrix must be normal")
        for a in range(len(mats)):
            for b in range(a + 1, len(mats)):
                comm = frobenius(mats[a] @ mats[b] - mats[b] @ mats[a])
                if comm > tol:
                    raise NotCommuting(comm)
        for i, (left, right) in enumerate(clean):
            gram = dagger(left) @ left + dagger(right) @ right
            if frobenius(gram - np.eye(k)) > tol:
                raise NotNormalized(f"pair {i} fails left*left + right*right = I")
        u = _joint_diagonalize(mats)
        lw, rw = [], []
        for left, right in clean:
            dl = dagger(u) @ left @ u
            dr = dagger(u) @ right @ u
            off = max(
                frobenius(dl - np.diag(np.diag(dl))),
                frobenius(dr - np.diag(np.diag(dr))),
            )
            if off > 1e-9:  # pragma: no cover
                raise NumericalFailure(f"joint diagonalization residual {off:.3e}")
            lw.append(np.abs(np.diag(dl)) ** 2)
            rw.append(np.abs(np.diag(dr)) ** 2)
        return BirthDeathSpec(
            pairs=tuple(clean),
            unitary=u,
            left_weights=np.array(lw),
            right_weights=np.array(rw),
        )


def _mode_birth_death(lams: np.ndarray, mus: np.ndarray, start: int) -> float:
    """Absorption probability at 0 for one mode of a birth-death chain.

    ``lams[i] / mus[i]`` is the ratio at site ``i + 1``; the last listed
    site's ratio repeats forever.  gamma_0 = 1 and
    gamma_i = prod_{j <= i} lams[j] / mus[j]; absorption is certain when
    the gamma series diverges, else tail(start) / total.
    """
    m = len(lams)
    gammas = [1.0]
    for i in range(max(start, m)):
        lam = lams[min(i, m - 1)]
        mu = mus[min(i, m - 1)]
        if mu == 0.0:
            return 1.0  # rightward motion blocked: the series diverges
        gammas.append(gammas[-1] * lam / mu)
        if gammas[-1] > DIVERGENCE_CAP:
            return 1.0
    tail_ratio = lams[m - 1] / mus[m - 1] if mus[m - 1] > 0.0 else np.inf
    if math.isnan(tail_ratio):  # pragma: no cover - 0/0 inputs
        raise SeriesUndetermined("tail ratio is indeterminate")
    prefix_total = sum(gammas[:-1])
    last = gammas[-1]
    if tail_ratio >= 1.0 - 1e-15:
        return 1.0
    total = prefix_total + last / (1.0 - tail_ratio)
    if total > DIVERGENCE_CAP:
        return 1.0
    # gammas holds gamma_0 .. gamma_N with N = max(start, m) >= start
    tail_from_start = sum(gammas[start:-1]) + last / (1.0 - tail_ratio)
    return tail_from_start / total


def birth_death(spec: BirthDeathSpec, rho: np.ndarray, start: int) -> float:
    """Probability of ever reaching site 0 for a site-dependent chain."""
    if start < 1:
        raise ValidationError("start must be at least 1")
    rho = check_density(rho, dim=spec.dim)
    rotated = dagger(spec.unitary) @ rho @ spec.unitary
    weights = np.clip(np.diag(rotated).real, 0.0, None)
    total = 0.0
    for u in range(spec.dim):
        total += float(weights[u]) * _mode_birth_death(
            spec.left_weights[:, u], spec.right_weights[:, u], start
        )
    return float(min(total, 1.0))
