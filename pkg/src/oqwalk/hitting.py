"""Minimal nonnegative solutions for hitting probabilities and mean times.

The probability that a walk started at site ``i`` with internal state
``rho`` ever reaches a set ``A`` is a linear functional of ``rho`` and is
therefore represented by a positive operator ``M_i`` with
``h_i(rho) = tr(M_i rho)``: every first-visit path sum
``sum_C tr(C rho C^*)`` equals ``tr((sum_C C^* C) rho)``.  The operators
solve the fixed-point system

    M_i = I                                          for i in A,
    M_i = sum_{j in A} B[i->j]^* B[i->j]
        + sum_{j not in A} B[i->j]^* M_j B[i->j]     otherwise,

and the iteration from ``M = 0`` increases monotonically (in the PSD
order) to the minimal solution, mirroring the induction over
"first visit within n steps".  Mean hitting times use the same engine
with source ``I`` and clamp ``0`` on the target set.

On a `LatticeWindow` the absorbing edges are left free for
probabilities (they never hit, contributing zero: the result is a lower
bound of the untruncated walk's) and clamped to zero for mean times (the
windowed mean is then E[min(T_A, T_edge)], again a monotone lower
bound).  Sites from which absorption short of the target happens with
positive probability have infinite mean time; they are detected from the
hitting operators (smallest eigenvalue below one) and flagged divergent
rather than iterated toward the cap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ._linalg import check_density, dagger, min_eigenvalue
from .errors import Divergent, NotConverged, ValidationError
from .qtm import QTM
from .trajectory import LatticeWindow, WalkView, walk_view

__all__ = [
    "HittingOperators",
    "MeanHittingOperators",
    "AutoWindowResult",
    "hitting_probabilities",
    "mean_hitting_times",
    "evaluate",
    "auto_window_solve",
]

DIVERGENCE_MARGIN = 1e-8


def _monotone_fixed_point(
    view: WalkView,
    free: list[int],
    clamped: Mapping[int, np.ndarray],
    source: Mapping[int, np.ndarray],
    tol: float,
    max_iter: int,
    cap: float,
):
    """Iterate X_i <- source_i + sum_j B[i->j]^* X_j B[i->j] from zero.

    ``clamped`` sites keep fixed values; transitions into sites that are
    neither free nor clamped are dropped (they carry zero probability
    from any density that can actually reach them).  Returns
    (values, divergent, iterations, residual).  Divergence is declared
    when a site's norm passes ``cap`` or when the per-sweep increments
    stall at a nonzero level: increments evolve under one fixed positive
    contraction, so a stalled residual means linear growth, i.e. an
    infinite value.
    """
    k = view.internal_dim
    if not free:
        return {}, set(), 0, 0.0
    pos = {s: i for i, s in enumerate(free)}
    base = np.zeros((len(free), k, k), dtype=complex)
    for idx, s in enumerate(free):
        acc = np.array(source.get(s, np.zeros((k, k))), dtype=complex).copy()
        for dst, blk in view.transitions[s]:
            if dst in clamped:
                acc += dagger(blk) @ clamped[dst] @ blk
        base[idx] = acc

    src_idx, dst_idx, b_stack = [], [], []
    for idx, s in enumerate(free):
        for dst, blk in view.transitions[s]:
            if dst in pos:
                src_idx.append(idx)
                dst_idx.append(pos[dst])
                b_stack.append(blk)
    src_idx = np.array(src_idx, dtype=int)
    dst_idx = np.array(dst_idx, dtype=int)
    b_arr = np.stack(b_stack) if b_stack else np.zeros((0, k, k), dtype=complex)

    x = np.zeros_like(base)
    divergent: set[int] = set()
    stall_window = 64
    delta = np.full(len(free), np.inf)
    delta_snapshot = None
    residual = np.inf
    for it in range(1, max_iter + 1):
        new = base.copy()
        if len(src_idx):
            contrib = np.einsum(
                "mji,mjl,mlk->mik", b_arr.conj(), x[dst_idx], b_arr
            )
            np.add.at(new, src_idx, contrib)
        delta = np.linalg.norm((new - x).reshape(len(free), -1), axis=1)
        x = new
        residual = float(delta.max()) if len(free) else 0.0
        if residual < tol:
            break
        norms = np.linalg.norm(x.reshape(len(free), -1), axis=1)
        over = norms > cap
        if over.any():
            divergent.update(free[i] for i in np.flatnonzero(over))
            break
        if it % stall_window == 0:
            if delta_snapshot is not None:
                ratio = residual / max(float(delta_snapshot.max()), 1e-300)
                if ratio > 0.999:
                    per_sweep = min(ratio ** (1.0 / stall_window), 1.0)
                    projected = residual * stall_window / max(1.0 - ratio, 1e-16)
                    if per_sweep >= 1.0 or projected > cap:
                        divergent.update(
                            free[i] for i in np.flatnonzero(delta >= tol)
                        )
                        break
            delta_snapshot = delta.copy()
    else:
        raise NotConverged(max_iter, residual)

    values = {s: x[pos[s]] for s in free}
    return values, divergent, it, residual


@dataclass(frozen=True)
class HittingOperators:
    """Per-site operators M_i with tr(M_i rho) the probability of reaching A."""

    targets: frozenset[int]
    operators: Mapping[int, np.ndarray]
    iterations: int
    residual: float
    edge_sites: frozenset[int] = frozenset()

    def probability(self, site: int, rho: np.ndarray) -> float:
        """tr(M_site rho), clamped to [0, 1]."""
        m = self.operators.get(site)
        if m is None:
            raise ValidationError(f"site {site} is not part of the solve")
        rho = check_density(rho, dim=m.shape[0])
        return float(np.clip(np.trace(m @ rho).real, 0.0, 1.0))


@dataclass(frozen=True)
class MeanHittingOperators:
    """Per-site operators K_i with tr(K_i rho) the expected hitting time."""

    targets: frozenset[int]
    operators: Mapping[int, np.ndarray]
    divergent: frozenset[int]
    cap: float
    iterations: int
    residual: float
    edge_sites: frozenset[int] = frozenset()

    def expected_time(self, site: int, rho: np.ndarray) -> float:
        if site in self.divergent:
            raise Divergent(site, self.cap)
        m = self.operators.get(site)
        if m is None:
            raise ValidationError(f"site {site} is not part of the solve")
        rho = check_density(rho, dim=m.shape[0])
        return float(max(np.trace(m @ rho).real, 0.0))


def evaluate(operators, site: int, rho: np.ndarray) -> float:
    """Evaluate a solved functional at (site, density)."""
    if isinstance(operators, HittingOperators):
        return operators.probability(site, rho)
    if isinstance(operators, MeanHittingOperators):
        return operators.expected_time(site, rho)
    raise ValidationError(f"cannot evaluate a {type(operators).__name__}")


def hitting_probabilities(
    walk: QTM | LatticeWindow,
    targets: Iterable[int],
    tol: float = 1e-12,
    max_iter: int = 10**6,
) -> HittingOperators:
    """Minimal nonnegative solution operators for reaching ``targets``."""
    targets = frozenset(int(t) for t in targets)
    if not targets:
        raise ValidationError("target set must be nonempty")
    view = walk_view(walk)
    for t in targets:
        view.index(t)
    k = view.internal_dim
    eye = np.eye(k, dtype=complex)
    free = [s for s in view.labels if s not in targets]
    clamped = {t: eye for t in targets}
    values, divergent, iterations, residual = _monotone_fixed_point(
        view, free, clamped, {}, tol, max_iter, cap=np.inf
    )
    assert not divergent  # hitting operators are bounded by I
    values.update(clamped)
    return HittingOperators(
        targets=targets,
        operators=values,
        iterations=iterations,
        residual=residual,
        edge_sites=view.edge_sites,
    )


def mean_hitting_times(
    walk: QTM | LatticeWindow,
    targets: Iterable[int],
    tol: float = 1e-12,
    max_iter: int = 10**6,
    cap: float = 1e12,
) -> MeanHittingOperators:
    """Minimal solution operators for the expected time to reach ``targets``.

    Sites with a positive chance of never reaching the targets (or, on a
    window, of being absorbed at an edge first) have infinite expectation
    and come back flagged in ``divergent``; evaluating them raises
    `Divergent`.
    """
    targets = frozenset(int(t) for t in targets)
    if not targets:
        raise ValidationError("target set must be nonempty")
    view = walk_view(walk)
    for t in targets:
        view.index(t)
    k = view.internal_dim
    eye = np.eye(k, dtype=complex)
    boundary = view.edge_sites - targets

    absorbed = hitting_probabilities(walk, targets | boundary, tol=min(tol, 1e-12), max_iter=max_iter)
    divergent = frozenset(
        s
        for s in view.labels
        if s not in targets
        and s not in boundary
        and min_eigenvalue(absorbed.operators[s]) < 1.0 - DIVERGENCE_MARGIN
    )

    free = [s for s in view.labels if s not in targets and s not in boundary and s not in divergent]
    clamped = {t: np.zeros((k, k), dtype=complex) for t in targets | boundary}
    source = {s: eye for s in free}
    values, engine_divergent, iterations, residual = _monotone_fixed_point(
        view, free, clamped, source, tol, max_iter, cap
    )
    divergent = divergent | frozenset(engine_divergent)
    values.update(clamped)
    for s in divergent:
        values.pop(s, None)
    return MeanHittingOperators(
        targets=targets,
        operators=values,
        divergent=divergent,
        cap=cap,
        iterations=iterations,
        residual=residual,
        edge_sites=view.edge_sites,
    )


@dataclass(frozen=True)
class AutoWindowResult:
    value: float
    lo: int
    hi: int
    history: tuple[float, ...]


def auto_window_solve(
    left: np.ndarray,
    right: np.ndarray,
    targets: Iterable[int],
    start: int,
    density: np.ndarray,
    mean: bool = False,
    overrides=None,
    tol: float = 1e-9,
    solver_tol: float = 1e-12,
    initial_pad: int = 8,
    max_pad: int = 4096,
) -> AutoWindowResult:
    """Grow a lattice window until the requested value stops changing.

    Solves the hitting probability (or mean time) of ``targets`` from
    ``(start, density)`` on nested absorbing windows, doubling the
    padding until two successive answers differ by less than ``tol``.
    The returned value is the last (largest-window) one; the history
    records every window's answer.  Raises `NotConverged` when the pad
    limit is reached first.
    """
    targets = sorted(int(t) for t in targets)
    lo_core = min(targets + [start])
    hi_core = max(targets + [start])
    pad = initial_pad
    history: list[float] = []
    previous = None
    while pad <= max_pad:
        window = LatticeWindow.nearest_neighbor(
            left, right, lo_core - pad, hi_core + pad, overrides=overrides
        )
        if mean:
            ops = mean_hitting_times(window, targets, tol=solver_tol)
            if start in ops.divergent:
                raise Divergent(start, ops.cap)
            value = ops.expected_time(start, density)
        else:
            ops = hitting_probabilities(window, targets, tol=solver_tol)
            value = ops.probability(start, density)
        history.append(value)
        if previous is not None and abs(value - previous) < tol:
            return AutoWindowResult(value, window.lo, window.hi, tuple(history))
        previous = value
        pad *= 2
    raise NotConverged(len(history), abs(history[-1] - (history[-2] if len(history) > 1 else np.inf)))
