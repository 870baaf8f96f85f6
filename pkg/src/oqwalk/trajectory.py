"""Quantum-trajectory sampling and exact monitored evolution.

A trajectory is the Markov chain (site, conditional density): from
``(i, rho)`` the walk jumps to ``(j, B[i->j] rho B[i->j]^* / p)`` with
probability ``p = tr(B[i->j] rho B[i->j]^*)``.  Walks on the integer
lattice are truncated to a `LatticeWindow`; with the default absorbing
boundary the window edges hold whatever mass reaches them, so every
reported first-visit probability is a certified lower bound with the
edge mass as explicit truncation error.

Monitored (projected) evolution iterates Q o Phi, where Q removes the
blocks on the watched sites, yielding the exact survival sequence S_n
and first-visit masses b_r = S_{r-1} - S_r.  Monitoring starts after
step 0, so the masses describe first visits at steps r >= 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ._linalg import DEFAULT_TOL, check_density, dagger, frobenius
from .errors import (
    ColumnNotNormalized,
    DeadEnd,
    DimensionMismatch,
    ValidationError,
    WindowOverflow,
)
from .qtm import QTM, validate_qtm

__all__ = [
    "TrajectoryState",
    "LatticeWindow",
    "WalkView",
    "FirstVisitHistogram",
    "MonitoredResult",
    "walk_view",
    "step",
    "run_trajectories",
    "monitored_evolution",
]

BRANCH_EPS = 1e-14
EDGE_EPS = 1e-12


@dataclass(frozen=True)
class TrajectoryState:
    """A site label plus the normalized conditional density held there."""

    site: int
    density: np.ndarray

    def __post_init__(self):
        rho = check_density(self.density, tol=1e-8)
        rho.setflags(write=False)
        object.__setattr__(self, "density", rho)
        object.__setattr__(self, "site", int(self.site))


@dataclass(frozen=True)
class LatticeWindow:
    """A finite window [lo, hi] of an integer-lattice walk.

    ``blocks`` maps (from_site, to_site) lattice labels to k x k arrays.
    Interior columns must be normalized; the two edge sites are absorbing
    (identity self-loops), making the window a valid finite walk whose
    statistics lower-bound the untruncated ones.  With
    ``boundary="hard_error"`` any mass reaching an edge raises
    `WindowOverflow` instead of being absorbed.
    """

    lo: int
    hi: int
    internal_dim: int
    blocks: Mapping[tuple[int, int], np.ndarray]
    boundary: str = "absorbing"

    def __post_init__(self):
        if self.lo >= self.hi:
            raise ValidationError(f"window needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.boundary not in ("absorbing", "hard_error"):
            raise ValidationError(f"unknown boundary policy {self.boundary!r}")
        k = self.internal_dim
        eye = np.eye(k, dtype=complex)
        clean: dict[tuple[int, int], np.ndarray] = {}
        for (src, dst), blk in self.blocks.items():
            if not (self.lo <= src <= self.hi and self.lo <= dst <= self.hi):
                raise ValidationError(f"block ({src}, {dst}) outside the window")
            arr = np.asarray(blk, dtype=complex)
            if arr.shape != (k, k):
                raise DimensionMismatch(
                    f"block ({src}, {dst}) has shape {arr.shape}, expected {(k, k)}"
                )
            if frobenius(arr) == 0.0:
                continue
            arr = arr.copy()
            arr.setflags(write=False)
            clean[(src, dst)] = arr
        # edge sites absorb: identity self-loops, nothing else leaves them
        for edge in (self.lo, self.hi):
            for (src, dst) in list(clean):
                if src == edge:
                    del clean[(src, dst)]
            clean[(edge, edge)] = eye
        for src in range(self.lo, self.hi + 1):
            gram = sum(
                (dagger(b) @ b for (s, _), b in clean.items() if s == src),
                start=np.zeros((k, k), dtype=complex),
            )
            residual = frobenius(gram - eye)
            if residual > DEFAULT_TOL:
                raise ColumnNotNormalized(src, residual)
        object.__setattr__(self, "blocks", clean)

    @staticmethod
    def nearest_neighbor(
        left: np.ndarray,
        right: np.ndarray,
        lo: int,
        hi: int,
        boundary: str = "absorbing",
        overrides: Mapping[int, tuple[np.ndarray | None, np.ndarray | None]] | None = None,
    ) -> "LatticeWindow":
        """Window for the walk that moves left with ``left``, right with ``right``.

        ``overrides`` optionally replaces (left, right) at specific sites,
        supporting site-dependent chains; a ``None`` entry keeps the
        shared matrix.
        """
        left = np.asarray(left, dtype=complex)
        right = np.asarray(right, dtype=complex)
        k = left.shape[0]
        blocks: dict[tuple[int, int], np.ndarray] = {}
        overrides = dict(overrides or {})
        for s in range(lo + 1, hi):
            l_s, r_s = left, right
            if s in overrides:
                ovl, ovr = overrides[s]
                l_s = left if ovl is None else np.asarray(ovl, dtype=complex)
                r_s = right if ovr is None else np.asarray(ovr, dtype=complex)
            blocks[(s, s - 1)] = l_s
            blocks[(s, s + 1)] = r_s
        return LatticeWindow(lo, hi, k, blocks, boundary)

    def sites(self) -> list[int]:
        return list(range(self.lo, self.hi + 1))

    @property
    def edge_sites(self) -> frozenset[int]:
        return frozenset((self.lo, self.hi))

    def to_qtm(self) -> tuple[QTM, list[int]]:
        """The window as a finite QTM; returns it with the label order."""
        labels = self.sites()
        index = {s: i for i, s in enumerate(labels)}
        blocks = {(index[s], index[d]): b for (s, d), b in self.blocks.items()}
        return validate_qtm(len(labels), self.internal_dim, blocks), labels


@dataclass(frozen=True)
class WalkView:
    """Uniform access to a QTM or LatticeWindow for simulators and solvers."""

    labels: tuple[int, ...]
    internal_dim: int
    transitions: Mapping[int, tuple[tuple[int, np.ndarray], ...]]
    edge_sites: frozenset[int]
    boundary: str

    def index(self, label: int) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"site {label} is not part of the walk") from None


def walk_view(walk: QTM | LatticeWindow) -> WalkView:
    if isinstance(walk, QTM):
        labels = tuple(range(walk.n_sites))
        transitions = {
            s: tuple(walk.transitions_from(s)) for s in labels
        }
        return WalkView(labels, walk.internal_dim, transitions, frozenset(), "none")
    if isinstance(walk, LatticeWindow):
        labels = tuple(walk.sites())
        trans: dict[int, list[tuple[int, np.ndarray]]] = {s: [] for s in labels}
        for (src, dst), blk in sorted(walk.blocks.items()):
            trans[src].append((dst, blk))
        transitions = {s: tuple(v) for s, v in trans.items()}
        return WalkView(
            labels, walk.internal_dim, transitions, walk.edge_sites, walk.boundary
        )
    raise ValidationError(f"cannot walk a {type(walk).__name__}")


def step(
    walk: QTM | LatticeWindow | WalkView,
    state: TrajectoryState,
    rng: np.random.Generator,
) -> TrajectoryState:
    """Sample one measurement-conditioned jump from ``state``.

    Branch probabilities below 1e-14 are treated as zero and the rest
    renormalized; `DeadEnd` is raised when every branch vanishes, which
    signals numerical corruption of the conditional density.
    """
    view = walk if isinstance(walk, WalkView) else walk_view(walk)
    branches = view.transitions.get(state.site, ())
    if not branches:
        raise DeadEnd(f"site {state.site} has no outgoing transitions")
    rho = state.density
    cands = [blk @ rho @ dagger(blk) for _, blk in branches]
    probs = np.array([c.trace().real for c in cands])
    probs[probs < BRANCH_EPS] = 0.0
    total = probs.sum()
    if total <= BRANCH_EPS:
        raise DeadEnd(f"all branch probabilities vanished at site {state.site}")
    probs = probs / total
    choice = int(rng.choice(len(branches), p=probs))
    dest, _ = branches[choice]
    new_rho = cands[choice] / cands[choice].trace().real
    return TrajectoryState(dest, new_rho)


@dataclass(frozen=True)
class FirstVisitHistogram:
    """Empirical first-visit times of a target set, censored at the horizon."""

    horizon: int
    trajectories: int
    counts: np.ndarray  # counts[r] = first visits at step r, r = 0 .. horizon
    censored: int

    def frequencies(self) -> np.ndarray:
        return self.counts / self.trajectories

    def wilson_intervals(self, z: float = 1.96) -> np.ndarray:
        """Per-bin Wilson score intervals, shape (horizon + 1, 2)."""
        n = self.trajectories
        p = self.counts / n
        denom = 1.0 + z * z / n
        center = (p + z * z / (2 * n)) / denom
        half = (z / denom) * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
        return np.stack([center - half, center + half], axis=1)

    def total_hit_fraction(self) -> float:
        return float(self.counts.sum()) / self.trajectories


def run_trajectories(
    walk: QTM | LatticeWindow,
    initial: TrajectoryState,
    targets: Iterable[int],
    horizon: int,
    count: int,
    seed: int = 0,
) -> FirstVisitHistogram:
    """Monte Carlo first-visit histogram over ``count`` trajectories.

    Randomness comes from a counter-based Philox stream keyed by
    ``seed``; each step draws one uniform per trajectory (active or not),
    so trajectory ``i`` consumes a fixed slice of the stream and results
    do not depend on how the batch is partitioned internally.
    """
    targets = frozenset(int(t) for t in targets)
    if not targets:
        raise ValidationError("target set must be nonempty")
    view = walk_view(walk)
    for t in targets:
        view.index(t)
    k = view.internal_dim
    label_of = np.array(view.labels)
    index_of = {s: i for i, s in enumerate(view.labels)}
    target_idx = np.array(sorted(index_of[t] for t in targets))
    edge_idx = frozenset(index_of[e] for e in view.edge_sites)

    # per-site stacked branch data
    site_dests: list[np.ndarray] = []
    site_blocks: list[np.ndarray] = []
    for s in view.labels:
        branches = view.transitions[s]
        site_dests.append(np.array([index_of[d] for d, _ in branches], dtype=int))
        site_blocks.append(
            np.stack([b for _, b in branches])
            if branches
            else np.zeros((0, k, k), dtype=complex)
        )

    rng = np.random.Generator(np.random.Philox(key=seed))
    sites = np.full(count, index_of[initial.site], dtype=int)
    densities = np.broadcast_to(initial.density, (count, k, k)).copy()
    first_visit = np.full(count, -1, dtype=int)
    active = np.ones(count, dtype=bool)

    if initial.site in targets:
        first_visit[:] = 0
        active[:] = False

    is_target = np.zeros(len(view.labels), dtype=bool)
    is_target[target_idx] = True

    for r in range(1, horizon + 1):
        u = rng.random(count)
        if not active.any():
            continue
        act_idx = np.flatnonzero(active)
        act_sites = sites[act_idx]
        for s in np.unique(act_sites):
            sel = act_idx[act_sites == s]
            blocks = site_blocks[s]
            if blocks.shape[0] == 0:
                raise DeadEnd(f"site {label_of[s]} has no outgoing transitions")
            rho = densities[sel]
            cand = np.einsum("bij,mjl,bkl->mbik", blocks, rho, blocks.conj())
            probs = np.einsum("mbii->mb", cand).real
            probs[probs < BRANCH_EPS] = 0.0
            totals = probs.sum(axis=1)
            dead = totals <= BRANCH_EPS
            if dead.any():
                raise DeadEnd(
                    f"all branch probabilities vanished at site {label_of[s]}"
                )
            cum = np.cumsum(probs / totals[:, None], axis=1)
            choice = np.minimum(
                (u[sel, None] > cum).sum(axis=1), blocks.shape[0] - 1
            )
            picked = cand[np.arange(len(sel)), choice]
            traces = np.einsum("mii->m", picked).real
            densities[sel] = picked / traces[:, None, None]
            sites[sel] = site_dests[s][choice]
        arrived = active & is_target[sites]
        first_visit[arrived] = r
        active &= ~arrived
        if edge_idx:
            at_edge = active & np.isin(sites, list(edge_idx))
            if at_edge.any():
                if view.boundary == "hard_error":
                    raise WindowOverflow(
                        f"{at_edge.sum()} trajectories reached the window edge"
                    )
                active &= ~at_edge  # absorbed; can never reach a target

    counts = np.zeros(horizon + 1, dtype=int)
    hit = first_visit >= 0
    np.add.at(counts, first_visit[hit], 1)
    return FirstVisitHistogram(
        horizon=horizon,
        trajectories=count,
        counts=counts,
        censored=int((~hit).sum()),
    )


@dataclass(frozen=True)
class MonitoredResult:
    """Exact survival and first-visit masses of a monitored evolution.

    ``survival[n]`` is the mass never captured through step n (S_0 = 1);
    ``first_visit[r]`` is the mass captured exactly at step r (index 0 is
    always zero since monitoring starts after step 0);
    ``return_probability_estimate`` is 1 - S_N.  ``edge_mass`` is the
    mass parked at absorbing window edges at the horizon: the captured
    masses are exact lower bounds of the untruncated walk's and the edge
    mass bounds the truncation deficit.
    """

    survival: np.ndarray
    first_visit: np.ndarray
    return_probability_estimate: float
    edge_mass: float


def monitored_evolution(
    walk: QTM | LatticeWindow,
    initial: TrajectoryState,
    monitored: Iterable[int],
    steps: int,
) -> MonitoredResult:
    """Iterate the walk, removing the monitored sites' blocks each step."""
    monitored = frozenset(int(s) for s in monitored)
    view = walk_view(walk)
    for s in monitored:
        view.index(s)
    k = view.internal_dim
    index_of = {s: i for i, s in enumerate(view.labels)}
    monitored_idx = sorted(index_of[s] for s in monitored)
    edge_idx = sorted(
        index_of[e] for e in view.edge_sites if e not in monitored
    )
    transitions = [
        (index_of[src], index_of[dst], blk)
        for src in view.labels
        for dst, blk in view.transitions[src]
    ]

    state = np.zeros((len(view.labels), k, k), dtype=complex)
    state[view.index(initial.site)] = initial.density

    survival = np.empty(steps + 1)
    captured = np.zeros(steps + 1)
    survival[0] = float(sum(b.trace().real for b in state))
    for r in range(1, steps + 1):
        new = np.zeros_like(state)
        for src, dst, blk in transitions:
            new[dst] += blk @ state[src] @ dagger(blk)
        got = float(sum(new[i].trace().real for i in monitored_idx))
        for i in monitored_idx:
            new[i] = 0.0
        captured[r] = got
        state = new
        survival[r] = survival[r - 1] - got
        if view.boundary == "hard_error" and edge_idx:
            edge_mass = float(sum(state[i].trace().real for i in edge_idx))
            if edge_mass > EDGE_EPS:
                raise WindowOverflow(
                    f"mass {edge_mass:.3e} reached the window edge at step {r}"
                )
    edge_mass = float(sum(state[i].trace().real for i in edge_idx))
    return MonitoredResult(
        survival=survival,
        first_visit=captured,
        return_probability_estimate=float(1.0 - survival[steps]),
        edge_mass=edge_mass,
    )
