"""The open quantum potential equation phi = c + P phi with boundary data.

Potentials, like hitting probabilities, are linear functionals of the
initial density and are represented by positive operators ``G_i`` with
``phi_i(rho) = tr(G_i rho)``.  They solve

    G_i = f(i) I                                        on the boundary,
    G_i = c(i) I + sum_j B[i->j]^* G_j B[i->j]          on the interior,

and the monotone iteration from zero (the expected cost truncated at n
steps) increases to the minimal nonnegative solution.  The iteration
engine is shared with the hitting solver; boundary values are enforced
by construction rather than by penalty terms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ._linalg import check_density, dagger, frobenius, min_eigenvalue
from .errors import Divergent, NotASupersolution, ValidationError
from .hitting import _monotone_fixed_point, hitting_probabilities
from .qtm import QTM
from .trajectory import LatticeWindow, walk_view

__all__ = [
    "CostSpec",
    "PotentialOperators",
    "SupersolutionReport",
    "UniquenessReport",
    "solve_potential",
    "check_supersolution",
    "uniqueness_report",
]


@dataclass(frozen=True)
class CostSpec:
    """Interior/boundary split with running costs and boundary values.

    ``interior_cost`` maps interior sites to the nonnegative cost paid
    per visit; ``boundary_value`` maps boundary sites to the nonnegative
    terminal value.  Missing entries default to zero.
    """

    interior: tuple[int, ...]
    boundary: tuple[int, ...]
    interior_cost: Mapping[int, float]
    boundary_value: Mapping[int, float]

    def __post_init__(self):
        interior = tuple(int(s) for s in self.interior)
        boundary = tuple(int(s) for s in self.boundary)
        if set(interior) & set(boundary):
            raise ValidationError("interior and boundary sets overlap")
        if not interior:
            raise ValidationError("interior must be nonempty")
        cost = {int(s): float(v) for s, v in self.interior_cost.items()}
        value = {int(s): float(v) for s, v in self.boundary_value.items()}
        for s, v in cost.items():
            if s not in interior:
                raise ValidationError(f"cost given for non-interior site {s}")
            if v < 0:
                raise ValidationError(f"cost at site {s} is negative")
        for s, v in value.items():
            if s not in boundary:
                raise ValidationError(f"boundary value given for non-boundary site {s}")
            if v < 0:
                raise ValidationError(f"boundary value at site {s} is negative")
        object.__setattr__(self, "interior", interior)
        object.__setattr__(self, "boundary", boundary)
        object.__setattr__(self, "interior_cost", cost)
        object.__setattr__(self, "boundary_value", value)

    def cost(self, site: int) -> float:
        return self.interior_cost.get(site, 0.0)

    def value(self, site: int) -> float:
        return self.boundary_value.get(site, 0.0)

    def validate_against(self, walk: QTM | LatticeWindow) -> None:
        """Check that one step out of the interior lands in interior + boundary."""
        view = walk_view(walk)
        domain = set(self.interior) | set(self.boundary)
        for s in self.interior:
            view.index(s)
            for dst, _ in view.transitions[s]:
                if dst not in domain:
                    raise ValidationError(
                        f"interior site {s} can reach {dst}, which is neither "
                        "interior nor boundary"
                    )
        for s in self.boundary:
            view.index(s)


@dataclass(frozen=True)
class PotentialOperators:
    """Per-site operators G_i with tr(G_i rho) the expected accumulated cost."""

    spec: CostSpec
    operators: Mapping[int, np.ndarray]
    divergent: frozenset[int]
    cap: float
    iterations: int
    residual: float

    def value(self, site: int, rho: np.ndarray) -> float:
        if site in self.divergent:
            raise Divergent(site, self.cap)
        g = self.operators.get(site)
        if g is None:
            raise ValidationError(f"site {site} is not part of the solve")
        rho = check_density(rho, dim=g.shape[0])
        return float(max(np.trace(g @ rho).real, 0.0))

    def operator_norms(self) -> dict[int, float]:
        """Frobenius norm per site, for boundedness inspection."""
        return {s: frobenius(g) for s, g in sorted(self.operators.items())}


def solve_potential(
    walk: QTM | LatticeWindow,
    spec: CostSpec,
    tol: float = 1e-12,
    max_iter: int = 10**6,
    cap: float = 1e12,
) -> PotentialOperators:
    """Minimal nonnegative solution of the potential equation on ``spec``.

    Sites whose accumulated cost grows without bound (detected by a
    stalled increment or a norm above ``cap``) come back flagged in
    ``divergent``; evaluating them raises `Divergent`.
    """
    spec.validate_against(walk)
    view = walk_view(walk)
    k = view.internal_dim
    eye = np.eye(k, dtype=complex)
    clamped = {b: spec.value(b) * eye for b in spec.boundary}
    source = {s: spec.cost(s) * eye for s in spec.interior}
    values, divergent, iterations, residual = _monotone_fixed_point(
        view, list(spec.interior), clamped, source, tol, max_iter, cap
    )
    values.update(clamped)
    for s in divergent:
        values.pop(s, None)
    return PotentialOperators(
        spec=spec,
        operators=values,
        divergent=frozenset(divergent),
        cap=cap,
        iterations=iterations,
        residual=residual,
    )


@dataclass(frozen=True)
class SupersolutionReport:
    """Slack certificates for a verified supersolution."""

    min_interior_slack: float
    min_boundary_slack: float
    dominates_minimal: bool


def check_supersolution(
    walk: QTM | LatticeWindow,
    spec: CostSpec,
    psi: Mapping[int, np.ndarray],
    slack: float = 1e-9,
) -> SupersolutionReport:
    """Verify psi >= c + P psi on the interior and psi >= f on the boundary.

    Raises `NotASupersolution` with the first offending site and the PSD
    deficit otherwise.  On success the minimal solution is solved and the
    dominance ``psi_i >= G_i - 1e-8`` is asserted, which is the content
    of the minimality statement.
    """
    spec.validate_against(walk)
    view = walk_view(walk)
    k = view.internal_dim
    eye = np.eye(k, dtype=complex)
    psi = {int(s): np.asarray(m, dtype=complex) for s, m in psi.items()}
    for s in tuple(spec.interior) + tuple(spec.boundary):
        if s not in psi:
            raise ValidationError(f"psi missing site {s}")
        if psi[s].shape != (k, k):
            raise ValidationError(f"psi at site {s} has shape {psi[s].shape}")
    for s in spec.boundary:
        deficit = min_eigenvalue(psi[s] - spec.value(s) * eye)
        if deficit < -slack:
            raise NotASupersolution(s, -deficit)
    min_boundary = min(
        (min_eigenvalue(psi[s] - spec.value(s) * eye) for s in spec.boundary),
        default=np.inf,
    )
    min_interior = np.inf
    for s in spec.interior:
        acc = spec.cost(s) * eye
        for dst, blk in view.transitions[s]:
            acc = acc + dagger(blk) @ psi[dst] @ blk
        deficit = min_eigenvalue(psi[s] - acc)
        if deficit < -slack:
            raise NotASupersolution(s, -deficit)
        min_interior = min(min_interior, deficit)

    solved = solve_potential(walk, spec)
    dominates = True
    for s in spec.interior:
        if s in solved.divergent:
            dominates = False  # a bounded psi cannot dominate an infinite potential
            continue
        if min_eigenvalue(psi[s] - solved.operators[s]) < -1e-8:
            dominates = False
    return SupersolutionReport(
        min_interior_slack=float(min_interior),
        min_boundary_slack=float(min_boundary),
        dominates_minimal=dominates,
    )


@dataclass(frozen=True)
class UniquenessReport:
    """Certificate that the boundary is reached almost surely from everywhere."""

    verified: bool
    min_eigenvalues: Mapping[int, float]
    witness: int | None


def uniqueness_report(
    walk: QTM | LatticeWindow,
    spec: CostSpec,
    tol: float = 1e-12,
) -> UniquenessReport:
    """Check the hypothesis under which the potential equation is uniquely solvable.

    Solves the hitting problem with the boundary as target and reports
    the smallest eigenvalue of each interior hitting operator; the
    uniqueness hypothesis (boundary reached with probability one from
    every site and density) holds when all of them are at least
    ``1 - 1e-9``.
    """
    spec.validate_against(walk)
    ops = hitting_probabilities(walk, spec.boundary, tol=tol)
    eigs = {s: min_eigenvalue(ops.operators[s]) for s in spec.interior}
    witness = None
    for s, e in sorted(eigs.items()):
        if e < 1.0 - 1e-9:
            witness = s
            break
    return UniquenessReport(
        verified=witness is None,
        min_eigenvalues=eigs,
        witness=witness,
    )
