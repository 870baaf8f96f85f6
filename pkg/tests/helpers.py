"""Shared model builders and independent oracles for the test suite.

The oracles here deliberately avoid the library's own code paths:
classical quantities come from linear solves or closed forms, quantum
first-visit masses from explicit path enumeration over transition
blocks.
"""

import math

import numpy as np

from oqwalk import KrausSet, QTM, validate_qtm


def dag(a):
    return a.conj().T


# ---------------------------------------------------------------------------
# model builders


def pauli_circulant_qtm() -> QTM:
    """3-site circulant built from the three scaled Pauli matrices."""
    v1 = np.array([[0, 1], [1, 0]], dtype=complex) / np.sqrt(3)
    v2 = np.array([[0, -1j], [1j, 0]], dtype=complex) / np.sqrt(3)
    v3 = np.array([[1, 0], [0, -1]], dtype=complex) / np.sqrt(3)
    vs = [v1, v2, v3]
    blocks = {(src, dst): vs[(src - dst) % 3] for src in range(3) for dst in range(3)}
    return validate_qtm(3, 2, blocks)


def shear_blocks():
    w1 = np.array([[1, 1], [0, 1]], dtype=complex) / np.sqrt(3)
    w2 = np.array([[1, 0], [-1, 1]], dtype=complex) / np.sqrt(3)
    return w1, w2


def shear_qtm() -> QTM:
    """Order-2 QTM whose diagonal holds one shear and off-diagonal the other."""
    w1, w2 = shear_blocks()
    return validate_qtm(2, 2, {(0, 0): w1, (0, 1): w2, (1, 0): w2, (1, 1): w1})


def shear_kraus() -> KrausSet:
    w1, w2 = shear_blocks()
    return KrausSet(np.stack([w1, w2]))


def maximally_mixed_qtm(n: int = 2, k: int = 2) -> QTM:
    blk = np.eye(k, dtype=complex) / np.sqrt(n)
    return validate_qtm(n, k, {(i, j): blk for i in range(n) for j in range(n)})


def identity_qtm(n: int = 2, k: int = 2) -> QTM:
    eye = np.eye(k, dtype=complex)
    return validate_qtm(n, k, {(i, i): eye for i in range(n)})


def absorbing_chain_column_stochastic() -> np.ndarray:
    """4-state chain, states 0 and 3 absorbing, 1 and 2 hopping symmetrically.

    Column i holds the distribution of the next state given state i.
    """
    p = np.zeros((4, 4))
    p[0, 0] = 1.0
    p[3, 3] = 1.0
    p[0, 1] = p[2, 1] = 0.5
    p[1, 2] = p[3, 2] = 0.5
    return p


def hadamard_pair():
    """Commuting symmetric pair with mode weights (1/4, 1/2) and (3/4, 1/2)."""
    s2, s3 = np.sqrt(2), np.sqrt(3)
    left = np.array([[1 + s2, 1 - s2], [1 - s2, 1 + s2]], dtype=complex) / 4
    right = np.array([[s3 + s2, s3 - s2], [s3 - s2, s3 + s2]], dtype=complex) / 4
    return left, right


def diagonal_pair(p: float):
    """Diagonal commuting pair: one frozen left mode, one (p, q) classical mode."""
    q = 1.0 - p
    left = np.diag([1.0, np.sqrt(p)]).astype(complex)
    right = np.diag([0.0, np.sqrt(q)]).astype(complex)
    return left, right


def phase_coin_pair(eps: float, theta: float):
    """Commuting normal pair with mode weights 1/2 +- 2 eps a(eps) cos(theta)."""
    a = np.sqrt(0.5 - eps**2)
    off = eps * np.exp(1j * theta)
    left = np.array([[a, off], [off, a]], dtype=complex)
    right = np.array([[a, -off], [-off, a]], dtype=complex)
    return left, right


def quantum_four_site(left: np.ndarray, right: np.ndarray) -> QTM:
    """Absorbing 4-site chain with quantum hops: 0 and 3 absorbing."""
    k = left.shape[0]
    eye = np.eye(k, dtype=complex)
    return validate_qtm(
        4,
        k,
        {
            (0, 0): eye,
            (1, 0): left,
            (1, 2): right,
            (2, 1): left,
            (2, 3): right,
            (3, 3): eye,
        },
    )


# ---------------------------------------------------------------------------
# random generators (seeded by the caller)


def random_density(rng: np.random.Generator, k: int) -> np.ndarray:
    g = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    h = g @ dag(g)
    return h / h.trace().real


def random_unitary(rng: np.random.Generator, k: int) -> np.ndarray:
    g = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_vector_state(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    weights = rng.dirichlet(np.ones(n))
    return np.stack([w * random_density(rng, k) for w in weights])


def random_qtm(rng: np.random.Generator, n: int, k: int) -> QTM:
    """Generic valid QTM: each source column is a random (nk x k) isometry."""
    blocks = {}
    for src in range(n):
        g = rng.normal(size=(n * k, k)) + 1j * rng.normal(size=(n * k, k))
        q, _ = np.linalg.qr(g)
        for dst in range(n):
            blocks[(src, dst)] = q[dst * k : (dst + 1) * k, :]
    return validate_qtm(n, k, blocks)


def random_unital_qtm(rng: np.random.Generator, n: int, k: int) -> QTM:
    """Random unital QTM: bistochastic weights times arbitrary unitaries."""
    perms = [rng.permutation(n) for _ in range(max(3, n))]
    weights = rng.dirichlet(np.ones(len(perms)))
    p = np.zeros((n, n))
    for w, perm in zip(weights, perms):
        for src, dst in enumerate(perm):
            p[dst, src] += w
    blocks = {}
    for src in range(n):
        for dst in range(n):
            if p[dst, src] > 1e-12:
                blocks[(src, dst)] = np.sqrt(p[dst, src]) * random_unitary(rng, k)
    return validate_qtm(n, k, blocks)


def random_commuting_hermitian_pair(
    rng: np.random.Generator, k: int, lam_lo=0.05, lam_hi=0.95, avoid_fair=0.0
):
    """Hermitian commuting (L, R) with L^2 + R^2 = I.

    ``avoid_fair`` keeps every mode weight away from 1/2 by that margin,
    which bounds finite-window truncation error away from the fair point.
    """
    lams = rng.uniform(lam_lo, lam_hi, size=k)
    if avoid_fair > 0.0:
        for i in range(k):
            while abs(lams[i] - 0.5) < avoid_fair:
                lams[i] = rng.uniform(lam_lo, lam_hi)
    u = random_unitary(rng, k)
    left = u @ np.diag(np.sqrt(lams)) @ dag(u)
    right = u @ np.diag(np.sqrt(1.0 - lams)) @ dag(u)
    return left, right, u, lams


# ---------------------------------------------------------------------------
# classical and path-enumeration oracles


def classical_hitting_linear(p_col: np.ndarray, targets: set[int]) -> np.ndarray:
    """Minimal solution of h_i = sum_j p[j, i] h_j by a restricted linear solve.

    States that cannot reach the target at all get h = 0, which removes
    the singular block that absorbing bystanders would contribute.
    """
    n = p_col.shape[0]
    reach = set(targets)
    changed = True
    while changed:
        changed = False
        for i in range(n):
            if i in reach:
                continue
            if any(p_col[j, i] > 0 for j in reach):
                reach.add(i)
                changed = True
    free = [i for i in range(n) if i not in targets and i in reach]
    a = np.eye(len(free))
    b = np.zeros(len(free))
    for r, i in enumerate(free):
        for c, j in enumerate(free):
            a[r, c] -= p_col[j, i]
        b[r] = sum(p_col[j, i] for j in targets)
    sol = np.linalg.solve(a, b) if free else np.zeros(0)
    h = np.zeros(n)
    for i in targets:
        h[i] = 1.0
    for r, i in enumerate(free):
        h[i] = sol[r]
    return h


def classical_mean_hitting_linear(p_col: np.ndarray, targets: set[int]) -> np.ndarray:
    """Solve k_i = 1 + sum_{j not in A} p[j, i] k_j (finite means assumed)."""
    n = p_col.shape[0]
    free = [i for i in range(n) if i not in targets]
    a = np.eye(len(free))
    for r, i in enumerate(free):
        for c, j in enumerate(free):
            a[r, c] -= p_col[j, i]
    sol = np.linalg.solve(a, np.ones(len(free)))
    k = np.zeros(n)
    for r, i in enumerate(free):
        k[i] = sol[r]
    return k


def classical_dobrushin(p_col: np.ndarray) -> float:
    """(1/2) max over column pairs of the l1 distance."""
    n = p_col.shape[0]
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            best = max(best, 0.5 * np.abs(p_col[:, i] - p_col[:, j]).sum())
    return best


def classical_first_passage(target: int, n: int, p_right: float) -> float:
    """Hitting-time-theorem value (|b|/n) P(S_n = b) for a walk from 0."""
    if n < abs(target) or (n + target) % 2 != 0:
        return 0.0
    r = (n + target) // 2
    return (
        abs(target)
        / n
        * math.comb(n, r)
        * p_right**r
        * (1.0 - p_right) ** (n - r)
    )


def brute_force_first_visit(transitions, start, rho, targets, horizon):
    """First-visit masses by explicit path enumeration over blocks.

    ``transitions`` maps a site to its [(destination, block)] list.
    Returns b[0..horizon]; b[0] is zero (monitoring starts after step 0).
    """
    masses = np.zeros(horizon + 1)
    frontier = [(start, np.array(rho, dtype=complex))]
    for r in range(1, horizon + 1):
        new = []
        for site, mat in frontier:
            for dst, blk in transitions.get(site, ()):
                piece = blk @ mat @ dag(blk)
                weight = piece.trace().real
                if weight <= 1e-16:
                    continue
                if dst in targets:
                    masses[r] += weight
                else:
                    new.append((dst, piece))
        frontier = new
    return masses
