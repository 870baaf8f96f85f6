import numpy as np
import pytest

from helpers import (
    classical_first_passage,
    dag,
    diagonal_pair,
    hadamard_pair,
    phase_coin_pair,
    random_commuting_hermitian_pair,
    random_density,
    random_unitary,
)
from oqwalk import (
    BirthDeathSpec,
    LatticeWindow,
    NotCommuting,
    NotNormal,
    NotNormalized,
    StartNotOrigin,
    TrajectoryState,
    ValidationError,
    VectorState,
    apply,
    auto_window_solve,
    birth_death,
    diagonalize_pair,
    first_visit_probability,
    gambler_ruin,
    monitored_evolution,
    site_probability,
)


def mode_pairs(pair):
    return sorted(zip(np.round(pair.left_weights, 10), np.round(pair.right_weights, 10)))


class TestDiagonalizePair:
    def test_phase_coin_pair_mode_weights(self):
        eps, theta = 0.3, 0.7
        a = np.sqrt(0.5 - eps**2)
        lam_plus = 0.5 + 2 * eps * a * np.cos(theta)
        lam_minus = 0.5 - 2 * eps * a * np.cos(theta)
        pair = diagonalize_pair(*phase_coin_pair(eps, theta))
        expected = sorted(
            [(round(lam_plus, 10), round(lam_minus, 10)), (round(lam_minus, 10), round(lam_plus, 10))]
        )
        observed = mode_pairs(pair)
        assert np.allclose(observed, expected, atol=1e-10)

    def test_hadamard_pair_mode_weights(self):
        pair = diagonalize_pair(*hadamard_pair())
        assert np.allclose(mode_pairs(pair), [(0.25, 0.75), (0.5, 0.5)], atol=1e-10)

    def test_reconstruction_invariants(self):
        left, right = hadamard_pair()
        pair = diagonalize_pair(left, right)
        u = pair.unitary
        assert np.max(np.abs(dag(u) @ u - np.eye(2))) < 1e-10
        assert np.max(np.abs(u @ np.diag(pair.left_diag) @ dag(u) - left)) < 1e-9
        assert np.max(np.abs(u @ np.diag(pair.right_diag) @ dag(u) - right)) < 1e-9

    def test_diagonal_pair_keeps_canonical_basis(self):
        pair = diagonalize_pair(*diagonal_pair(0.4))
        assert np.max(np.abs(np.abs(pair.unitary) - np.eye(2))) < 1e-12

    def test_rejections(self):
        nonnormal = np.array([[0.5, 0.5], [0.0, 0.5]], dtype=complex)
        other = np.sqrt(np.eye(2, dtype=complex) - dag(nonnormal) @ nonnormal + 0j)
        with pytest.raises(NotNormal):
            diagonalize_pair(nonnormal, np.eye(2, dtype=complex))
        a = np.diag([1.0, 0.0]).astype(complex)
        b = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # normal? no
        pauli_x = np.array([[0, 1], [1, 0]], dtype=complex)
        with pytest.raises(NotCommuting):
            diagonalize_pair(
                np.diag([np.sqrt(0.5), np.sqrt(0.2)]).astype(complex),
                pauli_x * 1.0,
            )
        with pytest.raises(NotNormalized):
            diagonalize_pair(
                np.diag([0.5, 0.5]).astype(complex), np.diag([0.5, 0.5]).astype(complex)
            )

    def test_degenerate_modes_resolved(self):
        # both matrices proportional to the identity: any basis works
        pair = diagonalize_pair(
            np.sqrt(0.5) * np.eye(2, dtype=complex),
            np.sqrt(0.5) * np.eye(2, dtype=complex),
        )
        assert np.allclose(pair.left_weights, [0.5, 0.5])

    def test_random_commuting_pairs_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            left, right, _, _ = random_commuting_hermitian_pair(rng, 3)
            pair = diagonalize_pair(left, right)
            u = pair.unitary
            assert np.max(np.abs(u @ np.diag(pair.left_diag) @ dag(u) - left)) < 1e-9
            assert np.max(np.abs(pair.left_weights + pair.right_weights - 1)) < 1e-10


class TestSiteProbability:
    def test_hadamard_pair_six_step_value(self):
        pair = diagonalize_pair(*hadamard_pair())
        rho = np.diag([1 / 3, 2 / 3]).astype(complex)
        value = site_probability(pair, rho, start=0, site=2, steps=6)
        assert value == pytest.approx(2175 / 8192, abs=1e-12)

    def test_diagonal_pair_closed_form(self):
        p = 0.35
        q = 1 - p
        pair = diagonalize_pair(*diagonal_pair(p))
        a, b = 0.2, 0.8
        rho = np.diag([a, b]).astype(complex)
        n = 5
        import math

        for x in range(-n, n + 1):
            expected = a * (x == -n)
            for l in range(n + 1):
                if x == n - 2 * l:
                    expected += b * math.comb(n, l) * p**l * q ** (n - l)
            assert site_probability(pair, rho, 0, x, n) == pytest.approx(
                expected, abs=1e-12
            )

    def test_parity_violations_vanish(self):
        pair = diagonalize_pair(*hadamard_pair())
        rho = np.eye(2, dtype=complex) / 2
        assert site_probability(pair, rho, 0, 1, 4) == 0.0
        assert site_probability(pair, rho, 0, 9, 5) == 0.0

    def test_distribution_sums_to_one(self):
        rng = np.random.default_rng(1)
        for _ in range(3):
            left, right, _, _ = random_commuting_hermitian_pair(rng, 2)
            pair = diagonalize_pair(left, right)
            rho = random_density(rng, 2)
            n = 7
            total = sum(
                site_probability(pair, rho, 0, x, n) for x in range(-n, n + 1)
            )
            assert total == pytest.approx(1.0, abs=1e-10)

    def test_matches_exact_channel_iteration_on_window(self):
        rng = np.random.default_rng(2)
        left, right, _, _ = random_commuting_hermitian_pair(rng, 2)
        pair = diagonalize_pair(left, right)
        rho = random_density(rng, 2)
        n = 6
        window = LatticeWindow.nearest_neighbor(left, right, -n - 2, n + 2)
        qtm, labels = window.to_qtm()
        state = VectorState.point_mass(labels.index(0), rho, len(labels))
        for _ in range(n):
            state = apply(qtm, state)
        traces = state.site_traces()
        for x in range(-n, n + 1):
            assert site_probability(pair, rho, 0, x, n) == pytest.approx(
                traces[labels.index(x)], abs=1e-10
            )


class TestFirstVisit:
    def test_straight_run_equals_occupation(self):
        pair = diagonalize_pair(*hadamard_pair())
        rho = np.eye(2, dtype=complex) / 2
        assert first_visit_probability(pair, rho, site=3, steps=3) == pytest.approx(
            site_probability(pair, rho, 0, 3, 3), abs=1e-14
        )

    def test_classical_reduction_matches_hitting_theorem_oracle(self):
        p_right = 0.6
        left = np.sqrt(1 - p_right) * np.eye(2, dtype=complex)
        right = np.sqrt(p_right) * np.eye(2, dtype=complex)
        pair = diagonalize_pair(left, right)
        rho = np.eye(2, dtype=complex) / 2
        for n in (2, 5, 8):
            for x in (-2, 1, 2):
                expected = classical_first_passage(x, n, p_right)
                got = first_visit_probability(pair, rho, x, n) if n >= abs(x) else 0.0
                assert got == pytest.approx(expected, abs=1e-12)

    def test_hadamard_pair_matches_monitored_masses(self):
        left, right = hadamard_pair()
        pair = diagonalize_pair(left, right)
        rng = np.random.default_rng(3)
        rho = random_density(rng, 2)
        horizon = 24
        window = LatticeWindow.nearest_neighbor(left, right, -horizon - 2, horizon + 2)
        exact = monitored_evolution(window, TrajectoryState(0, rho), [2], horizon)
        for n in range(1, horizon + 1):
            assert first_visit_probability(pair, rho, 2, n) == pytest.approx(
                exact.first_visit[n], abs=1e-9
            )

    def test_start_not_origin_rejected(self):
        pair = diagonalize_pair(*hadamard_pair())
        rho = np.eye(2, dtype=complex) / 2
        with pytest.raises(StartNotOrigin):
            first_visit_probability(pair, rho, 2, 6, start=1)


class TestGamblerRuin:
    def test_classical_subfair_reduction_is_certain(self):
        p_right = 0.4  # leftward drift: lambda >= mu in both modes
        left = np.sqrt(1 - p_right) * np.eye(2, dtype=complex)
        right = np.sqrt(p_right) * np.eye(2, dtype=complex)
        pair = diagonalize_pair(left, right)
        rho = np.eye(2, dtype=complex) / 2
        for i in (1, 3, 7):
            assert gambler_ruin(pair, rho, i) == 1.0

    def test_two_mode_superposition_formula(self):
        rng = np.random.default_rng(4)
        u = random_unitary(rng, 2)
        lam = np.array([0.8, 0.2])  # mode 0 drifts left, mode 1 drifts right
        left = u @ np.diag(np.sqrt(lam)) @ dag(u)
        right = u @ np.diag(np.sqrt(1 - lam)) @ dag(u)
        pair = diagonalize_pair(left, right)
        alpha = 0.3
        for i in (1, 2, 5):
            rho = alpha * np.outer(u[:, 0], u[:, 0].conj()) + (1 - alpha) * np.outer(
                u[:, 1], u[:, 1].conj()
            )
            expected = alpha + (1 - alpha) * (lam[1] / (1 - lam[1])) ** i
            assert gambler_ruin(pair, rho, i) == pytest.approx(expected, abs=1e-10)

    def test_monotone_in_the_start_site(self):
        rng = np.random.default_rng(5)
        left, right, _, _ = random_commuting_hermitian_pair(rng, 2)
        pair = diagonalize_pair(left, right)
        rho = random_density(rng, 2)
        values = [gambler_ruin(pair, rho, i) for i in range(1, 8)]
        for a, b in zip(values, values[1:]):
            assert b <= a + 1e-12
        assert all(0.0 <= v <= 1.0 + 1e-9 for v in values)

    def test_cross_check_against_window_solver(self):
        rng = np.random.default_rng(6)
        left, right, _, _ = random_commuting_hermitian_pair(rng, 2, avoid_fair=0.05)
        pair = diagonalize_pair(left, right)
        rho = random_density(rng, 2)
        start = 2
        closed = gambler_ruin(pair, rho, start)
        windowed = auto_window_solve(left, right, [0], start, rho, tol=1e-9)
        assert closed == pytest.approx(windowed.value, abs=1e-8)

    def test_start_must_be_positive(self):
        pair = diagonalize_pair(*hadamard_pair())
        with pytest.raises(ValidationError):
            gambler_ruin(pair, np.eye(2, dtype=complex) / 2, 0)


class TestBirthDeath:
    def test_constant_pairs_reduce_to_gambler(self):
        rng = np.random.default_rng(7)
        left, right, _, _ = random_commuting_hermitian_pair(rng, 2)
        pair = diagonalize_pair(left, right)
        spec = BirthDeathSpec.from_pairs([(left, right)])
        rho = random_density(rng, 2)
        for i in (1, 2, 4):
            assert birth_death(spec, rho, i) == pytest.approx(
                gambler_ruin(pair, rho, i), abs=1e-12
            )

    def test_fair_classical_chain_is_certain(self):
        left = np.sqrt(0.5) * np.eye(1, dtype=complex)
        right = np.sqrt(0.5) * np.eye(1, dtype=complex)
        spec = BirthDeathSpec.from_pairs([(left, right)])
        assert birth_death(spec, np.eye(1, dtype=complex), 3) == 1.0

    def test_geometric_ratio_closed_form(self):
        # mode ratios lambda/mu = 1/4 (frozen second mode drifts left)
        left = np.diag([np.sqrt(0.2), np.sqrt(0.9)]).astype(complex)
        right = np.diag([np.sqrt(0.8), np.sqrt(0.1)]).astype(complex)
        spec = BirthDeathSpec.from_pairs([(left, right)])
        rho = np.diag([1.0, 0.0]).astype(complex)
        # geometric series: sum_{k>=2} (1/4)^k / sum_{k>=0} (1/4)^k = 1/16
        assert birth_death(spec, rho, 2) == pytest.approx(1 / 16, abs=1e-12)

    def test_site_dependent_prefix_matches_manual_series(self):
        # two listed sites then a geometric tail
        l1 = np.array([[np.sqrt(0.3)]], dtype=complex)
        r1 = np.array([[np.sqrt(0.7)]], dtype=complex)
        l2 = np.array([[np.sqrt(0.4)]], dtype=complex)
        r2 = np.array([[np.sqrt(0.6)]], dtype=complex)
        spec = BirthDeathSpec.from_pairs([(l1, r1), (l2, r2)])
        rho = np.eye(1, dtype=complex)
        ratios = [0.3 / 0.7, 0.4 / 0.6]
        gammas = [1.0]
        for i in range(60):
            gammas.append(gammas[-1] * ratios[min(i, 1)])
        total = sum(gammas) + gammas[-1] * ratios[1] / (1 - ratios[1])
        tail2 = sum(gammas[2:]) + gammas[-1] * ratios[1] / (1 - ratios[1])
        assert birth_death(spec, rho, 2) == pytest.approx(tail2 / total, abs=1e-12)

    def test_rejects_noncommuting_families(self):
        pauli_x = np.array([[0, 1], [1, 0]], dtype=complex)
        l1 = np.sqrt(0.5) * np.eye(2, dtype=complex)
        r1 = np.sqrt(0.5) * pauli_x
        l2 = np.sqrt(0.5) * np.array([[1, 0], [0, -1]], dtype=complex)
        r2 = np.sqrt(0.5) * np.eye(2, dtype=complex)
        with pytest.raises(NotCommuting):
            BirthDeathSpec.from_pairs([(l1, r1), (l2, r2)])
