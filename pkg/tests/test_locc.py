"""Twirling, the paired-Pauli singlet test, and one-way LOCC machinery."""

import math

import numpy as np
import pytest

from septest.locc import (
    MonteCarloResult,
    QCChannel,
    WernerState,
    apply_qc,
    bell_dephase_weights,
    bell_projectors,
    compile_pauli_channel,
    locc_norm_estimate,
    locc_norm_lower,
    locc_sep_bound,
    max_entangled_trace_gap,
    pauli_test_operator,
    single_qubit_cliffords,
    singlet_test_analytic,
    singlet_test_mc,
    singlet_test_operator,
    twirl_exact,
    twirl_pairs,
    twirl_sampled,
    werner_state,
)
from septest.separability import max_product_overlap_operator, random_product_ensemble
from septest.states import (
    DensityMatrix,
    Povm,
    PureState,
    RegisterLayout,
    bell_state,
    max_entangled,
    maximally_mixed,
    random_mixed,
    trace_norm,
)
from septest import _linalg as la

L22 = RegisterLayout((2, 2))


class TestTwirl:
    def test_clifford_group_size(self):
        assert len(single_qubit_cliffords()) == 24

    def test_singlet_fixed(self):
        w, out = twirl_exact(bell_state("psi-").to_density())
        assert w.p == pytest.approx(1.0)
        assert np.max(np.abs(out.matrix - bell_state("psi-").to_density().matrix)) < 1e-12

    def test_maximally_mixed_fixed(self):
        w, out = twirl_exact(maximally_mixed(L22))
        assert w.p == pytest.approx(0.25)
        assert np.max(np.abs(out.matrix - np.eye(4) / 4)) < 1e-12

    def test_zero_zero_state(self):
        # |00> has no singlet weight; the twirl spreads it over the triplet
        w, out = twirl_exact(PureState([1, 0, 0, 0], L22).to_density())
        assert w.p == pytest.approx(0.0, abs=1e-12)
        proj = bell_projectors()
        for name in ("phi+", "phi-", "psi+"):
            assert np.trace(proj[name] @ out.matrix).real == pytest.approx(1 / 3, abs=1e-12)

    def test_bell_dephasing_weights_of_zero_zero(self):
        weights = bell_dephase_weights(PureState([1, 0, 0, 0], L22).to_density())
        assert weights["psi-"] == pytest.approx(0.0, abs=1e-12)
        assert weights["psi+"] == pytest.approx(0.0, abs=1e-12)
        assert weights["phi+"] == pytest.approx(0.5, abs=1e-12)
        assert weights["phi-"] == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_sampled_equals_exact(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_mixed(L22, rng)
        _, exact = twirl_exact(rho)
        sampled = twirl_sampled(rho, rng)
        assert np.max(np.abs(exact.matrix - sampled.matrix)) < 1e-10

    def test_phi_plus_becomes_zero_weight_werner(self):
        w, out = twirl_exact(bell_state("phi+").to_density())
        assert w.p == pytest.approx(0.0, abs=1e-12)
        psim = bell_projectors()["psi-"]
        assert np.max(np.abs(out.matrix - (np.eye(4) - psim) / 3)) < 1e-12

    def test_wrong_dimension(self):
        with pytest.raises(ValueError):
            twirl_exact(maximally_mixed(RegisterLayout((2, 2, 2))))

    def test_werner_separability_flag(self):
        assert WernerState(0.5).separable
        assert not WernerState(0.7).separable


class TestPauliTest:
    def test_operator_bell_weights(self):
        t = pauli_test_operator()
        proj = bell_projectors()
        assert np.trace(t @ proj["psi-"]).real == pytest.approx(1.0, abs=1e-12)
        for name in ("phi+", "phi-", "psi+"):
            assert np.trace(t @ proj[name]).real == pytest.approx(1 / 3, abs=1e-12)

    def test_singlets_accept_with_certainty(self):
        for n in (1, 2):
            rho = max_entangled(n, "singlet").to_density()
            assert singlet_test_analytic(rho) == pytest.approx(1.0, abs=1e-12)

    def test_triplet_bells_score_one_third(self):
        for name in ("phi+", "phi-", "psi+"):
            p = singlet_test_analytic(bell_state(name).to_density())
            assert p == pytest.approx(1 / 3, abs=1e-12)

    def test_werner_boundary_value(self):
        assert singlet_test_analytic(werner_state(0.5)) == pytest.approx(2 / 3, abs=1e-12)

    def test_odd_layout_rejected(self):
        with pytest.raises(ValueError):
            singlet_test_analytic(maximally_mixed(RegisterLayout((2, 2, 2))))

    @pytest.mark.parametrize("seed", range(6))
    def test_enumeration_matches_operator(self, seed):
        rng = np.random.default_rng(100 + seed)
        rho = random_mixed(RegisterLayout((2, 2, 2, 2)), rng)
        via_enum = singlet_test_analytic(rho)
        via_op = float(np.trace(singlet_test_operator(2) @ rho.matrix).real)
        assert abs(via_enum - via_op) < 1e-12

    def test_twirl_pairs_preserves_acceptance(self):
        rng = np.random.default_rng(5)
        rho = random_mixed(RegisterLayout((2, 2, 2, 2)), rng)
        assert abs(singlet_test_analytic(rho) - singlet_test_analytic(twirl_pairs(rho))) < 1e-10

    def test_separable_seesaw_max_two_thirds(self):
        best, _ = max_product_overlap_operator(pauli_test_operator(), (2, 2), restarts=24, seed=3)
        assert best <= 2 / 3 + 1e-9
        assert best >= 2 / 3 - 1e-6

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_product_states_below_power_bound(self, n):
        rng = np.random.default_rng(20 + n)
        worst = 0.0
        for _ in range(30):
            ens = random_product_ensemble((2**n, 2**n), size=int(rng.integers(1, 5)), rng=rng)
            rho = DensityMatrix(ens.state_matrix(), RegisterLayout((2,) * (2 * n)))
            worst = max(worst, singlet_test_analytic(rho))
        assert worst <= (2 / 3) ** n + 1e-9


class TestMonteCarlo:
    def test_singlet_always_accepts(self):
        res = singlet_test_mc(max_entangled(1, "singlet").to_density(), 100, seed=1)
        assert res.frequency == 1.0
        assert all(r.accept for r in res.records)

    def test_two_singlets_always_accept(self):
        res = singlet_test_mc(max_entangled(2, "singlet").to_density(), 50, seed=2)
        assert res.frequency == 1.0

    def test_record_convention(self):
        res = singlet_test_mc(max_entangled(1, "singlet").to_density(), 5, seed=3)
        for rec in res.records:
            assert all(a * b == -1 for a, b in rec.outcomes)
            assert rec.paulis[0] in "XYZ"

    def test_product_state_frequency_within_3_sigma(self):
        vec = np.zeros(16)
        vec[0] = 1.0
        rho = PureState(vec, RegisterLayout((2, 2, 2, 2))).to_density()
        trials = 3000
        res = singlet_test_mc(rho, trials, seed=4)
        sigma = math.sqrt(res.analytic * (1 - res.analytic) / trials)
        assert abs(res.frequency - res.analytic) < 3 * sigma + 1e-12

    def test_needs_positive_trials(self):
        with pytest.raises(ValueError):
            singlet_test_mc(maximally_mixed(L22), 0)

    def test_seed_reproducible(self):
        rho = werner_state(0.6)
        a = singlet_test_mc(rho, 200, seed=9)
        b = singlet_test_mc(rho, 200, seed=9)
        assert a.frequency == b.frequency


class TestBounds:
    def test_locc_sep_bound_values(self):
        assert locc_sep_bound(1) == pytest.approx(2 / 3)
        assert locc_sep_bound(2) == pytest.approx(10 / 9)

    def test_locc_sep_bound_exact_formula(self):
        for n in range(1, 11):
            assert locc_sep_bound(n) == 2.0 * (1.0 - (2.0 / 3.0) ** n)

    def test_monotone_to_two(self):
        values = [locc_sep_bound(n) for n in range(1, 30)]
        assert all(b > a for a, b in zip(values, values[1:]))
        assert values[-1] < 2.0

    def test_trace_gap_below_printed_claim_at_n1(self):
        # the fidelity-route bound: at one pair the distance floor is
        # 2 - sqrt(2), strictly below 1.5 (which would exceed the matching
        # upper bound sqrt(2) for the fidelity-optimal separable state)
        gap = max_entangled_trace_gap(1)
        assert gap == pytest.approx(2 - math.sqrt(2), abs=1e-12)
        upper_for_best = 2 * math.sqrt(1 - 0.5)
        assert 1.5 > upper_for_best  # the discrepancy the corollary check records
        assert gap <= upper_for_best

    def test_positive_n_required(self):
        with pytest.raises(ValueError):
            locc_sep_bound(0)


class TestChannels:
    def test_trivial_povm(self):
        rng = np.random.default_rng(6)
        x = random_mixed(L22, rng).matrix
        ch = QCChannel(Povm((np.eye(2),), ("only",)))
        out = apply_qc(x, (2, 2), ch)
        reduced = np.trace(x.reshape(2, 2, 2, 2), axis1=1, axis2=3)
        assert np.max(np.abs(out - np.kron(reduced, [[1.0]]))) < 1e-12

    def test_computational_povm_on_bell(self):
        ch = QCChannel(Povm((np.diag([1.0, 0]), np.diag([0, 1.0])), (0, 1)))
        out = apply_qc(bell_state("phi+").to_density().matrix, (2, 2), ch)
        expect = 0.5 * np.diag([1, 0, 0, 1.0])
        assert np.max(np.abs(out - expect)) < 1e-12

    def test_trace_preserved(self):
        rng = np.random.default_rng(7)
        x = random_mixed(L22, rng).matrix
        ch = compile_pauli_channel(1)
        assert np.trace(apply_qc(x, (2, 2), ch)).real == pytest.approx(1.0, abs=1e-12)

    def test_lower_bound_below_trace_norm(self):
        rng = np.random.default_rng(8)
        ch = compile_pauli_channel(1)
        for _ in range(5):
            a, b = random_mixed(L22, rng), random_mixed(L22, rng)
            x = a.matrix - b.matrix
            assert locc_norm_lower(x, (2, 2), ch) <= trace_norm(x) + 1e-9

    def test_zero_matrix(self):
        ch = compile_pauli_channel(1)
        assert locc_norm_lower(np.zeros((4, 4)), (2, 2), ch) == pytest.approx(0.0)

    @pytest.mark.parametrize("n", [1, 2])
    def test_compiled_test_beats_certified_gap(self, n):
        rng = np.random.default_rng(30 + n)
        ch = compile_pauli_channel(n)
        target = max_entangled(n, "singlet").to_density().matrix
        bound = locc_sep_bound(n)
        for _ in range(6):
            ens = random_product_ensemble((2**n, 2**n), size=int(rng.integers(1, 5)), rng=rng)
            x = target - ens.state_matrix()
            assert locc_norm_lower(x, (2**n, 2**n), ch) >= bound - 1e-6


class TestEstimate:
    def test_zero_input(self):
        val, _ = locc_norm_estimate(np.zeros((4, 4)), (2, 2), restarts=2, iters=5, seed=0)
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_planted_classical_difference(self):
        # X diagonal on the measured side: the LOCC value equals the full
        # 1-norm and the computational measurement attains it
        phibar = 0.5 * np.diag([1, 0, 0, 1.0]).astype(complex)
        x = phibar - np.eye(4) / 4
        val, meta = locc_norm_estimate(x, (2, 2), restarts=6, iters=30, seed=3)
        assert abs(val - trace_norm(x)) < 1e-3
        assert val <= trace_norm(x) + 1e-9

    def test_correlated_vs_uniform_product(self):
        # the correlated pair against the uniform product: value 1 - delta/2
        # at delta = 0
        phibar = 0.5 * np.diag([1, 0, 0, 1.0]).astype(complex)
        x = phibar - np.eye(4) / 4
        val, _ = locc_norm_estimate(x, (2, 2), restarts=6, iters=30, seed=4)
        assert val >= 1.0 - 1e-6

    def test_monotone_under_more_iters(self):
        rng = np.random.default_rng(9)
        a, b = random_mixed(L22, rng), random_mixed(L22, rng)
        x = a.matrix - b.matrix
        v1, _ = locc_norm_estimate(x, (2, 2), restarts=3, iters=2, seed=5)
        v2, _ = locc_norm_estimate(x, (2, 2), restarts=3, iters=30, seed=5)
        assert v2 >= v1 - 1e-12


class TestPauliChannelOnPhiPlus:
    def test_norm_bound_holds_without_basis_conversion(self):
        # conjugation by Y permutes the Pauli eigenbases, so the compiled
        # channel certifies the same gap for the phi+ target directly
        from septest.separability import nearest_separable
        from septest.states import Cut

        phi = bell_state("phi+").to_density()
        ens, _ = nearest_separable(phi, Cut(((0,), (1,))), restarts=3, iters=40, seed=42)
        x = phi.matrix - ens.state_matrix()
        ch = compile_pauli_channel(1)
        assert locc_norm_lower(x, (2, 2), ch) >= 2 * (1 - 2 / 3) - 1e-9
