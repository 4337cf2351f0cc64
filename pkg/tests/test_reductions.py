"""The four reduction constructions and the equivalence transforms."""

import math

import numpy as np
import pytest

from septest.circuits import Circuit, Gate, Register
from septest.locc import PAULI, locc_sep_bound, singlet_test_analytic
from septest.reductions import (
    PromiseInstance,
    equality_verifier,
    inverse_gates,
    no_instance_gap_forms,
    product_to_similarity,
    pure_from_separable,
    reduce_bqp,
    reduce_qma,
    reduce_qma2,
    reduce_qszk,
    toy_prep,
    toy_verifier,
)
from septest.separability import (
    nearest_pure_product,
    random_product_ensemble,
    schmidt_max_overlap,
)
from septest.states import (
    Cut,
    DensityMatrix,
    PureState,
    RegisterLayout,
    bell_state,
    partial_trace,
    pure_fidelity,
    random_mixed,
    random_pure,
    trace_norm,
)
from septest import _linalg as la

PREP0 = Circuit(inputs=(), ancillas=(Register("S0", 2),), gates=())
PREP1 = Circuit(inputs=(), ancillas=(Register("S0", 2),), gates=(Gate("X", ("S0",)),))


def prepared(inst: PromiseInstance) -> PureState:
    return inst.circuit.run_pure()


def marginal_on(state: PureState, labels) -> DensityMatrix:
    all_labels = list(state.layout.labels)
    return partial_trace(state.to_density(), [all_labels.index(l) for l in labels])


class TestPromiseInstance:
    def test_crossed_bounds_rejected(self):
        with pytest.raises(ValueError):
            PromiseInstance(PREP0, Cut(((0,),)), "trace", 0.5, 0.4, "ProductState")

    def test_unknown_tag_rejected(self):
        with pytest.raises(ValueError):
            PromiseInstance(PREP0, Cut(((0,),)), "trace", 0.0, 1.0, "Nonsense")

    def test_gap_forms_ordering(self):
        # the certified paired-Pauli form dominates the recorded formula at
        # every small n (where the recorded one is vacuous or negative)
        for n in (1, 2, 3, 4):
            forms = no_instance_gap_forms(n, 0.0)
            assert forms["locc"] > forms["recorded"]
            assert forms["locc"] == pytest.approx(locc_sep_bound(n))


class TestToyFamilies:
    def test_accept_prep_decision(self):
        out = toy_prep("accept").run_pure()
        d_marg = marginal_on(out, ["D"])
        assert d_marg.matrix[1, 1].real == pytest.approx(1.0)

    def test_reject_prep_decision(self):
        out = toy_prep("reject").run_pure()
        d_marg = marginal_on(out, ["D"])
        assert d_marg.matrix[0, 0].real == pytest.approx(1.0)

    def test_noisy_prep_overlap(self):
        out = toy_prep("accept", delta=0.1).run_pure()
        d_marg = marginal_on(out, ["D"])
        assert d_marg.matrix[1, 1].real == pytest.approx(0.9, abs=1e-12)

    def test_all_ones_verifier(self):
        v = toy_verifier("all-ones", p_qubits=2)
        for witness, accept in ((3, True), (1, False), (0, False)):
            vec = np.zeros(4)
            vec[witness] = 1.0
            out = v.run_pure(PureState(vec, RegisterLayout((2, 2))))
            d = marginal_on(out, ["D"])
            assert d.matrix[1, 1].real == pytest.approx(1.0 if accept else 0.0, abs=1e-12)

    def test_equality_verifier_swap_statistics(self):
        rng = np.random.default_rng(0)
        a = random_pure(RegisterLayout((2,)), rng)
        b = random_pure(RegisterLayout((2,)), rng)
        vec = np.kron(np.kron(a.vector, b.vector), [1, 0])
        out = equality_verifier(1).run_pure(PureState(vec, RegisterLayout((2, 2, 2))))
        d = marginal_on(out, ["W"])
        expect = 0.5 + 0.5 * pure_fidelity(a, b)
        assert d.matrix[1, 1].real == pytest.approx(expect, abs=1e-10)


class TestEntanglingReductions:
    def test_accept_output_is_the_designated_product(self):
        inst = reduce_bqp(toy_prep("accept"), 1)
        psi = prepared(inst)
        expect = np.kron(np.kron(bell_state("phi+").vector, [1, 0]), np.kron([0, 1], [1, 0]))
        assert np.linalg.norm(psi.vector - expect) < 1e-12

    def test_noisy_accept_distance_two_sqrt_delta(self):
        delta = 0.01
        inst = reduce_bqp(toy_prep("accept", delta=delta), 1, delta=delta)
        psi = prepared(inst)
        expect = np.kron(np.kron(bell_state("phi+").vector, [1, 0]), np.kron([0, 1], [1, 0]))
        dist = 2 * math.sqrt(max(0.0, 1 - abs(np.vdot(expect, psi.vector)) ** 2))
        assert dist <= inst.alpha + 1e-9

    def test_reject_marginal_is_maximally_entangled(self):
        for n in (1, 2):
            inst = reduce_bqp(toy_prep("reject"), n)
            psi = prepared(inst)
            labels = [f"A{i}" for i in range(1, n + 1)] + [f"B{i}" for i in range(1, n + 1)]
            marg = marginal_on(psi, labels)
            from septest.states import max_entangled

            target = max_entangled(n).to_density()
            assert np.max(np.abs(marg.matrix - target.matrix)) < 1e-9

    def test_promise_parameters(self):
        inst = reduce_bqp(toy_prep("accept"), 2, delta=0.0)
        assert inst.alpha == 0.0
        assert inst.beta == pytest.approx(locc_sep_bound(2))
        assert inst.norm_kind == "one_way_locc"
        assert set(inst.meta["beta_forms"]) == {"locc", "trace_fidelity", "recorded"}

    def test_qma_empty_witness_matches_bqp_gate_for_gate(self):
        prep = toy_prep("accept")
        wrapped = Circuit(
            inputs=(Register("P", 1),),
            ancillas=prep.registers,
            gates=prep.gates,
            outputs=prep.outputs + ("P",),
        )
        a = reduce_qma(wrapped, 1)
        b = reduce_bqp(prep, 1)
        assert a.circuit.gates == b.circuit.gates
        assert a.circuit.outputs == b.circuit.outputs

    def test_qma_reject_marginals_for_random_inputs(self):
        inst = reduce_qma(toy_verifier("reject", p_qubits=1), 1)
        rng = np.random.default_rng(1)
        target = bell_state("phi+").to_density()
        for _ in range(20):
            out = inst.circuit.run_pure(random_pure(inst.circuit.input_layout(), rng))
            marg = marginal_on(out, ["A1", "B1"])
            assert np.max(np.abs(marg.matrix - target.matrix)) < 1e-9

    def test_qma_accepting_witness_gives_product(self):
        inst = reduce_qma(toy_verifier("all-ones", p_qubits=1), 1)
        witness = PureState([0, 1], RegisterLayout((2,)))
        out = inst.circuit.run_pure(witness)
        _, overlap = nearest_pure_product(out, inst.cut, restarts=6, seed=2)
        assert overlap >= 1.0 - 1e-9

    @pytest.mark.parametrize("n", [1, 2])
    def test_singlet_distinguisher_advantage(self, n):
        inst = reduce_bqp(toy_prep("reject"), n)
        psi = prepared(inst)
        labels = [f"A{i}" for i in range(1, n + 1)] + [f"B{i}" for i in range(1, n + 1)]
        marg = marginal_on(psi, labels)
        mat = marg.matrix
        for ax in range(n, 2 * n):
            mat = la.apply_to_matrix(PAULI["Y"], mat, [2] * (2 * n), [ax])
        acc = singlet_test_analytic(DensityMatrix(mat, RegisterLayout((2,) * (2 * n))))
        advantage = acc - (2 / 3) ** n
        assert advantage >= 1 - (2 / 3) ** n - 1e-6

    def test_decision_register_required(self):
        bad = Circuit(inputs=(Register("q", 2),))
        with pytest.raises(ValueError):
            reduce_qma(bad, 1)


class TestTwoWitnessReduction:
    def test_structure_and_promise(self):
        inst = reduce_qma2(equality_verifier(1), n=1, d_label="W")
        assert inst.tag == "PureProductIsometryOutput"
        assert inst.norm_kind == "trace"
        assert inst.alpha == 0.0
        assert inst.beta == pytest.approx(2 * math.sqrt(1 - 0.5))
        assert inst.cut.groups[0] == (0,)

    def test_yes_instance_product_output(self):
        # feed the garbage image of an equal-witness accepting run: the
        # reduction output must be product across the A : rest cut
        rng = np.random.default_rng(3)
        v = equality_verifier(1)
        a = random_pure(RegisterLayout((2,)), rng)
        vec = np.kron(np.kron(a.vector, a.vector), [1, 0])
        accepted = v.run_pure(PureState(vec, RegisterLayout((2, 2, 2))))
        # outputs (W, A0, B0); the decision (W) reads |1> with certainty here
        g_in = accepted.vector.reshape(2, 4)[1, :]
        g_in = g_in / np.linalg.norm(g_in)
        inst = reduce_qma2(v, n=1, d_label="W")
        out = inst.circuit.run_pure(PureState(g_in, inst.circuit.input_layout()))
        _, overlap = nearest_pure_product(out, inst.cut, restarts=8, seed=4)
        assert overlap >= 1.0 - 1e-9

    def test_projector_split_reconstructs(self):
        inst = reduce_qma2(equality_verifier(1), n=1, d_label="W")
        rng = np.random.default_rng(5)
        psi = random_pure(inst.circuit.input_layout(), rng)
        out = inst.circuit.run_pure(psi)
        labels = list(out.layout.labels)
        w_axis = labels.index("W")
        dims = list(out.layout.dims)
        p0 = np.zeros((2, 2))
        p0[0, 0] = 1.0
        part0 = la.apply_to_vector(p0, out.vector, dims, [w_axis])
        part1 = la.apply_to_vector(np.eye(2) - p0, out.vector, dims, [w_axis])
        assert np.max(np.abs(part0 + part1 - out.vector)) < 1e-12

    def test_no_instance_overlap_ceiling(self):
        # the identity verifier never accepts (the workspace never returns
        # to |0>), so the entangling swap fires on every branch and outputs
        # stay far from product for every input
        never = Circuit(
            inputs=(Register("A0", 2), Register("B0", 2), Register("W", 2)),
            gates=(),
            outputs=("W", "A0", "B0"),
        )
        n = 2
        inst = reduce_qma2(never, n=n, d_label="W")
        rng = np.random.default_rng(6)
        ceiling = (math.sqrt(0.0) + 2.0 ** (-n / 2)) ** 2
        for _ in range(16):
            out = inst.circuit.run_pure(random_pure(inst.circuit.input_layout(), rng))
            _, overlap = nearest_pure_product(out, inst.cut, restarts=6, seed=7)
            assert overlap <= ceiling + 1e-6


class TestCorrelationReduction:
    def test_correlated_output(self):
        inst = reduce_qszk(PREP0, PREP1, 1)
        omega = inst.circuit.run_mixed()
        assert np.max(np.abs(omega.matrix - 0.5 * np.diag([1, 0, 0, 1.0]))) < 1e-12
        assert np.trace(omega.matrix).real == pytest.approx(1.0)

    def test_equal_preps_give_product(self):
        inst = reduce_qszk(PREP0, PREP0, 1)
        omega = inst.circuit.run_mixed()
        expect = np.kron(np.eye(2) / 2, np.diag([1.0, 0]))
        assert np.max(np.abs(omega.matrix - expect)) < 1e-12

    def test_n_copies_factorize(self):
        inst1 = reduce_qszk(PREP0, PREP1, 1)
        inst2 = reduce_qszk(PREP0, PREP1, 2)
        w1 = inst1.circuit.run_mixed().matrix
        w2 = inst2.circuit.run_mixed().matrix
        expect = la.permute_matrix(np.kron(w1, w1), [2, 2, 2, 2], [0, 2, 1, 3])
        assert np.max(np.abs(w2 - expect)) < 1e-12

    def test_promise_parameters(self):
        inst = reduce_qszk(PREP0, PREP1, 2, delta=0.1)
        assert inst.alpha == pytest.approx(0.1)
        assert inst.beta == pytest.approx(0.45)

    def test_dimension_mismatch_rejected(self):
        fat = Circuit(inputs=(), ancillas=(Register("S0", 2), Register("S1", 2)), gates=())
        with pytest.raises(ValueError):
            reduce_qszk(PREP0, fat, 1)


class TestProductToSimilarity:
    def test_product_prep_distance_zero(self):
        prep = Circuit(
            inputs=(),
            ancillas=(Register("X0", 2), Register("X1", 2)),
            gates=(Gate("H", ("X0",)),),
        )
        c0, c1 = product_to_similarity(prep, Cut(((0,), (1,))))
        assert trace_norm(c0.run_mixed().matrix - c1.run_mixed().matrix) <= 1e-9

    def test_correlated_distance_one(self):
        inst = reduce_qszk(PREP0, PREP1, 1)
        c0, c1 = product_to_similarity(inst.circuit, inst.cut)
        assert trace_norm(c0.run_mixed().matrix - c1.run_mixed().matrix) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("l", [2, 3])
    def test_reduced_product_lemma(self, l):
        # plant a state alpha-close to a known product; the product of its
        # marginals is then within (l+1) alpha
        rng = np.random.default_rng(40 + l)
        dims = (2,) * l
        product = la.kron_all([la.random_density(2, rng) for _ in range(l)])
        noise = la.random_density(2**l, rng)
        for s in (0.0, 0.02, 0.1):
            rho = (1 - s) * product + s * noise
            alpha = trace_norm(rho - product)
            marginals = []
            for i in range(l):
                marginals.append(la.partial_trace_matrix(rho, list(dims), [i]))
            dist = trace_norm(rho - la.kron_all(marginals))
            assert dist <= (l + 1) * alpha + 1e-7


class TestPureFromSeparable:
    def test_exact_pure_product(self):
        rng = np.random.default_rng(8)
        ens = random_product_ensemble((2, 2), 1, rng)
        u = Circuit(inputs=(Register("q0", 2), Register("q1", 2)), gates=())
        rho = DensityMatrix(ens.state_matrix(), RegisterLayout((2, 2)))
        psi, product, dist = pure_from_separable(u, rho, ens, 0.0)
        assert dist <= 1e-9

    @pytest.mark.parametrize("seed", range(4))
    def test_planted_bound(self, seed):
        rng = np.random.default_rng(50 + seed)
        ens = random_product_ensemble((2, 2), 4, rng)
        sigma = ens.state_matrix()
        umat = la.random_unitary(4, rng)
        u = Circuit(inputs=(Register("q0", 2), Register("q1", 2)), gates=(Gate("U", ("q0", "q1"), matrix=umat),))
        s = 0.002
        mixed = (1 - s) * sigma + s * np.eye(4) / 4
        delta = trace_norm(mixed - sigma)
        rho = DensityMatrix(umat.conj().T @ mixed @ umat, RegisterLayout((2, 2)))
        psi, product, dist = pure_from_separable(u, rho, ens, delta)
        assert dist <= 4 * math.sqrt(delta) + 1e-7
        # the reported distance is really achieved by the returned pair
        out = u.run_pure(psi)
        achieved = 2 * math.sqrt(max(0.0, 1 - abs(np.vdot(product.vector, out.vector)) ** 2))
        assert achieved == pytest.approx(dist, abs=1e-9)

    def test_precondition_enforced(self):
        rng = np.random.default_rng(9)
        ens = random_product_ensemble((2, 2), 3, rng)
        u = Circuit(inputs=(Register("q0", 2), Register("q1", 2)), gates=())
        rho = DensityMatrix(np.eye(4) / 4, RegisterLayout((2, 2)))
        with pytest.raises(ValueError):
            pure_from_separable(u, rho, ens, 0.0)

    def test_equivalence_roundtrip(self):
        # yes-instances of the separable-output problem at distance alpha map
        # to yes-instances of the pure-product-output problem at 4 sqrt(alpha)
        rng = np.random.default_rng(10)
        ens = random_product_ensemble((2, 2), 3, rng)
        sigma = ens.state_matrix()
        umat = la.random_unitary(4, rng)
        u = Circuit(inputs=(Register("q0", 2), Register("q1", 2)), gates=(Gate("U", ("q0", "q1"), matrix=umat),))
        s = 0.004
        mixed = (1 - s) * sigma + s * la.random_density(4, rng)
        alpha = trace_norm(mixed - sigma)
        rho = DensityMatrix(umat.conj().T @ mixed @ umat, RegisterLayout((2, 2)))
        psi, product, dist = pure_from_separable(u, rho, ens, alpha)
        out = u.run_pure(psi)
        _, best = nearest_pure_product(out, Cut(((0,), (1,))), restarts=6, seed=11)
        assert 2 * math.sqrt(max(0.0, 1 - best)) <= 4 * math.sqrt(alpha) + 1e-7


class TestInverseGates:
    def test_inverse_circuit_is_inverse(self):
        rng = np.random.default_rng(12)
        c = Circuit(
            inputs=(Register("a", 2), Register("b", 2), Register("w", 6)),
            gates=(
                Gate("H", ("a",)),
                Gate("S", ("b",)),
                Gate("QFT", ("w",)),
                Gate("CNOT", ("a", "b")),
                Gate("T", ("a",), control=("w", "neq0")),
            ),
        )
        inv = Circuit(inputs=c.inputs, gates=inverse_gates(c))
        u = c.unitary()
        v = inv.unitary()
        assert np.max(np.abs(v @ u - np.eye(u.shape[0]))) < 1e-9


class TestExtractionConvexity:
    def test_best_index_beats_ensemble_average(self):
        # the selected component can only improve on the weighted average
        # the triangle bound controls
        rng = np.random.default_rng(70)
        ens = random_product_ensemble((2, 2), 4, rng)
        sigma = ens.state_matrix()
        u = Circuit(inputs=(Register("q0", 2), Register("q1", 2)), gates=())
        s = 0.01
        mixed = (1 - s) * sigma + s * la.random_density(4, rng)
        delta = trace_norm(mixed - sigma)
        rho = DensityMatrix(mixed, RegisterLayout((2, 2)))
        psi, product, dist = pure_from_separable(u, rho, ens, delta)
        # recompute every component distance and its ensemble average
        v = u.isometry()
        vals, vecs = la.eigh_clipped(rho.matrix)
        support = np.where(vals > 1e-14)[0]
        a_mat = (v @ vecs[:, support]) * np.sqrt(vals[support])
        zeta = np.stack([np.sqrt(w) * ens.element_vector(z) for z, w in enumerate(ens.weights)], axis=1)
        m = zeta.conj().T @ a_mat
        uu, _, vv = np.linalg.svd(m, full_matrices=True)
        y = uu[:, : m.shape[1]] @ vv
        w_mat = a_mat @ y.conj().T
        avg = 0.0
        for z in range(ens.size):
            col = w_mat[:, z]
            q = float(np.real(col.conj() @ col))
            if q < 1e-14:
                avg += ens.weights[z] * 2.0
                continue
            out_vec = col / math.sqrt(q)
            avg += ens.weights[z] * 2 * math.sqrt(
                max(0.0, 1 - abs(np.vdot(ens.element_vector(z), out_vec)) ** 2)
            )
        assert dist <= avg + 1e-9
        assert avg <= 4 * math.sqrt(delta) + 1e-7
