"""Constructive reductions between decision families and separability tests.

Every builder emits a circuit plus machine-checkable promise metadata
(cut, norm kind, promise bounds).  Toy decision families stand in for the
real machine classes at desk scale: always-accept, always-reject,
accept-iff-all-ones, and the equality (swap-test) verifier.

Decision-qubit convention: accept is basis state |1>, reject is |0>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _linalg as la
from .circuits import Circuit, Gate, Register
from .locc import locc_sep_bound, max_entangled_trace_gap
from .states import Cut, DensityMatrix, PureState, RegisterLayout, trace_norm
from .separability import ProductEnsemble

PROBLEM_TAGS = (
    "PureProductState",
    "SeparableIsometryOutput",
    "PureProductIsometryOutput",
    "ProductIsometryOutput",
    "ProductState",
    "SeparableState",
    "QuantumStateSimilarity",
)


@dataclass(frozen=True)
class PromiseInstance:
    """A circuit with its promise: yes-instances sit within alpha of the
    target set in trace norm, no-instances at least beta away in the
    declared norm."""

    circuit: Circuit
    cut: Cut
    norm_kind: str  # "trace" | "one_way_locc"
    alpha: float
    beta: float
    tag: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in PROBLEM_TAGS:
            raise ValueError(f"unknown problem tag {self.tag!r}")
        if self.norm_kind not in ("trace", "one_way_locc"):
            raise ValueError("norm kind must be 'trace' or 'one_way_locc'")
        if not (0.0 <= self.alpha < self.beta <= 2.0 + 1e-12):
            raise ValueError(
                f"promise bounds must satisfy 0 <= alpha < beta <= 2, got ({self.alpha}, {self.beta})"
            )


def no_instance_gap_forms(n: int, delta: float) -> dict[str, float]:
    """The three candidate no-instance gaps for the entangling reductions;
    the certified paired-Pauli LOCC form is the one enforced."""
    slack = 2.0 * math.sqrt(delta)
    return {
        "locc": locc_sep_bound(n) - slack,
        "trace_fidelity": max_entangled_trace_gap(n) - slack,
        "recorded": 2.0 - 2.0 ** (2 - n / 2) - slack,
    }


# -- toy decision families ---------------------------------------------------


def _rotation_to_one(delta: float) -> np.ndarray:
    """Unitary sending |0> to sqrt(delta)|0> + sqrt(1-delta)|1>."""
    c, s = math.sqrt(delta), math.sqrt(1.0 - delta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def toy_prep(kind: str, delta: float = 0.0, garbage: int = 1) -> Circuit:
    """State-prep circuit on (D, G1..Gg) for the zero input.

    kind 'accept' leaves the decision qubit within delta of |1>, 'reject'
    within delta of |0>.
    """
    regs = (Register("D", 2),) + tuple(Register(f"G{i}", 2) for i in range(garbage))
    gates: list[Gate] = []
    if kind == "accept":
        gates.append(Gate("U", ("D",), matrix=_rotation_to_one(delta)))
    elif kind == "reject":
        if delta:
            gates.append(Gate("U", ("D",), matrix=_rotation_to_one(1.0 - delta)))
    else:
        raise ValueError("kind must be 'accept' or 'reject'")
    return Circuit(inputs=regs, gates=tuple(gates))


def toy_verifier(kind: str, p_qubits: int = 1, delta: float = 0.0) -> Circuit:
    """Isometric verifier P -> D G with the decision qubit first.

    kinds: 'accept' / 'reject' ignore the witness; 'all-ones' accepts
    exactly the |1..1> witness (up to delta of noise on the decision).
    """
    p_regs = tuple(Register(f"P{i}", 2) for i in range(p_qubits))
    d = Register("D", 2)
    gates: list[Gate] = []
    if kind in ("accept", "reject"):
        gates.append(
            Gate("U", ("D",), matrix=_rotation_to_one(delta if kind == "accept" else 1.0 - delta))
        )
    elif kind == "all-ones":
        dim = 2 ** (p_qubits + 1)
        mat = np.zeros((dim, dim), dtype=complex)
        for x in range(2**p_qubits):
            hit = 1 if x == 2**p_qubits - 1 else 0
            # |x>|b> -> |x>|b xor hit>
            for b in (0, 1):
                mat[x * 2 + (b ^ hit), x * 2 + b] = 1.0
        gates.append(Gate("U", tuple(f"P{i}" for i in range(p_qubits)) + ("D",), matrix=mat))
        if delta:
            gates.append(Gate("U", ("D",), matrix=_rotation_to_one_mix(delta)))
    else:
        raise ValueError("kind must be 'accept', 'reject', or 'all-ones'")
    return Circuit(
        inputs=p_regs,
        ancillas=(d,),
        gates=tuple(gates),
        outputs=("D",) + tuple(r.label for r in p_regs),
    )


def _rotation_to_one_mix(delta: float) -> np.ndarray:
    theta = math.asin(math.sqrt(delta))
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def equality_verifier(n_each: int = 1) -> Circuit:
    """Two-witness unitary verifier accepting when the witnesses pass a swap
    test.  Registers A*, B* hold the witnesses and W the workspace qubit;
    after the gates W doubles as the decision qubit (|1> accepts)."""
    a = tuple(Register(f"A{i}", 2) for i in range(n_each))
    b = tuple(Register(f"B{i}", 2) for i in range(n_each))
    w = Register("W", 2)
    gates: list[Gate] = [Gate("H", ("W",))]
    for i in range(n_each):
        gates.append(Gate("SWAP", (f"A{i}", f"B{i}"), control=("W", "neq0")))
    gates.append(Gate("H", ("W",)))
    gates.append(Gate("X", ("W",)))
    return Circuit(
        inputs=a + b + (w,),
        gates=tuple(gates),
        outputs=("W",) + tuple(r.label for r in a + b),
    )


# -- the entangling reductions ----------------------------------------------


def _wrap_prep_as_verifier(prep: Circuit) -> Circuit:
    """View a state-prep circuit as an isometric verifier with a trivial
    (dimension-1) witness register."""
    return Circuit(
        inputs=(Register("P", 1),),
        ancillas=prep.registers,
        gates=prep.gates,
        outputs=prep.outputs + ("P",),
    )


def _build_entangling_reduction(verifier: Circuit, n: int, delta: float, tag: str) -> PromiseInstance:
    if verifier.mode == "mixed":
        raise ValueError("verifier must be unitary or isometric")
    if "D" not in verifier.outputs:
        raise ValueError("verifier must designate a decision qubit labelled 'D'")
    if verifier.dim_of("D") != 2:
        raise ValueError("the decision register must be a qubit")
    a = tuple(Register(f"A{i}", 2) for i in range(1, n + 1))
    ap = tuple(Register(f"Ap{i}", 2) for i in range(1, n + 1))
    b = tuple(Register(f"B{i}", 2) for i in range(1, n + 1))
    gates = list(verifier.gates)
    for i in range(1, n + 1):
        gates.append(Gate("H", (f"A{i}",)))
        gates.append(Gate("CNOT", (f"A{i}", f"Ap{i}")))
    for i in range(1, n + 1):
        # swap the entangled halves out when the decision qubit rejects
        gates.append(Gate("SWAP", (f"Ap{i}", f"B{i}"), control=("D", "eq0")))
    garbage = tuple(l for l in verifier.outputs if l != "D")
    outputs = tuple(r.label for r in a + ap + b) + ("D",) + garbage
    circuit = Circuit(
        inputs=verifier.inputs,
        ancillas=verifier.ancillas + a + ap + b,
        gates=tuple(gates),
        outputs=outputs,
    )
    cut = Cut((tuple(range(2 * n)), tuple(range(2 * n, len(outputs)))))
    forms = no_instance_gap_forms(n, delta)
    return PromiseInstance(
        circuit=circuit,
        cut=cut,
        norm_kind="one_way_locc",
        alpha=2.0 * math.sqrt(delta),
        beta=forms["locc"],
        tag=tag,
        meta={"n": n, "delta": delta, "beta_forms": forms},
    )


def reduce_bqp(prep: Circuit, n: int, delta: float = 0.0) -> PromiseInstance:
    """State-prep reduction: entangled halves on AA', zeros on B, the
    prepared decision state on DG, then a reject-controlled swap of A' and
    B.  Accepting preps give near-product outputs across AA':BDG; rejecting
    preps leave the AB marginal maximally entangled."""
    return _build_entangling_reduction(_wrap_prep_as_verifier(prep), n, delta, "PureProductState")


def reduce_qma(verifier: Circuit, n: int, delta: float = 0.0) -> PromiseInstance:
    """Isometry reduction: same construction with the witness register P
    feeding the verifier first.  A trivial P degenerates to reduce_bqp."""
    return _build_entangling_reduction(verifier, n, delta, "SeparableIsometryOutput")


# -- inverse-verifier reduction ----------------------------------------------


def _invert_gate(gate: Gate, circuit: Circuit) -> Gate:
    if gate.kind in ("X", "Y", "Z", "H", "CNOT", "SWAP"):
        return gate
    if gate.kind == "QFT":
        return Gate("QFTDG", gate.targets, control=gate.control)
    if gate.kind == "QFTDG":
        return Gate("QFT", gate.targets, control=gate.control)
    if gate.kind == "U":
        return Gate("U", gate.targets, control=gate.control, matrix=gate.matrix.conj().T)
    # S, T, PERM: materialize the local matrix and dagger it
    mat, on = circuit._local_unitary(gate)
    return Gate("U", tuple(on), matrix=mat.conj().T)


def inverse_gates(circuit: Circuit) -> tuple[Gate, ...]:
    return tuple(_invert_gate(g, circuit) for g in reversed(circuit.gates))


def reduce_qma2(
    verifier: Circuit,
    n: int,
    delta: float = 0.0,
    a_labels=None,
    b_labels=None,
    w_label: str = "W",
    d_label: str | None = None,
) -> PromiseInstance:
    """Two-witness reduction: prep the decision register on accept, run the
    inverse verifier to recover the (A, B, W) roles, prep entangled pairs on
    CC', and swap the A side with C whenever W is orthogonal to |0>.

    The verifier is a unitary circuit whose registers play the roles A*
    (first witness), B* (second witness) and W (workspace fed |0>); after
    its gates the register named by d_label holds the decision qubit
    (default: the first output).  The A side is padded with zero qubits up
    to n pairs.
    """
    if verifier.mode != "unitary":
        raise ValueError("verifier must be a unitary circuit")
    labels = [r.label for r in verifier.registers]
    a_labels = list(a_labels) if a_labels is not None else [l for l in labels if l.startswith("A")]
    b_labels = list(b_labels) if b_labels is not None else [l for l in labels if l.startswith("B")]
    if w_label not in labels:
        raise ValueError("verifier needs a workspace register (default label 'W')")
    if not a_labels or not b_labels:
        raise ValueError("verifier needs witness registers for both the A and B roles")
    d_label = d_label or verifier.outputs[0]
    if verifier.dim_of(d_label) != 2:
        raise ValueError("the decision register must be a qubit")
    a_qubits = len(a_labels)
    if n < a_qubits:
        raise ValueError("need at least as many entangled pairs as A qubits")
    if any(verifier.dim_of(l) != 2 for l in a_labels):
        raise ValueError("the A side must consist of qubits")
    pads = tuple(Register(f"Apad{i}", 2) for i in range(n - a_qubits))
    c = tuple(Register(f"C{i}", 2) for i in range(1, n + 1))
    cp = tuple(Register(f"Cp{i}", 2) for i in range(1, n + 1))
    # U's input is the verifier's garbage output; the decision register is
    # re-prepped to |yes> as an ancilla and the inverse circuit rebuilds ABW.
    g_labels = [l for l in verifier.outputs if l != d_label]
    inputs = tuple(Register(l, verifier.dim_of(l)) for l in g_labels)
    gates: list[Gate] = [Gate("X", (d_label,))]
    gates.extend(inverse_gates(verifier))
    for i in range(1, n + 1):
        gates.append(Gate("H", (f"C{i}",)))
        gates.append(Gate("CNOT", (f"C{i}", f"Cp{i}")))
    a_side = list(a_labels) + [p.label for p in pads]
    for i in range(1, n + 1):
        gates.append(Gate("SWAP", (a_side[i - 1], f"C{i}"), control=(w_label, "neq0")))
    rest = [l for l in labels if l not in a_side and l != w_label]
    outputs = tuple(a_side) + tuple(rest) + tuple(r.label for r in c + cp) + (w_label,)
    circuit = Circuit(
        inputs=inputs,
        ancillas=(Register(d_label, 2),) + pads + c + cp,
        gates=tuple(gates),
        outputs=outputs,
    )
    cut = Cut((tuple(range(n)), tuple(range(n, len(outputs)))))
    beta = 2.0 * math.sqrt(max(0.0, 1.0 - (math.sqrt(delta) + 2.0 ** (-n / 2)) ** 2))
    alpha = 2.0 * math.sqrt(delta)
    return PromiseInstance(
        circuit=circuit,
        cut=cut,
        norm_kind="trace",
        alpha=alpha,
        beta=beta,
        tag="PureProductIsometryOutput",
        meta={"n": n, "delta": delta, "a_side": a_side, "w_label": w_label},
    )


# -- correlation reduction ----------------------------------------------------


def _relabel_circuit(c: Circuit, suffix: str) -> Circuit:
    def r(reg: Register) -> Register:
        return Register(reg.label + suffix, reg.dim)

    def g(gate: Gate) -> Gate:
        ctl = (gate.control[0] + suffix, gate.control[1]) if gate.control else None
        return Gate(gate.kind, tuple(t + suffix for t in gate.targets), control=ctl, matrix=gate.matrix)

    return Circuit(
        inputs=tuple(r(x) for x in c.inputs),
        ancillas=tuple(r(x) for x in c.ancillas),
        gates=tuple(g(x) for x in c.gates),
        outputs=tuple(l + suffix for l in c.outputs),
        discard=tuple(l + suffix for l in c.discard),
    )


def _controlled_clone(gate: Gate, base: Circuit, suffix: str, control: tuple[str, str]) -> Gate:
    """Clone a prep gate with an added outer control (materializing the gate
    when it already carries its own control)."""
    if gate.control is None:
        return Gate(
            gate.kind,
            tuple(t + suffix for t in gate.targets),
            control=control,
            matrix=gate.matrix,
        )
    mat, on = base._local_unitary(gate)
    return Gate("U", tuple(l + suffix for l in on), control=control, matrix=mat)


def reduce_qszk(prep0: Circuit, prep1: Circuit, n: int, delta: float = 0.0) -> PromiseInstance:
    """Similarity-to-correlation reduction: per copy, a coin qubit A in |+>
    is copied to a discarded twin (dephasing it) and selects which of the
    two preps runs on S; the output is n copies of the A:S-correlated state.
    """
    if prep0.output_layout().dims != prep1.output_layout().dims:
        raise ValueError("the two preps must produce states of one dimension")
    inputs: list[Register] = []
    ancillas: list[Register] = []
    gates: list[Gate] = []
    outputs_a: list[str] = []
    outputs_s: list[str] = []
    discard: list[str] = []
    for j in range(1, n + 1):
        sfx = f"_c{j}"
        aj, atj = Register(f"A{j}", 2), Register(f"At{j}", 2)
        ancillas.extend([aj, atj])
        gates.append(Gate("H", (aj.label,)))
        gates.append(Gate("CNOT", (aj.label, atj.label)))
        # both preps' registers ride along; the coin selects which one is live
        for c, pred, tag in ((prep0, "eq0", "p0"), (prep1, "neq0", "p1")):
            csfx = sfx + tag
            ancillas.extend(Register(r.label + csfx, r.dim) for r in c.registers)
            for gate in c.gates:
                gates.append(_controlled_clone(gate, c, csfx, (aj.label, pred)))
        # route the selected prep's output into the S registers via
        # coin-controlled swaps with a fresh S block
        for idx, out in enumerate(prep0.outputs):
            s = Register(f"S{j}_{idx}", prep0.dim_of(out))
            ancillas.append(s)
            gates.append(Gate("SWAP", (out + sfx + "p0", s.label), control=(aj.label, "eq0")))
            gates.append(
                Gate("SWAP", (prep1.outputs[idx] + sfx + "p1", s.label), control=(aj.label, "neq0"))
            )
            outputs_s.append(s.label)
        outputs_a.append(aj.label)
        discard.append(atj.label)
        discard.extend(r.label + sfx + "p0" for r in prep0.registers)
        discard.extend(r.label + sfx + "p1" for r in prep1.registers)
    circuit = Circuit(
        inputs=tuple(inputs),
        ancillas=tuple(ancillas),
        gates=tuple(gates),
        outputs=tuple(outputs_a + outputs_s),
        discard=tuple(discard),
    )
    cut = Cut((tuple(range(n)), tuple(range(n, n + len(outputs_s)))))
    return PromiseInstance(
        circuit=circuit,
        cut=cut,
        norm_kind="trace",
        alpha=n * delta / 2.0,
        beta=(1.0 - delta) / 2.0,
        tag="ProductState",
        meta={"n": n, "delta": delta, "beta_asymptotic": "2 - 2^(-Omega(n)), constant unspecified"},
    )


def product_to_similarity(prep: Circuit, cut: Cut) -> tuple[Circuit, Circuit]:
    """Reduce 'is the prepared state product across the cut' to 'are these
    two prepared states similar': the pair is (the state itself, the product
    of its marginals built from l relabelled copies with complementary
    discards)."""
    out_layout = prep.output_layout()
    cut.validate(out_layout)
    l = cut.n_parties
    copies = [_relabel_circuit(prep, f"_m{i}") for i in range(l)]
    inputs: list[Register] = []
    ancillas: list[Register] = []
    gates: list[Gate] = []
    outputs: list[str] = []
    discard: list[str] = []
    for i, c in enumerate(copies):
        inputs.extend(c.inputs)
        ancillas.extend(c.ancillas)
        gates.extend(c.gates)
        keep = {c.outputs[r] for r in cut.groups[i]}
        outputs.extend(c.outputs[r] for r in cut.groups[i])
        discard.extend(lbl for lbl in (c.outputs + c.discard) if lbl not in keep)
    marginals = Circuit(
        inputs=tuple(inputs),
        ancillas=tuple(ancillas),
        gates=tuple(gates),
        outputs=tuple(outputs),
        discard=tuple(discard),
    )
    return prep, marginals


# -- separable output to pure product input -----------------------------------


def pure_from_separable(
    u: Circuit | np.ndarray,
    rho: DensityMatrix,
    ens: ProductEnsemble,
    delta: float,
) -> tuple[PureState, PureState, float]:
    """Given an input rho whose image under the isometry is delta-close to
    the ensemble state, produce a pure input whose image is 4 sqrt(delta)-
    close to a pure product state.

    Construction: purify the ensemble state over an index register, align a
    purification of rho against it (polar step), dephase the index, and keep
    the best index.  Returns (pure input, its product target, achieved
    distance on the output side).
    """
    v = u.isometry() if isinstance(u, Circuit) else np.asarray(u, dtype=complex)
    d_out, d_in = v.shape
    if rho.dim != d_in:
        raise ValueError("input state does not match the isometry")
    sigma = ens.state_matrix()
    image = v @ rho.matrix @ v.conj().T
    achieved = trace_norm(image - sigma)
    if achieved > delta + 1e-6:
        raise ValueError(f"precondition violated: image is {achieved:.3g}-far from the ensemble state")
    nz = ens.size
    # purification of sigma over the index register R (order: A then R)
    zeta = np.zeros((d_out, nz), dtype=complex)
    for z in range(nz):
        zeta[:, z] = math.sqrt(ens.weights[z]) * ens.element_vector(z)
    # purification of rho (order: S then R0)
    vals, vecs = la.eigh_clipped(rho.matrix)
    support = np.where(vals > 1e-14)[0]
    r0 = len(support)
    a_mat = (v @ vecs[:, support]) * np.sqrt(vals[support])  # d_out x r0, purifies the image
    r_dim = max(nz, r0)
    if r_dim > nz:
        zeta = np.hstack([zeta, np.zeros((d_out, r_dim - nz), dtype=complex)])
    m = zeta.conj().T @ a_mat  # r_dim x r0
    uu, _, vv = np.linalg.svd(m)
    y = uu[:, :r0] @ vv  # isometry R0 -> R
    w_mat = a_mat @ y.conj().T  # d_out x r_dim, the aligned purification
    best = None
    for z in range(nz):
        if ens.weights[z] < 1e-14:
            continue
        col = w_mat[:, z]
        q = float(np.real(col.conj() @ col))
        if q < 1e-14:
            continue
        out_vec = col / math.sqrt(q)
        dist = 2.0 * math.sqrt(max(0.0, 1.0 - abs(np.vdot(ens.element_vector(z), out_vec)) ** 2))
        if best is None or dist < best[0]:
            best = (dist, z, out_vec)
    if best is None:
        raise ValueError("alignment produced no usable index component")
    dist, z, out_vec = best
    psi_in = v.conj().T @ out_vec
    psi_in = psi_in / np.linalg.norm(psi_in)
    in_layout = u.input_layout() if isinstance(u, Circuit) else RegisterLayout((d_in,))
    psi = PureState(psi_in, in_layout)
    product = PureState(ens.element_vector(z), RegisterLayout(ens.party_dims))
    return psi, product, dist
