"""Swap, permutation and product tests.

Each test has two faces: an analytic one (contract the state against
symmetric-subspace projectors) and a circuit one (index-register + Fourier
transform + controlled permutation).  They agree to solver precision and the
test suite holds them to that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from . import _linalg as la
from .circuits import Circuit, Gate, Register, controlled_permutation
from .states import Cut, DensityMatrix, PureState, RegisterLayout


@dataclass(frozen=True)
class SymmetricProjector:
    """Projector onto the symmetric subspace of k equal registers."""

    registers: tuple[int, ...]
    matrix: np.ndarray

    @property
    def rank(self) -> int:
        return round(np.trace(self.matrix).real)


def symmetric_projector(k: int, d: int) -> np.ndarray:
    """Average of the k! permutation operators on k d-dimensional registers."""
    if k < 1:
        raise ValueError("need at least one register")
    out = np.zeros((d**k, d**k))
    for perm in permutations(range(k)):
        out += la.permutation_operator(d, k, perm)
    return out / math.factorial(k)


def symmetric_projector_on(dims, regs) -> SymmetricProjector:
    """Symmetric projector embedded in the full space, acting on `regs`."""
    regs = tuple(regs)
    d = dims[regs[0]]
    if any(dims[r] != d for r in regs):
        raise ValueError("registers under a permutation test must share one dimension")
    proj = symmetric_projector(len(regs), d)
    return SymmetricProjector(regs, la.embed_operator(proj, list(dims), list(regs)))


def swap_test_prob(psi: PureState, phi: PureState) -> float:
    """Pass probability 1/2 + |<psi|phi>|^2 / 2."""
    if psi.dim != phi.dim:
        raise ValueError("dimension mismatch")
    return 0.5 + 0.5 * float(abs(np.vdot(psi.vector, phi.vector)) ** 2)


def permutation_test_prob(rho: DensityMatrix, regs) -> tuple[float, DensityMatrix | None]:
    """Weight of the state on the symmetric subspace of `regs`, and the
    post-test state (None when the pass probability vanishes)."""
    proj = symmetric_projector_on(rho.layout.dims, regs).matrix
    prob = float(np.trace(proj @ rho.matrix).real)
    prob = min(max(prob, 0.0), 1.0)
    if prob <= 1e-12:
        return prob, None
    post = proj @ rho.matrix @ proj / prob
    return prob, DensityMatrix(post, rho.layout)


def permutation_test_circuit(k: int, d: int) -> Circuit:
    """Index register of dimension k!, Fourier, controlled permutation,
    inverse Fourier; accept when the index register reads all zeros."""
    if k < 2:
        raise ValueError("permutation test needs at least two registers")
    from .states import dim_caps

    if math.factorial(k) * d**k > dim_caps()[0]:
        raise ValueError(f"index register times targets ({math.factorial(k)} * {d}^{k}) exceeds the cap")
    targets = tuple(f"t{i}" for i in range(k))
    regs = tuple(Register(t, d) for t in targets)
    w = Register("w", math.factorial(k))
    gates = (
        Gate("QFT", ("w",)),
        controlled_permutation(targets, "w"),
        Gate("QFTDG", ("w",)),
    )
    return Circuit(inputs=regs, gates=gates, ancillas=(w,))


def swap_test_circuit(d: int) -> Circuit:
    """Two-register special case: the index register is a single qubit and
    the Fourier transform is a Hadamard."""
    regs = (Register("t0", d), Register("t1", d))
    w = Register("w", 2)
    gates = (
        Gate("H", ("w",)),
        Gate("SWAP", ("t0", "t1"), control=("w", "neq0")),
        Gate("H", ("w",)),
    )
    return Circuit(inputs=regs, gates=gates, ancillas=(w,))


def accept_probability(circuit: Circuit, state, flags) -> float:
    """Probability that every register in `flags` reads all zeros after the run."""
    if isinstance(state, PureState) or state is None:
        out = circuit.run_pure(state)
        dims = list(out.layout.dims)
        labels = list(out.layout.labels)
        vec = out.vector
        for f in flags:
            i = labels.index(f)
            p0 = np.zeros((dims[i], dims[i]))
            p0[0, 0] = 1.0
            vec = la.apply_to_vector(p0, vec, dims, [i])
        return float(np.real(np.vdot(vec, vec)))
    out = circuit.run_mixed(state)
    dims = list(out.layout.dims)
    labels = list(out.layout.labels)
    proj = np.array([[1.0]])
    axes = []
    for f in flags:
        i = labels.index(f)
        p0 = np.zeros((dims[i], dims[i]))
        p0[0, 0] = 1.0
        proj = np.kron(proj, p0)
        axes.append(i)
    full = la.embed_operator(proj, dims, axes)
    return float(np.trace(full @ out.matrix).real)


def permutation_test_circuit_prob(state: DensityMatrix, k: int, d: int) -> float:
    """Circuit-path acceptance for a state on k d-dimensional registers."""
    return accept_probability(permutation_test_circuit(k, d), state, ["w"])


def product_test_prob(psi: PureState, cut: Cut) -> float:
    """Probability that per-party swap tests on two copies of psi all pass:
    the contraction of psi x psi against one symmetric projector per party."""
    grouped = psi.group(cut)
    pdims = grouped.layout.dims
    l = len(pdims)
    two = np.kron(grouped.vector, grouped.vector)
    dims = list(pdims) * 2
    vec = two
    for i in range(l):
        proj = symmetric_projector(2, pdims[i])
        vec = la.apply_to_vector(proj, vec, dims, [i, l + i])
    return float(np.real(np.vdot(two, vec)))


def product_test_circuit(cut_dims) -> Circuit:
    """One swap test per party on two explicit copies; party i of the first
    copy sits in a{i}, of the second in b{i}, with ancilla qubit w{i}."""
    regs = []
    gates = []
    ancs = []
    for i, d in enumerate(cut_dims):
        regs.append(Register(f"a{i}", d))
    for i, d in enumerate(cut_dims):
        regs.append(Register(f"b{i}", d))
    for i, _ in enumerate(cut_dims):
        ancs.append(Register(f"w{i}", 2))
        gates.append(Gate("H", (f"w{i}",)))
        gates.append(Gate("SWAP", (f"a{i}", f"b{i}"), control=(f"w{i}", "neq0")))
        gates.append(Gate("H", (f"w{i}",)))
    return Circuit(inputs=tuple(regs), gates=tuple(gates), ancillas=tuple(ancs))


def product_test_circuit_prob(psi: PureState, cut: Cut) -> float:
    grouped = psi.group(cut)
    pdims = grouped.layout.dims
    circuit = product_test_circuit(pdims)
    two = PureState(np.kron(grouped.vector, grouped.vector), RegisterLayout(tuple(pdims) * 2))
    return accept_probability(circuit, two, [f"w{i}" for i in range(len(pdims))])


def product_test_band(eps: float) -> tuple[float, float]:
    """Guaranteed bracket for the product-test pass probability when the
    best squared product overlap is 1 - eps."""
    return 1.0 - 2.0 * eps, 1.0 - (11.0 / 512.0) * eps
