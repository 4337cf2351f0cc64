"""One-way LOCC distinguishability tools and the paired-Pauli singlet test.

The measured party is always the second one (B); outcomes travel one way to
the first party (A).  States under the singlet test live on 2n qubits laid
out A1..An B1..Bn, with pair i formed by registers (i, n+i).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import _linalg as la
from .states import DensityMatrix, Povm, RegisterLayout, bell_state, trace_norm

PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_BELL_ORDER = ("psi-", "phi+", "phi-", "psi+")


def bell_projectors() -> dict[str, np.ndarray]:
    out = {}
    for name in _BELL_ORDER:
        v = bell_state(name).vector
        out[name] = np.outer(v, v.conj())
    return out


@dataclass(frozen=True)
class WernerState:
    """Two-qubit state after the local-unitary twirl: weight p on the
    singlet, the rest spread uniformly over the triplet."""

    p: float

    def __post_init__(self):
        if not -1e-12 <= self.p <= 1 + 1e-12:
            raise ValueError("singlet weight must lie in [0, 1]")

    @property
    def separable(self) -> bool:
        # p = 1/2 is the exact boundary of the separable Werner family
        return self.p <= 0.5 + 1e-12

    def state(self) -> DensityMatrix:
        return werner_state(self.p)


def werner_state(p: float) -> DensityMatrix:
    proj = bell_projectors()
    mat = p * proj["psi-"] + (1 - p) / 3 * (proj["phi+"] + proj["phi-"] + proj["psi+"])
    return DensityMatrix(mat, RegisterLayout((2, 2)))


def single_qubit_cliffords() -> list[np.ndarray]:
    """The 24 single-qubit Clifford unitaries, canonical up to global phase."""
    h = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    s = np.array([[1, 0], [0, 1j]], dtype=complex)

    def canon(u):
        flat = u.reshape(-1)
        piv = flat[np.argmax(np.abs(flat) > 1e-9)]
        # + 0.0 flushes negative zeros so the byte key is unique
        return np.round(u * (abs(piv) / piv), 12) + 0.0

    group: dict[bytes, np.ndarray] = {}
    frontier = [np.eye(2, dtype=complex)]
    while frontier:
        nxt = []
        for u in frontier:
            key = canon(u).tobytes()
            if key in group:
                continue
            group[key] = canon(u)
            nxt.extend([u @ h, u @ s])
        frontier = nxt
    assert len(group) == 24
    return list(group.values())


def twirl_exact(rho: DensityMatrix) -> tuple[WernerState, DensityMatrix]:
    """Project a two-qubit state onto the Werner family.

    Averaging (U x U) rho (U x U)^dag over single-qubit unitaries preserves
    the singlet weight p = <psi-|rho|psi-> and flattens the triplet block.
    """
    if rho.layout.dims != (2, 2):
        raise ValueError("twirl expects a two-qubit state")
    psim = bell_state("psi-").vector
    p = float(np.real(psim.conj() @ rho.matrix @ psim))
    p = min(max(p, 0.0), 1.0)
    return WernerState(p), werner_state(p)


def twirl_sampled(rho: DensityMatrix, rng=None) -> DensityMatrix:
    """Average of (U x U) rho (U x U)^dag over the 24 Cliffords.

    The Clifford group is a unitary 2-design, so this equals twirl_exact;
    the rng only shuffles the summation order.
    """
    if rho.layout.dims != (2, 2):
        raise ValueError("twirl expects a two-qubit state")
    unitaries = single_qubit_cliffords()
    order = list(range(len(unitaries)))
    if rng is not None:
        rng.shuffle(order)
    acc = np.zeros((4, 4), dtype=complex)
    for i in order:
        uu = np.kron(unitaries[i], unitaries[i])
        acc += uu @ rho.matrix @ uu.conj().T
    return DensityMatrix(acc / len(unitaries), rho.layout)


def bell_dephase_weights(rho: DensityMatrix) -> dict[str, float]:
    """Bell-basis weights <B|rho|B> of a two-qubit state."""
    if rho.layout.dims != (2, 2):
        raise ValueError("expects a two-qubit state")
    return {name: float(np.trace(p @ rho.matrix).real) for name, p in bell_projectors().items()}


def pauli_test_operator() -> np.ndarray:
    """Averaged acceptance operator of one paired-Pauli test.

    For a uniformly random P in {X, Y, Z} measured on both qubits of a pair,
    'outcomes differ' is the projector (I - P x P)/2; the average over P is
    I/2 - (XX + YY + ZZ)/6, which weights the singlet 1 and the triplet 1/3.
    """
    acc = np.zeros((4, 4), dtype=complex)
    for p in PAULI.values():
        acc += (np.eye(4) - np.kron(p, p)) / 2
    return acc / 3


def _pair_layout(rho: DensityMatrix) -> int:
    dims = rho.layout.dims
    if len(dims) % 2 or any(d != 2 for d in dims):
        raise ValueError("expected 2n qubit registers: the A block then the B block")
    return len(dims) // 2


def twirl_pairs(rho: DensityMatrix) -> DensityMatrix:
    """Apply the two-qubit twirl channel to every (A_i, B_i) pair."""
    n = _pair_layout(rho)
    dims = list(rho.layout.dims)
    unitaries = single_qubit_cliffords()
    mat = rho.matrix
    for i in range(n):
        acc = np.zeros_like(mat)
        for u in unitaries:
            uu = np.kron(u, u)
            acc += la.apply_to_matrix(uu, mat, dims, [i, n + i])
        mat = acc / len(unitaries)
    return DensityMatrix(mat, rho.layout)


def _pauli_outcome_projector(names: tuple[str, ...], differ_all: bool = True) -> np.ndarray:
    """Projector onto 'all pairs give different outcomes' for Pauli choices
    P_i measured on both halves of pair i, on the A1..An B1..Bn layout."""
    n = len(names)
    dims = [2] * (2 * n)
    out = np.eye(2 ** (2 * n), dtype=complex)
    for i, name in enumerate(names):
        p = PAULI[name]
        local = (np.eye(4) - np.kron(p, p)) / 2
        out = out @ la.embed_operator(local, dims, [i, n + i])
    return out


def singlet_test_analytic(rho: DensityMatrix) -> float:
    """Exact acceptance probability of the twirl-then-paired-Pauli test.

    Twirls every pair, then averages the 'all outcome pairs differ' event
    over all 3^n Pauli choices.  No sampling; n is capped by the density
    dimension limit.
    """
    n = _pair_layout(rho)
    twirled = twirl_pairs(rho)
    total = 0.0
    for names in product("XYZ", repeat=n):
        proj = _pauli_outcome_projector(names)
        total += float(np.trace(proj @ twirled.matrix).real)
    return total / 3**n


def singlet_test_operator(n: int) -> np.ndarray:
    """Acceptance observable of the full test on the paired layout: the
    per-pair averaged operator tensored over pairs.  Twirling commutes with
    it, so Tr[op rho] reproduces singlet_test_analytic."""
    t = pauli_test_operator()
    dims = [2] * (2 * n)
    out = np.eye(2 ** (2 * n), dtype=complex)
    for i in range(n):
        out = out @ la.embed_operator(t, dims, [i, n + i])
    return out


@dataclass(frozen=True)
class SingletTestRecord:
    paulis: tuple[str, ...]
    outcomes: tuple[tuple[int, int], ...]  # (+1/-1) per (Alice, Bob) pair
    accept: bool


@dataclass(frozen=True)
class MonteCarloResult:
    frequency: float
    trials: int
    seed: int | None
    analytic: float
    records: tuple[SingletTestRecord, ...] = ()


def singlet_test_mc(
    rho: DensityMatrix,
    trials: int,
    rng=None,
    seed: int | None = None,
    keep_records: int = 10,
) -> MonteCarloResult:
    """Simulate the protocol: sample a Clifford twirl and a Pauli word per
    trial, sample all outcome pairs jointly, accept when every pair differs.
    Converges to the analytic value at the usual 1/sqrt(trials) rate."""
    if trials < 1:
        raise ValueError("need at least one trial")
    if rng is None:
        rng = np.random.default_rng(seed)
    n = _pair_layout(rho)
    dims = [2] * (2 * n)
    cliffords = single_qubit_cliffords()
    eigbases = {name: np.linalg.eigh(-p)[1] for name, p in PAULI.items()}
    # eigh of -P orders columns as (+1, -1) eigenvectors
    accepted = 0
    records = []
    for _ in range(trials):
        mat = rho.matrix
        for i in range(n):
            u = cliffords[rng.integers(len(cliffords))]
            mat = la.apply_to_matrix(np.kron(u, u), mat, dims, [i, n + i])
        names = tuple(rng.choice(("X", "Y", "Z")) for _ in range(n))
        for i, name in enumerate(names):
            basis = eigbases[name].conj().T
            mat = la.apply_to_matrix(basis, mat, dims, [i])
            mat = la.apply_to_matrix(basis, mat, dims, [n + i])
        probs = np.clip(np.diag(mat).real, 0.0, None)
        probs = probs / probs.sum()
        outcome = int(rng.choice(len(probs), p=probs))
        bits = [(outcome >> (2 * n - 1 - j)) & 1 for j in range(2 * n)]
        pairs = tuple((1 - 2 * bits[i], 1 - 2 * bits[n + i]) for i in range(n))
        accept = all(a * b == -1 for a, b in pairs)
        accepted += accept
        if len(records) < keep_records:
            records.append(SingletTestRecord(names, pairs, accept))
    return MonteCarloResult(
        frequency=accepted / trials,
        trials=trials,
        seed=seed,
        analytic=singlet_test_analytic(rho),
        records=tuple(records),
    )


def locc_sep_bound(n: int) -> float:
    """Certified one-way LOCC distance 2 (1 - (2/3)^n) between n maximally
    entangled pairs and any separable state across the A:B cut."""
    if n < 1:
        raise ValueError("n must be positive")
    return 2.0 * (1.0 - (2.0 / 3.0) ** n)


def max_entangled_trace_gap(n: int) -> float:
    """Trace-distance lower bound 2 (1 - 2^(-n/2)): the fidelity ceiling 2^-n
    for separable states pushed through the fidelity/trace inequalities."""
    if n < 1:
        raise ValueError("n must be positive")
    return 2.0 * (1.0 - 2.0 ** (-n / 2))


# -- quantum-to-classical channels and the one-way LOCC norm ----------------


@dataclass(frozen=True)
class QCChannel:
    """Measure-and-record channel: rho -> sum_m Tr(L_m rho) |m><m|."""

    povm: Povm

    @property
    def n_outcomes(self) -> int:
        return len(self.povm.elements)


def apply_qc(x: np.ndarray, dims: tuple[int, int], channel: QCChannel) -> np.ndarray:
    """(I x Lambda)(X) for X on two parties; the result is block diagonal in
    the outcome label, with blocks on the first party."""
    da, db = dims
    if x.shape != (da * db, da * db):
        raise ValueError("matrix does not match the declared party dimensions")
    if channel.povm.dim != db:
        raise ValueError("POVM dimension does not match the measured party")
    m = channel.n_outcomes
    out = np.zeros((da * m, da * m), dtype=complex)
    tensor = x.reshape(da, db, da, db)
    for idx, elem in enumerate(channel.povm.elements):
        block = np.einsum("aibj,ij->ab", tensor, elem.T)
        out[idx::m, idx::m] = block
    return out


def _qc_blocks(x: np.ndarray, dims: tuple[int, int], channel: QCChannel) -> list[np.ndarray]:
    da, db = dims
    tensor = x.reshape(da, db, da, db)
    return [np.einsum("aibj,ij->ab", tensor, e.T) for e in channel.povm.elements]


def locc_norm_lower(x: np.ndarray, dims: tuple[int, int], channel: QCChannel) -> float:
    """||(I x Lambda)(X)||_1 for this channel: a certified lower bound on the
    one-way LOCC norm of X (and never above ||X||_1)."""
    return float(sum(trace_norm(b) for b in _qc_blocks(x, dims, channel)))


def compile_pauli_channel(n: int) -> QCChannel:
    """The measured-party half of the paired-Pauli test as one channel: the
    outcome records the Pauli word and the n measurement results."""
    elems = []
    labels = []
    eigbases = {name: np.linalg.eigh(-p)[1] for name, p in PAULI.items()}
    for names in product("XYZ", repeat=n):
        vecs_per_qubit = [eigbases[nm] for nm in names]
        for bits in product((0, 1), repeat=n):
            v = la.kron_all([vecs_per_qubit[i][:, bits[i]].reshape(-1, 1) for i in range(n)]).reshape(-1)
            elems.append(np.outer(v, v.conj()) / 3**n)
            labels.append((names, bits))
    return QCChannel(Povm(tuple(elems), tuple(labels)))


# -- heuristic multipartite estimate ----------------------------------------


def _sign_matrix(b: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(la.hermitize(b))
    signs = np.where(vals >= 0, 1.0, -1.0)
    return (vecs * signs) @ vecs.conj().T


def _random_two_outcome_povm(d: int, rng) -> list[np.ndarray]:
    u = la.random_unitary(d, rng)
    cols = u[:, : max(1, d // 2)]
    p = cols @ cols.conj().T
    return [p, np.eye(d) - p]


def _estimate_value(x: np.ndarray, pdims, povms) -> float:
    """Sum of block 1-norms after measuring parties 2..l."""
    l = len(pdims)
    total = 0.0
    for combo in product(*[range(len(p)) for p in povms]):
        op = la.kron_all([np.eye(pdims[0])] + [povms[j][combo[j]] for j in range(l - 1)])
        contracted = op @ x
        block = la.partial_trace_matrix(contracted, list(pdims), [0])
        total += trace_norm(block)
    return total


def locc_norm_estimate(
    x: np.ndarray,
    party_dims,
    restarts: int = 8,
    iters: int = 40,
    seed: int | None = None,
) -> tuple[float, dict]:
    """Seesaw lower bound on the multiparty one-way LOCC norm of X.

    Parties 2..l hold seeded random projective measurements that are then
    refined one party at a time: with the others fixed and the block sign
    operators frozen, the best two-outcome refinement is exact and richer
    updates are accepted only when the true objective improves, so the
    reported value is monotone over iterations.  Heuristic: a certified
    lower bound, not the norm itself.
    """
    pdims = tuple(int(d) for d in party_dims)
    if len(pdims) < 2:
        raise ValueError("need at least two parties")
    l = len(pdims)
    rng = np.random.default_rng(seed)
    best = 0.0
    best_meta = {"restarts": restarts, "iters": iters, "seed": seed}
    for r in range(restarts):
        povms = [_random_two_outcome_povm(pdims[j + 1], rng) for j in range(l - 1)]
        value = _estimate_value(x, pdims, povms)
        for _ in range(iters):
            improved = False
            for j in range(l - 1):
                cand = _improve_party(x, pdims, povms, j)
                if cand is None:
                    continue
                trial = povms.copy()
                trial[j] = cand
                trial_value = _estimate_value(x, pdims, trial)
                if trial_value > value + 1e-12:
                    povms, value = trial, trial_value
                    improved = True
            if not improved:
                break
        if value > best:
            best = value
            best_meta["best_restart"] = r
    return best, best_meta


def _improve_party(x: np.ndarray, pdims, povms, j: int):
    """Candidate two-outcome POVM for measured party j.

    Freezes the sign operators of the current blocks; the objective is then
    linear in party j's elements and the exact maximizer of the two-outcome
    restriction is the positive-part projector of G_0 - G_1.
    """
    l = len(pdims)
    others = [jj for jj in range(l - 1) if jj != j]
    d = pdims[j + 1]
    combos = list(product(*[range(len(povms[jj])) for jj in others])) or [()]
    g = [np.zeros((d, d), dtype=complex) for _ in range(2)]
    for combo in combos:
        ops = [np.eye(pdims[0])] + [None] * (l - 1)
        for idx, jj in enumerate(others):
            ops[jj + 1] = povms[jj][combo[idx]]
        for m in range(2):
            ops_m = list(ops)
            ops_m[j + 1] = povms[j][m]
            block = la.partial_trace_matrix(la.kron_all(ops_m) @ x, list(pdims), [0])
            s = _sign_matrix(block)
            ops_f = list(ops)
            ops_f[0] = s
            ops_f[j + 1] = np.eye(d)
            g[m] += la.partial_trace_matrix(la.kron_all(ops_f) @ x, list(pdims), [j + 1])
    vals, vecs = np.linalg.eigh(la.hermitize(g[0] - g[1]))
    pos = vecs[:, vals > 0]
    lam0 = pos @ pos.conj().T
    return [lam0, np.eye(d) - lam0]
