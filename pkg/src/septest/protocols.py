"""Executable verifier harnesses.

Three protocols: the extension-witness verifier (single prover, permutation
tests against a claimed symmetric extension), the two-witness verifier
(swap test against a claimed product), and the competing-prover round
(extension check plus a distinguishing challenge).  Honest constructors
build the witnesses the completeness arguments prescribe; the adversarial
probes maximize acceptance over everything a prover controls, exactly where
the acceptance is linear in a density input and by seesaw otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _linalg as la
from .circuits import Circuit
from .overlap_tests import symmetric_projector
from .separability import ProductEnsemble, k_extension_all, max_product_overlap_operator
from .states import Cut, DensityMatrix, Povm, PureState, RegisterLayout


@dataclass(frozen=True)
class ProtocolOutcome:
    probability: float
    kind: str  # "exact" | "sampled"
    trials: int | None = None
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not -1e-9 <= self.probability <= 1 + 1e-9:
            raise ValueError("acceptance probability must lie in [0, 1]")


@dataclass(frozen=True)
class ProverStrategy:
    kind: str  # honest_witness | adversarial_seesaw | fixed_state | fixed_measurement
    payload: object = None

    def __post_init__(self):
        if self.kind not in ("honest_witness", "adversarial_seesaw", "fixed_state", "fixed_measurement"):
            raise ValueError(f"unknown prover strategy {self.kind!r}")


def check_promise_slack(alpha: float, beta: float, eps: float) -> None:
    """The soundness argument needs sqrt(alpha) < (beta - eps)^2 / 4 for the
    chosen slack eps; reject parameter choices that break it."""
    if eps <= 0 or eps >= beta:
        raise ValueError("need 0 < eps < beta")
    if math.sqrt(alpha) >= (beta - eps) ** 2 / 4:
        raise ValueError("promise too tight: sqrt(alpha) >= (beta - eps)^2 / 4")


def grouped_isometry(u: Circuit, cut: Cut) -> tuple[np.ndarray, tuple[int, ...]]:
    """The circuit's isometry with output registers reordered cut-major."""
    v = u.isometry()
    layout = u.output_layout()
    cut.validate(layout)
    perm = [i for g in cut.groups for i in g]
    dims = list(layout.dims)
    v = np.stack([la.permute_vector(v[:, i], dims, perm) for i in range(v.shape[1])], axis=1)
    return v, cut.party_dims(layout)


def _extension_dims(pdims, k: int) -> tuple[list[int], list[list[int]]]:
    """Dims [parties..., copies party-major] and the per-party test groups."""
    l = len(pdims)
    dims = list(pdims) + [d for d in pdims for _ in range(k)]
    groups = [[i] + [l + i * k + j for j in range(k)] for i in range(l)]
    _check_extension_cap(dims)
    return dims, groups


def _check_extension_cap(dims) -> None:
    from .states import dim_caps

    total = math.prod(dims)
    if total > dim_caps()[1]:
        raise ValueError(f"extended dimension {total} exceeds the density cap {dim_caps()[1]}")


def _perm_test_projector(dims, groups) -> np.ndarray:
    proj = np.eye(math.prod(dims), dtype=complex)
    for g in groups:
        proj = proj @ la.embed_operator(symmetric_projector(len(g), dims[g[0]]), dims, g)
    return proj


def qma_sep_verifier(u: Circuit, witness: DensityMatrix, k: int, cut: Cut) -> ProtocolOutcome:
    """Exact acceptance of the extension-witness verifier: push the witness's
    first register through the circuit, then one permutation test per party
    over that party's k+1 claimed copies."""
    v, pdims = grouped_isometry(u, cut)
    d_s = v.shape[1]
    e_dim = int(np.prod([d**k for d in pdims]))
    if witness.dim != d_s * e_dim:
        raise ValueError("witness does not match the input register plus k copies per party")
    big = np.kron(v, np.eye(e_dim))
    omega = big @ witness.matrix @ big.conj().T
    dims, groups = _extension_dims(pdims, k)
    proj = _perm_test_projector(dims, groups)
    p = float(np.trace(proj @ omega).real)
    return ProtocolOutcome(min(max(p, 0.0), 1.0), "exact", details={"k": k, "parties": len(pdims)})


def honest_qma_witness(
    u: Circuit,
    ens: ProductEnsemble,
    k: int,
    cut: Cut,
    input_state: DensityMatrix | None = None,
) -> DensityMatrix:
    """Witness built the way the completeness argument says: a (k+1)-fold
    symmetric extension of the claimed separable output, pulled back through
    the circuit by purification alignment so its first register is
    consistent with the intended input.

    Guarantees acceptance at least 1 - sqrt(alpha) when the intended input's
    image is alpha-close in trace norm to the ensemble state.
    """
    v, pdims = grouped_isometry(u, cut)
    if tuple(ens.party_dims) != tuple(pdims):
        raise ValueError("ensemble parties do not match the circuit's output cut")
    d_s = v.shape[1]
    l = len(pdims)
    if input_state is None:
        sigma = ens.state_matrix()
        back = v.conj().T @ sigma @ v
        back = la.hermitize(back)
        vals, vecs = np.linalg.eigh(back)
        vals = np.clip(vals, 0.0, None)
        if vals.sum() < 1e-12:
            raise ValueError("ensemble state is orthogonal to the circuit's range")
        rho_s = (vecs * vals) @ vecs.conj().T / vals.sum()
    else:
        if input_state.dim != d_s:
            raise ValueError("input state does not match the circuit input")
        rho_s = input_state.matrix
    # (k+1)-copy extension, permuted so the original parties lead
    ext_pm = k_extension_all(ens, [k + 1] * l)
    pm_dims = list(ext_pm.layout.dims)
    firsts = [i * (k + 1) for i in range(l)]
    extras = [i * (k + 1) + j for i in range(l) for j in range(1, k + 1)]
    sigma_ext = la.permute_matrix(ext_pm.matrix, pm_dims, firsts + extras)
    d_a = math.prod(pdims)
    e_dim = sigma_ext.shape[0] // d_a
    # purification of the extension (A E first, index register R1 last)
    vals, vecs = la.eigh_clipped(sigma_ext)
    support = np.where(vals > 1e-14)[0]
    r1 = len(support)
    b_mat = vecs[:, support] * np.sqrt(np.clip(vals[support], 0.0, None))  # (A E) x R1
    # purification of the input pushed through the circuit (A x R0)
    ivals, ivecs = la.eigh_clipped(rho_s)
    isupport = np.where(ivals > 1e-14)[0]
    r0 = len(isupport)
    a_mat = (v @ ivecs[:, isupport]) * np.sqrt(np.clip(ivals[isupport], 0.0, None))  # A x R0
    # align the purifications: the best isometry R0 -> (E R1) is the polar
    # part of the overlap matrix
    b_t = b_mat.reshape(d_a, e_dim * r1)
    m = b_t.conj().T @ a_mat  # (E R1) x R0
    uu, _, vv = np.linalg.svd(m, full_matrices=False)
    y = (uu @ vv).conj()  # isometry R0 -> (E R1) maximizing the overlap
    w = a_mat @ y.T  # A x (E R1)
    w = w.reshape(d_a * e_dim, r1)
    omega = w @ w.conj().T  # state on A E
    big = np.kron(v, np.eye(e_dim))
    wit = big.conj().T @ omega @ big
    wit = la.hermitize(wit)
    wit = wit / np.trace(wit).real
    layout = RegisterLayout((d_s,) + tuple(d for d in pdims for _ in range(k)))
    return DensityMatrix(wit, layout)


def probe_qma_sep(u: Circuit, k: int, cut: Cut) -> float:
    """Exact maximum acceptance over all witnesses: the acceptance is linear
    in the witness, so it is the top eigenvalue of the pulled-back test."""
    v, pdims = grouped_isometry(u, cut)
    e_dim = int(np.prod([d**k for d in pdims]))
    dims, groups = _extension_dims(pdims, k)
    proj = _perm_test_projector(dims, groups)
    big = np.kron(v, np.eye(e_dim))
    h = big.conj().T @ proj @ big
    return float(np.linalg.eigvalsh(la.hermitize(h))[-1])


# -- two-witness verifier ------------------------------------------------------


def qma2_verifier(u: Circuit, psi: PureState, product_claim) -> ProtocolOutcome:
    """Swap test between the circuit's output on psi and the claimed product:
    acceptance 1/2 + |<claim|U psi>|^2 / 2."""
    cut, claims = product_claim if isinstance(product_claim, tuple) else (None, product_claim)
    out = u.run_pure(psi)
    if cut is None:
        cut = Cut(tuple((i,) for i in range(out.layout.n_registers)))
    grouped = out.group(cut)
    vecs = [c.vector if isinstance(c, PureState) else np.asarray(c, dtype=complex) for c in claims]
    claim_vec = la.kron_all([v.reshape(-1, 1) for v in vecs]).reshape(-1)
    if claim_vec.size != grouped.dim:
        raise ValueError("product claim does not match the output dimensions")
    overlap = float(abs(np.vdot(claim_vec, grouped.vector)) ** 2)
    return ProtocolOutcome(0.5 + overlap / 2.0, "exact", details={"overlap": overlap})


def probe_qma2(
    u: Circuit, cut: Cut, restarts: int = 16, iters: int = 200, seed: int | None = None
) -> float:
    """Best acceptance found over both the input and the claimed product.

    For a fixed claim the best input is the normalized pullback, so the
    joint problem is the product-overlap seesaw on V V^dag.
    """
    v, pdims = grouped_isometry(u, cut)
    h = v @ v.conj().T
    f, _ = max_product_overlap_operator(h, pdims, restarts=restarts, iters=iters, seed=seed)
    return 0.5 + min(f, 1.0) / 2.0


def max_output_product_overlap(
    u: Circuit, cut: Cut, restarts: int = 64, iters: int = 300, seed: int | None = None
) -> float:
    """max over inputs and products of |<product|U psi>|^2 (the oracle the
    promise bounds are measured against)."""
    v, pdims = grouped_isometry(u, cut)
    f, _ = max_product_overlap_operator(v @ v.conj().T, pdims, restarts=restarts, iters=iters, seed=seed)
    return min(f, 1.0)


# -- competing-prover round ----------------------------------------------------


def _sqg_dims(pdims, k: int):
    dims = [d for d in pdims for _ in range(k)]
    groups = [[i * k + j for j in range(k)] for i in range(len(pdims))]
    firsts = [i * k for i in range(len(pdims))]
    _check_extension_cap(dims)
    return dims, groups, firsts


def sqg_round(
    rho: DensityMatrix,
    yes_state: DensityMatrix,
    no_meas: Povm,
    k: int,
    cut: Cut | None = None,
    coin: int | None = None,
) -> ProtocolOutcome:
    """One round of the competing-prover protocol, evaluated exactly.

    The yes-prover supplies k claimed copies per party (party-major layout);
    the verifier runs one permutation test per party, keeps the first copy
    of each as sigma, then challenges the no-prover's fixed two-outcome
    measurement to tell rho from sigma.  Accepts when the guess is wrong.
    With coin=None both coin values are enumerated and averaged.
    """
    if cut is None:
        cut = Cut(tuple((i,) for i in range(rho.layout.n_registers)))
    pdims = cut.party_dims(rho.layout)
    dims, groups, firsts = _sqg_dims(pdims, k)
    if tuple(yes_state.layout.dims) != tuple(dims):
        raise ValueError("yes-prover state must hold k copies of each party, party-major")
    if len(no_meas.elements) != 2 or no_meas.dim != math.prod(pdims):
        raise ValueError("the no-prover holds a fixed two-outcome measurement on the party space")
    rho_g = DensityMatrix(_group(rho, cut), RegisterLayout(pdims))
    proj = _perm_test_projector(dims, groups)
    passed = proj @ yes_state.matrix @ proj
    p_pass = float(np.trace(passed).real)
    m0, m1 = no_meas.elements
    p_guess_rho = float(np.trace(m1 @ rho_g.matrix).real)  # b'=1 on rho is a wrong guess
    if p_pass > 1e-12:
        sigma = la.partial_trace_matrix(passed / p_pass, dims, firsts)
        p_guess_sigma = float(np.trace(m0 @ sigma).real)  # b'=0 on sigma is a wrong guess
    else:
        sigma = None
        p_guess_sigma = 0.0
    acc = {0: p_pass * p_guess_rho, 1: p_pass * p_guess_sigma}
    if coin is None:
        p = (acc[0] + acc[1]) / 2.0
    else:
        p = acc[int(coin)]
    return ProtocolOutcome(
        min(max(p, 0.0), 1.0),
        "exact",
        details={"p_pass": p_pass, "accept_coin0": acc[0], "accept_coin1": acc[1], "k": k},
    )


def _group(rho: DensityMatrix, cut: Cut) -> np.ndarray:
    cut.validate(rho.layout)
    perm = [i for g in cut.groups for i in g]
    return la.permute_matrix(rho.matrix, list(rho.layout.dims), perm)


def honest_sqg_yes_state(ens: ProductEnsemble, k: int) -> DensityMatrix:
    """The honest yes-prover sends a k-fold extension of the claimed nearby
    separable state (party-major copies, matching sqg_round's layout)."""
    return k_extension_all(ens, [k] * len(ens.party_dims))


def probe_sqg(rho: DensityMatrix, no_meas: Povm, k: int, cut: Cut | None = None) -> float:
    """Exact maximum acceptance over everything the yes-prover can send: the
    acceptance is linear in the prover's state."""
    if cut is None:
        cut = Cut(tuple((i,) for i in range(rho.layout.n_registers)))
    pdims = cut.party_dims(rho.layout)
    dims, groups, firsts = _sqg_dims(pdims, k)
    rho_g = _group(rho, cut)
    proj = _perm_test_projector(dims, groups)
    m0, m1 = no_meas.elements
    p_guess_rho = float(np.trace(m1 @ rho_g).real)
    w = 0.5 * p_guess_rho * proj + 0.5 * proj @ la.embed_operator(m0, dims, firsts) @ proj
    return float(np.linalg.eigvalsh(la.hermitize(w))[-1])


def adversarial_probe(kind: str, **kwargs) -> float:
    """Best acceptance a prover can reach, maximized over the prover's free
    inputs.  Exact for the protocols whose acceptance is linear in a density
    input ('qma', 'sqg'); a restarted seesaw lower bound for 'qma2'."""
    if kind == "qma":
        return probe_qma_sep(kwargs["u"], kwargs["k"], kwargs["cut"])
    if kind == "qma2":
        return probe_qma2(
            kwargs["u"],
            kwargs["cut"],
            restarts=kwargs.get("restarts", 16),
            iters=kwargs.get("iters", 200),
            seed=kwargs.get("seed"),
        )
    if kind == "sqg":
        return probe_sqg(kwargs["rho"], kwargs["no_meas"], kwargs["k"], kwargs.get("cut"))
    raise ValueError(f"unknown protocol kind {kind!r}")
