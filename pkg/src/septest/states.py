"""Multi-register states and the distance/fidelity toolbox.

Conventions used throughout the package:

* register 0 is the leftmost Kronecker factor;
* trace distance means the full Schatten 1-norm of the difference, so its
  range is [0, 2] (never the halved variant);
* fidelity is the squared 1-norm of sqrt(rho) sqrt(sigma), in [0, 1].

All values are validated on construction with a 1e-9 tolerance and are
immutable afterwards, so they are safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _linalg as la

TOL = 1e-9
EIG_FLOOR = -1e-9

# Desk-scale caps: pure ops stay cheap up to 4096, dense eigenwork up to 256.
_CAPS = {"pure": 4096, "density": 256}


def set_dim_caps(pure: int | None = None, density: int | None = None) -> None:
    """Override the ambient dimension caps (CLI --dim-cap hook)."""
    if pure is not None:
        _CAPS["pure"] = int(pure)
    if density is not None:
        _CAPS["density"] = int(density)


def set_tolerance(tol: float) -> None:
    """Override the construction tolerance (CLI --tol hook)."""
    global TOL
    TOL = float(tol)


def dim_caps() -> tuple[int, int]:
    return _CAPS["pure"], _CAPS["density"]


def _check_cap(dim: int, kind: str) -> None:
    cap = _CAPS[kind]
    if dim > cap:
        raise ValueError(f"dimension {dim} exceeds the {kind}-state cap {cap}")


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered subsystem dimensions, optionally labelled."""

    dims: tuple[int, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError("layout dims must be positive integers")
        if self.labels is not None:
            labels = tuple(self.labels)
            object.__setattr__(self, "labels", labels)
            if len(labels) != len(dims):
                raise ValueError("one label per register required")
            if len(set(labels)) != len(labels):
                raise ValueError("register labels must be unique")

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    @property
    def n_registers(self) -> int:
        return len(self.dims)

    def index_of(self, label: str) -> int:
        if self.labels is None:
            raise ValueError("layout has no labels")
        return self.labels.index(label)


def qubits(n: int, prefix: str = "q") -> RegisterLayout:
    return RegisterLayout((2,) * n, tuple(f"{prefix}{i}" for i in range(n)))


@dataclass(frozen=True)
class Cut:
    """Partition of the layout's registers into parties."""

    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if any(not g for g in groups):
            raise ValueError("cut groups must be nonempty")
        flat = [i for g in groups for i in g]
        if len(set(flat)) != len(flat):
            raise ValueError("cut groups must be disjoint")

    @property
    def n_parties(self) -> int:
        return len(self.groups)

    def validate(self, layout: RegisterLayout) -> None:
        flat = sorted(i for g in self.groups for i in g)
        if flat != list(range(layout.n_registers)):
            raise ValueError("cut must cover every register exactly once")

    def party_dims(self, layout: RegisterLayout) -> tuple[int, ...]:
        self.validate(layout)
        return tuple(math.prod(layout.dims[i] for i in g) for g in self.groups)


def bipartite_cut(layout: RegisterLayout, first: int) -> Cut:
    """Cut splitting the first `first` registers from the rest."""
    n = layout.n_registers
    return Cut((tuple(range(first)), tuple(range(first, n))))


class PureState:
    """Unit vector with a register layout."""

    def __init__(self, vector, layout: RegisterLayout):
        vec = np.asarray(vector, dtype=complex).reshape(-1)
        if vec.size != layout.dim:
            raise ValueError(f"vector of dim {vec.size} does not fit layout dim {layout.dim}")
        _check_cap(vec.size, "pure")
        norm = np.linalg.norm(vec)
        if abs(norm - 1.0) > TOL:
            raise ValueError(f"vector norm {norm} is not 1")
        vec = vec / norm
        vec.setflags(write=False)
        self.vector = vec
        self.layout = layout

    @property
    def dim(self) -> int:
        return self.layout.dim

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.vector, self.vector.conj()), self.layout)

    def group(self, cut: Cut) -> "PureState":
        """Reorder registers group-major and merge each group into one register."""
        cut.validate(self.layout)
        perm = [i for g in cut.groups for i in g]
        vec = la.permute_vector(self.vector, self.layout.dims, perm)
        return PureState(vec, RegisterLayout(cut.party_dims(self.layout)))

    def to_json(self) -> str:
        v = self.vector
        return json.dumps({"dims": list(self.layout.dims), "re": v.real.tolist(), "im": v.imag.tolist()})


class DensityMatrix:
    """Hermitian, PSD, unit-trace matrix with a register layout."""

    def __init__(self, matrix, layout: RegisterLayout):
        mat = np.asarray(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("density matrix must be square")
        if mat.shape[0] != layout.dim:
            raise ValueError(f"matrix of dim {mat.shape[0]} does not fit layout dim {layout.dim}")
        _check_cap(mat.shape[0], "density")
        if np.max(np.abs(mat - mat.conj().T)) > TOL:
            raise ValueError("matrix is not Hermitian")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > TOL:
            raise ValueError(f"trace {tr} is not 1")
        mat = la.hermitize(mat) / tr
        lo = float(np.min(np.linalg.eigvalsh(mat)))
        if lo < EIG_FLOOR:
            raise ValueError(f"matrix has negative eigenvalue {lo}")
        mat.setflags(write=False)
        self.matrix = mat
        self.layout = layout

    @property
    def dim(self) -> int:
        return self.layout.dim

    def eigenvalues(self) -> np.ndarray:
        vals, _ = la.eigh_clipped(self.matrix, EIG_FLOOR)
        return np.clip(vals, 0.0, None)

    def to_json(self) -> str:
        m = self.matrix
        return json.dumps({"dims": list(self.layout.dims), "re": m.real.tolist(), "im": m.imag.tolist()})


def state_from_json(text: str) -> PureState | DensityMatrix:
    """Inverse of to_json; a 1-D re/im pair decodes to a pure state."""
    obj = json.loads(text)
    dims = tuple(int(d) for d in obj["dims"])
    arr = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    layout = RegisterLayout(dims)
    if arr.ndim == 1:
        return PureState(arr, layout)
    return DensityMatrix(arr, layout)


def _merge_layout(a: RegisterLayout, b: RegisterLayout) -> RegisterLayout:
    if a.labels is not None and b.labels is not None and not set(a.labels) & set(b.labels):
        return RegisterLayout(a.dims + b.dims, a.labels + b.labels)
    return RegisterLayout(a.dims + b.dims)


def tensor(a, b):
    """Kronecker product of two pure states or two density matrices."""
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.vector, b.vector), _merge_layout(a.layout, b.layout))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.matrix, b.matrix), _merge_layout(a.layout, b.layout))
    raise TypeError("tensor needs two pure states or two density matrices; lift the pure one first")


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    keep = list(keep)
    if not keep:
        raise ValueError("keep set must be nonempty")
    n = rho.layout.n_registers
    if any(i < 0 or i >= n for i in keep):
        raise ValueError(f"register index out of range for {n} registers")
    if len(set(keep)) != len(keep):
        raise ValueError("keep indices must be distinct")
    mat = la.partial_trace_matrix(rho.matrix, list(rho.layout.dims), keep)
    dims = tuple(rho.layout.dims[i] for i in keep)
    labels = tuple(rho.layout.labels[i] for i in keep) if rho.layout.labels else None
    return DensityMatrix(mat, RegisterLayout(dims, labels))


def trace_norm(x) -> float:
    """Sum of singular values; for Hermitian input, the sum of |eigenvalues|."""
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError("trace norm expects a square matrix")
    if np.max(np.abs(x - x.conj().T)) <= 1e-10 * max(1.0, np.max(np.abs(x))):
        return float(np.sum(np.abs(np.linalg.eigvalsh(la.hermitize(x)))))
    return float(np.sum(np.linalg.svd(x, compute_uv=False)))


def _same_layout(rho: DensityMatrix, sigma: DensityMatrix) -> None:
    if rho.layout.dims != sigma.layout.dims:
        raise ValueError(f"layout mismatch: {rho.layout.dims} vs {sigma.layout.dims}")


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix, return_projector: bool = False):
    """1-norm of rho - sigma, in [0, 2].

    With return_projector=True also returns the projector onto the positive
    eigenspace of the difference, which maximizes 2 Tr(P (rho - sigma)).
    """
    _same_layout(rho, sigma)
    delta = rho.matrix - sigma.matrix
    vals, vecs = np.linalg.eigh(la.hermitize(delta))
    value = float(np.sum(np.abs(vals)))
    if not return_projector:
        return value
    pos = vecs[:, vals > 0]
    return value, pos @ pos.conj().T


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    _same_layout(rho, sigma)
    s = la.sqrtm_psd(rho.matrix)
    inner = s @ sigma.matrix @ s
    vals = np.clip(np.linalg.eigvalsh(la.hermitize(inner)), 0.0, None)
    vals[vals < 1e-13 * max(float(vals.max()), 1e-300)] = 0.0
    f = float(np.sum(np.sqrt(vals)) ** 2)
    return min(max(f, 0.0), 1.0)


def pure_fidelity(psi: PureState, phi: PureState) -> float:
    if psi.dim != phi.dim:
        raise ValueError("dimension mismatch")
    return float(abs(np.vdot(psi.vector, phi.vector)) ** 2)


@dataclass(frozen=True)
class Povm:
    """Finite list of PSD operators summing to the identity."""

    elements: tuple
    labels: tuple | None = None

    def __post_init__(self):
        elems = tuple(np.asarray(e, dtype=complex) for e in self.elements)
        for e in elems:
            e.setflags(write=False)
        object.__setattr__(self, "elements", elems)
        if not elems:
            raise ValueError("a POVM needs at least one element")
        d = elems[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for e in elems:
            if e.shape != (d, d):
                raise ValueError("POVM elements must share one dimension")
            if np.max(np.abs(e - e.conj().T)) > TOL:
                raise ValueError("POVM element is not Hermitian")
            if float(np.min(np.linalg.eigvalsh(la.hermitize(e)))) < EIG_FLOOR:
                raise ValueError("POVM element is not PSD")
            total += e
        if np.max(np.abs(total - np.eye(d))) > TOL:
            raise ValueError("POVM elements do not sum to the identity")
        if self.labels is not None and len(self.labels) != len(elems):
            raise ValueError("one label per POVM element required")

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def outcome_probabilities(self, rho: DensityMatrix) -> np.ndarray:
        return np.array([float(np.trace(e @ rho.matrix).real) for e in self.elements])


def helstrom(rho0: DensityMatrix, rho1: DensityMatrix) -> tuple[Povm, float]:
    """Optimal two-outcome discrimination of rho0 vs rho1 (uniform prior).

    Outcome 0 is the positive eigenspace of rho0 - rho1; the success
    probability is 1/2 + ||rho0 - rho1||_1 / 4.
    """
    dist, proj = trace_distance(rho0, rho1, return_projector=True)
    eye = np.eye(rho0.dim)
    return Povm((proj, eye - proj), (0, 1)), 0.5 + dist / 4.0


def purify(rho: DensityMatrix) -> PureState:
    """Purification on the original space tensor a rank-sized reference."""
    vals, vecs = la.eigh_clipped(rho.matrix)
    vals = np.clip(vals, 0.0, None)
    support = vals > 1e-12
    vals, vecs = vals[support], vecs[:, support]
    rank = max(1, int(vals.size))
    vec = np.zeros(rho.dim * rank, dtype=complex)
    for i in range(vals.size):
        ref = np.zeros(rank)
        ref[i] = 1.0
        vec += np.sqrt(vals[i]) * np.kron(vecs[:, i], ref)
    layout = RegisterLayout(rho.layout.dims + (rank,))
    return PureState(vec / np.linalg.norm(vec), layout)


_BELL = {
    "phi+": np.array([1, 0, 0, 1]) / np.sqrt(2),
    "phi-": np.array([1, 0, 0, -1]) / np.sqrt(2),
    "psi+": np.array([0, 1, 1, 0]) / np.sqrt(2),
    "psi-": np.array([0, 1, -1, 0]) / np.sqrt(2),
}


def bell_state(which: str) -> PureState:
    return PureState(_BELL[which].astype(complex), RegisterLayout((2, 2)))


def max_entangled(n: int, kind: str = "phi+") -> PureState:
    """n maximally entangled qubit pairs, laid out A1..An then B1..Bn."""
    if n < 1:
        raise ValueError("need at least one pair")
    if kind not in ("phi+", "singlet"):
        raise ValueError("kind must be 'phi+' or 'singlet'")
    pair = _BELL["psi-" if kind == "singlet" else "phi+"].astype(complex)
    vec = la.kron_all([pair] * n).reshape(-1)
    # interleaved (A1 B1 A2 B2 ...) -> block order (A1..An B1..Bn)
    perm = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    vec = la.permute_vector(vec, [2] * (2 * n), perm)
    labels = tuple(f"A{i+1}" for i in range(n)) + tuple(f"B{i+1}" for i in range(n))
    return PureState(vec, RegisterLayout((2,) * (2 * n), labels))


def maximally_mixed(layout: RegisterLayout) -> DensityMatrix:
    d = layout.dim
    return DensityMatrix(np.eye(d) / d, layout)


def random_pure(layout: RegisterLayout, rng) -> PureState:
    return PureState(la.random_unit_vector(layout.dim, rng), layout)


def random_mixed(layout: RegisterLayout, rng, rank: int | None = None) -> DensityMatrix:
    return DensityMatrix(la.random_density(layout.dim, rng, rank), layout)
