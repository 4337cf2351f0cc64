"""Gate-level circuits over named registers, in three execution modes.

A circuit is `unitary` (no ancillas, no discards), `isometry` (zero-prepped
ancillas, no discards) or `mixed` (some registers discarded after the gates).
Registers are qudits; gates address them by label.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from . import _linalg as la
from .states import DensityMatrix, PureState, RegisterLayout


class CircuitError(ValueError):
    """Circuit construction/parsing failure with a machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


_SQ2 = 1 / math.sqrt(2)
GATE_1Q = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, cmath.exp(1j * math.pi / 4)]], dtype=complex),
}

GATE_KINDS = ("H", "X", "Y", "Z", "S", "T", "CNOT", "SWAP", "QFT", "QFTDG", "PERM", "U")


def qft(d: int) -> np.ndarray:
    """Fourier unitary with entries omega^(jk)/sqrt(d); qft(d) @ |0> is uniform."""
    if d < 1:
        raise ValueError("dimension must be positive")
    j, k = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    return np.exp(2j * math.pi * j * k / d) / math.sqrt(d)


def swap_matrix(d: int) -> np.ndarray:
    return la.permutation_operator(d, 2, (1, 0))


@dataclass(frozen=True)
class Register:
    label: str
    dim: int


@dataclass(frozen=True)
class Gate:
    """One gate: a kind, target register labels, and an optional control.

    The control is (label, predicate) with predicate "eq0" (control register
    in the all-zeros state) or "neq0" (orthogonal to it).  For PERM the
    control field instead names the index register selecting the permutation.
    """

    kind: str
    targets: tuple[str, ...]
    control: tuple[str, str] | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.kind not in GATE_KINDS:
            raise CircuitError("UnknownGateKind", f"gate kind {self.kind!r}")
        if self.matrix is not None:
            m = np.asarray(self.matrix, dtype=complex)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise CircuitError("NotUnitary", "raw block must be a square matrix")
            if np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) > 1e-9:
                raise CircuitError("NotUnitary", "raw block is not unitary within 1e-9")
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)


def controlled_permutation(regs, perm_register: str) -> Gate:
    """Gate permuting `regs` by the permutation indexed in `perm_register`.

    Permutations of k registers are enumerated in lexicographic one-line
    order, so index 0 is the identity; index register values beyond k! - 1
    act as the identity.
    """
    return Gate("PERM", tuple(regs), control=(perm_register, "index"))


def _control_projector(dim: int, predicate: str) -> np.ndarray:
    p0 = np.zeros((dim, dim), dtype=complex)
    p0[0, 0] = 1.0
    if predicate == "eq0":
        return p0
    if predicate == "neq0":
        return np.eye(dim) - p0
    raise CircuitError("SchemaViolation", f"unknown control predicate {predicate!r}")


@dataclass(frozen=True)
class Circuit:
    inputs: tuple[Register, ...]
    gates: tuple[Gate, ...] = ()
    ancillas: tuple[Register, ...] = ()
    outputs: tuple[str, ...] | None = None
    discard: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "ancillas", tuple(self.ancillas))
        object.__setattr__(self, "discard", tuple(self.discard))
        labels = [r.label for r in self.registers]
        if len(set(labels)) != len(labels):
            raise CircuitError("SchemaViolation", "duplicate register label")
        if self.outputs is None:
            object.__setattr__(self, "outputs", tuple(l for l in labels if l not in self.discard))
        else:
            object.__setattr__(self, "outputs", tuple(self.outputs))
        declared = set(self.outputs) | set(self.discard)
        if declared != set(labels) or len(self.outputs) + len(self.discard) != len(labels):
            raise CircuitError("SchemaViolation", "outputs plus discard must partition the registers")
        for g in self.gates:
            for t in g.targets:
                if t not in labels:
                    raise CircuitError("SchemaViolation", f"gate targets unknown register {t!r}")
            if g.control is not None and g.control[0] not in labels:
                raise CircuitError("SchemaViolation", f"gate control names unknown register {g.control[0]!r}")
        self._validate_gate_dims()

    @property
    def registers(self) -> tuple[Register, ...]:
        return self.inputs + self.ancillas

    @property
    def mode(self) -> str:
        if self.discard:
            return "mixed"
        return "isometry" if self.ancillas else "unitary"

    def dim_of(self, label: str) -> int:
        for r in self.registers:
            if r.label == label:
                return r.dim
        raise KeyError(label)

    def input_layout(self) -> RegisterLayout:
        return RegisterLayout(tuple(r.dim for r in self.inputs), tuple(r.label for r in self.inputs))

    def output_layout(self) -> RegisterLayout:
        return RegisterLayout(tuple(self.dim_of(l) for l in self.outputs), tuple(self.outputs))

    def _validate_gate_dims(self) -> None:
        for g in self.gates:
            dims = [self.dim_of(t) for t in g.targets]
            if g.kind in GATE_1Q:
                if len(dims) != 1 or dims[0] != 2:
                    raise CircuitError("SchemaViolation", f"{g.kind} takes one qubit target")
            elif g.kind == "CNOT":
                if dims != [2, 2]:
                    raise CircuitError("SchemaViolation", "CNOT takes two qubit targets")
            elif g.kind == "SWAP":
                if len(dims) != 2 or dims[0] != dims[1]:
                    raise CircuitError("SchemaViolation", "SWAP takes two equal-dimension targets")
            elif g.kind in ("QFT", "QFTDG"):
                if len(dims) != 1:
                    raise CircuitError("SchemaViolation", f"{g.kind} takes one target register")
            elif g.kind == "PERM":
                if g.control is None:
                    raise CircuitError("SchemaViolation", "PERM needs an index register as control")
                if len(set(dims)) != 1:
                    raise CircuitError("SchemaViolation", "PERM targets must share one dimension")
                if self.dim_of(g.control[0]) < math.factorial(len(dims)):
                    raise CircuitError("SchemaViolation", "PERM index register smaller than k!")
            elif g.kind == "U":
                if g.matrix is None:
                    raise CircuitError("SchemaViolation", "raw block needs a matrix")
                if g.matrix.shape[0] != math.prod(dims):
                    raise CircuitError("SchemaViolation", "raw block dimension does not match targets")

    # -- execution ---------------------------------------------------------

    def _local_unitary(self, g: Gate) -> tuple[np.ndarray, list[str]]:
        """Matrix of the gate and the ordered register labels it acts on."""
        dims = [self.dim_of(t) for t in g.targets]
        if g.kind in GATE_1Q:
            mat = GATE_1Q[g.kind]
        elif g.kind == "CNOT":
            mat = np.eye(4, dtype=complex)[:, [0, 1, 3, 2]]
        elif g.kind == "SWAP":
            mat = swap_matrix(dims[0]).astype(complex)
        elif g.kind == "QFT":
            mat = qft(dims[0])
        elif g.kind == "QFTDG":
            mat = qft(dims[0]).conj().T
        elif g.kind == "PERM":
            k, d = len(dims), dims[0]
            c = self.dim_of(g.control[0])
            mat = np.zeros((c * d**k, c * d**k), dtype=complex)
            perms = list(permutations(range(k)))
            for idx in range(c):
                w = la.permutation_operator(d, k, perms[idx]) if idx < len(perms) else np.eye(d**k)
                mat[idx * d**k : (idx + 1) * d**k, idx * d**k : (idx + 1) * d**k] = w
            return mat, [g.control[0], *g.targets]
        else:
            mat = g.matrix
        if g.kind != "PERM" and g.control is not None:
            label, predicate = g.control
            cdim = self.dim_of(label)
            p = _control_projector(cdim, predicate)
            mat = np.kron(p, mat) + np.kron(np.eye(cdim) - p, np.eye(mat.shape[0]))
            return mat, [label, *g.targets]
        return mat, list(g.targets)

    def _run_vector_batch(self, batch: np.ndarray) -> np.ndarray:
        dims = [r.dim for r in self.registers]
        labels = [r.label for r in self.registers]
        for g in self.gates:
            mat, on = self._local_unitary(g)
            axes = [labels.index(l) for l in on]
            batch = la.apply_to_vector_batch(mat, batch, dims, axes)
        return batch

    def unitary(self) -> np.ndarray:
        """Full unitary on inputs + ancillas, in register order."""
        dim = math.prod(r.dim for r in self.registers)
        return self._run_vector_batch(np.eye(dim, dtype=complex))

    def isometry(self) -> np.ndarray:
        """Matrix from the input space to the output space (no discards)."""
        if self.mode == "mixed":
            raise ValueError("mixed-mode circuit has no isometry")
        dims = [r.dim for r in self.registers]
        labels = [r.label for r in self.registers]
        din = math.prod(r.dim for r in self.inputs)
        anc = la.kron_all([_basis0(r.dim) for r in self.ancillas]) if self.ancillas else np.array([[1.0]])
        batch = np.kron(np.eye(din, dtype=complex), anc.reshape(-1, 1))
        batch = self._run_vector_batch(batch)
        perm = [labels.index(l) for l in self.outputs]
        out = np.stack([la.permute_vector(batch[:, i], dims, perm) for i in range(din)], axis=1)
        return out

    def run_pure(self, state: PureState | None = None) -> PureState:
        """Run on the given input (all-zeros when None)."""
        if self.mode == "mixed":
            raise ValueError("run_pure needs a unitary or isometry circuit")
        din = math.prod(r.dim for r in self.inputs)
        if state is None:
            vec_in = _basis0(din)
        else:
            if tuple(state.layout.dims) != tuple(r.dim for r in self.inputs):
                raise ValueError("input state does not match the circuit's input registers")
            vec_in = state.vector
        vec = self.isometry() @ vec_in
        return PureState(vec, self.output_layout())

    def run_mixed(self, state: DensityMatrix | None = None) -> DensityMatrix:
        """Run on the given input (all-zeros when None), then discard."""
        dims = [r.dim for r in self.registers]
        labels = [r.label for r in self.registers]
        anc = la.kron_all([np.outer(_basis0(r.dim), _basis0(r.dim)) for r in self.ancillas])
        if state is None:
            din = math.prod(r.dim for r in self.inputs)
            state_mat = np.outer(_basis0(din), _basis0(din))
        else:
            if tuple(state.layout.dims) != tuple(r.dim for r in self.inputs):
                raise ValueError("input state does not match the circuit's input registers")
            state_mat = state.matrix
        if self.inputs and self.ancillas:
            rho = np.kron(state_mat, anc)
        elif self.inputs:
            rho = state_mat
        else:
            rho = anc
        for g in self.gates:
            mat, on = self._local_unitary(g)
            axes = [labels.index(l) for l in on]
            rho = la.apply_to_matrix(mat, rho, dims, axes)
        keep = [labels.index(l) for l in self.outputs]
        rho = la.partial_trace_matrix(rho, dims, keep)
        return DensityMatrix(rho, self.output_layout())


def _basis0(dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[0] = 1.0
    return v


def isometry_circuit(v: np.ndarray, input_regs, ancilla: Register, outputs=None) -> Circuit:
    """Circuit whose isometry equals the given matrix.

    The ancilla supplies the extra output dimension (d_out = d_in * d_anc);
    the full unitary is the completion of v placed on the |0>-ancilla
    columns.
    """
    v = np.asarray(v, dtype=complex)
    d_out, d_in = v.shape
    input_regs = tuple(input_regs)
    if math.prod(r.dim for r in input_regs) != d_in:
        raise ValueError("input registers do not match the isometry's domain")
    if d_out % d_in or d_out // d_in != ancilla.dim:
        raise ValueError("ancilla dimension must supply exactly the output overhead")
    d_anc = ancilla.dim
    # complete v's columns to a unitary, then route them to the basis
    # vectors that carry a zeroed ancilla
    stacked = np.hstack([v, np.eye(d_out, dtype=complex)])
    q, _ = np.linalg.qr(stacked)
    overlap = q.conj().T @ v
    keep = [i for i in range(d_out) if np.linalg.norm(overlap[i]) < 1e-9]
    completion = q[:, keep[: d_out - d_in]]
    full = np.zeros((d_out, d_out), dtype=complex)
    rest = iter(range(completion.shape[1]))
    for col in range(d_out):
        i, a = divmod(col, d_anc)
        full[:, col] = v[:, i] if a == 0 else completion[:, next(rest)]
    labels = tuple(r.label for r in input_regs) + (ancilla.label,)
    return Circuit(
        inputs=input_regs,
        ancillas=(ancilla,),
        gates=(Gate("U", labels, matrix=full),),
        outputs=outputs or labels,
    )


# -- JSON interchange ------------------------------------------------------


def _matrix_to_json(m: np.ndarray) -> dict:
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def _matrix_from_json(obj) -> np.ndarray:
    try:
        return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise CircuitError("SchemaViolation", f"bad matrix block: {exc}") from exc


def serialize_circuit(c: Circuit) -> dict:
    gates = []
    for g in c.gates:
        entry: dict = {"kind": g.kind, "targets": list(g.targets)}
        if g.control is not None:
            entry["control"] = {"label": g.control[0], "predicate": g.control[1]}
        if g.matrix is not None:
            entry["matrix"] = _matrix_to_json(g.matrix)
        gates.append(entry)
    return {
        "inputs": [{"label": r.label, "dim": r.dim} for r in c.inputs],
        "ancillas": [{"label": r.label, "dim": r.dim, "prep": "zero"} for r in c.ancillas],
        "gates": gates,
        "outputs": list(c.outputs),
        "discard": list(c.discard),
    }


def parse_circuit(source) -> Circuit:
    """Build a Circuit from its JSON form (text, dict, or file content)."""
    if isinstance(source, str):
        try:
            obj = json.loads(source)
        except json.JSONDecodeError as exc:
            raise CircuitError("SchemaViolation", f"not valid JSON: {exc}") from exc
    else:
        obj = source
    if not isinstance(obj, dict):
        raise CircuitError("SchemaViolation", "circuit JSON must be an object")

    def regs(key):
        entries = obj.get(key, [])
        out = []
        for e in entries:
            try:
                out.append(Register(str(e["label"]), int(e["dim"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise CircuitError("SchemaViolation", f"bad register entry in {key!r}: {e}") from exc
            if key == "ancillas" and e.get("prep", "zero") != "zero":
                raise CircuitError("SchemaViolation", "only zero-prepped ancillas are supported")
        return tuple(out)

    gates = []
    for e in obj.get("gates", []):
        if not isinstance(e, dict) or "kind" not in e or "targets" not in e:
            raise CircuitError("SchemaViolation", f"bad gate entry: {e}")
        kind = str(e["kind"])
        if kind not in GATE_KINDS:
            raise CircuitError("UnknownGateKind", f"gate kind {kind!r}")
        control = None
        if "control" in e and e["control"] is not None:
            ctl = e["control"]
            try:
                control = (str(ctl["label"]), str(ctl.get("predicate", "neq0")))
            except (KeyError, TypeError) as exc:
                raise CircuitError("SchemaViolation", f"bad control entry: {ctl}") from exc
        matrix = _matrix_from_json(e["matrix"]) if "matrix" in e else None
        gates.append(Gate(kind, tuple(str(t) for t in e["targets"]), control=control, matrix=matrix))

    inputs = regs("inputs")
    ancillas = regs("ancillas")
    if not inputs and not ancillas:
        raise CircuitError("SchemaViolation", "circuit needs at least one register")
    return Circuit(
        inputs=inputs,
        gates=tuple(gates),
        ancillas=ancillas,
        outputs=tuple(obj["outputs"]) if "outputs" in obj and obj["outputs"] else None,
        discard=tuple(obj.get("discard", [])),
    )
