"""septest: a desk-scale separability-testing laboratory.

States and distances, gate-level circuits, swap/permutation/product tests,
one-way LOCC machinery with the paired-Pauli singlet test, nearest-separable
and extension-hierarchy tooling, the hardness reductions, and executable
verifier protocols, all checked numerically at small dimension.
"""

from .states import (
    Cut,
    DensityMatrix,
    Povm,
    PureState,
    RegisterLayout,
    bell_state,
    fidelity,
    helstrom,
    max_entangled,
    maximally_mixed,
    partial_trace,
    purify,
    tensor,
    trace_distance,
    trace_norm,
)
from .circuits import Circuit, Gate, Register, controlled_permutation, parse_circuit, qft, serialize_circuit
from .overlap_tests import (
    permutation_test_circuit,
    permutation_test_prob,
    product_test_prob,
    swap_test_prob,
    symmetric_projector,
)
from .locc import (
    QCChannel,
    WernerState,
    apply_qc,
    locc_norm_estimate,
    locc_norm_lower,
    locc_sep_bound,
    singlet_test_analytic,
    singlet_test_mc,
    twirl_exact,
    twirl_sampled,
    werner_state,
)
from .separability import (
    KExtParams,
    ProductEnsemble,
    choose_k,
    k_ext_feasible,
    k_extension,
    kext_sep_locc_bound,
    nearest_pure_product,
    nearest_separable,
    ppt_check,
)
from .reductions import (
    PromiseInstance,
    pure_from_separable,
    product_to_similarity,
    reduce_bqp,
    reduce_qma,
    reduce_qma2,
    reduce_qszk,
)
from .protocols import (
    ProtocolOutcome,
    ProverStrategy,
    adversarial_probe,
    honest_qma_witness,
    qma2_verifier,
    qma_sep_verifier,
    sqg_round,
)

__version__ = "0.1.0"
