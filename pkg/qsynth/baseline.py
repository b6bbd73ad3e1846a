"""
Layered hardware-efficient circuits used as a reference for the agent.

A layered circuit starts with a local gate on every qubit, followed by
`layers` repetitions of a fixed CNOT pattern and local gates:

linear
    CNOT(0, 1), CNOT(1, 2), ..., CNOT(n - 2, n - 1), then a local gate on
    every qubit.
pairwise
    CNOT(0, 1), CNOT(2, 3), ..., local gates on the qubits of the second
    sublayer, CNOT(1, 2), CNOT(3, 4), ..., then a local gate on every qubit.

Both patterns use n - 1 CNOTs per layer, all on line edges. The local gate
is either "rzry" (RY followed by RZ, two parameters) or "u3".
"""

import numpy as np

from qsynth.circuit import append_gate, cnot_count, empty_circuit
from qsynth.config import OptimizerConfig
from qsynth.core import LayeredSpec
from qsynth.metrics import parallel_map, summarize
from qsynth.popt import optimize_fidelity
from qsynth.qcore import CX, RY, RZ, U3

KINDS = ("linear", "pairwise")
LOCAL_GATES = ("rzry", "u3")


def layered_spec(kind, n_qubits, layers, local_gate="rzry"):
    """
    Validated LayeredSpec.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}; got {kind!r}")
    if local_gate not in LOCAL_GATES:
        raise ValueError(f"local_gate must be one of {LOCAL_GATES}; got {local_gate!r}")
    if n_qubits < 1:
        raise ValueError(f"n_qubits must be positive; got {n_qubits}")
    if layers < 0:
        raise ValueError(f"layers must be non-negative; got {layers}")
    return LayeredSpec(kind, n_qubits, layers, local_gate)


def _locals(circuit, local_gate, qubits):
    for q in qubits:
        if local_gate == "rzry":
            circuit = append_gate(circuit, RY, (q,))
            circuit = append_gate(circuit, RZ, (q,))
        else:
            circuit = append_gate(circuit, U3, (q,))
    return circuit


def _cnots(circuit, first):
    for c in range(first, circuit.n_qubits - 1, 2):
        circuit = append_gate(circuit, CX, (c, c + 1))
    return circuit


def build_layered(spec):
    """
    Circuit for a LayeredSpec.
    """
    spec = layered_spec(*spec)
    n = spec.n_qubits
    everyone = range(n)
    circuit = _locals(empty_circuit(n), spec.local_gate, everyone)
    for _ in range(spec.layers):
        if spec.kind == "linear":
            for c in range(n - 1):
                circuit = append_gate(circuit, CX, (c, c + 1))
        else:
            circuit = _cnots(circuit, 0)
            interior = range(1, 1 + 2 * ((n - 1) // 2))
            circuit = _locals(circuit, spec.local_gate, interior)
            circuit = _cnots(circuit, 1)
        circuit = _locals(circuit, spec.local_gate, everyone)
    return circuit


def evaluate_layered(spec, targets, cfg=None, seed=0, threads=1):
    """
    Fit the layered circuit to prepare each target.

    Each fit starts from a random point drawn from `seed`; the optimizer
    settings are the ones used by the agent.

    Returns
    -------
    metrics : EvalMetrics
        Fidelities of the prepared states; every target uses
        layers * (n - 1) CNOTs.
    """
    cfg = OptimizerConfig() if cfg is None else cfg
    circuit = build_layered(spec)
    rng = np.random.default_rng(seed)
    starts = rng.uniform(-np.pi, np.pi, (len(targets), circuit.n_params))

    def fit(item):
        psi, x0 = item
        if psi.n_qubits != circuit.n_qubits:
            raise ValueError(
                f"targets must have {circuit.n_qubits} qubits; got {psi.n_qubits}"
            )
        result = optimize_fidelity(circuit, psi, cfg, x0=x0, prepare=True)
        return 1.0 - result.best_value

    fidelities = parallel_map(fit, list(zip(targets, starts)), threads)
    return summarize(fidelities, [cnot_count(circuit)] * len(fidelities))
