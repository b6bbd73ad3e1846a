"""
Circuit intermediate representation, connectivity graphs and the agent's
action set.

Circuits are immutable: every builder returns a new Circuit. Parameterized
gates own a contiguous range of slots in the circuit's parameter vector;
builders hand out slots in order of appearance.
"""

import itertools

import numpy as np

from qsynth.core import STOP, ActionSet, Circuit, ConnectivityGraph, GateOp
from qsynth.qcore import (
    CX,
    NUM_PARAMS,
    NUM_QUBITS,
    U3,
    X,
    apply_gate,
    conjugate_gate,
    gate_matrices,
)

# Connectivity -----------------------------------------------------------------


def _all_pairs(n):
    return list(itertools.combinations(range(n), 2))


def _line(n):
    return [(i, i + 1) for i in range(n - 1)]


def _manila(n):
    return _line(n)


def _quito(n):
    # T-shaped five-qubit layout: qubit 1 is the hub.
    return [(0, 1), (1, 2), (1, 3), (3, 4)]


#: Named connectivity presets: (builder, required number of qubits or None).
_PRESETS = {
    "unrestricted": (_all_pairs, None),
    "line": (_line, None),
    "manila": (_manila, 5),
    "quito": (_quito, 5),
}

PRESET_NAMES = tuple(_PRESETS)


def connectivity_graph(n, edges):
    """
    Validate and normalize an undirected CNOT connectivity graph.

    Raises
    ------
    ValueError
        If an edge references a missing qubit or is a self-loop, or if the
        graph is not connected.
    """
    if n < 1:
        raise ValueError(f"n must be positive; got {n}")
    normalized = set()
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"invalid edge for {n} qubits; got {(i, j)}")
        normalized.add((min(i, j), max(i, j)))
    reached, frontier = {0}, [0]
    while frontier:
        q = frontier.pop()
        for i, j in normalized:
            for a, b in ((i, j), (j, i)):
                if a == q and b not in reached:
                    reached.add(b)
                    frontier.append(b)
    if len(reached) != n:
        raise ValueError("connectivity graph must be connected")
    return ConnectivityGraph(n, tuple(sorted(normalized)))


def preset_graph(name, n):
    """
    Named connectivity graph.

    Parameters
    ----------
    name : {"unrestricted", "line", "manila", "quito"}
        "unrestricted" connects every pair and "line" connects (i, i + 1).
        "manila" is a five-qubit line; "quito" is the five-qubit T shape
        {(0, 1), (1, 2), (1, 3), (3, 4)}.
    n : int
        Number of qubits, at least 2; "manila" and "quito" require 5.
    """
    if name not in _PRESETS:
        raise ValueError(f"unknown graph preset; got {name!r}")
    build, required = _PRESETS[name]
    if n < 2:
        raise ValueError(f"graphs need at least 2 qubits; got {n}")
    if required is not None and n != required:
        raise ValueError(f"{name} requires {required} qubits; got {n}")
    return connectivity_graph(n, build(n))


def build_action_set(graph):
    """
    Both CNOT directions for every edge, sorted by (control, target), then
    STOP.
    """
    directed = sorted(pair for i, j in graph.edges for pair in ((i, j), (j, i)))
    return ActionSet(tuple(directed) + (STOP,))


# Builders ---------------------------------------------------------------------


def empty_circuit(n):
    return Circuit(n, (), 0)


def append_gate(circuit, kind, qubits):
    """
    Return a new circuit with one gate appended; parameterized gates take the
    next free slots.
    """
    if kind not in NUM_PARAMS:
        raise ValueError(f"unknown gate kind; got {kind!r}")
    qubits = tuple(int(q) for q in qubits)
    if len(qubits) != NUM_QUBITS[kind]:
        raise ValueError(f"{kind} acts on {NUM_QUBITS[kind]} qubits; got {qubits}")
    _check_op_qubits(kind, qubits, circuit.n_qubits)
    k = NUM_PARAMS[kind]
    slot = circuit.n_params if k else None
    return Circuit(
        circuit.n_qubits,
        circuit.ops + (GateOp(kind, qubits, slot),),
        circuit.n_params + k,
    )


def _check_op_qubits(kind, qubits, n):
    if any(not 0 <= q < n for q in qubits):
        raise ValueError(f"qubit indices must be in range(0, {n}); got {qubits}")
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"{kind} control and target must differ; got {qubits}")


def concat(first, second):
    """
    Circuit running `first` then `second`; the slots of `second` follow those
    of `first`.
    """
    if first.n_qubits != second.n_qubits:
        raise ValueError("circuits must have the same number of qubits")
    shift = first.n_params
    shifted = tuple(
        op if op.slot is None else op._replace(slot=op.slot + shift)
        for op in second.ops
    )
    n_params = first.n_params + second.n_params
    return Circuit(first.n_qubits, first.ops + shifted, n_params)


def rotation_layer(circuit, kind=U3, qubits=None):
    """
    Append one local gate of the given kind on each qubit.
    """
    for q in range(circuit.n_qubits) if qubits is None else qubits:
        circuit = append_gate(circuit, kind, (q,))
    return circuit


def initial_circuit(n):
    """
    The circuit an episode starts from: one U3 on every qubit.
    """
    return rotation_layer(empty_circuit(n))


def action_block(action, slot_base=0):
    """
    Gates for one agent action: CNOT(c, t) then U3 on c and U3 on t.

    The two U3 gates consume six slots starting at `slot_base`.

    Raises
    ------
    ValueError
        If the action is STOP.
    """
    if action == STOP:
        raise ValueError("STOP has no gate block")
    c, t = action
    return [
        GateOp(CX, (c, t), None),
        GateOp(U3, (c,), slot_base),
        GateOp(U3, (t,), slot_base + 3),
    ]


def block_circuit(n, action):
    """
    Stand-alone circuit holding a single action block.
    """
    ops = tuple(action_block(action))
    for op in ops:
        _check_op_qubits(op.kind, op.qubits, n)
    return Circuit(n, ops, 6)


def append_action(circuit, action):
    return concat(circuit, block_circuit(circuit.n_qubits, action))


def append_basis_correction(circuit, b):
    """
    Append X on every qubit whose bit in basis index b is set, taking |b> to
    |0...0>.
    """
    n = circuit.n_qubits
    if not 0 <= b < 2**n:
        raise ValueError(f"basis index must be in range(0, {2**n}); got {b}")
    for q in range(n):
        if (b >> (n - 1 - q)) & 1:
            circuit = append_gate(circuit, X, (q,))
    return circuit


def check_circuit(circuit):
    """
    Check qubit indices and that parameter slots tile 0..n_params-1.

    Raises
    ------
    ValueError
        On any inconsistency.
    """
    n = circuit.n_qubits
    ranges = []
    for op in circuit.ops:
        if op.kind not in NUM_PARAMS:
            raise ValueError(f"unknown gate kind; got {op.kind!r}")
        if len(op.qubits) != NUM_QUBITS[op.kind]:
            raise ValueError(f"{op.kind} acts on {NUM_QUBITS[op.kind]} qubits")
        _check_op_qubits(op.kind, op.qubits, n)
        k = NUM_PARAMS[op.kind]
        if k:
            if op.slot is None:
                raise ValueError(f"{op.kind} needs a parameter slot")
            ranges.append((op.slot, op.slot + k))
        elif op.slot is not None:
            raise ValueError(f"{op.kind} takes no parameters")
    position = 0
    for start, stop in sorted(ranges):
        if start != position:
            raise ValueError("parameter slots must be disjoint and contiguous")
        position = stop
    if position != circuit.n_params:
        raise ValueError(
            f"parameter slots must cover {circuit.n_params} entries; got {position}"
        )
    return circuit


# Queries ----------------------------------------------------------------------


def cnot_sequence(circuit):
    return [op.qubits for op in circuit.ops if op.kind == CX]


def cnot_count(circuit):
    return sum(op.kind == CX for op in circuit.ops)


# Simulation -------------------------------------------------------------------


def _param_rows(circuit, params):
    rows = np.asarray(params, dtype=float)
    single = rows.ndim == 1
    rows = rows.reshape(1, -1) if single else rows
    if rows.ndim != 2 or rows.shape[1] != circuit.n_params:
        raise ValueError(
            f"circuit takes {circuit.n_params} parameters; got shape {np.shape(params)}"
        )
    return rows, single


def _simulate(circuit, rows, tensor, conjugate):
    n = circuit.n_qubits
    step = conjugate_gate if conjugate else apply_gate
    for op in circuit.ops:
        k = NUM_PARAMS[op.kind]
        angles = rows[:, op.slot : op.slot + k] if k else None
        tensor = step(tensor, gate_matrices(op.kind, angles), op.qubits, n)
    if tensor.shape[0] != rows.shape[0]:
        tensor = np.broadcast_to(tensor, (rows.shape[0],) + tensor.shape[1:]).copy()
    return tensor


def circuit_unitary(circuit, params):
    """
    The unitary implemented by a circuit: the ordered product of its gates,
    later gates on the left.

    Raises
    ------
    ValueError
        If the number of parameters does not match.
    """
    rows, _ = _param_rows(circuit, params)
    if rows.shape[0] != 1:
        raise ValueError("circuit_unitary takes a single parameter vector")
    eye = np.eye(2**circuit.n_qubits, dtype=complex)[np.newaxis]
    return _simulate(circuit, rows, eye, conjugate=False)[0]


def evolve_circuit(circuit, params, mat):
    """
    U_C rho U_C^dagger for a density matrix given as an array.

    `params` may be a single vector, giving a (d, d) result, or a
    (batch, n_params) array, giving (batch, d, d).
    """
    rows, single = _param_rows(circuit, params)
    mats = np.asarray(mat, dtype=complex)[np.newaxis]
    out = _simulate(circuit, rows, mats, conjugate=True)
    return out[0] if single else out


def run_circuit(circuit, params, amps):
    """
    U_C |psi> for an amplitude vector; batched over parameter rows like
    evolve_circuit.
    """
    rows, single = _param_rows(circuit, params)
    states = np.asarray(amps, dtype=complex).reshape(1, -1, 1)
    out = _simulate(circuit, rows, states, conjugate=False)[..., 0]
    return out[0] if single else out


# Inversion --------------------------------------------------------------------


def invert(circuit):
    """
    Circuit with the gate order reversed.

    Slots are kept, so invert(invert(c)) == c. Together with invert_params
    the result implements the inverse unitary: CX and X are self-inverse,
    U3(theta, phi, lam) becomes U3(-theta, -lam, -phi) and rotations are
    negated.
    """
    return Circuit(circuit.n_qubits, tuple(reversed(circuit.ops)), circuit.n_params)


def invert_params(circuit, params):
    """
    Parameter vector for `invert(circuit)` that yields the inverse unitary.
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise ValueError(
            f"circuit takes {circuit.n_params} parameters; got shape {params.shape}"
        )
    inverted = params.copy()
    for op in circuit.ops:
        if op.kind == U3:
            theta, phi, lam = params[op.slot : op.slot + 3]
            inverted[op.slot : op.slot + 3] = (-theta, -lam, -phi)
        elif NUM_PARAMS[op.kind]:
            inverted[op.slot] = -params[op.slot]
    return inverted
