"""
Representations of intermediate values.
"""

import math
from collections import namedtuple

#: Pure quantum state.

# `n_qubits` is the number of qubits n.
# `amps` is a read-only complex numpy vector of length 2**n with unit norm.
#
# Basis-state index b encodes qubit 0 as the most-significant bit, so for
# n = 3 the index 0b100 is the state with qubit 0 set.
PureState = namedtuple("PureState", ["n_qubits", "amps"])

#: Density matrix of an n-qubit state.

# `mat` is a read-only complex 2**n x 2**n numpy array: Hermitian, unit
# trace, positive semi-definite (up to rounding).
DensityMatrix = namedtuple("DensityMatrix", ["n_qubits", "mat"])

#: Partition of the qubits 0..n-1 into disjoint blocks.

# `blocks` is a tuple of sorted tuples of qubit indices.
QubitPartition = namedtuple("QubitPartition", ["n_qubits", "blocks"])

#: A single gate in a circuit.

# `kind` is one of the gate-kind strings defined in qsynth.qcore ("cx", "u3",
# "ry", "rz", "x").
# `qubits` is a tuple of qubit indices: (control, target) for "cx", a
# 1-tuple otherwise.
# `slot` is the index of the first parameter consumed by the gate in the
# circuit's parameter vector, or None for parameter-free gates.
GateOp = namedtuple("GateOp", ["kind", "qubits", "slot"])

#: Ordered gate sequence with indexed parameter slots.

# `ops` is a tuple of GateOp; `n_params` is the length of the parameter
# vector the circuit expects.
Circuit = namedtuple("Circuit", ["n_qubits", "ops", "n_params"])

#: Undirected CNOT connectivity.

# `edges` is a sorted tuple of (i, j) pairs with i < j.
ConnectivityGraph = namedtuple("ConnectivityGraph", ["n_qubits", "edges"])

#: Marker for the stopping action.
STOP = "stop"


class ActionSet(namedtuple("ActionSet", ["actions"])):
    """
    The agent's output space: every directed CNOT the graph permits, sorted
    by (control, target), followed by STOP.
    """

    __slots__ = ()

    @property
    def d_out(self):
        return len(self.actions)

    @property
    def stop_index(self):
        return len(self.actions) - 1

    def encode(self, action):
        """
        Index of an action, given as a (control, target) pair or STOP.
        """
        try:
            return self.actions.index(action if action == STOP else tuple(action))
        except ValueError:
            raise ValueError(f"action is not in the action set; got {action!r}")

    def decode(self, index):
        """
        Action at a given output index.
        """
        if not 0 <= index < len(self.actions):
            raise ValueError(
                f"action index must be in range(0, {len(self.actions)}); got {index}"
            )
        return self.actions[index]


#: Result of a continuous-parameter optimization.

# `best_params` is a float numpy vector, `best_value` the objective there,
# `iters_used` the total number of BFGS iterations over all restarts, and
# `converged` True when the best restart met the gradient tolerance.
OptResult = namedtuple(
    "OptResult", ["best_params", "best_value", "iters_used", "converged"]
)


class EncoderSpec(
    namedtuple("EncoderSpec", ["n_qubits", "d_out", "max_actions", "c_in"])
):
    """
    Shape of the network input for a given system size and action set.

    The input is the real and imaginary parts of rho - I/d followed by
    `max_actions` action keys of `key_width` entries each.
    """

    __slots__ = ()

    @property
    def d(self):
        return 2**self.n_qubits

    @property
    def key_width(self):
        return max(1, math.ceil(math.log2(self.d_out)))

    @property
    def d_in(self):
        return 2 * self.d**2 + self.max_actions * self.key_width


#: Stored agent experience.

# `state` and `next_state` are (rho, history) pairs: rho a complex numpy
# array and history a tuple of action indices.
# `next_legal` is the boolean action mask at `next_state`.
Transition = namedtuple(
    "Transition",
    ["state", "action", "reward", "next_state", "terminal", "next_legal"],
)

#: Outcome of a single circuit-generation episode.

# `circuit` and `params` describe the basis-corrected circuit mapping the
# target to |0...0>; `sequence` is the list of (control, target) pairs chosen.
EpisodeRecord = namedtuple(
    "EpisodeRecord",
    [
        "target",
        "transitions",
        "circuit",
        "params",
        "fidelity",
        "cnots",
        "sequence",
        "reward",
        "failed",
    ],
)

#: One row of training metrics.
EpisodeMetrics = namedtuple(
    "EpisodeMetrics",
    [
        "episode",
        "fidelity",
        "cnots",
        "threshold",
        "c_in",
        "epsilon",
        "loss",
        "success",
    ],
)

#: Summary of a batch of fidelities.

# `interval` is the (low, high) pair of the smallest interval containing 95%
# of the samples; `histogram` maps CNOT counts to frequencies.
EvalMetrics = namedtuple(
    "EvalMetrics",
    ["mean_fidelity", "interval", "mean_cnots", "histogram", "fidelities", "cnots"],
)

#: Best fidelity reachable with at most k CNOTs, and the sequence achieving it.
OracleResult = namedtuple("OracleResult", ["max_cnots", "fidelity", "sequence"])

#: Layered hardware-efficient ansatz description.

# `kind` is "linear" or "pairwise"; `local_gate` is "rzry" or "u3".
LayeredSpec = namedtuple("LayeredSpec", ["kind", "n_qubits", "layers", "local_gate"])

#: Circuit preparing a target from |0...0>.

# `params` binds the circuit's slots; `fidelity` is the overlap of the
# prepared state with the target and `sequence` the CNOT (control, target)
# pairs in circuit order.
PreparationCircuit = namedtuple(
    "PreparationCircuit", ["circuit", "params", "fidelity", "sequence"]
)

#: Outcome of a training run.

# `rows` holds one EpisodeMetrics per episode; `wall_clock` is in seconds.
TrainReport = namedtuple("TrainReport", ["rows", "wall_clock", "seed", "agent"])
