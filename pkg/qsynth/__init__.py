"""
Interface for the qsynth package.
"""

from qsynth.agent import (
    Agent,
    ReplayBuffer,
    action_key,
    compute_q_targets,
    encode_input,
    load_agent,
    save_agent,
    schedule_cin,
    schedule_threshold,
    select_action,
    update,
)
from qsynth.baseline import build_layered, evaluate_layered, layered_spec
from qsynth.circuit import (
    action_block,
    build_action_set,
    circuit_unitary,
    cnot_count,
    connectivity_graph,
    evolve_circuit,
    initial_circuit,
    invert,
    invert_params,
    preset_graph,
    run_circuit,
)
from qsynth.config import AgentConfig, OptimizerConfig, RunConfig, load_config
from qsynth.core import STOP
from qsynth.errors import (
    BudgetError,
    CheckpointError,
    OptimizationError,
    ValidationError,
)
from qsynth.format import export, import_circuit
from qsynth.mlp import gradient_check, polyak, train_batch
from qsynth.popt import (
    bfgs_minimize,
    optimize_fidelity,
    optimize_global,
    optimize_local_step,
)
from qsynth.qcore import (
    closest_basis_state,
    coherence_loss,
    density_matrix,
    embed,
    evolve,
    fidelity,
    fidelity_general,
    ghz_state,
    haar_state,
    pure_state,
    sample_structured_target,
    w_state,
)
from qsynth.synth import (
    brute_force_oracle,
    evaluate,
    generate_circuit,
    run_episode,
    score_sequence,
    train,
    wstate_ladder,
)

__all__ = [
    # States and figures of merit
    "closest_basis_state",
    "coherence_loss",
    "density_matrix",
    "embed",
    "evolve",
    "fidelity",
    "fidelity_general",
    "ghz_state",
    "haar_state",
    "pure_state",
    "sample_structured_target",
    "w_state",
    # Circuits
    "STOP",
    "action_block",
    "build_action_set",
    "circuit_unitary",
    "cnot_count",
    "connectivity_graph",
    "evolve_circuit",
    "export",
    "import_circuit",
    "initial_circuit",
    "invert",
    "invert_params",
    "preset_graph",
    "run_circuit",
    # Parameter optimization
    "bfgs_minimize",
    "optimize_fidelity",
    "optimize_global",
    "optimize_local_step",
    # Learning
    "Agent",
    "ReplayBuffer",
    "action_key",
    "compute_q_targets",
    "encode_input",
    "gradient_check",
    "load_agent",
    "polyak",
    "save_agent",
    "schedule_cin",
    "schedule_threshold",
    "select_action",
    "train_batch",
    "update",
    # Synthesis
    "brute_force_oracle",
    "build_layered",
    "evaluate",
    "evaluate_layered",
    "generate_circuit",
    "layered_spec",
    "run_episode",
    "score_sequence",
    "train",
    "wstate_ladder",
    # Configuration
    "AgentConfig",
    "OptimizerConfig",
    "RunConfig",
    "load_config",
    # Exceptions
    "BudgetError",
    "CheckpointError",
    "OptimizationError",
    "ValidationError",
]
