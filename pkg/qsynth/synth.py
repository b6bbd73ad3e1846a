"""
Circuit synthesis: episodes, training, evaluation and reference solutions.

An episode builds a circuit that maps a target state to |0...0>. It starts
from one U3 on every qubit, then each action appends a CNOT block whose
parameters are fitted to make the state as diagonal as possible. When the
agent stops, all parameters are refitted jointly and X gates move the most
likely basis state to |0...0>. The inverse of that circuit prepares the
target.
"""

import itertools
import logging
import os
import re
import time
from collections import deque

import numpy as np

from qsynth.agent import (
    Agent,
    ReplayBuffer,
    epsilon_at,
    legal_actions,
    save_agent,
    schedule_cin,
    schedule_threshold,
    select_action,
)
from qsynth.circuit import (
    append_action,
    append_basis_correction,
    append_gate,
    block_circuit,
    build_action_set,
    cnot_sequence,
    connectivity_graph,
    empty_circuit,
    evolve_circuit,
    initial_circuit,
    invert,
    invert_params,
    preset_graph,
    rotation_layer,
)
from qsynth.config import AgentConfig, OptimizerConfig
from qsynth.core import (
    STOP,
    EpisodeMetrics,
    EpisodeRecord,
    OracleResult,
    PreparationCircuit,
    TrainReport,
    Transition,
)
from qsynth.errors import BudgetError, OptimizationError
from qsynth.generics import to_density
from qsynth.metrics import TRAIN_COLUMNS, parallel_map, summarize, write_csv
from qsynth.popt import optimize_fidelity, optimize_global, optimize_local_step
from qsynth.qcore import (
    CX,
    RY,
    U3,
    MAX_QUBITS,
    basis_state,
    ghz_state,
    haar_state,
    projector,
    qubit_partition,
    random_partition,
    sample_structured_state,
    w_state,
)

logger = logging.getLogger(__name__)

#: Largest system and CNOT count the brute-force oracle accepts.
ORACLE_MAX_QUBITS = 4
ORACLE_MAX_CNOTS = 5

#: Fidelity at which the oracle stops searching longer sequences.
ORACLE_EXACT = 1.0 - 1e-9

#: Fidelity the W ladder must reach before falling back to U3 locals.
LADDER_GOAL = 0.999

# Episodes ---------------------------------------------------------------------


def _unrestricted_actions(n):
    graph = connectivity_graph(n, itertools.combinations(range(n), 2))
    return build_action_set(graph)


def _basis_fidelity(circuit, params, mat):
    final = evolve_circuit(circuit, params, mat)
    b = int(np.argmax(np.real(np.diag(final))))
    return float(min(max(np.real(final[b, b]), 0.0), 1.0)), b


def run_episode(
    target, agent=None, cfg=None, explore=False, rng=None, budget=None, forced=None
):
    """
    Build a circuit mapping `target` to |0...0>.

    Parameters
    ----------
    target : DensityMatrix or PureState
    agent : Agent, optional
        Chooses the actions. Without an agent, `forced` must be given and
        the unrestricted action set is used.
    cfg : OptimizerConfig, optional
        Defaults to the agent's optimizer settings.
    explore : bool, optional
        Use the agent's current epsilon; otherwise act greedily.
    rng : numpy.random.Generator, optional
    budget : int, optional
        Maximum number of CNOTs; once reached only STOP is legal.
    forced : sequence of (control, target) pairs, optional
        Play these actions, then STOP, instead of asking the agent.

    Returns
    -------
    record : EpisodeRecord
        The last transition is terminal and carries the reward, which is
        reward_scale * F when the infidelity 1 - F is below the agent's
        threshold and 0 otherwise. If an optimization fails the episode is
        marked failed with fidelity and reward 0.
    """
    rho_t = to_density(target)
    n = rho_t.n_qubits
    if agent is None and forced is None:
        raise ValueError("run_episode needs an agent or a forced action sequence")
    if agent is not None and agent.encoder.n_qubits != n:
        raise ValueError(
            f"agent acts on {agent.encoder.n_qubits} qubits; target has {n}"
        )
    if agent is not None:
        action_set = agent.action_set
        max_actions = agent.encoder.max_actions
        settings = agent.config
        threshold = agent.threshold
        cfg = agent.optimizer if cfg is None else cfg
    else:
        action_set = _unrestricted_actions(n)
        max_actions = len(forced)
        settings = AgentConfig()
        threshold = settings.threshold_start
        cfg = OptimizerConfig() if cfg is None else cfg
    if forced is not None and len(forced) > max_actions:
        raise ValueError(f"forced sequence must hold at most {max_actions} actions")
    rng = np.random.default_rng() if rng is None else rng
    eps = agent.epsilon if explore and agent is not None else 0.0

    circuit = initial_circuit(n)
    chunks, history, sequence, transitions = [], [], [], []
    failed = False
    try:
        x, rho, _ = optimize_local_step(circuit, rho_t, cfg)
        chunks.append(x)
        state = (rho.mat, ())
        for k in range(max_actions):
            legal = legal_actions(action_set, len(sequence), budget)
            if forced is not None:
                action = forced[k] if k < len(forced) else STOP
                index = action_set.encode(action)
            else:
                qvals = agent.q_values(rho, history)
                index = select_action(
                    qvals, legal, eps, settings.p_prior, settings.top_q, rng
                )
            if index == action_set.stop_index:
                transitions.append(Transition(state, index, 0.0, state, True, legal))
                break
            action = action_set.decode(index)
            x, rho, _ = optimize_local_step(block_circuit(n, action), rho, cfg)
            circuit = append_action(circuit, action)
            chunks.append(x)
            sequence.append(action)
            history.append(index)
            next_state = (rho.mat, tuple(history))
            next_legal = legal_actions(action_set, len(sequence), budget)
            transitions.append(
                Transition(state, index, 0.0, next_state, False, next_legal)
            )
            state = next_state

        x0 = np.concatenate(chunks)
        result = optimize_global(circuit, rho_t, cfg, x0=x0)
        params = result.best_params
        fid, b = _basis_fidelity(circuit, params, rho_t.mat)
        local_fid, local_b = _basis_fidelity(circuit, x0, rho_t.mat)
        if local_fid > fid:
            params, fid, b = x0, local_fid, local_b
    except OptimizationError as exc:
        logger.warning("episode failed: %s", exc)
        failed = True
        params = np.concatenate(chunks) if chunks else np.zeros(circuit.n_params)
        fid, b = 0.0, 0

    reward = 0.0
    if not failed and 1.0 - fid < threshold:
        reward = settings.reward_scale * fid
    if transitions:
        transitions[-1] = transitions[-1]._replace(terminal=True, reward=reward)
    logger.debug(
        "episode: %d CNOTs, fidelity %.6f, reward %.4f", len(sequence), fid, reward
    )
    return EpisodeRecord(
        rho_t,
        transitions,
        append_basis_correction(circuit, b),
        params,
        fid,
        len(sequence),
        sequence,
        reward,
        failed,
    )


def generate_circuit(target, agent, cfg=None, budget=None):
    """
    Greedy episode on `target`, inverted into a circuit preparing it from
    |0...0>.

    Returns
    -------
    result : PreparationCircuit
    """
    record = run_episode(target, agent, cfg, budget=budget)
    circuit = invert(record.circuit)
    params = invert_params(record.circuit, record.params)
    return PreparationCircuit(circuit, params, record.fidelity, cnot_sequence(circuit))


# Targets ----------------------------------------------------------------------

_BLOCKS_PATTERN = re.compile(r"\A\d+(?:\+\d+)*\Z")

#: Named target structures accepted by structured_targets, besides block
#: sizes such as "2+1+1".
STRUCTURES = ("entangled", "mixed", "product", "zero", "ghz", "w")


def _training_state(n, rng, entangled_fraction):
    if rng.random() < entangled_fraction:
        return haar_state(n, rng)
    return sample_structured_state(random_partition(n, rng), rng)


def sample_training_target(n, rng, entangled_fraction=0.5):
    """
    Training target: fully entangled with probability `entangled_fraction`,
    else a product of Haar states over a uniformly random partition of the
    qubits, with positions shuffled.
    """
    return projector(_training_state(n, rng, entangled_fraction))


def structured_targets(structure, n, count, rng, entangled_fraction=0.5):
    """
    `count` pure targets of a given structure.

    Parameters
    ----------
    structure : str
        "entangled" (Haar random), "mixed" (the training distribution),
        "product", "zero", "ghz", "w", or block sizes summing to n such as
        "2+1+1", each block a Haar state at shuffled positions.
    n, count : int
    rng : numpy.random.Generator
    """
    if structure == "entangled":
        return [haar_state(n, rng) for _ in range(count)]
    if structure == "mixed":
        return [_training_state(n, rng, entangled_fraction) for _ in range(count)]
    if structure == "zero":
        return [basis_state(n, 0)] * count
    if structure == "ghz":
        return [ghz_state(n)] * count
    if structure == "w":
        return [w_state(n)] * count
    if structure == "product":
        sizes = [1] * n
    elif _BLOCKS_PATTERN.match(structure):
        sizes = [int(size) for size in structure.split("+")]
    else:
        raise ValueError(f"unknown target structure; got {structure!r}")
    if sum(sizes) != n or min(sizes) < 1:
        raise ValueError(f"block sizes must be positive and sum to {n}; got {sizes}")
    bounds = np.cumsum([0] + sizes)
    partition = qubit_partition(
        [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])], n
    )
    return [sample_structured_state(partition, rng) for _ in range(count)]


# Training ---------------------------------------------------------------------


def _flush(run_dir, rows):
    if run_dir is not None and rows:
        path = os.path.join(run_dir, "metrics.csv")
        write_csv(path, TRAIN_COLUMNS, rows, append=True)


def train(config, run_dir=None):
    """
    Train an agent from scratch.

    Each episode samples a target from the training mixture, plays it with
    exploration, stores its transitions and updates the networks after each
    one. The reward threshold and the action-history scale c_in follow
    their schedules. Given the same config the run is deterministic.

    Parameters
    ----------
    config : RunConfig
    run_dir : str, optional
        Directory for metrics.csv, periodic checkpoint-NNNNNN.json files and
        the final agent.json. Nothing is written when omitted.

    Returns
    -------
    report : TrainReport
    """
    start = time.perf_counter()
    cfg = config.agent
    n = config.n_qubits
    rng = np.random.default_rng(config.seed)
    graph = preset_graph(config.graph, n)
    agent = Agent.create(graph, config.resolved_max_actions, rng, cfg, config.optimizer)
    buffer = ReplayBuffer(cfg.buffer_capacity)
    successes = deque(maxlen=cfg.success_window)
    episodes_at_target = 0
    rows, pending = [], []
    logger.info(
        "training %d episodes on %d qubits, %s graph, %d actions",
        config.episodes,
        n,
        config.graph,
        agent.action_set.d_out,
    )

    for episode in range(config.episodes):
        agent.epsilon = epsilon_at(episode, cfg)
        target = sample_training_target(n, rng, config.entangled_fraction)
        threshold = agent.threshold
        record = run_episode(target, agent, explore=True, rng=rng)
        loss = None
        for transition in record.transitions:
            buffer.push(transition)
            step_loss = agent.learn(buffer, rng)
            if step_loss is not None:
                loss = step_loss
        success = not record.failed and 1.0 - record.fidelity < threshold
        row = EpisodeMetrics(
            episode,
            record.fidelity,
            record.cnots,
            threshold,
            agent.c_in,
            agent.epsilon,
            loss,
            success,
        )
        rows.append(row)
        pending.append(row)

        successes.append(success)
        tightened = schedule_threshold(successes, agent.threshold, cfg)
        if tightened != agent.threshold:
            logger.info(
                "episode %d: threshold %.4g -> %.4g",
                episode,
                agent.threshold,
                tightened,
            )
            agent.threshold = tightened
            successes.clear()
        if agent.threshold <= cfg.threshold_target:
            episodes_at_target += 1
        c_in = schedule_cin(agent.c_in, episodes_at_target, agent.threshold, cfg)
        if c_in != agent.c_in:
            logger.info("episode %d: c_in %.4g -> %.4g", episode, agent.c_in, c_in)
            agent.c_in = c_in

        if (episode + 1) % config.log_every == 0:
            recent = rows[-config.log_every :]
            logger.info(
                "episode %d: mean fidelity %.4f, mean CNOTs %.2f, epsilon %.3f",
                episode + 1,
                np.mean([r.fidelity for r in recent]),
                np.mean([r.cnots for r in recent]),
                agent.epsilon,
            )
        every = config.checkpoint_every
        if run_dir is not None and every and (episode + 1) % every == 0:
            _flush(run_dir, pending)
            pending = []
            name = f"checkpoint-{episode + 1:06d}.json"
            save_agent(agent, os.path.join(run_dir, name))

    if run_dir is not None:
        _flush(run_dir, pending)
        if not rows:
            write_csv(os.path.join(run_dir, "metrics.csv"), TRAIN_COLUMNS, [])
        save_agent(agent, os.path.join(run_dir, "agent.json"))
    return TrainReport(rows, time.perf_counter() - start, config.seed, agent)


# Evaluation -------------------------------------------------------------------


def evaluate(
    agent, n_states, structure="entangled", cfg=None, budget=None, seed=0, threads=1
):
    """
    Greedy episodes on fresh targets.

    Targets and per-episode seeds are drawn up front from `seed`, so the
    result does not depend on `threads`.

    Returns
    -------
    metrics : EvalMetrics
    """
    rng = np.random.default_rng(seed)
    n = agent.encoder.n_qubits
    targets = structured_targets(structure, n, n_states, rng)
    seeds = rng.integers(2**63, size=len(targets))

    def play(item):
        psi, item_seed = item
        rng = np.random.default_rng(item_seed)
        record = run_episode(psi, agent, cfg, rng=rng, budget=budget)
        return record.fidelity, record.cnots

    results = parallel_map(play, list(zip(targets, seeds)), threads)
    metrics = summarize([f for f, _ in results], [c for _, c in results])
    logger.info(
        "evaluated %d %s targets: mean fidelity %.4f, interval [%.4f, %.4f]",
        n_states,
        structure,
        metrics.mean_fidelity,
        *metrics.interval,
    )
    return metrics


# Brute-force oracle -----------------------------------------------------------


def oracle_sequences(graph, max_cnots):
    """
    Candidate CNOT sequences of length 0..max_cnots, shortest first.

    CNOT(c, t) and CNOT(t, c) are equivalent up to the U3 gates around them,
    so only (min, max) orientations are listed. Repeating an edge back to
    back is skipped, and consecutive blocks on disjoint edges commute, so
    only their increasing order is kept.
    """
    edges = list(graph.edges)
    found = [()]
    frontier = [()]
    for _ in range(max_cnots):
        grown = []
        for prefix in frontier:
            for i, edge in enumerate(edges):
                if prefix:
                    last = edges.index(prefix[-1])
                    if i == last:
                        continue
                    if not set(edge) & set(prefix[-1]) and i < last:
                        continue
                grown.append(prefix + (edge,))
        found.extend(grown)
        frontier = grown
    return found


def _sequence_circuit(n, sequence):
    circuit = initial_circuit(n)
    for action in sequence:
        circuit = append_action(circuit, action)
    return circuit


def _score_sequence(target, rho, sequence, cfg):
    circuit = _sequence_circuit(target.n_qubits, sequence)
    coarse = optimize_global(circuit, rho, cfg)
    fid, b = _basis_fidelity(circuit, coarse.best_params, rho.mat)
    corrected = append_basis_correction(circuit, b)
    fine = optimize_fidelity(corrected, target, cfg, x0=coarse.best_params)
    return max(fid, 1.0 - fine.best_value)


def score_sequence(target, sequence, cfg=None):
    """
    Best fidelity reachable with one fixed sequence of CNOT blocks, fitted
    the way brute_force_oracle fits each candidate.

    Raises
    ------
    ValueError
        If a pair in `sequence` is not two distinct qubits of the target.
    """
    cfg = OptimizerConfig() if cfg is None else cfg
    fid = _score_sequence(target, projector(target), sequence, cfg)
    return OracleResult(len(sequence), fid, [tuple(pair) for pair in sequence])


def brute_force_oracle(target, max_cnots, graph=None, cfg=None, threads=1):
    """
    Best fidelity reachable with at most `max_cnots` CNOT blocks.

    Every sequence from oracle_sequences is fitted by the coherence-loss
    global optimization, X gates move the most likely basis state to
    |0...0>, and the result is polished by direct fidelity maximization.
    Lengths are searched in increasing order, stopping after the first
    length that prepares the target exactly.

    Parameters
    ----------
    target : PureState
    max_cnots : int
    graph : ConnectivityGraph, optional
        Defaults to all pairs.
    cfg : OptimizerConfig, optional
    threads : int, optional

    Returns
    -------
    result : OracleResult
        Ties go to the shortest, then first-listed, sequence.

    Raises
    ------
    BudgetError
        For more than 4 qubits or more than 5 CNOTs.
    """
    n = target.n_qubits
    if n > ORACLE_MAX_QUBITS or max_cnots > ORACLE_MAX_CNOTS:
        raise BudgetError(
            f"brute force is limited to {ORACLE_MAX_QUBITS} qubits and "
            f"{ORACLE_MAX_CNOTS} CNOTs; got {n} qubits and {max_cnots} CNOTs"
        )
    if max_cnots < 0:
        raise ValueError(f"max_cnots must be non-negative; got {max_cnots}")
    if graph is None:
        graph = connectivity_graph(n, itertools.combinations(range(n), 2))
    elif graph.n_qubits != n:
        raise ValueError(f"graph must have {n} qubits; got {graph.n_qubits}")
    cfg = OptimizerConfig() if cfg is None else cfg
    rho = projector(target)

    def score(sequence):
        return _score_sequence(target, rho, sequence, cfg)

    sequences = oracle_sequences(graph, max_cnots)
    best = OracleResult(max_cnots, -1.0, [])
    for length in range(max_cnots + 1):
        group = [s for s in sequences if len(s) == length]
        scores = parallel_map(score, group, threads)
        for sequence, fid in zip(group, scores):
            if fid > best.fidelity:
                best = OracleResult(max_cnots, fid, list(sequence))
        logger.info(
            "oracle: %d sequences of length %d, best fidelity so far %.6f",
            len(group),
            length,
            best.fidelity,
        )
        if best.fidelity >= ORACLE_EXACT:
            break
    return best


# W-state ladder ---------------------------------------------------------------


def ladder_circuit(n, local=RY):
    """
    Ladder circuit with 2(n - 1) - 1 CNOTs generalizing a four-qubit
    W-state preparation.

    A first pass places CNOT(i, i + 1) for i = 0..n-2, each preceded by
    local gates on its two qubits. A second pass repeats this for
    i = 0..n-3, and a final layer of local gates covers every qubit.
    """
    if not 2 <= n <= MAX_QUBITS:
        raise ValueError(f"n must be in range(2, {MAX_QUBITS + 1}); got {n}")
    circuit = empty_circuit(n)
    for span in (n - 1, n - 2):
        if span == 0:
            break
        circuit = rotation_layer(circuit, local, (0, 1))
        for i in range(span):
            circuit = append_gate(circuit, CX, (i, i + 1))
            if i + 1 < span:
                circuit = rotation_layer(circuit, local, (i + 1, i + 2))
    return rotation_layer(circuit, local)


def wstate_ladder(n, cfg=None, local=RY):
    """
    Ladder circuit fitted to prepare the n-qubit W state.

    Angles start from a random point drawn with `cfg.seed`. If RY locals do
    not reach a fidelity of 0.999, the fit is repeated with U3 locals.

    Returns
    -------
    result : PreparationCircuit
    """
    cfg = OptimizerConfig() if cfg is None else cfg
    psi = w_state(n)
    circuit = ladder_circuit(n, local)
    rng = np.random.default_rng(cfg.seed)
    x0 = rng.uniform(-np.pi, np.pi, circuit.n_params)
    result = optimize_fidelity(circuit, psi, cfg, x0=x0, prepare=True)
    fid = 1.0 - result.best_value
    if fid < LADDER_GOAL and local != U3:
        logger.warning(
            "%s ladder reached fidelity %.6f on %d qubits; retrying with u3",
            local,
            fid,
            n,
        )
        return wstate_ladder(n, cfg, U3)
    logger.info("W ladder on %d qubits: fidelity %.9f", n, fid)
    return PreparationCircuit(circuit, result.best_params, fid, cnot_sequence(circuit))
