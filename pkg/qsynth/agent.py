"""
Double deep Q-network agent.

The agent sees a density matrix and the list of actions taken so far, and
scores every action of its ActionSet. States are encoded as the real and
imaginary parts of rho - I/d followed by one zero-mean binary key per past
action, scaled by c_in and padded with zeros to a fixed length.

Agent checkpoint format (json)::

    {"format": "qsynth-agent", "version": 1,
     "agent": {AgentConfig fields}, "optimizer": {OptimizerConfig fields},
     "encoder": {"n_qubits", "d_out", "max_actions", "c_in"},
     "graph": {"n_qubits", "edges"},
     "online": <network record>, "target": <network record>,
     "threshold": float, "epsilon": float}

Adam moments are not saved; a resumed agent starts with fresh moments.
"""

import json
import logging

import numpy as np

from qsynth.circuit import build_action_set, connectivity_graph
from qsynth.config import AgentConfig, OptimizerConfig
from qsynth.core import DensityMatrix, EncoderSpec
from qsynth.errors import CheckpointError
from qsynth.mlp import (
    AdamState,
    forward,
    from_record,
    init,
    polyak,
    to_record,
    train_batch,
)

logger = logging.getLogger(__name__)

_FORMAT_NAME = "qsynth-agent"
_FORMAT_VERSION = 1


# Encoding ---------------------------------------------------------------------


def action_key(i, w):
    """
    Binary key of action index i: its w bits, most significant first, with
    each bit b mapped to b - 0.5.
    """
    if not 0 <= i < 2**w:
        raise ValueError(f"action index must be in range(0, {2**w}); got {i}")
    bits = (i >> np.arange(w - 1, -1, -1)) & 1
    return bits - 0.5


def encode_input(rho, history, spec):
    """
    Network input for a state.

    Parameters
    ----------
    rho : DensityMatrix or complex numpy array
    history : sequence of int
        Indices of the actions taken so far, at most `spec.max_actions`.
    spec : EncoderSpec

    Returns
    -------
    x : float numpy vector of length spec.d_in
    """
    mat = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho)
    d = spec.d
    if mat.shape != (d, d):
        raise ValueError(f"density matrix must have shape {(d, d)}; got {mat.shape}")
    if len(history) > spec.max_actions:
        raise ValueError(
            f"history must hold at most {spec.max_actions} actions; "
            f"got {len(history)}"
        )
    shifted = (mat - np.eye(d) / d).reshape(-1)
    x = np.zeros(spec.d_in)
    x[: d * d] = shifted.real
    x[d * d : 2 * d * d] = shifted.imag
    w = spec.key_width
    for j, action in enumerate(history):
        if not 0 <= action < spec.d_out:
            raise ValueError(
                f"action index must be in range(0, {spec.d_out}); got {action}"
            )
        start = 2 * d * d + j * w
        x[start : start + w] = spec.c_in * action_key(action, w)
    return x


def encode_batch(states, spec):
    """
    Inputs for a list of (rho, history) pairs, as a (batch, d_in) array.
    """
    return np.array([encode_input(rho, history, spec) for rho, history in states])


# Action selection -------------------------------------------------------------


def legal_actions(action_set, cnots_used, budget=None):
    """
    Boolean mask over the action set. STOP is always legal; CNOT actions are
    legal until `budget` CNOTs have been placed.
    """
    legal = np.ones(action_set.d_out, dtype=bool)
    if budget is not None and cnots_used >= budget:
        legal[:] = False
        legal[action_set.stop_index] = True
    return legal


def _greedy(qvals, legal):
    return int(np.argmax(np.where(legal, qvals, -np.inf)))


def select_action(qvals, legal, eps, p_prior, top_q, rng):
    """
    Epsilon-greedy choice with prioritized exploration.

    With probability 1 - eps the legal action of highest value is taken,
    ties going to the lowest index. Otherwise, with probability `p_prior`,
    the action is drawn uniformly from the `top_q` best legal actions, and
    else uniformly from all legal actions.
    """
    qvals = np.asarray(qvals, dtype=float)
    legal = np.asarray(legal, dtype=bool)
    if not legal.any():
        raise ValueError("at least one action must be legal")
    if rng.random() >= eps:
        return _greedy(qvals, legal)
    candidates = np.flatnonzero(legal)
    if rng.random() < p_prior:
        order = np.argsort(-qvals[candidates], kind="stable")
        candidates = candidates[order[:top_q]]
    return int(rng.choice(candidates))


# Learning ---------------------------------------------------------------------


def double_q_targets(
    rewards, terminal, q_online_next, q_target_next, next_legal, gamma
):
    """
    r for terminal transitions, else r + gamma * Q'(s', argmax_a Q(s', a))
    with the argmax taken over the legal actions at s'.
    """
    rewards = np.asarray(rewards, dtype=float)
    terminal = np.asarray(terminal, dtype=bool)
    masked = np.where(next_legal, q_online_next, -np.inf)
    best = np.argmax(masked, axis=1)
    bootstrap = q_target_next[np.arange(len(best)), best]
    return np.where(terminal, rewards, rewards + gamma * bootstrap)


def compute_q_targets(batch, online, target, gamma, encode):
    """
    Double-Q regression targets for a list of Transitions.

    `encode` maps a list of states to a (batch, d_in) input array. Terminal
    transitions do not evaluate either network.
    """
    rewards = np.array([t.reward for t in batch], dtype=float)
    terminal = np.array([t.terminal for t in batch], dtype=bool)
    if terminal.all():
        return rewards
    live = np.flatnonzero(~terminal)
    inputs = encode([batch[i].next_state for i in live])
    legal = np.array([batch[i].next_legal for i in live], dtype=bool)
    targets = rewards.copy()
    targets[live] = double_q_targets(
        rewards[live],
        terminal[live],
        forward(online, inputs),
        forward(target, inputs),
        legal,
        gamma,
    )
    return targets


class ReplayBuffer:
    """
    Fixed-capacity ring buffer of transitions, sampled uniformly.
    """

    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError(f"capacity must be positive; got {capacity}")
        self.capacity = capacity
        self._items = []
        #: Total number of transitions ever pushed.
        self.pushed = 0

    def __len__(self):
        return len(self._items)

    def push(self, transition):
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self.pushed % self.capacity] = transition
        self.pushed += 1

    def sample(self, size, rng):
        """
        `size` distinct stored transitions, chosen uniformly.
        """
        if size > len(self._items):
            raise ValueError(
                f"cannot sample {size} transitions from a buffer of {len(self)}"
            )
        chosen = rng.choice(len(self._items), size=size, replace=False)
        return [self._items[i] for i in chosen]


def update(buffer, online, target, adam, cfg, encode, rng):
    """
    One DDQN step: sample a batch, fit the online network to the double-Q
    targets and move the target network towards it.

    Returns
    -------
    loss : float or None
        The batch loss before the step, or None when the buffer holds fewer
        than `cfg.batch_size` transitions (nothing is changed).
    """
    if len(buffer) < cfg.batch_size:
        return None
    batch = buffer.sample(cfg.batch_size, rng)
    targets = compute_q_targets(batch, online, target, cfg.gamma, encode)
    inputs = encode([t.state for t in batch])
    actions = [t.action for t in batch]
    loss = train_batch(online, adam, inputs, actions, targets)
    polyak(target, online, cfg.tau)
    return loss


# Schedules --------------------------------------------------------------------


def schedule_threshold(successes, threshold, cfg):
    """
    Tightened infidelity threshold.

    `successes` holds one flag per recent episode. When the last
    `cfg.success_window` of them reach `cfg.success_criterion`, the
    threshold decays by `cfg.threshold_decay`, never below
    `cfg.threshold_target`.
    """
    window = list(successes)[-cfg.success_window :]
    if len(window) < cfg.success_window:
        return threshold
    if np.mean(window) >= cfg.success_criterion:
        return max(threshold * cfg.threshold_decay, cfg.threshold_target)
    return threshold


def schedule_cin(c_in, episodes_at_target, threshold, cfg):
    """
    Reduced action-history scale.

    Once the threshold has reached its target, c_in is multiplied by
    `cfg.cin_factor` every `cfg.cin_period` episodes.
    """
    if threshold > cfg.threshold_target or episodes_at_target <= 0:
        return c_in
    if episodes_at_target % cfg.cin_period == 0:
        return c_in * cfg.cin_factor
    return c_in


def epsilon_at(episode, cfg):
    """
    Exploration rate, annealed linearly from `epsilon_start` to
    `epsilon_end` over `epsilon_episodes` episodes.
    """
    if episode >= cfg.epsilon_episodes:
        return cfg.epsilon_end
    fraction = episode / cfg.epsilon_episodes
    return cfg.epsilon_start + fraction * (cfg.epsilon_end - cfg.epsilon_start)


# Agent ------------------------------------------------------------------------


class Agent:
    """
    Online and target networks with everything needed to act and learn.

    Attributes
    ----------
    graph : ConnectivityGraph
    action_set : ActionSet
    encoder : EncoderSpec
        Its `c_in` is the current action-history scale.
    online, target : Mlp
    adam : AdamState
    config : AgentConfig
    optimizer : OptimizerConfig
        Settings for the per-step and global parameter optimization.
    threshold : float
        Current infidelity threshold for rewards.
    epsilon : float
        Current exploration rate.
    """

    def __init__(
        self,
        graph,
        encoder,
        online,
        target,
        config=None,
        optimizer=None,
        threshold=None,
        epsilon=None,
    ):
        self.config = AgentConfig() if config is None else config
        self.optimizer = OptimizerConfig() if optimizer is None else optimizer
        self.graph = graph
        self.action_set = build_action_set(graph)
        if encoder.n_qubits != graph.n_qubits:
            raise ValueError("encoder and graph must have the same number of qubits")
        if encoder.d_out != self.action_set.d_out:
            raise ValueError(
                f"encoder must have {self.action_set.d_out} outputs; "
                f"got {encoder.d_out}"
            )
        if (online.d_in, online.d_out) != (encoder.d_in, encoder.d_out):
            raise ValueError(
                f"network must map {encoder.d_in} inputs to {encoder.d_out} outputs"
            )
        if target.layer_sizes != online.layer_sizes:
            raise ValueError(
                f"target network must have layer sizes {online.layer_sizes}; "
                f"got {target.layer_sizes}"
            )
        self.encoder = encoder
        self.online = online
        self.target = target
        self.adam = AdamState(online, lr=self.config.learning_rate)
        if threshold is None:
            threshold = self.config.threshold_start
        self.threshold = threshold
        self.epsilon = self.config.epsilon_start if epsilon is None else epsilon

    @classmethod
    def create(cls, graph, max_actions, rng, config=None, optimizer=None):
        """
        Fresh agent with randomly initialized networks; the target network
        starts as a copy of the online one.
        """
        config = AgentConfig() if config is None else config
        d_out = build_action_set(graph).d_out
        encoder = EncoderSpec(graph.n_qubits, d_out, max_actions, config.cin_start)
        online = init((encoder.d_in,) + tuple(config.hidden_layers) + (d_out,), rng)
        return cls(graph, encoder, online, online.copy(), config, optimizer)

    @property
    def c_in(self):
        return self.encoder.c_in

    @c_in.setter
    def c_in(self, value):
        self.encoder = self.encoder._replace(c_in=value)

    def encode_states(self, states):
        return encode_batch(states, self.encoder)

    def q_values(self, rho, history):
        return forward(self.online, encode_input(rho, history, self.encoder))

    def learn(self, buffer, rng):
        """
        `config.updates_per_step` DDQN updates; returns the last loss or None.
        """
        loss = None
        for _ in range(self.config.updates_per_step):
            step_loss = update(
                buffer,
                self.online,
                self.target,
                self.adam,
                self.config,
                self.encode_states,
                rng,
            )
            if step_loss is not None:
                loss = step_loss
        return loss


# Checkpoints ------------------------------------------------------------------


def agent_record(agent):
    return {
        "format": _FORMAT_NAME,
        "version": _FORMAT_VERSION,
        "agent": agent.config.model_dump(mode="json"),
        "optimizer": agent.optimizer.model_dump(mode="json"),
        "encoder": agent.encoder._asdict(),
        "graph": {
            "n_qubits": agent.graph.n_qubits,
            "edges": [list(edge) for edge in agent.graph.edges],
        },
        "online": to_record(agent.online),
        "target": to_record(agent.target),
        "threshold": agent.threshold,
        "epsilon": agent.epsilon,
    }


def agent_from_record(record):
    """
    Inverse of agent_record.

    Raises
    ------
    CheckpointError
        If the record is not a readable agent checkpoint.
    """
    if not isinstance(record, dict) or record.get("format") != _FORMAT_NAME:
        raise CheckpointError("not a qsynth agent checkpoint")
    if record.get("version") != _FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported agent checkpoint version; got {record.get('version')!r}"
        )
    online = from_record(record.get("online"))
    target = from_record(record.get("target"))
    try:
        graph = connectivity_graph(
            record["graph"]["n_qubits"],
            [tuple(edge) for edge in record["graph"]["edges"]],
        )
        encoder = EncoderSpec(**record["encoder"])
        return Agent(
            graph,
            encoder,
            online,
            target,
            AgentConfig.model_validate(record["agent"]),
            OptimizerConfig.model_validate(record.get("optimizer", {})),
            threshold=float(record["threshold"]),
            epsilon=float(record["epsilon"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed agent checkpoint: {exc}") from None


def save_agent(agent, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(agent_record(agent), f)
    logger.info("wrote agent checkpoint %s", path)


def load_agent(path):
    try:
        with open(path, encoding="utf-8") as f:
            record = json.load(f)
    except ValueError as exc:
        raise CheckpointError(f"agent checkpoint is not valid json: {exc}") from None
    return agent_from_record(record)
