"""
Feed-forward network used as the agent's Q-function.

Rectifier activations on the hidden layers, a linear output layer and 64-bit
floats throughout. Training minimizes a masked mean-squared error: for each
sample only the output of the selected action contributes to the loss.

Network record format (json)::

    {"format": "qsynth-mlp", "version": 1,
     "layer_sizes": [d_in, h1, ..., d_out],
     "params": [W0..., b0..., W1..., b1..., ...]}

Weights are stored in row-major (fan_in, fan_out) order.
"""

import json
import logging

import numpy as np

from qsynth.errors import CheckpointError

logger = logging.getLogger(__name__)

_FORMAT_NAME = "qsynth-mlp"
_FORMAT_VERSION = 1


class Mlp:
    """
    Network parameters. `weights[i]` has shape (layer_sizes[i],
    layer_sizes[i + 1]) and `biases[i]` shape (layer_sizes[i + 1],).
    """

    def __init__(self, layer_sizes, weights, biases):
        self.layer_sizes = tuple(int(size) for size in layer_sizes)
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        _check_shapes(self)

    @property
    def d_in(self):
        return self.layer_sizes[0]

    @property
    def d_out(self):
        return self.layer_sizes[-1]

    def parameters(self):
        """
        Parameter arrays in record order: W0, b0, W1, b1, ...
        """
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self):
        return Mlp(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


def _check_sizes(layer_sizes):
    if len(layer_sizes) < 2:
        raise ValueError(
            f"a network needs at least 2 layer sizes; got {list(layer_sizes)}"
        )
    if any(int(size) < 1 for size in layer_sizes):
        raise ValueError(f"layer sizes must be positive; got {list(layer_sizes)}")


def _check_shapes(net):
    _check_sizes(net.layer_sizes)
    n_layers = len(net.layer_sizes) - 1
    if len(net.weights) != n_layers or len(net.biases) != n_layers:
        raise ValueError(f"expected {n_layers} weight and bias arrays")
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        fan_in, fan_out = net.layer_sizes[i], net.layer_sizes[i + 1]
        if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
            raise ValueError(
                f"layer {i} must have shapes {(fan_in, fan_out)} and {(fan_out,)}; "
                f"got {w.shape} and {b.shape}"
            )


def init(layer_sizes, rng):
    """
    New network with fan-in scaled normal weights and zero biases.

    Parameters
    ----------
    layer_sizes : sequence of int
        Input size, hidden sizes, output size.
    rng : numpy.random.Generator
    """
    _check_sizes(layer_sizes)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(layer_sizes, weights, biases)


def _as_batch(net, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x[np.newaxis] if single else x
    if batch.ndim != 2 or batch.shape[1] != net.d_in:
        raise ValueError(
            f"network input must have length {net.d_in}; got shape {x.shape}"
        )
    return batch, single


def _forward_cache(net, batch):
    activations = [batch]
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = activations[-1] @ w + b
        activations.append(z if i == last else np.maximum(z, 0.0))
    return activations


def forward(net, x):
    """
    Network output for one input vector or a (batch, d_in) array.
    """
    batch, single = _as_batch(net, x)
    out = _forward_cache(net, batch)[-1]
    return out[0] if single else out


def _backward(net, activations, grad_out):
    grads_w, grads_b = [], []
    delta = grad_out
    for i in reversed(range(len(net.weights))):
        grads_w.append(activations[i].T @ delta)
        grads_b.append(delta.sum(axis=0))
        if i:
            delta = (delta @ net.weights[i].T) * (activations[i] > 0.0)
    return grads_w[::-1], grads_b[::-1]


def loss_and_gradients(net, inputs, action_indices, targets):
    """
    Masked mean-squared error and its gradients.

    Returns
    -------
    loss : float
        mean over the batch of (Q(x, a) - target)**2.
    grads_w, grads_b : list of numpy arrays
        Same shapes as the network's weights and biases.
    """
    batch, _ = _as_batch(net, inputs)
    actions = np.asarray(action_indices, dtype=int).reshape(-1)
    targets = np.asarray(targets, dtype=float).reshape(-1)
    if not len(batch) == len(actions) == len(targets):
        raise ValueError(
            "inputs, action indices and targets must have equal lengths; got "
            f"{len(batch)}, {len(actions)} and {len(targets)}"
        )
    if np.any((actions < 0) | (actions >= net.d_out)):
        raise ValueError(f"action indices must be in range(0, {net.d_out})")
    activations = _forward_cache(net, batch)
    rows = np.arange(len(batch))
    errors = activations[-1][rows, actions] - targets
    loss = float(np.mean(errors**2))
    grad_out = np.zeros_like(activations[-1])
    grad_out[rows, actions] = 2.0 * errors / len(batch)
    grads_w, grads_b = _backward(net, activations, grad_out)
    return loss, grads_w, grads_b


class AdamState:
    """
    Adam moment estimates for one network.
    """

    def __init__(self, net, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.first = [np.zeros_like(p) for p in net.parameters()]
        self.second = [np.zeros_like(p) for p in net.parameters()]
        #: Number of training samples dropped for non-finite targets.
        self.skipped_samples = 0

    def apply(self, net, grads_w, grads_b):
        """
        One Adam step, updating the network in place.
        """
        self.step += 1
        grads = [g for pair in zip(grads_w, grads_b) for g in pair]
        correction1 = 1.0 - self.beta1**self.step
        correction2 = 1.0 - self.beta2**self.step
        for param, grad, m, v in zip(net.parameters(), grads, self.first, self.second):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad**2
            denom = np.sqrt(v / correction2) + self.eps
            param -= self.lr * (m / correction1) / denom


def train_batch(net, adam, inputs, action_indices, targets):
    """
    One Adam step on the masked mean-squared error.

    Samples with a non-finite target are dropped and counted in
    `adam.skipped_samples`.

    Returns
    -------
    loss : float
        The loss before the step, over the samples used.
    """
    inputs = np.asarray(inputs, dtype=float)
    actions = np.asarray(action_indices, dtype=int).reshape(-1)
    targets = np.asarray(targets, dtype=float).reshape(-1)
    if not len(inputs) == len(actions) == len(targets):
        raise ValueError(
            "inputs, action indices and targets must have equal lengths; got "
            f"{len(inputs)}, {len(actions)} and {len(targets)}"
        )
    keep = np.isfinite(targets)
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        adam.skipped_samples += dropped
        logger.warning("skipped %d samples with non-finite targets", dropped)
    if not keep.any():
        return 0.0
    loss, grads_w, grads_b = loss_and_gradients(
        net, inputs[keep], actions[keep], targets[keep]
    )
    adam.apply(net, grads_w, grads_b)
    return loss


def polyak(target, online, tau):
    """
    Move the target network towards the online one in place:
    W' <- (1 - tau) W' + tau W. Returns the target network.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1]; got {tau}")
    if target.layer_sizes != online.layer_sizes:
        raise ValueError(
            "networks must have the same architecture; got "
            f"{list(target.layer_sizes)} and {list(online.layer_sizes)}"
        )
    for mine, theirs in zip(target.parameters(), online.parameters()):
        mine *= 1.0 - tau
        mine += tau * theirs
    return target


def gradient_check(net, x, action_index, target, rng=None, h=1e-5, max_entries=200):
    """
    Largest relative error between backpropagated and central-difference
    gradients of the single-sample loss.

    Every parameter is checked when the network has at most `max_entries`
    parameters; otherwise a random subset of `max_entries` of them.
    The relative error is |a - n| / max(|a|, |n|, 1e-4), so gradients near
    zero are compared absolutely.
    """
    x = np.asarray(x, dtype=float)[np.newaxis]
    actions, targets = [action_index], [target]
    _, grads_w, grads_b = loss_and_gradients(net, x, actions, targets)
    params = net.parameters()
    grads = [g for pair in zip(grads_w, grads_b) for g in pair]
    entries = [(i, j) for i, p in enumerate(params) for j in range(p.size)]
    if len(entries) > max_entries:
        rng = np.random.default_rng(0) if rng is None else rng
        chosen = rng.choice(len(entries), size=max_entries, replace=False)
        entries = [entries[k] for k in chosen]

    worst = 0.0
    for i, j in entries:
        flat = params[i].reshape(-1)
        saved = flat[j]
        flat[j] = saved + h
        up = loss_and_gradients(net, x, actions, targets)[0]
        flat[j] = saved - h
        down = loss_and_gradients(net, x, actions, targets)[0]
        flat[j] = saved
        numeric = (up - down) / (2.0 * h)
        analytic = grads[i].reshape(-1)[j]
        scale = max(abs(analytic), abs(numeric), 1e-4)
        worst = max(worst, abs(analytic - numeric) / scale)
    return worst


# Records ----------------------------------------------------------------------


def to_record(net):
    return {
        "format": _FORMAT_NAME,
        "version": _FORMAT_VERSION,
        "layer_sizes": list(net.layer_sizes),
        "params": [float(v) for p in net.parameters() for v in p.reshape(-1)],
    }


def from_record(record):
    """
    Network from a record built by to_record.

    Raises
    ------
    CheckpointError
        If the record has the wrong format, version or size.
    """
    if not isinstance(record, dict) or record.get("format") != _FORMAT_NAME:
        raise CheckpointError("not a qsynth network record")
    if record.get("version") != _FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported network record version; got {record.get('version')!r}"
        )
    try:
        sizes = [int(size) for size in record["layer_sizes"]]
        _check_sizes(sizes)
        values = np.array(record["params"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed network record: {exc}") from None
    expected = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
    if values.shape != (expected,):
        raise CheckpointError(
            f"network record must hold {expected} parameters; got {values.size}"
        )
    weights, biases, position = [], [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        size = fan_in * fan_out
        weights.append(values[position : position + size].reshape(fan_in, fan_out))
        position += size
        biases.append(values[position : position + fan_out].copy())
        position += fan_out
    return Mlp(sizes, weights, biases)


def save(net, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_record(net), f)


def load(path):
    try:
        with open(path, encoding="utf-8") as f:
            record = json.load(f)
    except ValueError as exc:
        raise CheckpointError(f"network file is not valid json: {exc}") from None
    return from_record(record)
