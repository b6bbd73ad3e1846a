"""
Tests for the Q-network: forward pass, masked training, Polyak averaging and
network records.
"""

import json
import os
import tempfile

import numpy as np

from qsynth import CheckpointError, gradient_check, polyak, train_batch
from qsynth.mlp import (
    AdamState,
    Mlp,
    forward,
    from_record,
    init,
    load,
    loss_and_gradients,
    save,
    to_record,
)
from qsynth.test.arrays import ArrayTestCase


def constant_net(layer_sizes, value):
    weights = [np.full((a, b), value) for a, b in zip(layer_sizes, layer_sizes[1:])]
    biases = [np.full(b, value) for b in layer_sizes[1:]]
    return Mlp(layer_sizes, weights, biases)


class TestNetwork(ArrayTestCase):
    def test_init_shapes(self):
        net = init([6, 5, 4, 3], np.random.default_rng(40))
        self.assertEqual([w.shape for w in net.weights], [(6, 5), (5, 4), (4, 3)])
        self.assertEqual([b.shape for b in net.biases], [(5,), (4,), (3,)])
        self.assertEqual((net.d_in, net.d_out), (6, 3))
        self.assertTrue(all(not b.any() for b in net.biases))

    def test_init_is_deterministic(self):
        first = init([4, 8, 2], np.random.default_rng(41))
        second = init([4, 8, 2], np.random.default_rng(41))
        for a, b in zip(first.parameters(), second.parameters()):
            self.assertArraysClose(a, b, atol=0.0)

    def test_zero_input_gives_zero_output(self):
        net = init([4, 8, 8, 3], np.random.default_rng(42))
        self.assertArraysClose(forward(net, np.zeros(4)), np.zeros(3), atol=0.0)

    def test_forward_by_hand(self):
        net = Mlp(
            [2, 2, 1],
            [np.array([[1.0, -1.0], [2.0, 1.0]]), np.array([[1.0], [3.0]])],
            [np.array([0.0, -1.0]), np.array([0.5])],
        )
        # Hidden pre-activations (5, -1) rectify to (5, 0).
        self.assertArraysClose(forward(net, [1.0, 2.0]), [5.5])
        batch = forward(net, [[1.0, 2.0], [0.0, 0.0]])
        self.assertArraysClose(batch, [[5.5], [0.5]])

    def test_size_errors(self):
        net = init([3, 2], np.random.default_rng(43))
        with self.assertRaises(ValueError):
            forward(net, np.zeros(4))
        with self.assertRaises(ValueError):
            init([3], np.random.default_rng(43))
        with self.assertRaises(ValueError):
            init([3, 0, 2], np.random.default_rng(43))
        with self.assertRaises(ValueError):
            Mlp([3, 2], [np.zeros((2, 3))], [np.zeros(2)])

    def test_gradient_check(self):
        rng = np.random.default_rng(44)
        net = init([5, 7, 6, 4], rng)
        for action in range(4):
            with self.subTest(action=action):
                x = rng.standard_normal(5)
                self.assertLess(gradient_check(net, x, action, 0.3, rng), 1e-4)

    def test_masked_gradients(self):
        net = init([3, 4, 3], np.random.default_rng(45))
        _, grads_w, grads_b = loss_and_gradients(net, [[1.0, -1.0, 0.5]], [1], [2.0])
        self.assertFalse(grads_w[-1][:, [0, 2]].any())
        self.assertFalse(grads_b[-1][[0, 2]].any())
        self.assertTrue(grads_b[-1][1] != 0.0)


class TestTraining(ArrayTestCase):
    def test_exact_targets_leave_parameters_unchanged(self):
        rng = np.random.default_rng(46)
        net = init([4, 6, 3], rng)
        before = [p.copy() for p in net.parameters()]
        inputs = rng.standard_normal((5, 4))
        actions = [0, 1, 2, 1, 0]
        targets = forward(net, inputs)[np.arange(5), actions]
        loss = train_batch(net, AdamState(net), inputs, actions, targets)
        self.assertEqual(loss, 0.0)
        for a, b in zip(before, net.parameters()):
            self.assertArraysClose(a, b, atol=0.0)

    def test_only_selected_output_moves(self):
        net = init([2, 3, 3], np.random.default_rng(47))
        probe = np.array([[0.3, -0.7], [1.0, 0.2]])
        last_before = net.weights[-1].copy()
        outputs_before = forward(net, probe)
        train_batch(net, AdamState(net, lr=0.01), [[1.0, 0.5]], [2], [4.0])
        self.assertArraysClose(net.weights[-1][:, :2], last_before[:, :2], atol=0.0)
        self.assertArraysClose(net.biases[-1][:2], [0.0, 0.0], atol=0.0)
        self.assertNotEqual(net.biases[-1][2], 0.0)
        outputs_after = forward(net, probe)
        self.assertFalse(np.allclose(outputs_after[:, 2], outputs_before[:, 2]))

    def test_loss_decreases(self):
        rng = np.random.default_rng(48)
        net = init([3, 16, 2], rng)
        adam = AdamState(net, lr=1e-2)
        inputs = rng.standard_normal((32, 3))
        actions = rng.integers(0, 2, 32)
        targets = np.where(actions == 0, inputs[:, 0], inputs[:, 1] - inputs[:, 2])
        first = train_batch(net, adam, inputs, actions, targets)
        for _ in range(500):
            last = train_batch(net, adam, inputs, actions, targets)
        self.assertLess(last, 0.01 * first)
        self.assertEqual(adam.step, 501)

    def test_non_finite_targets_are_skipped(self):
        net = init([2, 2], np.random.default_rng(49))
        adam = AdamState(net)
        with self.assertLogs("qsynth.mlp", "WARNING"):
            train_batch(net, adam, [[1.0, 0.0], [0.0, 1.0]], [0, 1], [np.nan, 1.0])
        self.assertEqual(adam.skipped_samples, 1)
        self.assertEqual(adam.step, 1)
        with self.assertLogs("qsynth.mlp", "WARNING"):
            loss = train_batch(net, adam, [[1.0, 0.0]], [0], [np.inf])
        self.assertEqual(loss, 0.0)
        self.assertEqual(adam.skipped_samples, 2)
        self.assertEqual(adam.step, 1)

    def test_polyak(self):
        target = constant_net([2, 3, 1], 0.0)
        online = constant_net([2, 3, 1], 1.0)
        polyak(target, online, 0.01)
        for p in target.parameters():
            self.assertArraysClose(p, np.full(p.shape, 0.01), atol=1e-15)
        polyak(target, online, 1.0)
        for p in target.parameters():
            self.assertArraysClose(p, np.ones(p.shape), atol=0.0)
        unchanged = target.copy()
        polyak(target, constant_net([2, 3, 1], 5.0), 0.0)
        for a, b in zip(target.parameters(), unchanged.parameters()):
            self.assertArraysClose(a, b, atol=0.0)

    def test_polyak_errors(self):
        target = constant_net([2, 3, 1], 0.0)
        with self.assertRaises(ValueError):
            polyak(target, constant_net([2, 4, 1], 0.0), 0.5)
        with self.assertRaises(ValueError):
            polyak(target, target.copy(), 1.5)


class TestRecords(ArrayTestCase):
    def test_record_layout(self):
        net = constant_net([2, 1], 0.5)
        net.weights[0][1, 0] = 2.0
        record = to_record(net)
        self.assertEqual(record["format"], "qsynth-mlp")
        self.assertEqual(record["layer_sizes"], [2, 1])
        self.assertEqual(record["params"], [0.5, 2.0, 0.5])

    def test_save_and_load(self):
        net = init([3, 4, 2], np.random.default_rng(50))
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "net.json")
            save(net, path)
            loaded = load(path)
        self.assertEqual(loaded.layer_sizes, net.layer_sizes)
        x = np.array([0.1, -0.2, 0.3])
        self.assertArraysClose(forward(loaded, x), forward(net, x), atol=0.0)

    def test_bad_records(self):
        good = to_record(init([2, 2], np.random.default_rng(51)))
        test_cases = [
            [],
            dict(good, format="other"),
            dict(good, version=2),
            dict(good, layer_sizes=[2]),
            dict(good, layer_sizes=[2, 3]),
            dict(good, params="none"),
            {k: v for k, v in good.items() if k != "params"},
        ]
        for record in test_cases:
            with self.subTest(record=record):
                with self.assertRaises(CheckpointError):
                    from_record(json.loads(json.dumps(record)))
