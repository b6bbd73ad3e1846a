"""
Tests for the layered reference circuits.
"""

import numpy as np

from qsynth import build_layered, evaluate_layered, haar_state, layered_spec
from qsynth.circuit import cnot_count, cnot_sequence
from qsynth.qcore import RY, RZ, U3, basis_state
from qsynth.test.arrays import ArrayTestCase


class TestLayered(ArrayTestCase):
    def test_cnot_counts(self):
        for kind in ["linear", "pairwise"]:
            for n in [4, 5]:
                for layers in [0, 1, 3]:
                    with self.subTest(kind=kind, n=n, layers=layers):
                        circuit = build_layered(layered_spec(kind, n, layers))
                        self.assertEqual(cnot_count(circuit), layers * (n - 1))

    def test_patterns(self):
        linear = build_layered(layered_spec("linear", 4, 1))
        self.assertEqual(cnot_sequence(linear), [(0, 1), (1, 2), (2, 3)])
        pairwise = build_layered(layered_spec("pairwise", 5, 1))
        self.assertEqual(cnot_sequence(pairwise), [(0, 1), (2, 3), (1, 2), (3, 4)])

    def test_local_gates(self):
        rzry = build_layered(layered_spec("linear", 2, 1))
        self.assertEqual([op.kind for op in rzry.ops[:2]], [RY, RZ])
        # Two locals per qubit, before and after the single layer.
        self.assertEqual(rzry.n_params, 8)
        u3 = build_layered(layered_spec("linear", 2, 1, "u3"))
        self.assertEqual(u3.ops[0].kind, U3)
        self.assertEqual(u3.n_params, 12)
        pairwise = build_layered(layered_spec("pairwise", 4, 1, "u3"))
        # Locals: 4 first, 2 between the sublayers, 4 last.
        self.assertEqual(pairwise.n_params, 30)

    def test_spec_errors(self):
        test_cases = [
            ("ring", 3, 1, "rzry"),
            ("linear", 3, 1, "rx"),
            ("linear", 0, 1, "rzry"),
            ("pairwise", 3, -1, "rzry"),
        ]
        for args in test_cases:
            with self.subTest(args=args):
                with self.assertRaises(ValueError):
                    layered_spec(*args)

    def test_basis_targets(self):
        targets = [basis_state(3, b) for b in [0, 3, 5, 6]]
        metrics = evaluate_layered(layered_spec("linear", 3, 1), targets, seed=2)
        self.assertAlmostEqual(metrics.mean_fidelity, 1.0, delta=1e-6)
        self.assertEqual(metrics.cnots, [2, 2, 2, 2])
        self.assertEqual(metrics.histogram, {2: 1.0})

    def test_one_layer_prepares_two_qubits(self):
        rng = np.random.default_rng(80)
        targets = [haar_state(2, rng) for _ in range(3)]
        for local_gate in ["rzry", "u3"]:
            with self.subTest(local_gate=local_gate):
                spec = layered_spec("linear", 2, 1, local_gate)
                metrics = evaluate_layered(spec, targets)
                self.assertGreaterEqual(min(metrics.fidelities), 1.0 - 1e-6)

    def test_threads_do_not_change_results(self):
        rng = np.random.default_rng(81)
        targets = [haar_state(3, rng) for _ in range(4)]
        spec = layered_spec("pairwise", 3, 1)
        serial = evaluate_layered(spec, targets, seed=4, threads=1)
        threaded = evaluate_layered(spec, targets, seed=4, threads=3)
        self.assertEqual(serial.fidelities, threaded.fidelities)

    def test_target_size_mismatch(self):
        with self.assertRaises(ValueError):
            evaluate_layered(layered_spec("linear", 3, 1), [basis_state(2, 0)])
