"""
Tests for the BFGS minimizer and the circuit objectives.
"""

import math
import os
import unittest

import numpy as np

from qsynth import (
    OptimizationError,
    OptimizerConfig,
    bfgs_minimize,
    coherence_loss,
    fidelity,
    ghz_state,
    haar_state,
    initial_circuit,
    optimize_fidelity,
    optimize_global,
    optimize_local_step,
    run_circuit,
)
from qsynth.circuit import append_action, block_circuit, evolve_circuit
from qsynth.popt import numerical_gradient
from qsynth.qcore import (
    basis_state,
    coherence_losses,
    projector,
    pure_state,
)
from qsynth.test.arrays import ArrayTestCase

SLOW = unittest.skipUnless(
    os.environ.get("QSYNTH_SLOW_TESTS"), "set QSYNTH_SLOW_TESTS to run"
)


def quadratic(x):
    return float(np.sum((x - np.array([1.0, -2.0, 0.5])) ** 2 * [1.0, 10.0, 3.0]))


class TestBfgs(ArrayTestCase):
    def test_numerical_gradient(self):
        x = np.array([0.3, 0.2, -0.1])
        expected = 2.0 * (x - [1.0, -2.0, 0.5]) * [1.0, 10.0, 3.0]
        self.assertArraysClose(numerical_gradient(quadratic, x, 1e-5), expected, 1e-6)

        def f_batch(points):
            return np.array([quadratic(p) for p in points])

        batched = numerical_gradient(quadratic, x, 1e-5, f_batch)
        self.assertArraysClose(batched, expected, 1e-6)

    def test_numerical_gradient_matches_extrapolation(self):
        rng = np.random.default_rng(35)
        circuit = append_action(initial_circuit(2), (0, 1))
        rho = projector(haar_state(2, rng))

        def loss(x):
            return float(coherence_losses(evolve_circuit(circuit, x, rho.mat)))

        for _ in range(3):
            x = rng.uniform(-np.pi, np.pi, circuit.n_params)
            coarse = numerical_gradient(loss, x, 1e-3)
            fine = numerical_gradient(loss, x, 5e-4)
            extrapolated = (4.0 * fine - coarse) / 3.0
            error = np.linalg.norm(numerical_gradient(loss, x, 1e-5) - extrapolated)
            self.assertLess(error, 1e-5 * np.linalg.norm(extrapolated))

    def test_quadratic_minimum(self):
        result = bfgs_minimize(quadratic, np.zeros(3))
        self.assertArraysClose(result.best_params, [1.0, -2.0, 0.5], atol=1e-5)
        self.assertLess(result.best_value, 1e-10)
        self.assertGreater(result.iters_used, 0)

    def test_one_dimensional(self):
        result = bfgs_minimize(lambda x: float((x[0] - 3.0) ** 2), [0.0])
        self.assertAlmostEqual(result.best_params[0], 3.0, delta=1e-6)

    def test_rosenbrock(self):
        def rosenbrock(x):
            return float((1.0 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2)

        cfg = OptimizerConfig(max_iters=2000, restarts=1)
        result = bfgs_minimize(rosenbrock, [-1.2, 1.0], cfg)
        self.assertArraysClose(result.best_params, [1.0, 1.0], atol=1e-4)

    def test_never_worse_than_start(self):
        def bumpy(x):
            return float(np.sum(np.sin(3.0 * x) + 0.1 * x**2))

        rng = np.random.default_rng(30)
        cfg = OptimizerConfig(max_iters=5, restarts=2)
        for _ in range(5):
            x0 = rng.uniform(-3.0, 3.0, 4)
            result = bfgs_minimize(bumpy, x0, cfg)
            self.assertLessEqual(result.best_value, bumpy(x0))

    def test_deterministic_under_seed(self):
        def bumpy(x):
            return float(np.sum(np.cos(2.0 * x) + 0.2 * x**2))

        cfg = OptimizerConfig(restarts=4, seed=5)
        first = bfgs_minimize(bumpy, np.ones(3), cfg)
        second = bfgs_minimize(bumpy, np.ones(3), cfg)
        self.assertArraysClose(first.best_params, second.best_params, atol=0.0)

    def test_empty_parameter_vector(self):
        result = bfgs_minimize(lambda x: 0.25, np.zeros(0))
        self.assertEqual(result.best_value, 0.25)
        self.assertTrue(result.converged)

    def test_non_finite_start(self):
        with self.assertRaises(OptimizationError):
            bfgs_minimize(lambda x: math.nan, np.zeros(2))
        with self.assertRaises(OptimizationError):
            bfgs_minimize(lambda x: math.inf, np.zeros(2))

    def test_non_finite_region_is_avoided(self):
        def walled(x):
            return math.nan if x[0] > 2.0 else float((x[0] - 3.0) ** 2)

        result = bfgs_minimize(walled, [0.0], OptimizerConfig(restarts=1))
        self.assertTrue(math.isfinite(result.best_value))
        self.assertLessEqual(result.best_value, 9.0)


class TestObjectives(ArrayTestCase):
    def test_local_step_diagonalizes_one_qubit(self):
        rng = np.random.default_rng(31)
        for _ in range(3):
            rho = projector(haar_state(1, rng))
            params, rho_next, loss = optimize_local_step(initial_circuit(1), rho)
            self.assertEqual(params.shape, (3,))
            self.assertLess(loss, 1e-10)
            self.assertAlmostEqual(coherence_loss(rho_next), loss, delta=1e-12)

    def test_local_step_on_action_block(self):
        rho = projector(ghz_state(2))
        params, rho_next, loss = optimize_local_step(block_circuit(2, (0, 1)), rho)
        self.assertEqual(params.shape, (6,))
        self.assertLess(loss, 1e-10)
        self.assertAlmostEqual(np.trace(rho_next.mat).real, 1.0, delta=1e-9)

    def test_global_is_never_worse_than_start(self):
        rng = np.random.default_rng(32)
        circuit = append_action(initial_circuit(2), (0, 1))
        rho = projector(haar_state(2, rng))
        x0 = rng.uniform(-np.pi, np.pi, circuit.n_params)
        start = optimize_global(circuit, rho, OptimizerConfig(max_iters=1), x0)
        result = optimize_global(circuit, rho, x0=x0)
        self.assertLessEqual(result.best_value, start.best_value)
        self.assertLess(result.best_value, 1e-6)

    def test_fidelity_in_both_directions(self):
        rng = np.random.default_rng(33)
        circuit = append_action(initial_circuit(2), (0, 1))
        psi = haar_state(2, rng)
        for prepare in [False, True]:
            with self.subTest(prepare=prepare):
                result = optimize_fidelity(circuit, psi, prepare=prepare)
                self.assertLess(result.best_value, 1e-6)
                x = result.best_params
                if prepare:
                    out = run_circuit(circuit, x, basis_state(2, 0).amps)
                    achieved = fidelity(projector(pure_state(out)), psi)
                else:
                    out = run_circuit(circuit, x, psi.amps)
                    achieved = abs(out[0]) ** 2
                self.assertAlmostEqual(achieved, 1.0 - result.best_value, delta=1e-9)

    def test_global_loss_ignores_global_phase(self):
        rng = np.random.default_rng(36)
        circuit = initial_circuit(2)
        psi = haar_state(2, rng)
        rho = projector(psi)
        shifted = projector(pure_state(np.exp(0.7j) * psi.amps))
        x = rng.uniform(-np.pi, np.pi, circuit.n_params)
        self.assertAlmostEqual(
            coherence_losses(evolve_circuit(circuit, x, rho.mat)),
            coherence_losses(evolve_circuit(circuit, x, shifted.mat)),
            delta=1e-12,
        )
        cfg = OptimizerConfig(restarts=1)
        first = optimize_global(circuit, rho, cfg)
        second = optimize_global(circuit, shifted, cfg)
        self.assertAlmostEqual(first.best_value, second.best_value, delta=1e-8)

    def test_product_circuit_cannot_entangle(self):
        result = optimize_fidelity(initial_circuit(2), ghz_state(2), prepare=True)
        self.assertAlmostEqual(result.best_value, 0.5, delta=1e-6)

    def check_global_beats_local(self, episodes, cfg):
        rng = np.random.default_rng(34)
        pairs = [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)]
        for _ in range(episodes):
            rho = projector(haar_state(3, rng))
            circuit = initial_circuit(3)
            x, state, loss = optimize_local_step(circuit, rho, cfg)
            chunks = [x]
            for i in rng.choice(len(pairs), size=2):
                x, state, loss = optimize_local_step(
                    block_circuit(3, pairs[i]), state, cfg
                )
                circuit = append_action(circuit, pairs[i])
                chunks.append(x)
            result = optimize_global(circuit, rho, cfg, np.concatenate(chunks))
            self.assertLessEqual(result.best_value, loss + 1e-12)

    def test_global_beats_local_steps(self):
        self.check_global_beats_local(5, OptimizerConfig(restarts=1, max_iters=100))

    @SLOW
    def test_global_beats_local_steps_at_scale(self):
        self.check_global_beats_local(100, OptimizerConfig())
