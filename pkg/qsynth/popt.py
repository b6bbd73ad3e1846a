"""
Continuous-parameter optimization.

A multi-start BFGS minimizer with central-difference gradients and an Armijo
backtracking line search, plus the three objectives used by the package:
the coherence loss after one action block, the coherence loss of a whole
circuit, and the infidelity of a circuit with respect to a pure target.
"""

import logging
import math

import numpy as np

from qsynth.circuit import evolve_circuit, run_circuit
from qsynth.config import OptimizerConfig
from qsynth.core import OptResult
from qsynth.errors import OptimizationError
from qsynth.qcore import coherence_losses, density_matrix

logger = logging.getLogger(__name__)

#: Sufficient-decrease constant of the Armijo condition.
ARMIJO = 1e-4

#: Smallest step the line search tries before giving up.
MIN_STEP = 1e-12


class _NonFinite(Exception):
    pass


def numerical_gradient(f, x, h, f_batch=None):
    """
    Central-difference gradient of f at x with step h.

    If `f_batch` is given it evaluates the objective on a (m, len(x)) array of
    points in one call, and all 2 * len(x) points are passed to it at once.
    """
    n = x.size
    steps = np.eye(n) * h
    points = np.concatenate([x + steps, x - steps])
    if f_batch is not None:
        values = np.asarray(f_batch(points), dtype=float)
    else:
        values = np.array([f(p) for p in points], dtype=float)
    return (values[:n] - values[n:]) / (2.0 * h)


def _bfgs_run(f, x, cfg, f_batch):
    """
    One BFGS run. Returns (x, f(x), iterations, converged).

    If the objective turns non-finite the run stops at the last finite point.
    """
    fx = f(x)
    if not math.isfinite(fx):
        raise _NonFinite
    g = numerical_gradient(f, x, cfg.grad_step, f_batch)
    if not np.all(np.isfinite(g)):
        return x, fx, 0, False
    eye = np.eye(x.size)
    h_inv = eye
    for iteration in range(cfg.max_iters):
        if np.linalg.norm(g) < cfg.tol:
            return x, fx, iteration, True
        direction = -h_inv @ g
        slope = g @ direction
        if slope >= 0.0:
            h_inv = eye
            direction = -g
            slope = -(g @ g)

        step = 1.0
        while True:
            x_new = x + step * direction
            f_new = f(x_new)
            if not math.isfinite(f_new):
                logger.debug("non-finite objective; abandoning restart")
                return x, fx, iteration, False
            if f_new <= fx + ARMIJO * step * slope:
                break
            step *= 0.5
            if step < MIN_STEP:
                return x, fx, iteration, False

        g_new = numerical_gradient(f, x_new, cfg.grad_step, f_batch)
        if not np.all(np.isfinite(g_new)):
            return x_new, f_new, iteration + 1, False
        s, y = x_new - x, g_new - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if iteration == 0:
                h_inv = eye * (sy / (y @ y))
            rho = 1.0 / sy
            left = eye - rho * np.outer(s, y)
            h_inv = left @ h_inv @ left.T + rho * np.outer(s, s)
        x, fx, g = x_new, f_new, g_new
    return x, fx, cfg.max_iters, bool(np.linalg.norm(g) < cfg.tol)


def bfgs_minimize(f, x0, cfg=None, f_batch=None):
    """
    Minimize f with multi-start BFGS.

    Parameters
    ----------
    f : callable
        Maps a float vector to a float.
    x0 : sequence of float
        Initial point of the first start. Later starts are uniform in
        [-pi, pi], drawn from a generator seeded with `cfg.seed`.
    cfg : OptimizerConfig, optional
    f_batch : callable, optional
        Vectorized objective on (m, n) arrays, used for gradients.

    Returns
    -------
    result : OptResult
        The best point over all starts. Its value never exceeds f(x0) nor the
        value at any other start point.

    Raises
    ------
    OptimizationError
        If f is not finite at x0.
    """
    cfg = OptimizerConfig() if cfg is None else cfg
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    f0 = float(f(x0))
    if not math.isfinite(f0):
        raise OptimizationError(
            f"objective must be finite at the initial point; got {f0}"
        )
    if x0.size == 0:
        return OptResult(x0, f0, 0, True)

    rng = np.random.default_rng(cfg.seed)
    best = OptResult(x0, f0, 0, False)
    iters = 0
    for restart in range(cfg.restarts):
        start = x0 if restart == 0 else rng.uniform(-np.pi, np.pi, x0.size)
        try:
            x, fx, used, converged = _bfgs_run(f, start, cfg, f_batch)
        except _NonFinite:
            logger.debug("restart %d started at a non-finite point", restart)
            continue
        iters += used
        logger.debug("restart %d: value %.3e after %d iterations", restart, fx, used)
        if restart == 0 or fx < best.best_value:
            best = OptResult(x, float(fx), 0, converged)
        if best.best_value <= cfg.early_stop:
            break
    return best._replace(iters_used=iters)


# Objectives -------------------------------------------------------------------


def _coherence_objectives(circuit, mat):
    def f_batch(rows):
        return coherence_losses(evolve_circuit(circuit, rows, mat))

    def f(x):
        return float(f_batch(x[np.newaxis])[0])

    return f, f_batch


def optimize_local_step(block, rho, cfg=None):
    """
    Fit the parameters of one circuit fragment to diagonalize rho.

    Parameters
    ----------
    block : Circuit
        Fragment with unbound parameters, e.g. an action block or the initial
        rotation layer.
    rho : DensityMatrix
    cfg : OptimizerConfig, optional

    Returns
    -------
    params : float numpy vector
    rho_next : DensityMatrix
        U rho U^dagger at the optimum.
    loss : float
        The coherence loss of rho_next.
    """
    f, f_batch = _coherence_objectives(block, rho.mat)
    result = bfgs_minimize(f, np.zeros(block.n_params), cfg, f_batch)
    rho_next = density_matrix(
        evolve_circuit(block, result.best_params, rho.mat), check=False
    )
    return result.best_params, rho_next, result.best_value


def optimize_global(circuit, rho_target, cfg=None, x0=None):
    """
    Jointly fit all circuit parameters to diagonalize the target.

    The first start is `x0` (typically the concatenated per-step solutions),
    so the result is never worse than it.
    """
    f, f_batch = _coherence_objectives(circuit, rho_target.mat)
    x0 = np.zeros(circuit.n_params) if x0 is None else x0
    return bfgs_minimize(f, x0, cfg, f_batch)


def optimize_fidelity(circuit, psi, cfg=None, x0=None, prepare=False):
    """
    Fit circuit parameters to maximize fidelity with a pure target.

    Parameters
    ----------
    circuit : Circuit
    psi : PureState
    cfg : OptimizerConfig, optional
    x0 : sequence of float, optional
        First start; zeros by default.
    prepare : bool, optional
        False (the default) minimizes 1 - |<0|U|psi>|**2, i.e. the circuit
        maps the target to |0...0>. True minimizes 1 - |<psi|U|0>|**2, i.e.
        the circuit prepares the target. Both equal one minus the preparation
        fidelity of the corresponding preparation circuit.

    Returns
    -------
    result : OptResult
        `best_value` is the infidelity.
    """
    if prepare:
        start = np.zeros(2**circuit.n_qubits, dtype=complex)
        start[0] = 1.0
        overlap_with = psi.amps.conj()
    else:
        start = psi.amps
        overlap_with = None

    def f_batch(rows):
        states = run_circuit(circuit, rows, start)
        overlaps = states[:, 0] if overlap_with is None else states @ overlap_with
        return 1.0 - np.abs(overlaps) ** 2

    def f(x):
        return float(f_batch(x[np.newaxis])[0])

    x0 = np.zeros(circuit.n_params) if x0 is None else x0
    return bfgs_minimize(f, x0, cfg, f_batch)
