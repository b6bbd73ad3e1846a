"""
Dense simulation of small qubit registers: gates, embedding, density-matrix
evolution, fidelities, the coherence loss and random target states.

Qubit ordering convention: qubit 0 is the most-significant bit of a
basis-state index. For n = 2, the index 1 (binary 01) is the state with
qubit 1 set. Exported circuits are only meaningful under this convention.

Everything here operates on numpy arrays of complex128. The engine primitive
is `apply_gate`, which left-multiplies a batch of (2**n, m) arrays by a gate
acting on named qubits; states are batches with m = 1, density matrices and
operators have m = 2**n.
"""

import numpy as np

from qsynth.core import DensityMatrix, PureState, QubitPartition
from qsynth.errors import ValidationError
from qsynth.generics import num_qubits, to_density

#: Gate kinds.
CX = "cx"
U3 = "u3"
RY = "ry"
RZ = "rz"
X = "x"

#: Number of angles consumed by each gate kind.
NUM_PARAMS = {CX: 0, X: 0, U3: 3, RY: 1, RZ: 1}

#: Number of qubits each gate kind acts on.
NUM_QUBITS = {CX: 2, X: 1, U3: 1, RY: 1, RZ: 1}

#: Largest register the dense engine accepts.
MAX_QUBITS = 10

#: Tolerances for validating states.
STATE_ATOL = 1e-10
EIGENVALUE_FLOOR = -1e-9
UNITARY_ATOL = 1e-8

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def _freeze(array):
    array = np.array(array, dtype=complex)
    array.flags.writeable = False
    return array


def _check_num_qubits(n):
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"n must be in the range 1..{MAX_QUBITS}; got {n}")


def _qubits_for_dim(dim):
    n = int(dim).bit_length() - 1
    if dim < 2 or 2**n != dim:
        raise ValueError(f"dimension must be a power of two >= 2; got {dim}")
    return n


def _check_qubits(qubits, n):
    qubits = tuple(int(q) for q in qubits)
    if any(not 0 <= q < n for q in qubits):
        raise ValueError(f"qubit indices must be in range(0, {n}); got {qubits}")
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"qubit indices must be distinct; got {qubits}")
    return qubits


# Gate matrices ---------------------------------------------------------------


def _rz(angles):
    phase = np.exp(-0.5j * angles)
    out = np.zeros(angles.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = phase
    out[..., 1, 1] = phase.conj()
    return out


def _ry(angles):
    c, s = np.cos(0.5 * angles), np.sin(0.5 * angles)
    out = np.empty(angles.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def gate_matrices(kind, params):
    """
    Gate matrices for a batch of parameter rows.

    Parameters
    ----------
    kind : str
        One of CX, U3, RY, RZ, X.
    params : array of shape (batch, NUM_PARAMS[kind])

    Returns
    -------
    gates : complex array
        Shape (batch, 2**k, 2**k) for parameterized kinds; the single shared
        (2**k, 2**k) matrix for CX and X.
    """
    if kind == CX:
        return _CNOT
    if kind == X:
        return _PAULI_X
    params = np.asarray(params, dtype=float)
    if kind == RY:
        return _ry(params[:, 0])
    if kind == RZ:
        return _rz(params[:, 0])
    if kind == U3:
        # U3(theta, phi, lam) = Rz(phi) Ry(theta) Rz(lam)
        theta, phi, lam = params[:, 0], params[:, 1], params[:, 2]
        return _rz(phi) @ _ry(theta) @ _rz(lam)
    raise ValueError(f"unknown gate kind; got {kind!r}")


def gate_matrix(kind, params=()):
    """
    Unitary matrix of a single gate.

    U3 follows the Rz(phi) Ry(theta) Rz(lam) convention, with
    Rz(a) = diag(exp(-ia/2), exp(ia/2)) and Ry(a) = exp(-i a Y / 2).
    For CX the first qubit is the control.

    Parameters
    ----------
    kind : str
        One of CX, U3, RY, RZ, X.
    params : sequence of float
        Angles in radians; 3 for U3, 1 for RY and RZ, none for X and CX.

    Returns
    -------
    matrix : complex numpy array of shape (2**k, 2**k)

    Raises
    ------
    ValueError
        If the kind is unknown or the number of parameters is wrong.
    """
    if kind not in NUM_PARAMS:
        raise ValueError(f"unknown gate kind; got {kind!r}")
    params = np.asarray(params, dtype=float).reshape(-1)
    if params.size != NUM_PARAMS[kind]:
        raise ValueError(
            f"{kind} takes {NUM_PARAMS[kind]} parameters; got {params.size}"
        )
    gates = gate_matrices(kind, params.reshape(1, -1))
    return np.array(gates if gates.ndim == 2 else gates[0])


# Engine ----------------------------------------------------------------------


def apply_gate(tensor, gate, qubits, n):
    """
    Left-multiply a batch of arrays by a gate acting on the given qubits.

    Parameters
    ----------
    tensor : complex array of shape (batch, 2**n, m)
    gate : complex array of shape (2**k, 2**k) or (batch, 2**k, 2**k)
    qubits : tuple of k distinct qubit indices, in the gate's own order
    n : int

    Returns
    -------
    result : complex array of shape (batch', 2**n, m)
        batch' is the broadcast of the two batch sizes.
    """
    k = len(qubits)
    m = tensor.shape[-1]
    t = tensor.reshape((tensor.shape[0],) + (2,) * n + (m,))
    axes = [1 + q for q in qubits]
    front = list(range(1, k + 1))
    t = np.moveaxis(t, axes, front)
    tail_shape = t.shape[k + 1 :]
    t = np.matmul(gate, t.reshape(t.shape[0], 2**k, -1))
    t = t.reshape((t.shape[0],) + (2,) * k + tail_shape)
    t = np.moveaxis(t, front, axes)
    return t.reshape(t.shape[0], 2**n, m)


def conjugate_gate(mats, gate, qubits, n):
    """
    Return G rho G^dagger for a batch of Hermitian matrices rho.
    """
    half = apply_gate(mats, gate, qubits, n)
    # (G rho)^dagger = rho G^dagger for Hermitian rho.
    return apply_gate(half.conj().transpose(0, 2, 1), gate, qubits, n)


def embed(gate, qubits, n):
    """
    Embed a k-qubit gate into the 2**n dimensional space of n qubits.

    The gate acts on `qubits` (in its own qubit order) and as the identity
    on all other qubits.

    Raises
    ------
    ValueError
        If an index is out of range, indices repeat, or the gate dimension does
        not match the number of qubits.
    """
    _check_num_qubits(n)
    qubits = _check_qubits(qubits, n)
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (2 ** len(qubits),) * 2:
        raise ValueError(
            f"gate for {len(qubits)} qubits must have shape "
            f"{(2 ** len(qubits),) * 2}; got {gate.shape}"
        )
    eye = np.eye(2**n, dtype=complex)[np.newaxis]
    return apply_gate(eye, gate, qubits, n)[0]


def is_unitary(matrix, atol=UNITARY_ATOL):
    matrix = np.asarray(matrix)
    eye = np.eye(matrix.shape[0])
    return np.allclose(matrix.conj().T @ matrix, eye, rtol=0.0, atol=atol)


def evolve(rho, unitary):
    """
    Evolve a density matrix by a unitary: rho -> U rho U^dagger.

    Raises
    ------
    ValueError
        If the dimensions do not match or U is not unitary within 1e-8.
    """
    unitary = np.asarray(unitary, dtype=complex)
    if unitary.shape != rho.mat.shape:
        raise ValueError(
            f"unitary must have shape {rho.mat.shape}; got {unitary.shape}"
        )
    if not is_unitary(unitary):
        raise ValueError("matrix must be unitary within 1e-8")
    return DensityMatrix(rho.n_qubits, _freeze(unitary @ rho.mat @ unitary.conj().T))


# States ----------------------------------------------------------------------


def pure_state(amps, atol=STATE_ATOL):
    """
    Build a PureState from an amplitude vector.

    The vector must have unit norm within `atol`; it is then renormalized
    exactly.

    Raises
    ------
    ValidationError
        If the norm is off by more than `atol` or the length is not a power
        of two.
    """
    amps = np.asarray(amps, dtype=complex).reshape(-1)
    try:
        n = _qubits_for_dim(amps.size)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    norm = np.linalg.norm(amps)
    if not abs(norm**2 - 1.0) <= atol:
        raise ValidationError(f"state must be normalized; got squared norm {norm**2}")
    return PureState(n, _freeze(amps / norm))


def density_matrix(mat, check=True):
    """
    Build a DensityMatrix, validating Hermiticity, trace and positivity.

    Parameters
    ----------
    mat : complex array of shape (2**n, 2**n)
    check : bool, optional
        When False only the shape is checked. Used by the engine for matrices
        produced by unitary evolution of a valid state.

    Raises
    ------
    ValidationError
        If any check fails.
    """
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValidationError(f"density matrix must be square; got {mat.shape}")
    try:
        n = _qubits_for_dim(mat.shape[0])
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    if check:
        if not np.allclose(mat, mat.conj().T, rtol=0.0, atol=STATE_ATOL):
            raise ValidationError("density matrix must be Hermitian")
        trace = np.trace(mat)
        if abs(trace - 1.0) > STATE_ATOL:
            raise ValidationError(f"density matrix must have unit trace; got {trace}")
        smallest = np.linalg.eigvalsh(mat)[0]
        if smallest < EIGENVALUE_FLOOR:
            raise ValidationError(
                f"density matrix must be positive semi-definite; "
                f"got eigenvalue {smallest}"
            )
    return DensityMatrix(n, _freeze(mat))


def projector(psi):
    """
    The density matrix |psi><psi| of a pure state.
    """
    return DensityMatrix(psi.n_qubits, _freeze(np.outer(psi.amps, psi.amps.conj())))


def basis_state(n, b):
    """
    The computational basis state |b> on n qubits.
    """
    _check_num_qubits(n)
    if not 0 <= b < 2**n:
        raise ValueError(f"basis index must be in range(0, {2**n}); got {b}")
    amps = np.zeros(2**n, dtype=complex)
    amps[b] = 1.0
    return PureState(n, _freeze(amps))


def ghz_state(n):
    """
    (|0...0> + |1...1>) / sqrt(2).
    """
    _check_num_qubits(n)
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = amps[-1] = np.sqrt(0.5)
    return PureState(n, _freeze(amps))


def w_state(n):
    """
    Equal superposition of the n basis states of Hamming weight one.
    """
    _check_num_qubits(n)
    amps = np.zeros(2**n, dtype=complex)
    amps[[1 << q for q in range(n)]] = 1.0 / np.sqrt(n)
    return PureState(n, _freeze(amps))


@to_density.register(DensityMatrix)
def _(x):
    return x


@to_density.register(PureState)
def _(x):
    return projector(x)


@to_density.register(np.ndarray)
def _(x):
    if x.ndim == 1:
        return projector(pure_state(x))
    return density_matrix(x)


@num_qubits.register(DensityMatrix)
@num_qubits.register(PureState)
def _(x):
    return x.n_qubits


# Figures of merit ------------------------------------------------------------


def _check_same_size(a, b):
    if a.n_qubits != b.n_qubits:
        raise ValueError(
            f"states must have the same number of qubits; "
            f"got {a.n_qubits} and {b.n_qubits}"
        )


def fidelity(rho, psi):
    """
    Fidelity <psi|rho|psi> between a density matrix and a pure state.

    The result is clamped to [0, 1] against rounding.
    """
    _check_same_size(rho, psi)
    value = np.real(np.vdot(psi.amps, rho.mat @ psi.amps))
    return float(min(max(value, 0.0), 1.0))


def _psd_sqrt(mat):
    w, v = np.linalg.eigh(mat)
    # Rounding leaves ~1e-17 eigenvalues on rank-deficient inputs; their
    # square roots would otherwise contribute ~1e-8 each.
    w = np.where(w > 1e-13, w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity_general(rho, sigma):
    """
    Fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))**2 between two density
    matrices.

    Computed as the squared nuclear norm of sqrt(rho) sqrt(sigma), with matrix
    square roots from eigendecompositions, which makes the result symmetric
    in its arguments.

    Parameters
    ----------
    rho, sigma : DensityMatrix, PureState or numpy array

    Raises
    ------
    ValidationError
        If either argument is not positive semi-definite within -1e-9.
    """
    rho = density_matrix(to_density(rho).mat)
    sigma = density_matrix(to_density(sigma).mat)
    _check_same_size(rho, sigma)
    product = _psd_sqrt(rho.mat) @ _psd_sqrt(sigma.mat)
    value = np.sum(np.linalg.svd(product, compute_uv=False)) ** 2
    return float(min(max(value, 0.0), 1.0))


def coherence_losses(mats):
    """
    Coherence loss of a stack of matrices; the last two axes are the matrix.
    """
    return np.sum(np.abs(np.triu(mats, 1)) ** 2, axis=(-2, -1))


def coherence_loss(rho):
    """
    Sum of squared magnitudes of the strictly upper-triangular entries of rho.

    Zero exactly when rho is diagonal in the computational basis.
    """
    return float(coherence_losses(rho.mat))


def closest_basis_state(rho):
    """
    Index b of the largest diagonal entry rho_bb; ties go to the smallest b.
    """
    return int(np.argmax(np.real(np.diag(rho.mat))))


def purity(rho):
    return float(np.real(np.trace(rho.mat @ rho.mat)))


def partial_trace(rho, keep):
    """
    Reduced density matrix on the qubits in `keep`, in increasing order.
    """
    n = rho.n_qubits
    keep = sorted(_check_qubits(keep, n))
    t = rho.mat.reshape((2,) * (2 * n))
    current = n
    for q in reversed(range(n)):
        if q not in keep:
            t = np.trace(t, axis1=q, axis2=q + current)
            current -= 1
    dim = 2 ** len(keep)
    return DensityMatrix(len(keep), _freeze(t.reshape(dim, dim)))


# Random targets --------------------------------------------------------------


def haar_state(n, rng):
    """
    Haar-random pure state on n qubits.

    Drawn as a normalized vector of independent standard complex Gaussians.

    Parameters
    ----------
    n : int
    rng : numpy.random.Generator
    """
    _check_num_qubits(n)
    z = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return PureState(n, _freeze(z / np.linalg.norm(z)))


def qubit_partition(blocks, n):
    """
    Validate and normalize a partition of range(n) into blocks.

    Raises
    ------
    ValueError
        If blocks overlap, are empty, or do not cover every qubit.
    """
    _check_num_qubits(n)
    blocks = tuple(sorted(tuple(sorted(int(q) for q in block)) for block in blocks))
    flat = [q for block in blocks for q in block]
    if any(not block for block in blocks):
        raise ValueError("partition blocks must be non-empty")
    if sorted(flat) != list(range(n)):
        raise ValueError(
            f"partition blocks must be disjoint and cover range(0, {n}); got {blocks}"
        )
    return QubitPartition(n, blocks)


def set_partitions(n):
    """
    Iterate over all partitions of range(n), each as a tuple of blocks.
    """
    if n == 0:
        yield ()
        return
    for smaller in set_partitions(n - 1):
        for i in range(len(smaller)):
            yield smaller[:i] + (smaller[i] + (n - 1,),) + smaller[i + 1 :]
        yield smaller + ((n - 1,),)


def sample_structured_state(partition, rng):
    """
    Product of independent Haar states, one per block, with the qubit
    positions then shuffled by a uniformly random permutation.
    """
    n = partition.n_qubits
    qubit_partition(partition.blocks, n)
    order = [q for block in partition.blocks for q in block]
    amps = np.ones(1, dtype=complex)
    for block in partition.blocks:
        amps = np.kron(amps, haar_state(len(block), rng).amps)
    t = amps.reshape((2,) * n)
    t = np.transpose(t, np.argsort(order))
    t = np.transpose(t, rng.permutation(n))
    return PureState(n, _freeze(t.reshape(-1)))


def sample_structured_target(partition, rng):
    """
    Density matrix of `sample_structured_state(partition, rng)`.
    """
    return projector(sample_structured_state(partition, rng))


def random_partition(n, rng):
    """
    Partition of range(n) drawn uniformly from all set partitions.
    """
    choices = _partitions_of(n)
    return QubitPartition(n, choices[rng.integers(len(choices))])


_PARTITION_CACHE = {}


def _partitions_of(n):
    if n not in _PARTITION_CACHE:
        _PARTITION_CACHE[n] = list(
            tuple(sorted(blocks)) for blocks in set_partitions(n)
        )
    return _PARTITION_CACHE[n]
