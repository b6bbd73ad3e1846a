"""
Generic extensible conversion functions that use singledispatch.
"""

import functools


@functools.singledispatch
def to_density(x):
    """
    Convert a state-like value to a DensityMatrix.

    Parameters
    ----------
    x : PureState, DensityMatrix or numpy array
        Arrays of rank 1 are read as amplitude vectors, arrays of rank 2 as
        density matrices.

    Returns
    -------
    rho : DensityMatrix

    Raises
    ------
    ValidationError
        If the value does not describe a valid quantum state.
    """
    raise NotImplementedError(f"No overload available for type {type(x)}")


@functools.singledispatch
def num_qubits(x) -> int:
    """
    Number of qubits a state-like value acts on.
    """
    raise NotImplementedError(f"No overload available for type {type(x)}")
