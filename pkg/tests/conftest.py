import numpy as np
import pytest

from tnkit import mps as m


SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
Y_SINGLET = np.array([[0, -1], [1, 0]], dtype=complex)


def rng(seed):
    return np.random.default_rng(seed)


def random_complex(shape, seed):
    r = rng(seed)
    return r.standard_normal(shape) + 1j * r.standard_normal(shape)


@pytest.fixture
def ghz2():
    return m.from_matrices([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])


@pytest.fixture
def aklt():
    """AKLT tensor in the rotated (Pauli) basis, unnormalized."""
    return m.from_matrices([SX / np.sqrt(2), SY / np.sqrt(2), SZ / np.sqrt(2)])


@pytest.fixture
def aklt_sz():
    """AKLT tensor in the S_z basis, physical order (+1, 0, -1)."""
    up = np.array([[1, 0], [0, 0]], dtype=complex)
    dn = np.array([[0, 0], [0, 1]], dtype=complex)
    return m.from_matrices(
        [up @ Y_SINGLET, SX @ Y_SINGLET / np.sqrt(2), dn @ Y_SINGLET]
    )


@pytest.fixture
def cluster():
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    minus = np.array([1, -1], dtype=complex) / np.sqrt(2)
    a0 = np.outer([1, 0], plus)
    a1 = np.outer([0, 1], minus)
    return m.from_matrices([a0, a1])


@pytest.fixture
def w_state():
    a0 = np.eye(2, dtype=complex)
    a1 = np.array([[0, 1], [0, 0]], dtype=complex)
    return m.from_matrices(
        [a0, a1], boundary=m.OpenBoundary([1, 0], [0, 1])
    )


def random_injective_mps(d, D, seed):
    """Random dense tensor; injective (hence normal) with probability one."""
    return m.UniformMps(m.MpsTensor(random_complex((d, D, D), seed)))
