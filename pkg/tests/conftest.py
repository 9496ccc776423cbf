import numpy as np
import pytest

from nonmarkov.dynamics import sandwich

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)


def projector(vec):
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj())


def random_cptp(dim, rng, n_kraus=3):
    """Random CPTP superoperator from a normalized Kraus set."""
    ops = [rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
           for _ in range(n_kraus)]
    gram = sum(op.conj().T @ op for op in ops)
    w, v = np.linalg.eigh(gram)
    correction = (v * 1.0 / np.sqrt(w)) @ v.conj().T
    total = np.zeros((dim * dim, dim * dim), dtype=complex)
    for op in ops:
        total += sandwich(op @ correction)
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(42)
