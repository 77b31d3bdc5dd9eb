"""Shared fixtures: canonical example systems and random-system generators."""

import numpy as np
import pytest

from dsest import DescriptorSystem, EstimatorRealization


@pytest.fixture
def ex_system() -> DescriptorSystem:
    """Worked 4-state example: one unstable measured mode, two stable modes
    carrying the functional, and one purely algebraic state."""
    E = np.diag([1.0, 1.0, 1.0, 0.0])
    A = np.array([[1.0, 0, 0, 0],
                  [0, -1.0, 1.0, 0],
                  [0, 0, -1.0, 0],
                  [0, 0, 0, 1.0]])
    B = np.ones((4, 1))
    C = np.array([[1.0, 0, 0, 0]])
    K = np.ones((1, 4))
    return DescriptorSystem.from_matrices(E, A, B, C, K)


@pytest.fixture
def ex_reference_estimator() -> EstimatorRealization:
    """Hand-derived order-2 estimator for ex_system (the reference
    realization with the algebraic state folded into the feedthrough)."""
    return EstimatorRealization(
        N=np.array([[-1.0, 1.0], [0.0, -1.0]]),
        H=np.array([[1.0, 0.0], [1.0, 0.0]]),
        R=np.array([[1.0, 1.0]]),
        M=np.array([[-1.0, 1.0]]))


@pytest.fixture
def sigma_violating_system() -> DescriptorSystem:
    """Nilpotent block feeding the functional through an input derivative:
    0 = x2 + u forces x1 = x2' = -u', so z = x1 is non-causal."""
    E = np.array([[0.0, 1.0], [0.0, 0.0]])
    A = np.eye(2)
    B = np.array([[0.0], [1.0]])
    C = np.zeros((0, 2))
    K = np.array([[1.0, 0.0]])
    return DescriptorSystem.from_matrices(E, A, B, C, K)


@pytest.fixture
def sigma_causal_system() -> DescriptorSystem:
    """Same pencil but the functional reads the causal component x2."""
    E = np.array([[0.0, 1.0], [0.0, 0.0]])
    A = np.eye(2)
    B = np.array([[0.0], [1.0]])
    C = np.zeros((0, 2))
    K = np.array([[0.0, 1.0]])
    return DescriptorSystem.from_matrices(E, A, B, C, K)


def random_system(rng: np.random.Generator, max_dim: int = 5,
                  entry_range: int = 3) -> DescriptorSystem:
    """Random integer-entry rectangular descriptor system."""
    m = int(rng.integers(1, max_dim + 1))
    n = int(rng.integers(1, max_dim + 1))
    l = int(rng.integers(0, 3))
    p = int(rng.integers(0, 3))
    r = int(rng.integers(1, n + 1))
    def mat(a, b):
        return rng.integers(-entry_range, entry_range + 1, (a, b)).astype(float)
    return DescriptorSystem.from_matrices(
        mat(m, n), mat(m, n), mat(m, l), mat(p, n), mat(r, n), D=mat(p, l))


def random_pencil(rng: np.random.Generator, max_dim: int = 4,
                  entry_range: int = 3):
    m = int(rng.integers(1, max_dim + 1))
    n = int(rng.integers(1, max_dim + 1))
    E = rng.integers(-entry_range, entry_range + 1, (m, n)).astype(float)
    A = rng.integers(-entry_range, entry_range + 1, (m, n)).astype(float)
    return E, A
