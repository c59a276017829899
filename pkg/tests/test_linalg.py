import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from graphsnd.errors import ConvergenceError
from graphsnd.linalg import jacobi_eigenvalues


def test_known_spectra():
    k4 = np.ones((4, 4)) - np.eye(4)
    np.testing.assert_allclose(jacobi_eigenvalues(k4), [3, -1, -1, -1], atol=1e-12)
    c4 = np.roll(np.eye(4), 1, axis=1) + np.roll(np.eye(4), -1, axis=1)
    np.testing.assert_allclose(jacobi_eigenvalues(c4), [2, 0, 0, -2], atol=1e-12)


def test_odd_size_and_trivial_inputs():
    j3 = np.ones((3, 3)) - np.eye(3)
    np.testing.assert_allclose(jacobi_eigenvalues(j3), [2, -1, -1], atol=1e-12)
    assert jacobi_eigenvalues(np.zeros((5, 5))).tolist() == [0.0] * 5
    assert jacobi_eigenvalues([[2.0]]).tolist() == [2.0]


def test_agrees_with_lapack_on_random_matrices():
    rng = np.random.default_rng(0)
    for n in (2, 7, 30, 61):
        a = rng.standard_normal((n, n))
        a = a + a.T
        ref = np.sort(np.linalg.eigvalsh(a))[::-1]
        np.testing.assert_allclose(jacobi_eigenvalues(a), ref, atol=1e-9 * np.abs(ref).max())


@given(arrays(np.float64, (6, 6), elements=st.floats(-1e3, 1e3)))
def test_trace_and_frobenius_preserved(a):
    a = a + a.T
    eig = jacobi_eigenvalues(a)
    scale = max(1.0, np.abs(a).max())
    assert abs(eig.sum() - np.trace(a)) <= 1e-9 * scale * 6
    assert abs(np.sum(eig**2) - np.sum(a * a)) <= 1e-8 * max(1.0, np.sum(a * a))


def test_rejects_non_square_and_reports_nonconvergence():
    with pytest.raises(ValueError):
        jacobi_eigenvalues(np.zeros((2, 3)))
    a = np.random.default_rng(1).standard_normal((10, 10))
    with pytest.raises(ConvergenceError):
        jacobi_eigenvalues(a + a.T, tol=1e-300, max_sweeps=1)
