"""Dense symmetric eigenvalues by cyclic Jacobi rotation.

Rotations are scheduled with the round-robin (chess tournament) ordering:
each round pairs every index with exactly one partner, the rotations of a
round touch disjoint row/column pairs and therefore commute, so a whole
round is applied at once with vectorized row and column updates. One sweep
is ``n - 1`` rounds and visits every off-diagonal pair once.
"""

import numpy as np

from .errors import ConvergenceError

__all__ = ["jacobi_eigenvalues", "DEFAULT_TOL", "DEFAULT_MAX_SWEEPS", "MAX_DENSE_N"]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_SWEEPS = 100
MAX_DENSE_N = 2000


def _round_robin(size):
    """Yield ``(p, q)`` index arrays, one pair per round, covering all pairs."""
    players = np.arange(size)
    half = size // 2
    for _ in range(size - 1):
        p = players[:half]
        q = players[size - 1 : half - 1 : -1]
        yield np.minimum(p, q), np.maximum(p, q)
        players = np.concatenate(([players[0]], [players[-1]], players[1:-1]))


def _off_norm(a):
    off = a - np.diag(np.diag(a))
    return np.sqrt(np.sum(off * off))


def jacobi_eigenvalues(matrix, tol=DEFAULT_TOL, max_sweeps=DEFAULT_MAX_SWEEPS):
    """Eigenvalues of a real symmetric matrix, sorted in descending order.

    Parameters
    ----------
    matrix : array_like, shape (n, n)
        Symmetric input. Only symmetry up to rounding is assumed; the matrix
        is symmetrized before iterating.
    tol : float
        Convergence threshold on the off-diagonal Frobenius norm, relative to
        the Frobenius norm of the input.
    max_sweeps : int
        Sweep budget before :class:`ConvergenceError` is raised.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("jacobi_eigenvalues needs a square matrix")
    n = a.shape[0]
    if n > MAX_DENSE_N:
        raise ValueError(f"dense solver budget is n <= {MAX_DENSE_N}, got {n}")
    if n == 0:
        return np.empty(0)
    a = 0.5 * (a + a.T)
    scale = np.sqrt(np.sum(a * a))
    if n == 1 or scale == 0.0:
        return np.sort(np.diag(a))[::-1].copy()

    # odd sizes get a decoupled zero row/column; its rotations are identities
    padded = n % 2 == 1
    if padded:
        a = np.pad(a, ((0, 1), (0, 1)))
    size = a.shape[0]
    threshold = tol * scale

    for _ in range(max_sweeps):
        if _off_norm(a) <= threshold:
            break
        for p, q in _round_robin(size):
            apq = a[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            # a subnormal apq overflows theta to +-inf; the asymptotic root
            # below then gives t = 0, the correct limiting rotation
            with np.errstate(over="ignore"):
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            big = np.abs(theta) > 1e150
            theta_safe = np.where(big, 1.0, theta)
            t = np.sign(theta_safe) / (np.abs(theta_safe) + np.sqrt(theta_safe * theta_safe + 1.0))
            # asymptotic root for huge |theta|, avoids overflow of theta**2
            t = np.where(big, 0.5 / np.where(big, theta, 1.0), t)
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rows_p = a[p].copy()
            rows_q = a[q].copy()
            a[p] = c[:, None] * rows_p - s[:, None] * rows_q
            a[q] = s[:, None] * rows_p + c[:, None] * rows_q
            cols_p = a[:, p].copy()
            cols_q = a[:, q].copy()
            a[:, p] = cols_p * c - cols_q * s
            a[:, q] = cols_p * s + cols_q * c
            a[p, q] = 0.0
            a[q, p] = 0.0
    else:
        if _off_norm(a) > threshold:
            raise ConvergenceError(
                f"Jacobi did not reach off-diagonal tol {tol} in {max_sweeps} sweeps"
            )

    eig = np.diag(a)
    if padded:
        eig = eig[:n]
    return np.sort(eig)[::-1].copy()
