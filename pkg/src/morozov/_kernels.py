"""Conjugate-gradient kernels for the regularized normal system.

Both kernels solve ``(L^T L + lam * A^T A) x = b`` for symmetric positive
definite system matrices, with optional Jacobi (diagonal) preconditioning.
``cg_dense`` is the numba-compiled hot path for operators held as dense
matrices; ``cg_matvec`` is the pure-numpy path that also serves matrix-free
operators, where the system action is only available as a callback.

The environment variable ``MOROZOV_NUMBA`` selects the path for dense
operators: set it to ``0`` (or ``false``/``off``) before import to force
the numpy fallback everywhere. Matrix-free operators always use the
fallback, since jitted code cannot call back into Python.

Status codes returned by both kernels:
    0  converged to the requested relative residual
    1  iteration cap reached
    2  breakdown: the search direction has nonpositive curvature, i.e.
       the system matrix is not positive definite
"""

import os

import numpy as np

__all__ = ["NUMBA_ENABLED", "cg_dense", "cg_matvec"]


def _env_wants_numba():
    return os.environ.get("MOROZOV_NUMBA", "1").strip().lower() not in (
        "0",
        "false",
        "off",
    )


NUMBA_ENABLED = False
if _env_wants_numba():
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False


def _cg_dense_impl(A, L, lam, b, diag, tol, max_iter):
    n = b.shape[0]
    x = np.zeros(n)
    b_norm = np.sqrt(np.dot(b, b))
    if b_norm == 0.0:
        return x, 0, 0.0, 0
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = np.dot(r, z)
    rel = 1.0
    k = 0
    status = 1
    while k < max_iter:
        Ap = np.dot(A, p)
        Lp = np.dot(L, p)
        Mp = np.dot(L.T, Lp) + lam * np.dot(A.T, Ap)
        pMp = np.dot(p, Mp)
        if not np.isfinite(pMp) or pMp <= 0.0:
            status = 2
            break
        alpha = rz / pMp
        x = x + alpha * p
        r = r - alpha * Mp
        k += 1
        rel = np.sqrt(np.dot(r, r)) / b_norm
        if rel <= tol:
            status = 0
            break
        z = r / diag
        rz_next = np.dot(r, z)
        beta = rz_next / rz
        rz = rz_next
        p = z + beta * p
    return x, k, rel, status


if NUMBA_ENABLED:
    cg_dense = njit(cache=True)(_cg_dense_impl)
else:
    cg_dense = _cg_dense_impl


def cg_matvec(system_apply, b, diag=None, tol=1e-10, max_iter=1000):
    """Preconditioned CG where the system action is a callback.

    Parameters
    ----------
    system_apply : callable
        Maps a vector to the SPD system matrix times that vector.
    b : ndarray
        Right-hand side.
    diag : ndarray or None
        Jacobi preconditioner diagonal; None for unpreconditioned CG.
    tol : float
        Relative residual target ||r|| / ||b||.
    max_iter : int
        Iteration cap.

    Returns
    -------
    (x, iterations, relative_residual, status)
    """
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    x = np.zeros(n)
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return x, 0, 0.0, 0
    if diag is None:
        diag = np.ones(n)
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    rel = 1.0
    k = 0
    status = 1
    while k < max_iter:
        Mp = system_apply(p)
        pMp = float(p @ Mp)
        if not np.isfinite(pMp) or pMp <= 0.0:
            status = 2
            break
        alpha = rz / pMp
        x = x + alpha * p
        r = r - alpha * Mp
        k += 1
        rel = float(np.linalg.norm(r)) / b_norm
        if rel <= tol:
            status = 0
            break
        z = r / diag
        rz_next = float(r @ z)
        beta = rz_next / rz
        rz = rz_next
        p = z + beta * p
    return x, k, rel, status
