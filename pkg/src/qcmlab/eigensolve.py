"""Symmetric eigenvalues via cyclic Jacobi sweeps on Gram matrices.

The kernel is selected once at import: the compiled Cython extension when it
was built, otherwise the vectorized NumPy implementation.  Set the
environment variable ``QCMLAB_PURE_PYTHON=1`` to force the fallback.
The algorithm is fixed (no LAPACK) so accuracy is dimension independent and
both backends are interchangeable; ``benchmarks/bench_eigensolver.py``
compares them.
"""

import os

import numpy as np

from .errors import NonFiniteEntry

if os.environ.get("QCMLAB_PURE_PYTHON", "") not in ("", "0"):
    from ._jacobi_py import jacobi_sweeps as _sweeps
    BACKEND = "python"
else:
    try:
        from ._jacobi_cy import jacobi_sweeps as _sweeps
        BACKEND = "cython"
    except ImportError:
        from ._jacobi_py import jacobi_sweeps as _sweeps
        BACKEND = "python"

# off-diagonal target relative to the largest entry of the input matrix
OFF_DIAG_RTOL = 1e-14
MAX_SWEEPS = 60


def kernel_backend():
    """Name of the active Jacobi kernel: 'cython' or 'python'."""
    return BACKEND


def symmetric_eigenvalues(matrix, rtol=OFF_DIAG_RTOL, max_sweeps=MAX_SWEEPS):
    """Eigenvalues of a real symmetric matrix, unsorted.

    Runs cyclic Jacobi sweeps until every off-diagonal entry is below
    ``rtol`` times the largest absolute entry of the input.
    """
    a = np.array(matrix, dtype=np.float64, order="C", copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NonFiniteEntry("matrix contains NaN or infinity")
    n = a.shape[0]
    if n == 0:
        return np.empty(0)
    scale = np.max(np.abs(a))
    if scale == 0.0:
        return np.zeros(n)
    tol = rtol * scale
    _sweeps(a, tol, max_sweeps)
    off = np.max(np.abs(a[np.triu_indices(n, 1)])) if n > 1 else 0.0
    if off > tol:
        raise ArithmeticError(
            f"Jacobi sweeps did not converge in {max_sweeps} sweeps "
            f"(residual {off:.3e}, target {tol:.3e})")
    return np.diagonal(a).copy()
