# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled cyclic Jacobi sweeps for dense symmetric matrices.

Hot kernel of the whole package: every singular-value computation reduces
to symmetric eigenvalues of a Gram matrix, and this loop dominates runtime.
The NumPy fallback in ``_jacobi_py`` implements the same contract.
"""

from libc.math cimport fabs, sqrt


def jacobi_sweeps(double[:, ::1] a, double tol, int max_sweeps):
    """Diagonalize symmetric ``a`` in place by cyclic Jacobi rotations.

    Sweeps until the largest off-diagonal magnitude is <= ``tol`` or
    ``max_sweeps`` is reached.  Returns the number of full sweeps run.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double apq, theta, t, c, s, akp, akq, off

    if n < 2:
        return 0
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                if fabs(a[p, q]) > off:
                    off = fabs(a[p, q])
        if off <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                # two-sided rotation in the (p, q) plane: rows, then columns
                for k in range(n):
                    akp = a[p, k]
                    akq = a[q, k]
                    a[p, k] = c * akp - s * akq
                    a[q, k] = s * akp + c * akq
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                a[p, q] = 0.0
                a[q, p] = 0.0
    return max_sweeps
