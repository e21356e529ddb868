# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: Padé-13 matrix exponential and the Magnus step trial.

Row-major (C-ordered) buffers are handed to column-major BLAS/LAPACK as the
transposed matrix. Since exp(A^T) = exp(A)^T and all intermediate products are
polynomials in A (hence commute), the column-major result buffer read back in
row-major order is exp(A) with no copies.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, log2
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport zgemm
from scipy.linalg.cython_lapack cimport zgesv

cnp.import_array()

ctypedef double complex z

cdef double[14] PADE13 = [
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
]
cdef double THETA13 = 5.371920351148152


cdef inline double _cabs(z v) noexcept nogil:
    cdef double re = v.real
    cdef double im = v.imag
    return (re * re + im * im) ** 0.5


cdef inline void _mm(int n, z* a, z* b, z* c) noexcept nogil:
    # column-major c = a @ b
    cdef char t = b'N'
    cdef z one = 1.0
    cdef z zero = 0.0
    zgemm(&t, &t, &n, &n, &n, &one, a, &n, b, &n, &zero, c, &n)


cdef int _expm(int n, z* a, z* out, z* w, int* ipiv) noexcept nogil:
    """exp of the n x n matrix in ``a`` (clobbered) into ``out``; ``w`` holds 6 n^2."""
    cdef Py_ssize_t nn = <Py_ssize_t>n * n
    cdef Py_ssize_t i, j, k
    cdef z* A2 = w
    cdef z* A4 = w + nn
    cdef z* A6 = w + 2 * nn
    cdef z* U = w + 3 * nn
    cdef z* V = w + 4 * nn
    cdef z* T = w + 5 * nn
    cdef double colsum, nrm = 0.0, fac
    cdef int s = 0, info = 0
    cdef const double* b = PADE13

    # 1-norm of the row-major matrix: largest column sum
    for j in range(n):
        colsum = 0.0
        for i in range(n):
            colsum += _cabs(a[i * n + j])
        if colsum > nrm:
            nrm = colsum
    if nrm > THETA13:
        s = <int>ceil(log2(nrm / THETA13))
        if s < 0:
            s = 0
    if s > 0:
        fac = 1.0
        for k in range(s):
            fac *= 0.5
        for k in range(nn):
            a[k] = a[k] * fac

    _mm(n, a, a, A2)
    _mm(n, A2, A2, A4)
    _mm(n, A4, A2, A6)

    for k in range(nn):
        T[k] = b[13] * A6[k] + b[11] * A4[k] + b[9] * A2[k]
    _mm(n, A6, T, U)
    for k in range(nn):
        U[k] = U[k] + b[7] * A6[k] + b[5] * A4[k] + b[3] * A2[k]
    for i in range(n):
        U[i * n + i] = U[i * n + i] + b[1]
    _mm(n, a, U, T)
    memcpy(U, T, nn * sizeof(z))

    for k in range(nn):
        T[k] = b[12] * A6[k] + b[10] * A4[k] + b[8] * A2[k]
    _mm(n, A6, T, V)
    for k in range(nn):
        V[k] = V[k] + b[6] * A6[k] + b[4] * A4[k] + b[2] * A2[k]
    for i in range(n):
        V[i * n + i] = V[i * n + i] + b[0]

    for k in range(nn):
        A2[k] = V[k] - U[k]
        out[k] = V[k] + U[k]
    zgesv(&n, &n, A2, &n, ipiv, out, &n, &info)
    if info != 0:
        return info

    for k in range(s):
        _mm(n, out, out, T)
        memcpy(out, T, nn * sizeof(z))
    return 0


cdef cnp.ndarray _as_square(object A, double complex scale):
    cdef cnp.ndarray arr = np.array(A, dtype=np.complex128, order="C", copy=True)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("expm expects a square matrix")
    if scale != 1.0:
        arr *= scale
    return arr


def expm(A):
    """Matrix exponential by scaling and squaring with a fixed Padé-13 approximant."""
    cdef cnp.ndarray a = _as_square(A, 1.0)
    cdef int n = <int>a.shape[0]
    cdef cnp.ndarray out = np.empty((n, n), dtype=np.complex128)
    if n == 0:
        return out
    if not a.any():
        return np.eye(n, dtype=np.complex128)
    cdef cnp.ndarray w = np.empty(6 * n * n, dtype=np.complex128)
    cdef cnp.ndarray ipiv = np.empty(n, dtype=np.intc)
    cdef int info
    with nogil:
        info = _expm(n, <z*>cnp.PyArray_DATA(a), <z*>cnp.PyArray_DATA(out),
                     <z*>cnp.PyArray_DATA(w), <int*>cnp.PyArray_DATA(ipiv))
    if info != 0:
        raise np.linalg.LinAlgError("singular Padé denominator in expm")
    return out


def magnus_trial(La, Lm, Lb, double h):
    """One step-doubling trial of the exponential-midpoint rule.

    ``Lm`` is the generator at the step midpoint, ``La``/``Lb`` at the
    midpoints of the two half steps. Returns the Richardson-extrapolated
    two-half-step propagator and the scaled entrywise difference between the
    single full step and the two half steps.
    """
    cdef cnp.ndarray a = _as_square(La, 0.5 * h)
    cdef cnp.ndarray m = _as_square(Lm, h)
    cdef cnp.ndarray bb = _as_square(Lb, 0.5 * h)
    cdef int n = <int>a.shape[0]
    if m.shape[0] != n or bb.shape[0] != n:
        raise ValueError("generator shapes differ")
    cdef Py_ssize_t nn = <Py_ssize_t>n * n
    cdef cnp.ndarray E1 = np.empty((n, n), dtype=np.complex128)
    cdef cnp.ndarray Ea = np.empty((n, n), dtype=np.complex128)
    cdef cnp.ndarray Eb = np.empty((n, n), dtype=np.complex128)
    cdef cnp.ndarray E2 = np.empty((n, n), dtype=np.complex128)
    cdef cnp.ndarray w = np.empty(6 * nn, dtype=np.complex128)
    cdef cnp.ndarray ipiv = np.empty(n, dtype=np.intc)
    cdef z* p1 = <z*>cnp.PyArray_DATA(E1)
    cdef z* p2 = <z*>cnp.PyArray_DATA(E2)
    cdef int info = 0
    cdef double diff = 0.0, big = 1.0, v
    cdef Py_ssize_t k
    with nogil:
        info = _expm(n, <z*>cnp.PyArray_DATA(m), p1,
                     <z*>cnp.PyArray_DATA(w), <int*>cnp.PyArray_DATA(ipiv))
        if info == 0:
            info = _expm(n, <z*>cnp.PyArray_DATA(a), <z*>cnp.PyArray_DATA(Ea),
                         <z*>cnp.PyArray_DATA(w), <int*>cnp.PyArray_DATA(ipiv))
        if info == 0:
            info = _expm(n, <z*>cnp.PyArray_DATA(bb), <z*>cnp.PyArray_DATA(Eb),
                         <z*>cnp.PyArray_DATA(w), <int*>cnp.PyArray_DATA(ipiv))
        if info == 0:
            # row-major Eb @ Ea is column-major Ea^T @ Eb^T
            _mm(n, <z*>cnp.PyArray_DATA(Ea), <z*>cnp.PyArray_DATA(Eb), p2)
            for k in range(nn):
                v = _cabs(p2[k])
                if v > big:
                    big = v
                v = _cabs(p1[k] - p2[k])
                if v > diff:
                    diff = v
                # Richardson: the symmetric rule has an odd error expansion
                p2[k] = p2[k] + (p2[k] - p1[k]) / 3.0
    if info != 0:
        raise np.linalg.LinAlgError("singular Padé denominator in expm")
    return E2, diff / big
