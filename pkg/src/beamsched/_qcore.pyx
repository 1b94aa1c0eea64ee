# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled selection kernel: ZF objective per candidate set + greedy search.

Same contract as `_qcore_py`: Q(M) for a sorted candidate set, -inf when the
effective submatrix is singular or its 2-norm condition number exceeds the
limit. The condition number comes from a one-sided Jacobi SVD of G (accurate
for tiny singular values, unlike the Gram-matrix route); the inverse from an
in-place LU with partial pivoting (exact for square nonsingular G, which is
the only shape the protocol produces).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, log2, sqrt

cnp.import_array()

COMPILED = True

ctypedef double complex cplx


cdef inline double _cabs2(cplx z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef void _singular_extremes(cplx* a, int m, double* smin, double* smax) nogil:
    """Min/max singular value of `a` (row-major m x m, destroyed).

    One-sided Jacobi: unitary column rotations until columns are mutually
    orthogonal; singular values are then the column norms. Column rotations
    diagonalize the implicit Gram matrix A^H A without ever forming it, so
    tiny singular values keep full relative accuracy.
    """
    cdef int i, j, k, sweep
    cdef bint converged
    cdef double aii, ajj, gabs, tau, t, c, s, v
    cdef cplx aij, phi, col_i, col_j, jqp, jqq
    for sweep in range(60):
        converged = True
        for i in range(m - 1):
            for j in range(i + 1, m):
                aii = 0.0
                ajj = 0.0
                aij = 0.0
                for k in range(m):
                    aii += _cabs2(a[k * m + i])
                    ajj += _cabs2(a[k * m + j])
                    aij = aij + a[k * m + i].conjugate() * a[k * m + j]
                gabs = sqrt(_cabs2(aij))
                if gabs <= 1e-15 * sqrt(aii * ajj) or gabs == 0.0:
                    continue
                converged = False
                phi = aij / gabs
                tau = (ajj - aii) / (2.0 * gabs)
                if tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                # columns (i, j) <- (i, j) @ [[c, s], [-s*conj(phi), c*conj(phi)]]
                jqp = -s * phi.conjugate()
                jqq = c * phi.conjugate()
                for k in range(m):
                    col_i = a[k * m + i]
                    col_j = a[k * m + j]
                    a[k * m + i] = col_i * c + col_j * jqp
                    a[k * m + j] = col_i * s + col_j * jqq
        if converged:
            break
    smin[0] = INFINITY
    smax[0] = 0.0
    for i in range(m):
        v = 0.0
        for k in range(m):
            v += _cabs2(a[k * m + i])
        v = sqrt(v)
        if v < smin[0]:
            smin[0] = v
        if v > smax[0]:
            smax[0] = v


cdef int _lu_invert(cplx* lu, int m, int* piv, cplx* x) nogil:
    """In-place LU with partial pivoting; writes the inverse into x.
    Returns -1 on an exactly zero pivot."""
    cdef int i, j, k, maxrow
    cdef double maxval, v
    cdef cplx factor, tmp
    for k in range(m):
        maxval = 0.0
        maxrow = k
        for i in range(k, m):
            v = _cabs2(lu[i * m + k])
            if v > maxval:
                maxval = v
                maxrow = i
        if maxval == 0.0:
            return -1
        piv[k] = maxrow
        if maxrow != k:
            for j in range(m):
                tmp = lu[k * m + j]
                lu[k * m + j] = lu[maxrow * m + j]
                lu[maxrow * m + j] = tmp
        for i in range(k + 1, m):
            factor = lu[i * m + k] / lu[k * m + k]
            lu[i * m + k] = factor
            for j in range(k + 1, m):
                lu[i * m + j] = lu[i * m + j] - factor * lu[k * m + j]
    for j in range(m):
        for i in range(m):
            x[i * m + j] = 1.0 if i == j else 0.0
        for k in range(m):
            if piv[k] != k:
                tmp = x[k * m + j]
                x[k * m + j] = x[piv[k] * m + j]
                x[piv[k] * m + j] = tmp
        for i in range(m):                              # L y = P b
            for k in range(i):
                x[i * m + j] = x[i * m + j] - lu[i * m + k] * x[k * m + j]
        for i in range(m - 1, -1, -1):                  # U x = y
            for k in range(i + 1, m):
                x[i * m + j] = x[i * m + j] - lu[i * m + k] * x[k * m + j]
            x[i * m + j] = x[i * m + j] / lu[i * m + i]
    return 0


cdef double _eval_q(const cplx[:, ::1] u, const cplx[:, ::1] gram,
                    const double[::1] w, const double[::1] sigma2,
                    double p, double cond_limit,
                    const cnp.int64_t* mem, int m,
                    cplx* g, cplx* work, cplx* x, int* piv) nogil:
    cdef int a_, b_, k
    cdef double smin, smax, n2, scale, sig, interf, sinr, q
    cdef cplx acc
    for a_ in range(m):
        for b_ in range(m):
            g[a_ * m + b_] = u[mem[a_], mem[b_]]
    for k in range(m * m):
        work[k] = g[k]
    _singular_extremes(work, m, &smin, &smax)
    if smin <= 0.0 or smax <= 0.0:
        return -INFINITY
    if smax / smin > cond_limit:
        return -INFINITY
    for k in range(m * m):
        work[k] = g[k]
    if _lu_invert(work, m, piv, x) != 0:
        return -INFINITY
    for b_ in range(m):                                 # normalize columns
        n2 = 0.0
        for a_ in range(m):
            acc = 0.0
            for k in range(m):
                acc = acc + gram[mem[a_], mem[k]] * x[k * m + b_]
            n2 += (x[a_ * m + b_].conjugate() * acc).real
        if n2 <= 0.0:
            return -INFINITY
        scale = sqrt(p / m) / sqrt(n2)
        for a_ in range(m):
            x[a_ * m + b_] = x[a_ * m + b_] * scale
    q = 0.0
    for a_ in range(m):                                 # row a of V = G X
        sig = 0.0
        interf = 0.0
        for b_ in range(m):
            acc = 0.0
            for k in range(m):
                acc = acc + g[a_ * m + k] * x[k * m + b_]
            if b_ == a_:
                sig = _cabs2(acc)
            else:
                interf += _cabs2(acc)
        sinr = sig / (interf + sigma2[mem[a_]])
        q += w[mem[a_]] * log2(1.0 + sinr)
    return q


def _as_inputs(u, gram, w, sigma2):
    u = np.ascontiguousarray(u, dtype=np.complex128)
    gram = np.ascontiguousarray(gram, dtype=np.complex128)
    w = np.ascontiguousarray(w, dtype=np.float64)
    sigma2 = np.ascontiguousarray(sigma2, dtype=np.float64)
    return u, gram, w, sigma2


def q_of_set(u, gram, w, sigma2, double p, members, double cond_limit=1e12):
    u, gram, w, sigma2 = _as_inputs(u, gram, w, sigma2)
    mem = np.ascontiguousarray(members, dtype=np.int64)
    cdef int m = mem.shape[0]
    if m == 0:
        return 0.0
    n = u.shape[0]
    if mem.min() < 0 or mem.max() >= n or np.unique(mem).size != m:
        raise ValueError("members must be unique indices within range")
    mem = np.sort(mem)
    cdef cplx[:, ::1] u_v = u
    cdef cplx[:, ::1] gram_v = gram
    cdef double[::1] w_v = w
    cdef double[::1] s_v = sigma2
    cdef cnp.int64_t[::1] mem_v = mem
    scratch = np.empty(3 * m * m, dtype=np.complex128)
    pivots = np.empty(m, dtype=np.intc)
    cdef cplx[::1] sc = scratch
    cdef int[::1] pv = pivots
    return _eval_q(u_v, gram_v, w_v, s_v, p, cond_limit, &mem_v[0], m,
                   &sc[0], &sc[m * m], &sc[2 * m * m], &pv[0])


def greedy_core(u, gram, w, sigma2, double p, int n_max, double cond_limit=1e12):
    """Iterative user addition maximizing Q; stops on non-improvement.
    Returns (members ascending int64 array, per-iteration Q path)."""
    u, gram, w, sigma2 = _as_inputs(u, gram, w, sigma2)
    cdef cplx[:, ::1] u_v = u
    cdef cplx[:, ::1] gram_v = gram
    cdef double[::1] w_v = w
    cdef double[::1] s_v = sigma2
    cdef int n = u_v.shape[0]
    cdef int cap = n_max if n_max < n else n
    if cap <= 0:
        return np.empty(0, dtype=np.int64), np.empty(0)

    members_arr = np.empty(cap, dtype=np.int64)
    cand_arr = np.empty(cap, dtype=np.int64)
    in_set_arr = np.zeros(n, dtype=np.uint8)
    scratch = np.empty(3 * cap * cap, dtype=np.complex128)
    pivots = np.empty(cap, dtype=np.intc)
    path = np.empty(cap, dtype=np.float64)
    cdef cnp.int64_t[::1] members = members_arr
    cdef cnp.int64_t[::1] cand = cand_arr
    cdef cnp.uint8_t[::1] in_set = in_set_arr
    cdef cplx[::1] sc = scratch
    cdef int[::1] pv = pivots
    cdef double[::1] path_v = path

    cdef int count = 0, m, i, j, pos, best_i
    cdef double q_cur = 0.0, best_q, qv
    with nogil:
        while count < cap:
            m = count + 1
            best_q = -INFINITY
            best_i = -1
            for i in range(n):
                if in_set[i]:
                    continue
                pos = 0                      # merge members + {i}, sorted
                for j in range(count):
                    if members[j] < i:
                        cand[pos] = members[j]
                        pos += 1
                cand[pos] = i
                pos += 1
                for j in range(count):
                    if members[j] > i:
                        cand[pos] = members[j]
                        pos += 1
                qv = _eval_q(u_v, gram_v, w_v, s_v, p, cond_limit,
                             &cand[0], m, &sc[0], &sc[m * m], &sc[2 * m * m], &pv[0])
                if qv > best_q:
                    best_q = qv
                    best_i = i
            if best_i < 0 or best_q <= q_cur:
                break
            pos = count                      # insert keeping ascending order
            while pos > 0 and members[pos - 1] > best_i:
                members[pos] = members[pos - 1]
                pos -= 1
            members[pos] = best_i
            in_set[best_i] = 1
            q_cur = best_q
            path_v[count] = best_q
            count += 1
    return members_arr[:count].copy(), path[:count].copy()
