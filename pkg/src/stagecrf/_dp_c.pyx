# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled chain dynamic-programming kernels.

Same contracts as ``stagecrf._dp_py``; see that module for documentation.
Masked transitions are skipped outright, so masked positions are never read
into any reduction.
"""

from libc.math cimport exp, log

cimport numpy as cnp

import numpy as np

from .errors import NoAllowedPathError


def forward_pass(unary, pairwise, mask):
    """Masked log-space forward recursion; returns (alpha, reach, log_partition)."""
    cdef double[:, ::1] u = np.ascontiguousarray(unary, dtype=np.float64)
    cdef double[:, :, ::1] p = np.ascontiguousarray(pairwise, dtype=np.float64)
    cdef unsigned char[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t T = u.shape[0]
    cdef Py_ssize_t C = u.shape[1]
    alpha_arr = np.zeros((T, C), dtype=np.float64)
    reach_arr = np.zeros((T, C), dtype=np.uint8)
    cdef double[:, ::1] alpha = alpha_arr
    cdef unsigned char[:, ::1] reach = reach_arr
    cdef Py_ssize_t t, a, b
    cdef double best, acc, s
    cdef bint found, any_next

    for b in range(C):
        alpha[0, b] = u[0, b]
        reach[0, b] = 1
    for t in range(T - 1):
        any_next = False
        for b in range(C):
            best = 0.0
            found = False
            for a in range(C):
                if m[a, b] and reach[t, a]:
                    s = alpha[t, a] + p[t, a, b]
                    if not found or s > best:
                        best = s
                        found = True
            if not found:
                continue
            acc = 0.0
            for a in range(C):
                if m[a, b] and reach[t, a]:
                    acc += exp(alpha[t, a] + p[t, a, b] - best)
            alpha[t + 1, b] = u[t + 1, b] + best + log(acc)
            reach[t + 1, b] = 1
            any_next = True
        if not any_next:
            raise NoAllowedPathError(f"no allowed transition into frame {t + 1}")

    best = 0.0
    found = False
    for b in range(C):
        if reach[T - 1, b] and (not found or alpha[T - 1, b] > best):
            best = alpha[T - 1, b]
            found = True
    acc = 0.0
    for b in range(C):
        if reach[T - 1, b]:
            acc += exp(alpha[T - 1, b] - best)
    return alpha_arr, reach_arr.view(np.bool_), best + log(acc)


def backward_pass(unary, pairwise, mask):
    """Masked log-space backward recursion; returns (beta, reach)."""
    cdef double[:, ::1] u = np.ascontiguousarray(unary, dtype=np.float64)
    cdef double[:, :, ::1] p = np.ascontiguousarray(pairwise, dtype=np.float64)
    cdef unsigned char[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t T = u.shape[0]
    cdef Py_ssize_t C = u.shape[1]
    beta_arr = np.zeros((T, C), dtype=np.float64)
    reach_arr = np.zeros((T, C), dtype=np.uint8)
    cdef double[:, ::1] beta = beta_arr
    cdef unsigned char[:, ::1] reach = reach_arr
    cdef Py_ssize_t t, a, b
    cdef double best, acc, s
    cdef bint found

    for a in range(C):
        reach[T - 1, a] = 1
    for t in range(T - 2, -1, -1):
        for a in range(C):
            best = 0.0
            found = False
            for b in range(C):
                if m[a, b] and reach[t + 1, b]:
                    s = p[t, a, b] + u[t + 1, b] + beta[t + 1, b]
                    if not found or s > best:
                        best = s
                        found = True
            if not found:
                continue
            acc = 0.0
            for b in range(C):
                if m[a, b] and reach[t + 1, b]:
                    acc += exp(p[t, a, b] + u[t + 1, b] + beta[t + 1, b] - best)
            beta[t, a] = best + log(acc)
            reach[t, a] = 1
    return beta_arr, reach_arr.view(np.bool_)


def viterbi_path(unary, pairwise, mask):
    """Maximum-score allowed sequence; ties prefer the smaller state index.

    Returns (labels, best_score) with labels 0-based.
    """
    cdef double[:, ::1] u = np.ascontiguousarray(unary, dtype=np.float64)
    cdef double[:, :, ::1] p = np.ascontiguousarray(pairwise, dtype=np.float64)
    cdef unsigned char[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t T = u.shape[0]
    cdef Py_ssize_t C = u.shape[1]
    delta_arr = np.zeros((T, C), dtype=np.float64)
    reach_arr = np.zeros((T, C), dtype=np.uint8)
    back_arr = np.zeros((T, C), dtype=np.int64)
    labels_arr = np.empty(T, dtype=np.int64)
    cdef double[:, ::1] delta = delta_arr
    cdef unsigned char[:, ::1] reach = reach_arr
    cdef cnp.int64_t[:, ::1] back = back_arr
    cdef cnp.int64_t[::1] labels = labels_arr
    cdef Py_ssize_t t, a, b, arg
    cdef double best, s
    cdef bint found, any_next

    for b in range(C):
        delta[0, b] = u[0, b]
        reach[0, b] = 1
    for t in range(T - 1):
        any_next = False
        for b in range(C):
            best = 0.0
            arg = 0
            found = False
            for a in range(C):
                if m[a, b] and reach[t, a]:
                    s = delta[t, a] + p[t, a, b]
                    if not found or s > best:
                        best = s
                        arg = a
                        found = True
            if not found:
                continue
            delta[t + 1, b] = u[t + 1, b] + best
            back[t + 1, b] = arg
            reach[t + 1, b] = 1
            any_next = True
        if not any_next:
            raise NoAllowedPathError(f"no allowed transition into frame {t + 1}")

    best = 0.0
    arg = 0
    found = False
    for b in range(C):
        if reach[T - 1, b] and (not found or delta[T - 1, b] > best):
            best = delta[T - 1, b]
            arg = b
            found = True
    labels[T - 1] = arg
    for t in range(T - 2, -1, -1):
        labels[t] = back[t + 1, labels[t + 1]]
    return labels_arr, best
