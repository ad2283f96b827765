# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Call signatures mirror ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, isfinite
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef double COINCIDENT_EPS = 1e-6


cdef inline Py_ssize_t _offset(Py_ssize_t n, Py_ssize_t i) nogil:
    return i * n - i * (i + 1) // 2


def condensed_offset(Py_ssize_t n, Py_ssize_t i):
    return _offset(n, i)


def hamming_block(const unsigned char[:, ::1] X, Py_ssize_t i0, Py_ssize_t i1,
                  int64_t[::1] out):
    cdef Py_ssize_t n = X.shape[0], f = X.shape[1]
    cdef Py_ssize_t words = (f + 63) // 64
    cdef uint64_t[:, ::1] packed = np.zeros((n, words if words > 0 else 1), dtype=np.uint64)
    cdef Py_ssize_t i, j, k, off
    cdef int64_t acc
    with nogil:
        for i in range(n):
            for k in range(f):
                if X[i, k]:
                    packed[i, k >> 6] |= (<uint64_t>1) << (k & 63)
        if i1 > n - 1:
            i1 = n - 1
        for i in range(i0, i1):
            off = _offset(n, i)
            for j in range(i + 1, n):
                acc = 0
                for k in range(words):
                    acc += __builtin_popcountll(packed[i, k] ^ packed[j, k])
                out[off + j - i - 1] = acc


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def weighted_hamming_block(const unsigned char[:, ::1] X, const double[::1] w,
                           Py_ssize_t i0, Py_ssize_t i1, double[::1] out):
    cdef Py_ssize_t n = X.shape[0], f = X.shape[1]
    cdef Py_ssize_t i, j, k, off
    cdef double acc
    with nogil:
        if i1 > n - 1:
            i1 = n - 1
        for i in range(i0, i1):
            off = _offset(n, i)
            for j in range(i + 1, n):
                acc = 0.0
                for k in range(f):
                    if X[i, k] != X[j, k]:
                        acc = acc + w[k]
                out[off + j - i - 1] = acc


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _coincident_angle(uint64_t seed, uint64_t i, uint64_t j) nogil:
    cdef uint64_t h = _mix64(seed * <uint64_t>0x9E3779B97F4A7C15ULL
                             + i * <uint64_t>0xD1B54A32D192ED03ULL + j)
    return <double>(h >> 11) * (1.0 / 9007199254740992.0) * 6.283185307179586


def coincident_angle(seed, i, j):
    return _coincident_angle(<uint64_t>(seed & 0xFFFFFFFFFFFFFFFF), i, j)


def fa2_forces(const double[:, ::1] pos, const double[::1] mass,
               const int64_t[::1] src, const int64_t[::1] dst,
               const double[::1] attraction, double k_repulsion, double gravity,
               seed):
    cdef Py_ssize_t n = pos.shape[0], m = src.shape[0]
    forces_arr = np.zeros((n, 2), dtype=np.float64)
    cdef double[:, ::1] F = forces_arr
    cdef Py_ssize_t i, j, e, bad_i = -1, bad_j = -1
    cdef double dx, dy, d2, d, fac, fx, fy, theta, r, g
    cdef uint64_t useed = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                dx = pos[i, 0] - pos[j, 0]
                dy = pos[i, 1] - pos[j, 1]
                d2 = dx * dx + dy * dy
                d = sqrt(d2)
                fac = k_repulsion * mass[i] * mass[j]
                if d < COINCIDENT_EPS:
                    theta = _coincident_angle(useed, i, j)
                    fx = fac * cos(theta)
                    fy = fac * sin(theta)
                else:
                    fac = fac / d2
                    fx = fac * dx
                    fy = fac * dy
                if not (isfinite(fx) and isfinite(fy)):
                    bad_i = i
                    bad_j = j
                    break
                F[i, 0] += fx
                F[i, 1] += fy
                F[j, 0] -= fx
                F[j, 1] -= fy
            if bad_i >= 0:
                break
        if bad_i < 0:
            for e in range(m):
                i = src[e]
                j = dst[e]
                fx = attraction[e] * (pos[j, 0] - pos[i, 0])
                fy = attraction[e] * (pos[j, 1] - pos[i, 1])
                if not (isfinite(fx) and isfinite(fy)):
                    bad_i = i
                    bad_j = j
                    break
                F[i, 0] += fx
                F[i, 1] += fy
                F[j, 0] -= fx
                F[j, 1] -= fy
        if bad_i < 0 and gravity > 0.0:
            for i in range(n):
                r = sqrt(pos[i, 0] * pos[i, 0] + pos[i, 1] * pos[i, 1])
                if r > 0.0:
                    g = gravity * mass[i] / r
                    F[i, 0] -= g * pos[i, 0]
                    F[i, 1] -= g * pos[i, 1]
        if bad_i < 0:
            for i in range(n):
                if not (isfinite(F[i, 0]) and isfinite(F[i, 1])):
                    bad_i = i
                    bad_j = i
                    break
    return forces_arr, bad_i, bad_j


def louvain_sweeps(const int64_t[::1] indptr, const int64_t[::1] indices,
                   const double[::1] weights, const double[::1] k,
                   int64_t[::1] comm, double[::1] tot, const int64_t[::1] order,
                   double m2, double min_gain, double eps, bint record):
    cdef Py_ssize_t n_comm = tot.shape[0], n_order = order.shape[0]
    cdef double[::1] neigh_w = np.zeros(max(n_comm, 1), dtype=np.float64)
    cdef int64_t[::1] touched = np.zeros(max(n_comm, 1), dtype=np.int64)
    cdef Py_ssize_t n_touched, t, p, oi
    cdef int64_t i, j, c, ci, best
    cdef double ki, gain_ci, best_gain, g, dq
    cdef double threshold = min_gain if min_gain > eps else eps
    cdef long moved, moved_total = 0
    log = [] if record else None
    while True:
        moved = 0
        for oi in range(n_order):
            i = order[oi]
            ki = k[i]
            if ki == 0.0:
                continue
            ci = comm[i]
            n_touched = 0
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j == i:
                    continue
                c = comm[j]
                if neigh_w[c] == 0.0:
                    touched[n_touched] = c
                    n_touched += 1
                neigh_w[c] += weights[p]
            tot[ci] -= ki
            gain_ci = neigh_w[ci] - tot[ci] * ki / m2
            best = ci
            best_gain = gain_ci
            for t in range(n_touched):
                c = touched[t]
                g = neigh_w[c] - tot[c] * ki / m2
                if g > best_gain or (g == best_gain and c < best):
                    best = c
                    best_gain = g
            for t in range(n_touched):
                neigh_w[touched[t]] = 0.0
            dq = (best_gain - gain_ci) * 2.0 / m2
            if best != ci and dq > threshold:
                tot[best] += ki
                comm[i] = best
                moved += 1
                if record:
                    log.append((i, ci, best, dq))
            else:
                tot[ci] += ki
        moved_total += moved
        if moved == 0:
            break
    return moved_total, log
