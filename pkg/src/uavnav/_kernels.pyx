# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled covariance kernels.

Semantics match :mod:`uavnav._kernels_py` exactly; see that module for the
reference implementation.
"""

import numpy as np

from libc.math cimport cos, fabs, sin, sqrt

cdef enum:
    N = 21
    MAXK = 9

cdef enum:
    RIEKF = 0
    LIEKF = 1
    ESEKF = 2


cdef inline void _skew(const double* w, double* out) noexcept nogil:
    out[0] = 0.0; out[1] = -w[2]; out[2] = w[1]
    out[3] = w[2]; out[4] = 0.0; out[5] = -w[0]
    out[6] = -w[1]; out[7] = w[0]; out[8] = 0.0


cdef inline void _mm3(const double* a, const double* b, double* out) noexcept nogil:
    cdef int i, j
    for i in range(3):
        for j in range(3):
            out[3 * i + j] = a[3 * i] * b[j] + a[3 * i + 1] * b[3 + j] + a[3 * i + 2] * b[6 + j]


cdef void _so3_exp(const double* t, double* R) noexcept nogil:
    cdef double x = t[0], y = t[1], z = t[2]
    cdef double phi2 = x * x + y * y + z * z
    cdef double phi = sqrt(phi2)
    cdef double a, b
    if phi < 1e-6:
        a = 1.0
        b = 0.5
    else:
        a = sin(phi) / phi
        b = (1.0 - cos(phi)) / phi2
    R[0] = 1.0 + b * (x * x - phi2); R[1] = -a * z + b * x * y; R[2] = a * y + b * x * z
    R[3] = a * z + b * x * y; R[4] = 1.0 + b * (y * y - phi2); R[5] = -a * x + b * y * z
    R[6] = -a * y + b * x * z; R[7] = a * x + b * y * z; R[8] = 1.0 + b * (z * z - phi2)


cdef void _put3(double* M, int ld, int r0, int c0, const double* blk, double scale) noexcept nogil:
    cdef int i, j
    for i in range(3):
        for j in range(3):
            M[(r0 + i) * ld + c0 + j] = scale * blk[3 * i + j]


def predict_covariance(int variant, double[:, ::1] P, double[:, ::1] R, double[::1] v,
                       double[::1] p, double[::1] w, double[::1] a, double dt,
                       double[::1] q, double[::1] g):
    """One covariance prediction step; see ``_kernels_py.predict_covariance``."""
    cdef double Rm[9], E[9], tmp[9], sk[9], th[3], acc[3], vm[3], pm[3]
    cdef double Fnn[81], Fnb[54], Gn[54], A[81], B[54], Qn[81]
    cdef double M[N * N], T[N * N]
    cdef double h = 0.5 * dt, s
    cdef int i, j, k
    out = np.empty((N, N))
    cdef double[:, ::1] Po = out

    with nogil:
        # mid-interval estimate
        for i in range(3):
            th[i] = w[i] * h
        _so3_exp(th, E)
        for i in range(3):
            acc[i] = R[i, 0] * a[0] + R[i, 1] * a[1] + R[i, 2] * a[2] + g[i]
            vm[i] = v[i] + acc[i] * h
            pm[i] = p[i] + v[i] * h + 0.5 * acc[i] * h * h
        for i in range(3):
            for j in range(3):
                Rm[3 * i + j] = R[i, 0] * E[j] + R[i, 1] * E[3 + j] + R[i, 2] * E[6 + j]

        for i in range(81):
            Fnn[i] = 0.0
        for i in range(54):
            Fnb[i] = 0.0
        if variant == RIEKF:
            _skew(&g[0], sk)
            _put3(Fnn, 9, 3, 0, sk, 1.0)
            Fnn[6 * 9 + 3] = 1.0; Fnn[7 * 9 + 4] = 1.0; Fnn[8 * 9 + 5] = 1.0
            _put3(Fnb, 6, 0, 0, Rm, -1.0)
            _skew(vm, sk)
            _mm3(sk, Rm, tmp)
            _put3(Fnb, 6, 3, 0, tmp, -1.0)
            _put3(Fnb, 6, 3, 3, Rm, -1.0)
            _skew(pm, sk)
            _mm3(sk, Rm, tmp)
            _put3(Fnb, 6, 6, 0, tmp, -1.0)
        elif variant == LIEKF:
            _skew(&w[0], sk)
            _put3(Fnn, 9, 0, 0, sk, -1.0)
            _put3(Fnn, 9, 3, 3, sk, -1.0)
            _put3(Fnn, 9, 6, 6, sk, -1.0)
            _skew(&a[0], sk)
            _put3(Fnn, 9, 3, 0, sk, -1.0)
            Fnn[6 * 9 + 3] = 1.0; Fnn[7 * 9 + 4] = 1.0; Fnn[8 * 9 + 5] = 1.0
            Fnb[0] = -1.0; Fnb[7] = -1.0; Fnb[14] = -1.0
            Fnb[3 * 6 + 3] = -1.0; Fnb[4 * 6 + 4] = -1.0; Fnb[5 * 6 + 5] = -1.0
        else:
            _skew(&w[0], sk)
            _put3(Fnn, 9, 0, 0, sk, -1.0)
            _skew(&a[0], sk)
            _mm3(Rm, sk, tmp)
            _put3(Fnn, 9, 3, 0, tmp, -1.0)
            Fnn[6 * 9 + 3] = 1.0; Fnn[7 * 9 + 4] = 1.0; Fnn[8 * 9 + 5] = 1.0
            Fnb[0] = -1.0; Fnb[7] = -1.0; Fnb[14] = -1.0
            _put3(Fnb, 6, 3, 3, Rm, -1.0)
        for i in range(54):
            Gn[i] = Fnb[i]

        # A = I + Fnn dt + 1/2 Fnn^2 dt^2, B = Fnb dt + 1/2 Fnn Fnb dt^2
        for i in range(9):
            for j in range(9):
                s = 0.0
                for k in range(9):
                    s += Fnn[i * 9 + k] * Fnn[k * 9 + j]
                A[i * 9 + j] = Fnn[i * 9 + j] * dt + 0.5 * s * dt * dt
            A[i * 9 + i] += 1.0
            for j in range(6):
                s = 0.0
                for k in range(9):
                    s += Fnn[i * 9 + k] * Fnb[k * 6 + j]
                B[i * 6 + j] = Fnb[i * 6 + j] * dt + 0.5 * s * dt * dt

        # Qn = Gn diag(q[0:6]) Gn^T
        for i in range(9):
            for j in range(9):
                s = 0.0
                for k in range(6):
                    s += Gn[i * 6 + k] * q[k] * Gn[j * 6 + k]
                Qn[i * 9 + j] = s

        # M = P + Qc dt
        for i in range(N):
            for j in range(N):
                M[i * N + j] = P[i, j]
        for i in range(9):
            for j in range(9):
                M[i * N + j] += Qn[i * 9 + j] * dt
        for i in range(12):
            M[(9 + i) * N + 9 + i] += q[6 + i] * dt

        # T = Phi M
        for i in range(9):
            for j in range(N):
                s = 0.0
                for k in range(9):
                    s += A[i * 9 + k] * M[k * N + j]
                for k in range(6):
                    s += B[i * 6 + k] * M[(9 + k) * N + j]
                T[i * N + j] = s
        for i in range(9, N):
            for j in range(N):
                T[i * N + j] = M[i * N + j]

        # P+ = T Phi^T
        for i in range(N):
            for j in range(9):
                s = 0.0
                for k in range(9):
                    s += T[i * N + k] * A[j * 9 + k]
                for k in range(6):
                    s += T[i * N + 9 + k] * B[j * 6 + k]
                Po[i, j] = s
            for j in range(9, N):
                Po[i, j] = T[i * N + j]
        for i in range(N):
            for j in range(i + 1, N):
                s = 0.5 * (Po[i, j] + Po[j, i])
                Po[i, j] = s
                Po[j, i] = s
    return out


cdef int _cholesky_inverse(double* S, double* Sinv, int k) noexcept nogil:
    # Cholesky S = L L^T, then Sinv = L^-T L^-1. Returns 0 on success.
    cdef double L[MAXK * MAXK], Li[MAXK * MAXK]
    cdef double s
    cdef int i, j, m
    for i in range(k * k):
        L[i] = 0.0
        Li[i] = 0.0
    for j in range(k):
        s = S[j * k + j]
        for m in range(j):
            s -= L[j * k + m] * L[j * k + m]
        if not (s > 0.0):
            return 1
        L[j * k + j] = sqrt(s)
        for i in range(j + 1, k):
            s = S[i * k + j]
            for m in range(j):
                s -= L[i * k + m] * L[j * k + m]
            L[i * k + j] = s / L[j * k + j]
    for j in range(k):
        Li[j * k + j] = 1.0 / L[j * k + j]
        for i in range(j + 1, k):
            s = 0.0
            for m in range(j, i):
                s -= L[i * k + m] * Li[m * k + j]
            Li[i * k + j] = s / L[i * k + i]
    for i in range(k):
        for j in range(k):
            s = 0.0
            for m in range(i if i > j else j, k):
                s += Li[m * k + i] * Li[m * k + j]
            Sinv[i * k + j] = s
    return 0


cdef double _norm1(const double* S, int k) noexcept nogil:
    cdef double best = 0.0, s
    cdef int i, j
    for j in range(k):
        s = 0.0
        for i in range(k):
            s += fabs(S[i * k + j])
        if s > best:
            best = s
    return best


def kalman_update(double[:, ::1] P, double[:, ::1] H, double[:, ::1] Rm, double[::1] z,
                  double gate, double max_cond):
    """Joseph-form update; see ``_kernels_py.kalman_update``."""
    cdef int k = H.shape[0]
    if k < 1 or k > MAXK or H.shape[1] != N or Rm.shape[0] != k or Rm.shape[1] != k or z.shape[0] != k:
        raise ValueError("inconsistent measurement dimensions")
    cdef double PHt[N * MAXK], S[MAXK * MAXK], Sinv[MAXK * MAXK], K[N * MAXK]
    cdef double KR[N * MAXK], W[N * MAXK], LP[N * N]
    cdef double s, d2 = 0.0, cond
    cdef int i, j, m, status = 0
    dx_arr = np.zeros(N)
    out = np.empty((N, N))
    cdef double[::1] dx = dx_arr
    cdef double[:, ::1] Po = out

    with nogil:
        for i in range(N):
            for j in range(k):
                s = 0.0
                for m in range(N):
                    s += P[i, m] * H[j, m]
                PHt[i * k + j] = s
        for i in range(k):
            for j in range(k):
                s = 0.0
                for m in range(N):
                    s += H[i, m] * PHt[m * k + j]
                S[i * k + j] = s + Rm[i, j]
        for i in range(k):
            for j in range(i + 1, k):
                s = 0.5 * (S[i * k + j] + S[j * k + i])
                S[i * k + j] = s
                S[j * k + i] = s
        if _cholesky_inverse(S, Sinv, k) != 0:
            status = 2
        else:
            cond = _norm1(S, k) * _norm1(Sinv, k)
            if not (cond <= max_cond):
                status = 2
        if status == 0:
            for i in range(k):
                s = 0.0
                for j in range(k):
                    s += Sinv[i * k + j] * z[j]
                d2 += z[i] * s
            if d2 > gate:
                status = 1
        if status == 0:
            # K = P H^T S^-1, dx = K z
            for i in range(N):
                for j in range(k):
                    s = 0.0
                    for m in range(k):
                        s += PHt[i * k + m] * Sinv[m * k + j]
                    K[i * k + j] = s
                s = 0.0
                for j in range(k):
                    s += K[i * k + j] * z[j]
                dx[i] = s
            # Joseph form (I - KH) P (I - KH)^T + K Rm K^T, multiplied through
            # the low-rank structure of I - KH: LP = P - K (HP), W = LP H^T.
            for i in range(N):
                for j in range(N):
                    s = P[i, j]
                    for m in range(k):
                        s -= K[i * k + m] * PHt[j * k + m]
                    LP[i * N + j] = s
            for i in range(N):
                for j in range(k):
                    s = 0.0
                    for m in range(N):
                        s += LP[i * N + m] * H[j, m]
                    W[i * k + j] = s
                    s = 0.0
                    for m in range(k):
                        s += K[i * k + m] * Rm[m, j]
                    KR[i * k + j] = s
            for i in range(N):
                for j in range(N):
                    s = LP[i * N + j]
                    for m in range(k):
                        s += (KR[i * k + m] - W[i * k + m]) * K[j * k + m]
                    Po[i, j] = s
            for i in range(N):
                for j in range(i + 1, N):
                    s = 0.5 * (Po[i, j] + Po[j, i])
                    Po[i, j] = s
                    Po[j, i] = s
        else:
            for i in range(N):
                for j in range(N):
                    Po[i, j] = P[i, j]
    return status, dx_arr, out, d2


cdef void _so3_jl(const double* t, double* J) noexcept nogil:
    # J = I + b K + c K^2
    cdef double x = t[0], y = t[1], z = t[2]
    cdef double phi2 = x * x + y * y + z * z
    cdef double phi = sqrt(phi2)
    cdef double b, c
    if phi < 1e-6:
        b = 0.5
        c = 1.0 / 6.0
    else:
        b = (1.0 - cos(phi)) / phi2
        c = (phi - sin(phi)) / (phi2 * phi)
    J[0] = 1.0 + c * (x * x - phi2); J[1] = -b * z + c * x * y; J[2] = b * y + c * x * z
    J[3] = b * z + c * x * y; J[4] = 1.0 + c * (y * y - phi2); J[5] = -b * x + c * y * z
    J[6] = -b * y + c * x * z; J[7] = b * x + c * y * z; J[8] = 1.0 + c * (z * z - phi2)


cdef inline void _mv3(const double* M, const double* x, double* out) noexcept nogil:
    cdef int i
    for i in range(3):
        out[i] = M[3 * i] * x[0] + M[3 * i + 1] * x[1] + M[3 * i + 2] * x[2]


def inject_error(int variant, double[:, ::1] R, double[::1] v, double[::1] p,
                 double[:, ::1] R_ab, double[::1] dx):
    """Apply a 21-element error to ``(R, v, p, R_ab)``; see ``_kernels_py.inject_error``."""
    cdef double Ri[9], Rai[9], E[9], J[9], Ea[9], M[9], t1[3], t2[3]
    cdef int i
    Ro_arr = np.empty((3, 3))
    vo_arr = np.empty(3)
    po_arr = np.empty(3)
    Rao_arr = np.empty((3, 3))
    cdef double[:, ::1] Ro = Ro_arr
    cdef double[::1] vo = vo_arr
    cdef double[::1] po = po_arr
    cdef double[:, ::1] Rao = Rao_arr
    with nogil:
        for i in range(9):
            Ri[i] = R[i // 3, i % 3]
            Rai[i] = R_ab[i // 3, i % 3]
        _so3_exp(&dx[0], E)
        _so3_exp(&dx[15], Ea)
        if variant == RIEKF:
            _so3_jl(&dx[0], J)
            _mm3(E, Ri, M)
            for i in range(9):
                Ro[i // 3, i % 3] = M[i]
            _mm3(Ea, Rai, M)
            for i in range(9):
                Rao[i // 3, i % 3] = M[i]
            _mv3(E, &v[0], t1)
            _mv3(J, &dx[3], t2)
            for i in range(3):
                vo[i] = t1[i] + t2[i]
            _mv3(E, &p[0], t1)
            _mv3(J, &dx[6], t2)
            for i in range(3):
                po[i] = t1[i] + t2[i]
        else:
            _mm3(Ri, E, M)
            for i in range(9):
                Ro[i // 3, i % 3] = M[i]
            _mm3(Rai, Ea, M)
            for i in range(9):
                Rao[i // 3, i % 3] = M[i]
            if variant == LIEKF:
                _so3_jl(&dx[0], J)
                _mm3(Ri, J, M)
                _mv3(M, &dx[3], t1)
                _mv3(M, &dx[6], t2)
            else:
                for i in range(3):
                    t1[i] = dx[3 + i]
                    t2[i] = dx[6 + i]
            for i in range(3):
                vo[i] = v[i] + t1[i]
                po[i] = p[i] + t2[i]
    return Ro_arr, vo_arr, po_arr, Rao_arr
