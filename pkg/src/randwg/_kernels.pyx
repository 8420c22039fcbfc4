# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled forward integrator for the coupled-amplitude equations.

Classical RK4 on the linear system dA/dz = eps * H(z) A, where the
coupling matrix entry (a, b) is rebuilt at every stage from the sampled
pair-process paths,

    H[a, b](z) = 0.5 * (cA*dPsi + i*(cP*Psi + cT*Theta))[a, b](z)
                 * exp(i (beta_b - beta_a) z),

three gathers and a few multiplies per entry.  This inner loop dominates
the Monte Carlo runtime, hence the compiled core; ``randwg._kernels_py``
holds the pure-python reference selected at import when the extension is
unavailable.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

ctypedef cnp.int64_t i64
ctypedef double complex cplx


cdef inline void _rhs(
    double[:, ::1] X,
    double[:, ::1] Xd,
    i64[:, ::1] ppi,
    i64[:, ::1] tti,
    double[:, ::1] cA,
    double[:, ::1] cP,
    double[:, ::1] cT,
    double[::1] beta,
    cplx* Ain,
    cplx* out,
    cplx* ph,
    Py_ssize_t d,
    Py_ssize_t si,
    double z,
    double eps,
) noexcept nogil:
    cdef Py_ssize_t a, b
    cdef double re, im
    cdef cplx m, acc, rot
    for a in range(d):
        ph[a] = cos(beta[a] * z) + 1j * sin(beta[a] * z)
    for a in range(d):
        acc = 0
        for b in range(d):
            m = 0.5 * (
                cA[a, b] * Xd[ppi[a, b], si]
                + 1j * (cP[a, b] * X[ppi[a, b], si] + cT[a, b] * X[tti[a, b], si])
            )
            rot = ph[b] * ph[a].conjugate()
            acc = acc + m * rot * Ain[b]
        out[a] = eps * acc


def rk4_forward(
    double[:, ::1] X,
    double[:, ::1] Xd,
    i64[:, ::1] ppi,
    i64[:, ::1] tti,
    double[:, ::1] cA,
    double[:, ::1] cP,
    double[:, ::1] cT,
    double[::1] beta,
    cplx[::1] A0,
    double eps,
    double dz,
    Py_ssize_t nsteps,
    i64[::1] check_steps,
):
    """Integrate the amplitudes; returns an (n_checkpoints, d) array.

    ``X``/``Xd`` are the pair-process paths and their range derivatives
    sampled at half steps (2*nsteps + 1 columns); ``check_steps`` holds
    ascending step indices in [0, nsteps] at which the state is recorded.
    """
    cdef Py_ssize_t d = A0.shape[0]
    cdef Py_ssize_t ncheck = check_steps.shape[0]
    if X.shape[1] < 2 * nsteps + 1:
        raise ValueError("path arrays are shorter than 2*nsteps + 1 samples")
    out_np = np.zeros((ncheck, d), dtype=np.complex128)
    cdef cplx[:, ::1] out = out_np
    buf_np = np.zeros((7, d), dtype=np.complex128)
    cdef cplx[:, ::1] buf = buf_np

    cdef cplx* A = &buf[0, 0]
    cdef cplx* k1 = &buf[1, 0]
    cdef cplx* k2 = &buf[2, 0]
    cdef cplx* k3 = &buf[3, 0]
    cdef cplx* k4 = &buf[4, 0]
    cdef cplx* tmp = &buf[5, 0]
    cdef cplx* ph = &buf[6, 0]

    cdef Py_ssize_t step, ic = 0, a
    cdef double z0, h6 = dz / 6.0

    for a in range(d):
        A[a] = A0[a]

    with nogil:
        for step in range(nsteps + 1):
            if ic < ncheck and step == check_steps[ic]:
                for a in range(d):
                    out[ic, a] = A[a]
                ic += 1
            if step == nsteps:
                break
            z0 = step * dz
            _rhs(X, Xd, ppi, tti, cA, cP, cT, beta, A, k1, ph, d, 2 * step, z0, eps)
            for a in range(d):
                tmp[a] = A[a] + 0.5 * dz * k1[a]
            _rhs(X, Xd, ppi, tti, cA, cP, cT, beta, tmp, k2, ph, d, 2 * step + 1, z0 + 0.5 * dz, eps)
            for a in range(d):
                tmp[a] = A[a] + 0.5 * dz * k2[a]
            _rhs(X, Xd, ppi, tti, cA, cP, cT, beta, tmp, k3, ph, d, 2 * step + 1, z0 + 0.5 * dz, eps)
            for a in range(d):
                tmp[a] = A[a] + dz * k3[a]
            _rhs(X, Xd, ppi, tti, cA, cP, cT, beta, tmp, k4, ph, d, 2 * step + 2, z0 + dz, eps)
            for a in range(d):
                A[a] = A[a] + h6 * (k1[a] + 2 * k2[a] + 2 * k3[a] + k4[a])
    return out_np
