"""Pure-python reference implementation of the forward integrator.

Mirrors ``randwg._kernels`` exactly (same stage structure and summation
order up to float associativity); selected at import time when the
compiled extension is unavailable.  Roughly two orders of magnitude
slower, see benchmarks/bench_kernels.py.
"""

from __future__ import annotations

import numpy as np


def rk4_forward(X, Xd, ppi, tti, cA, cP, cT, beta, A0, eps, dz, nsteps, check_steps):
    """Integrate the amplitudes; returns an (n_checkpoints, d) array."""
    d = A0.shape[0]
    if X.shape[1] < 2 * nsteps + 1:
        raise ValueError("path arrays are shorter than 2*nsteps + 1 samples")
    out = np.zeros((len(check_steps), d), dtype=complex)
    A = A0.astype(complex).copy()
    half = 1j * cP
    theta_w = 1j * cT

    def rhs(Avec, si, z):
        M = 0.5 * (cA * Xd[ppi, si] + half * X[ppi, si] + theta_w * X[tti, si])
        ph = np.exp(1j * beta * z)
        return eps * ((M * (np.conj(ph)[:, None] * ph[None, :])) @ Avec)

    ic = 0
    for step in range(nsteps + 1):
        if ic < len(check_steps) and step == check_steps[ic]:
            out[ic] = A
            ic += 1
        if step == nsteps:
            break
        z0 = step * dz
        k1 = rhs(A, 2 * step, z0)
        k2 = rhs(A + 0.5 * dz * k1, 2 * step + 1, z0 + 0.5 * dz)
        k3 = rhs(A + 0.5 * dz * k2, 2 * step + 1, z0 + 0.5 * dz)
        k4 = rhs(A + dz * k3, 2 * step + 2, z0 + dz)
        A = A + dz / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return out
