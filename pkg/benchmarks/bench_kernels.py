"""Benchmark the compiled forward integrator against the python fallback.

Run:  python benchmarks/bench_kernels.py [n_realizations]
"""

import sys
import time

import numpy as np

from randwg import CovarianceModel, Geometry, assemble_coupling_tensor, enumerate_modes
from randwg import kernels
from randwg import montecarlo as mc


def run(backend, synth, maps, A0, eps, n_real, checks):
    impl = kernels.get_backend(backend)
    cA, cP, cT, ppi, tti, beta = maps
    t0 = time.perf_counter()
    acc = np.zeros((len(checks), len(A0)), dtype=complex)
    for idx in range(n_real):
        X, Xd = synth.sample(idx, 2)
        acc += impl.rk4_forward(
            X, Xd, ppi, tti, cA, cP, cT, beta, A0, eps, synth.dz, synth.nsteps, checks
        )
    return time.perf_counter() - t0, acc


def main() -> None:
    n_real = int(sys.argv[1]) if len(sys.argv) > 1 else 25
    basis = enumerate_modes(Geometry(1.3, 2.1))
    model = CovarianceModel(sigma2=0.05)
    tensor = assemble_coupling_tensor(basis, model)
    synth = mc.build_synthesizer(basis, tensor, model, z_len=45.0, dz=0.1)
    maps = mc.coupling_maps(basis)
    d = len(basis.propagating)
    A0 = np.zeros(d, dtype=complex)
    A0[0] = 1.0
    checks = np.array([0, synth.nsteps], dtype=np.int64)

    print(f"waveguide N={basis.n_propagating} ({d} amplitudes), "
          f"{synth.nsteps} RK4 steps, {n_real} realizations")
    results = {}
    for backend in ("python", "cython"):
        try:
            dt, acc = run(backend, synth, maps, A0, 0.05, n_real, checks)
        except ImportError:
            print(f"{backend:>7}: unavailable")
            continue
        results[backend] = (dt, acc)
        print(f"{backend:>7}: {dt:8.3f}s total, {dt / n_real * 1e3:8.2f} ms/realization")
    if len(results) == 2:
        diff = np.abs(results["python"][1] - results["cython"][1]).max()
        speedup = results["python"][0] / results["cython"][0]
        print(f"speedup: {speedup:.1f}x, max result difference {diff:.2e}")


if __name__ == "__main__":
    main()
