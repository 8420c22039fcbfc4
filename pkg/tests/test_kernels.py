import numpy as np
import pytest

from randwg import kernels
from randwg import montecarlo as mc


@pytest.fixture(scope="module")
def setup(small_basis, small_tensor, small_model):
    synth = mc.build_synthesizer(small_basis, small_tensor, small_model, z_len=30.0, dz=0.1)
    maps = mc.coupling_maps(small_basis)
    d = len(small_basis.propagating)
    A0 = np.zeros(d, dtype=complex)
    A0[0] = 1.0
    A0[3] = 0.4 - 0.2j
    return synth, maps, A0


def _args(synth, maps, A0, eps, checks):
    X, Xd = synth.sample(7, 123)
    cA, cP, cT, ppi, tti, beta = maps
    return (X, Xd, ppi, tti, cA, cP, cT, beta, A0, eps, synth.dz, synth.nsteps, checks)


def test_backends_agree(setup):
    synth, maps, A0 = setup
    checks = np.array([0, synth.nsteps // 2, synth.nsteps], dtype=np.int64)
    out_py = kernels.get_backend("python").rk4_forward(*_args(synth, maps, A0, 0.05, checks))
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        pytest.skip("compiled extension not built")
    out_cy = cy.rk4_forward(*_args(synth, maps, A0, 0.05, checks))
    assert np.abs(out_cy - out_py).max() < 1e-13


def test_zero_epsilon_keeps_amplitudes(setup):
    synth, maps, A0 = setup
    checks = np.array([0, synth.nsteps], dtype=np.int64)
    out = kernels.rk4_forward(*_args(synth, maps, A0, 0.0, checks))
    assert np.array_equal(out[0], A0)
    assert np.array_equal(out[1], A0)


def test_deterministic_replay(setup):
    synth, maps, A0 = setup
    checks = np.array([synth.nsteps], dtype=np.int64)
    a = kernels.rk4_forward(*_args(synth, maps, A0, 0.05, checks))
    b = kernels.rk4_forward(*_args(synth, maps, A0, 0.05, checks))
    assert np.array_equal(a, b)


def test_energy_drift_shrinks_with_epsilon(setup):
    synth, maps, A0 = setup
    checks = np.arange(synth.nsteps + 1, dtype=np.int64)
    e0 = float(np.sum(np.abs(A0) ** 2))

    def drift(eps):
        worst = 0.0
        for idx in range(6):
            X, Xd = synth.sample(idx, 99)
            cA, cP, cT, ppi, tti, beta = maps
            out = kernels.rk4_forward(
                X, Xd, ppi, tti, cA, cP, cT, beta, A0, eps, synth.dz, synth.nsteps, checks
            )
            e = np.sum(np.abs(out) ** 2, axis=1)
            worst = max(worst, float(np.abs(e - e0).max() / e0))
        return worst

    d1, d2 = drift(0.05), drift(0.025)
    # first-order remainder: ratio about one half, within a factor of two
    assert d2 < d1
    assert 0.25 <= d2 / d1 <= 1.0


def test_path_length_validation(setup):
    synth, maps, A0 = setup
    cA, cP, cT, ppi, tti, beta = maps
    X, Xd = synth.sample(0, 1)
    with pytest.raises(ValueError):
        kernels.rk4_forward(
            X[:, : 2 * synth.nsteps - 4],
            Xd[:, : 2 * synth.nsteps - 4],
            ppi,
            tti,
            cA,
            cP,
            cT,
            beta,
            A0,
            0.05,
            synth.dz,
            synth.nsteps,
            np.array([0], dtype=np.int64),
        )


def test_backend_name_and_forcing():
    assert kernels.backend_name() in ("cython", "python")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
