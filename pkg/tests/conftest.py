import warnings

import numpy as np
import pytest

from randwg import CovarianceModel, Geometry, assemble_coupling_tensor, enumerate_modes
from randwg.moments import compute_moments, scattering_mean_free_paths

SMALL = dict(L1=1.3, L2=2.1)


@pytest.fixture(scope="session")
def small_basis():
    return enumerate_modes(Geometry(**SMALL), n_evanescent=48)


@pytest.fixture(scope="session")
def small_model():
    return CovarianceModel(sigma2=0.05)


@pytest.fixture(scope="session")
def small_tensor(small_basis, small_model):
    return assemble_coupling_tensor(small_basis, small_model, include_evanescent=True)


@pytest.fixture(scope="session")
def small_moments(small_basis, small_tensor, small_model):
    return compute_moments(small_basis, small_tensor, small_model, include_kappa=True)


@pytest.fixture(scope="session")
def small_mfp(small_moments):
    return scattering_mean_free_paths([b.C for b in small_moments.blocks])


@pytest.fixture(scope="session")
def unit_square_basis():
    # rational aspect ratio: degenerate eigenvalues, tie-break warning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return enumerate_modes(Geometry(1.0, 1.0), n_evanescent=0)


def block_vector(basis, A):
    out = []
    off = 0
    for f in basis.families:
        m = f.multiplicity
        a = A[off : off + m]
        out.append(np.outer(a, a.conj()))
        off += m
    return out
