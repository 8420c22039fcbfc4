import math

import numpy as np
import pytest
from scipy import integrate

from randwg.medium import CUSTOM, GAUSSIAN, CovarianceModel, z_fourier, z_half_transform

SQRT2PI = math.sqrt(2.0 * math.pi)


def test_gaussian_fourier_pairs():
    m = CovarianceModel(ell=0.8)
    spec = m.spectrum()
    assert spec.g_hat(0.0) == pytest.approx(SQRT2PI * 0.8, rel=1e-14)
    for beta in (0.3, 1.7, 5.0):
        assert spec.g_hat(beta) == pytest.approx(
            SQRT2PI * 0.8 * math.exp(-0.5 * (beta * 0.8) ** 2), rel=1e-13
        )


def test_derivative_reduction_rules():
    m = CovarianceModel(ell=1.2)
    for beta in (0.0, 0.9, 3.3):
        g0 = z_fourier(m, beta, 0)
        assert z_fourier(m, beta, 1) == pytest.approx(-1j * beta * g0, rel=1e-12)
        assert z_fourier(m, beta, 2) == pytest.approx(-(beta**2) * g0, rel=1e-12)
    with pytest.raises(ValueError):
        z_fourier(m, 1.0, 3)


def test_half_line_transforms_gaussian():
    m = CovarianceModel(ell=0.7)
    spec = m.spectrum()
    assert spec.half_cos(0.0) == pytest.approx(math.sqrt(math.pi / 2) * 0.7, rel=1e-13)
    assert spec.half_sin(0.0) == 0.0
    for beta in np.linspace(0.0, 12.0, 20):
        assert 2.0 * spec.half_cos(beta) == pytest.approx(spec.g_hat(beta), abs=1e-9)


def test_damped_transforms_against_quadrature():
    m = CovarianceModel(ell=0.9)
    spec = m.spectrum()
    for a, beta in [(0.0, 1.3), (0.5, 0.0), (2.2, 3.7), (6.0, 1.1)]:
        for kind, trig in (("cos", np.cos), ("sin", np.sin)):
            want, _ = integrate.quad(
                lambda z: math.exp(-a * z) * trig(beta * z) * math.exp(-z * z / (2 * 0.81)),
                0.0,
                20.0,
                limit=300,
            )
            got = z_half_transform(m, kind, beta, decay=a)
            assert got == pytest.approx(want, abs=1e-11)


def test_half_line_derivative_orders():
    m = CovarianceModel(ell=1.1)
    ell2 = 1.1**2

    def g1(z):
        return -z / ell2 * math.exp(-z * z / (2 * ell2))

    def g2(z):
        return (z * z / ell2**2 - 1.0 / ell2) * math.exp(-z * z / (2 * ell2))

    for a, beta in [(0.4, 1.9), (1.5, 0.6)]:
        for kind, trig in (("cos", np.cos), ("sin", np.sin)):
            for deriv, g in ((1, g1), (2, g2)):
                want, _ = integrate.quad(
                    lambda z: math.exp(-a * z) * trig(beta * z) * g(z), 0.0, 25.0, limit=300
                )
                got = z_half_transform(m, kind, beta, decay=a, deriv=deriv)
                assert got == pytest.approx(want, abs=1e-9)


def test_psd_and_monotonicity():
    m = CovarianceModel()
    spec = m.spectrum()
    k = 2 * math.pi
    betas = np.linspace(0.0, 4 * k, 60)
    vals = np.array([spec.g_hat(b) for b in betas])
    assert np.all(vals >= 0.0)
    assert np.all(np.diff(vals) < 0.0)  # strictly decreasing in |beta|
    assert spec.g_hat(1.0) == spec.g_hat(-1.0)


def test_custom_separable_matches_gaussian():
    ell = 1.3
    custom = CovarianceModel(
        kind=CUSTOM,
        ell=ell,
        transverse_kernel=lambda dx1, dx2: np.exp(-(np.asarray(dx1) ** 2 + np.asarray(dx2) ** 2) / (2 * ell**2)),
        longitudinal=lambda z: np.exp(-np.asarray(z) ** 2 / (2 * ell**2)),
    )
    ref = CovarianceModel(ell=ell)
    cs, rs = custom.spectrum(), ref.spectrum()
    for beta in (0.0, 0.8, 2.5):
        assert cs.g_hat(beta) == pytest.approx(rs.g_hat(beta), rel=1e-9)
        assert cs.half_sin(beta, decay=0.7) == pytest.approx(rs.half_sin(beta, decay=0.7), abs=1e-10)
    assert not custom.axis_separable


def test_model_validation():
    with pytest.raises(ValueError):
        CovarianceModel(kind="weird")
    with pytest.raises(ValueError):
        CovarianceModel(ell=-1.0)
    with pytest.raises(ValueError):
        CovarianceModel(kind=CUSTOM)
    with pytest.raises(ValueError):
        z_half_transform(CovarianceModel(), "tan", 1.0)
    with pytest.raises(ValueError):
        CovarianceModel().spectrum().half_cos(1.0, decay=-0.1)


def test_kernel_diagonal_is_unit_variance():
    m = CovarianceModel(ell=2.0, sigma2=3.0)
    assert float(m.kernel(0.0, 0.0)) == 1.0
    assert float(m.g(0.0)) == 1.0
