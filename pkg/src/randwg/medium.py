"""Fluctuation statistics of the dielectric and their range transforms.

The permittivity fluctuation ``nu`` is a zero-mean stationary random
field with separable covariance

    R(x, x', z) = sigma2 * transverse_kernel(x, x') * g(z),

``g`` even, ``g(0) = 1`` and integrable.  The default
``gaussian-isotropic`` kind uses

    transverse_kernel(x, x') = exp(-|x - x'|^2 / (2 ell^2)),
    g(z) = exp(-z^2 / (2 ell^2)).

Every second-moment formula downstream consumes ``g`` only through a few
range transforms (full-line Fourier, half-line cosine/sine, exponentially
damped half-line integrals), collected here in :class:`ZSpectrum`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import dawsn, wofz

GAUSSIAN = "gaussian-isotropic"
CUSTOM = "custom-separable"

_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class CovarianceModel:
    """Separable covariance of the refractive-index fluctuations.

    Non-separable statistics are out of scope: the transverse kernel and
    the longitudinal factor are independent ingredients by construction.
    Mean free paths scale as ``1/sigma2``.
    """

    kind: str = GAUSSIAN
    ell: float = 1.0
    sigma2: float = 1.0
    transverse_kernel: Callable | None = None
    longitudinal: Callable | None = None

    def __post_init__(self) -> None:
        if self.kind not in (GAUSSIAN, CUSTOM):
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.ell <= 0:
            raise ValueError("correlation length must be positive")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        if self.kind == CUSTOM and (self.transverse_kernel is None or self.longitudinal is None):
            raise ValueError("custom-separable needs transverse_kernel and longitudinal")

    # -- transverse factor -------------------------------------------------

    def kernel(self, dx1, dx2) -> np.ndarray:
        """Unit-variance transverse kernel evaluated at separations."""
        if self.kind == GAUSSIAN:
            r2 = np.asarray(dx1, dtype=float) ** 2 + np.asarray(dx2, dtype=float) ** 2
            return np.exp(-r2 / (2.0 * self.ell**2))
        return np.asarray(self.transverse_kernel(dx1, dx2), dtype=float)

    @property
    def axis_separable(self) -> bool:
        """Whether kernel(dx1, dx2) = k1(dx1) * k2(dx2)."""
        return self.kind == GAUSSIAN

    def axis_kernel(self, dx) -> np.ndarray:
        if self.kind != GAUSSIAN:
            raise ValueError("axis factorization only available for the gaussian kind")
        return np.exp(-np.asarray(dx, dtype=float) ** 2 / (2.0 * self.ell**2))

    # -- longitudinal factor -----------------------------------------------

    def g(self, z) -> np.ndarray:
        if self.kind == GAUSSIAN:
            return np.exp(-np.asarray(z, dtype=float) ** 2 / (2.0 * self.ell**2))
        return np.asarray(self.longitudinal(z), dtype=float)

    def z_cut(self) -> float:
        """Effective support: smallest z with g below 1e-16."""
        if self.kind == GAUSSIAN:
            return self.ell * math.sqrt(-2.0 * math.log(1e-16))
        z = self.ell
        while abs(float(self.g(z))) > 1e-16 and z < 1e6 * self.ell:
            z *= 1.5
        return z

    def spectrum(self) -> "ZSpectrum":
        return ZSpectrum(self)


@dataclass(frozen=True)
class ZSpectrum:
    """Range transforms of the longitudinal correlation factor ``g``.

    All transforms are of the unit-variance factor; callers multiply by
    ``sigma2`` where the covariance enters.
    """

    model: CovarianceModel
    _zcut: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_zcut", self.model.z_cut())

    # -- full-line Fourier ---------------------------------------------------

    def g_hat(self, beta: float, deriv: int = 0):
        """``int g^(deriv)(z) exp(i beta z) dz``.

        Derivatives are reduced by parts (g, g' vanish at infinity):
        deriv=1 gives ``-1j*beta*g_hat(beta)`` and deriv=2 gives
        ``-beta**2*g_hat(beta)``.
        """
        base = self._g_hat0(beta)
        if deriv == 0:
            return base
        if deriv == 1:
            return -1j * beta * base
        if deriv == 2:
            return -(beta**2) * base
        raise ValueError("deriv must be 0, 1 or 2")

    def _g_hat0(self, beta: float) -> float:
        if self.model.kind == GAUSSIAN:
            ell = self.model.ell
            return _SQRT2PI * ell * math.exp(-0.5 * (beta * ell) ** 2)
        return 2.0 * self.half_cos(beta)

    # -- half-line transforms --------------------------------------------------

    def half_cos(self, beta: float, decay: float = 0.0, deriv: int = 0) -> float:
        """``int_0^inf exp(-decay*z) cos(beta*z) g^(deriv)(z) dz``."""
        return self._half(np.cos, beta, decay, deriv)

    def half_sin(self, beta: float, decay: float = 0.0, deriv: int = 0) -> float:
        """``int_0^inf exp(-decay*z) sin(beta*z) g^(deriv)(z) dz``."""
        return self._half(np.sin, beta, decay, deriv)

    def _half(self, trig, beta: float, decay: float, deriv: int) -> float:
        if decay < 0:
            raise ValueError("decay rate must be >= 0")
        if deriv not in (0, 1, 2):
            raise ValueError("deriv must be 0, 1 or 2")
        if deriv == 1:
            # by parts: boundary term at z=0 plus first-order transforms
            c = self._half(np.cos, beta, decay, 0)
            s = self._half(np.sin, beta, decay, 0)
            g0 = float(self.model.g(0.0))
            if trig is np.cos:
                return -g0 + decay * c + beta * s
            return decay * s - beta * c
        if deriv == 2:
            # g'(0) = 0 for an even correlation function
            c1 = self._half(np.cos, beta, decay, 1)
            s1 = self._half(np.sin, beta, decay, 1)
            if trig is np.cos:
                return decay * c1 + beta * s1
            return decay * s1 - beta * c1

        if self.model.kind == GAUSSIAN:
            return self._half_gaussian(trig, beta, decay)
        return self._half_quad(trig, beta, decay)

    def _half_gaussian(self, trig, beta: float, decay: float) -> float:
        ell = self.model.ell
        if decay == 0.0 and trig is np.cos:
            return 0.5 * self._g_hat0(beta)
        if decay == 0.0:
            return math.sqrt(2.0) * ell * float(dawsn(beta * ell / math.sqrt(2.0)))
        # int_0^inf exp(-z^2/2l^2) exp((-a+i b) z) dz via the Faddeeva function
        u = (decay - 1j * beta) * ell / math.sqrt(2.0)
        val = ell * math.sqrt(math.pi / 2.0) * wofz(1j * u)
        return float(val.real) if trig is np.cos else float(val.imag)

    def _half_quad(self, trig, beta: float, decay: float) -> float:
        def integrand(z):
            return math.exp(-decay * z) * trig(beta * z) * float(self.model.g(z))

        val, err = integrate.quad(
            integrand, 0.0, self._zcut, epsabs=1e-13, epsrel=1e-10, limit=400
        )
        if not np.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
            raise RuntimeError(
                f"half-line transform did not converge (err={err:.2e}, val={val:.2e})"
            )
        return val


def z_fourier(model: CovarianceModel, beta: float, deriv: int = 0):
    """Module-level convenience wrapper around :meth:`ZSpectrum.g_hat`."""
    return model.spectrum().g_hat(beta, deriv)


def z_half_transform(
    model: CovarianceModel,
    kind: str,
    beta: float,
    decay: float = 0.0,
    deriv: int = 0,
) -> float:
    """Half-line trig transform of ``g^(deriv)`` with exponential damping."""
    spec = model.spectrum()
    if kind == "cos":
        return spec.half_cos(beta, decay, deriv)
    if kind == "sin":
        return spec.half_sin(beta, decay, deriv)
    raise ValueError("kind must be 'cos' or 'sin'")
